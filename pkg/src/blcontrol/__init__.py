"""Solvers and controls that steer the 1-D viscous Burgers equation to rest."""
