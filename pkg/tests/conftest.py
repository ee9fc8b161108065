import numpy as np
import pytest
from scipy.integrate import quad


def cole_hopf_sine_solution(T, x, n_terms=60):
    """Exact y(T, x) for y_t + y y_x = y_xx, y(0) = sin(pi x), y(t, 0) = y(t, 1) = 0.

    z = exp(-1/2 int_0^x y) solves the Neumann heat equation, expanded in
    cos(k pi x) with coefficients computed by adaptive quadrature.
    """
    z0 = lambda s: np.exp(-(1 - np.cos(np.pi * s)) / (2 * np.pi))
    a = np.empty(n_terms)
    a[0] = quad(z0, 0, 1, epsabs=1e-14, epsrel=1e-14)[0]
    for k in range(1, n_terms):
        a[k] = 2 * quad(lambda s: z0(s) * np.cos(k * np.pi * s), 0, 1,
                        epsabs=1e-14, epsrel=1e-14, limit=200)[0]
    k = np.arange(n_terms)
    decay = a * np.exp(-(k * np.pi) ** 2 * T)
    z = np.cos(np.outer(x, k * np.pi)) @ decay
    zx = -np.sin(np.outer(x, k * np.pi)) @ (decay * k * np.pi)
    return -2 * zx / z


@pytest.fixture(scope="session")
def sine_oracle():
    return cole_hopf_sine_solution


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
