import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def solve_tridiag(a, b, c, d):
    """
    Solve a tridiagonal system with the Thomas algorithm.

    Parameters
    ----------
    a : ndarray
        Lower diagonal, length n, ``a[0]`` unused.
    b : ndarray
        Main diagonal, length n.
    c : ndarray
        Upper diagonal, length n, ``c[-1]`` unused.
    d : ndarray
        Right-hand side, length n.

    Returns
    -------
    x : ndarray
        Solution vector. The inputs are left untouched.

    No pivoting: intended for diagonally dominant matrices such as the
    backward-Euler heat operator.
    """
    n = d.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = c[0] / b[0]
    dp[0] = d[0] / b[0]
    for k in range(1, n):
        m = b[k] - a[k] * cp[k - 1]
        cp[k] = c[k] / m
        dp[k] = (d[k] - a[k] * dp[k - 1]) / m
    x = np.empty(n)
    x[n - 1] = dp[n - 1]
    for k in range(n - 2, -1, -1):
        x[k] = dp[k] - cp[k] * x[k + 1]
    return x


@njit(cache=True, nogil=True)
def factor_toeplitz(r, n):
    """Forward-sweep coefficients of tridiag(-r, 1 + 2r, -r) of size n.

    Returns ``(cp, inv)`` so that repeated solves only need the sweeps in
    :func:`solve_factored`.
    """
    cp = np.empty(n)
    inv = np.empty(n)
    m = 1.0 + 2.0 * r
    inv[0] = 1.0 / m
    cp[0] = -r * inv[0]
    for k in range(1, n):
        m = 1.0 + 2.0 * r + r * cp[k - 1]
        inv[k] = 1.0 / m
        cp[k] = -r * inv[k]
    return cp, inv


@njit(cache=True, nogil=True)
def solve_factored(r, cp, inv, d, out):
    n = d.shape[0]
    dp = out
    dp[0] = d[0] * inv[0]
    for k in range(1, n):
        dp[k] = (d[k] + r * dp[k - 1]) * inv[k]
    for k in range(n - 2, -1, -1):
        dp[k] = dp[k] - cp[k] * dp[k + 1]
    return dp
