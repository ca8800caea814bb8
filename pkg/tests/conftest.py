import numpy as np
import pytest


def gauss_solve(a, b):
    """Gaussian elimination with partial pivoting, written out by hand."""
    a = [list(map(float, row)) for row in np.asarray(a)]
    b = list(map(float, np.asarray(b)))
    n = len(b)
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(a[r][col]))
        a[col], a[piv] = a[piv], a[col]
        b[col], b[piv] = b[piv], b[col]
        for r in range(col + 1, n):
            f = a[r][col] / a[col][col]
            for c in range(col, n):
                a[r][c] -= f * a[col][c]
            b[r] -= f * b[col]
    x = [0.0] * n
    for r in range(n - 1, -1, -1):
        x[r] = (b[r] - sum(a[r][c] * x[c] for c in range(r + 1, n))) / a[r][r]
    return np.array(x)


def gauss_inverse(a):
    n = np.asarray(a).shape[0]
    return np.column_stack([gauss_solve(a, e) for e in np.eye(n)])


def brute_gram(times, omega, order, weights=None):
    """Sum of outer products of explicitly built regression vectors."""
    p = 2 * order + 1
    out = np.zeros((p, p))
    w = np.ones(len(times)) if weights is None else weights
    for t, wi in zip(times, w):
        f = [1.0]
        for k in range(1, order + 1):
            f += [np.sin(k * omega * t), np.cos(k * omega * t)]
        f = np.array(f)
        out += wi * np.outer(f, f)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


CIRCADIAN = 2 * np.pi / 24
