import numpy as np
import pytest

from dogr.model import Component, Dataset, Model


def random_component(rng, p, weight=1.0):
    A = rng.normal(size=(p, p))
    return Component(
        weight=weight,
        mean=rng.normal(scale=3.0, size=p),
        covariance=A @ A.T + 0.5 * np.eye(p),
        coefficients=rng.normal(size=p + 1),
        residual_variance=float(rng.uniform(0.2, 3.0)),
    )


def random_model(rng, p, K):
    w = rng.dirichlet(np.ones(K))
    comps = [random_component(rng, p, weight=w[k]) for k in range(K)]
    return Model(tuple(comps), tuple(f"f{j}" for j in range(p)))


def linear_dataset(rng, n, p, noise=1.0):
    X = rng.normal(size=(n, p))
    beta = rng.normal(size=p + 1)
    y = beta[0] + X @ beta[1:] + noise * rng.normal(size=n)
    return Dataset(X, y, tuple(f"f{j}" for j in range(p)))


def mixture_dataset(rng, n, p, K):
    """Rows drawn from K well-separated linear subgroups."""
    labels = rng.integers(0, K, size=n)
    centers = rng.normal(scale=6.0, size=(K, p))
    betas = rng.normal(scale=2.0, size=(K, p + 1))
    X = centers[labels] + rng.normal(size=(n, p))
    y = betas[labels, 0] + np.sum(X * betas[labels, 1:], axis=1) + 0.5 * rng.normal(size=n)
    return Dataset(X, y, tuple(f"f{j}" for j in range(p)))


def gauss_solve(A, b):
    """Gaussian elimination with partial pivoting, written out by hand."""
    A = [list(map(float, row)) for row in A]
    b = list(map(float, b))
    n = len(b)
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(A[r][col]))
        A[col], A[piv] = A[piv], A[col]
        b[col], b[piv] = b[piv], b[col]
        for r in range(col + 1, n):
            f = A[r][col] / A[col][col]
            for c in range(col, n):
                A[r][c] -= f * A[col][c]
            b[r] -= f * b[col]
    x = [0.0] * n
    for r in reversed(range(n)):
        x[r] = (b[r] - sum(A[r][c] * x[c] for c in range(r + 1, n))) / A[r][r]
    return np.array(x)


def normal_equations_oracle(X, y, w):
    A = np.column_stack([np.ones(len(y)), X])
    G = [[sum(w[i] * A[i, a] * A[i, b] for i in range(len(y))) for b in range(A.shape[1])]
         for a in range(A.shape[1])]
    r = [sum(w[i] * A[i, a] * y[i] for i in range(len(y))) for a in range(A.shape[1])]
    return gauss_solve(G, r)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
