"""Shared test helpers: dense GP reference solve and random problem builders."""

from __future__ import annotations

import numpy as np

from adapal.gp import prior_gram
from adapal.kernels import (
    MATERN52,
    SQUARED_EXPONENTIAL,
    MultiOutputKernel,
    ScalarKernel,
    eval_matrix,
)


def dense_predict(kernel: MultiOutputKernel, noise_var: float, X, Y, x):
    """From-scratch dense posterior at x: solve the full (m*tau) system.

    Independent reference implementation of the posterior equations,
    used as the oracle against the incremental factorization.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    tau, m = Y.shape
    G = prior_gram(kernel, X) + noise_var * np.eye(m * tau)
    k_x = np.vstack([eval_matrix(kernel, X[s], x) for s in range(tau)])  # (m*tau, m)
    sol = np.linalg.solve(G, np.column_stack([Y.reshape(-1), k_x]))
    mean = k_x.T @ sol[:, 0]
    cov = eval_matrix(kernel, x, x) - k_x.T @ sol[:, 1:]
    std = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return mean, std


def random_kernel(rng: np.random.Generator, m: int) -> MultiOutputKernel:
    """Random independent or linear-mixing kernel with m outputs."""
    kernels = tuple(
        ScalarKernel(
            family=rng.choice([SQUARED_EXPONENTIAL, MATERN52]),
            variance=float(rng.uniform(0.2, 1.5)),
            lengthscale=float(rng.uniform(0.1, 0.8)),
        )
        for _ in range(m)
    )
    if rng.random() < 0.5:
        return MultiOutputKernel(kernels=kernels)
    A = rng.normal(size=(m, m))
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    return MultiOutputKernel(kernels=kernels, mixing=A)


def random_trajectory(rng: np.random.Generator, tau: int, m: int, dim: int = 1):
    """Random designs and observations for posterior-equivalence checks."""
    X = rng.uniform(0.0, 1.0, size=(tau, dim))
    Y = rng.normal(scale=0.8, size=(tau, m))
    return X, Y
