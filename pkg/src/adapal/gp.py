"""Exact multi-output Gaussian-process posterior inference.

The posterior after ``tau`` noisy evaluations is kept behind a Cholesky
factor of the regularized Gram matrix ``K + sigma^2 I``.  Updates extend
the factor by one block (a rank-m append), never refactorizing from
scratch unless the append goes numerically bad, in which case a jitter
ladder (0, 1e-10, 1e-8, 1e-6 added to the diagonal) is climbed before
declaring failure.

Independent multi-output kernels get a fast path: m separate tau-by-tau
systems instead of one (m*tau)-by-(m*tau) system.  Both paths produce the
same posterior; tests cross-check them against a dense from-scratch solve.

Posterior objects are immutable: ``update`` returns a new instance, and
``predict`` is read-only, so a posterior can be shared freely.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .errors import ConfigError, DomainError, InputError, NumericalError
from .kernels import MultiOutputKernel, eval_matrix, prior_variances, scalar_gram

JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)


def cholesky_with_jitter(A: np.ndarray, jitters=JITTER_LADDER):
    """Lower Cholesky factor of A, adding diagonal jitter if needed.

    Returns
    -------
    (L, jitter) : (ndarray, float)
        The factor and the jitter level that succeeded.

    Raises
    ------
    NumericalError
        If the whole ladder fails; carries the last jitter attempted.
    """
    n = A.shape[0]
    for j in jitters:
        try:
            M = A if j == 0.0 else A + j * np.eye(n)
            return cholesky(M, lower=True), j
        except np.linalg.LinAlgError:
            continue
    raise NumericalError(
        f"Cholesky factorization failed for {n}x{n} system after jitter ladder {jitters}",
        jitter=jitters[-1],
    )


class Prediction:
    """Posterior mean and per-objective stddev at one point."""

    __slots__ = ("mean", "std")

    def __init__(self, mean: np.ndarray, std: np.ndarray):
        self.mean = mean
        self.std = std


def prior_gram(kernel: MultiOutputKernel, X: np.ndarray) -> np.ndarray:
    """Dense (m*n)-by-(m*n) prior Gram matrix in per-evaluation block order."""
    X = np.atleast_2d(np.asarray(X, float))
    n = X.shape[0]
    m = kernel.m
    A = kernel.mixing if kernel.mixing is not None else np.eye(m)
    K = np.zeros((n * m, n * m))
    for j, k in enumerate(kernel.kernels):
        G = scalar_gram(k, X, X)
        K += np.kron(G, np.outer(A[:, j], A[:, j]))
    return K


class GPPosterior:
    """GP posterior over m objectives after ``tau`` evaluations.

    Parameters
    ----------
    kernel : MultiOutputKernel
    noise_var : float
        Isotropic observation-noise variance sigma^2 > 0, shared across
        objectives.
    """

    def __init__(self, kernel: MultiOutputKernel, noise_var: float, _state=None):
        if noise_var <= 0:
            raise ConfigError(f"noise variance must be positive, got {noise_var}")
        self.kernel = kernel
        self.noise_var = float(noise_var)
        if _state is None:
            self._X = np.zeros((0, 0))
            self._Y = np.zeros((0, kernel.m))
            self._factors = None  # list of per-objective L, or one full L
            self._alphas = None
            self._step_blocks = ()
            self.jitter = 0.0
        else:
            (self._X, self._Y, self._factors, self._alphas, self._step_blocks, self.jitter) = _state

    # ------------------------------------------------------------------ basic

    @property
    def tau(self) -> int:
        return self._Y.shape[0]

    @property
    def m(self) -> int:
        return self.kernel.m

    @property
    def X(self) -> np.ndarray:
        return self._X

    @property
    def Y(self) -> np.ndarray:
        return self._Y

    @property
    def step_cov_blocks(self):
        """Predictive covariance of f(x_t) just before evaluation t, per step."""
        return self._step_blocks

    # ---------------------------------------------------------------- predict

    def predict(self, x) -> Prediction:
        """Posterior mean and stddev of f(x).  tau = 0 returns the prior."""
        x = np.atleast_1d(np.asarray(x, float))
        if self.tau == 0:
            return Prediction(np.zeros(self.m), np.sqrt(prior_variances(self.kernel)))
        mean, std = self.predict_batch(x[None, :])
        return Prediction(mean[0], std[0])

    def predict_batch(self, Xs: np.ndarray):
        """Vectorized prediction at many points.

        Parameters
        ----------
        Xs : ndarray of shape (n, D)

        Returns
        -------
        (means, stds) : ndarrays of shape (n, m)
        """
        Xs = np.atleast_2d(np.asarray(Xs, float))
        n = Xs.shape[0]
        if self.tau == 0:
            prior = np.sqrt(prior_variances(self.kernel))
            return np.zeros((n, self.m)), np.tile(prior, (n, 1))
        if self.kernel.is_independent:
            means = np.empty((n, self.m))
            var = np.empty((n, self.m))
            for j, k in enumerate(self.kernel.kernels):
                C = scalar_gram(k, self._X, Xs)  # (tau, n)
                V = solve_triangular(self._factors[j], C, lower=True)
                means[:, j] = C.T @ self._alphas[j]
                var[:, j] = k.variance - np.sum(V * V, axis=0)
            return means, np.sqrt(np.maximum(var, 0.0))
        means = np.empty((n, self.m))
        stds = np.empty((n, self.m))
        for i in range(n):
            mu, cov = self.predict_cov(Xs[i])
            means[i] = mu
            stds[i] = np.sqrt(np.maximum(np.diag(cov), 0.0))
        return means, stds

    def predict_cov(self, x):
        """Posterior mean and full m-by-m covariance of f(x)."""
        x = np.atleast_1d(np.asarray(x, float))
        prior_cov = eval_matrix(self.kernel, x, x)
        if self.tau == 0:
            return np.zeros(self.m), prior_cov
        if self.kernel.is_independent:
            mu = np.empty(self.m)
            var = np.empty(self.m)
            for j, k in enumerate(self.kernel.kernels):
                c = scalar_gram(k, self._X, x[None, :])[:, 0]
                v = solve_triangular(self._factors[j], c, lower=True)
                mu[j] = c @ self._alphas[j]
                var[j] = max(k.variance - v @ v, 0.0)
            return mu, np.diag(var)
        C = self._cross_cov(x)  # (m*tau, m)
        V = solve_triangular(self._factors, C, lower=True)
        mu = C.T @ self._alphas
        cov = prior_cov - V.T @ V
        return mu, cov

    def _cross_cov(self, x) -> np.ndarray:
        """Covariance between the evaluated stack and f(x): (m*tau, m)."""
        m = self.m
        C = np.empty((m * self.tau, m))
        for i in range(self.tau):
            C[i * m:(i + 1) * m, :] = eval_matrix(self.kernel, self._X[i], x)
        return C

    # ----------------------------------------------------------------- update

    def update(self, x, y) -> "GPPosterior":
        """Condition on one noisy observation y = f(x) + noise.

        The factor of K + sigma^2 I is extended by one block; the jitter
        ladder only engages if the append or a rebuild goes indefinite.
        """
        x = np.atleast_1d(np.asarray(x, float))
        y = np.atleast_1d(np.asarray(y, float))
        if y.shape != (self.m,):
            raise InputError(f"observation must have shape ({self.m},), got {y.shape}")
        if not np.all(np.isfinite(y)):
            raise InputError(f"observation contains non-finite values: {y}")
        if not np.all(np.isfinite(x)):
            raise InputError(f"design point contains non-finite values: {x}")

        _, step_block = self.predict_cov(x)
        step_blocks = self._step_blocks + (step_block,)

        X_new = x[None, :] if self.tau == 0 else np.vstack([self._X, x[None, :]])
        Y_new = np.vstack([self._Y, y[None, :]])

        if self.kernel.is_independent:
            state = self._extend_independent(X_new, Y_new, x)
        else:
            state = self._extend_mixed(X_new, Y_new, x)
        factors, alphas, jitter = state
        return GPPosterior(
            self.kernel,
            self.noise_var,
            _state=(X_new, Y_new, factors, alphas, step_blocks, jitter),
        )

    def _extend_independent(self, X_new, Y_new, x):
        m = self.m
        factors = []
        jitter = self.jitter
        rebuild = False
        for j, k in enumerate(self.kernel.kernels):
            kxx = k.variance + self.noise_var + self.jitter
            if self.tau == 0:
                factors.append(np.array([[math.sqrt(kxx)]]))
                continue
            c = scalar_gram(k, self._X, x[None, :])[:, 0]
            l = solve_triangular(self._factors[j], c, lower=True)
            d2 = kxx - l @ l
            if d2 <= 1e-14 * kxx:
                rebuild = True
                break
            L_old = self._factors[j]
            t = L_old.shape[0]
            L = np.zeros((t + 1, t + 1))
            L[:t, :t] = L_old
            L[t, :t] = l
            L[t, t] = math.sqrt(d2)
            factors.append(L)
        if rebuild:
            factors = []
            jitter = 0.0
            for k in self.kernel.kernels:
                G = scalar_gram(k, X_new, X_new) + self.noise_var * np.eye(X_new.shape[0])
                L, used = cholesky_with_jitter(G)
                factors.append(L)
                jitter = max(jitter, used)
        alphas = [
            cho_solve((factors[j], True), Y_new[:, j]) for j in range(m)
        ]
        return factors, alphas, jitter

    def _extend_mixed(self, X_new, Y_new, x):
        m = self.m
        y_flat = Y_new.reshape(-1)
        if self.tau == 0:
            B = eval_matrix(self.kernel, x, x) + (self.noise_var + self.jitter) * np.eye(m)
            try:
                L = cholesky(B, lower=True)
                jitter = self.jitter
            except np.linalg.LinAlgError:
                L, jitter = self._rebuild_mixed(X_new)
            alphas = cho_solve((L, True), y_flat)
            return L, alphas, jitter
        C = self._cross_cov(x)  # (m*tau, m)
        V = solve_triangular(self._factors, C, lower=True)
        B = (
            eval_matrix(self.kernel, x, x)
            + (self.noise_var + self.jitter) * np.eye(m)
            - V.T @ V
        )
        t = self._factors.shape[0]
        try:
            D = cholesky(B, lower=True)
            L = np.zeros((t + m, t + m))
            L[:t, :t] = self._factors
            L[t:, :t] = V.T
            L[t:, t:] = D
            jitter = self.jitter
        except np.linalg.LinAlgError:
            L, jitter = self._rebuild_mixed(X_new)
        alphas = cho_solve((L, True), y_flat)
        return L, alphas, jitter

    def _rebuild_mixed(self, X_new):
        K = prior_gram(self.kernel, X_new)
        K += self.noise_var * np.eye(K.shape[0])
        return cholesky_with_jitter(K)

    # ------------------------------------------------------------ diagnostics

    def information_gain(self) -> float:
        """Chain-rule information gain of the evaluated trajectory.

        Sum over steps of 0.5 * log det(I_m + sigma^-2 * B_t), where B_t is
        the predictive covariance block stored just before evaluation t.
        Equals 0.5 * log det(I + sigma^-2 K) over the whole trajectory.
        """
        if self.tau == 0:
            raise DomainError("information gain of an empty trajectory is undefined")
        total = 0.0
        eye = np.eye(self.m)
        for B in self._step_blocks:
            sign, logdet = np.linalg.slogdet(eye + B / self.noise_var)
            total += 0.5 * logdet
        return total

    def information_gain_lower_bound(self) -> float:
        """Diagonal lower bound: (1/2m) sum_t sum_j log(1 + sigma^-2 var_t^j)."""
        if self.tau == 0:
            raise DomainError("information gain of an empty trajectory is undefined")
        total = 0.0
        for B in self._step_blocks:
            total += np.sum(np.log1p(np.diag(B) / self.noise_var))
        return total / (2.0 * self.m)
