"""Synthetic benchmark problems and performance metrics.

Objectives are exact GP sample paths tabulated on a dense grid (one joint
Cholesky draw of the grid covariance per latent function) and extended to
the whole box by piecewise-linear interpolation.  The tabulated images
also give the ground-truth Pareto front, following the usual practice of
treating the discretized objective as the truth.

Metrics (all maximizing, all against the tabulated truth):

* hypervolume of the predicted front w.r.t. a recorded reference point,
* eps-accuracy: fraction of predicted points inside the eps-front slab,
* eps-coverage: fraction of true front points within 2*eps of a
  predicted point,
* average MSE: mean over true front points of the squared distance to
  the closest predicted point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import cholesky

from .errors import ConfigError, DomainError, NumericalError
from .kernels import MultiOutputKernel, ScalarKernel, eval_scalar_r
from .pareto import ParetoFront, eps_pareto_front_membership, hypervolume, nondominated_set
from .partition import DesignSpace

# Sample-path grams at 1e4 points are always numerically rank-deficient,
# so the sampling ladder starts above zero (the draw error this injects,
# ~1e-4 in value, sits far below any epsilon or noise level in use).
SAMPLING_JITTER_LADDER = (1e-8, 1e-6)


def _gram_inplace(k: ScalarKernel, x: np.ndarray) -> np.ndarray:
    """Dense kernel matrix over grid points, built with in-place ops.

    The grids here reach 1e4 points (800 MB per matrix), so temporaries
    are kept to a minimum.
    """
    if x.ndim == 1 or x.shape[1] == 1:
        flat = x.reshape(-1)
        r = np.abs(flat[:, None] - flat[None, :])
    else:
        r = np.zeros((x.shape[0], x.shape[0]))
        for d in range(x.shape[1]):
            diff = x[:, d][:, None] - x[:, d][None, :]
            diff *= diff
            r += diff
        np.sqrt(r, out=r)
    return eval_scalar_r(k, r)


def _chol_sample(k: ScalarKernel, grid: np.ndarray, z: np.ndarray) -> np.ndarray:
    """One exact draw L @ z from N(0, K(grid)) with a jitter ladder."""
    G = _gram_inplace(k, grid)
    n = G.shape[0]
    prev = 0.0
    for j in SAMPLING_JITTER_LADDER:
        G.flat[:: n + 1] += j - prev
        prev = j
        try:
            L = cholesky(G, lower=True, check_finite=False)
            return L @ z
        except np.linalg.LinAlgError:
            continue
    raise NumericalError(
        f"grid covariance factorization failed at {n} points after ladder "
        f"{SAMPLING_JITTER_LADDER}",
        jitter=SAMPLING_JITTER_LADDER[-1],
    )


@dataclass
class SampledObjective:
    """A tabulated multi-output function with linear interpolation."""

    space: DesignSpace
    kernel: MultiOutputKernel
    grid: np.ndarray  # (n_grid, D)
    values: np.ndarray  # (n_grid, m)
    seed: int
    axes: tuple  # per-dimension coordinate arrays

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def value(self, x) -> np.ndarray:
        """Noise-free interpolated objective values at one point or a batch."""
        x = np.asarray(x, dtype=float)
        single = x.ndim <= 1
        pts = np.atleast_2d(x)
        if self.space.dim == 1:
            xs = self.axes[0]
            out = np.column_stack(
                [np.interp(pts[:, 0], xs, self.values[:, j]) for j in range(self.m)]
            )
        else:
            shape = tuple(len(a) for a in self.axes)
            out = np.column_stack(
                [
                    RegularGridInterpolator(self.axes, self.values[:, j].reshape(shape))(pts)
                    for j in range(self.m)
                ]
            )
        return out[0] if single else out


def sample_gp_function(
    kernel: MultiOutputKernel,
    space: DesignSpace,
    grid_size: int | None = None,
    seed: int = 0,
) -> SampledObjective:
    """Draw one vector objective from the GP prior, tabulated on a grid.

    ``grid_size`` is points per dimension; defaults to 10000 for D=1 and
    100 for D=2 (1e4 grid points either way).  Deterministic per seed.
    """
    if grid_size is None:
        grid_size = 10_000 if space.dim == 1 else 100
    if grid_size < 2:
        raise ConfigError(f"grid_size must be >= 2 per dimension, got {grid_size}")
    axes = tuple(
        np.linspace(space.bounds[d, 0], space.bounds[d, 1], grid_size)
        for d in range(space.dim)
    )
    if space.dim == 1:
        grid = axes[0][:, None]
    else:
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.column_stack([mm.reshape(-1) for mm in mesh])

    rng = np.random.default_rng(seed)
    n = grid.shape[0]
    latent = np.empty((n, kernel.m))
    for j, k in enumerate(kernel.kernels):
        z = rng.standard_normal(n)
        latent[:, j] = _chol_sample(k, grid, z)
    values = latent if kernel.is_independent else latent @ kernel.mixing.T
    return SampledObjective(
        space=space, kernel=kernel, grid=grid, values=values, seed=seed, axes=axes
    )


def make_oracle(obj: SampledObjective, noise_var: float, seed: int):
    """Evaluation closure returning value(x) plus iid N(0, noise_var) noise."""
    rng = np.random.default_rng((seed, 1))
    sd = math.sqrt(noise_var)

    def oracle(x):
        return obj.value(x) + sd * rng.standard_normal(obj.m)

    return oracle


def true_pareto_front(obj: SampledObjective) -> ParetoFront:
    """Nondominated subset of the tabulated grid images, with designs."""
    keep = nondominated_set(obj.values)
    return ParetoFront(points=obj.values[keep], designs=obj.grid[keep])


def predicted_front_from_result(obj: SampledObjective, p_hat_nodes) -> ParetoFront:
    """Noise-free truth at the returned node centers, nondominated subset."""
    if not p_hat_nodes:
        raise DomainError("empty decided set has no predicted front")
    centers = np.array([node.center for node in p_hat_nodes])
    vals = obj.value(centers)
    keep = nondominated_set(vals)
    return ParetoFront(points=vals[keep], designs=centers[keep])


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def eps_accuracy(predicted: ParetoFront, truth: ParetoFront, eps) -> float:
    """Fraction of predicted points q with some true front point p <= q + 2*eps.

    Mirror image of :func:`eps_coverage` (same relation, iterating over the
    predicted set).  A literal membership test against the slab of a
    *discretized* front would reject genuine near-optimal points that land
    between front samples, so proximity to the closest true point is used.
    """
    if len(predicted) == 0:
        raise DomainError("eps_accuracy needs a nonempty predicted front")
    eps = np.asarray(eps, dtype=float)
    T = truth.points
    Q = predicted.points
    accurate = np.any(
        np.all(T[None, :, :] <= Q[:, None, :] + 2.0 * eps, axis=2), axis=1
    )
    return float(accurate.mean())


def eps_coverage(truth: ParetoFront, predicted: ParetoFront, eps) -> float:
    """Fraction of true front points p with some predicted q >= p - 2*eps."""
    if len(truth) == 0:
        raise DomainError("eps_coverage needs a nonempty true front")
    eps = np.asarray(eps, dtype=float)
    T = truth.points
    Q = predicted.points
    covered = np.any(
        np.all(T[:, None, :] <= Q[None, :, :] + 2.0 * eps, axis=2), axis=1
    )
    return float(covered.mean())


def avg_mse(truth: ParetoFront, predicted: ParetoFront) -> float:
    """Mean over truth points of the squared distance to the closest
    predicted point."""
    if len(truth) == 0 or len(predicted) == 0:
        raise DomainError("avg_mse needs nonempty fronts")
    diff = truth.points[:, None, :] - predicted.points[None, :, :]
    sq = np.sum(diff * diff, axis=2)
    return float(np.mean(np.min(sq, axis=1)))


def reference_point(truth: ParetoFront, predicted: ParetoFront) -> np.ndarray:
    """Componentwise min over both fronts minus 10% of the joint range."""
    allpts = np.vstack([truth.points, predicted.points])
    lo = allpts.min(axis=0)
    rng = allpts.max(axis=0) - lo
    return lo - 0.1 * rng


@dataclass
class MetricsReport:
    hypervolume: float
    eps_accuracy: float
    eps_coverage: float
    avg_mse: float
    reference: np.ndarray
    evaluations: int
    wall_time: float = 0.0


def compute_metrics(
    truth: ParetoFront,
    predicted: ParetoFront,
    eps,
    evaluations: int = 0,
    reference=None,
    wall_time: float = 0.0,
) -> MetricsReport:
    """The four front metrics in one report; the reference point is
    recorded (auto rule unless supplied)."""
    ref = (
        np.asarray(reference, dtype=float)
        if reference is not None
        else reference_point(truth, predicted)
    )
    return MetricsReport(
        hypervolume=hypervolume(predicted.points, ref),
        eps_accuracy=eps_accuracy(predicted, truth, eps),
        eps_coverage=eps_coverage(truth, predicted, eps),
        avg_mse=avg_mse(truth, predicted),
        reference=ref,
        evaluations=evaluations,
        wall_time=wall_time,
    )


def hv_curve(eval_log, reference) -> list:
    """Hypervolume of the nondominated observed values after each
    evaluation.

    Observations below the reference in some coordinate cannot contribute
    and are skipped up front (keeps the exact sweep warning-free).
    """
    ref = np.asarray(reference, dtype=float)
    seen: list = []
    curve = []
    for tau, entry in enumerate(eval_log, start=1):
        y = np.asarray(entry["y"], dtype=float)
        if np.all(y >= ref):
            seen.append(y)
        if seen:
            pts = np.asarray(seen)
            pts = pts[nondominated_set(pts)]
            seen = [p for p in pts]
            hv = hypervolume(pts, ref)
        else:
            hv = 0.0
        curve.append((tau, hv))
    return curve
