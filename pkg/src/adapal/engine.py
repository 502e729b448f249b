"""Round loop for adaptive Pareto active learning on a partition tree.

Each round runs four phases over the active nodes (undecided set S plus
decided set P):

(a) modeling     -- refresh posterior statistics where the evaluation
                    count moved, rebuild confidence rectangles Q and
                    shrink the cumulative rectangles R <- R intersect Q;
(b) discarding   -- compute the pessimistic front of the active set once,
                    then drop undecided nodes whose optimistic corner is
                    eps-dominated by some pessimistic-front corner;
(c) eps-covering -- promote undecided nodes that no active node (itself
                    included) can still beat by more than eps;
(d) refine/evaluate -- pick the largest-uncertainty node among S u P
                    (ties: lowest depth, then lowest index); split it into
                    its children when the posterior term is small against
                    the cell-size term sqrt(m)*V_h, otherwise evaluate the
                    objective at its center.

The loop stops when S empties; everything left in P covers the
eps-accurate Pareto designs with high probability.

All randomness lives in the oracle; given the same oracle the run is
fully deterministic (sets are iterated in node-id order everywhere).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .confidence import HyperRect, NodeBelief, diameter, intersect, node_indices
from .errors import ConfigError, DomainError
from .gp import GPPosterior, Prediction
from .kernels import MultiOutputKernel, smoothness_constants
from .partition import DesignSpace, Node, PartitionParams, children, root
from .pareto import pessimistic_pareto

# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------


def _series_eta1() -> float:
    """sum_{n>=1} 2^{-(n-1)} sqrt(log n); truncation error far below 1e-12."""
    total, n = 0.0, 1
    while True:
        term = 2.0 ** (-(n - 1)) * math.sqrt(math.log(n)) if n > 1 else 0.0
        total += term
        n += 1
        if n > 60 and 2.0 ** (-(n - 1)) * math.sqrt(n) < 1e-16:
            break
    return total


def _series_eta2() -> float:
    """sum_{n>=1} 2^{-(n-1)} sqrt(n); truncation error far below 1e-12."""
    total, n = 0.0, 1
    while True:
        term = 2.0 ** (-(n - 1)) * math.sqrt(n)
        total += term
        n += 1
        if n > 60 and 2.0 ** (-(n - 1)) * math.sqrt(n) < 1e-16:
            break
    return total


ETA1 = _series_eta1()
ETA2 = _series_eta2()


def _raw_v_h(h, C_K, alpha, v1, rho, m, delta, N, D1, C2, C3) -> float:
    """Depth schedule before any override zeroing; h<1 uses h=1 in the log."""
    w = C_K * (v1 * rho**h) ** alpha
    hl = max(h, 1)
    inner = (
        C2
        + 2.0 * math.log(2.0 * hl * hl * math.pi**2 * m / (6.0 * delta))
        + h * math.log(N)
        + max(0.0, -4.0 * (D1 / alpha) * math.log(w))
    )
    return 4.0 * w * (math.sqrt(inner) + C3)


@dataclass(frozen=True)
class Schedules:
    """Confidence and depth schedules plus every constant they need.

    ``h_max`` is the smallest depth at which 16*m*V_h^2 <= (min_j eps_j)^2;
    ``beta_h_max`` is the depth bound used inside beta (the theoretical
    ``h_max`` unless explicitly overridden to replicate a published table);
    ``h_max_override``, when set, zeroes V_h from that depth on.
    """

    delta: float
    eps: np.ndarray
    m: int
    N: int
    C_K: float
    alpha: float
    D1: float
    v1: float
    rho: float
    eta1: float
    eta2: float
    C1: float
    C2: float
    C3: float
    Q: float
    h_max: int
    beta_h_max: int
    h_max_override: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "eps", np.asarray(self.eps, dtype=float))


def beta(tau: int, s: Schedules) -> float:
    """Confidence multiplier at evaluation count tau (nondecreasing)."""
    return 2.0 * math.log(
        2.0 * s.m * math.pi**2 * s.N ** (s.beta_h_max + 1) * (tau + 1) ** 2 / (3.0 * s.delta)
    )


def v_h(h: int, s: Schedules) -> float:
    """Depth-h objective-variation bound; 0 beyond the configured override."""
    if s.h_max_override is not None and h >= s.h_max_override:
        return 0.0
    return _raw_v_h(h, s.C_K, s.alpha, s.v1, s.rho, s.m, s.delta, s.N, s.D1, s.C2, s.C3)


def _search_h_max(eps_min, C_K, alpha, v1, rho, m, delta, N, D1, C2, C3) -> int:
    for h in range(65):
        vh = _raw_v_h(h, C_K, alpha, v1, rho, m, delta, N, D1, C2, C3)
        if 16.0 * m * vh * vh <= eps_min * eps_min:
            return h
    raise ConfigError(
        "no depth h <= 64 satisfies 16*m*V_h^2 <= eps^2; "
        "epsilon is too small for these kernel constants"
    )


def compute_h_max(s: Schedules) -> int:
    """Smallest h with 16*m*V_h^2 <= (min_j eps_j)^2, ignoring overrides."""
    eps_min = float(np.min(s.eps))
    if eps_min <= 0:
        raise DomainError("min_j eps_j must be positive")
    return _search_h_max(
        eps_min, s.C_K, s.alpha, s.v1, s.rho, s.m, s.delta, s.N, s.D1, s.C2, s.C3
    )


def make_schedules(
    delta: float,
    eps,
    m: int,
    N: int,
    C_K: float,
    alpha: float,
    D1: float,
    v1: float,
    rho: float,
    C1: float = 1.0,
    Q: float = 1.0,
    h_max_override: Optional[int] = None,
    beta_h_max: Optional[int] = None,
) -> Schedules:
    """Assemble the schedule constants, deriving C2, C3 and h_max."""
    eps = np.asarray(eps, dtype=float)
    if not (0.0 < delta < 1.0):
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    if eps.shape != (m,) or np.min(eps) <= 0:
        raise ConfigError(f"eps must be {m} positive reals, got {eps}")
    C2 = 2.0 * math.log(2.0 * C1 * C1 * math.pi**2 / 6.0)
    C3 = ETA1 + ETA2 * math.sqrt(2.0 * D1 * alpha * math.log(2.0))
    h_max = _search_h_max(float(np.min(eps)), C_K, alpha, v1, rho, m, delta, N, D1, C2, C3)
    return Schedules(
        delta=delta,
        eps=eps,
        m=m,
        N=N,
        C_K=C_K,
        alpha=alpha,
        D1=D1,
        v1=v1,
        rho=rho,
        eta1=ETA1,
        eta2=ETA2,
        C1=C1,
        C2=C2,
        C3=C3,
        Q=Q,
        h_max=h_max,
        beta_h_max=h_max if beta_h_max is None else beta_h_max,
        h_max_override=h_max_override,
    )


def eval_cap(s: Schedules, tau: int, h: int, noise_var: float) -> float:
    """Ceiling on evaluations of one depth-h node before it must refine."""
    vh = v_h(h, s)
    if vh == 0.0:
        return math.inf
    return math.ceil(noise_var * beta(tau, s) / (vh * vh))


# ---------------------------------------------------------------------------
# configuration and state
# ---------------------------------------------------------------------------


@dataclass
class EngineConfig:
    """Everything a run needs besides the oracle."""

    space: DesignSpace
    params: PartitionParams
    kernel: MultiOutputKernel
    eps: np.ndarray
    delta: float
    noise_var: float
    h_max_override: Optional[int] = None
    beta_h_max: Optional[int] = None
    C1: float = 1.0
    Q: float = 1.0
    budget: int = 10_000
    containment_probe: Optional[Callable] = None

    def __post_init__(self):
        self.eps = np.asarray(self.eps, dtype=float)
        m = self.kernel.m
        if m < 2:
            raise ConfigError(f"the engine needs at least 2 objectives, got {m}")
        if self.eps.shape != (m,):
            raise ConfigError(f"eps must have shape ({m},), got {self.eps.shape}")
        if np.min(self.eps) <= 0:
            raise ConfigError("all eps components must be positive")
        if not (0.0 < self.delta < 1.0):
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        if self.noise_var <= 0:
            raise ConfigError(f"noise variance must be positive, got {self.noise_var}")
        if self.budget < 1:
            raise ConfigError(f"evaluation budget must be >= 1, got {self.budget}")

    def schedules(self) -> Schedules:
        consts = [smoothness_constants(k) for k in self.kernel.kernels]
        C_K = max(c.C_K for c in consts)
        alpha = min(c.alpha for c in consts)
        return make_schedules(
            delta=self.delta,
            eps=self.eps,
            m=self.kernel.m,
            N=self.params.N,
            C_K=C_K,
            alpha=alpha,
            D1=self.space.metric_dim,
            v1=self.params.v1,
            rho=self.params.rho,
            C1=self.C1,
            Q=self.Q,
            h_max_override=self.h_max_override,
            beta_h_max=self.beta_h_max,
        )


@dataclass
class TraceRow:
    """One per-round record; node fields are None on the terminate row."""

    round: int
    tau: int
    S_size: int
    P_size: int
    omega_bar: float
    action: str  # "refine" | "evaluate" | "terminate"
    node_h: Optional[int]
    node_i: Optional[int]


@dataclass
class EngineState:
    config: EngineConfig
    schedules: Schedules
    oracle: Callable
    t: int
    tau: int
    S: set
    P: set
    nodes: dict
    beliefs: dict
    posterior: GPPosterior
    parent_cache: dict = field(default_factory=dict)
    discarded: list = field(default_factory=list)
    eval_log: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    degeneracy_count: int = 0
    finished: bool = False
    termination_reason: Optional[str] = None
    containment_escaped: int = 0
    containment_total: int = 0


@dataclass
class RunResult:
    """Final decided set plus everything needed to audit the run."""

    p_hat: list  # node keys (h, i), sorted
    p_hat_nodes: list  # Node objects in the same order
    p_hat_cells: list  # (D, 2) arrays, union of which is the returned region
    p_hat_means: np.ndarray  # posterior means at decided centers, (n, m)
    rounds: int
    tau: int
    eval_log: list
    trace: list
    termination_reason: str  # "converged" | "budget"
    truncated: bool
    degeneracy_count: int
    containment_escaped: int
    containment_total: int
    posterior: GPPosterior
    schedules: Schedules
    discarded: list  # (round, key) pairs in discard order
    discarded_nodes: list  # Node objects matching `discarded`


def init_state(config: EngineConfig, oracle: Callable) -> EngineState:
    """Fresh state: the undecided set holds only the root node."""
    sched = config.schedules()
    r = root(config.space, config.params)
    nb = NodeBelief(
        node=r,
        R=HyperRect(np.full(config.kernel.m, -np.inf), np.full(config.kernel.m, np.inf)),
    )
    return EngineState(
        config=config,
        schedules=sched,
        oracle=oracle,
        t=1,
        tau=0,
        S={r.key},
        P=set(),
        nodes={r.key: r},
        beliefs={r.key: nb},
        posterior=GPPosterior(config.kernel, config.noise_var),
    )


# ---------------------------------------------------------------------------
# the round loop
# ---------------------------------------------------------------------------


def _refresh_beliefs(state: EngineState, beta_t: float) -> None:
    """Modeling phase: recompute (mu, sigma) where stale, shrink R."""
    active = sorted(state.S | state.P)
    stale = [k for k in active if state.beliefs[k].stamp != state.tau]
    if not stale:
        return
    centers = np.array([state.nodes[k].center for k in stale])
    means, stds = state.posterior.predict_batch(centers)
    for idx, k in enumerate(stale):
        nb = state.beliefs[k]
        nb.mu = means[idx]
        nb.sigma = stds[idx]
        nb.stamp = state.tau

    # Parent-center statistics, deduplicated and cached per evaluation count.
    parent_nodes = {}
    for k in stale:
        node = state.nodes[k]
        if node.h > 0:
            pk = node.parent.key
            entry = state.parent_cache.get(pk)
            if entry is None or entry[0] != state.tau:
                parent_nodes[pk] = node.parent
    if parent_nodes:
        pkeys = sorted(parent_nodes)
        pcenters = np.array([parent_nodes[pk].center for pk in pkeys])
        pmeans, pstds = state.posterior.predict_batch(pcenters)
        for idx, pk in enumerate(pkeys):
            state.parent_cache[pk] = (state.tau, pmeans[idx], pstds[idx])

    probe = state.config.containment_probe
    for k in stale:
        nb = state.beliefs[k]
        node = state.nodes[k]
        if node.h == 0:
            ppred = None
            v_parent = 0.0
        else:
            _, pmu, psigma = state.parent_cache[node.parent.key]
            ppred = Prediction(pmu, psigma)
            v_parent = v_h(node.h - 1, state.schedules)
        q = node_indices(nb, ppred, beta_t, v_h(node.h, state.schedules), v_parent)
        if q.degenerate:
            state.degeneracy_count += 1
        if probe is not None:
            truth = np.asarray(probe(node.center), dtype=float)
            state.containment_total += state.schedules.m
            state.containment_escaped += int(np.sum((truth < q.L) | (truth > q.U)))
        new_R = intersect(nb.R, q)
        if new_R.degenerate and not (nb.R.degenerate or q.degenerate):
            state.degeneracy_count += 1
        nb.R = new_R


def step(state: EngineState) -> EngineState:
    """Apply exactly one round; composing steps until S empties equals run()."""
    if state.finished or not state.S:
        raise DomainError("step() requires a live state with nonempty undecided set")
    sched = state.schedules
    eps = sched.eps
    t = state.t
    tau_start = state.tau
    beta_t = beta(state.tau, sched)

    # (a) modeling over A = S u P (fixed at round start)
    _refresh_beliefs(state, beta_t)

    # (b) discarding against the pessimistic front of the active set
    active = sorted(state.S | state.P)
    pess = pessimistic_pareto([(k, state.beliefs[k].R.L) for k in active])
    candidates = sorted(state.S - pess)
    if candidates:
        pess_keys = sorted(pess)
        L_pess = np.array([state.beliefs[p].R.L for p in pess_keys])
        U_cand = np.array([state.beliefs[c].R.U for c in candidates])
        dominated = np.any(
            np.all(U_cand[:, None, :] <= L_pess[None, :, :] + eps, axis=2), axis=1
        )
        for c, gone in zip(candidates, dominated):
            if gone:
                state.S.discard(c)
                state.discarded.append((t, c))

    # (c) eps-covering against W = S u P (frozen for the phase)
    W = sorted(state.S | state.P)
    if state.S:
        U_W = np.array([state.beliefs[w].R.U for w in W])
        s_keys = sorted(state.S)
        L_S = np.array([state.beliefs[s].R.L for s in s_keys])
        blocked = np.any(
            np.all(L_S[:, None, :] + eps <= U_W[None, :, :], axis=2), axis=1
        )
        for s_key, b in zip(s_keys, blocked):
            if not b:
                state.S.discard(s_key)
                state.P.add(s_key)

    # omega_bar and the selected node over W (membership unchanged by (c))
    diams = np.array([diameter(state.beliefs[w].R) for w in W])
    best = int(np.argmax(diams))  # first maximizer = lowest (h, i) in sorted W
    omega_bar = float(diams[best])
    chosen = W[best]

    # (d) refine, evaluate, or terminate
    if not state.S:
        state.trace.append(
            TraceRow(t, tau_start, 0, len(state.P), omega_bar, "terminate", None, None)
        )
        state.finished = True
        state.termination_reason = "converged"
        state.t += 1
        return state

    node = state.nodes[chosen]
    nb = state.beliefs[chosen]
    vh = v_h(node.h, sched)
    if math.sqrt(beta_t) * float(np.linalg.norm(nb.sigma)) <= math.sqrt(sched.m) * vh:
        action = "refine"
        kids = children(node)
        owner = state.S if chosen in state.S else state.P
        owner.discard(chosen)
        for kid in kids:
            state.nodes[kid.key] = kid
            state.beliefs[kid.key] = NodeBelief(node=kid, R=nb.R)
            owner.add(kid.key)
        del state.nodes[chosen]
        del state.beliefs[chosen]
    else:
        action = "evaluate"
        x = node.center
        y = np.asarray(state.oracle(x), dtype=float)
        state.posterior = state.posterior.update(x, y)
        state.eval_log.append({"round": t, "node": chosen, "x": x, "y": y})
        state.tau += 1

    state.trace.append(
        TraceRow(t, tau_start, len(state.S), len(state.P), omega_bar, action, node.h, node.i)
    )
    state.t += 1
    return state


def _result(state: EngineState, truncated: bool) -> RunResult:
    p_hat = sorted(state.P)
    p_nodes = [state.nodes[k] for k in p_hat]
    if p_hat:
        centers = np.array([n.center for n in p_nodes])
        means, _ = state.posterior.predict_batch(centers)
    else:
        means = np.zeros((0, state.config.kernel.m))
    return RunResult(
        p_hat=p_hat,
        p_hat_nodes=p_nodes,
        p_hat_cells=[n.cell for n in p_nodes],
        p_hat_means=means,
        rounds=state.t - 1,
        tau=state.tau,
        eval_log=state.eval_log,
        trace=state.trace,
        termination_reason="budget" if truncated else (state.termination_reason or "converged"),
        truncated=truncated,
        degeneracy_count=state.degeneracy_count,
        containment_escaped=state.containment_escaped,
        containment_total=state.containment_total,
        posterior=state.posterior,
        schedules=state.schedules,
        discarded=list(state.discarded),
        discarded_nodes=[state.nodes[k] for _, k in state.discarded],
    )


def run(config: EngineConfig, oracle: Callable) -> RunResult:
    """Run rounds until the undecided set empties or the budget trips."""
    state = init_state(config, oracle)
    while not state.finished and state.S:
        if state.tau >= config.budget:
            return _result(state, truncated=True)
        step(state)
    return _result(state, truncated=False)


# ---------------------------------------------------------------------------
# sample-complexity bounds (recorded per run, asserted in tests)
# ---------------------------------------------------------------------------


def _first_true(pred, t_lo: int = 1, t_hi_cap: int = 2**62) -> int:
    """Smallest T >= t_lo with pred(T) true; doubling then bisection.

    Assumes pred has a monotone tail (true stays true), which holds for
    both bound conditions once T exceeds a small constant.
    """
    t_hi = max(t_lo, 2)
    while not pred(t_hi):
        t_hi *= 2
        if t_hi > t_hi_cap:
            return t_hi_cap
    lo, hi = t_lo, t_hi
    while lo < hi:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def budget_bound_information(result: RunResult, noise_var: float) -> int:
    """Smallest T with sqrt(16 beta_T sigma^2 C m gamma_T / T) <= min eps.

    C = sigma^-2 / log(1 + sigma^-2).  gamma_T uses the run's realized
    information-gain curve (held constant past the last evaluation),
    an optimistic stand-in for the kernel's worst-case gain.
    """
    s = result.schedules
    eps_min = float(np.min(s.eps))
    C = (1.0 / noise_var) / math.log1p(1.0 / noise_var)
    blocks = result.posterior.step_cov_blocks
    gains = np.cumsum(
        [
            0.5 * np.linalg.slogdet(np.eye(s.m) + B / noise_var)[1]
            for B in blocks
        ]
    )
    if len(gains) == 0:
        return 1

    def ok(T: int) -> bool:
        g = gains[min(T, len(gains)) - 1]
        return math.sqrt(16.0 * beta(T, s) * noise_var * C * s.m * g / T) <= eps_min

    return _first_true(ok)


def budget_bound_dimension(
    result: RunResult,
    noise_var: float,
    v2: float = 1.0,
    D_bar: Optional[float] = None,
) -> int:
    """Smallest T satisfying the metric-dimension bound condition.

    Valid for any D_bar strictly above the metric dimension; defaults to
    D1 + 1.  K1 and K2 follow the depth-counting argument: K1 carries the
    per-level packing numbers, K2 the tail below the cut depth H(T).
    """
    s = result.schedules
    eps_min = float(np.min(s.eps))
    if D_bar is None:
        D_bar = s.D1 + 1.0
    N1 = s.rho ** (-s.alpha)
    L = s.m * (4 * N1**2 + 4 * N1**2 * (2 * N1 + 2) + (2 * N1 + 2) ** 2)

    def ok(T: int) -> bool:
        if T < 3:
            return False
        K1 = (
            math.sqrt(L)
            * s.Q
            * noise_var
            * beta(T, s)
            / (s.C_K * s.v1**s.alpha * v2**D_bar * (s.rho ** (-(D_bar + s.alpha)) - 1.0))
        )
        H = math.floor(
            (math.log(T) - math.log(math.log(T))) / (math.log(1.0 / s.rho) * (D_bar + 2 * s.alpha))
        )
        H = max(H, 1)
        w = s.C_K * (s.v1 * s.rho**H) ** s.alpha
        inner = (
            s.C2
            + 2.0 * math.log(2.0 * H * H * math.pi**2 * s.m / (6.0 * s.delta))
            + H * math.log(s.N)
            + max(0.0, -4.0 * (s.D1 / s.alpha) * math.log(w))
        )
        K2 = 4.0 * math.sqrt(L) * s.C_K * s.v1**s.alpha * (math.sqrt(inner) + s.C3)
        p = -s.alpha / (D_bar + 2 * s.alpha)
        q = (D_bar + s.alpha) / (D_bar + 2 * s.alpha)
        r = s.alpha / (D_bar + 2 * s.alpha)
        val = K1 * T**p * math.log(T) ** (-q) + K2 * T**p * math.log(T) ** r
        return val <= eps_min

    return _first_true(ok, t_lo=3)


def sample_complexity_bounds(result: RunResult, noise_var: float, v2: float = 1.0) -> dict:
    """Both bound values plus their minimum; the run's tau must not exceed it."""
    info = budget_bound_information(result, noise_var)
    dim = budget_bound_dimension(result, noise_var, v2=v2)
    return {
        "information_type": int(info),
        "dimension_type": int(dim),
        "bound": int(min(info, dim)),
    }
