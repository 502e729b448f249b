"""Release gate: every headline claim as one test with a one-line verdict.

Each test here checks one published behavior of the algorithm end to end;
run with ``python3 -m pytest tests/test_acceptance.py -v -rA`` to see one
pass/fail line per claim together with the measured numbers.  The full
gate performs dozens of complete optimization runs and takes roughly
twenty minutes on a single core.
"""

from __future__ import annotations

import json
import math
import time

import numpy as np
import pytest
from conftest import dense_predict, random_kernel, random_trajectory

from adapal.bench import (
    eps_accuracy,
    eps_coverage,
    make_oracle,
    predicted_front_from_result,
    sample_gp_function,
    true_pareto_front,
)
from adapal.confidence import HyperRect
from adapal.engine import (
    EngineConfig,
    beta,
    eval_cap,
    init_state,
    make_schedules,
    run,
    step,
    v_h,
)
from adapal.gp import GPPosterior
from adapal.kernels import (
    MATERN52,
    SQUARED_EXPONENTIAL,
    MultiOutputKernel,
    ScalarKernel,
)
from adapal.pareto import hypervolume, hypervolume_mc, nondominated_set
from adapal.partition import DesignSpace, PartitionParams

SPACE = DesignSpace(dim=1)
PARAMS = PartitionParams(N=2, rho=0.5, v1=1.0, v2=1.0)


def scalar(family: str, variance: float, lengthscale: float) -> ScalarKernel:
    return ScalarKernel(family=family, variance=variance, lengthscale=lengthscale)


def benchmark_kernel(family: str) -> MultiOutputKernel:
    return MultiOutputKernel(
        kernels=(scalar(family, 0.5, 0.1), scalar(family, 0.1, 0.06))
    )


def make_config(eps: float, kernel: MultiOutputKernel, **kwargs) -> EngineConfig:
    return EngineConfig(
        space=SPACE,
        params=PARAMS,
        kernel=kernel,
        eps=np.array([eps, eps]),
        delta=0.05,
        noise_var=1e-4,
        **kwargs,
    )


def scored_run(config: EngineConfig, obj, truth, seed: int) -> dict:
    t0 = time.monotonic()
    result = run(config, make_oracle(obj, config.noise_var, seed))
    seconds = time.monotonic() - t0
    predicted = predicted_front_from_result(obj, result.p_hat_nodes)
    return {
        "config": config,
        "result": result,
        "seconds": seconds,
        "accuracy": eps_accuracy(predicted, truth, config.eps),
        "coverage": eps_coverage(truth, predicted, config.eps),
    }


# ---------------------------------------------------------------------------
# shared run corpora (built once, reused by several gates)
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def sim1_runs():
    """The desk-scale benchmark: eps=0.05, depth override 10, ten seeds."""
    kernel = benchmark_kernel(SQUARED_EXPONENTIAL)
    out = []
    for seed in range(10):
        obj = sample_gp_function(kernel, SPACE, seed=seed)
        truth = true_pareto_front(obj)
        config = make_config(0.05, kernel, h_max_override=10)
        out.append(scored_run(config, obj, truth, seed))
    return out


@pytest.fixture(scope="module")
def sweep_runs():
    """Both kernel families x eps in {0.1, 0.2, 0.3} x ten seeds."""
    out = {}
    for family in (SQUARED_EXPONENTIAL, MATERN52):
        kernel = benchmark_kernel(family)
        for seed in range(10):
            obj = sample_gp_function(kernel, SPACE, grid_size=4000, seed=seed)
            truth = true_pareto_front(obj)
            for eps in (0.1, 0.2, 0.3):
                config = make_config(eps, kernel, h_max_override=10)
                out[(family, eps, seed)] = scored_run(config, obj, truth, seed)
    return out


@pytest.fixture(scope="module")
def containment_runs():
    """Thirty runs with the theoretical schedules and truth probes on."""
    kernel = benchmark_kernel(SQUARED_EXPONENTIAL)
    out = []
    for seed in range(30):
        obj = sample_gp_function(kernel, SPACE, grid_size=1000, seed=seed)
        config = make_config(1.0, kernel, containment_probe=obj.value)
        out.append(
            {"config": config, "result": run(config, make_oracle(obj, 1e-4, seed))}
        )
    return out


def all_runs(*corpora):
    for corpus in corpora:
        entries = corpus.values() if isinstance(corpus, dict) else corpus
        for entry in entries:
            yield entry["config"], entry["result"]


# ---------------------------------------------------------------------------
# the gates
# ---------------------------------------------------------------------------


def test_benchmark_scores_perfect_accuracy_and_coverage(sim1_runs) -> None:
    perfect = sum(1 for e in sim1_runs if e["accuracy"] == 1.0 and e["coverage"] == 1.0)
    slowest = max(e["seconds"] for e in sim1_runs)
    assert perfect >= 9, [
        (e["accuracy"], e["coverage"]) for e in sim1_runs
    ]
    assert slowest <= 300.0
    print(
        f"PASS benchmark reproduction: {perfect}/10 seeds at accuracy=coverage=1.0, "
        f"slowest seed {slowest:.1f}s (limit 300s)"
    )


def test_eps_sweep_scores_and_effort_monotonicity(sweep_runs) -> None:
    cells = []
    for family in (SQUARED_EXPONENTIAL, MATERN52):
        means = []
        for eps in (0.1, 0.2, 0.3):
            entries = [sweep_runs[(family, eps, s)] for s in range(10)]
            perfect = sum(
                1 for e in entries if e["accuracy"] == 1.0 and e["coverage"] == 1.0
            )
            assert perfect >= 9, (family, eps, perfect)
            cells.append(perfect)
            means.append(np.mean([e["result"].tau for e in entries]))
        assert means[0] >= means[1] >= means[2], (family, means)
    print(
        f"PASS eps sweep: perfect-score seeds per cell {cells} (need >= 9 each); "
        "mean evaluations nonincreasing in eps for both kernel families"
    )


def test_round_invariants_hold_on_every_trace(
    sim1_runs, sweep_runs, containment_runs
) -> None:
    # (a) a round in which every rectangle is a point must finish the run
    kernel = benchmark_kernel(SQUARED_EXPONENTIAL)
    obj = sample_gp_function(kernel, SPACE, grid_size=500, seed=2)
    state = init_state(make_config(0.2, kernel, h_max_override=10), make_oracle(obj, 1e-4, 2))
    for _ in range(6):
        step(state)
    assert not state.finished
    for nb in state.beliefs.values():
        mid = 0.5 * (nb.R.L + nb.R.U)
        nb.R = HyperRect(mid, mid)
    step(state)
    assert state.finished and state.termination_reason == "converged"

    runs_checked = 0
    for config, result in all_runs(sim1_runs, sweep_runs, containment_runs):
        s = result.schedules
        cap = s.h_max if config.h_max_override is None else min(s.h_max, config.h_max_override)
        evals: dict = {}
        for row in result.trace:
            # (b) depth cap
            if row.node_h is not None:
                assert row.node_h <= cap
            if row.action == "evaluate":
                key = (row.node_h, row.node_i)
                evals[key] = evals.get(key, 0) + 1
        # (c) per-node evaluation cap
        for (h, _), n in evals.items():
            assert n <= eval_cap(s, result.tau, h, config.noise_var)
        # (d) the refinement criterion is nonincreasing round over round
        omegas = [row.omega_bar for row in result.trace]
        assert all(b <= a + 1e-12 for a, b in zip(omegas, omegas[1:]))
        runs_checked += 1
    print(
        f"PASS round invariants: early-stop on point rectangles; depth cap, "
        f"per-node evaluation cap, and nonincreasing uncertainty on all "
        f"{runs_checked} full runs"
    )


def test_core_routines_match_independent_oracles() -> None:
    # nondominated set vs quadratic brute force
    rng = np.random.default_rng(0)
    for trial in range(1000):
        n = int(rng.integers(1, 65))
        m = int(rng.choice([2, 3, 4]))
        pts = (
            rng.integers(0, 4, size=(n, m)).astype(float)
            if trial % 3 == 0
            else rng.normal(size=(n, m))
        )
        brute = [
            i
            for i in range(n)
            if not any(
                np.all(pts[j] >= pts[i]) and np.any(pts[j] > pts[i]) for j in range(n)
            )
        ]
        assert nondominated_set(pts) == brute

    # incremental GP posterior vs dense from-scratch solve
    worst_gp = 0.0
    rng = np.random.default_rng(1)
    for _ in range(50):
        m = int(rng.integers(1, 4))
        kernel = random_kernel(rng, m)
        noise = float(rng.uniform(1e-4, 1e-1))
        X, Y = random_trajectory(rng, int(rng.integers(1, 15)), m)
        post = GPPosterior(kernel, noise)
        for x, y in zip(X, Y):
            post = post.update(x, y)
        for x in rng.uniform(0, 1, size=(4, 1)):
            mean, std = dense_predict(kernel, noise, X, Y, x)
            got = post.predict(x)
            scale = max(1.0, float(np.max(np.abs(mean))))
            worst_gp = max(
                worst_gp,
                float(np.max(np.abs(got.mean - mean))) / scale,
                float(np.max(np.abs(got.std - std))) / scale,
            )
    assert worst_gp <= 1e-8

    # chain-rule information gain vs one global log-determinant
    from adapal.gp import prior_gram

    worst_ig = 0.0
    rng = np.random.default_rng(2)
    for _ in range(20):
        m = int(rng.integers(1, 4))
        kernel = random_kernel(rng, m)
        noise = float(rng.uniform(1e-3, 1e-1))
        X, Y = random_trajectory(rng, int(rng.integers(1, 12)), m)
        post = GPPosterior(kernel, noise)
        for x, y in zip(X, Y):
            post = post.update(x, y)
        G = prior_gram(kernel, X)
        _, logdet = np.linalg.slogdet(np.eye(G.shape[0]) + G / noise)
        worst_ig = max(worst_ig, abs(post.information_gain() - 0.5 * logdet))
    assert worst_ig <= 1e-6

    # exact hypervolume sweeps vs Monte Carlo
    worst_hv = 0.0
    rng = np.random.default_rng(3)
    for m in (2, 3):
        for _ in range(5):
            pts = rng.uniform(0.2, 1.0, size=(12, m))
            pts = pts[nondominated_set(pts)]
            ref = np.zeros(m)
            exact = hypervolume(pts, ref)
            mc = hypervolume_mc(pts, ref, n_samples=1_000_000, seed=int(rng.integers(1e6)))
            worst_hv = max(worst_hv, abs(exact - mc) / exact)
    assert worst_hv <= 0.01

    print(
        "PASS independent oracles: nondominated exact on 1000 instances; GP "
        f"posterior max rel err {worst_gp:.2e} (<=1e-8); information gain max "
        f"err {worst_ig:.2e} (<=1e-6); hypervolume MC max rel err "
        f"{worst_hv:.2%} (<=1%)"
    )


def test_confidence_rectangles_contain_the_truth(containment_runs) -> None:
    escaped = sum(e["result"].containment_escaped for e in containment_runs)
    total = sum(e["result"].containment_total for e in containment_runs)
    assert len(containment_runs) >= 30
    assert total > 100_000  # the probe really fired
    freq = escaped / total
    assert freq <= 0.05
    print(
        f"PASS containment: {escaped}/{total} probed objective values escaped "
        f"their rectangle across {len(containment_runs)} runs "
        f"(frequency {freq:.2e} <= delta=0.05)"
    )


def test_schedule_constants_audit(capsys) -> None:
    sim = dict(delta=0.05, eps=np.array([0.05, 0.05]), m=2, N=2,
               C_K=10.0, alpha=1.0, D1=1.0, v1=1.0, rho=0.5)
    # hand-computed confidence multiplier at tau=0 for the depth-10 variant
    s10 = make_schedules(beta_h_max=10, **sim)
    expected = 2.0 * math.log(4.0 * math.pi**2 * 2048.0 / 0.15)
    assert beta(0, s10) == pytest.approx(expected, abs=1e-9)
    assert expected == pytest.approx(26.4, abs=0.01)

    s = make_schedules(**sim)
    limit = s.rho**-s.alpha
    for h in range(1, 31):
        assert v_h(h, s) / v_h(h + 1, s) <= limit + 1e-12

    # our depth bound is reported next to the published 24, delta explained
    import os

    from adapal.cli import main

    repo_config = os.path.join(os.path.dirname(__file__), "..", "configs", "sim1.json")
    assert main(["schedule", "--config", repo_config]) == 0
    out = capsys.readouterr().out
    assert "h_max (computed): 16" in out
    assert "published reference for this configuration): 24" in out
    assert "convention" in out  # the delta is attributed to constant choices
    print(
        f"PASS schedule audit: beta_0={beta(0, s10):.9f} matches 26.4 hand value "
        f"to 1e-9; V_h ratio bounded by rho^-alpha for h in [1,30]; computed "
        f"h_max 16 reported beside published 24"
    )


def test_identical_runs_at_any_worker_count(tmp_path) -> None:
    from adapal.cli import main

    config = {
        "kernel": {
            "structure": "independent",
            "objectives": [
                {"family": "squared-exponential", "variance": 0.5, "lengthscale": 0.1},
                {"family": "squared-exponential", "variance": 0.1, "lengthscale": 0.06},
            ],
        },
        "eps": [0.2, 0.2],
        "delta": 0.05,
        "noise_var": 1e-4,
        "schedules": {"h_max_override": 10},
        "seeds": [0, 1],
        "grid_size": 2500,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    out1, out2 = tmp_path / "w1", tmp_path / "w2"
    assert main(["run", "--config", str(path), "--out", str(out1)]) == 0
    assert main(["run", "--config", str(path), "--out", str(out2), "--workers", "2"]) == 0

    for seed in (0, 1):
        for name in ("trace.csv", "hv_curve.csv"):
            assert (out1 / f"seed-{seed}" / name).read_bytes() == (
                out2 / f"seed-{seed}" / name
            ).read_bytes()

    def stable(p):
        doc = json.loads((p / "summary.json").read_text())
        doc.pop("wall_time_seconds")
        for entry in doc["results"].values():
            entry.pop("wall_time_seconds")
        return doc

    assert stable(out1) == stable(out2)
    print(
        "PASS determinism: traces and hypervolume curves byte-identical and "
        "summaries equal (modulo wall time) for 1 vs 2 workers"
    )
