"""Acceptance battery.

Each test covers one release criterion at its stated tolerance and prints
one PASS line on success (run with `pytest tests/test_acceptance.py -v -s`
to see them; a failed criterion shows up as an ordinary test failure).
"""

import json
import math
from itertools import combinations

import numpy as np
import pytest

from cutofflab.cli import main
from cutofflab.contest import ContestParams, sample_outcomes, solve_equilibrium, verify_equilibrium
from cutofflab.data import Dataset
from cutofflab.rd_continuity import (
    diff_in_disc,
    local_linear_jump,
    mse_optimal_bandwidth,
    rd_continuity_estimate,
)
from cutofflab.rd_local import diff_in_means, fisher_p, select_window, window_from_half_width
from cutofflab.simulator import SimulationConfig, regime_rank_map, simulate_dataset
from cutofflab.validation import density_binomial

from conftest import grid_dataset, outcome_dataset

W1 = window_from_half_width(30.5, 1)
Z95 = 1.959963984540054


def report(criterion: str, detail: str) -> None:
    print(f"[acceptance] {criterion}: PASS ({detail})")


# ---------------------------------------------------------------------------
# 1. contest proposition


def test_criterion_1_contest_proposition():
    grid = [
        ContestParams(W, d, u, s)
        for W in (0.5, 1.0, 2.0)
        for d in (0.0, 0.5, 1.0, 2.0)
        for u in (0.0, 0.5, 1.0, 2.0)
        if u <= d
        for s in (0, 1)
    ]
    n = 1_000_000
    for i, params in enumerate(grid):
        sol = solve_equilibrium(params)
        if params.s == 1 and params.d > params.u:
            assert sol.p1 > 0.5
        else:
            assert sol.p1 == pytest.approx(0.5)
        oracle = verify_equilibrium(params, grid_points=200)
        assert oracle.passed, (params, oracle)
        draws = sample_outcomes(params, n, seed=100 + i)
        emp_p1 = float((draws[:, 2] == 0).mean())
        se = math.sqrt(sol.p1 * sol.p2 / n)
        assert abs(emp_p1 - sol.p1) <= 3 * se, (params, emp_p1, sol.p1)
    report(
        "1 contest proposition",
        f"{len(grid)} parameter sets: closed form, best-response oracle, "
        f"Monte Carlo at n=1e6 within 3 SE",
    )


# ---------------------------------------------------------------------------
# 2. binomial density anchors


def test_criterion_2_binomial_anchors():
    def ds_with_counts(t, c):
        return outcome_dataset([30] * t + [31] * c, [0.0] * (t + c))

    _, _, p1 = density_binomial(ds_with_counts(51, 53), 30.5, W1)
    _, _, p2 = density_binomial(ds_with_counts(160, 160), 30.5, W1)
    _, _, p3 = density_binomial(ds_with_counts(47, 42), 30.5, W1)
    assert round(p1, 3) == 0.922
    assert p2 == 1.000
    assert abs(p3 - 0.672) <= 0.001
    report("2 binomial density anchors", f"51/53 -> {p1:.3f}, 160/160 -> {p2:.3f}, 47/42 -> {p3:.3f}")


# ---------------------------------------------------------------------------
# 3. permutation exactness


def exact_permutation_p(values, n_treated):
    values = np.asarray(values, dtype=float)
    total = values.sum()
    n = values.size

    def stat(idx):
        s = values[list(idx)].sum()
        return abs(s / n_treated - (total - s) / (n - n_treated))

    observed = stat(range(n_treated))
    hits = sum(
        1
        for combo in combinations(range(n), n_treated)
        if stat(combo) >= observed - 1e-12
    )
    return hits / math.comb(n, n_treated)


def test_criterion_3_permutation_exactness():
    rng = np.random.default_rng(7)
    cases = [
        [1, 1, 0, 0],
        [1, 1, 1, 0, 0, 0],
        list(rng.normal(0, 1, 8)),
        list(rng.integers(0, 3, 10).astype(float)),
        list(rng.normal(0, 1, 10)),
    ]
    n_perm = 10000
    for values in cases:
        n_treated = len(values) // 2
        ranks = [30] * n_treated + [31] * (len(values) - n_treated)
        ds = outcome_dataset(ranks, values)
        p_exact = fisher_p(ds, "round1_total", W1, method="enumerate")
        assert p_exact == pytest.approx(exact_permutation_p(values, n_treated))
        # forcing enumeration is exact and reproducible
        assert fisher_p(ds, "round1_total", W1, method="enumerate") == p_exact
        p_sim = fisher_p(ds, "round1_total", W1, n_permutations=n_perm, seed=3)
        bound = 2 * math.sqrt(p_exact * (1 - p_exact) / n_perm)
        assert abs(p_sim - p_exact) <= max(bound, 1 / (1 + n_perm)), (values, p_sim, p_exact)
    report(
        "3 permutation exactness",
        f"{len(cases)} datasets <= 10 units: enumeration matches oracle, "
        f"simulation within 2*sqrt(p(1-p)/B)",
    )


# ---------------------------------------------------------------------------
# 4. synthetic effect recovery at tournament scale


def order_statistics_jump(tau, ability_sd, noise_sd, n_entrants, n_qualify,
                          n_advance, n_events, seed):
    """Side Monte Carlo of the qualification + first-round mechanism."""
    rng = np.random.default_rng(seed)
    ability = rng.normal(0, ability_sd, (n_events, n_entrants))
    qual = ability + rng.normal(0, noise_sd, (n_events, n_entrants))
    order = np.argsort(-qual, axis=1)
    rank = np.empty_like(order)
    rows = np.arange(n_events)[:, None]
    rank[rows, order] = np.arange(1, n_entrants + 1)
    starters = rank <= n_qualify
    round1 = ability + rng.normal(0, noise_sd, (n_events, n_entrants))
    round1 = round1 + tau * (rank <= n_advance)
    scores = np.where(starters, round1, -np.inf)
    threshold = np.sort(scores, axis=1)[:, -n_advance][:, None]
    advanced = scores >= threshold
    p30 = advanced[rank == n_advance].mean()
    p31 = advanced[rank == n_advance + 1].mean()
    return float(p30 - p31)


def test_criterion_4_local_randomization_recovery():
    config = SimulationConfig()  # 53 before / 44 after events, tau = 0.75
    truth = order_statistics_jump(
        config.injected_effect_tau, config.ability_sd, config.noise_sd,
        config.n_entrants, config.n_qualify, config.n_advance,
        n_events=60000, seed=424242,
    )
    assert 0.25 <= truth <= 0.35  # the default shift targets a ~0.30 jump

    estimates = []
    before_rejections = 0
    n_reps = 200
    for r in range(n_reps):
        ds = simulate_dataset(
            SimulationConfig(**{**config.to_dict(), "seed": 5000 + r})
        )
        after = ds.filter(regime="after")
        estimates.append(diff_in_means(after, "advanced", W1))
        before = ds.filter(regime="before")
        p = fisher_p(before, "advanced", W1, n_permutations=999, seed=r)
        before_rejections += p < 0.05

    mean_estimate = float(np.mean(estimates))
    rejection_rate = before_rejections / n_reps
    assert abs(mean_estimate - truth) <= 0.03, (mean_estimate, truth)
    assert rejection_rate <= 0.09, rejection_rate
    report(
        "4 synthetic effect recovery",
        f"true jump {truth:.3f}, mean estimate {mean_estimate:.3f} "
        f"(|diff| <= 0.03); before-regime rejections {rejection_rate:.1%} <= 9%",
    )


# ---------------------------------------------------------------------------
# 5. continuity-based calibration


def quad_dgp(jump, curve=0.02):
    def fn(rank):
        u = rank - 30.5
        c = curve if rank < 30.5 else 0.0
        return 0.6 - 0.01 * u + c * u**2 + (jump if rank < 30.5 else 0.0)

    return fn


def test_criterion_5_continuity_calibration():
    jump = 0.274
    n_reps = 500
    covered = 0
    for seed in range(n_reps):
        ds = grid_dataset(quad_dgp(jump), obs_per_rank=40, noise_sd=0.4, seed=seed)
        res = rd_continuity_estimate(ds, "round1_total", 30.5)
        lo = res.tau_bias_corrected - Z95 * res.se_robust
        hi = res.tau_bias_corrected + Z95 * res.se_robust
        covered += lo <= jump <= hi
    coverage = covered / n_reps
    assert 0.91 <= coverage <= 0.98, coverage

    rejections = 0
    for seed in range(n_reps):
        ds = grid_dataset(
            quad_dgp(0.0), obs_per_rank=40, noise_sd=0.4, seed=10000 + seed
        )
        res = rd_continuity_estimate(ds, "round1_total", 30.5)
        rejections += res.p_robust < 0.05
    size = rejections / n_reps
    assert 0.02 <= size <= 0.09, size

    log_ratios = []
    for seed in range(24):
        small = grid_dataset(
            quad_dgp(0.0, curve=0.05), obs_per_rank=20, noise_sd=0.3, seed=seed
        )
        big = grid_dataset(
            quad_dgp(0.0, curve=0.05), obs_per_rank=320, noise_sd=0.3,
            seed=20000 + seed,
        )
        h_small = mse_optimal_bandwidth(small, "round1_total", 30.5).h
        h_big = mse_optimal_bandwidth(big, "round1_total", 30.5).h
        log_ratios.append(math.log(h_big / h_small))
    gm = math.exp(float(np.mean(log_ratios)))
    target = 16 ** (-1 / 5)
    assert 0.85 * target <= gm <= 1.15 * target, gm
    report(
        "5 continuity calibration",
        f"coverage {coverage:.1%} in [91%, 98%], size {size:.1%} in [2%, 9%], "
        f"bandwidth shrink {gm:.3f} vs {target:.3f} (+-15%)",
    )


# ---------------------------------------------------------------------------
# 6. diff-in-disc identity and recovery


def test_criterion_6_diff_in_disc():
    def build(jump_before, jump_after, seed):
        before = grid_dataset(
            quad_dgp(jump_before, curve=0.0), obs_per_rank=30, noise_sd=0.4,
            regime="before", seed=seed,
        )
        after = grid_dataset(
            quad_dgp(jump_after, curve=0.0), obs_per_rank=30, noise_sd=0.4,
            regime="after", seed=seed + 1,
        )
        from conftest import make_record

        records = [
            make_record(
                rec.pre_event_rank, regime=rec.regime.value,
                athlete_id=f"{rec.regime.value[0]}{i}", outcome=rec.round1_total,
            )
            for i, rec in enumerate(before.records + after.records)
        ]
        return Dataset(records)

    ds = build(0.05, 0.30, seed=77)
    h = 7.0
    dd = diff_in_disc(ds, "round1_total", 30.5, h=h)
    tau_before, _ = local_linear_jump(ds.filter(regime="before"), "round1_total", 30.5, h)
    tau_after, _ = local_linear_jump(ds.filter(regime="after"), "round1_total", 30.5, h)
    identity_gap = abs(dd.delta_tau - (tau_after - tau_before))
    assert identity_gap < 1e-10, identity_gap

    dd_auto = diff_in_disc(ds, "round1_total", 30.5)
    assert abs(dd_auto.delta_tau - 0.25) <= 3 * dd_auto.se, (dd_auto.delta_tau, dd_auto.se)
    report(
        "6 diff-in-disc",
        f"saturated-interaction identity gap {identity_gap:.1e}; "
        f"recovered {dd_auto.delta_tau:.3f} for injected 0.25 "
        f"(within 3 x {dd_auto.se:.3f})",
    )


# ---------------------------------------------------------------------------
# 7. window selection


def test_criterion_7_window_selection():
    ranks, cov = [], []
    for r in range(21, 41):
        for _ in range(16):
            ranks.append(r)
            cov.append(1.0 if r <= 27 else (-1.0 if r >= 34 else 0.0))
    ds = outcome_dataset(ranks, cov)
    window = select_window(
        ds, ["round1_total"], cutoff=30.5, threshold=0.15,
        n_permutations=2000, seed=1,
    )
    assert (window.lower, window.upper) == (28, 33), window

    widths = []
    for threshold in (0.05, 0.15, 0.5):
        w = select_window(
            ds, ["round1_total"], cutoff=30.5, threshold=threshold,
            n_permutations=2000, seed=1,
        )
        widths.append(w.upper - w.lower)
    assert widths == sorted(widths, reverse=True), widths
    report(
        "7 window selection",
        f"imbalance outside [28, 33] -> window {window}; monotone in threshold",
    )


# ---------------------------------------------------------------------------
# 8. rank-mapping fidelity


def test_criterion_8_rank_mapping():
    assert regime_rank_map("before", 20, False) == 30
    assert all(regime_rank_map("after", nom, False) == nom for nom in range(1, 51))
    assert [
        regime_rank_map("before", None, True, wc_standing_position=p)
        for p in range(1, 11)
    ] == list(range(1, 11))

    config = SimulationConfig(
        n_seasons=2, events_per_season=(6, 6),
        regime_schedule=("before", "after"), seed=88,
    )
    ds = simulate_dataset(config)
    for (_, event_id), recs in ds.by_event().items():
        assert len(recs) == 50, event_id
        assert sum(r.advanced for r in recs) == 30, event_id
        assert sorted(r.pre_event_rank for r in recs) == list(range(1, 51))
    report(
        "8 rank mapping",
        "figure-2 mapping exact; every simulated event has 30 advancers "
        "among 50 starters",
    )


# ---------------------------------------------------------------------------
# 9. replicate determinism


def test_criterion_9_replicate_determinism(tmp_path):
    # the default config: 53 before / 44 after events with a fixed seed
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"seed": 31}), encoding="utf-8")
    digests = []
    for run in ("one", "two"):
        out = tmp_path / run
        code = main(
            ["replicate", "--config", str(cfg), "--out-dir", str(out),
             "--permutations", "2000"]
        )
        assert code == 0
        digests.append((out / "digest.txt").read_text())
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["output_paths"]) >= 10
    assert digests[0] == digests[1]
    report(
        "9 replicate determinism",
        f"two full-scale runs, identical summary digest {digests[0].strip()[:12]}...",
    )
