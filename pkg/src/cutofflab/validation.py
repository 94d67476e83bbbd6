"""Falsification battery: covariate balance, density checks, placebos.

Everything here re-runs the primary estimators unchanged: balance rows and
placebo rows call the same local-randomization and continuity code paths
used for the outcome analyses, so estimator fixes propagate automatically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .data import Dataset, Selector
from .errors import EmptySideError
from .rd_continuity import rd_continuity_estimate
from .rd_local import RdWindow, fisher_p, rd_local_estimate, window_from_half_width

__all__ = [
    "ValidationReport",
    "balance_table",
    "density_binomial",
    "placebo_cutoffs",
    "frequency_table",
    "build_validation_report",
    "BALANCE_FLAG_THRESHOLD",
]

#: Minimum balance p-value below which a window earns an asterisk.
BALANCE_FLAG_THRESHOLD = 0.15


def density_binomial(ds: Dataset, cutoff: float, window: RdWindow) -> tuple[int, int, float]:
    """Exact two-sided binomial count test at success probability 1/2.

    Returns (n_treated, n_control, p) with p computed by tail doubling,
    capped at 1, for the observed treated count among all in-window rows.
    """
    ranks = ds.column("pre_event_rank")
    in_window = (ranks >= window.lower) & (ranks <= window.upper)
    if not in_window.any():
        raise EmptySideError(f"window {window} is empty")
    treated = int(((ranks < cutoff) & in_window).sum())
    control = int(((ranks > cutoff) & in_window).sum())
    n = treated + control
    lower_tail = float(stats.binom.cdf(treated, n, 0.5))
    upper_tail = float(stats.binom.sf(treated - 1, n, 0.5))
    p = min(1.0, 2.0 * min(lower_tail, upper_tail))
    return treated, control, p


def _min_balance_p(
    ds: Dataset,
    covariates: Sequence[Selector],
    window: RdWindow,
    n_permutations: int,
    seed: int,
) -> float:
    p = 1.0
    for j, cov in enumerate(covariates):
        p = min(
            p,
            fisher_p(
                ds, cov, window, n_permutations=n_permutations,
                seed=int(np.random.SeedSequence((seed, window.lower, j)).generate_state(1)[0]),
            ),
        )
    return p


def balance_table(
    ds: Dataset,
    covariates: Sequence[Selector],
    windows: Sequence[RdWindow],
    continuity_spec: dict | None = None,
    n_permutations: int = 10000,
    seed: int = 0,
) -> list[dict]:
    """Treatment-effect estimates on predetermined covariates.

    For each covariate: one local-randomization row per window plus one
    continuity-based row (MSE-optimal bandwidth); rows missing the
    covariate are dropped per covariate by the estimators themselves.
    """
    continuity_spec = dict(continuity_spec or {})
    cutoff = windows[0].cutoff if windows else continuity_spec.get("cutoff", 30.5)
    rows = []
    for cov in covariates:
        name = cov if isinstance(cov, str) else getattr(cov, "__name__", "covariate")
        for window in windows:
            res = rd_local_estimate(
                ds, cov, window, n_permutations=n_permutations, seed=seed
            )
            rows.append(
                {
                    "covariate": name,
                    "spec": f"W {window}",
                    "estimate": res.estimate,
                    "p_value": res.p_value,
                    "n_treated": res.n_treated,
                    "n_control": res.n_control,
                }
            )
        cont = rd_continuity_estimate(ds, cov, cutoff=cutoff, **continuity_spec)
        lo, hi = cont.rank_interval()
        rows.append(
            {
                "covariate": name,
                "spec": f"h [{lo}, {hi}]",
                "estimate": cont.tau_conventional,
                "p_value": cont.p_robust,
                "n_treated": cont.effective_n_treated,
                "n_control": cont.effective_n_control,
            }
        )
    return rows


def placebo_cutoffs(
    ds: Dataset,
    outcome: Selector,
    cutoffs: Sequence[float] = (20.5, 40.5),
    half_widths: Sequence[int] = (1, 2, 3),
    covariates: Sequence[Selector] = (),
    continuity_spec: dict | None = None,
    n_permutations: int = 10000,
    seed: int = 0,
) -> list[dict]:
    """Re-run both estimators at cutoffs where no jump should exist.

    Local-randomization rows use windows of the given half widths centred
    at each placebo cutoff; when covariates are supplied, windows whose
    minimum balance p-value falls below the asterisk threshold are flagged
    (``balance_ok = False``). One continuity-based row per cutoff follows.
    """
    continuity_spec = dict(continuity_spec or {})
    rows = []
    for cutoff in cutoffs:
        for hw in half_widths:
            window = window_from_half_width(cutoff, hw)
            res = rd_local_estimate(
                ds, outcome, window, n_permutations=n_permutations, seed=seed
            )
            balance_ok = True
            if covariates:
                balance_ok = (
                    _min_balance_p(ds, covariates, window, n_permutations, seed)
                    >= BALANCE_FLAG_THRESHOLD
                )
            rows.append(
                {
                    "cutoff": cutoff,
                    "method": "local",
                    "spec": f"W {window}",
                    "estimate": res.estimate,
                    "p_value": res.p_value,
                    "n_treated": res.n_treated,
                    "n_control": res.n_control,
                    "balance_ok": balance_ok,
                }
            )
        cont = rd_continuity_estimate(ds, outcome, cutoff=cutoff, **continuity_spec)
        lo, hi = cont.rank_interval()
        rows.append(
            {
                "cutoff": cutoff,
                "method": "continuity",
                "spec": f"h [{lo}, {hi}]",
                "estimate": cont.tau_conventional,
                "p_value": cont.p_robust,
                "n_treated": cont.effective_n_treated,
                "n_control": cont.effective_n_control,
                "balance_ok": True,
            }
        )
    return rows


def frequency_table(ds: Dataset, cutoff: float, half_width: int = 5) -> list[dict]:
    """Observation counts per rank and regime at the closest mass points."""
    ranks = ds.column("pre_event_rank")
    lo = math.floor(cutoff) - half_width + 1
    hi = math.floor(cutoff) + half_width
    rows = []
    for r in range(lo, hi + 1):
        counts = {}
        for regime in ("before", "after"):
            sub = ds.filter(regime=regime)
            counts[regime] = int((sub.column("pre_event_rank") == r).sum())
        rows.append(
            {
                "rank": r,
                "status": "treated" if r < cutoff else "controls",
                "n_before": counts["before"],
                "n_after": counts["after"],
            }
        )
    return rows


@dataclass(frozen=True)
class ValidationReport:
    balance_rows: list = field(default_factory=list)
    density_tests: list = field(default_factory=list)
    placebo_rows: list = field(default_factory=list)
    frequency_rows: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "balance": self.balance_rows,
            "density": self.density_tests,
            "placebo": self.placebo_rows,
            "frequency": self.frequency_rows,
        }


def build_validation_report(
    ds: Dataset,
    covariates: Sequence[Selector],
    outcome: Selector = "advanced",
    cutoff: float = 30.5,
    windows: Sequence[RdWindow] | None = None,
    placebo_cutoff_values: Sequence[float] = (20.5, 40.5),
    continuity_spec: dict | None = None,
    n_permutations: int = 10000,
    seed: int = 0,
) -> ValidationReport:
    """Assemble the full battery for one dataset."""
    if windows is None:
        windows = [window_from_half_width(cutoff, 1), window_from_half_width(cutoff, 3)]
    density = []
    for window in windows:
        t, c, p = density_binomial(ds, cutoff, window)
        density.append(
            {"window": f"{window}", "n_treated": t, "n_control": c, "p_value": p}
        )
    return ValidationReport(
        balance_rows=balance_table(
            ds, covariates, windows, continuity_spec,
            n_permutations=n_permutations, seed=seed,
        ),
        density_tests=density,
        placebo_rows=placebo_cutoffs(
            ds, outcome, cutoffs=placebo_cutoff_values,
            covariates=covariates, continuity_spec=continuity_spec,
            n_permutations=n_permutations, seed=seed,
        ),
        frequency_rows=frequency_table(ds, cutoff),
    )
