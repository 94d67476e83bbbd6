"""Local-randomization regression discontinuity.

Treats the integer ranks inside a small window around the cutoff as
quasi-randomly assigned: the point estimate is the raw difference in means
between the treated side (ranks at or below the cutoff) and the control
side, and inference is by permutation of the treatment labels with fixed
group sizes. The window itself can be chosen by covariate balance: the
widest symmetric window in which every nested window keeps all balance
p-values above a threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .data import Dataset, Selector, selector_values
from .errors import EmptySideError, InvalidParametersError
from .rng import substream

__all__ = [
    "RdWindow",
    "RdLocalResult",
    "window_from_half_width",
    "diff_in_means",
    "fisher_p",
    "select_window",
    "rd_local_estimate",
]


@dataclass(frozen=True)
class RdWindow:
    """Closed rank window [lower, upper] split by a half-integer cutoff."""

    lower: int
    upper: int
    cutoff: float = 30.5
    balanced: bool = True

    def __post_init__(self):
        if not (self.lower <= math.floor(self.cutoff) < math.ceil(self.cutoff) <= self.upper):
            raise InvalidParametersError(
                f"window [{self.lower}, {self.upper}] must straddle cutoff {self.cutoff}"
            )

    def __str__(self) -> str:
        return f"[{self.lower}, {self.upper}]"


def window_from_half_width(cutoff: float, half_width: int, balanced: bool = True) -> RdWindow:
    """Ranks within `half_width` of the cutoff, e.g. (30.5, 3) -> [28, 33]."""
    return RdWindow(
        lower=math.ceil(cutoff - half_width),
        upper=math.floor(cutoff + half_width),
        cutoff=cutoff,
        balanced=balanced,
    )


@dataclass(frozen=True)
class RdLocalResult:
    estimate: float
    p_value: float
    window: RdWindow
    n_treated: int
    n_control: int
    outcome_name: str

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "p_value": self.p_value,
            "window": [self.window.lower, self.window.upper],
            "cutoff": self.window.cutoff,
            "n_treated": self.n_treated,
            "n_control": self.n_control,
            "outcome": self.outcome_name,
        }


def _window_arrays(ds: Dataset, outcome: Selector, window: RdWindow):
    """In-window outcome values and treatment labels, missing rows dropped."""
    ranks = ds.column("pre_event_rank")
    values = selector_values(ds, outcome)
    keep = (ranks >= window.lower) & (ranks <= window.upper) & ~np.isnan(values)
    y = values[keep]
    treated = ranks[keep] < window.cutoff
    if not treated.any() or treated.all():
        raise EmptySideError(
            f"window {window} has no {'treated' if not treated.any() else 'control'} "
            "observations"
        )
    return y, treated


def diff_in_means(ds: Dataset, outcome: Selector, window: RdWindow) -> float:
    """Treated-minus-control difference in means inside the window."""
    y, treated = _window_arrays(ds, outcome, window)
    return float(y[treated].mean() - y[~treated].mean())


def _abs_mean_diff(y: np.ndarray, total: float, n_treated: int, idx) -> float:
    s = y[idx].sum()
    return abs(s / n_treated - (total - s) / (y.size - n_treated))


def fisher_p(
    ds: Dataset,
    outcome: Selector,
    window: RdWindow,
    n_permutations: int = 10000,
    seed: int = 0,
    method: str = "simulate",
) -> float:
    """Permutation p-value for the absolute difference in means.

    Treatment labels are permuted among the in-window units holding the
    treated count fixed. ``method="simulate"`` draws `n_permutations`
    label permutations (replicate r from the (seed, r) substream, so the
    value is reproducible regardless of evaluation order) and reports the
    add-one p-value (1 + #{permuted >= observed}) / (1 + n_permutations).
    ``method="enumerate"`` scores every label assignment exactly.
    """
    if n_permutations < 1:
        raise InvalidParametersError("n_permutations must be >= 1")
    if method not in ("simulate", "enumerate"):
        raise InvalidParametersError(f"unknown method {method!r}")
    y, treated = _window_arrays(ds, outcome, window)
    n = y.size
    n_t = int(treated.sum())
    total = float(y.sum())
    observed = _abs_mean_diff(y, total, n_t, np.flatnonzero(treated))
    # permuted statistics equal to the observed one can drift by an ulp
    # depending on summation order; compare with a scale-aware slack
    threshold = observed - 1e-12 * max(1.0, abs(observed))

    if method == "enumerate":
        hits = 0
        count = 0
        for combo in combinations(range(n), n_t):
            count += 1
            if _abs_mean_diff(y, total, n_t, list(combo)) >= threshold:
                hits += 1
        return hits / count

    hits = 0
    for r in range(n_permutations):
        rng = substream(seed, r)
        idx = rng.permutation(n)[:n_t]
        if _abs_mean_diff(y, total, n_t, idx) >= threshold:
            hits += 1
    return (1 + hits) / (1 + n_permutations)


def _child_seed(seed: int, *indices: int) -> int:
    return int(np.random.SeedSequence((seed, *indices)).generate_state(1)[0])


def select_window(
    ds: Dataset,
    covariates: Sequence[Selector],
    cutoff: float = 30.5,
    threshold: float = 0.15,
    max_half_width: int | None = None,
    n_permutations: int = 10000,
    seed: int = 0,
) -> RdWindow:
    """Widest symmetric window passing covariate balance at every nesting.

    For half widths 1, 2, ... each covariate is treated as the outcome of a
    permutation test inside the candidate window (rows missing that
    covariate are dropped for that covariate only). The chosen window is
    the largest whose own and all nested minimum balance p-values stay at
    or above `threshold`. If even the smallest window fails, it is
    returned with ``balanced=False``.
    """
    if not covariates:
        raise InvalidParametersError("select_window requires at least one covariate")
    ranks = ds.column("pre_event_rank")
    valid = ranks[~np.isnan(ranks)]
    if max_half_width is None:
        max_half_width = int(
            min(math.floor(cutoff) - valid.min() + 1, valid.max() - math.ceil(cutoff) + 1)
        )
    best: RdWindow | None = None
    for omega in range(1, max_half_width + 1):
        window = window_from_half_width(cutoff, omega)
        min_p = 1.0
        for j, cov in enumerate(covariates):
            p = fisher_p(
                ds,
                cov,
                window,
                n_permutations=n_permutations,
                seed=_child_seed(seed, omega, j),
            )
            min_p = min(min_p, p)
        if min_p < threshold:
            break
        best = window
    if best is None:
        return window_from_half_width(cutoff, 1, balanced=False)
    return best


def rd_local_estimate(
    ds: Dataset,
    outcome: Selector,
    window: RdWindow,
    n_permutations: int = 10000,
    seed: int = 0,
) -> RdLocalResult:
    """Difference in means plus its permutation p-value inside a window."""
    y, treated = _window_arrays(ds, outcome, window)
    estimate = float(y[treated].mean() - y[~treated].mean())
    p = fisher_p(ds, outcome, window, n_permutations=n_permutations, seed=seed)
    name = outcome if isinstance(outcome, str) else getattr(outcome, "__name__", "outcome")
    return RdLocalResult(
        estimate=estimate,
        p_value=p,
        window=window,
        n_treated=int(treated.sum()),
        n_control=int((~treated).sum()),
        outcome_name=name,
    )
