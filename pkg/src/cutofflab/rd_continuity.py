"""Continuity-based regression discontinuity estimation.

The jump in the conditional outcome mean at the cutoff is estimated by
local linear regression with triangular kernel weights inside a bandwidth.
The bandwidth is chosen by a plug-in rule minimizing the estimated
asymptotic mean squared error ``MSE(h) = (h^2 B)^2 + V/(n h)``, where the
curvature term B comes from side-specific global quartic fits and the
variance term V from kernel-weighted residual variance near the cutoff at
a pilot bandwidth. Inference is cluster-robust (Liang-Zeger sandwich with
a G/(G-1) correction); the bias-corrected estimate refits the jump with
side-specific quadratics at the bias bandwidth, which for b = h is
algebraically identical to subtracting the plug-in bias estimate from the
local linear jump, and its sandwich SE is the robust SE.

The same machinery stacks a fully interacted regime indicator to estimate
the change in the discontinuity between two periods from one pooled fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .data import Dataset, Regime, Selector, selector_values
from .errors import EmptySideError, EstimationError, InvalidParametersError
from .rd_local import RdWindow

__all__ = [
    "triangular_weight",
    "weighted_least_squares",
    "local_linear_jump",
    "BandwidthSelection",
    "mse_optimal_bandwidth",
    "RdContinuityResult",
    "rd_continuity_estimate",
    "DiffInDiscResult",
    "diff_in_disc",
    "rd_plot_data",
]


def _boundary_constants() -> tuple[float, float]:
    """Bias and variance constants of boundary local-linear fits.

    Exact moments of the one-sided triangular kernel K(t) = 1 - t on
    [0, 1]: nu_j = int t^j K dt and pi_j = int t^j K^2 dt. The bias
    constant multiplies h^2 m''(c)/2 and the variance constant multiplies
    sigma^2 / (f(c) n h).
    """
    nu = (1 / 2, 1 / 6, 1 / 12, 1 / 20)
    pi = (1 / 3, 1 / 12, 1 / 30)
    s = np.array([[nu[0], nu[1]], [nu[1], nu[2]]])
    s_inv = np.linalg.inv(s)
    bias = float((s_inv @ np.array([nu[2], nu[3]]))[0])
    t = np.array([[pi[0], pi[1]], [pi[1], pi[2]]])
    var = float((s_inv @ t @ s_inv)[0, 0])
    return bias, var


KAPPA_BIAS, KAPPA_VAR = _boundary_constants()  # -0.1 and 4.8


def triangular_weight(rank, cutoff: float, h: float):
    """Kernel weight max(0, 1 - |rank - cutoff| / h)."""
    if h <= 0:
        raise InvalidParametersError(f"bandwidth must be positive, got {h}")
    return np.maximum(0.0, 1.0 - np.abs(np.asarray(rank, dtype=float) - cutoff) / h)[()]


def weighted_least_squares(X: np.ndarray, y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """WLS coefficients; equals OLS when all weights are equal."""
    sw = np.sqrt(w)
    beta, _, rank, _ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    if rank < X.shape[1]:
        raise EstimationError(
            f"rank-deficient design: rank {rank} < {X.shape[1]} columns"
        )
    return beta


def _cluster_cov(
    X: np.ndarray, w: np.ndarray, resid: np.ndarray, codes: np.ndarray
) -> np.ndarray:
    """Liang-Zeger sandwich for WLS with a G/(G-1) correction."""
    n_clusters = int(codes.max()) + 1
    if n_clusters < 2:
        raise EstimationError("cluster-robust variance needs at least 2 clusters")
    Xw = X * w[:, None]
    try:
        bread = np.linalg.inv(X.T @ Xw)
    except np.linalg.LinAlgError:
        raise EstimationError("singular design in sandwich variance")
    scores = Xw * resid[:, None]
    sums = np.zeros((n_clusters, X.shape[1]))
    np.add.at(sums, codes, scores)
    meat = sums.T @ sums
    return bread @ meat @ bread * (n_clusters / (n_clusters - 1))


# ---------------------------------------------------------------------------
# data extraction


def _frame(ds: Dataset, outcome: Selector, covariates=None, cluster=None):
    """Aligned arrays for estimation; rows missing the outcome or any used
    covariate are dropped."""
    ranks = ds.column("pre_event_rank")
    y = selector_values(ds, outcome)
    keep = ~np.isnan(y) & ~np.isnan(ranks)
    Z = None
    if covariates:
        Z = np.column_stack([selector_values(ds, cov) for cov in covariates])
        keep &= ~np.isnan(Z).any(axis=1)
    codes = None
    if cluster is not None:
        values = [
            cluster(rec) if callable(cluster) else getattr(rec, cluster)
            for rec in ds.records
        ]
        _, codes_full = np.unique(np.asarray(values, dtype=object), return_inverse=True)
        codes = codes_full[keep]
    return {
        "ranks": ranks[keep],
        "y": y[keep],
        "Z": Z[keep] if Z is not None else None,
        "codes": codes,
        "records": [rec for rec, k in zip(ds.records, keep) if k],
    }


def _design(u: np.ndarray, treated: np.ndarray, degree: int, Z=None) -> np.ndarray:
    cols = [np.ones_like(u), treated.astype(float)]
    for k in range(1, degree + 1):
        cols.append(u**k)
        cols.append(treated * u**k)
    X = np.column_stack(cols)
    if Z is not None:
        X = np.column_stack([X, Z])
    return X


@dataclass
class _LocalFit:
    beta: np.ndarray
    tau: float
    X: np.ndarray
    y: np.ndarray
    w: np.ndarray
    resid: np.ndarray
    codes: np.ndarray | None
    treated: np.ndarray
    n_treated: int
    n_control: int

    def tau_se_clustered(self) -> float:
        if self.codes is None:
            raise EstimationError("fit was built without a cluster selector")
        cov = _cluster_cov(self.X, self.w, self.resid, self.codes)
        return math.sqrt(cov[1, 1])


def _fit_local(frame: dict, cutoff: float, h: float, degree: int) -> _LocalFit:
    ranks, y = frame["ranks"], frame["y"]
    w = triangular_weight(ranks, cutoff, h)
    keep = w > 0
    if not keep.any():
        raise EmptySideError(f"no observations within bandwidth {h}")
    u = ranks[keep] - cutoff
    y = y[keep]
    w = w[keep]
    treated = u < 0
    for side, mask in (("treated", treated), ("control", ~treated)):
        if not mask.any():
            raise EmptySideError(f"no {side} observations within bandwidth {h}")
        if np.unique(u[mask]).size < degree + 1:
            raise EstimationError(
                f"{side} side has fewer than {degree + 1} distinct ranks "
                f"within bandwidth {h}"
            )
    Z = frame["Z"][keep] if frame["Z"] is not None else None
    X = _design(u, treated, degree, Z)
    beta = weighted_least_squares(X, y, w)
    resid = y - X @ beta
    codes = frame["codes"][keep] if frame["codes"] is not None else None
    if codes is not None:
        _, codes = np.unique(codes, return_inverse=True)
    return _LocalFit(
        beta=beta,
        tau=float(beta[1]),
        X=X,
        y=y,
        w=w,
        resid=resid,
        codes=codes,
        treated=treated,
        n_treated=int(treated.sum()),
        n_control=int((~treated).sum()),
    )


def local_linear_jump(
    ds: Dataset,
    outcome: Selector,
    cutoff: float,
    h: float,
    covariates=None,
) -> tuple[float, np.ndarray]:
    """Local linear WLS jump at the cutoff.

    Regresses the outcome on {1, T, u, T*u} (u = rank - cutoff, T = treated
    side) with triangular weights; covariates enter additively with
    coefficients common to both sides. Returns (tau, all coefficients).
    """
    fit = _fit_local(_frame(ds, outcome, covariates), cutoff, h, degree=1)
    return fit.tau, fit.beta


# ---------------------------------------------------------------------------
# bandwidth selection


@dataclass(frozen=True)
class BandwidthSelection:
    """Plug-in bandwidth; iterates as (h, b).

    `support_floor` is the smallest bandwidth at which the estimation
    stages have enough mass points (3 distinct ranks per side); the
    estimators clamp an auto-selected h to it.
    """

    h: float
    b: float
    pilot: float
    fallback: bool
    curvature: float
    variance: float
    density: float
    support_floor: float = 0.0

    def __iter__(self):
        yield self.h
        yield self.b


def _side_curvature(u: np.ndarray, y: np.ndarray) -> float:
    """Second derivative at u = 0 of a global quartic fit (degree reduced
    when the side has too few distinct points)."""
    distinct = np.unique(u).size
    degree = min(4, distinct - 1)
    if degree < 2:
        return 0.0
    span = float(np.abs(u).max())
    t = u / span
    X = np.column_stack([t**k for k in range(degree + 1)])
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < degree + 1:
        return 0.0
    return float(2.0 * beta[2] / span**2)


def _side_residual_variance(u: np.ndarray, y: np.ndarray, h: float) -> float:
    w = np.maximum(0.0, 1.0 - np.abs(u) / h)
    keep = w > 0
    uu, yy, ww = u[keep], y[keep], w[keep]
    X = np.column_stack([np.ones_like(uu), uu])
    beta = weighted_least_squares(X, yy, ww)
    resid = yy - X @ beta
    return float(np.sum(ww * resid**2) / np.sum(ww))


def _support_floor(u: np.ndarray, left: np.ndarray) -> float:
    """Smallest bandwidth giving both local fits enough mass points: the
    quadratic stage needs 3 distinct ranks of positive weight per side.
    Applied only to the degenerate fallback, where the pilot cannot be
    trusted to span them."""
    floor = 0.0
    for mask in (left, ~left):
        distinct = np.unique(np.abs(u[mask]))
        if distinct.size >= 3:
            floor = max(floor, float(distinct[2]))
        elif distinct.size:
            floor = max(floor, float(distinct[-1]))
    return floor + 0.5


def mse_optimal_bandwidth(ds: Dataset, outcome: Selector, cutoff: float) -> BandwidthSelection:
    """Plug-in MSE-optimal bandwidth with b = h.

    Minimizes (h^2 B)^2 + V/(n h) in closed form: h = (V / (4 n B^2))^(1/5),
    with B the kernel bias constant times half the difference of the
    side-specific quartic curvatures and V the kernel variance constant
    times the summed side residual variances over the cutoff density.
    Degenerate curvature or variance falls back to the pilot bandwidth,
    flagged; the fallback is widened to the support floor (three distinct
    ranks of positive weight per side) so downstream fits stay estimable.
    """
    frame = _frame(ds, outcome)
    ranks, y = frame["ranks"], frame["y"]
    left = ranks < cutoff
    if left.sum() < 20 or (~left).sum() < 20:
        raise EstimationError(
            "bandwidth selection needs at least 20 observations per side"
        )
    n = y.size
    u = ranks - cutoff
    span = float(np.abs(u).max())
    floor = _support_floor(u, left)

    curvature_gap = _side_curvature(u[left], y[left]) - _side_curvature(u[~left], y[~left])
    bias_term = KAPPA_BIAS * curvature_gap / 2.0

    pilot = float(np.std(ranks) * n ** (-1 / 5))
    # widen until both sides support a local linear fit
    while (
        np.unique(u[left & (np.abs(u) < pilot)]).size < 2
        or np.unique(u[~left & (np.abs(u) < pilot)]).size < 2
    ):
        pilot *= 1.5
        if pilot > span:
            pilot = span
            break
    sigma2 = _side_residual_variance(u[left], y[left], pilot) + _side_residual_variance(
        u[~left], y[~left], pilot
    )
    density = float((np.abs(u) <= pilot).sum() / (n * 2.0 * pilot))
    variance_term = KAPPA_VAR * sigma2 / density

    y_scale = float(np.std(y))
    degenerate = (
        variance_term <= max(1e-12 * y_scale**2, 1e-300)
        or abs(bias_term) < 1e-8 * max(y_scale, 1e-30) / span**2
    )
    if degenerate:
        h = max(pilot, floor)
        return BandwidthSelection(
            h=h, b=h, pilot=pilot, fallback=True,
            curvature=curvature_gap, variance=variance_term, density=density,
            support_floor=floor,
        )
    h = float((variance_term / (4.0 * n * bias_term**2)) ** (1 / 5))
    h = min(h, span)
    return BandwidthSelection(
        h=h, b=h, pilot=pilot, fallback=False,
        curvature=curvature_gap, variance=variance_term, density=density,
        support_floor=floor,
    )


# ---------------------------------------------------------------------------
# estimators


@dataclass(frozen=True)
class RdContinuityResult:
    tau_conventional: float
    tau_bias_corrected: float
    se_conventional: float
    se_robust: float
    p_conventional: float
    p_robust: float
    bandwidth_h: float
    bandwidth_b: float
    effective_n_treated: int
    effective_n_control: int
    covariates_used: tuple[str, ...] = ()
    bandwidth_fallback: bool = False
    cutoff: float = 30.5

    def rank_interval(self) -> tuple[int, int]:
        """Integer ranks with positive weight under the bandwidth."""
        return (
            int(math.ceil(self.cutoff - self.bandwidth_h)),
            int(math.floor(self.cutoff + self.bandwidth_h)),
        )

    def to_dict(self) -> dict:
        lo, hi = self.rank_interval()
        return {
            "tau_conventional": self.tau_conventional,
            "tau_bias_corrected": self.tau_bias_corrected,
            "se_conventional": self.se_conventional,
            "se_robust": self.se_robust,
            "p_conventional": self.p_conventional,
            "p_robust": self.p_robust,
            "bandwidth_h": self.bandwidth_h,
            "bandwidth_b": self.bandwidth_b,
            "bandwidth_interval": [lo, hi],
            "n_treated": self.effective_n_treated,
            "n_control": self.effective_n_control,
            "covariates": list(self.covariates_used),
            "bandwidth_fallback": self.bandwidth_fallback,
            "cutoff": self.cutoff,
        }


def _two_sided_normal_p(estimate: float, se: float) -> float:
    if se <= 0:
        return math.nan
    return 2.0 * float(stats.norm.sf(abs(estimate) / se))


def _check_clusters_per_side(fit: _LocalFit) -> None:
    if fit.codes is None:
        return
    for side, mask in (("treated", fit.treated), ("control", ~fit.treated)):
        if np.unique(fit.codes[mask]).size < 2:
            raise EstimationError(f"fewer than 2 clusters on the {side} side")


def rd_continuity_estimate(
    ds: Dataset,
    outcome: Selector,
    cutoff: float = 30.5,
    covariates=None,
    cluster_selector="athlete_id",
    h: float | None = None,
    b: float | None = None,
) -> RdContinuityResult:
    """Local linear jump with robust bias-corrected inference.

    The conventional estimate is the local linear jump at h with its
    clustered sandwich SE. The bias-corrected estimate refits with
    side-specific quadratics at b (= h unless overridden); because the
    plug-in bias of the linear fit equals the quadratic coefficient times
    the empirical bias multiplier, this refit IS the bias-subtracted
    estimator, and its clustered sandwich SE is the robust SE accounting
    for the estimated bias term. P-values use the normal reference.
    """
    fallback = False
    if h is None:
        selection = mse_optimal_bandwidth(ds, outcome, cutoff)
        # an auto-selected bandwidth is clamped to what the quadratic
        # refit can support; explicit bandwidths fail loudly instead
        h = b = max(selection.h, selection.support_floor)
        fallback = selection.fallback
    if b is None:
        b = h
    frame = _frame(ds, outcome, covariates, cluster_selector)
    linear = _fit_local(frame, cutoff, h, degree=1)
    quadratic = _fit_local(frame, cutoff, b, degree=2)
    _check_clusters_per_side(linear)
    se_conv = linear.tau_se_clustered()
    se_rob = quadratic.tau_se_clustered()
    names = tuple(
        cov if isinstance(cov, str) else getattr(cov, "__name__", "covariate")
        for cov in (covariates or ())
    )
    return RdContinuityResult(
        tau_conventional=linear.tau,
        tau_bias_corrected=quadratic.tau,
        se_conventional=se_conv,
        se_robust=se_rob,
        p_conventional=_two_sided_normal_p(linear.tau, se_conv),
        p_robust=_two_sided_normal_p(quadratic.tau, se_rob),
        bandwidth_h=float(h),
        bandwidth_b=float(b),
        effective_n_treated=linear.n_treated,
        effective_n_control=linear.n_control,
        covariates_used=names,
        bandwidth_fallback=fallback,
        cutoff=cutoff,
    )


@dataclass(frozen=True)
class DiffInDiscResult:
    delta_tau: float
    se: float
    p_conventional: float
    bandwidth: float
    effective_n_before: int
    effective_n_after: int
    effective_n_treated: int
    effective_n_control: int
    covariates_used: tuple[str, ...] = ()
    cutoff: float = 30.5

    def to_dict(self) -> dict:
        return {
            "delta_tau": self.delta_tau,
            "se": self.se,
            "p_conventional": self.p_conventional,
            "bandwidth": self.bandwidth,
            "bandwidth_interval": [
                int(math.ceil(self.cutoff - self.bandwidth)),
                int(math.floor(self.cutoff + self.bandwidth)),
            ],
            "n_before": self.effective_n_before,
            "n_after": self.effective_n_after,
            "n_treated": self.effective_n_treated,
            "n_control": self.effective_n_control,
            "covariates": list(self.covariates_used),
            "cutoff": self.cutoff,
        }


def diff_in_disc(
    ds: Dataset,
    outcome: Selector,
    cutoff: float = 30.5,
    covariates=None,
    cluster_selector="athlete_id",
    h: float | None = None,
) -> DiffInDiscResult:
    """Change in the cutoff jump between the two regimes.

    One pooled WLS with regressors {1, T, u, Tu, P, PT, Pu, PTu} (P = after
    indicator) and triangular weights from a single bandwidth (MSE-optimal
    on the pooled sample unless given); the saturated interaction makes the
    PT coefficient exactly the difference of the per-regime jumps under
    shared weights. SE clustered; conventional two-sided p.
    """
    if h is None:
        selection = mse_optimal_bandwidth(ds, outcome, cutoff)
        h = max(selection.h, selection.support_floor)
    frame = _frame(ds, outcome, covariates, cluster_selector)
    ranks, y = frame["ranks"], frame["y"]
    after = np.array([rec.regime is Regime.AFTER for rec in frame["records"]])
    w = triangular_weight(ranks, cutoff, h)
    keep = w > 0
    if not keep.any():
        raise EmptySideError(f"no observations within bandwidth {h}")
    u = ranks[keep] - cutoff
    y, w, after = y[keep], w[keep], after[keep]
    treated = u < 0
    for regime_name, mask in (("before", ~after), ("after", after)):
        if not (mask & treated).any() or not (mask & ~treated).any():
            raise EmptySideError(
                f"regime {regime_name} missing on one side of the cutoff "
                f"inside bandwidth {h}"
            )
    base = _design(u, treated, degree=1)
    X = np.column_stack([base, base * after[:, None]])
    if frame["Z"] is not None:
        X = np.column_stack([X, frame["Z"][keep]])
    beta = weighted_least_squares(X, y, w)
    resid = y - X @ beta
    codes = frame["codes"][keep]
    _, codes = np.unique(codes, return_inverse=True)
    cov = _cluster_cov(X, w, resid, codes)
    delta = float(beta[5])  # coefficient on P*T
    se = math.sqrt(cov[5, 5])
    names = tuple(
        c if isinstance(c, str) else getattr(c, "__name__", "covariate")
        for c in (covariates or ())
    )
    return DiffInDiscResult(
        delta_tau=delta,
        se=se,
        p_conventional=_two_sided_normal_p(delta, se),
        bandwidth=float(h),
        effective_n_before=int((~after).sum()),
        effective_n_after=int(after.sum()),
        effective_n_treated=int(treated.sum()),
        effective_n_control=int((~treated).sum()),
        covariates_used=names,
        cutoff=cutoff,
    )


# ---------------------------------------------------------------------------
# plot data


def rd_plot_data(
    ds: Dataset,
    outcome: Selector,
    cutoff: float,
    window_for_constant: RdWindow,
    poly_degree: int = 3,
) -> list[dict]:
    """Per-rank means with 95% CIs plus side-specific polynomial overlays.

    Each row carries the rank's bin mean and normal CI, the value of that
    side's global degree-`poly_degree` fit at the rank, and the side's
    in-window mean (degree-0 fit) when the rank lies inside
    `window_for_constant`.
    """
    frame = _frame(ds, outcome)
    ranks, y = frame["ranks"], frame["y"]
    if ranks.size == 0:
        return []
    left = ranks < cutoff

    def poly_eval(mask: np.ndarray) -> dict[float, float]:
        u = ranks[mask] - cutoff
        span = float(np.abs(u).max()) or 1.0
        degree = min(poly_degree, np.unique(u).size - 1)
        t = u / span
        X = np.column_stack([t**k for k in range(degree + 1)])
        beta, *_ = np.linalg.lstsq(X, y[mask], rcond=None)
        out = {}
        for r in np.unique(ranks[mask]):
            tr = (r - cutoff) / span
            out[float(r)] = float(sum(beta[k] * tr**k for k in range(degree + 1)))
        return out

    fits = {**poly_eval(left), **poly_eval(~left)}
    win = window_for_constant
    const_left = float(
        y[(ranks >= win.lower) & (ranks < cutoff)].mean()
    ) if ((ranks >= win.lower) & (ranks < cutoff)).any() else math.nan
    const_right = float(
        y[(ranks > cutoff) & (ranks <= win.upper)].mean()
    ) if ((ranks > cutoff) & (ranks <= win.upper)).any() else math.nan

    rows = []
    for r in np.unique(ranks):
        sel = ranks == r
        vals = y[sel]
        mean = float(vals.mean())
        sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        half = 1.959963984540054 * sd / math.sqrt(vals.size)
        in_window = win.lower <= r <= win.upper
        rows.append(
            {
                "rank": int(r),
                "n": int(vals.size),
                "bin_mean": mean,
                "ci_lo": mean - half,
                "ci_hi": mean + half,
                "poly_fit": fits[float(r)],
                "const_fit": (
                    (const_left if r < cutoff else const_right) if in_window else math.nan
                ),
            }
        )
    return rows
