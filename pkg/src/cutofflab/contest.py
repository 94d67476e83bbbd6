"""Two-player all-pay contest with expectation-based loss aversion.

Both players value the prize at ``W`` and sink their effort cost regardless
of who wins. Player 1 enters with positive expectations: losing costs an
extra ``d`` utility units. Player 2 enters with negative expectations:
winning pays an extra ``u``. A salience switch ``s`` gates both adjustments,
so the effective stakes are ``v1 = W + d*s`` and ``v2 = W + u*s``. With
``d >= u`` the stakes order as ``v1 >= v2`` and the contest has the classic
mixed-strategy equilibrium: both players randomize on ``[0, v2]``, the
low-stake player placing an atom of mass ``(v1 - v2)/v1`` at zero effort.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParametersError
from .rng import substream

__all__ = [
    "ContestParams",
    "EquilibriumSolution",
    "VerificationReport",
    "Figure1Series",
    "solve_equilibrium",
    "cdf_player1",
    "cdf_player2",
    "verify_equilibrium",
    "sample_outcomes",
    "figure1_series",
]


@dataclass(frozen=True)
class ContestParams:
    """Primitives of the contest.

    W : prize value (> 0)
    d : extra loss suffered by the positive-expectation player (>= u)
    u : extra gain enjoyed by the negative-expectation player (>= 0)
    s : salience flag, 0 or 1
    """

    W: float
    d: float
    u: float
    s: int

    def __post_init__(self):
        if not self.W > 0:
            raise InvalidParametersError(f"prize W must be positive, got {self.W}")
        if self.u < 0:
            raise InvalidParametersError(f"win bonus u must be >= 0, got {self.u}")
        if self.d < self.u:
            raise InvalidParametersError(
                f"loss penalty d ({self.d}) must be >= win bonus u ({self.u})"
            )
        if self.s not in (0, 1):
            raise InvalidParametersError(f"salience s must be 0 or 1, got {self.s}")


@dataclass(frozen=True)
class EquilibriumSolution:
    """Mixed-strategy equilibrium quantities.

    Efforts appear twice: ``effort*_derived`` are the means of the
    equilibrium effort distributions (v2/2 and v2**2/(2*v1)), while
    ``effort*_printed`` evaluate the closed forms v1**2*v2/(v1+v2) and
    v2**2*v1/(v1+v2) that circulate alongside this model. The printed
    forms carry squared value units and are reported verbatim only; no
    downstream computation relies on them.
    """

    v1: float
    v2: float
    support_upper: float
    atom_at_zero: float
    payoff1: float
    payoff2: float
    p1: float
    p2: float
    effort1_derived: float
    effort2_derived: float
    effort1_printed: float
    effort2_printed: float


def solve_equilibrium(params: ContestParams) -> EquilibriumSolution:
    """Solve the contest in closed form.

    The equilibrium CDFs follow from the indifference conditions
    ``E1 = v1*F2(x) - d*s - x`` and ``E2 = v2*F1(x) - x``:
    ``F1(x) = x/v2`` and ``F2(x) = (x + v1 - v2)/v1`` on ``[0, v2]``.
    Equilibrium payoffs are ``-u*s`` for player 1 and exactly 0 for
    player 2; player 2 wins with probability ``v2/(2*v1)``.
    """
    W, d, u, s = params.W, params.d, params.u, params.s
    v1 = W + d * s
    v2 = W + u * s
    atom = (v1 - v2) / v1
    p2 = v2 / (2.0 * v1)
    return EquilibriumSolution(
        v1=v1,
        v2=v2,
        support_upper=v2,
        atom_at_zero=atom,
        payoff1=-u * s,
        payoff2=0.0,
        p1=1.0 - p2,
        p2=p2,
        effort1_derived=v2 / 2.0,
        effort2_derived=v2**2 / (2.0 * v1),
        effort1_printed=v1**2 * v2 / (v1 + v2),
        effort2_printed=v2**2 * v1 / (v1 + v2),
    )


def cdf_player1(sol: EquilibriumSolution, x):
    """Equilibrium effort CDF of the positive-expectation player.

    Accepts a scalar or array of nonnegative efforts; values are clamped
    to [0, 1] and reach 1 at the support upper bound v2.
    """
    return np.clip(np.asarray(x, dtype=float) / sol.v2, 0.0, 1.0)[()]


def cdf_player2(sol: EquilibriumSolution, x):
    """Equilibrium effort CDF of the negative-expectation player.

    Carries an atom of mass ``atom_at_zero`` at zero effort, so
    ``cdf_player2(sol, 0.0) == atom_at_zero``.
    """
    x = np.asarray(x, dtype=float)
    return np.where(x < 0, 0.0, np.clip((x + sol.v1 - sol.v2) / sol.v1, 0.0, 1.0))[()]


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of the discretized best-response check."""

    passed: bool
    max_improvement1: float
    max_improvement2: float
    tolerance: float
    grid_points: int

    @property
    def max_improvement(self) -> float:
        return max(self.max_improvement1, self.max_improvement2)


def verify_equilibrium(
    params: ContestParams, grid_points: int = 200, tolerance: float | None = None
) -> VerificationReport:
    """Check the claimed equilibrium by brute force on a discretized game.

    Both mixtures are projected onto a uniform effort grid over
    ``[0, 1.1*v2]`` (mass between grid midpoints collapses onto the grid
    point, which keeps the atom at zero intact). Each player's expected
    payoff is then computed for every pure grid effort against the
    opponent's discretized mixture, with floating ties worth half the win.
    The check passes when neither player can improve on the equilibrium
    payoff by more than `tolerance` (default: twice the grid spacing).
    """
    if grid_points < 50:
        raise InvalidParametersError("grid_points must be at least 50")
    sol = solve_equilibrium(params)
    W, d, u, s = params.W, params.d, params.u, params.s

    grid = np.linspace(0.0, 1.1 * sol.v2, grid_points)
    spacing = grid[1] - grid[0]
    if tolerance is None:
        tolerance = 2.0 * spacing

    mids = np.concatenate([[-np.inf], (grid[:-1] + grid[1:]) / 2.0, [np.inf]])
    mass1 = np.diff(cdf_player1(sol, np.maximum(mids, 0.0)))
    mass2 = np.diff(cdf_player2(sol, mids))

    x = grid[:, None]
    y = grid[None, :]
    win = (x > y) + 0.5 * (x == y)
    payoff1 = win * W + (1.0 - win) * (-d * s) - x
    payoff2 = win * (W + u * s) - x

    improvement1 = float(np.max(payoff1 @ mass2) - sol.payoff1)
    improvement2 = float(np.max(payoff2 @ mass1) - sol.payoff2)
    return VerificationReport(
        passed=max(improvement1, improvement2) <= tolerance,
        max_improvement1=improvement1,
        max_improvement2=improvement2,
        tolerance=float(tolerance),
        grid_points=grid_points,
    )


def sample_outcomes(params: ContestParams, n: int, seed: int) -> np.ndarray:
    """Draw n equilibrium plays; returns an (n, 3) array of
    (effort1, effort2, winner) with winner 0 for player 1 and 1 for player 2.

    Efforts come from inverse-transform sampling of the equilibrium CDFs
    (uniform draws below the atom mass map to zero effort). Exact floating
    ties are resolved by a fair coin from the same stream. Deterministic
    for a fixed seed.
    """
    if n < 1:
        raise InvalidParametersError(f"n must be >= 1, got {n}")
    sol = solve_equilibrium(params)
    rng = substream(seed)
    u1 = rng.random(n)
    u2 = rng.random(n)
    coin = rng.random(n)

    effort1 = u1 * sol.v2  # inverse of F1(x) = x/v2
    # inverse of F2: draws below the atom mass sit at zero
    effort2 = np.where(
        u2 <= sol.atom_at_zero, 0.0, u2 * sol.v1 - (sol.v1 - sol.v2)
    )
    winner = np.where(
        effort1 > effort2, 0, np.where(effort2 > effort1, 1, (coin < 0.5).astype(int))
    )
    return np.column_stack([effort1, effort2, winner.astype(float)])


@dataclass(frozen=True)
class Figure1Series:
    """Piecewise-linear value functions over a shared x grid."""

    x: np.ndarray
    baseline: np.ndarray
    pos_expect: np.ndarray
    neg_expect: np.ndarray


def figure1_series(
    d: float,
    u: float,
    baseline_loss_slope: float = 2.0,
    x_range: tuple[float, float] = (-2.0, 2.0),
    n_points: int = 81,
) -> Figure1Series:
    """Value-function series illustrating the expectation adjustments.

    All three functions pass through the origin with unit gain slope and
    `baseline_loss_slope` loss slope. Positive expectations steepen the
    loss branch by d; negative expectations steepen the gain branch by u.
    """
    if baseline_loss_slope <= 1:
        raise InvalidParametersError("baseline_loss_slope must exceed 1")
    if d < 0 or u < 0:
        raise InvalidParametersError("d and u must be nonnegative")
    lo, hi = x_range
    if not lo < hi:
        raise InvalidParametersError(f"empty x range: {x_range}")

    x = np.linspace(lo, hi, n_points)

    def value(gain_slope, loss_slope):
        return np.where(x >= 0, gain_slope * x, loss_slope * x)

    return Figure1Series(
        x=x,
        baseline=value(1.0, baseline_loss_slope),
        pos_expect=value(1.0, baseline_loss_slope + d),
        neg_expect=value(1.0 + u, baseline_loss_slope),
    )
