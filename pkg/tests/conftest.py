"""Shared builders for synthetic datasets."""

from __future__ import annotations

import numpy as np
import pytest

from cutofflab.data import Dataset, JumpRecord, Regime


def make_record(
    rank: int,
    regime: str = "after",
    athlete_id: str | None = None,
    event_id: str = "E1",
    season: int = 2018,
    outcome: float | None = None,
    advanced: bool | None = None,
    wc_points: float = 0.0,
    previous_event_rank: int | None = None,
    home_event: bool = False,
    style: float = 45.0,
) -> JumpRecord:
    regime = Regime(regime)
    if advanced is None:
        advanced = rank <= 30
    total = float(outcome) if outcome is not None else 100.0
    return JumpRecord(
        athlete_id=athlete_id or f"A{rank:03d}",
        event_id=event_id,
        season=season,
        regime=regime,
        qual_rank_nominal=rank if regime is Regime.AFTER else (
            rank - 10 if rank > 10 else None
        ),
        pre_event_rank=rank,
        round1_distance_points=total - style,
        round1_style_points=style,
        round1_total=total,
        advanced=advanced,
        wc_points_before=wc_points,
        previous_event_rank=previous_event_rank,
        home_event=home_event,
    )


def outcome_dataset(
    ranks,
    outcomes,
    regime: str = "after",
    cluster_per_record: bool = True,
    **kwargs,
) -> Dataset:
    """One record per (rank, outcome) pair; round1_total carries the outcome."""
    records = []
    for i, (rank, y) in enumerate(zip(ranks, outcomes)):
        records.append(
            make_record(
                int(rank),
                regime=regime,
                athlete_id=f"A{i:05d}" if cluster_per_record else f"A{int(rank):03d}",
                event_id=f"E{i // 50 + 1}",
                outcome=float(y),
                **kwargs,
            )
        )
    return Dataset(records, provenance="test")


def grid_dataset(
    fn,
    obs_per_rank: int = 20,
    ranks=range(1, 51),
    noise_sd: float = 0.0,
    regime: str = "after",
    seed: int = 0,
) -> Dataset:
    """Outcome = fn(rank) + noise, `obs_per_rank` observations per rank."""
    rng = np.random.default_rng(seed)
    all_ranks = []
    outcomes = []
    for r in ranks:
        for _ in range(obs_per_rank):
            all_ranks.append(r)
            outcomes.append(fn(r) + (rng.normal(0, noise_sd) if noise_sd else 0.0))
    return outcome_dataset(all_ranks, outcomes, regime=regime)


@pytest.fixture
def small_simulated():
    from cutofflab.simulator import SimulationConfig, simulate_dataset

    config = SimulationConfig(
        n_seasons=2,
        events_per_season=(6, 6),
        regime_schedule=("before", "after"),
        seed=42,
    )
    return simulate_dataset(config)
