"""Contest equilibria, tournament simulation, and RD estimation at
elimination cutoffs."""

__version__ = "0.1.0"

from .contest import (
    ContestParams,
    EquilibriumSolution,
    cdf_player1,
    cdf_player2,
    figure1_series,
    sample_outcomes,
    solve_equilibrium,
    verify_equilibrium,
)
from .data import (
    Dataset,
    JumpRecord,
    Regime,
    descriptive_table,
    group_compare,
    load_csv,
    mann_whitney,
    welch_t,
    write_csv,
)
from .rd_continuity import (
    DiffInDiscResult,
    RdContinuityResult,
    diff_in_disc,
    local_linear_jump,
    mse_optimal_bandwidth,
    rd_continuity_estimate,
    rd_plot_data,
    triangular_weight,
)
from .rd_local import (
    RdLocalResult,
    RdWindow,
    diff_in_means,
    fisher_p,
    rd_local_estimate,
    select_window,
    window_from_half_width,
)
from .simulator import (
    SimulationConfig,
    load_config,
    regime_rank_map,
    simulate_dataset,
    structural_effort_boost,
)
from .validation import (
    balance_table,
    density_binomial,
    frequency_table,
    placebo_cutoffs,
)
