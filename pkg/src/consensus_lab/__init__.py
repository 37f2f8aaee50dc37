"""Convergence and noise robustness of continuous-time consensus protocols."""

from .errors import (
    ConsensusLabError,
    DisconnectedGraph,
    EmptyCycleSpace,
    IntegrationBlowUp,
    InvalidNetwork,
    MultipleZeroEVs,
    NotConvergent,
    NotNormal,
    NotZeroRowSum,
    PreconditionNotDissipative,
    RankDeficientIntertwiner,
)
from .graph import (
    CycleStats,
    OrientedNetwork,
    TreeCycleDecomposition,
    coboundary,
    cycle_laplacian,
    cycle_stats,
    diameter,
    spanning_tree_decomposition,
)
from .pseudosim import (
    ReducedMatrix,
    ReductionMap,
    default_map,
    difference_intertwiner,
    exp_commutation_check,
    normalize,
    reduce,
    spectrum_split,
)
from .spectral import (
    SpectralReport,
    StabilityBounds,
    alon_boppana,
    alpha_rho,
    analyze,
    asymptotic_dissipativity_estimate,
    classify_convergent,
    classify_undirected,
    dissipativity_margin,
    kappa,
    stability_bounds,
)
from .dynamics import (
    CouplingSchedule,
    MomentTrajectory,
    Trajectory,
    TrajectoryEnsemble,
    fit_decay_rate,
    integrate_deterministic,
    integrate_moment_odes,
    integrate_sde,
    stationary_prediction,
    uniform_bound,
    uniform_bound_check,
)
from .generators import (
    complete,
    cycle_power,
    example_matrix_38,
    path,
    random_bipartite_permutation,
    star,
)

__version__ = "0.1.0"
