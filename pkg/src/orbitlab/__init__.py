"""orbitlab: extreme-value and recurrence statistics of chaotic maps.

A desk-scale laboratory for the numerical side of the correspondence
between extremes of distance observables along orbits and hitting/return
times to shrinking balls: exact orbit engines, invariant-measure models,
level calibration, block-maxima and hitting-time estimators, Poisson
point-process tests, and dependence diagnostics, driven by a small
config CLI.
"""

from .config import ExperimentConfig, parse_config, emit_config
from .dynamics import (
    DomainError,
    Exceeded,
    MapSystem,
    PhaseSpace,
    dist,
    expansion_time,
    iterate,
    log_inverse_derivative_average,
)
from .extremes import (
    EmpiricalDistribution,
    GevParams,
    classical_evd,
    evl_curve,
    gev_fit,
    ks_statistic,
    partial_max,
)
from .hitting import (
    extremal_index_fit,
    first_hitting_time,
    hts_ecdf,
    kac_check,
    rts_ecdf,
    waiting_times,
)
from .measure import ball_measure, build_histogram, density_at, density_model, lebesgue_ratio_curve
from .mixing import correlation_decay, d3_gamma, dprime_sum, uniform_mixing_gamma
from .observables import (
    LevelSequence,
    ObservableSpec,
    block_length_for_radius,
    evaluate,
    level,
    radius_for_level,
    tau,
)
from .orbits import OrbitGenerator, child_rng
from .pointprocess import (
    EventProcess,
    IntervalRing,
    count_on_ring,
    epp_at_level,
    htpp_ensemble,
    increment_independence_test,
    interarrival_test,
    poisson_count_test,
)
from .runner import RunReport, run

__version__ = "0.1.0"
