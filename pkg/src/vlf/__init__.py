"""Variable-length feedback coding: bounds, schedules, and simulation.

The package models a transmitter that keeps sending until the receiver's
running decision statistic clears a threshold, confirms the tentative
message with a short binary hypothesis test, and falls back to a second
communication phase after a rejection.  It covers memoryless channels with
known statistics and universal decoders that learn the channel from a
training prefix, over both finite alphabets and the power-constrained
Gaussian channel.

Layers:

* :mod:`vlf.channel`    - channel models, capacity, information density;
* :mod:`vlf.empirical`  - joint types, empirical mutual information, tails;
* :mod:`vlf.bounds`     - achievability / converse bounds and schedules;
* :mod:`vlf.engine`     - Monte Carlo simulation of the coding scheme;
* :mod:`vlf.ensemble`   - competitor-codeword race strategies;
* :mod:`vlf.oracle`     - slow exact re-computations used for validation;
* :mod:`vlf.cli`        - the ``vlf`` command-line tool.
"""

from .bounds import (
    BoundReport,
    VlfParams,
    achievability_bound,
    asymptotic_schedule,
    asymptotic_schedule_for_message_count,
    channel_stats,
    converse_bound,
    optimize_params,
    overshoot_constants,
    single_phase_bound,
    universal_schedule,
    universal_schedule_gaussian,
)
from .channel import (
    Dmc,
    GaussianChannel,
    bsc,
    capacity,
    control_pair,
    entropy,
    gaussian_information_density,
    information_density,
    information_density_table,
    kl_divergence,
    load_dmc,
    mutual_information,
    output_distribution,
    parse_channel_spec,
)
from .empirical import (
    JointType,
    count_log_table,
    empirical_correlation,
    empirical_mi,
    joint_type,
    tail_exponents,
    type_class_log_bound,
    universal_gaussian_metric,
)
from .engine import (
    EmpiricalChannel,
    McEstimate,
    SchemeConfig,
    TrialOutcome,
    aggregate_outcomes,
    empirical_mi_passage_times,
    estimate_channel,
    info_density_passage_times,
    run_monte_carlo,
    simulate_trial,
    sprt,
    trial_outcomes,
)
from .errors import (
    DimensionMismatch,
    EpsTooSmall,
    HorizonExceeded,
    HorizonTooSmall,
    Infeasible,
    InsufficientTraining,
    NotADistribution,
    StateExplosion,
    VlfError,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
