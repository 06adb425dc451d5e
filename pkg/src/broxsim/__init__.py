"""Local-time laws of a diffusion in a Brownian potential.

Closed-form quenched laws (exponential passage law, atom-plus-exponential
increment law, explicit moments, favorite-point profile) built from the
scale function of a tabulated potential, together with a Monte Carlo path
engine in scale coordinates that samples the same quantities independently.
"""

from .analytic import (
    IncrementLaw,
    PassageLaw,
    expected_increment_profile,
    favorite_point,
    increment_cdf,
    increment_density,
    increment_law,
    increment_mgf,
    increment_moment,
    law_summary,
    mgf_scale_form,
    passage_law,
    sample_increment,
    sample_passage,
)
from .environment import (
    Environment,
    GridSpec,
    deterministic_env,
    eval_w,
    generate_two_sided_bm,
    load_env,
    save_env,
)
from .errors import EnvironmentFormatError, HorizonExceededError, OutOfDomainError
from .scale import ScaleMap, build_scale, eval_scale, inverse_scale, speed_density
from .simulate import (
    DrivingPath,
    LocalTimeSample,
    SimConfig,
    TimeChangeRecord,
    brox_increment_sample,
    brox_passage_local_time,
    build_time_change,
    child_rng,
    gambler_ruin_no_revisit,
    local_time_at_level,
    reconstruct_x_path,
    run_replicated,
    sample_increment_pair,
    sample_values,
    sample_zero_flags,
    simulate_until_level,
)
from .stats import (
    IndependenceResult,
    KsResult,
    SummaryReport,
    independence_check,
    ks_against_cdf,
    mgf_factorization_check,
    summarize,
)

__version__ = "0.1.0"
