"""Online decision making and statistical inference for low-rank matrix
contextual bandits."""

from .config import T1, T2, ExperimentConfig, TargetSpec, load_config
from .debias import UnbiasedState, batch_average_oracle, debias_step, debias_surrogate
from .exceptions import DegenerateFactorError, EstimatorDivergenceError, PropensityError, TrialError
from .harness import (
    AggregateResult,
    TrialResult,
    aggregate,
    make_truth,
    run_experiment,
    run_trial,
    run_trials,
    true_sd,
    variance_error_curve,
)
from .inference import (
    InferenceTarget,
    IntervalEstimate,
    VarianceAccumulators,
    confidence_interval,
    difference_statistic,
    point_estimate,
    project_topr,
    s2_closed_form,
    true_S2_oracle,
)
from .lowrank_sgd import (
    FactorPair,
    StepSizeSchedule,
    current_estimate,
    naive_renormalized_update,
    projections_from_byproducts,
    sgd_update,
    step_size,
)
from .model import GroundTruth, generate_ground_truth, realize_reward, sample_context
from .offline_init import collect_offline, factorize_init, nuclear_norm_estimate
from .online import OnlineInference
from .policy import PolicyConfig, draw_action, propensity

__version__ = "0.1.0"
