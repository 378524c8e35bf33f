"""Tight fidelity-detectability bounds and optimal watermark generation."""

from .distribution import FiniteDistribution, State, StateSet, ingest_csv, total_variation
from .detector import (
    CalibrationRecord,
    KeyedHashScore,
    TableScore,
    ThresholdDetector,
    calibrate,
    hash_score,
    load_scores,
)
from .divergence import (
    CHI2,
    KL,
    TV,
    BoundComparison,
    ErrorRates,
    FGenerator,
    GENERATORS,
    bernoulli_f_divergence,
    cai_bound,
    chi2_lower_bound,
    compare_bounds,
    f_divergence,
    kl_lower_bound,
    lower_bound,
    make_generator,
    tv_lower_bound,
)
from .optimal import (
    AttainmentCheck,
    WatermarkPlan,
    build_plan,
    density_ratio,
    make_plan,
    optimal_distribution,
    verify_attainment,
)
from .sampler import (
    BestOfMConfig,
    RejectionSampler,
    SamplerStats,
    best_of_m_exact_law,
    best_of_m_sample,
    best_of_m_sample_positions,
    expected_acceptance,
    sample_watermarked,
)
from .policy import (
    RewardSpec,
    SoftmaxPolicy,
    TrainConfig,
    TrainReport,
    gibbs_solution,
    objective,
    objective_gradient,
    reward_coefficient,
    train,
)
from .harness import SweepConfig, SweepRecord, comparison_grid, run_sweep

__version__ = "0.1.0"
