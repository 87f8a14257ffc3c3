"""Benchmark pairs with closed-form entropic plans and bridge drifts."""

from .builders import (
    DataRecipeSpec,
    KMeansResult,
    MixturesPresetSpec,
    build_from_data,
    build_mixtures_preset,
    kmeans,
    sphere_centers,
)
from .dynamics import (
    CustomDrift,
    DriftField,
    OptimalDrift,
    PerturbedDrift,
    Trajectory,
    brownian_bridge_sample,
    drift_quadrature_oracle,
    optimal_drift,
    sample_sb_trajectories_exact,
    sample_sb_trajectory_exact,
    simulate_endpoints,
    simulate_sb,
)
from .errors import (
    AsymmetricMatrixError,
    BuilderError,
    DegenerateWeightsError,
    DimensionMismatchError,
    EotPairsError,
    FormatError,
    NotAppropriateError,
    ProtocolError,
    QuadratureError,
    SimulationError,
)
from .mala import (
    ChainDiagnostics,
    ExplicitInit,
    FromJointDraw,
    MalaConfig,
    default_step_size,
    mala_chain,
    mala_ensemble,
    sample_reverse_conditional,
)
from .metrics import (
    GaussianFit,
    MetricReport,
    bw2_squared,
    bw2_uvp,
    cbw2_uvp,
    kl_forward,
    kl_reverse,
    l2_drift_discrepancy,
    mmd_rbf,
)
from .pair import BenchmarkPair, PairComponent
from .pairfile import load_pair, pair_digest, save_pair
from .plan import (
    ConditionalPlanMixture,
    JointSample,
    SamplePair,
    conditional_log_density,
    conditional_moments,
    conditional_moments_batch,
    conditional_plan,
    log_forward_density_unnormalized,
    log_reverse_density_unnormalized,
    log_z_quadrature_oracle,
    sample_conditional,
    sample_joint,
    sample_target,
    target_moments,
    z_quadrature_oracle,
)
from .potential import (
    LsePotential,
    ValidationReport,
    log_quad_form,
    potential_value,
    schrodinger_potential_log,
    validate_potential,
)
from .refvectors import export_reference_vectors, verify_reference
from .rng import Seed, generator
from .source import Gaussian, GaussianMixture, SourceDistribution, standard_source
from .symmatrix import SymMatrix

__version__ = "0.1.0"
