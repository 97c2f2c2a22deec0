"""Two-temperature feedback-controlled underdamped Langevin dynamics."""

from .errors import (
    CommutationError,
    ConfigError,
    DataError,
    DefinitenessError,
    DegenerateError,
    DimensionError,
    DomainError,
    NumericalError,
    ScopeError,
    SingularityError,
    StabilityError,
    TwoTempError,
    ValidationError,
)
from .model import (
    DoubleWell,
    LennardJones,
    Quadratic,
    TwoTemperatureSystem,
    aep_rate,
    build_control,
    energy,
    gradient,
    make_potential,
    optimal_control,
)
from .simulate import (
    EnsembleNoise,
    IntegratorSpec,
    NoiseStream,
    PhaseState,
    Trajectory,
    baoab_step,
    euler_maruyama_overdamped,
    rk4_gradient_flow,
    simulate_controlled,
    simulate_scaled,
)
from .spectral import (
    DriftNoisePair,
    LinearModel,
    assemble,
    decay_rate,
    diagonalize_commuting,
    optimal_ratio_1d,
    optimal_ratio_commuting,
    optimal_ratio_search,
    trace_rate_bound,
)

__version__ = "0.1.0"
