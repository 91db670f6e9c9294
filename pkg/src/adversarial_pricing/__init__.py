"""No-arbitrage price bounds and hedges under an adversarial market model."""

from .american import AmericanResult, american_lower, american_upper
from .equilibrium import (
    DiscreteSupport,
    RiskNeutralMeasure,
    SingleRoundSolution,
    envelope_at_zero,
    solve_lower,
    solve_upper,
)
from .errors import (
    ConfigurationError,
    DomainError,
    EngineError,
    JumpFeasibility,
    NoRiskNeutralMeasure,
    PricingError,
    ShapeMismatch,
    SizeLimit,
    ValidationError,
)
from .hjb import PdeGrid, hjb_solve
from .jumps import JumpConfig, JumpMode, adversarial_jump_upper, jump_weights, random_jump_upper
from .lattice import (
    GameSpec,
    HedgeSchedule,
    binomial_upper,
    black_scholes,
    bound_lower,
    concave_upper,
    convergence_scan,
)
from .multinomial import (
    ApproximationResult,
    DiscretizedSet,
    Engine,
    ExactLimits,
    ValueGrid,
    discretize,
    epsilon_for_target,
    price_lower,
    price_upper,
)
from .payoff import Payoff, PayoffKind, Shape, evaluate, validate_metadata

__version__ = "0.1.0"
