"""Constants for the kinetic market laboratory."""

from enum import Enum, IntEnum

# Quadrature and root-finding tolerances
QUAD_TOL = 1e-10
MAX_SUBDIVISION_DEPTH = 50
BISECTION_TOL = 1e-12
MAX_BISECTION_STEPS = 200

# Boundary and stability limits
EPS_BOUNDARY = 1e-12
CFL_LIMIT = 0.9
MIN_VELOCITY_SLICES = 8

# Equilibria
EPS_QUAD = 1e-12
EPS_POS = 1e-12
INEQ_TOL = 1e-12
MAX_ITERATIONS = 10**6
DIVERGENCE_BOUND = 1e12
FINITE_MASS_TOL = 1e-9
THRESHOLD_BAND = 1e-12
BALANCE_RTOL = 1e-10

# Default far-field margin added to R0 + (v_minus - v_plus) * T
R_MAX_MARGIN = 0.5

# Edge width used for box-shaped rate functions
BOX_EDGE = 1e-10

# Environment variable controlling log verbosity
LOG_ENV_VAR = "KM_LOG"
DEFAULT_LOG_LEVEL = "WARNING"


class ModelTier(Enum):
    """Model tiers a scenario can declare."""
    FREE = "free"
    SINGLE = "single"
    RECYCLING = "recycling"
    NETWORK = "network"


class EngineKind(Enum):
    """Simulation engines available to the simulate command."""
    PARTICLES = "particles"
    FLUID = "fluid"


class EquilibriumKind(Enum):
    """Equilibrium families."""
    FIXED = "fixed"
    STATIONARY = "stationary"


class Phase(Enum):
    """Seller (+) and buyer (-) populations."""
    PLUS = "plus"
    MINUS = "minus"


class ExitCode(IntEnum):
    """Process exit codes of the command-line front end."""
    OK = 0
    CONFIG_ERROR = 1
    RUNTIME_ERROR = 2
    VALIDATION_FAILED = 3


TIER_ORDER = {
    ModelTier.FREE: 0,
    ModelTier.SINGLE: 1,
    ModelTier.RECYCLING: 2,
    ModelTier.NETWORK: 3,
}
