"""Newton-map basins of entire functions: orbits, rasters, topology checks,
curve extension under backward iteration, and channels to infinity."""
from .channels import (
    ChannelReport,
    PetalReport,
    SeparationReport,
    alternation_check,
    cluster_escape_directions,
    conjugation_residual,
    count_channels,
    separation_check,
)
from .config import ConfigError, RunConfig, load_config
from .curve import (
    BudgetReached,
    CriticalHit,
    CurveExtension,
    CurveTolerances,
    EscapedToInfinity,
    SeedCurve,
    SeedInvalid,
    extend_curve,
    pull_back_point,
    straight_seed,
)
from .function import (
    EntireFunction,
    FamilyExpZn,
    ParseError,
    eval_jet,
    family_newton_closed_form,
    newton_derivative,
    newton_step,
    parse_function,
)
from .grid import (
    BasinGrid,
    GridSpec,
    HalfPlane,
    Sector,
    build_exhaustion,
    check_unbounded,
    confirmed_holes,
    detect_holes,
    exhaustion_ratio,
    immediate_basin,
    rasterize,
    verify_absorbing,
    virtual_basin,
)
from .orbit import OrbitResult, RootRegistry, Tolerances, iterate_orbit, run_orbits

__version__ = "0.1.0"
