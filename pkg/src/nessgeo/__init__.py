"""Thermodynamic geometry of driven open quantum systems."""

from .dynamics import Trajectory, propagate, relax, slow_driving_state
from .errors import (
    BoundViolation,
    ConditioningError,
    GeodesicNoConvergence,
    IntegrationError,
    LedgerInconsistency,
    MetricSingular,
    ModelError,
    NessGeoError,
    NonUniqueSteadyState,
    NoSteadyState,
    RelaxationTimeout,
    ShapeError,
    SupportError,
    SupportWarning,
    TailWarning,
    Unsupported,
)
from .geometry import (
    FrictionTensor,
    GeodesicSolution,
    christoffel,
    friction_at,
    geodesic_arclength,
    geodesic_multiparam,
    green_kubo_xi,
    cauchy_schwarz_ratio,
    path_action_and_length,
)
from .kernels import BACKEND
from .lindblad import (
    Channel,
    LindbladModel,
    Superoperator,
    build_liouvillian,
    drazin_apply,
    drazin_matrix,
    spectral_gap,
    steady_state,
)
from .linalg import DensityMatrix, HermitianObservable, kmb_inner, log_derivative, relative_entropy, von_neumann_entropy
from .models import (
    OperatingRegime,
    ThreeLevelMaserSpec,
    build_tlm,
    classify_regime,
    fig2_spec,
    load_model,
    model_from_config,
    naive_protocols,
    tlm_closed_form,
)
from .protocols import LinearProtocol, Protocol, Sin2Protocol, TabulatedProtocol, constant_protocol
from .speed_limits import (
    MonotoneFunctionKind,
    SpeedRecord,
    generalized_variance,
    qfi_time,
    speed_limit_audit,
)
from .thermo import EntropyLedger, excess_flux_rate, heat_currents, ledger_for, sigma_na_rate

__version__ = "0.1.0"
