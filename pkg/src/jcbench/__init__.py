"""jcbench: exact and non-Hermitian evolutions of the damped, pumped
TLS-cavity model, with trajectory- and steady-state-comparison benchmarks."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    BasisIndex,
    OperatorSet,
    SystemParams,
    build_operators,
    excitation_numbers,
    hermitian_flow,
    jump_transfer,
    lindblad_dissipator,
    photon_numbers,
    projector,
    rung_projector,
)
from .errors import (  # noqa: E402
    ConfigError,
    ConstantSeriesError,
    CutoffError,
    FixedPointSearchError,
    IntegrationDrift,
    IntegrationError,
    JCBenchError,
    NullSpaceError,
    NumericsError,
)
from .integrate import IntegrationSpec, Trajectory, integrate  # noqa: E402
from .lindblad import evolve_lindblad, lindblad_rhs  # noqa: E402
from .metrics import fidelity, pearson, trajectory_correlation  # noqa: E402
from .nhqm import (  # noqa: E402
    NhqmSplit,
    build_split,
    evolve_nhqm,
    first_rung_rhs,
    nhqm_rhs,
)
from .nheh import RungLayout, evolve_nheh_cascade, nheh_rhs  # noqa: E402
from .steady import (  # noqa: E402
    FixedPointCandidate,
    FixedPointReport,
    converged_lindblad_steady_state,
    lindblad_steady_state,
    liouvillian_matrix,
    mean_photon_number,
    nheh_steady_state,
    nhqm_fixed_points,
)
from .config import (  # noqa: E402
    ScenarioConfig,
    TrackedElement,
    default_fig1_config,
    default_fig2_config,
    parse_config,
    serialize_config,
)
from .scenarios import (  # noqa: E402
    RunResult,
    emit_outputs,
    initial_mixture,
    run_evolve,
    run_fig1,
    run_fig2,
    run_steady,
)

__all__ = [
    "BasisIndex",
    "ConfigError",
    "ConstantSeriesError",
    "CutoffError",
    "FixedPointCandidate",
    "FixedPointReport",
    "FixedPointSearchError",
    "IntegrationDrift",
    "IntegrationError",
    "IntegrationSpec",
    "JCBenchError",
    "NhqmSplit",
    "NullSpaceError",
    "NumericsError",
    "OperatorSet",
    "RunResult",
    "RungLayout",
    "ScenarioConfig",
    "SystemParams",
    "TrackedElement",
    "Trajectory",
    "build_operators",
    "build_split",
    "converged_lindblad_steady_state",
    "default_fig1_config",
    "default_fig2_config",
    "emit_outputs",
    "evolve_lindblad",
    "evolve_nheh_cascade",
    "evolve_nhqm",
    "excitation_numbers",
    "fidelity",
    "first_rung_rhs",
    "hermitian_flow",
    "initial_mixture",
    "integrate",
    "jump_transfer",
    "lindblad_dissipator",
    "lindblad_rhs",
    "lindblad_steady_state",
    "liouvillian_matrix",
    "mean_photon_number",
    "nheh_rhs",
    "nheh_steady_state",
    "nhqm_fixed_points",
    "nhqm_rhs",
    "parse_config",
    "pearson",
    "photon_numbers",
    "projector",
    "rung_projector",
    "run_evolve",
    "run_fig1",
    "run_fig2",
    "run_steady",
    "serialize_config",
    "trajectory_correlation",
]
