"""Light-to-atom-beam state transfer by Raman adiabatic passage.

Dimensionless units throughout: c = 1 and the interaction length L = 1.
"""
from .adiabatic_map import (
    SampledEnvelope,
    TransferMap,
    atom_output,
    build_transfer_map,
    field_solution,
    flux_balance,
    gaussian_envelope,
    loss_bound,
    loss_factor_eta,
)
from .config import Config, parse_config
from .errors import (
    BoundInapplicableWarning,
    DarkbeamError,
    IncompleteTransferWarning,
    InvariantError,
    PhysicsError,
    SchemaError,
)
from .model import (
    ProfileKind,
    StokesProfile,
    SystemParams,
    Thresholds,
    VelocityClass,
    VelocityDistribution,
    check_feasibility,
    delay_tau,
    group_velocity,
    group_velocity_at,
    mixing_angle,
)
from .pde_solver import EnvelopeSolver, GridSpec, SolverSetup, convergence_study
from .quantum_stats import (
    ChannelSplit,
    QuantumInput,
    count_stats,
    duan_criterion,
    fig2_curves,
    gaussian_channel_apply,
    two_mode_squeezed_cov,
)

__version__ = "0.1.0"
