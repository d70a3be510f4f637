"""Two-phase solver toolkit for low-dimensional nonlinear PDEs and
eigenvalue problems: small networks trained on Monte-Carlo variational
losses provide coarse solutions that warm-start classical mesh solvers."""

from .autodiff import (
    ACTIVATIONS,
    ConfigurationError,
    JetBatch,
    ParamVector,
    Tape,
    Var,
    fd_gradient_oracle,
    reverse_gradient,
)
from .bench import (
    ResultRow,
    check_recursion_bound,
    convergence_order,
    emit_report,
    parse_report,
    run_example,
)
from .domain import BoundaryPiece, ProblemDomain, boundary_factor, sample_uniform, unit_box
from .fem import (
    Mesh,
    assemble_load,
    assemble_stiffness,
    assemble_weighted_mass,
    build_mesh,
    h1_seminorm,
    interpolate_at_nodes,
    l2_norm,
    max_node_error,
    p1_eval,
)
from .linalg import CsrMatrix, SingularBorderingError, SolverFailure, solve_bordered, solve_spd
from .losses import (
    DegenerateNetworkError,
    FrictionJ2,
    GpEigenJ5,
    LinearEigenJ3,
    LsmSemilinear,
    RitzLinear,
)
from .network import (
    NetworkConfig,
    eval_network,
    eval_network_jet,
    init_network,
    load_checkpoint,
    param_count,
    save_checkpoint,
)
from .problems import ProblemCase, get_case, manufactured_residual
from .solvers import (
    IterationReport,
    SolverConfig,
    newton_nonlinear_eigen,
    newton_semilinear,
    picard_semilinear,
    power_eigen,
    two_grid_semilinear,
)
from .training import (
    TrainConfig,
    TrainedModel,
    TrainingDiverged,
    network_eigenvalue,
    train,
)

__version__ = "0.1.0"
