"""Full discretization of semilinear stochastic wave equations on (0, 1).

Linear finite elements in space, a trigonometric integrator plus four
Maruyama-type schemes in time, Karhunen-Loeve noise sampling with path
coupling, and Monte-Carlo drivers for convergence and expected-energy
experiments.
"""

__version__ = "0.1.0"

from .errors import NumericalFailure
from .fem import (
    FemFunction,
    FemOperators,
    Mesh1D,
    SpectralDecomp,
    apply_operator_function,
    assemble,
    build_mesh,
    discrete_norm,
    eig_pencil,
    l2_project,
    ritz_project,
)
from .integrators import (
    SCHEMES,
    DiscreteProblem,
    SchemeConfig,
    State,
    bem_step,
    cnm_step,
    em_step,
    evaluate_rhs,
    integrate,
    sem_step,
    stm_step,
)
from .noise import (
    IncrementStreams,
    NoiseIncrement,
    NoiseModel,
    NoiseSpec,
    PathCoupling,
    coupled_increments,
    default_truncation,
    off,
    power,
    project_increment,
    sample_increment,
    trace_projected,
    white,
)
from .observables import ObservableSet, expected_observable_path, hamiltonian
from .problems import (
    ProblemSpec,
    anderson,
    get_problem,
    linear_additive,
    sine_gordon_additive,
    sine_gordon_multiplicative,
)

__all__ = [
    "__version__",
    "NumericalFailure",
    "FemFunction",
    "FemOperators",
    "Mesh1D",
    "SpectralDecomp",
    "apply_operator_function",
    "assemble",
    "build_mesh",
    "discrete_norm",
    "eig_pencil",
    "l2_project",
    "ritz_project",
    "SCHEMES",
    "DiscreteProblem",
    "SchemeConfig",
    "State",
    "bem_step",
    "cnm_step",
    "em_step",
    "evaluate_rhs",
    "integrate",
    "sem_step",
    "stm_step",
    "IncrementStreams",
    "NoiseIncrement",
    "NoiseModel",
    "NoiseSpec",
    "PathCoupling",
    "coupled_increments",
    "default_truncation",
    "off",
    "power",
    "project_increment",
    "sample_increment",
    "trace_projected",
    "white",
    "ObservableSet",
    "expected_observable_path",
    "hamiltonian",
    "ProblemSpec",
    "anderson",
    "get_problem",
    "linear_additive",
    "sine_gordon_additive",
    "sine_gordon_multiplicative",
]
