"""
Greenwave - Green-function solver for damped nonlinear wave equations
"""

from .config import ConfigError, RunConfig, parse_config
from .expressions import Expression, ExpressionError, parse_expression
from .kernels import (
    BoundEnvelope,
    EquationParams,
    KernelBank,
    Regime,
    eval_dissipative,
    eval_H,
    l2_norm_bounds,
    make_mode_kernel,
    theta_kernel,
)
from .physics import (
    JosephsonConfig,
    JosephsonVariant,
    VoigtConfig,
    josephson_problem,
    voigt_problem,
    winding_number,
)
from .reduction import (
    Ball,
    BCKind,
    Dirichlet,
    MatchingViolation,
    Neumann,
    ParityViolation,
    Periodic,
    ProblemSpec,
    TimeSignal,
    reduce_problem,
)
from .reference import reference_solve
from .solver import (
    ContractionCertificate,
    IterationDiverged,
    NonFiniteSource,
    SolveResult,
    certify,
    picard_step,
    residual,
    solve,
)
from .spectral import SpaceGrid, SpectralField, analyze, synthesize
from .trajectory import Trajectory
from .verification import (
    AuditReport,
    audit_kernel_ode,
    audit_lemma,
    audit_prop1,
    audit_prop2,
)

__version__ = "0.1.0"

__all__ = [
    # Kernels
    "EquationParams",
    "KernelBank",
    "BoundEnvelope",
    "Regime",
    "make_mode_kernel",
    "eval_H",
    "eval_dissipative",
    "theta_kernel",
    "l2_norm_bounds",
    # Problems and reduction
    "ProblemSpec",
    "TimeSignal",
    "Periodic",
    "Dirichlet",
    "Neumann",
    "BCKind",
    "Ball",
    "reduce_problem",
    "MatchingViolation",
    "ParityViolation",
    # Spectral
    "SpaceGrid",
    "SpectralField",
    "analyze",
    "synthesize",
    # Solver
    "solve",
    "picard_step",
    "certify",
    "residual",
    "SolveResult",
    "ContractionCertificate",
    "IterationDiverged",
    "NonFiniteSource",
    "Trajectory",
    "reference_solve",
    # Physics
    "JosephsonConfig",
    "JosephsonVariant",
    "josephson_problem",
    "VoigtConfig",
    "voigt_problem",
    "winding_number",
    # Audits
    "AuditReport",
    "audit_lemma",
    "audit_prop1",
    "audit_prop2",
    "audit_kernel_ode",
    # Config
    "RunConfig",
    "ConfigError",
    "parse_config",
    # Expressions
    "Expression",
    "ExpressionError",
    "parse_expression",
]
