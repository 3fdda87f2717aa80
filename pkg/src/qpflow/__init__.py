"""High-accuracy l_{q,p}-norm multicommodity flow by iterative refinement."""

from .driver import DriverConfig, SolveReport, gap_certificate, initial_flow, solve
from .errors import (
    DimensionError,
    DomainError,
    InfeasibleInstanceError,
    InstanceFormatError,
    ParameterError,
    QPFlowError,
    SizeLimitError,
)
from .graph import CycleBasis, Graph, cycle_basis, residues, validate_instance
from .instance import ProblemInstance, random_instance
from .io import emit_report, load_report, parse_instance, write_instance
from .lemmas import replay_sample, validate_lemmas
from .objective import QPParams, bregman, edge_hessian, gamma, gamma_vec, gradient, objective
from .oracle import OracleConfig, finite_diff, oracle_residual, oracle_solve
from .residual import ResidualModel, build_residual, cost_derivatives, lambda_value, residual_value, self_concordance_check
from .subsolver import SubsolverConfig, solve_residual

__version__ = "0.1.0"

__all__ = [
    "CycleBasis",
    "DimensionError",
    "DomainError",
    "DriverConfig",
    "Graph",
    "InfeasibleInstanceError",
    "InstanceFormatError",
    "OracleConfig",
    "ParameterError",
    "ProblemInstance",
    "QPFlowError",
    "QPParams",
    "ResidualModel",
    "SizeLimitError",
    "SolveReport",
    "SubsolverConfig",
    "bregman",
    "build_residual",
    "cost_derivatives",
    "cycle_basis",
    "edge_hessian",
    "emit_report",
    "finite_diff",
    "gamma",
    "gamma_vec",
    "gap_certificate",
    "gradient",
    "initial_flow",
    "lambda_value",
    "load_report",
    "objective",
    "oracle_residual",
    "oracle_solve",
    "parse_instance",
    "random_instance",
    "replay_sample",
    "residual_value",
    "residues",
    "self_concordance_check",
    "solve",
    "solve_residual",
    "validate_instance",
    "validate_lemmas",
    "write_instance",
]
