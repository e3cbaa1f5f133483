"""Finite-element toolkit for double-phase problems with convection terms.

Solves -div(|grad u|^(p-2) grad u + mu(x) |grad u|^(q-2) grad u) = f(x, u, grad u)
with homogeneous Dirichlet data on intervals and rectangles, and checks the
structural certificates of f that make the problem well posed.
"""

__version__ = "0.1.0"

from .config import RunConfig, parse_config, parse_config_text
from .convection import (
    CertificateVerdict,
    ConvectionSpec,
    GrowthCertificate,
    LinearGradientCertificate,
    LipschitzCertificate,
    SignCertificate,
    audit_certificates,
    certificate_verdict,
    check_existence_condition,
    check_uniqueness_condition,
)
from .doublephase import FluxParams, assemble_jacobian, assemble_residual, energy, flux, operator_vector
from .eigen import EigenOptions, EigenResult, first_eigenvalue, poincare_check, rayleigh_quotient
from .errors import (
    ConfigurationError,
    DomainError,
    DPError,
    EvaluationError,
    InvariantViolationError,
    NumericalError,
    SingularityError,
)
from .fem import DiscreteField, Mesh, build_uniform_mesh, integrate, quadrature_rule
from .mms import manufacture, mms_study
from .orlicz import PhaseExponents, WeightField, check_sandwich, luxemburg_norm, modular
from .solver import SolverConfig, SolverReport, measure_contraction, picard_solve, solve_frozen

__all__ = [name for name in dir() if not name.startswith("_")]
