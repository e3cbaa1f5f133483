"""First Dirichlet eigenvalue of the r-Laplacian on a P1 mesh.

lambda_{1,r} = min over zero-trace u of int |grad u|^r / int |u|^r.

For r = 2 this is the smallest eigenvalue of K u = lambda M u (inverse power
iteration). For r != 2 the discrete Rayleigh quotient is minimized by a
gradient method in the H^1_0 metric (steepest descent preconditioned by the
stiffness matrix) with Armijo backtracking, starting from the r = 2
eigenfunction and renormalizing to ||u||_r = 1 after every step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import fem
from .errors import ConfigurationError, NumericalError
from .orlicz import lp_norm

__all__ = ["EigenOptions", "EigenResult", "first_eigenvalue", "rayleigh_quotient", "poincare_check"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EigenOptions:
    tol: float = 1e-12
    max_iter: int = 10_000
    eps: float = 1e-12  # gradient regularization, only used for r < 2
    armijo: float = 1e-4
    backtrack: float = 0.5
    rule: fem.QuadratureRule | None = None

    def __post_init__(self):
        if not self.tol > 0 or self.max_iter < 1:
            raise ConfigurationError("eigen tolerance must be > 0 and max_iter >= 1")


@dataclass(frozen=True, eq=False)
class EigenResult:
    r: float
    lam: float
    eigenfunction: fem.DiscreteField
    iterations: int
    decrement: float
    positive: bool = field(default=False)

    def as_dict(self) -> dict:
        return {
            "r": self.r,
            "lambda": self.lam,
            "iterations": self.iterations,
            "final_decrement": self.decrement,
            "eigenfunction_positive": self.positive,
            "norm_r": lp_norm(self.eigenfunction, self.r),
        }


def _rq_parts(mesh, vals, r, opts):
    """(int |grad u|^r, int |u|^r) for nodal values ``vals``."""
    g = np.linalg.norm(fem._element_gradients(mesh, vals), axis=1)
    num = float(np.sum(mesh.volumes * g**r))
    uq = np.abs(vals[mesh.cells] @ fem._rule_for(mesh, opts.rule).points.T)
    den = float(np.sum(np.sum(uq**r * fem.quadrature_weights(mesh, opts.rule), axis=1)))
    return num, den


def rayleigh_quotient(u: fem.DiscreteField, r: float, rule=None) -> float:
    num, den = _rq_parts(u.mesh, u.values, r, EigenOptions(rule=rule))
    if den == 0:
        raise ConfigurationError("Rayleigh quotient of the zero field is undefined")
    return num / den


def _rq_gradient(mesh, vals, r, opts):
    """Gradients of numerator and denominator w.r.t. all nodal values."""
    G = mesh.basis_grads
    g = fem._element_gradients(mesh, vals)
    nrm = np.sqrt(np.sum(g * g, axis=1) + (opts.eps**2 if r < 2 else 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(nrm > 0, nrm ** (r - 2.0), 1.0 if r == 2 else 0.0)
    dnum = fem.assemble_vector(mesh, r * (mesh.volumes * c)[:, None] * np.einsum("mid,md->mi", G, g))
    rule = fem._rule_for(mesh, opts.rule)
    uq = vals[mesh.cells] @ rule.points.T
    w = fem.quadrature_weights(mesh, rule)
    local = np.einsum("mq,qi->mi", w * np.sign(uq) * np.abs(uq) ** (r - 1.0), rule.points)
    return dnum, fem.assemble_vector(mesh, r * local)


def _normalize(mesh, vals, r, opts):
    _, den = _rq_parts(mesh, vals, r, opts)
    vals = vals / den ** (1.0 / r)
    if np.sum(vals) < 0:
        vals = -vals
    return vals


def _inverse_iteration(mesh, opts):
    free = mesh.free_nodes
    if free.size == 0:
        raise ConfigurationError("mesh has no free nodes")
    K = fem.restrict(fem.stiffness_matrix(mesh), mesh).tocsc()
    M = fem.restrict(fem.mass_matrix(mesh), mesh).tocsr()
    lu = spla.splu(K)
    x = np.ones(free.size)
    lam_old = np.inf
    for it in range(1, opts.max_iter + 1):
        y = lu.solve(M @ x)
        y /= np.sqrt(y @ (M @ y))
        lam = float(y @ (K @ y))
        x = y
        change = abs(lam_old - lam) / lam
        if change < opts.tol:
            return x, lam, it, change
        lam_old = lam
    raise NumericalError(
        "inverse power iteration did not converge", {"iterations": opts.max_iter, "last_change": change}
    )


def first_eigenvalue(mesh: fem.Mesh, r: float = 2.0, opts: EigenOptions | None = None) -> EigenResult:
    """Discrete first Dirichlet eigenvalue of the r-Laplacian.

    The discrete value is an upper bound of the continuum one.
    """
    opts = opts or EigenOptions()
    if not r > 1:
        raise ConfigurationError(f"eigenvalue exponent must exceed 1, got {r}")
    x, lam, its, dec = _inverse_iteration(mesh, opts)
    vals = np.zeros(mesh.n_nodes)
    vals[mesh.free_nodes] = x
    vals = _normalize(mesh, vals, 2.0, opts)
    if r != 2.0:
        vals, lam, more, dec = _descend(mesh, vals, r, opts)
        its += more
    else:
        num, den = _rq_parts(mesh, vals, 2.0, opts)
        lam = num / den
    u = fem.DiscreteField(mesh, vals)
    positive = bool(np.all(u.free_values > 0))
    if r == 2.0 and not positive:
        log.warning("first eigenfunction is not sign-definite; check mesh connectivity")
    return EigenResult(float(r), float(lam), u, its, float(dec), positive)


def _descend(mesh, vals, r, opts):
    """Minimize the r-Rayleigh quotient from ``vals``; returns (vals, lam, iters, decrement)."""
    free = mesh.free_nodes
    K = fem.restrict(fem.stiffness_matrix(mesh), mesh).tocsc()
    lu = spla.splu(K)
    vals = _normalize(mesh, vals, r, opts)
    num, den = _rq_parts(mesh, vals, r, opts)
    R = num / den
    step = 1.0
    dec = np.inf
    for it in range(1, opts.max_iter + 1):
        dnum, dden = _rq_gradient(mesh, vals, r, opts)
        grad = ((dnum - R * dden) / den)[free]
        d = -lu.solve(grad)
        slope = float(grad @ d)  # -||grad||^2 in the K^{-1} metric
        if -slope <= (opts.tol * R) ** 2:
            return vals, R, it, 0.0
        t = min(1.0, 2.0 * step)
        while True:
            trial = vals.copy()
            trial[free] += t * d
            n_t, d_t = _rq_parts(mesh, trial, r, opts)
            R_t = n_t / d_t
            if R_t <= R + opts.armijo * t * slope:
                break
            t *= opts.backtrack
            if t < 1e-14:
                # no representable decrease left: at the rounding floor
                return vals, R, it, 0.0
        step = t
        dec = (R - R_t) / R_t
        vals = _normalize(mesh, trial, r, opts)
        num, den = _rq_parts(mesh, vals, r, opts)
        R = num / den
        if dec < opts.tol:
            return vals, R, it, dec
    raise NumericalError(
        "Rayleigh quotient descent did not converge",
        {"iterations": opts.max_iter, "lambda": R, "last_decrement": dec},
    )


def poincare_check(u: fem.DiscreteField, r: float, lam: float, slack: float = 1e-10) -> dict:
    """Verify ||u||_r^r <= lam^-1 ||grad u||_r^r (reported, never raised)."""
    if lam <= 0:
        raise ConfigurationError("eigenvalue must be positive")
    lhs = lp_norm(u, r) ** r
    grad_r = lp_norm(u, r, gradient=True) ** r
    rhs = grad_r / lam
    return {
        "lhs": lhs,
        "rhs": rhs,
        "ratio": lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf),
        "holds": bool(lhs <= rhs * (1.0 + slack)),
    }
