"""Double-phase flux a(x, xi) = |xi|^(p-2) xi + mu(x) |xi|^(q-2) xi and its FE assembly.

The flux is regularized as |xi|_eps = sqrt(|xi|^2 + eps^2) inside the powers.
With P1 elements the gradient is constant per element, so the flux on an
element varies only through mu, which is sampled at quadrature points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fem
from .errors import ConfigurationError, SingularityError
from .orlicz import PhaseExponents, WeightField, luxemburg_norm

__all__ = [
    "FluxParams",
    "flux",
    "flux_derivative",
    "operator_vector",
    "assemble_residual",
    "assemble_jacobian",
    "energy",
    "coercivity_probe",
    "monotone_term",
]

DEFAULT_EPS = 1e-10


@dataclass(frozen=True, eq=False)
class FluxParams:
    exps: PhaseExponents
    mu: WeightField
    eps: float = DEFAULT_EPS
    threads: int = 1
    rule: fem.QuadratureRule | None = None

    def __post_init__(self):
        if not self.eps >= 0:
            raise ConfigurationError(f"regularization eps must be >= 0, got {self.eps}")
        if self.eps == 0 and min(self.exps.p, self.exps.q) < 2:
            raise ConfigurationError("eps = 0 requires p >= 2 and q >= 2 (flux derivative is singular at 0)")

    @property
    def mesh(self) -> fem.Mesh:
        return self.mu.mesh

    def with_eps(self, eps: float) -> "FluxParams":
        return FluxParams(self.exps, self.mu, eps, self.threads, self.rule)


def _power_terms(r, e):
    """Return (r^(e-2), (e-2) r^(e-4)) with the limits at r = 0.

    The second entry multiplies xi xi^T, so at r = 0 it contributes nothing
    when e >= 2. For e < 2 the first entry blows up at r = 0.
    """
    r = np.asarray(r, dtype=float)
    zero = r == 0.0
    if np.any(zero) and e < 2:
        raise SingularityError(f"flux derivative singular at |xi|_eps = 0 for exponent {e} < 2")
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(zero, 1.0 if e == 2 else 0.0, r ** (e - 2.0))
        s = np.where(zero, 0.0, (e - 2.0) * r ** (e - 4.0))
    return c, s


def _reg_norm(xi, eps):
    return np.sqrt(np.sum(np.asarray(xi, dtype=float) ** 2, axis=-1) + eps * eps)


def flux(xi, mu, params: FluxParams) -> np.ndarray:
    """(|xi|_eps^(p-2) + mu |xi|_eps^(q-2)) xi, vectorized over leading axes."""
    xi = np.asarray(xi, dtype=float)
    r = _reg_norm(xi, params.eps)
    cp, _ = _power_terms(r, params.exps.p)
    cq, _ = _power_terms(r, params.exps.q)
    return (cp + np.asarray(mu, dtype=float) * cq)[..., None] * xi


def flux_derivative(xi, mu, params: FluxParams) -> np.ndarray:
    """Jacobian d a / d xi, shape (..., d, d)."""
    xi = np.asarray(xi, dtype=float)
    mu = np.asarray(mu, dtype=float)
    r = _reg_norm(xi, params.eps)
    cp, sp_ = _power_terms(r, params.exps.p)
    cq, sq = _power_terms(r, params.exps.q)
    d = xi.shape[-1]
    c = cp + mu * cq
    s = sp_ + mu * sq
    return c[..., None, None] * np.eye(d) + s[..., None, None] * xi[..., :, None] * xi[..., None, :]


# --------------------------------------------------------------------------
# element kernels


def _element_weights(params: FluxParams):
    """Per-element int_K 1 dx and int_K mu dx from the quadrature rule."""
    w = fem.quadrature_weights(params.mesh, params.rule)
    return np.sum(w, axis=1), np.sum(params.mu.at_quadrature(params.rule) * w, axis=1)


def _element_coefficients(params: FluxParams, grads, vol, wmu, with_derivative):
    """Per-element integrated flux coefficients.

    Returns C (m,) and optionally S (m,) with
    int_K a(x, g) dx = C g and int_K Da(x, g) dx = C I + S g g^T.
    """
    r = _reg_norm(grads, params.eps)
    cp, sp_ = _power_terms(r, params.exps.p)
    cq, sq = _power_terms(r, params.exps.q)
    C = vol * cp + wmu * cq
    if not with_derivative:
        return C, None
    return C, vol * sp_ + wmu * sq


def operator_vector(u: fem.DiscreteField, params: FluxParams) -> np.ndarray:
    """<A(u), phi_i> for every node i (boundary rows included)."""
    mesh = _mesh_of(u, params)
    vals = u.values
    vol, wmu = _element_weights(params)

    def kernel(blk):
        G = mesh.basis_grads[blk]
        g = np.einsum("mid,mi->md", G, vals[mesh.cells[blk]])
        C, _ = _element_coefficients(params, g, vol[blk], wmu[blk], False)
        return C[:, None] * np.einsum("mid,md->mi", G, g)

    local = fem.map_elements(kernel, mesh.n_elements, params.threads)
    return fem.assemble_vector(mesh, local)


def assemble_residual(u: fem.DiscreteField, rhs, params: FluxParams) -> np.ndarray:
    """<A(u), phi_i> - rhs_i over free nodes; a scalar or None rhs is broadcast."""
    mesh = _mesh_of(u, params)
    rhs = np.asarray(0.0 if rhs is None else rhs, dtype=float)
    if rhs.ndim == 0:
        rhs = np.full(mesh.free_nodes.size, float(rhs))
    if rhs.shape != (mesh.free_nodes.size,):
        raise ConfigurationError(f"rhs must have one entry per free node ({mesh.free_nodes.size})")
    return operator_vector(u, params)[mesh.free_nodes] - rhs


def assemble_jacobian(u: fem.DiscreteField, params: FluxParams) -> sp.csr_matrix:
    """Jacobian of :func:`assemble_residual` restricted to free nodes."""
    mesh = _mesh_of(u, params)
    vals = u.values
    vol, wmu = _element_weights(params)

    def kernel(blk):
        G = mesh.basis_grads[blk]
        g = np.einsum("mid,mi->md", G, vals[mesh.cells[blk]])
        C, S = _element_coefficients(params, g, vol[blk], wmu[blk], True)
        Gg = np.einsum("mid,md->mi", G, g)
        return C[:, None, None] * np.einsum("mid,mjd->mij", G, G) + S[:, None, None] * (
            Gg[:, :, None] * Gg[:, None, :]
        )

    local = fem.map_elements(kernel, mesh.n_elements, params.threads)
    return fem.restrict(fem.assemble_matrix(mesh, local), mesh)


def energy(u: fem.DiscreteField, params: FluxParams) -> float:
    """int (|grad u|_eps^p - eps^p)/p + mu (|grad u|_eps^q - eps^q)/q dx.

    Its gradient with respect to the free coefficients is assemble_residual(u, 0).
    """
    mesh = _mesh_of(u, params)
    p, q, eps = params.exps.p, params.exps.q, params.eps
    g2 = np.sum(u.gradients() ** 2, axis=1)
    r = np.sqrt(g2 + eps * eps)
    vol, wmu = _element_weights(params)
    # r^e - eps^e computed without cancellation for small gradients
    tp = r**p - eps**p if eps > 0 else g2 ** (p / 2)
    tq = r**q - eps**q if eps > 0 else g2 ** (q / 2)
    return float(np.sum(vol * tp / p + wmu * tq / q))


def _mesh_of(u, params):
    if u.mesh is not params.mesh:
        raise ConfigurationError("field and weight live on different meshes")
    return u.mesh


def coercivity_probe(u: fem.DiscreteField, params: FluxParams, ts=None) -> dict:
    """Evaluate t -> <A(tu), tu> / ||tu||_{1,H,0} on a grid of scales.

    ``u`` is first normalized to ||u||_{1,H,0} = 1.
    """
    ts = np.asarray(2.0 ** np.arange(11) if ts is None else ts, dtype=float)
    n = luxemburg_norm(u, params.mu, params.exps, gradient=True, rule=params.rule)
    if n == 0:
        raise ConfigurationError("coercivity probe needs a nonzero direction")
    base = u / n
    vals = []
    for t in ts:
        v = base * t
        pairing = float(operator_vector(v, params) @ v.values)
        vals.append(pairing / luxemburg_norm(v, params.mu, params.exps, gradient=True, rule=params.rule))
    vals = np.asarray(vals)
    return {"t": ts, "ratio": vals, "increasing": bool(np.all(np.diff(vals) > 0))}


def monotone_term(a: fem.DiscreteField, b: fem.DiscreteField, params: FluxParams) -> float:
    """int mu (|grad a|^(q-2) grad a - |grad b|^(q-2) grad b) . grad(a - b) dx (>= 0)."""
    mesh = _mesh_of(a, params)
    ga, gb = a.gradients(), b.gradients()
    ca, _ = _power_terms(_reg_norm(ga, params.eps), params.exps.q)
    cb, _ = _power_terms(_reg_norm(gb, params.eps), params.exps.q)
    _, wmu = _element_weights(params)
    diff = ca[:, None] * ga - cb[:, None] * gb
    return float(np.sum(wmu * np.sum(diff * (ga - gb), axis=1)))
