"""Convection nonlinearities f(x, s, xi), their declared certificates, and audits.

A :class:`ConvectionSpec` bundles a vectorized evaluator with user-declared
constants for the growth bound, the sign bound, the one-sided Lipschitz bound
in s and the linear-in-gradient bound. Constants are declared, never
inferred; :func:`audit_certificates` samples the inequalities pointwise and
reports the worst margins with witnesses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import fem
from .errors import ConfigurationError, EvaluationError
from .expr import Expression, spatial_function
from .orlicz import PhaseExponents, critical_exponent

__all__ = [
    "GrowthCertificate",
    "SignCertificate",
    "LipschitzCertificate",
    "LinearGradientCertificate",
    "ConvectionSpec",
    "CertificateVerdict",
    "evaluate",
    "audit_certificates",
    "check_existence_condition",
    "check_uniqueness_condition",
    "certificate_verdict",
    "assemble_load",
    "zero",
    "example1",
    "example2",
    "linear_gradient",
    "custom",
    "example1_d2_bound",
    "example2_beta_bound",
    "SAFETY_DEFLATION",
]

SAFETY_DEFLATION = 0.95
AUDIT_RTOL = 1e-12
LINEARITY_RTOL = 1e-10


def _nonneg(obj, names):
    for n in names:
        v = getattr(obj, n)
        if not (np.isfinite(v) and v >= 0):
            raise ConfigurationError(f"certificate constant {n} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class GrowthCertificate:
    """|f| <= a1 |xi|^(p(q1-1)/q1) + a2 |s|^(q1-1) + alpha_hat."""

    a1: float
    a2: float
    alpha_hat: float
    q1: float

    def __post_init__(self):
        _nonneg(self, ("a1", "a2", "alpha_hat"))
        if not self.q1 > 1:
            raise ConfigurationError(f"q1 must exceed 1, got {self.q1}")


@dataclass(frozen=True)
class SignCertificate:
    """f s <= b1 |xi|^p + b2 |s|^p + omega_hat."""

    b1: float
    b2: float
    omega_hat: float

    def __post_init__(self):
        _nonneg(self, ("b1", "b2", "omega_hat"))


@dataclass(frozen=True)
class LipschitzCertificate:
    """(f(x,s,xi) - f(x,t,xi)) (s - t) <= c1 |s - t|^2."""

    c1: float

    def __post_init__(self):
        _nonneg(self, ("c1",))


@dataclass(frozen=True)
class LinearGradientCertificate:
    """xi -> f - rho linear and |f - rho| <= c2 |xi|."""

    c2: float
    rho: Callable = field(compare=False)
    r_prime: float = 2.0

    def __post_init__(self):
        _nonneg(self, ("c2",))
        if not self.r_prime > 1:
            raise ConfigurationError(f"r' must exceed 1, got {self.r_prime}")


@dataclass(frozen=True, eq=False)
class ConvectionSpec:
    evaluator: Callable
    growth: GrowthCertificate | None = None
    sign: SignCertificate | None = None
    lipschitz: LipschitzCertificate | None = None
    linear_gradient: LinearGradientCertificate | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, x, s, xi):
        return evaluate(self, x, s, xi)

    def certificates(self) -> dict:
        out = {}
        if self.growth:
            out["growth"] = dict(self.growth.__dict__)
        if self.sign:
            out["sign"] = dict(self.sign.__dict__)
        if self.lipschitz:
            out["lipschitz"] = {"c1": self.lipschitz.c1}
        if self.linear_gradient:
            out["linear_gradient"] = {"c2": self.linear_gradient.c2, "r_prime": self.linear_gradient.r_prime}
        return out


def evaluate(spec: ConvectionSpec, x, s, xi) -> np.ndarray:
    """f(x, s, xi), vectorized: x (..., d), s (...), xi (..., d)."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    s = np.asarray(s, dtype=float)
    if x.shape[-1] != xi.shape[-1]:
        raise ConfigurationError(f"x has dimension {x.shape[-1]} but xi has {xi.shape[-1]}")
    with np.errstate(all="ignore"):
        out = np.asarray(spec.evaluator(x, s, xi), dtype=float)
    shape = np.broadcast_shapes(x.shape[:-1], s.shape, xi.shape[:-1])
    out = np.broadcast_to(out, shape)
    bad = ~np.isfinite(out)
    if np.any(bad):
        k = np.unravel_index(int(np.flatnonzero(bad)[0]), shape)
        loc = {
            "x": np.broadcast_to(x, shape + x.shape[-1:])[k].tolist(),
            "s": float(np.broadcast_to(s, shape)[k]),
            "xi": np.broadcast_to(xi, shape + xi.shape[-1:])[k].tolist(),
        }
        raise EvaluationError(f"nonlinearity {spec.name!r} returned a non-finite value at {loc}", loc)
    return out


# --------------------------------------------------------------------------
# registry


def _rho_callable(rho):
    if rho is None:
        return lambda pts: np.zeros(np.shape(pts)[:-1])
    if callable(rho):
        return rho
    if isinstance(rho, str):
        return spatial_function(rho)
    c = float(rho)
    return lambda pts: np.full(np.shape(pts)[:-1], c)


def _rho_sup(rho_fn, mesh):
    if mesh is None:
        return None
    vals = [np.abs(rho_fn(mesh.points)).max(), np.abs(rho_fn(fem.quadrature_points(mesh))).max()]
    return float(max(vals))


def zero() -> ConvectionSpec:
    return ConvectionSpec(
        lambda x, s, xi: np.zeros(np.broadcast_shapes(np.shape(x)[:-1], np.shape(s), np.shape(xi)[:-1])),
        GrowthCertificate(0.0, 0.0, 0.0, 2.0),
        SignCertificate(0.0, 0.0, 0.0),
        LipschitzCertificate(0.0),
        LinearGradientCertificate(0.0, _rho_callable(None)),
        name="zero",
    )


def example1(d1: float, d2: float, q1: float, p: float) -> ConvectionSpec:
    """f(s, xi) = -d1 |s|^(q1-2) s + d2 |xi|^(p-1).

    Declared constants: Young's inequality gives b1 = d2 (p-1)/p, b2 = d2/p;
    the growth bound uses |xi|^(p-1) <= |xi|^(p(q1-1)/q1) + 1, valid for q1 >= p;
    s -> f is non-increasing, so c1 = 0.
    """
    if d1 < 0 or d2 < 0:
        raise ConfigurationError("example1 needs d1 >= 0 and d2 >= 0")

    def f(x, s, xi):
        s = np.asarray(s, dtype=float)
        return -d1 * np.abs(s) ** (q1 - 2.0) * s + d2 * np.linalg.norm(xi, axis=-1) ** (p - 1.0)

    lin = LinearGradientCertificate(0.0, _rho_callable(None)) if d2 == 0 else None
    return ConvectionSpec(
        f,
        GrowthCertificate(d2, d1, d2, q1),
        SignCertificate(d2 * (p - 1.0) / p, d2 / p, 0.0),
        LipschitzCertificate(0.0),
        lin,
        name="example1",
        params={"d1": d1, "d2": d2, "q1": q1, "p": p},
    )


def example1_d2_bound(p: float, lam_p: float) -> float:
    """Largest admissible d2 (exclusive): p / (p - 1 + 1/lambda_{1,p})."""
    return p / (p - 1.0 + 1.0 / lam_p)


def linear_gradient(beta, rho=None, gamma: float = 0.0, q1: float | None = None, p: float = 2.0, mesh=None):
    """f(x, s, xi) = beta . xi + gamma s + rho(x).

    With p >= 2 the declared constants follow from
    (beta . xi) s <= |beta|^2 |xi|^2 + s^2/4 and rho s <= s^2/4 + rho^2, plus
    t^2 <= t^p + 1 when p > 2. ``mesh`` is used to bound sup |rho|.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    rho_fn = _rho_callable(rho)
    nb = float(np.linalg.norm(beta))
    q1 = p if q1 is None else q1
    rsup = _rho_sup(rho_fn, mesh)
    if rsup is None:
        if callable(rho) or isinstance(rho, str):
            raise ConfigurationError("a mesh is needed to bound a non-constant rho")
        rsup = 0.0 if rho is None else abs(float(rho))

    def f(x, s, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-1] != beta.size:
            raise ConfigurationError(f"beta has {beta.size} components but xi has {xi.shape[-1]}")
        return xi @ beta + gamma * np.asarray(s, dtype=float) + rho_fn(np.asarray(x, dtype=float))

    gp = max(gamma, 0.0)
    if p == 2:
        sign = SignCertificate(nb**2, 0.5 + gp, rsup**2)
    elif p > 2:
        sign = SignCertificate(nb**2, 0.5 + gp, rsup**2 + nb**2 + 0.5 + gp)
    else:
        sign = None
    return ConvectionSpec(
        f,
        GrowthCertificate(nb, abs(gamma), nb + abs(gamma) + rsup, q1),
        sign,
        LipschitzCertificate(gp),
        LinearGradientCertificate(nb, rho_fn, 2.0),
        name="linear_gradient",
        params={"beta": beta.tolist(), "gamma": gamma, "q1": q1, "p": p, "rho": getattr(rho_fn, "source", rho)},
    )


def example2(beta, rho=None, q1: float | None = None, p: float = 2.0, mesh=None) -> ConvectionSpec:
    """f(x, xi) = beta . xi + rho(x) (no s-dependence)."""
    spec = linear_gradient(beta, rho, 0.0, q1, p, mesh)
    spec.params.pop("gamma")
    object.__setattr__(spec, "name", "example2")
    return spec


def example2_beta_bound(lam2: float) -> float:
    """Bound on |beta|^2 (exclusive): min{1 - 1/(2 lambda_{1,2}), lambda_{1,2}}."""
    return min(1.0 - 0.5 / lam2, lam2)


def custom(
    expression: str,
    growth=None,
    sign=None,
    lipschitz=None,
    linear_gradient=None,
) -> ConvectionSpec:
    """f from an arithmetic expression in x, y, s, g1, g2."""
    ex = Expression(expression, ("x", "y", "s", "g1", "g2"))

    def f(x, s, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        zx = np.zeros_like(x[..., 0])
        zg = np.zeros_like(xi[..., 0])
        return ex(
            x=x[..., 0],
            y=x[..., 1] if x.shape[-1] > 1 else zx,
            s=s,
            g1=xi[..., 0],
            g2=xi[..., 1] if xi.shape[-1] > 1 else zg,
        )

    return ConvectionSpec(f, growth, sign, lipschitz, linear_gradient, name="expression", params={"f": ex.source})


# --------------------------------------------------------------------------
# audits


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst_margin: float
    witness: dict | None = None
    note: str = ""

    def as_dict(self):
        return {"passed": self.passed, "worst_margin": self.worst_margin, "witness": self.witness, "note": self.note}


def _ineq(name, lhs, bound, sample):
    margin = bound - lhs
    bad = margin < -AUDIT_RTOL * (1.0 + np.abs(bound) + np.abs(lhs))
    k = int(np.argmin(margin))
    if not np.any(bad):
        return CheckResult(name, True, float(margin[k]))
    witness = {key: _plain(v[k]) for key, v in sample.items()}
    witness.update({"lhs": float(lhs[k]), "bound": float(bound[k])})
    return CheckResult(name, False, float(margin[k]), witness)


def _plain(v):
    v = np.asarray(v)
    return v.tolist() if v.ndim else float(v)


def audit_certificates(
    spec: ConvectionSpec,
    exps: PhaseExponents,
    mesh: fem.Mesh,
    budget: int = 100_000,
    seed: int = 0,
    s_box: float = 10.0,
    xi_box: float = 10.0,
) -> dict:
    """Monte-Carlo audit of every declared certificate.

    x is drawn from the quadrature points of ``mesh``, s and t from
    [-s_box, s_box], xi and zeta from [-xi_box, xi_box]^d. Returns a dict of
    :class:`CheckResult` keyed by certificate name.
    """
    if budget < 1:
        raise ConfigurationError("audit budget must be >= 1")
    rng = np.random.default_rng(seed)
    d = mesh.dim
    qx = fem.quadrature_points(mesh).reshape(-1, d)
    x = qx[rng.integers(0, len(qx), budget)]
    s = rng.uniform(-s_box, s_box, budget)
    t = rng.uniform(-s_box, s_box, budget)
    xi = rng.uniform(-xi_box, xi_box, (budget, d))
    zeta = rng.uniform(-xi_box, xi_box, (budget, d))
    c = rng.uniform(-3.0, 3.0, budget)
    sample = {"x": x, "s": s, "t": t, "xi": xi}
    fs = evaluate(spec, x, s, xi)
    nxi = np.linalg.norm(xi, axis=1)
    p = exps.p
    out = {}

    if spec.growth is not None:
        g = spec.growth
        bound = g.a1 * nxi ** (p * (g.q1 - 1.0) / g.q1) + g.a2 * np.abs(s) ** (g.q1 - 1.0) + g.alpha_hat
        res = _ineq("growth", np.abs(fs), bound, sample)
        try:
            pstar = critical_exponent(exps)
            if not g.q1 < pstar:
                res.note = f"q1={g.q1} is not below p*={pstar:g} (declared N={exps.N})"
        except Exception:
            res.note = f"p >= N: p* undefined for declared N={exps.N}"
        out["growth"] = res

    if spec.sign is not None:
        b = spec.sign
        bound = b.b1 * nxi**p + b.b2 * np.abs(s) ** p + b.omega_hat
        out["sign"] = _ineq("sign", fs * s, bound, sample)

    if spec.lipschitz is not None:
        ft = evaluate(spec, x, t, xi)
        out["u1"] = _ineq("u1", (fs - ft) * (s - t), spec.lipschitz.c1 * (s - t) ** 2, sample)

    if spec.linear_gradient is not None:
        lg = spec.linear_gradient
        rho = np.asarray(lg.rho(x), dtype=float)
        g_xi = fs - rho
        res = _ineq("u2", np.abs(g_xi), lg.c2 * nxi, sample)
        g_zeta = evaluate(spec, x, s, zeta) - rho
        g_sum = evaluate(spec, x, s, xi + zeta) - rho
        g_scaled = evaluate(spec, x, s, c[:, None] * xi) - rho
        scale = 1.0 + np.abs(g_xi) + np.abs(g_zeta)
        add_err = np.abs(g_sum - g_xi - g_zeta) / scale
        hom_err = np.abs(g_scaled - c * g_xi) / (1.0 + np.abs(c * g_xi))
        lin_err = float(max(add_err.max(), hom_err.max()))
        if lin_err > LINEARITY_RTOL:
            k = int(np.argmax(np.maximum(add_err, hom_err)))
            res.passed = False
            res.witness = {"x": _plain(x[k]), "s": float(s[k]), "xi": _plain(xi[k]), "zeta": _plain(zeta[k]), "c": float(c[k])}
            res.note = f"xi -> f - rho is not linear (relative defect {lin_err:.3e})"
        else:
            res.note = f"linearity defect {lin_err:.3e}"
        out["u2"] = res
    return out


# --------------------------------------------------------------------------
# conditions


def check_existence_condition(spec: ConvectionSpec, lam_p: float) -> dict:
    """b1 + b2 / lambda_{1,p} < 1."""
    if not lam_p > 0:
        raise ConfigurationError("lambda_{1,p} must be positive")
    if spec.sign is None:
        raise ConfigurationError(f"nonlinearity {spec.name!r} declares no sign certificate (b1, b2, omega)")
    value = spec.sign.b1 + spec.sign.b2 / lam_p
    return {"value": float(value), "passed": bool(value < 1.0), "lambda": float(lam_p)}


def check_uniqueness_condition(spec: ConvectionSpec, lam2: float, exps: PhaseExponents) -> dict:
    """c1 / lambda_{1,2} + c2 / sqrt(lambda_{1,2}) < 1, theorem case p = 2."""
    if not lam2 > 0:
        raise ConfigurationError("lambda_{1,2} must be positive")
    if spec.lipschitz is None or spec.linear_gradient is None:
        raise ConfigurationError(
            f"nonlinearity {spec.name!r} lacks the Lipschitz (c1) or linear-gradient (c2, rho) certificate"
        )
    value = spec.lipschitz.c1 / lam2 + spec.linear_gradient.c2 / np.sqrt(lam2)
    holds = bool(value < 1.0)
    applicable = exps.p == 2.0
    return {
        "value": float(value),
        "condition_holds": holds,
        "theorem_applicable": applicable,
        "passed": holds and applicable,
        "lambda": float(lam2),
    }


@dataclass
class CertificateVerdict:
    growth_ok: bool | None
    sign_ok: bool | None
    existence_condition: float | None
    existence_ok: bool | None
    u1_ok: bool | None
    u2_ok: bool | None
    uniqueness_condition: float | None
    uniqueness_ok: bool | None
    flags: dict
    deflated: dict
    audit: dict | None = None

    @property
    def existence_passes(self) -> bool:
        return bool(self.existence_ok) and self.growth_ok is not False and self.sign_ok is not False

    @property
    def uniqueness_passes(self) -> bool:
        return bool(self.uniqueness_ok) and self.u1_ok is not False and self.u2_ok is not False

    def as_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "audit"}
        d["existence_passes"] = self.existence_passes
        d["uniqueness_passes"] = self.uniqueness_passes
        if self.audit is not None:
            d["audit"] = {k: v.as_dict() for k, v in self.audit.items()}
        return d


def certificate_verdict(
    spec: ConvectionSpec,
    exps: PhaseExponents,
    lam_p: float,
    lam2: float,
    audit: dict | None = None,
    mesh_dim: int | None = None,
) -> CertificateVerdict:
    """Combine audits and the two coefficient conditions into one verdict.

    The conditions are also evaluated with lambda deflated by 5%, which is
    conservative because the discrete eigenvalue overestimates the continuum one.
    """
    flags = exps.flags()
    try:
        flags["critical_exponent"] = critical_exponent(exps)
    except Exception:
        flags["critical_exponent"] = None
    if mesh_dim is not None:
        flags["mesh_dim"] = mesh_dim
        flags["mesh_dim_matches_N"] = mesh_dim == exps.N
        flags["analysis_setting_N_ge_2"] = mesh_dim >= 2
    if spec.growth is not None and flags["critical_exponent"] is not None:
        flags["q1_subcritical"] = bool(spec.growth.q1 < flags["critical_exponent"])

    ex = un = None
    deflated = {}
    if spec.sign is not None:
        ex = check_existence_condition(spec, lam_p)
        deflated["existence"] = check_existence_condition(spec, SAFETY_DEFLATION * lam_p)
    if spec.lipschitz is not None and spec.linear_gradient is not None:
        un = check_uniqueness_condition(spec, lam2, exps)
        deflated["uniqueness"] = check_uniqueness_condition(spec, SAFETY_DEFLATION * lam2, exps)
    flags["uniqueness_theorem_applicable"] = exps.p == 2.0

    def ok(key):
        return None if audit is None or key not in audit else audit[key].passed

    return CertificateVerdict(
        growth_ok=ok("growth"),
        sign_ok=ok("sign"),
        existence_condition=None if ex is None else ex["value"],
        existence_ok=None if ex is None else ex["passed"],
        u1_ok=ok("u1"),
        u2_ok=ok("u2"),
        uniqueness_condition=None if un is None else un["value"],
        uniqueness_ok=None if un is None else un["passed"],
        flags=flags,
        deflated=deflated,
        audit=audit,
    )


# --------------------------------------------------------------------------
# load assembly


def assemble_load(
    spec: ConvectionSpec, u_frozen: fem.DiscreteField, rule: fem.QuadratureRule | None = None, threads: int = 1
) -> np.ndarray:
    """int f(x, u, grad u) phi_i dx over free nodes, (u, grad u) frozen."""
    mesh = u_frozen.mesh
    rule = fem._rule_for(mesh, rule)
    X = fem.quadrature_points(mesh, rule)
    W = fem.quadrature_weights(mesh, rule)
    vals = u_frozen.values

    def kernel(blk):
        cells = mesh.cells[blk]
        s = vals[cells] @ rule.points.T
        g = np.einsum("mid,mi->md", mesh.basis_grads[blk], vals[cells])
        xi = np.broadcast_to(g[:, None, :], s.shape + (mesh.dim,))
        fq = evaluate(spec, X[blk], s, xi)
        return np.einsum("mq,qi->mi", fq * W[blk], rule.points)

    local = fem.map_elements(kernel, mesh.n_elements, threads)
    return fem.assemble_vector(mesh, local)[mesh.free_nodes]
