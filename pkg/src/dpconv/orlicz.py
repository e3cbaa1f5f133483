"""Musielak-Orlicz modular and norms for H(x, t) = t^p + mu(x) t^q.

All integrals go through the quadrature of :mod:`dpconv.fem`. Every quantity
has a plain mode (acting on u) and a gradient mode (acting on |grad u|, which
gives the norm of the zero-trace Sobolev space W^{1,H}_0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fem
from .errors import ConfigurationError, DomainError, NumericalError

__all__ = [
    "PhaseExponents",
    "WeightField",
    "SandwichReport",
    "modular",
    "luxemburg_norm",
    "weighted_seminorm",
    "lp_norm",
    "critical_exponent",
    "check_sandwich",
    "embedding_constant",
]

LUXEMBURG_RTOL = 1e-12
LUXEMBURG_MAXITER = 200
SANDWICH_SLACK = 1e-10


@dataclass(frozen=True)
class PhaseExponents:
    """Exponents 1 < p < q and the analytic space dimension N."""

    p: float
    q: float
    N: int

    def __post_init__(self):
        p, q = float(self.p), float(self.q)
        if not (p > 1.0 and q > p) or not (math.isfinite(p) and math.isfinite(q)):
            raise ConfigurationError(f"exponents must satisfy 1 < p < q, got p={self.p}, q={self.q}")
        if int(self.N) != self.N or self.N < 1:
            raise ConfigurationError(f"N must be a positive integer, got {self.N}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "N", int(self.N))

    @property
    def admissible_poincare(self) -> bool:
        """q/p < 1 + 1/N."""
        return self.q / self.p < 1.0 + 1.0 / self.N

    @property
    def subcritical_range(self) -> bool:
        """q < N."""
        return self.q < self.N

    @property
    def uniqueness_case(self) -> bool:
        """p = 2 and q < N."""
        return self.p == 2.0 and self.q < self.N

    @property
    def critical_exponent(self) -> float:
        return critical_exponent(self)

    def flags(self) -> dict:
        return {
            "admissible_poincare": self.admissible_poincare,
            "subcritical_range": self.subcritical_range,
            "uniqueness_case": self.uniqueness_case,
            "p_lt_N": self.p < self.N,
        }


@dataclass(frozen=True, eq=False)
class WeightField:
    """Nonnegative P1 weight mu with an estimated Lipschitz constant."""

    field: fem.DiscreteField

    def __post_init__(self):
        if np.any(self.field.values < 0) or not np.all(np.isfinite(self.field.values)):
            raise ConfigurationError("weight mu must be finite and nonnegative at every node")

    @classmethod
    def constant(cls, mesh: fem.Mesh, value: float) -> "WeightField":
        return cls(fem.interpolate(mesh, float(value)))

    @classmethod
    def from_function(cls, mesh: fem.Mesh, fn) -> "WeightField":
        return cls(fem.interpolate(mesh, fn))

    @property
    def mesh(self) -> fem.Mesh:
        return self.field.mesh

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def lipschitz(self) -> float:
        """max over elements of |grad mu_h| (an estimate, not a certificate)."""
        return float(np.linalg.norm(self.field.gradients(), axis=1).max())

    @property
    def sup(self) -> float:
        return float(self.values.max())

    def is_zero(self) -> bool:
        return bool(np.all(self.values == 0.0))

    def at_quadrature(self, rule=None) -> np.ndarray:
        return self.field.at_quadrature(rule)


def _check_same_mesh(u: fem.DiscreteField, mu: WeightField):
    if u.mesh is not mu.mesh:
        raise ConfigurationError("field and weight live on different meshes")


def _abs_at_qp(u: fem.DiscreteField, gradient: bool, rule) -> np.ndarray:
    rule = fem._rule_for(u.mesh, rule)
    if gradient:
        g = np.linalg.norm(u.gradients(), axis=1)
        return np.broadcast_to(g[:, None], (u.mesh.n_elements, rule.points.shape[0]))
    return np.abs(u.at_quadrature(rule))


def _modular_parts(u, mu, exps, gradient, rule):
    """Return (int |v|^p, int mu |v|^q) with v = u or |grad u|."""
    _check_same_mesh(u, mu)
    a = _abs_at_qp(u, gradient, rule)
    w = fem.quadrature_weights(u.mesh, rule)
    m = mu.at_quadrature(rule)
    A = float(np.sum(np.sum(a**exps.p * w, axis=1)))
    B = float(np.sum(np.sum(m * a**exps.q * w, axis=1)))
    return A, B


def modular(u: fem.DiscreteField, mu: WeightField, exps: PhaseExponents, *, gradient=False, rule=None) -> float:
    """rho_H(u) = int |u|^p + mu |u|^q dx."""
    A, B = _modular_parts(u, mu, exps, gradient, rule)
    return A + B


def _scaled_modular(A, B, exps, tau):
    return A * tau ** (-exps.p) + B * tau ** (-exps.q)


def luxemburg_norm(
    u: fem.DiscreteField,
    mu: WeightField,
    exps: PhaseExponents,
    *,
    gradient=False,
    rule=None,
    rtol=LUXEMBURG_RTOL,
) -> float:
    """inf{tau > 0 : rho_H(u / tau) <= 1}.

    The modular of u/tau is A tau^-p + B tau^-q with A, B fixed, strictly
    decreasing in tau, so the root is bracketed by doubling/halving and then
    bisected.
    """
    A, B = _modular_parts(u, mu, exps, gradient, rule)
    return _luxemburg_root(A, B, exps, rtol)


def _luxemburg_root(A, B, exps, rtol=LUXEMBURG_RTOL):
    if A == 0.0 and B == 0.0:
        return 0.0
    # ||u||_p as first guess; exact when B == 0
    lo = hi = A ** (1.0 / exps.p) if A > 0 else B ** (1.0 / exps.q)
    while _scaled_modular(A, B, exps, hi) > 1.0:
        hi *= 2.0
    while _scaled_modular(A, B, exps, lo) < 1.0:
        lo *= 0.5
    if lo == hi:
        return hi
    for _ in range(LUXEMBURG_MAXITER):
        mid = 0.5 * (lo + hi)
        if _scaled_modular(A, B, exps, mid) > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi * 1e-2:
            return 0.5 * (lo + hi)
    raise NumericalError("Luxemburg bisection did not converge", {"lo": lo, "hi": hi})


def weighted_seminorm(u: fem.DiscreteField, mu: WeightField, q: float, *, gradient=False, rule=None) -> float:
    """(int mu |u|^q dx)^(1/q)."""
    if q <= 1:
        raise ConfigurationError(f"seminorm exponent must exceed 1, got {q}")
    _check_same_mesh(u, mu)
    a = _abs_at_qp(u, gradient, rule)
    val = fem.integrate_values(u.mesh, mu.at_quadrature(rule) * a**q, rule)
    return val ** (1.0 / q)


def lp_norm(v: fem.DiscreteField, r: float, *, gradient=False, rule=None) -> float:
    """(int |v|^r dx)^(1/r); with ``gradient`` the norm of |grad v|."""
    if not r >= 1:
        raise ConfigurationError(f"L^r norm needs r >= 1, got {r}")
    a = _abs_at_qp(v, gradient, rule)
    return fem.integrate_values(v.mesh, a**r, rule) ** (1.0 / r)


def critical_exponent(exps: PhaseExponents) -> float:
    """Sobolev critical exponent p* = N p / (N - p)."""
    if exps.p >= exps.N:
        raise DomainError(f"p* is undefined for p >= N (p={exps.p}, N={exps.N})")
    return exps.N * exps.p / (exps.N - exps.p)


@dataclass(frozen=True)
class SandwichReport:
    lhs: float
    mid: float
    rhs: float
    norm: float
    holds: bool
    gradient: bool

    def as_dict(self):
        return dict(self.__dict__)


def check_sandwich(
    u: fem.DiscreteField, mu: WeightField, exps: PhaseExponents, *, gradient=False, rule=None, slack=SANDWICH_SLACK
) -> SandwichReport:
    """min{n^p, n^q} <= ||u||_p^p + ||u||_{q,mu}^q <= max{n^p, n^q}, n = ||u||_H.

    Violations are reported through ``holds``, never raised.
    """
    A, B = _modular_parts(u, mu, exps, gradient, rule)
    n = _luxemburg_root(A, B, exps)
    lo, hi = sorted((n**exps.p, n**exps.q))
    mid = A + B
    holds = lo <= mid * (1 + slack) + 1e-300 and mid <= hi * (1 + slack) + 1e-300
    return SandwichReport(lo, mid, hi, n, bool(holds), gradient)


def embedding_constant(mu_sup: float, volume: float, exps: PhaseExponents) -> float:
    """C with ||u||_H <= C ||u||_q whenever 0 <= mu <= mu_sup.

    By Hoelder, rho_H(u / (C s)) <= |Omega|^(1-p/q) C^-p + mu_sup C^-q for
    s = ||u||_q; C is the root of that bound equal to one.
    """
    A = volume ** (1.0 - exps.p / exps.q)
    return _luxemburg_root(A, float(mu_sup), exps)
