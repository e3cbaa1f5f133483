"""Manufactured-solution convergence studies.

The operator part of the load, -div a(x, grad u*), is derived symbolically
with sympy; the convection part f(x, u*, grad u*) is evaluated numerically and
subtracted, so the discrete problem with right-hand side f + g has u* as its
exact solution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy

from . import convection as cv
from . import fem
from .doublephase import FluxParams
from .errors import ConfigurationError, EvaluationError
from .expr import spatial_function
from .orlicz import PhaseExponents, WeightField
from .solver import SolverConfig, picard_solve

__all__ = ["ManufacturedSolution", "manufacture", "mms_study"]

_X, _Y = sympy.symbols("x y", real=True)


def _num(v):
    v = float(v)
    return sympy.Integer(int(v)) if v.is_integer() else sympy.Float(v)


@dataclass(frozen=True)
class ManufacturedSolution:
    """Closed-form u*, its gradient, and the operator load -div a(x, grad u*)."""

    u: Callable
    grad: Callable
    operator_load: Callable
    source: str

    def load(self, spec: cv.ConvectionSpec | None = None) -> Callable:
        """g(x) = -div a(x, grad u*) - f(x, u*, grad u*)."""
        if spec is None:
            return self.operator_load

        def g(pts):
            pts = np.asarray(pts, dtype=float)
            return self.operator_load(pts) - cv.evaluate(spec, pts, self.u(pts), self.grad(pts))

        return g


def manufacture(u_expr: str, mu_expr: str, exps: PhaseExponents, dim: int) -> ManufacturedSolution:
    """Build a :class:`ManufacturedSolution` from expressions in x (and y)."""
    if dim not in (1, 2):
        raise ConfigurationError("manufactured solutions support dim 1 or 2")
    names = {"x": _X, "y": _Y, "pi": sympy.pi, "e": sympy.E}
    try:
        u = sympy.sympify(u_expr, locals=names)
        mu = sympy.sympify(mu_expr, locals=names)
    except (sympy.SympifyError, TypeError) as exc:
        raise ConfigurationError(f"cannot parse manufactured solution: {exc}") from None
    vars_ = (_X,) if dim == 1 else (_X, _Y)
    extra = (u.free_symbols | mu.free_symbols) - set(vars_)
    if extra:
        raise ConfigurationError(f"unknown symbols {sorted(map(str, extra))} for a {dim}D manufactured solution")
    p, q = _num(exps.p), _num(exps.q)
    grad = [sympy.diff(u, v) for v in vars_]
    norm = sympy.Abs(grad[0]) if dim == 1 else sympy.sqrt(sum(g**2 for g in grad))
    coef = norm ** (p - 2) + mu * norm ** (q - 2)
    div = sum(sympy.diff(coef * g, v) for g, v in zip(grad, vars_))

    def lam(expr):
        f = sympy.lambdify(vars_, expr, modules="numpy")

        def fn(pts):
            pts = np.asarray(pts, dtype=float)
            args = [pts[..., i] for i in range(dim)]
            with np.errstate(all="ignore"):
                out = np.broadcast_to(np.asarray(f(*args), dtype=float), pts.shape[:-1])
            if not np.all(np.isfinite(out)):
                raise EvaluationError(f"manufactured expression {expr} is not finite on the mesh")
            return out

        return fn

    u_fn, g_fn = lam(u), lam(-div)
    grad_fns = [lam(g) for g in grad]

    def grad_fn(pts):
        return np.stack([g(pts) for g in grad_fns], axis=-1)

    return ManufacturedSolution(u_fn, grad_fn, g_fn, str(u_expr))


def _with_load(spec: cv.ConvectionSpec | None, g: Callable) -> cv.ConvectionSpec:
    base = spec

    def f(x, s, xi):
        out = g(x)
        if base is not None:
            out = out + cv.evaluate(base, x, s, xi)
        return out

    return cv.ConvectionSpec(f, name=f"{'zero' if base is None else base.name}+mms")


def mms_study(
    u_expr: str,
    exps: PhaseExponents,
    mu_expr: str = "0",
    spec: cv.ConvectionSpec | None = None,
    levels: int = 4,
    base_resolution: int = 8,
    domain=(0.0, 1.0),
    cfg: SolverConfig | None = None,
    eps: float = 1e-10,
    threads: int = 1,
    error_degree: int = 8,
) -> dict:
    """Solve on ``levels`` uniformly refined meshes and tabulate errors and rates.

    Errors are ||u_h - u*||_2 and ||grad(u_h - u*)||_2 evaluated with a
    higher-degree quadrature rule. Rates are log2 of successive error ratios.
    """
    if levels < 1:
        raise ConfigurationError("levels must be >= 1")
    lo, hi = fem._box(domain)
    dim = lo.size
    ms = manufacture(u_expr, mu_expr, exps, dim)
    g = ms.load(spec)
    mu_fn = spatial_function(mu_expr)
    rule = fem.quadrature_rule(dim, error_degree)
    rows = []
    for level in range(levels):
        res = base_resolution * 2**level
        mesh = fem.build_uniform_mesh(domain, res)
        bvals = ms.u(mesh.points[mesh.boundary])
        scale = 1.0 + float(np.max(np.abs(ms.u(mesh.points))))
        if np.max(np.abs(bvals)) > 1e-12 * scale:
            raise ConfigurationError(f"manufactured solution {u_expr!r} does not vanish on the boundary")
        params = FluxParams(exps, WeightField.from_function(mesh, mu_fn), eps, threads)
        report = picard_solve(_with_load(spec, g), params, cfg, certify=False)
        uh = report.field
        X = fem.quadrature_points(mesh, rule)
        W = fem.quadrature_weights(mesh, rule)
        diff = uh.at_quadrature(rule) - ms.u(X)
        gdiff = uh.gradients()[:, None, :] - ms.grad(X)
        l2 = float(np.sqrt(np.sum(diff**2 * W)))
        h1 = float(np.sqrt(np.sum(np.sum(gdiff**2, axis=-1) * W)))
        rows.append(
            {
                "level": level,
                "resolution": res,
                "h": mesh.h,
                "l2_error": l2,
                "h1_error": h1,
                "converged": report.converged,
                "outer_iterations": report.iterations,
            }
        )
    for prev, cur in zip(rows[:-1], rows[1:]):
        ratio_h = np.log(prev["h"] / cur["h"])
        for key in ("l2", "h1"):
            a, b = prev[f"{key}_error"], cur[f"{key}_error"]
            cur[f"{key}_rate"] = float(np.log(a / b) / ratio_h) if a > 0 and b > 0 else None
    return {"u_star": u_expr, "mu": mu_expr, "p": exps.p, "q": exps.q, "levels": rows}
