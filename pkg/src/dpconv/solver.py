"""Frozen-convection Picard iteration with a damped Newton inner solver.

Each outer step freezes (u, grad u) inside f at the previous iterate and
solves the monotone problem A(u) = N_f(u_k), which is the minimization of the
strictly convex functional energy(u) - <load, u>. Newton steps are damped by
Armijo backtracking on that functional.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import convection as cv
from . import fem
from .doublephase import FluxParams, assemble_jacobian, assemble_residual, energy, monotone_term, operator_vector
from .eigen import first_eigenvalue
from .errors import ConfigurationError, InvariantViolationError, NumericalError, SingularityError
from .orlicz import lp_norm

__all__ = [
    "SolverConfig",
    "NewtonInfo",
    "SolverReport",
    "solve_frozen",
    "minimize_frozen",
    "picard_solve",
    "weak_residual",
    "measure_contraction",
    "default_eps_schedule",
]

log = logging.getLogger(__name__)

CONTRACTION_SLACK = 0.05


@dataclass(frozen=True)
class SolverConfig:
    outer_tol: float = 1e-8
    outer_max_iter: int = 100
    inner_tol: float = 1e-11
    inner_max_iter: int = 50
    armijo: float = 1e-4
    backtrack: float = 0.5
    min_step: float = 1e-14
    initial_guess: np.ndarray | None = field(default=None, compare=False)
    eps_schedule: tuple | None = None
    keep_iterates: bool = False

    def __post_init__(self):
        if not (self.outer_tol > 0 and self.inner_tol > 0):
            raise ConfigurationError("solver tolerances must be positive")
        if self.outer_max_iter < 1 or self.inner_max_iter < 1:
            raise ConfigurationError("iteration caps must be >= 1")
        if not (0 < self.armijo < 1 and 0 < self.backtrack < 1):
            raise ConfigurationError("line-search parameters must lie in (0, 1)")


def default_eps_schedule(params: FluxParams) -> tuple:
    """eps continuation 1e-2 -> target (factor 10) when an exponent is below 2."""
    target = params.eps
    if min(params.exps.p, params.exps.q) >= 2 or target >= 1e-2:
        return (target,)
    k = int(round(-math.log10(target))) if target > 0 else 10
    sched = [10.0**-j for j in range(2, k + 1)]
    if sched[-1] != target:
        sched.append(target)
    return tuple(sched)


@dataclass
class NewtonInfo:
    iterations: int = 0
    residual: float = float("nan")
    merits: list = field(default_factory=list)
    steps: list = field(default_factory=list)


def _merit(u, load, params):
    return energy(u, params) - float(load @ u.free_values)


def minimize_frozen(
    load: np.ndarray, params: FluxParams, cfg: SolverConfig, start: fem.DiscreteField | None = None
) -> tuple[fem.DiscreteField, NewtonInfo]:
    """Damped Newton for <A(u), phi_i> = load_i on free nodes."""
    mesh = params.mesh
    u = fem.apply_dirichlet(start) if start is not None else fem.DiscreteField.zeros(mesh)
    info = NewtonInfo()
    schedule = cfg.eps_schedule or default_eps_schedule(params)
    for eps in schedule:
        u = _newton(u, load, params.with_eps(eps), cfg, info)
    return u, info


def _newton(u, load, params, cfg, info):
    R = assemble_residual(u, load, params)
    res = float(np.max(np.abs(R))) if R.size else 0.0
    merit = _merit(u, load, params)
    info.merits.append(merit)
    for _ in range(cfg.inner_max_iter):
        if res <= cfg.inner_tol:
            break
        J = assemble_jacobian(u, params)
        try:
            delta = spla.splu(J.tocsc()).solve(-R)
        except RuntimeError as exc:
            raise SingularityError(f"Jacobian factorization failed: {exc}", {"residual": res}) from None
        if not np.all(np.isfinite(delta)):
            raise SingularityError("Newton direction is not finite", {"residual": res})
        slope = float(R @ delta)
        t = 1.0
        while True:
            vals = u.values.copy()
            vals[params.mesh.free_nodes] += t * delta
            trial = u.with_values(vals)
            m_t = _merit(trial, load, params)
            if m_t <= merit + cfg.armijo * t * slope:
                R_t = assemble_residual(trial, load, params)
                break
            # near the solution the merit change drowns in rounding; accept a
            # step that still reduces the residual
            if abs(m_t - merit) <= 1e-14 * (1.0 + abs(merit)):
                R_t = assemble_residual(trial, load, params)
                if np.max(np.abs(R_t)) < res:
                    break
            t *= cfg.backtrack
            if t < cfg.min_step:
                raise NumericalError(
                    "Newton line search stagnated",
                    {"residual": res, "merit": merit, "slope": slope, "eps": params.eps},
                )
        u, R, merit = trial, R_t, m_t
        res = float(np.max(np.abs(R)))
        info.iterations += 1
        info.merits.append(merit)
        info.steps.append(t)
    else:
        if res > cfg.inner_tol:
            raise NumericalError(
                "Newton did not reach the inner tolerance",
                {"residual": res, "iterations": cfg.inner_max_iter, "eps": params.eps},
            )
    info.residual = res
    return u


def solve_frozen(
    u_frozen: fem.DiscreteField,
    spec: cv.ConvectionSpec,
    params: FluxParams,
    cfg: SolverConfig | None = None,
    start: fem.DiscreteField | None = None,
) -> fem.DiscreteField:
    """Solve A(u) = N_f(u_frozen); Newton starts from ``start`` (default u_frozen)."""
    cfg = cfg or SolverConfig()
    load = cv.assemble_load(spec, u_frozen, params.rule, params.threads)
    u, _ = minimize_frozen(load, params, cfg, u_frozen if start is None else start)
    return u


def weak_residual(u: fem.DiscreteField, spec: cv.ConvectionSpec, params: FluxParams) -> np.ndarray:
    """<A(u), phi_i> - int f(x, u, grad u) phi_i dx over free nodes."""
    return operator_vector(u, params)[params.mesh.free_nodes] - cv.assemble_load(
        spec, u, params.rule, params.threads
    )


@dataclass(eq=False)
class SolverReport:
    converged: bool
    iterations: int
    history: list
    field: fem.DiscreteField
    contraction_factor: float | None
    contraction_ratios: list
    contraction_bound: float | None
    contraction_within_bound: bool | None
    verdict: cv.CertificateVerdict | None
    lambda_2: float | None
    lambda_p: float | None
    poincare_chain_ok: bool | None
    final_residual: float
    inner_iterations: int
    iterates: list = field(default_factory=list, repr=False)

    def as_dict(self) -> dict:
        return {
            "converged": self.converged,
            "outer_iterations": self.iterations,
            "inner_iterations": self.inner_iterations,
            "final_residual": self.final_residual,
            "final_increment": self.history[-1]["increment_norm"] if self.history else None,
            "contraction_factor": self.contraction_factor,
            "contraction_ratios": self.contraction_ratios,
            "contraction_bound": self.contraction_bound,
            "contraction_within_bound": self.contraction_within_bound,
            "lambda_1_2": self.lambda_2,
            "lambda_1_p": self.lambda_p,
            "poincare_chain_ok": self.poincare_chain_ok,
            "certificates": None if self.verdict is None else self.verdict.as_dict(),
            "history": self.history,
            "solution_norms": {
                "l2": lp_norm(self.field, 2),
                "h1_seminorm": lp_norm(self.field, 2, gradient=True),
                "max": float(np.max(np.abs(self.field.values))),
            },
        }


def _contraction(increments):
    incs = [v for v in increments if v > 0]
    ratios = [b / a for a, b in zip(incs[:-1], incs[1:])]
    if len(increments) < 3 or not ratios:
        return None, ratios
    return float(np.exp(np.mean(np.log(ratios)))), ratios


def picard_solve(
    spec: cv.ConvectionSpec,
    params: FluxParams,
    cfg: SolverConfig | None = None,
    *,
    lambda_2: float | None = None,
    lambda_p: float | None = None,
    certify: bool = True,
    audit_budget: int = 0,
    audit_seed: int = 0,
) -> SolverReport:
    """Picard iteration u_{k+1} = solve_frozen(u_k) from the initial guess.

    Stops when ||grad(u_{k+1} - u_k)||_2 <= tol (1 + ||grad u_{k+1}||_2) and the
    full weak-form residual is at most 10 inner tolerances. Non-convergence is
    reported, not raised.
    """
    cfg = cfg or SolverConfig()
    mesh = params.mesh
    if certify:
        if lambda_2 is None:
            lambda_2 = first_eigenvalue(mesh, 2.0).lam
        if lambda_p is None:
            lambda_p = lambda_2 if params.exps.p == 2 else first_eigenvalue(mesh, params.exps.p).lam
    if cfg.initial_guess is None:
        u = fem.DiscreteField.zeros(mesh)
    else:
        u = fem.apply_dirichlet(fem.DiscreteField(mesh, cfg.initial_guess))

    history, iterates, increments = [], [u] if cfg.keep_iterates else [], []
    converged = False
    inner_total = 0
    poincare_ok = True if certify else None
    res_full = float("nan")
    k = 0
    for k in range(1, cfg.outer_max_iter + 1):
        load = cv.assemble_load(spec, u, params.rule, params.threads)
        u_new, info = minimize_frozen(load, params, cfg, u)
        inner_total += info.iterations
        inc = lp_norm(u_new - u, 2, gradient=True)
        gnorm = lp_norm(u_new, 2, gradient=True)
        R = weak_residual(u_new, spec, params)
        res_full = float(np.max(np.abs(R))) if R.size else 0.0
        row = {
            "k": k,
            "increment_norm": inc,
            "residual_norm": res_full,
            "energy": energy(u_new, params),
            "inner_iterations": info.iterations,
        }
        if certify:
            l2sq = lp_norm(u_new, 2) ** 2
            ok = l2sq <= gnorm**2 / lambda_2 * (1 + 1e-10) + 1e-300
            row["poincare_ok"] = bool(ok)
            poincare_ok = poincare_ok and bool(ok)
        history.append(row)
        increments.append(inc)
        u = u_new
        if cfg.keep_iterates:
            iterates.append(u)
        if not np.all(np.isfinite(u.values)):
            break
        if inc <= cfg.outer_tol * (1.0 + gnorm) and res_full <= 10 * cfg.inner_tol:
            converged = True
            break

    factor, ratios = _contraction(increments)
    verdict = bound = within = None
    if certify:
        audit = None
        if audit_budget:
            audit = cv.audit_certificates(spec, params.exps, mesh, audit_budget, audit_seed)
        verdict = cv.certificate_verdict(spec, params.exps, lambda_p, lambda_2, audit, mesh.dim)
        if verdict.uniqueness_condition is not None:
            bound = verdict.uniqueness_condition
            if verdict.uniqueness_ok and factor is not None:
                within = bool(factor <= bound + CONTRACTION_SLACK)
                if not within:
                    log.warning("empirical contraction %.4g exceeds bound %.4g + %.2g", factor, bound, CONTRACTION_SLACK)
    return SolverReport(
        converged=converged,
        iterations=k,
        history=history,
        field=u,
        contraction_factor=factor,
        contraction_ratios=ratios,
        contraction_bound=bound,
        contraction_within_bound=within,
        verdict=verdict,
        lambda_2=lambda_2,
        lambda_p=lambda_p,
        poincare_chain_ok=poincare_ok,
        final_residual=res_full,
        inner_iterations=inner_total,
        iterates=iterates,
    )


def measure_contraction(
    spec: cv.ConvectionSpec,
    params: FluxParams,
    cfg: SolverConfig | None = None,
    trials: int = 5,
    seed: int = 0,
    amplitude: float = 1.0,
) -> dict:
    """Run Picard from ``trials`` random initial guesses and compare the limits.

    Raises :class:`InvariantViolationError` if the uniqueness condition passes
    but two converged limits differ by more than 10 outer tolerances, or if
    the monotone q-term of two successive iterates is negative.
    """
    cfg = cfg or SolverConfig()
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    mesh = params.mesh
    rng = np.random.default_rng(seed)
    lam2 = first_eigenvalue(mesh, 2.0).lam
    lamp = lam2 if params.exps.p == 2 else first_eigenvalue(mesh, params.exps.p).lam
    reports = []
    for _ in range(trials):
        guess = np.zeros(mesh.n_nodes)
        guess[mesh.free_nodes] = rng.uniform(-amplitude, amplitude, mesh.free_nodes.size)
        run_cfg = SolverConfig(**{**cfg.__dict__, "initial_guess": guess, "keep_iterates": True})
        reports.append(picard_solve(spec, params, run_cfg, lambda_2=lam2, lambda_p=lamp))

    verdict = reports[0].verdict
    unique = bool(verdict is not None and verdict.uniqueness_passes)
    conv = [r for r in reports if r.converged]
    gmax = max((lp_norm(r.field, 2, gradient=True) for r in conv), default=0.0)
    threshold = 10 * cfg.outer_tol * (1.0 + gmax)
    dists = [lp_norm(a.field - b.field, 2, gradient=True) for a, b in itertools.combinations(conv, 2)]
    max_dist = max(dists, default=0.0)

    mono_min = np.inf
    for r in reports:
        for a, b in zip(r.iterates[:-1], r.iterates[1:]):
            mono_min = min(mono_min, monotone_term(a, b, params))
    mono_min = float(mono_min) if np.isfinite(mono_min) else None

    stats = {
        "trials": trials,
        "converged": [r.converged for r in reports],
        "outer_iterations": [r.iterations for r in reports],
        "contraction_factors": [r.contraction_factor for r in reports],
        "contraction_bound": reports[0].contraction_bound,
        "uniqueness_passes": unique,
        "max_pairwise_distance": max_dist,
        "distance_threshold": threshold,
        "identical_limits": bool(max_dist <= threshold),
        "monotone_term_min": mono_min,
        "lambda_1_2": lam2,
        "theorem_applicable": params.exps.p == 2,
    }
    if mono_min is not None and mono_min < -1e-12:
        raise InvariantViolationError("monotone q-term is negative for successive iterates", stats)
    if unique and len(conv) > 1 and max_dist > threshold:
        raise InvariantViolationError(
            "distinct limits found although the uniqueness condition holds",
            {"stats": stats, "fields": [r.field.values for r in conv]},
        )
    stats["reports"] = reports
    return stats
