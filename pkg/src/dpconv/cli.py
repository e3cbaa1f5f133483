"""The ``dp`` command-line front end.

Exit codes: 0 success, 1 configuration error, 2 certificate-check failure
(``check``), 3 solver non-convergence or numerical failure. Errors are also
written to standard error as a JSON object.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import convection as cv
from . import fem
from .config import RunConfig, parse_config
from .doublephase import FluxParams
from .eigen import EigenOptions, first_eigenvalue
from .errors import ConfigurationError, DomainError, InvariantViolationError, NumericalError
from .expr import spatial_function
from .mms import mms_study
from .orlicz import (
    PhaseExponents,
    WeightField,
    check_sandwich,
    critical_exponent,
    lp_norm,
    luxemburg_norm,
    modular,
    weighted_seminorm,
)
from .solver import SolverConfig, measure_contraction, picard_solve

EXIT_OK, EXIT_CONFIG, EXIT_CHECK, EXIT_SOLVER = 0, 1, 2, 3
SCHEMA_VERSION = 1
_EXIT_NAMES = {EXIT_CONFIG: "UsageError", EXIT_CHECK: "CertificateCheckFailure", EXIT_SOLVER: "NonConvergence"}


class _Exit(Exception):
    def __init__(self, code, message, extra=None):
        super().__init__(message)
        self.code = code
        self.extra = extra


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors (exit 1), not argparse's 2."""

    def error(self, message):
        raise _Exit(EXIT_CONFIG, f"{self.prog}: {message}")


# --------------------------------------------------------------------------
# serialization


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=2, allow_nan=False) + "\n"


def _versions():
    import scipy
    import sympy

    return {
        "dpconv": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "sympy": sympy.__version__,
    }


def _envelope(command, cfg: RunConfig | None, timestamp: bool, **body):
    rep = {"schema": SCHEMA_VERSION, "command": command, "versions": _versions()}
    if timestamp:
        rep["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    if cfg is not None:
        rep["config"] = cfg.as_dict()
        rep["effective_config"] = cfg.to_text()
    rep.update(body)
    return rep


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if row.get(h) is None else _csv_value(row.get(h)) for h in header])


def _csv_value(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


# --------------------------------------------------------------------------
# problem construction


def build_mesh(cfg: RunConfig) -> fem.Mesh:
    pr = cfg.problem
    if pr["mesh_file"]:
        return fem.read_mesh(cfg.resolve(pr["mesh_file"]))
    return fem.build_uniform_mesh(pr["domain"], pr["resolution"])


def mu_function(text: str):
    text = text.strip()
    if text == "zero":
        return spatial_function("0")
    if text == "one":
        return spatial_function("1")
    return spatial_function(text)


def build_exponents(cfg: RunConfig, mesh: fem.Mesh) -> PhaseExponents:
    pr = cfg.problem
    return PhaseExponents(pr["p"], pr["q"], pr["N"] if pr["N"] is not None else mesh.dim)


def build_spec(cfg: RunConfig, mesh: fem.Mesh) -> cv.ConvectionSpec:
    pr = cfg.problem
    kind, p = pr["f"], pr["p"]
    if kind == "zero":
        return cv.zero()
    if kind == "example1":
        return cv.example1(pr["d1"], pr["d2"], pr["q1"] if pr["q1"] is not None else p, p)
    if kind in ("example2", "linear_gradient"):
        if len(pr["beta"]) != mesh.dim:
            raise ConfigurationError(f"problem.beta has {len(pr['beta'])} components, mesh dimension is {mesh.dim}")
        if kind == "example2":
            return cv.example2(pr["beta"], pr["rho"], pr["q1"], p, mesh)
        return cv.linear_gradient(pr["beta"], pr["rho"], pr["gamma"], pr["q1"], p, mesh)
    return cv.custom(pr["expression"], **_declared_certificates(pr))


def _declared_certificates(pr) -> dict:
    groups = {
        "growth": ("a1", "a2", "alpha_hat"),
        "sign": ("b1", "b2", "omega_hat"),
        "lipschitz": ("c1",),
        "linear_gradient": ("c2",),
    }
    out = {}
    for name, keys in groups.items():
        given = [pr[k] is not None for k in keys]
        if any(given) and not all(given):
            raise ConfigurationError(f"{name} certificate needs all of {', '.join(keys)}")
        if not all(given):
            continue
        if name == "growth":
            out[name] = cv.GrowthCertificate(pr["a1"], pr["a2"], pr["alpha_hat"], pr["q1"] or pr["p"])
        elif name == "sign":
            out[name] = cv.SignCertificate(pr["b1"], pr["b2"], pr["omega_hat"])
        elif name == "lipschitz":
            out[name] = cv.LipschitzCertificate(pr["c1"])
        else:
            out[name] = cv.LinearGradientCertificate(pr["c2"], spatial_function(pr["rho"]), pr["r_prime"])
    return out


def build_params(cfg: RunConfig, mesh: fem.Mesh) -> FluxParams:
    so = cfg.solver
    exps = build_exponents(cfg, mesh)
    mu = WeightField.from_function(mesh, mu_function(cfg.problem["mu"]))
    rule = fem.quadrature_rule(mesh.dim, so["quadrature_degree"])
    return FluxParams(exps, mu, so["eps"], so["threads"], rule)


def build_solver_config(cfg: RunConfig, mesh: fem.Mesh) -> SolverConfig:
    so = cfg.solver
    guess = None
    ig = so["initial_guess"]
    if ig == "random":
        rng = np.random.default_rng(so["seed"])
        guess = np.zeros(mesh.n_nodes)
        guess[mesh.free_nodes] = rng.uniform(-so["initial_amplitude"], so["initial_amplitude"], mesh.free_nodes.size)
    elif ig != "zero":
        guess = fem.read_field(cfg.resolve(ig), mesh)
    return SolverConfig(
        outer_tol=so["outer_tol"],
        outer_max_iter=so["outer_max_iter"],
        inner_tol=so["inner_tol"],
        inner_max_iter=so["inner_max_iter"],
        armijo=so["armijo"],
        backtrack=so["backtrack"],
        initial_guess=guess,
        eps_schedule=None if so["eps_schedule"] is None else tuple(so["eps_schedule"]),
    )


def _eigen_opts(cfg: RunConfig) -> EigenOptions:
    return EigenOptions(tol=cfg.solver["eig_tol"], max_iter=cfg.solver["eig_max_iter"])


def _lambdas(mesh, exps, opts):
    lam2 = first_eigenvalue(mesh, 2.0, opts).lam
    lamp = lam2 if exps.p == 2.0 else first_eigenvalue(mesh, exps.p, opts).lam
    return lam2, lamp


def _lambda_block(lam2, lamp, exps):
    return {
        "lambda_1_2": lam2,
        "lambda_1_p": lamp,
        "p": exps.p,
        "deflation": cv.SAFETY_DEFLATION,
        "lambda_1_2_deflated": cv.SAFETY_DEFLATION * lam2,
        "lambda_1_p_deflated": cv.SAFETY_DEFLATION * lamp,
    }


def _out_dir(cfg: RunConfig) -> Path:
    d = cfg.resolve(cfg.output["dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


# --------------------------------------------------------------------------
# subcommands


def cmd_solve(cfg: RunConfig, ts: bool):
    mesh = build_mesh(cfg)
    params = build_params(cfg, mesh)
    spec = build_spec(cfg, mesh)
    scfg = build_solver_config(cfg, mesh)
    lam2, lamp = _lambdas(mesh, params.exps, _eigen_opts(cfg))
    out = _out_dir(cfg)
    error = None
    try:
        rep = picard_solve(
            spec,
            params,
            scfg,
            lambda_2=lam2,
            lambda_p=lamp,
            audit_budget=cfg.solver["audit_budget"],
            audit_seed=cfg.solver["seed"],
        )
        result = rep.as_dict()
        field = rep.field.values
        history = rep.history
    except NumericalError as exc:
        error = {"type": type(exc).__name__, "message": str(exc)}
        result = {"converged": False, "error": error}
        field, history = None, []
    report = _envelope(
        "solve",
        cfg,
        ts,
        mesh=mesh.stats(),
        nonlinearity={"name": spec.name, "params": spec.params, "certificates": spec.certificates()},
        **{"lambda": _lambda_block(lam2, lamp, params.exps)},
        result=result,
    )
    (out / cfg.output["report"]).write_text(dumps(report))
    _write_csv(
        out / cfg.output["history"], ["k", "increment_norm", "residual_norm", "energy", "inner_iterations"], history
    )
    if field is not None:
        fem.write_field(field, out / cfg.output["field"])
    sys.stdout.write(dumps(report))
    if error is not None:
        raise _Exit(EXIT_SOLVER, error["message"], {"report": str(out / cfg.output["report"])})
    if not result["converged"]:
        raise _Exit(EXIT_SOLVER, f"Picard iteration did not converge in {result['outer_iterations']} iterations")
    return EXIT_OK


def _margins(verdict: cv.CertificateVerdict):
    m = {}
    if verdict.existence_condition is not None:
        m["existence"] = 1.0 - verdict.existence_condition
    if verdict.uniqueness_condition is not None:
        m["uniqueness"] = 1.0 - verdict.uniqueness_condition
    for key, res in (verdict.audit or {}).items():
        m[f"audit_{key}"] = res.worst_margin
    return m


def cmd_check(cfg: RunConfig, ts: bool):
    mesh = build_mesh(cfg)
    exps = build_exponents(cfg, mesh)
    spec = build_spec(cfg, mesh)
    lam2, lamp = _lambdas(mesh, exps, _eigen_opts(cfg))
    audit = None
    if cfg.solver["audit_budget"]:
        audit = cv.audit_certificates(spec, exps, mesh, cfg.solver["audit_budget"], cfg.solver["seed"])
    verdict = cv.certificate_verdict(spec, exps, lamp, lam2, audit, mesh.dim)

    failures = [k for k, res in (audit or {}).items() if not res.passed]
    if spec.sign is None:
        failures.append("existence (no sign certificate declared)")
    elif not verdict.existence_ok:
        failures.append("existence condition")
    if verdict.uniqueness_condition is not None and not verdict.uniqueness_condition < 1.0:
        failures.append("uniqueness condition")
    bounds = {}
    if spec.name == "example1":
        bounds["d2_bound"] = cv.example1_d2_bound(exps.p, lamp)
        bounds["d2_bound_deflated"] = cv.example1_d2_bound(exps.p, cv.SAFETY_DEFLATION * lamp)
        bounds["d2"] = spec.params["d2"]
    if spec.name == "example2":
        bounds["beta_sq_bound"] = cv.example2_beta_bound(lam2)
        bounds["beta_sq_bound_deflated"] = cv.example2_beta_bound(cv.SAFETY_DEFLATION * lam2)
        bounds["beta_sq"] = float(np.sum(np.square(spec.params["beta"])))
    report = _envelope(
        "check",
        cfg,
        ts,
        mesh=mesh.stats(),
        nonlinearity={"name": spec.name, "params": spec.params, "certificates": spec.certificates()},
        **{"lambda": _lambda_block(lam2, lamp, exps)},
        verdict="pass" if not failures else "fail",
        failures=failures,
        margins=_margins(verdict),
        bounds=bounds,
        certificates=verdict.as_dict(),
    )
    out = _out_dir(cfg)
    (out / cfg.output["report"]).write_text(dumps(report))
    sys.stdout.write(dumps(report))
    if failures:
        raise _Exit(EXIT_CHECK, f"certificate check failed: {', '.join(failures)}")
    return EXIT_OK


def cmd_mms(cfg: RunConfig, ts: bool):
    pr, so = cfg.problem, cfg.solver
    if pr["mesh_file"]:
        raise ConfigurationError("mms runs on uniform refinements of problem.domain; unset problem.mesh_file")
    mesh = fem.build_uniform_mesh(pr["domain"], so["base_resolution"])
    exps = build_exponents(cfg, mesh)
    spec = None if pr["f"] == "zero" else build_spec(cfg, mesh)
    mu = {"zero": "0", "one": "1"}.get(pr["mu"].strip(), pr["mu"])
    table = mms_study(
        pr["u_star"],
        exps,
        mu,
        spec,
        levels=so["levels"],
        base_resolution=so["base_resolution"],
        domain=pr["domain"],
        cfg=build_solver_config(cfg, mesh),
        eps=so["eps"],
        threads=so["threads"],
    )
    report = _envelope("mms", cfg, ts, result=table)
    out = _out_dir(cfg)
    (out / cfg.output["report"]).write_text(dumps(report))
    _write_csv(
        out / "mms.csv",
        ["level", "resolution", "h", "l2_error", "h1_error", "l2_rate", "h1_rate", "outer_iterations"],
        table["levels"],
    )
    sys.stdout.write(dumps(report))
    if not all(row["converged"] for row in table["levels"]):
        raise _Exit(EXIT_SOLVER, "a refinement level did not converge")
    return EXIT_OK


def cmd_contraction(cfg: RunConfig, ts: bool):
    so = cfg.solver
    mesh = build_mesh(cfg)
    params = build_params(cfg, mesh)
    spec = build_spec(cfg, mesh)
    scfg = build_solver_config(cfg, mesh)
    stats = measure_contraction(spec, params, scfg, so["trials"], so["seed"], so["initial_amplitude"])
    reports = stats.pop("reports")
    rows = [
        {
            "trial": i,
            "converged": r.converged,
            "outer_iterations": r.iterations,
            "contraction_factor": r.contraction_factor,
            "final_residual": r.final_residual,
        }
        for i, r in enumerate(reports)
    ]
    verdict = reports[0].verdict
    report = _envelope(
        "contraction",
        cfg,
        ts,
        mesh=mesh.stats(),
        nonlinearity={"name": spec.name, "params": spec.params, "certificates": spec.certificates()},
        result=stats,
        margins=_margins(verdict) if verdict is not None else {},
        trials=rows,
    )
    out = _out_dir(cfg)
    (out / cfg.output["report"]).write_text(dumps(report))
    _write_csv(out / "contraction.csv", list(rows[0]), rows)
    sys.stdout.write(dumps(report))
    if not all(stats["converged"]):
        raise _Exit(EXIT_SOLVER, "not every trial converged")
    return EXIT_OK


def cmd_eig(args, cfg: RunConfig | None, ts: bool):
    if args.mesh:
        mesh = fem.read_mesh(args.mesh)
    elif args.domain or args.resolution or cfg is None:
        domain = [float(v) for v in (args.domain or "0 1").replace(",", " ").split()]
        mesh = fem.build_uniform_mesh(domain, args.resolution or 32)
    else:
        mesh = build_mesh(cfg)
    so = cfg.solver if cfg is not None else {}
    r = args.r if args.r is not None else so.get("r", 2.0)
    opts = EigenOptions(
        tol=args.tol if args.tol is not None else so.get("eig_tol", 1e-12),
        max_iter=args.max_iter if args.max_iter is not None else so.get("eig_max_iter", 10_000),
    )
    res = first_eigenvalue(mesh, r, opts)
    if args.field_out:
        fem.write_field(res.eigenfunction.values, args.field_out)
    report = _envelope("eig", cfg, ts, mesh=mesh.stats(), result=res.as_dict())
    sys.stdout.write(dumps(report))
    return EXIT_OK


def cmd_norms(args, ts: bool):
    for name in ("mesh", "field", "p", "q"):
        if getattr(args, name) is None:
            raise ConfigurationError(f"dp norms requires --{name}")
    mesh = fem.read_mesh(args.mesh)
    vals = fem.read_field(args.field, mesh)
    u = fem.DiscreteField(mesh, vals)
    exps = PhaseExponents(args.p, args.q, args.N if args.N is not None else mesh.dim)
    mu = WeightField.from_function(mesh, mu_function(args.mu))
    try:
        pstar = critical_exponent(exps)
    except DomainError:
        pstar = None

    def block(gradient):
        sw = check_sandwich(u, mu, exps, gradient=gradient)
        return {
            "modular": modular(u, mu, exps, gradient=gradient),
            "luxemburg": luxemburg_norm(u, mu, exps, gradient=gradient),
            "lp_norm": lp_norm(u, exps.p, gradient=gradient),
            "seminorm_q_mu": weighted_seminorm(u, mu, exps.q, gradient=gradient),
            "sandwich": sw.as_dict(),
        }

    report = _envelope(
        "norms",
        None,
        ts,
        mesh=mesh.stats(),
        p=exps.p,
        q=exps.q,
        N=exps.N,
        mu=args.mu,
        critical_exponent=pstar,
        flags=exps.flags(),
        function=block(False),
        gradient=block(True),
        sandwich_holds=None,
    )
    report["sandwich_holds"] = report["function"]["sandwich"]["holds"] and report["gradient"]["sandwich"]["holds"]
    sys.stdout.write(dumps(report))
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point


def _parse_sets(items):
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"--set expects section.key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="dp", description="Double-phase problems with convection: solver and certificate checks.")
    ap.add_argument("--version", action="version", version=f"dp {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config_required):
        if config_required:
            sp.add_argument("config", help="configuration file ([problem], [solver], [output])")
        else:
            sp.add_argument("--config", help="optional configuration file")
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config key")
        sp.add_argument("--threads", type=int, help="shorthand for --set solver.threads=N")
        sp.add_argument("--seed", type=int, help="shorthand for --set solver.seed=N")
        sp.add_argument("--out", help="shorthand for --set output.dir=DIR")
        sp.add_argument("--no-timestamp", action="store_true", help="omit the timestamp for reproducible reports")

    for name, text in (
        ("solve", "solve the problem by Picard iteration"),
        ("check", "audit certificates and evaluate the existence/uniqueness conditions"),
        ("mms", "manufactured-solution convergence study"),
        ("contraction", "compare Picard limits from random initial guesses"),
    ):
        common(sub.add_parser(name, help=text, description=text), True)

    sp = sub.add_parser("eig", help="first eigenvalue of the r-Laplacian")
    common(sp, False)
    sp.add_argument("--mesh", help="mesh file")
    sp.add_argument("--domain", help="box, e.g. '0 1' or '0 1 0 1'")
    sp.add_argument("--resolution", type=int)
    sp.add_argument("--r", type=float)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--max-iter", type=int)
    sp.add_argument("--field-out", help="write the normalized eigenfunction here")

    sp = sub.add_parser("norms", help="Musielak-Orlicz norms of a nodal field")
    sp.add_argument("--mesh", help="mesh file (dim/nodes/elements/boundary format)")
    sp.add_argument("--field", help="nodal field file, one value per node")
    sp.add_argument("--mu", default="zero", help="zero | one | expression in x, y")
    sp.add_argument("--p", type=float, help="lower exponent p > 1")
    sp.add_argument("--q", type=float, help="upper exponent q > p")
    sp.add_argument("--N", type=int, help="space dimension for p* (default: mesh dimension)")
    sp.add_argument("--no-timestamp", action="store_true")
    return ap


def _load_config(args) -> RunConfig | None:
    path = getattr(args, "config", None)
    if path is None:
        return None
    overrides = _parse_sets(args.set)
    if args.threads is not None:
        overrides["solver.threads"] = str(args.threads)
    if args.seed is not None:
        overrides["solver.seed"] = str(args.seed)
    if args.out is not None:
        overrides["output.dir"] = str(Path(args.out).resolve())
    return parse_config(path, overrides)


def _fail(code, exc_type, message, extra=None):
    err = {"error": {"type": exc_type, "message": message, "exit_code": code}}
    if extra:
        err["error"]["details"] = extra
    sys.stderr.write(dumps(err))
    return code


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "norms":
            return cmd_norms(args, not args.no_timestamp)
        cfg = _load_config(args)
        ts = not args.no_timestamp and (cfg is None or cfg.output["timestamp"])
        if args.command == "eig":
            return cmd_eig(args, cfg, ts)
        return {"solve": cmd_solve, "check": cmd_check, "mms": cmd_mms, "contraction": cmd_contraction}[
            args.command
        ](cfg, ts)
    except _Exit as exc:
        return _fail(exc.code, _EXIT_NAMES[exc.code], str(exc), exc.extra)
    except (ConfigurationError, DomainError, FileNotFoundError) as exc:
        return _fail(EXIT_CONFIG, type(exc).__name__, str(exc))
    except InvariantViolationError as exc:
        return _fail(EXIT_SOLVER, type(exc).__name__, str(exc))
    except (NumericalError, ArithmeticError) as exc:
        return _fail(EXIT_SOLVER, type(exc).__name__, str(exc), getattr(exc, "diagnostics", None))


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
