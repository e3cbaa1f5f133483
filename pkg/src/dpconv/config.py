"""Run configuration: sectioned ``key = value`` files (INI syntax).

Sections are ``[problem]``, ``[solver]`` and ``[output]``. Every key has a
type and a default; unknown keys are rejected with a suggestion. The
effective configuration (defaults filled in) serializes back to the same
format and reparses to an identical :class:`RunConfig`.
"""

from __future__ import annotations

import configparser
import difflib
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError

__all__ = ["RunConfig", "parse_config", "parse_config_text", "SCHEMA"]

REQUIRED = object()


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(t) for t in str(text).replace(",", " ").split()]


def _opt_str(text):
    text = str(text).strip()
    return text or None


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_floats(text):
    vals = _floats(text) if str(text).strip() else []
    return vals or None


def _opt_float(text):
    text = str(text).strip()
    return float(text) if text else None


def _opt_int(text):
    text = str(text).strip()
    return int(text) if text else None


# key -> (parser, default)
SCHEMA = {
    "problem": {
        "domain": (_floats, [0.0, 1.0]),
        "resolution": (int, 32),
        "mesh_file": (_opt_str, None),
        "p": (float, REQUIRED),
        "q": (float, REQUIRED),
        "N": (_opt_int, None),
        "mu": (str, "one"),
        "f": (str, "zero"),
        "d1": (float, 0.0),
        "d2": (float, 0.0),
        "q1": (_opt_float, None),
        "beta": (_opt_floats, None),
        "gamma": (float, 0.0),
        "rho": (str, "0"),
        "expression": (_opt_str, None),
        "a1": (_opt_float, None),
        "a2": (_opt_float, None),
        "alpha_hat": (_opt_float, None),
        "b1": (_opt_float, None),
        "b2": (_opt_float, None),
        "omega_hat": (_opt_float, None),
        "c1": (_opt_float, None),
        "c2": (_opt_float, None),
        "r_prime": (float, 2.0),
        "u_star": (str, "sin(pi*x)"),
    },
    "solver": {
        "outer_tol": (float, 1e-8),
        "outer_max_iter": (int, 100),
        "inner_tol": (float, 1e-11),
        "inner_max_iter": (int, 50),
        "armijo": (float, 1e-4),
        "backtrack": (float, 0.5),
        "eps": (float, 1e-10),
        "eps_schedule": (_opt_floats, None),
        "quadrature_degree": (int, 4),
        "initial_guess": (str, "zero"),
        "initial_amplitude": (float, 1.0),
        "seed": (int, 0),
        "threads": (int, 1),
        "audit_budget": (int, 100_000),
        "trials": (int, 5),
        "levels": (int, 4),
        "base_resolution": (int, 8),
        "r": (float, 2.0),
        "eig_tol": (float, 1e-12),
        "eig_max_iter": (int, 10_000),
    },
    "output": {
        "dir": (str, "."),
        "report": (str, "report.json"),
        "history": (str, "history.csv"),
        "field": (str, "solution.field"),
        "timestamp": (_bool, True),
    },
}

F_CHOICES = ("zero", "example1", "example2", "linear_gradient", "expression")


def _format(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return " ".join(_format(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    problem: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    base_dir: str = field(default=".", compare=False)

    def as_dict(self) -> dict:
        return {"problem": dict(self.problem), "solver": dict(self.solver), "output": dict(self.output)}

    def to_text(self) -> str:
        lines = []
        for sec in SCHEMA:
            lines.append(f"[{sec}]")
            for key, value in getattr(self, sec).items():
                lines.append(f"{key} = {_format(value)}")
            lines.append("")
        return "\n".join(lines)

    def resolve(self, path: str | None) -> Path | None:
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p


def _suggest(key, options):
    close = difflib.get_close_matches(key, list(options), n=1, cutoff=0.5)
    return f" (did you mean {close[0]!r}?)" if close else ""


def parse_config_text(text: str, overrides: dict | None = None, base_dir: str = ".") -> RunConfig:
    """Parse and validate configuration text; ``overrides`` maps 'section.key' to a string."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed configuration: {exc}") from None
    raw = {sec: {} for sec in SCHEMA}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigurationError(f"unknown section [{sec}]{_suggest(sec, SCHEMA)}")
        for key, value in cp.items(sec):
            raw[sec][key] = value
    for dotted, value in (overrides or {}).items():
        sec, _, key = dotted.partition(".")
        if sec not in SCHEMA or not key:
            raise ConfigurationError(f"override {dotted!r} must look like section.key{_suggest(sec, SCHEMA)}")
        raw[sec][key] = value

    sections = {}
    for sec, keys in SCHEMA.items():
        out = {}
        for key in raw[sec]:
            if key not in keys:
                raise ConfigurationError(f"unknown key {key!r} in [{sec}]{_suggest(key, keys)}")
        for key, (conv, default) in keys.items():
            if key in raw[sec]:
                try:
                    out[key] = conv(raw[sec][key])
                except (TypeError, ValueError) as exc:
                    raise ConfigurationError(f"invalid value for {sec}.{key}: {raw[sec][key]!r} ({exc})") from None
            elif default is REQUIRED:
                raise ConfigurationError(f"missing required key {sec}.{key}")
            else:
                out[key] = list(default) if isinstance(default, list) else default
        sections[sec] = out
    cfg = RunConfig(sections["problem"], sections["solver"], sections["output"], str(base_dir))
    _validate(cfg)
    return cfg


def parse_config(path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config_text(text, overrides, str(path.parent))


def _validate(cfg: RunConfig):
    pr, so = cfg.problem, cfg.solver
    p, q = pr["p"], pr["q"]
    if not (p > 1 and q > p):
        raise ConfigurationError(f"exponents must satisfy 1 < p < q, got p={p}, q={q}")
    if len(pr["domain"]) not in (2, 4):
        raise ConfigurationError("problem.domain needs 2 (interval) or 4 (rectangle) numbers")
    if pr["resolution"] < 1:
        raise ConfigurationError("problem.resolution must be >= 1")
    if pr["N"] is not None and pr["N"] < 1:
        raise ConfigurationError("problem.N must be >= 1")
    if pr["f"] not in F_CHOICES:
        raise ConfigurationError(f"problem.f must be one of {F_CHOICES}{_suggest(pr['f'], F_CHOICES)}")
    if pr["f"] == "expression" and not pr["expression"]:
        raise ConfigurationError("problem.f = expression requires problem.expression")
    if pr["f"] in ("example2", "linear_gradient") and not pr["beta"]:
        raise ConfigurationError(f"problem.f = {pr['f']} requires problem.beta")
    declared = [k for k in ("a1", "a2", "alpha_hat", "b1", "b2", "omega_hat", "c1", "c2") if pr[k] is not None]
    if declared and pr["f"] != "expression":
        raise ConfigurationError(
            f"certificate keys {declared} are derived automatically for f = {pr['f']}; declare them only for expressions"
        )
    if pr["mesh_file"] is not None and not cfg.resolve(pr["mesh_file"]).is_file():
        raise ConfigurationError(f"problem.mesh_file not found: {pr['mesh_file']}")
    for key in ("outer_tol", "inner_tol", "eig_tol"):
        if not so[key] > 0:
            raise ConfigurationError(f"solver.{key} must be > 0")
    for key in ("outer_max_iter", "inner_max_iter", "threads", "trials", "levels", "base_resolution", "eig_max_iter"):
        if so[key] < 1:
            raise ConfigurationError(f"solver.{key} must be >= 1")
    if so["eps"] < 0:
        raise ConfigurationError("solver.eps must be >= 0")
    if so["audit_budget"] < 0:
        raise ConfigurationError("solver.audit_budget must be >= 0")
    ig = so["initial_guess"]
    if ig not in ("zero", "random") and not cfg.resolve(ig).is_file():
        raise ConfigurationError(f"solver.initial_guess must be 'zero', 'random' or an existing field file, got {ig!r}")
