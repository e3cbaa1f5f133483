"""Safe compilation of arithmetic expressions to vectorized numpy callables.

Only numeric literals, whitelisted names, + - * / ** (and unary +/-), and calls
to a fixed set of numpy functions are accepted.
"""

from __future__ import annotations

import ast
from typing import Iterable

import numpy as np

from .errors import ConfigurationError

_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "arctan": np.arctan,
    "sign": np.sign,
    "min": np.minimum,
    "max": np.maximum,
}
_CONSTS = {"pi": np.pi, "e": np.e}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class Expression:
    """A compiled expression; call with keyword arrays for its variables."""

    def __init__(self, source: str, variables: Iterable[str]):
        self.source = str(source).strip()
        self.variables = tuple(variables)
        try:
            tree = ast.parse(self.source, mode="eval")
        except SyntaxError as exc:
            raise ConfigurationError(f"cannot parse expression {self.source!r}: {exc.msg}") from None
        self._check(tree.body)
        self._tree = tree.body

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ConfigurationError(f"unsupported literal in {self.source!r}")
        elif isinstance(node, ast.Name):
            if node.id not in self.variables and node.id not in _CONSTS:
                allowed = ", ".join(self.variables + tuple(_CONSTS))
                raise ConfigurationError(f"unknown name {node.id!r} in {self.source!r} (allowed: {allowed})")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ConfigurationError(f"unsupported operator in {self.source!r}")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise ConfigurationError(f"unsupported operator in {self.source!r}")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS or node.keywords:
                raise ConfigurationError(f"unsupported call in {self.source!r}; functions: {', '.join(_FUNCS)}")
            for a in node.args:
                self._check(a)
        else:
            raise ConfigurationError(f"unsupported syntax {type(node).__name__} in {self.source!r}")

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else _CONSTS[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        return _FUNCS[node.func.id](*(self._eval(a, env) for a in node.args))

    def __call__(self, **env):
        missing = [v for v in self.variables if v not in env]
        if missing:
            raise ConfigurationError(f"missing variables {missing} for {self.source!r}")
        arrays = [np.asarray(env[v], dtype=float) for v in self.variables]
        shape = np.broadcast_shapes(*(a.shape for a in arrays)) if arrays else ()
        with np.errstate(all="ignore"):
            out = self._eval(self._tree, dict(zip(self.variables, arrays)))
        return np.broadcast_to(np.asarray(out, dtype=float), shape)

    def __repr__(self):
        return f"Expression({self.source!r})"


def spatial_function(source: str):
    """Compile an expression in x (and y) into ``fn(points)`` with points of shape (..., d)."""
    ex = Expression(source, ("x", "y"))

    def fn(pts):
        pts = np.asarray(pts, dtype=float)
        x = pts[..., 0]
        y = pts[..., 1] if pts.shape[-1] > 1 else np.zeros_like(x)
        return ex(x=x, y=y)

    fn.source = ex.source
    return fn
