"""P1 finite elements on simplicial meshes (intervals and triangles).

Meshes are immutable. Element-wise work is expressed as vectorized numpy
kernels over blocks of elements; :func:`map_elements` optionally spreads those
blocks over threads and concatenates the per-element results in element order,
so every reduction afterwards sees the same operands regardless of the thread
count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError

__all__ = [
    "Mesh",
    "DiscreteField",
    "QuadratureRule",
    "build_uniform_mesh",
    "refine",
    "quadrature_rule",
    "gradient_on_element",
    "integrate",
    "apply_dirichlet",
    "interpolate",
    "map_elements",
    "assemble_vector",
    "assemble_matrix",
    "stiffness_matrix",
    "mass_matrix",
    "read_mesh",
    "write_mesh",
    "read_field",
    "write_field",
]

DEFAULT_DEGREE = 4


def _readonly(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming simplicial mesh in 1D or 2D.

    Attributes
    ----------
    points : (n, d) float array
    cells : (m, d+1) int array, 0-based node indices
    boundary : sorted int array of Dirichlet (boundary) node indices
    volumes : (m,) element lengths/areas, derived
    basis_grads : (m, d+1, d) constant gradients of the barycentric basis, derived
    """

    points: np.ndarray
    cells: np.ndarray
    boundary: np.ndarray
    volumes: np.ndarray = field(init=False, repr=False)
    basis_grads: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] not in (1, 2):
            raise ConfigurationError(f"mesh dimension must be 1 or 2, got points of shape {pts.shape}")
        d = pts.shape[1]
        cells = np.asarray(self.cells, dtype=np.int64)
        if cells.ndim != 2 or cells.shape[1] != d + 1 or len(cells) == 0:
            raise ConfigurationError(f"cells must have shape (m, {d + 1}) with m >= 1")
        n = len(pts)
        if cells.min() < 0 or cells.max() >= n:
            raise ConfigurationError("element connectivity index out of range")
        bnd = np.unique(np.asarray(self.boundary, dtype=np.int64).ravel())
        if bnd.size and (bnd[0] < 0 or bnd[-1] >= n):
            raise ConfigurationError("boundary node index out of range")

        x0 = pts[cells[:, 0]]
        if d == 1:
            h = pts[cells[:, 1], 0] - x0[:, 0]
            vol = np.abs(h)
            with np.errstate(divide="ignore"):
                g1 = 1.0 / h
            grads = np.stack([-g1, g1], axis=1)[:, :, None]
        else:
            e1 = pts[cells[:, 1]] - x0
            e2 = pts[cells[:, 2]] - x0
            det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
            vol = 0.5 * np.abs(det)
            with np.errstate(divide="ignore", invalid="ignore"):
                # rows of inv([e1 e2]) are the gradients of lambda_1, lambda_2
                g1 = np.stack([e2[:, 1], -e2[:, 0]], axis=1) / det[:, None]
                g2 = np.stack([-e1[:, 1], e1[:, 0]], axis=1) / det[:, None]
                grads = np.stack([-(g1 + g2), g1, g2], axis=1)
        if not np.all(vol > 0):
            bad = int(np.flatnonzero(~(vol > 0))[0])
            raise ConfigurationError(f"element {bad} is degenerate (non-positive volume)")
        if d == 1:
            lo = np.minimum(pts[cells[:, 0], 0], pts[cells[:, 1], 0])
            hi = np.maximum(pts[cells[:, 0], 0], pts[cells[:, 1], 0])
            order = np.argsort(lo, kind="stable")
            if np.any(hi[order][:-1] != lo[order][1:]):
                raise ConfigurationError("1D elements must partition the interval without gaps or overlap")

        object.__setattr__(self, "points", _readonly(pts, float))
        object.__setattr__(self, "cells", _readonly(cells, np.int64))
        object.__setattr__(self, "boundary", _readonly(bnd, np.int64))
        object.__setattr__(self, "volumes", _readonly(vol, float))
        object.__setattr__(self, "basis_grads", _readonly(grads, float))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_nodes(self) -> int:
        return len(self.points)

    @property
    def n_elements(self) -> int:
        return len(self.cells)

    @property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.boundary] = True
        return mask

    @property
    def free_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    @property
    def measure(self) -> float:
        return float(np.sum(self.volumes))

    @property
    def h(self) -> float:
        """Largest element diameter."""
        if self.dim == 1:
            return float(self.volumes.max())
        p = self.points[self.cells]
        edges = [p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]]
        return float(max(np.linalg.norm(e, axis=1).max() for e in edges))

    def stats(self) -> dict:
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return {
            "dim": self.dim,
            "nodes": self.n_nodes,
            "elements": self.n_elements,
            "boundary_nodes": int(self.boundary.size),
            "free_nodes": int(self.n_nodes - self.boundary.size),
            "h": self.h,
            "measure": self.measure,
            "bounding_box": [float(v) for pair in zip(lo, hi) for v in pair],
        }


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference simplex.

    ``points`` are barycentric coordinates of shape (nq, d+1); ``weights`` sum
    to the reference volume (1 for the unit interval, 1/2 for the unit
    triangle).
    """

    dim: int
    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def reference_volume(self) -> float:
        return 1.0 / math.factorial(self.dim)

    @property
    def scaled_weights(self) -> np.ndarray:
        """Weights normalized to sum to one (multiply by element volume)."""
        return self.weights / self.reference_volume


@lru_cache(maxsize=None)
def quadrature_rule(dim: int, degree: int = DEFAULT_DEGREE) -> QuadratureRule:
    """Gauss rule exact for polynomials of total degree ``degree``.

    1D uses Gauss-Legendre. 2D uses the collapsed (Duffy) tensor product of
    Gauss-Legendre rules, which keeps all weights positive at every degree.
    """
    if dim not in (1, 2):
        raise ConfigurationError(f"quadrature dimension must be 1 or 2, got {dim}")
    if degree < 0:
        raise ConfigurationError("quadrature degree must be nonnegative")
    if dim == 1:
        n = max(1, math.ceil((degree + 1) / 2))
        t, w = np.polynomial.legendre.leggauss(n)
        t = 0.5 * (t + 1.0)
        bary = np.stack([1.0 - t, t], axis=1)
        wts = 0.5 * w
    else:
        n = max(1, math.ceil((degree + 2) / 2))
        t, w = np.polynomial.legendre.leggauss(n)
        t = 0.5 * (t + 1.0)
        w = 0.5 * w
        u, v = np.meshgrid(t, t, indexing="ij")
        wu, wv = np.meshgrid(w, w, indexing="ij")
        x = u.ravel()
        y = (v * (1.0 - u)).ravel()
        bary = np.stack([1.0 - x - y, x, y], axis=1)
        wts = (wu * wv * (1.0 - u)).ravel()
    bary.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(dim, bary, wts, degree)


def _rule_for(mesh: Mesh, rule: QuadratureRule | None) -> QuadratureRule:
    if rule is None:
        return quadrature_rule(mesh.dim)
    if rule.dim != mesh.dim:
        raise ConfigurationError(f"quadrature rule is {rule.dim}D but mesh is {mesh.dim}D")
    return rule


@dataclass(frozen=True, eq=False)
class DiscreteField:
    """Nodal coefficients of a continuous piecewise-linear function."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True).ravel()
        if vals.size != self.mesh.n_nodes:
            raise ConfigurationError(
                f"field has {vals.size} coefficients but mesh has {self.mesh.n_nodes} nodes"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, mesh: Mesh) -> "DiscreteField":
        return cls(mesh, np.zeros(mesh.n_nodes))

    @classmethod
    def from_free(cls, mesh: Mesh, free_values) -> "DiscreteField":
        vals = np.zeros(mesh.n_nodes)
        vals[mesh.free_nodes] = free_values
        return cls(mesh, vals)

    @property
    def mask(self) -> np.ndarray:
        return self.mesh.boundary_mask

    @property
    def free_values(self) -> np.ndarray:
        return self.values[self.mesh.free_nodes]

    def is_zero_trace(self) -> bool:
        return bool(np.all(self.values[self.mesh.boundary] == 0.0))

    def gradients(self) -> np.ndarray:
        """Elementwise constant gradients, shape (m, d)."""
        return _element_gradients(self.mesh, self.values)

    def at_quadrature(self, rule: QuadratureRule | None = None) -> np.ndarray:
        """Values at the quadrature points of every element, shape (m, nq)."""
        rule = _rule_for(self.mesh, rule)
        return self.values[self.mesh.cells] @ rule.points.T

    def with_values(self, values) -> "DiscreteField":
        return DiscreteField(self.mesh, values)

    def __add__(self, other):
        return self.with_values(self.values + _vals(other))

    def __sub__(self, other):
        return self.with_values(self.values - _vals(other))

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self.with_values(self.values / c)

    def __neg__(self):
        return self.with_values(-self.values)


def _vals(x):
    return x.values if isinstance(x, DiscreteField) else np.asarray(x, dtype=float)


def _element_gradients(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    return np.einsum("mid,mi->md", mesh.basis_grads, values[mesh.cells])


def quadrature_points(mesh: Mesh, rule: QuadratureRule | None = None) -> np.ndarray:
    """Physical coordinates of all quadrature points, shape (m, nq, d)."""
    rule = _rule_for(mesh, rule)
    return np.einsum("qi,mid->mqd", rule.points, mesh.points[mesh.cells])


def quadrature_weights(mesh: Mesh, rule: QuadratureRule | None = None) -> np.ndarray:
    """Physical quadrature weights, shape (m, nq); they sum to the mesh measure."""
    rule = _rule_for(mesh, rule)
    return mesh.volumes[:, None] * rule.scaled_weights[None, :]


# --------------------------------------------------------------------------
# Construction


def _box(domain, dim=None):
    box = np.asarray(domain, dtype=float).ravel()
    if box.size not in (2, 4):
        raise ConfigurationError("domain box must be (x0, x1) or (x0, x1, y0, y1)")
    if dim is not None and box.size != 2 * dim:
        raise ConfigurationError(f"domain box does not match dimension {dim}")
    lo, hi = box[0::2], box[1::2]
    if np.any(hi <= lo):
        raise ConfigurationError("box side lengths must be positive")
    return lo, hi


def build_uniform_mesh(domain: Sequence[float] = (0.0, 1.0), resolution: int | Sequence[int] = 8) -> Mesh:
    """Structured mesh of an axis-aligned box.

    ``domain`` is ``(x0, x1)`` for an interval or ``(x0, x1, y0, y1)`` for a
    rectangle. In 2D each cell is cut along its (i, j)-(i+1, j+1) diagonal.
    """
    lo, hi = _box(domain)
    d = lo.size
    res = np.broadcast_to(np.asarray(resolution), (d,))
    if not np.all(np.equal(np.mod(res, 1), 0)) or np.any(res < 1):
        raise ConfigurationError(f"resolution must be a positive integer, got {resolution!r}")
    res = res.astype(int)
    if d == 1:
        n = res[0]
        pts = np.linspace(lo[0], hi[0], n + 1)[:, None]
        cells = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
        return Mesh(pts, cells, [0, n])
    nx, ny = res
    xs = np.linspace(lo[0], hi[0], nx + 1)
    ys = np.linspace(lo[1], hi[1], ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[:-1, 1:].ravel()
    v01 = idx[1:, :-1].ravel()
    v11 = idx[1:, 1:].ravel()
    lower = np.stack([v00, v10, v11], axis=1)
    upper = np.stack([v00, v11, v01], axis=1)
    cells = np.stack([lower, upper], axis=1).reshape(-1, 3)
    onb = np.zeros_like(idx, dtype=bool)
    onb[0, :] = onb[-1, :] = onb[:, 0] = onb[:, -1] = True
    return Mesh(pts, cells, idx[onb])


def _topological_boundary(cells: np.ndarray, dim: int) -> np.ndarray:
    if dim == 1:
        counts = np.bincount(cells.ravel())
        return np.flatnonzero(counts == 1)
    edges = np.sort(np.concatenate([cells[:, [0, 1]], cells[:, [1, 2]], cells[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    return np.unique(uniq[counts == 1].ravel())


def refine(mesh: Mesh) -> Mesh:
    """Uniform red refinement: bisect intervals, split triangles into four."""
    pts, cells = mesh.points, mesh.cells
    n = mesh.n_nodes
    if mesh.dim == 1:
        mid = 0.5 * (pts[cells[:, 0]] + pts[cells[:, 1]])
        m_idx = n + np.arange(len(cells))
        new_pts = np.vstack([pts, mid])
        new_cells = np.concatenate(
            [np.stack([cells[:, 0], m_idx], 1), np.stack([m_idx, cells[:, 1]], 1)]
        )
        return Mesh(new_pts, new_cells, mesh.boundary)
    local = [(0, 1), (1, 2), (2, 0)]
    all_edges = np.sort(np.concatenate([cells[:, list(e)] for e in local]), axis=1)
    uniq, inverse = np.unique(all_edges, axis=0, return_inverse=True)
    inverse = inverse.ravel().reshape(3, -1).T + n  # (m, 3): midpoints of edges 01, 12, 20
    mid = 0.5 * (pts[uniq[:, 0]] + pts[uniq[:, 1]])
    new_pts = np.vstack([pts, mid])
    a, b, c = cells.T
    ab, bc, ca = inverse.T
    new_cells = np.concatenate(
        [
            np.stack([a, ab, ca], 1),
            np.stack([ab, b, bc], 1),
            np.stack([ca, bc, c], 1),
            np.stack([ab, bc, ca], 1),
        ]
    )
    old_bnd = mesh.boundary_mask
    edge_on_bnd = old_bnd[uniq[:, 0]] & old_bnd[uniq[:, 1]]
    topo = set(_topological_boundary(new_cells, 2).tolist())
    # a midpoint is boundary if its parent edge lies on the topological boundary
    mids = [n + i for i in np.flatnonzero(edge_on_bnd) if n + i in topo]
    bnd = np.concatenate([mesh.boundary, np.asarray(mids, dtype=np.int64)])
    return Mesh(new_pts, new_cells, bnd)


# --------------------------------------------------------------------------
# Evaluation


def interpolate(mesh: Mesh, fn: Callable | float) -> DiscreteField:
    """Nodal interpolant of ``fn(x)`` where ``x`` has shape (n, d)."""
    if callable(fn):
        vals = np.asarray(fn(mesh.points), dtype=float)
        vals = np.broadcast_to(vals.reshape(-1) if vals.size == mesh.n_nodes else vals, (mesh.n_nodes,))
    else:
        vals = np.full(mesh.n_nodes, float(fn))
    return DiscreteField(mesh, vals)


def gradient_on_element(fld: DiscreteField, element: int) -> np.ndarray:
    """Constant gradient of the P1 interpolant on a single element."""
    m = fld.mesh.n_elements
    if not (-m <= element < m) or isinstance(element, bool):
        raise IndexError(f"element index {element} out of range for mesh with {m} elements")
    cell = fld.mesh.cells[element]
    return fld.mesh.basis_grads[element].T @ fld.values[cell]


def integrate(mesh: Mesh, integrand: Callable, rule: QuadratureRule | None = None) -> float:
    """Integrate ``integrand(x)`` over the mesh.

    ``integrand`` receives quadrature-point coordinates of shape (m, nq, d) and
    returns values broadcastable to (m, nq). Element sums are reduced in
    element order.
    """
    rule = _rule_for(mesh, rule)
    x = quadrature_points(mesh, rule)
    vals = np.broadcast_to(np.asarray(integrand(x), dtype=float), x.shape[:2])
    return float(np.sum(np.sum(vals * quadrature_weights(mesh, rule), axis=1)))


def integrate_values(mesh: Mesh, qp_values: np.ndarray, rule: QuadratureRule | None = None) -> float:
    """Integrate values already sampled at quadrature points (m, nq)."""
    w = quadrature_weights(mesh, rule)
    return float(np.sum(np.sum(np.broadcast_to(qp_values, w.shape) * w, axis=1)))


def apply_dirichlet(obj, rhs=None, mesh: Mesh | None = None):
    """Impose homogeneous Dirichlet conditions.

    * ``DiscreteField`` -> copy with boundary coefficients set to exactly 0.
    * sparse/dense matrix (with ``mesh``) -> boundary rows and columns zeroed
      and unit diagonal inserted; ``rhs`` (if given) gets zeros at boundary
      nodes. Returns ``(matrix, rhs)``.
    """
    if isinstance(obj, DiscreteField):
        vals = obj.values.copy()
        vals[obj.mesh.boundary] = 0.0
        return obj.with_values(vals)
    if mesh is None:
        raise ConfigurationError("apply_dirichlet on a matrix requires the mesh")
    n = mesh.n_nodes
    keep = (~mesh.boundary_mask).astype(float)
    D = sp.diags(keep)
    A = sp.csr_matrix(D @ sp.csr_matrix(obj) @ D + sp.diags(1.0 - keep))
    A.eliminate_zeros()
    if rhs is None:
        return A, None
    b = np.array(rhs, dtype=float, copy=True)
    if b.shape[0] != n:
        raise ConfigurationError("rhs length does not match node count")
    b[mesh.boundary] = 0.0
    return A, b


# --------------------------------------------------------------------------
# Assembly scaffolding


def map_elements(kernel: Callable[[slice], np.ndarray], n_elements: int, threads: int = 1) -> np.ndarray:
    """Evaluate ``kernel`` over contiguous element blocks and concatenate.

    The kernel must return an array whose leading axis indexes the elements of
    the block. Output is independent of ``threads``.
    """
    threads = max(1, int(threads))
    if threads == 1 or n_elements < 2 * threads:
        return kernel(slice(0, n_elements))
    bounds = np.linspace(0, n_elements, threads + 1).astype(int)
    blocks = [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(kernel, blocks))
    return np.concatenate(parts, axis=0)


def assemble_vector(mesh: Mesh, local: np.ndarray) -> np.ndarray:
    """Scatter-add local element vectors (m, d+1) into a nodal vector."""
    return np.bincount(mesh.cells.ravel(), weights=np.asarray(local).ravel(), minlength=mesh.n_nodes)


def assemble_matrix(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    """Scatter-add local element matrices (m, d+1, d+1) into a CSR matrix."""
    k = mesh.dim + 1
    rows = np.repeat(mesh.cells, k, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, k)).ravel()
    A = sp.coo_matrix((np.asarray(local).ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2)
    return A.tocsr()


def stiffness_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Standard P1 Laplacian stiffness matrix on all nodes."""
    G = mesh.basis_grads
    local = np.einsum("mid,mjd->mij", G, G) * mesh.volumes[:, None, None]
    return assemble_matrix(mesh, local)


def mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix on all nodes."""
    k = mesh.dim + 1
    ref = (np.ones((k, k)) + np.eye(k)) / ((k) * (k + 1))
    local = mesh.volumes[:, None, None] * ref[None]
    return assemble_matrix(mesh, local)


def restrict(A: sp.spmatrix, mesh: Mesh) -> sp.csr_matrix:
    """Submatrix on free (non-Dirichlet) nodes."""
    free = mesh.free_nodes
    return sp.csr_matrix(A)[free][:, free]


# --------------------------------------------------------------------------
# Plain-text files


def _content_lines(text: str):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def read_mesh(path) -> Mesh:
    """Read the ``dim / nodes / elements / boundary`` text format."""
    lines = list(_content_lines(Path(path).read_text()))
    pos = 0

    def header(name):
        nonlocal pos
        if pos >= len(lines):
            raise ConfigurationError(f"{path}: missing '{name}' header")
        parts = lines[pos].split()
        if len(parts) != 2 or parts[0] != name:
            raise ConfigurationError(f"{path}: expected '{name} <count>', got {lines[pos]!r}")
        pos += 1
        try:
            return int(parts[1])
        except ValueError as exc:
            raise ConfigurationError(f"{path}: bad count in {lines[pos - 1]!r}") from exc

    def block(count, conv):
        nonlocal pos
        if pos + count > len(lines):
            raise ConfigurationError(f"{path}: file ends early")
        rows = [[conv(t) for t in lines[pos + i].split()] for i in range(count)]
        pos += count
        return rows

    d = header("dim")
    if d not in (1, 2):
        raise ConfigurationError(f"{path}: dim must be 1 or 2")
    pts = np.array(block(header("nodes"), float), dtype=float).reshape(-1, d)
    cells = np.array(block(header("elements"), int), dtype=np.int64).reshape(-1, d + 1)
    k = header("boundary")
    bnd_tokens = " ".join(lines[pos:]).split()
    if len(bnd_tokens) != k:
        raise ConfigurationError(f"{path}: expected {k} boundary indices, found {len(bnd_tokens)}")
    return Mesh(pts, cells, np.array([int(t) for t in bnd_tokens], dtype=np.int64))


def write_mesh(mesh: Mesh, path) -> None:
    out = [f"dim {mesh.dim}", f"nodes {mesh.n_nodes}"]
    out += [" ".join(repr(float(c)) for c in p) for p in mesh.points]
    out.append(f"elements {mesh.n_elements}")
    out += [" ".join(str(int(i)) for i in c) for c in mesh.cells]
    out.append(f"boundary {mesh.boundary.size}")
    out += [str(int(i)) for i in mesh.boundary]
    Path(path).write_text("\n".join(out) + "\n")


def read_field(path, mesh: Mesh | None = None) -> np.ndarray:
    """Read a nodal field file; the ``field n=<count>`` header is optional."""
    lines = list(_content_lines(Path(path).read_text()))
    count = None
    if lines and lines[0].startswith("field"):
        head = lines.pop(0)
        for tok in head.split()[1:]:
            if tok.startswith("n="):
                count = int(tok[2:])
    vals = np.array([float(t) for t in lines], dtype=float)
    if count is not None and count != vals.size:
        raise ConfigurationError(f"{path}: header declares {count} values, found {vals.size}")
    if mesh is not None and vals.size != mesh.n_nodes:
        raise ConfigurationError(f"{path}: {vals.size} values for a mesh with {mesh.n_nodes} nodes")
    return vals


def write_field(values, path) -> None:
    vals = np.asarray(values, dtype=float).ravel()
    Path(path).write_text(f"field n={vals.size}\n" + "".join(f"{v!r}\n" for v in vals.tolist()))
