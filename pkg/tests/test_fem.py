import math

import numpy as np
import pytest
import scipy.sparse as sp
from numpy.polynomial import polynomial as P

from dpconv import fem
from dpconv.errors import ConfigurationError


# --------------------------------------------------------------------------
# meshes


def test_interval_counts():
    m = fem.build_uniform_mesh((0, 1), 4)
    assert (m.n_nodes, m.n_elements) == (5, 4)
    assert m.boundary.tolist() == [0, 4]
    assert m.measure == pytest.approx(1.0)


def test_square_counts():
    m = fem.build_uniform_mesh((0, 1, 0, 1), 2)
    assert (m.n_nodes, m.n_elements, m.boundary.size) == (9, 8, 8)
    assert m.free_nodes.tolist() == [4]
    assert m.measure == pytest.approx(1.0)


def test_rectangle_volumes_positive():
    m = fem.build_uniform_mesh((-1, 2, 0, 0.5), (5, 3))
    assert np.all(m.volumes > 0)
    assert m.measure == pytest.approx(1.5)


@pytest.mark.parametrize("res", [0, -3, 1.5])
def test_bad_resolution(res):
    with pytest.raises(ConfigurationError):
        fem.build_uniform_mesh((0, 1), res)


def test_degenerate_element_rejected():
    pts = [[0, 0], [1, 0], [2, 0]]
    with pytest.raises(ConfigurationError, match="degenerate"):
        fem.Mesh(pts, [[0, 1, 2]], [0, 1, 2])


def test_index_out_of_range_rejected():
    with pytest.raises(ConfigurationError):
        fem.Mesh([[0.0], [1.0]], [[0, 2]], [0, 1])


def test_mesh_arrays_are_readonly():
    m = fem.build_uniform_mesh((0, 1), 3)
    with pytest.raises(ValueError):
        m.points[0, 0] = 5.0


@pytest.mark.parametrize("domain", [(0, 1), (0, 1, 0, 2)])
def test_refine_halves_h(domain):
    m = fem.build_uniform_mesh(domain, 3)
    r = fem.refine(m)
    assert r.n_elements == m.n_elements * 2**m.dim
    assert r.h == pytest.approx(m.h / 2)
    assert r.measure == pytest.approx(m.measure)
    on_edge = np.any(np.isclose(r.points, r.points.min(axis=0)) | np.isclose(r.points, r.points.max(axis=0)), axis=1)
    assert set(np.flatnonzero(on_edge)) == set(r.boundary.tolist())


# --------------------------------------------------------------------------
# quadrature


@pytest.mark.parametrize("degree", range(0, 9))
def test_quadrature_exact_1d(degree, rng):
    m = fem.build_uniform_mesh((-0.3, 1.7), 5)
    rule = fem.quadrature_rule(1, degree)
    for _ in range(5):
        c = rng.standard_normal(degree + 1)
        exact = P.polyval(1.7, P.polyint(c)) - P.polyval(-0.3, P.polyint(c))
        got = fem.integrate(m, lambda x: P.polyval(x[..., 0], c), rule)
        assert got == pytest.approx(exact, rel=1e-12, abs=1e-13)


def _monomial_square_oracle(a, b):
    # int over the unit square of x^a y^b
    return 1.0 / ((a + 1) * (b + 1))


@pytest.mark.parametrize("degree", range(0, 9))
def test_quadrature_exact_2d(degree, rng):
    m = fem.build_uniform_mesh((0, 1, 0, 1), 3)
    rule = fem.quadrature_rule(2, degree)
    terms = [(a, b) for a in range(degree + 1) for b in range(degree + 1 - a)]
    for _ in range(3):
        c = rng.standard_normal(len(terms))
        exact = sum(ci * _monomial_square_oracle(a, b) for ci, (a, b) in zip(c, terms))

        def poly(x):
            return sum(ci * x[..., 0] ** a * x[..., 1] ** b for ci, (a, b) in zip(c, terms))

        assert fem.integrate(m, poly, rule) == pytest.approx(exact, rel=1e-12, abs=1e-13)


def test_quadrature_weights_positive():
    for d in (1, 2):
        for k in range(10):
            r = fem.quadrature_rule(d, k)
            assert np.all(r.weights > 0)
            assert r.weights.sum() == pytest.approx(r.reference_volume, rel=1e-14)


def test_integrate_examples():
    sq = fem.build_uniform_mesh((0, 1, 0, 1), 4)
    assert fem.integrate(sq, lambda x: np.ones(x.shape[:-1])) == pytest.approx(1.0, rel=1e-14)
    line = fem.build_uniform_mesh((0, 1), 3)
    assert fem.integrate(line, lambda x: x[..., 0], fem.quadrature_rule(1, 2)) == pytest.approx(0.5, rel=1e-14)
    fine = fem.build_uniform_mesh((0, 1), 128)
    assert abs(fem.integrate(fine, lambda x: np.sin(np.pi * x[..., 0])) - 2 / np.pi) < 1e-6


def test_integrate_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        fem.integrate(fem.build_uniform_mesh((0, 1), 2), lambda x: 1.0, fem.quadrature_rule(2))


def test_partition_of_unity():
    for d in (1, 2):
        r = fem.quadrature_rule(d, 6)
        assert np.allclose(r.points.sum(axis=1), 1.0, atol=1e-15)
        assert np.all(r.points >= 0)


def test_partition_of_unity_gradients(square6):
    assert np.allclose(square6.basis_grads.sum(axis=1), 0.0, atol=1e-12)


# --------------------------------------------------------------------------
# fields


def test_gradient_examples():
    line = fem.build_uniform_mesh((0, 1), 7)
    u = fem.interpolate(line, lambda x: x[..., 0])
    for e in range(line.n_elements):
        assert fem.gradient_on_element(u, e) == pytest.approx([1.0])
    assert np.allclose(fem.interpolate(line, 3.5).gradients(), 0.0)
    sq = fem.build_uniform_mesh((0, 1, 0, 1), 3)
    v = fem.interpolate(sq, lambda x: 2 * x[..., 0] - x[..., 1])
    assert np.allclose(v.gradients(), [2.0, -1.0], atol=1e-13)


def test_gradient_index_error(line16):
    with pytest.raises(IndexError):
        fem.gradient_on_element(fem.DiscreteField.zeros(line16), line16.n_elements)


def test_affine_gradient_exact_on_irregular_mesh(rng):
    m = fem.build_uniform_mesh((0, 2, 0, 1), (6, 4))
    pts = m.points.copy()
    interior = m.free_nodes
    pts[interior] += 0.05 * rng.uniform(-1, 1, (interior.size, 2))
    m = fem.Mesh(pts, m.cells, m.boundary)
    for _ in range(5):
        a, b, c = rng.standard_normal(3)
        u = fem.interpolate(m, lambda x: a * x[..., 0] + b * x[..., 1] + c)
        assert np.allclose(u.gradients(), [a, b], rtol=1e-12, atol=1e-12)


def test_field_arithmetic(line16, rng):
    u = fem.DiscreteField(line16, rng.standard_normal(line16.n_nodes))
    v = fem.DiscreteField(line16, rng.standard_normal(line16.n_nodes))
    assert np.allclose((u + v - v).values, u.values)
    assert np.allclose((2 * u / 2).values, u.values)
    assert np.allclose((-u).values, -u.values)


def test_field_size_mismatch(line16):
    with pytest.raises(ConfigurationError):
        fem.DiscreteField(line16, np.zeros(3))


# --------------------------------------------------------------------------
# Dirichlet conditions


def test_dirichlet_field_and_idempotence(square6, rng):
    u = fem.DiscreteField(square6, rng.standard_normal(square6.n_nodes))
    once = fem.apply_dirichlet(u)
    assert np.all(once.values[square6.boundary] == 0.0)
    assert np.array_equal(once.values[square6.free_nodes], u.values[square6.free_nodes])
    assert np.array_equal(fem.apply_dirichlet(once).values, once.values)


def test_dirichlet_system(square6, rng):
    K = fem.stiffness_matrix(square6)
    b = rng.standard_normal(square6.n_nodes)
    A, bb = fem.apply_dirichlet(K, b, mesh=square6)
    A = A.toarray()
    for i in square6.boundary:
        expect = np.zeros(square6.n_nodes)
        expect[i] = 1.0
        assert np.array_equal(A[i], expect)
        assert np.array_equal(A[:, i], expect)
    assert np.all(bb[square6.boundary] == 0)
    A2, _ = fem.apply_dirichlet(sp.csr_matrix(A), None, mesh=square6)
    assert np.array_equal(A2.toarray(), A)


# --------------------------------------------------------------------------
# assembly


def test_stiffness_independent_1d():
    n = 10
    m = fem.build_uniform_mesh((0, 1), n)
    h = 1.0 / n
    K = np.zeros((n + 1, n + 1))
    for i in range(n):
        K[i : i + 2, i : i + 2] += np.array([[1, -1], [-1, 1]]) / h
    assert np.allclose(fem.stiffness_matrix(m).toarray(), K, atol=1e-12)
    M = np.zeros((n + 1, n + 1))
    for i in range(n):
        M[i : i + 2, i : i + 2] += np.array([[2, 1], [1, 2]]) * h / 6
    assert np.allclose(fem.mass_matrix(m).toarray(), M, atol=1e-14)


def test_mass_matrix_integrates_products(square6, rng):
    u = fem.DiscreteField(square6, rng.standard_normal(square6.n_nodes))
    v = fem.DiscreteField(square6, rng.standard_normal(square6.n_nodes))
    M = fem.mass_matrix(square6)
    direct = fem.integrate_values(square6, u.at_quadrature() * v.at_quadrature())
    assert u.values @ (M @ v.values) == pytest.approx(direct, rel=1e-12)


def test_threaded_assembly_bit_identical(square6):
    def kernel(blk):
        return square6.volumes[blk][:, None] * np.ones((1, 3))

    one = fem.assemble_vector(square6, fem.map_elements(kernel, square6.n_elements, 1))
    four = fem.assemble_vector(square6, fem.map_elements(kernel, square6.n_elements, 4))
    assert np.array_equal(one, four)


# --------------------------------------------------------------------------
# file formats


@pytest.mark.parametrize("domain", [(0, 1), (0, 1, 0, 1)])
def test_mesh_roundtrip(tmp_path, domain):
    m = fem.build_uniform_mesh(domain, 3)
    fem.write_mesh(m, tmp_path / "m.txt")
    r = fem.read_mesh(tmp_path / "m.txt")
    assert np.array_equal(r.points, m.points)
    assert np.array_equal(r.cells, m.cells)
    assert np.array_equal(r.boundary, m.boundary)


def test_mesh_file_with_comments(tmp_path):
    text = "# tiny\ndim 1\nnodes 3\n0\n0.5  # mid\n1\nelements 2\n0 1\n1 2\nboundary 2\n0 2\n"
    (tmp_path / "m.txt").write_text(text)
    m = fem.read_mesh(tmp_path / "m.txt")
    assert m.n_nodes == 3 and m.free_nodes.tolist() == [1]


def test_field_roundtrip(tmp_path, rng):
    vals = rng.standard_normal(7)
    fem.write_field(vals, tmp_path / "f.txt")
    assert (tmp_path / "f.txt").read_text().splitlines()[0] == "field n=7"
    assert np.array_equal(fem.read_field(tmp_path / "f.txt"), vals)


def test_field_count_mismatch(tmp_path):
    (tmp_path / "f.txt").write_text("field n=3\n1\n2\n")
    with pytest.raises(ConfigurationError):
        fem.read_field(tmp_path / "f.txt")


def test_hat_integral():
    n = 8
    m = fem.build_uniform_mesh((0, 1), n)
    ones = fem.assemble_vector(m, np.repeat((m.volumes / 2)[:, None], 2, axis=1))
    assert np.allclose(ones[1:-1], 1.0 / n)
    assert math.isclose(ones.sum(), 1.0)
