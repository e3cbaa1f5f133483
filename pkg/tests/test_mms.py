import numpy as np
import pytest

from dpconv import convection as cv
from dpconv import fem
from dpconv.errors import ConfigurationError
from dpconv.mms import manufacture, mms_study
from dpconv.orlicz import PhaseExponents


def _fd_operator_load_1d(u, mu, p, q, x, h=1e-4):
    """-(a(x, u'))' by nested central differences."""

    def du(t):
        return (u(t + h) - u(t - h)) / (2 * h)

    def a(t):
        g = du(t)
        return np.abs(g) ** (p - 2) * g + mu(t) * np.abs(g) ** (q - 2) * g

    return -(a(x + h) - a(x - h)) / (2 * h)


def test_symbolic_load_matches_finite_differences():
    exps = PhaseExponents(2.0, 3.0, 1)
    ms = manufacture("sin(pi*x)", "x", exps, 1)
    x = np.linspace(0.05, 0.45, 9)  # stay clear of the kink of |u'| at x = 1/2
    got = ms.operator_load(x[:, None])
    ref = _fd_operator_load_1d(lambda t: np.sin(np.pi * t), lambda t: t, 2.0, 3.0, x)
    assert np.allclose(got, ref, rtol=1e-5)


def test_symbolic_load_2d_laplacian():
    ms = manufacture("sin(pi*x)*sin(pi*y)", "0", PhaseExponents(2.0, 3.0, 2), 2)
    pts = np.random.default_rng(0).uniform(0, 1, (20, 2))
    expect = 2 * np.pi**2 * np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1])
    assert np.allclose(ms.operator_load(pts), expect, rtol=1e-12)


def test_poisson_rates():
    out = mms_study("sin(pi*x)", PhaseExponents(2.0, 3.0, 1), "0", levels=5)
    rates = [r["l2_rate"] for r in out["levels"][1:]]
    assert len(rates) == 4
    assert all(abs(r - 2.0) <= 0.1 for r in rates)
    assert all(abs(r["h1_rate"] - 1.0) <= 0.1 for r in out["levels"][1:])


def test_double_phase_h1_rate():
    out = mms_study("sin(pi*x)", PhaseExponents(2.0, 3.0, 1), "x", levels=4)
    assert all(r["converged"] for r in out["levels"])
    assert all(r["h1_rate"] >= 0.9 for r in out["levels"][1:])


def test_two_dimensional_rates():
    out = mms_study(
        "x*(1-x)*y*(1-y)", PhaseExponents(2.0, 4.0, 2), "1 + x", levels=3, base_resolution=4, domain=(0, 1, 0, 1)
    )
    assert all(r["h1_rate"] >= 0.9 for r in out["levels"][1:])
    assert all(r["l2_rate"] >= 1.8 for r in out["levels"][1:])


def test_with_convection_term():
    mesh = fem.build_uniform_mesh((0, 1), 8)
    spec = cv.example2([0.4], "1 + x", mesh=mesh)
    out = mms_study("sin(pi*x)", PhaseExponents(2.0, 2.5, 1), "1", spec=spec, levels=3)
    assert all(r["converged"] for r in out["levels"])
    assert all(r["h1_rate"] >= 0.9 for r in out["levels"][1:])


def test_zero_solution():
    out = mms_study("0", PhaseExponents(2.0, 3.0, 1), "1", levels=3)
    for row in out["levels"]:
        assert row["l2_error"] == 0.0 and row["h1_error"] == 0.0
    assert out["levels"][1]["l2_rate"] is None


def test_boundary_violation():
    with pytest.raises(ConfigurationError, match="vanish"):
        mms_study("x", PhaseExponents(2.0, 3.0, 1), levels=1)


def test_bad_symbols():
    with pytest.raises(ConfigurationError):
        manufacture("sin(z)", "0", PhaseExponents(2.0, 3.0, 1), 1)
    with pytest.raises(ConfigurationError):
        manufacture("x*y", "0", PhaseExponents(2.0, 3.0, 1), 1)
