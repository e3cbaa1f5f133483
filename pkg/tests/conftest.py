import sys
import numpy as np
import pytest

from dpconv import fem


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def line16():
    return fem.build_uniform_mesh((0.0, 1.0), 16)


@pytest.fixture(scope="session")
def square6():
    return fem.build_uniform_mesh((0.0, 1.0, 0.0, 1.0), 6)


def random_field(mesh, rng, scale=1.0):
    """Random nodal field with zero trace."""
    vals = np.zeros(mesh.n_nodes)
    vals[mesh.free_nodes] = scale * rng.standard_normal(mesh.free_nodes.size)
    return fem.DiscreteField(mesh, vals)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
