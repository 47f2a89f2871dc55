import numpy as np
import pytest
from hypothesis import settings

from twotime import chi
from twotime.grid import bind_constants, make_grid, random_endpoints, sample_collocation_sets
from twotime.kernel import KernelConfig

settings.register_profile("default", max_examples=30, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def record_criterion():
    """Print and remember one PASS/FAIL line, then assert it."""
    def record(name, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} {name}: {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        assert passed, line
    return record


@pytest.fixture
def grid():
    return make_grid(2.0, 3.0, 0.25)


@pytest.fixture
def constants(grid):
    return bind_constants(grid, hbar=1.0, m1=1.0, m2=2.0)


@pytest.fixture
def free_kernel():
    return KernelConfig()


@pytest.fixture
def free_coeffs(grid, constants):
    return chi.free_particle_chi(grid, [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], constants)


@pytest.fixture
def trajs(grid):
    return sample_collocation_sets(grid, random_endpoints(4, seed=3), 2, seed=3)


def random_coeffs(grid, seed=0, scale=0.1):
    rng = np.random.default_rng(seed)
    return chi.ChiCoefficients.from_vector(grid, scale * rng.normal(size=grid.node_shape + (chi.NPARAM,)))
