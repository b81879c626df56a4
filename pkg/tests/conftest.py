import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from elastomono.fem import assemble
from elastomono.materials import background
from elastomono.mesh import build_load_patches, build_structured_hex_mesh

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

REFERENCE_BACKGROUND = (6e5, 6e3, 3e3)
REFERENCE_INCLUSION = (2e6, 2e4, 1e3)
ALPHA_BOUNDS = (1.4e6, 1.4e4, 2e3)


@pytest.fixture(scope="session")
def mesh4():
    return build_structured_hex_mesh(4)


@pytest.fixture(scope="session")
def system4(mesh4):
    return assemble(mesh4, background(*REFERENCE_BACKGROUND, mesh4))


@pytest.fixture(scope="session")
def loads4(mesh4):
    # 5 sides x 2 x 2 patches = 20 normal loads
    return build_load_patches(mesh4, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def report(criterion: str, ok: bool, detail: str) -> bool:
    """Record and print one acceptance line; returns ``ok`` for the caller's assert."""
    line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
