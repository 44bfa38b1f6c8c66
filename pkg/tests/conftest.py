import numpy as np
import pytest

from paqft.model import ModelSpec, build_model


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_spec():
    return ModelSpec("qm", 1.0, 3.0, 16)


@pytest.fixture(scope="session")
def small_props(small_spec):
    return build_model(small_spec)


@pytest.fixture(scope="session")
def cylinder_spec():
    return ModelSpec("cylinder", 1.0, 2.0, 12, 2 * np.pi, 1)


def bump(t, center, half):
    u = (t - center) / half
    return np.where(np.abs(u) < 1, np.cos(0.5 * np.pi * u) ** 2, 0.0)


def pytest_terminal_summary(terminalreporter):
    lines = getattr(terminalreporter.config, "_acceptance_lines", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(lines):
        terminalreporter.write_line(lines[number])
