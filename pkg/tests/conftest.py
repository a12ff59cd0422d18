import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from holoflow.algebra import ComplexPoly

settings.register_profile(
    "holoflow", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("holoflow")


def separated_roots(rng: np.random.Generator, deg: int, radius: float = 2.0, sep: float = 0.3) -> list[complex]:
    """Random points in a disk with pairwise distance at least ``sep``."""
    while True:
        r = radius * np.sqrt(rng.uniform(size=deg))
        z = r * np.exp(2j * np.pi * rng.uniform(size=deg))
        d = np.abs(z[:, None] - z[None, :]) + np.eye(deg) * 10
        if d.min() >= sep:
            return [complex(v) for v in z]


def random_poly(rng: np.random.Generator, deg: int) -> tuple[ComplexPoly, list[complex], complex]:
    zs = separated_roots(rng, deg)
    lead = complex(*rng.normal(size=2))
    lead = lead / abs(lead) * rng.uniform(0.5, 2.0)
    return ComplexPoly.from_roots(zs, lead), zs, lead


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20261014)


# criterion number -> one-line verdict, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
