from functools import lru_cache

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fkdv.ground_state import default_grid, petviashvili_single, solve_double_power
from fkdv.model import ModelParams

settings.register_profile(
    "repo",
    deadline=None,
    max_examples=25,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("repo")

ACCEPTANCE_LINES = []


@lru_cache(maxsize=None)
def single(r, sigma, c=1.0, n=None, L=None):
    """Cached single-power ground state on the default (or given) grid."""
    g = default_grid(sigma, c, n=n, power=r)
    if L is not None:
        g = type(g)(L, n or g.n)
    return petviashvili_single(r, sigma, c, g, tol=1e-12, max_iter=2000)


@lru_cache(maxsize=None)
def double(sigma, a, p, q, c):
    return solve_double_power(ModelParams(sigma, a, p, q, c))


def smooth_profile(grid, rng, modes=8, width=None):
    """Random smooth localized profile: Gaussian-windowed low-mode trig sum."""
    x = grid.x
    width = width or grid.L / 6
    amp = rng.standard_normal(modes)
    ph = rng.uniform(0, 2 * np.pi, modes)
    k = np.arange(1, modes + 1) / width
    s = sum(a * np.cos(kk * x + p) for a, kk, p in zip(amp, k, ph))
    return grid.zero().like(s * np.exp(-(x / width) ** 2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
