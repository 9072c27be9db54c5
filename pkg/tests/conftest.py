import numpy as np
import pytest
from hypothesis import settings

from bundlereduce.scenarios import SCENARIO_NAMES, _BUILDERS, make_scenario

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

#: every (scenario, variant) pair shipped with the package
ALL_VARIANTS = [(name, v) for name in SCENARIO_NAMES for v in _BUILDERS[name][1]]


@pytest.fixture(scope="session")
def scenario_cache():
    cache = {}

    def get(name, variant=None):
        key = (name, variant)
        if key not in cache:
            cache[key] = make_scenario(name, variant)
        return cache[key]

    return get


def on_surface(sc, n=20, seed=0):
    """``n`` random on-surface points of a scenario (the SU(2) base is a single point)."""
    return np.asarray(sc.sample(np.random.default_rng(seed), n), dtype=float).reshape(-1, sc.bundle.n_p)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])
