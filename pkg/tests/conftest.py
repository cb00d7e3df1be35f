import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from digmilp.datasets import generate_family
from digmilp.instance import MilpInstance, Mode

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def brute_force(inst: MilpInstance, box: int = 1):
    """Best objective over the integer grid [0, box]^n (box=1 for binary); None if infeasible."""
    dense = inst.dense()
    best = None
    for bits in itertools.product(range(box + 1), repeat=inst.n_vars):
        x = np.array(bits, dtype=np.float64)
        if np.all(dense @ x <= inst.b + 1e-9):
            v = float(inst.c @ x)
            if best is None or v > best:
                best = v
    return best


def random_binary_instance(rng, m=None, n=None, name="rand"):
    m = m or int(rng.integers(1, 6))
    n = n or int(rng.integers(1, 13))
    a = rng.integers(-5, 6, size=(m, n)).astype(float)
    a[rng.uniform(size=(m, n)) < 0.4] = 0.0
    if not a.any():
        a[0, 0] = 1.0
    b = rng.integers(-3, 10, size=m).astype(float)
    c = rng.integers(-10, 11, size=n).astype(float)
    return MilpInstance(a, b, c, Mode.BINARY, name)


@pytest.fixture(scope="session")
def toy_sc():
    return generate_family("sc", 20, seed=0, n_cons=10, n_vars=20)


@pytest.fixture(scope="session")
def toy_ca():
    return generate_family("ca", 10, seed=0, n_items=8, n_bids=12, max_bundle=3)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
