import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from evoset.benchmarks import c2, c3, random_chain

settings.register_profile("evoset", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("evoset")


@pytest.fixture
def C2():
    return c2()


@pytest.fixture
def C3():
    return c3()


@pytest.fixture
def two_cycle():
    from evoset.chain import build_chain
    return build_chain([[0.0, 1.0], [1.0, 0.0]])


def corpus(count, n_max, seed0=0, lazy=(0.0, 0.3, 0.5)):
    """Deterministic mix of random chains: sizes 2..n_max, reversible or not, varied laziness."""
    out = []
    for s in range(count):
        n = 2 + s % (n_max - 1)
        out.append(random_chain(n, seed0 + s, reversible=bool(s % 2), laziness=lazy[s % len(lazy)]))
    return out
