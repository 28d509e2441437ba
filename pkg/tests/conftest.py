import numpy as np
import pytest

from prunefuse.net import NetworkSpec, Parameters, init_network


def random_params(widths, seed=0, dtype=np.float64, bias_scale=0.1):
    """Fan-in init plus small random biases, so bias paths are exercised."""
    p = init_network(NetworkSpec(tuple(widths)), seed, dtype=dtype)
    rng = np.random.default_rng(seed)
    biases = [(bias_scale * rng.standard_normal(b.shape)).astype(dtype) for b in p.biases]
    return Parameters([w.copy() for w in p.weights], biases)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
