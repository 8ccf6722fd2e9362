import numpy as np
import pytest

from moqubo import MubqpInstance, QuboMatrix


def random_instance(n: int, m: int, seed: int, coeff_range: int = 10) -> MubqpInstance:
    rng = np.random.default_rng(seed)
    objectives = tuple(
        QuboMatrix(rng.integers(-coeff_range, coeff_range + 1, size=(n, n)).astype(float))
        for _ in range(m)
    )
    return MubqpInstance(m=m, n=n, rho=0.0, density=1.0, objectives=objectives)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
