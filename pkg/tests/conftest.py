import math

import numpy as np
import pytest

from commonpool import model

# baseline parameters used throughout the source figures
MU, SIGMA2, R = 4.0, 2.0, 0.05


@pytest.fixture(scope="session")
def baseline():
    return model.constant(MU, math.sqrt(SIGMA2))


@pytest.fixture(scope="session")
def baseline_c(baseline):
    return model.extinction_bound(baseline, R)


def fd_second(fn, x, h=1e-3):
    """Five-point central second difference."""
    return (-fn(x + 2 * h) + 16 * fn(x + h) - 30 * fn(x)
            + 16 * fn(x - h) - fn(x - 2 * h)) / (12 * h * h)


def fd_first(fn, x, h=1e-4):
    return (fn(x - 2 * h) - 8 * fn(x - h) + 8 * fn(x + h) - fn(x + 2 * h)) / (12 * h)


def random_models(rng, count, affine_fraction=0.5):
    """Validated random models: constant drift plus affine-drift cases."""
    out = []
    for _ in range(count):
        mu0 = rng.uniform(0.5, 8.0)
        sigma2 = rng.uniform(0.5, 4.0)
        r = rng.uniform(0.01, 0.2)
        if rng.random() < affine_fraction:
            mu1 = rng.uniform(-0.5, 0.8) * r  # keeps mu' < r
            out.append((model.affine_drift(mu0, mu1, math.sqrt(sigma2), r), r))
        else:
            out.append((model.constant(mu0, math.sqrt(sigma2)), r))
    return out
