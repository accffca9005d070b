import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


def random_spd(p, rng, cond=1.0):
    r = rng.standard_normal((p, p))
    return r @ r.T / p + cond * np.eye(p)


def random_orthogonal(p, rng):
    q, r = np.linalg.qr(rng.standard_normal((p, p)))
    return q * np.sign(np.diag(r))
