import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import finitefreq as ff
from finitefreq.reference import (example_band, example_schedule, example_signal,
                                  example_system)

settings.register_profile(
    "fast", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])
settings.load_profile("fast")


@pytest.fixture(scope="session")
def benchmark_system():
    return example_system()


@pytest.fixture(scope="session")
def benchmark_band():
    return example_band()


@pytest.fixture(scope="session")
def benchmark_run():
    """One shared 60 s simulation of the benchmark configuration."""
    result = ff.simulate(example_system(), example_schedule(), example_signal(),
                         60.0, 1e-3)
    return result


def random_stable_lti(rng, n=2, m=1, q=1, d_scale=0.3, min_decay=0.3):
    """Random strictly stable LTI system with well-scaled data."""
    while True:
        A = rng.normal(size=(n, n))
        A = A - (max(np.linalg.eigvals(A).real.max(), -min_decay) + 0.7) * np.eye(n)
        if np.linalg.eigvals(A).real.max() < -min_decay:
            break
    B = rng.normal(size=(n, m))
    C = rng.normal(size=(q, n))
    D = d_scale * rng.normal(size=(q, m))
    return A, B, C, D


def inband_sup(A, B, C, D, band, ngrid=2001):
    """Brute-force supremum of the largest singular value over the band grid."""
    if band.kind == "entire":
        ws = np.concatenate([np.linspace(0.0, 50.0, ngrid), [1e6]])
    elif band.kind == "high":
        ws = np.concatenate([np.linspace(band.lo, 50.0 * band.lo, ngrid),
                             [1e7 * band.lo]])
    elif band.kind == "middle":
        ws = np.linspace(band.lo, band.hi, ngrid)
    else:
        ws = np.linspace(0.0, band.hi, ngrid)
    n = A.shape[0]
    s = 0.0
    for w in ws:
        G = C @ np.linalg.solve(1j * w * np.eye(n) - A, B) + D
        s = max(s, np.linalg.svd(G, compute_uv=False)[0])
    return s
