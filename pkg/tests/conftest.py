import numpy as np
import pytest

from driftgame import ModelParams, build_solution

# Base-case parameters used throughout the numerical study.
BASE = dict(mu0=-1.0, mu1=1.0, sigma=0.5, eps=0.1)


@pytest.fixture(scope="session")
def base_params():
    return ModelParams(**BASE)


@pytest.fixture(scope="session")
def base_solution(base_params):
    return build_solution(base_params)


def _random_params(n=20, seed=20260810):
    """Valid-by-construction parameter sets around the base case."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        out.append(ModelParams(
            mu0=-float(rng.uniform(0.2, 2.5)),
            mu1=float(rng.uniform(0.2, 2.5)),
            sigma=float(rng.uniform(0.25, 2.0)),
            eps=float(rng.uniform(0.03, 0.4)),
            x0=float(rng.uniform(0.5, 2.0)),
            prior=float(rng.uniform(0.15, 0.85)),
        ))
    return out


@pytest.fixture(scope="session")
def random_param_sets():
    return _random_params()


@pytest.fixture(scope="session")
def random_solutions(random_param_sets):
    return [build_solution(p) for p in random_param_sets]
