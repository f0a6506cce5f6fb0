import numpy as np
import pytest

from dualdiv import find_beta_star, table1_params

# beta* for (p1, c=2, q=0.1, mu=0.01, lam=0.1); frozen from the ODE route and
# cross-checked against the Nystrom gamma in test_optimal_barrier
BETA_STAR_C2 = 31.965908408164978


@pytest.fixture(scope="session")
def base_params():
    return table1_params()


@pytest.fixture(scope="session")
def beta_star():
    return BETA_STAR_C2


def corpus(n=10, seed=2024):
    """Randomised (params, beta) points with exponential gains."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        kind = str(rng.choice(["p1", "p2", "p3"]))
        c = rng.uniform(1, 4)
        q = rng.uniform(0.05, 0.2)
        mu = rng.uniform(0.005, 0.05)
        lam = rng.uniform(0.05, 0.2)
        beta = rng.uniform(2, 40)
        out.append((table1_params(c=c, q=q, mu=mu, lam=lam, kind=kind), float(beta)))
    return out
