import numpy as np
import pytest

from tworate import (
    FiniteDistribution,
    State,
    make_plan,
)


def make_distribution(masses, support_key=None):
    states = [State(i, f"row-{i}".encode()) for i in range(len(masses))]
    return FiniteDistribution(states, np.asarray(masses, float), support_key)


def random_distribution(rng, k):
    mass = rng.dirichlet(np.ones(k))
    mass = np.maximum(mass, 1e-12)
    mass = mass / mass.sum()
    return make_distribution(mass)


def random_plan(rng, k, interior_beta=False):
    """Random base, random proper nonempty region, random feasible beta."""
    F = random_distribution(rng, k)
    size = int(rng.integers(1, k))
    region = F.subset(rng.choice(k, size=size, replace=False).tolist())
    alpha = F.mass_of(region)
    if interior_beta:
        beta = float(rng.uniform(0.05, 0.95)) * (1.0 - alpha)
        beta = max(beta, 1e-6)
    else:
        beta = float(rng.uniform(0.0, 1.0 - alpha))
    return make_plan(F, region, beta)


@pytest.fixture
def two_state():
    """Uniform {a, b} with region {a}: the canonical worked example."""
    F = make_distribution([0.5, 0.5])
    return F, F.subset([0])


@pytest.fixture
def reference_ten_state():
    """Uniform 10-state support with scores 0.05, 0.15, ..., 0.95."""
    from tworate import TableScore

    F = make_distribution([0.1] * 10)
    score = TableScore({i: 0.05 + 0.1 * i for i in range(10)})
    return F, score
