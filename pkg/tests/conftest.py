import numpy as np
import pytest

from pefkit import Categorical, GroupedData


def random_grouped(rng, n_groups=None, support_per_group=None, alpha=1.0):
    """Random disjoint-support grouped data for property checks."""
    if n_groups is None:
        n_groups = int(rng.integers(2, 5))
    groups = []
    base = 0
    for gi in range(n_groups):
        k = support_per_group or int(rng.integers(2, 6))
        probs = rng.dirichlet(np.full(k, alpha))
        groups.append((gi, Categorical(tuple(range(base, base + k)), probs)))
        base += k
    priors = rng.dirichlet(np.full(n_groups, 5.0))
    return GroupedData(tuple(groups), priors)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
