import numpy as np
import pytest

from simgcf.dataset import InteractionDataset, split_dataset, split_from_pairs
from simgcf.graph import adjacency_from_edges, build_normalized_adjacency
from simgcf.spectral_lab import random_bipartite_graph


def make_split(user_count, item_count, train, validation=(), test=()):
    """Split from explicit (user, item) pair lists."""
    def arr(pairs):
        pairs = list(pairs)
        if not pairs:
            return np.zeros(0, np.int64), np.zeros(0, np.int64)
        u, i = zip(*pairs)
        return np.array(u), np.array(i)

    return split_from_pairs(user_count, item_count,
                            {"train": arr(train), "validation": arr(validation), "test": arr(test)})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_split():
    rng = np.random.default_rng(3)
    pairs = [(f"u{u}", f"i{i}") for u in range(12) for i in rng.choice(15, size=6, replace=False)]
    return split_dataset(InteractionDataset.from_pairs(pairs), seed=5)


@pytest.fixture
def small_adj(small_split):
    return build_normalized_adjacency(small_split)


@pytest.fixture
def path_graph():
    # u1 - i1 - u2 - i2: users 0, 1 and items 0, 1 -> nodes 0, 2, 1, 3
    return adjacency_from_edges(2, 2, [0, 1, 1], [0, 0, 1])


def random_graph(seed, n_users=5, n_items=4, p=0.4):
    return random_bipartite_graph(n_users, n_items, p, np.random.default_rng(seed))


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
