"""Shared fixtures: the 3-item path graph and small synthetic cohorts."""

import numpy as np
import pytest
import scipy.sparse as sp

from specrec import (
    build_matrix,
    exact_eigs,
    hypergraph_laplacian,
    split_users,
    window_log,
)


@pytest.fixture(scope="session")
def path3_matrix():
    """Two users over three items: u1 rated {0,1}, u2 rated {1,2}."""
    return sp.csr_matrix(np.array([[1, 0], [1, 1], [0, 1]], dtype=np.float64))


@pytest.fixture(scope="session")
def path3_lap(path3_matrix):
    return hypergraph_laplacian(path3_matrix)


@pytest.fixture(scope="session")
def path3_basis(path3_lap):
    return exact_eigs(path3_lap, 3)


@pytest.fixture(scope="session")
def small_cohort():
    """Window-structured log split into train/val/test with its Laplacian."""
    log = window_log(n_items=60, n_users=240, seed=7, events_lo=4, events_hi=10, width=6.0)
    split = split_users(log, (8, 1, 1), 9876)
    matrix = build_matrix(log, split)
    lap = hypergraph_laplacian(matrix.matrix)
    return log, split, matrix, lap


def random_rating_matrix(rng, n_items, n_users, density=0.3):
    """Random binary incidence with every item and user active."""
    while True:
        R = (rng.random((n_items, n_users)) < density).astype(np.float64)
        if R.sum(axis=1).min() > 0 and R.sum(axis=0).min() > 0:
            return sp.csr_matrix(R)
