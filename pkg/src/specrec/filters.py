"""Closed-form spectral filter reconstruction and top-N ranking.

Fitting costs nothing beyond evaluating the kernel gains on the basis
spectrum: the regularized least-squares problem over the graph has the
closed-form solution

    y_hat = U diag(H(lambda)) U^T s,   H(lambda) = 1 / (1 + R(lambda)/phi)

so scoring a user is two thin matrix-vector products.  The map is linear
in the observation vector, which makes folding in one new observation an
exact rank-one style update rather than a refit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .kernels import KernelSpec, h_diagonal
from .spectral import SpectralBasis


@dataclass
class FilterModel:
    """A spectral basis with kernel gains baked in."""

    basis: SpectralBasis
    kernel: KernelSpec
    phi: float
    gains: np.ndarray

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def k(self) -> int:
        return self.basis.k


@dataclass
class Prediction:
    """Scores for every item plus the observations that produced them."""

    scores: np.ndarray
    observed: frozenset


def fit(basis: SpectralBasis, kernel: KernelSpec, phi: float = 10.0) -> FilterModel:
    """Precompute the diagonal gains for a kernel on this spectrum.

    Raises KernelDomainError when the basis spectrum leaves the kernel's
    domain (e.g. a random-walk origin below the top eigenvalue).
    """
    gains = h_diagonal(kernel, basis.eigenvalues, phi)
    return FilterModel(basis, kernel, float(phi), gains)


def rows_to_coefficients(model: FilterModel, rows: Iterable[int]) -> np.ndarray:
    """Frequency coefficients U^T s of a one-hot set without forming s."""
    idx = list(rows)
    if not idx:
        return np.zeros(model.k)
    return model.basis.vectors[idx].sum(axis=0)


def reconstruct(model: FilterModel, s: np.ndarray) -> Prediction:
    """Filter an observation vector into scores over all items."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (model.n,):
        raise ValueError(f"observation vector must have shape ({model.n},), got {s.shape}")
    coeffs = model.gains * (model.basis.vectors.T @ s)
    scores = model.basis.vectors @ coeffs
    return Prediction(scores, frozenset(np.flatnonzero(s).tolist()))


def incremental_update(model: FilterModel, pred: Prediction, delta_rows: Iterable[int]) -> Prediction:
    """Fold new observations into an existing prediction exactly.

    Linearity of the filter means adding the filtered one-hot delta
    reproduces a full recomputation bit for bit.  The delta must be
    disjoint from the observations already folded in.
    """
    delta = frozenset(int(r) for r in delta_rows)
    overlap = delta & pred.observed
    if overlap:
        raise ValueError(f"delta items already observed: {sorted(overlap)[:5]}")
    bad = [r for r in delta if not 0 <= r < model.n]
    if bad:
        raise ValueError(f"delta row {bad[0]} outside [0, {model.n})")
    coeffs = model.gains * rows_to_coefficients(model, delta)
    scores = pred.scores + model.basis.vectors @ coeffs
    return Prediction(scores, pred.observed | delta)


def recommend_topn(pred: Prediction, n_rec: int, exclude_observed: bool = True) -> np.ndarray:
    """Highest-scoring item rows, ties broken by ascending row index.

    Observed rows are excluded by default.  Asking for more rows than
    there are candidates returns every candidate.
    """
    if n_rec < 1:
        raise ValueError(f"n_rec must be >= 1, got {n_rec}")
    masked = np.asarray(pred.scores, dtype=np.float64).copy()
    if exclude_observed and pred.observed:
        masked[list(pred.observed)] = -np.inf
    order = np.argsort(-masked, kind="stable")
    order = order[np.isfinite(masked[order])]
    return order[:n_rec]
