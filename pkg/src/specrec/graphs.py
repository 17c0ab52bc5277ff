"""Item graph Laplacians built from the binary rating matrix.

Two constructions are supported.  The hypergraph form treats every user
as a hyperedge over the items they touched and normalizes by vertex and
edge degrees, giving a spectrum inside [0, 1].  The covariance form
connects items by the (clipped) covariance of their rating rows and
normalizes like an ordinary weighted graph, giving a spectrum inside
[0, 2].
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.io import mmwrite


class DegenerateDegreeError(ValueError):
    """A vertex or edge has zero degree and cannot be normalized."""


class DegenerateRowError(ValueError):
    """An item row is constant, so its covariance is undefined as a weight."""


@dataclass
class Laplacian:
    """Sparse symmetric positive semidefinite n-by-n operator."""

    matrix: sparse.csr_matrix
    kind: str

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _symmetrize(mat: sparse.spmatrix) -> sparse.csr_matrix:
    sym = (mat + mat.T) * 0.5
    return sparse.csr_matrix(sym)


def hypergraph_laplacian(R) -> Laplacian:
    """Normalized hypergraph Laplacian of an item-by-user incidence matrix.

    Users act as hyperedges: L = I - Dv^{-1/2} R De^{-1} R^T Dv^{-1/2},
    where Dv holds item degrees (row sums) and De user degrees (column
    sums).  Zero-degree rows or columns are rejected; prune them when
    building the matrix instead.
    """
    R = sparse.csr_matrix(R, dtype=np.float64)
    n, m = R.shape
    dv = np.asarray(R.sum(axis=1)).ravel()
    de = np.asarray(R.sum(axis=0)).ravel()
    bad_v = np.flatnonzero(dv <= 0)
    if bad_v.size:
        raise DegenerateDegreeError(f"item row {bad_v[0]} has zero degree")
    bad_e = np.flatnonzero(de <= 0)
    if bad_e.size:
        raise DegenerateDegreeError(f"user column {bad_e[0]} has zero degree")

    # B = Dv^{-1/2} R De^{-1/2} makes the similarity an explicit B B^T
    B = sparse.diags(1.0 / np.sqrt(dv)) @ R @ sparse.diags(1.0 / np.sqrt(de))
    S = B @ B.T
    L = sparse.identity(n, format="csr") - S
    return Laplacian(_symmetrize(L), "hypergraph")


def covariance_laplacian(R) -> Laplacian:
    """Normalized Laplacian of the item covariance graph.

    Edge weights are covariances between item rows taken across train
    user columns, with the diagonal zeroed and negative entries clipped
    to zero so the result is a valid weighted graph.  Items whose rows
    are constant (zero variance) are rejected.  Items isolated after
    clipping keep a unit diagonal in the Laplacian.
    """
    dense = np.asarray(
        R.toarray() if sparse.issparse(R) else R,
        dtype=np.float64,
    )
    n, m = dense.shape
    if n < 2:
        raise DegenerateRowError("need at least 2 items for a covariance graph")
    if m < 2:
        raise DegenerateRowError("need at least 2 train users to estimate covariance")

    centered = dense - dense.mean(axis=1, keepdims=True)
    var = np.einsum("ij,ij->i", centered, centered) / m
    bad = np.flatnonzero(var <= 0)
    if bad.size:
        raise DegenerateRowError(f"item row {bad[0]} is constant across train users")

    A = centered @ centered.T / m
    np.fill_diagonal(A, 0.0)
    np.clip(A, 0.0, None, out=A)

    deg = A.sum(axis=1)
    with np.errstate(divide="ignore"):
        dinv = 1.0 / np.sqrt(deg)
    dinv[~np.isfinite(dinv)] = 0.0  # isolated items: Moore-Penrose convention
    L = np.eye(n) - (dinv[:, None] * A) * dinv[None, :]
    return Laplacian(_symmetrize(sparse.csr_matrix(L)), "covariance")


def content_hash(lap: Laplacian) -> str:
    """SHA-256 over the canonical COO triples, shape, and kind."""
    coo = lap.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    h = hashlib.sha256()
    h.update(lap.kind.encode())
    h.update(np.asarray(coo.shape, dtype=np.int64).tobytes())
    h.update(coo.row[order].astype(np.int64).tobytes())
    h.update(coo.col[order].astype(np.int64).tobytes())
    h.update(coo.data[order].astype(np.float64).tobytes())
    return h.hexdigest()


def save_matrix_market(lap: Laplacian, path) -> None:
    """Dump the operator in Matrix Market format for external inspection."""
    mmwrite(str(path), lap.matrix.tocoo(), comment=f"kind={lap.kind}")
