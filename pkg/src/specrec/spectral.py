"""Truncated spectral bases and the graph Fourier transform.

A basis holds the k smallest Laplacian eigenvalues and their orthonormal
eigenvectors.  ``exact_eigs`` computes them directly; ``nystrom_eigs``
approximates them by sampling columns of the similarity S = I - L and
running a randomized range finder on the sampled block, which scales to
graphs where a full decomposition is out of reach.

Eigenvector signs are fixed so each column's largest-magnitude entry is
positive, making repeated runs byte-comparable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.sparse.linalg import eigsh

from .graphs import Laplacian, content_hash

_DENSE_LIMIT = 2048  # below this, a dense solve is faster and more robust
_EIG_FLOOR = 1e-10


class NumericError(RuntimeError):
    """An eigensolver failed to converge or produced invalid output."""


class RankDeficiencyError(RuntimeError):
    """The sampled block cannot support the requested rank; increase l."""


@dataclass
class SpectralBasis:
    """k smallest-eigenvalue pairs of a graph Laplacian.

    eigenvalues : ascending, nonnegative, length k
    vectors     : n-by-k, orthonormal columns (near-orthonormal for the
                  sampled approximation)
    method      : provenance metadata (solver name and its parameters)
    laplacian_hash : content hash of the operator that produced the basis
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    method: dict = field(default_factory=dict)
    laplacian_hash: str = ""

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def k(self) -> int:
        return self.vectors.shape[1]


def _fix_signs(U: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def exact_eigs(lap: Laplacian, k: int) -> SpectralBasis:
    """k smallest eigenpairs, dense for moderate n, Lanczos otherwise.

    The Lanczos path uses a fixed start vector so results are
    deterministic for a given operator.
    """
    n = lap.n
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")

    if n <= _DENSE_LIMIT or k > n // 3:
        dense = lap.matrix.toarray()
        vals, vecs = eigh(dense, subset_by_index=[0, k - 1])
    else:
        v0 = np.full(n, 1.0 / np.sqrt(n))
        try:
            vals, vecs = eigsh(lap.matrix, k=k, which="SA", v0=v0)
        except Exception as exc:  # ArpackNoConvergence and friends
            raise NumericError(f"sparse eigensolver failed: {exc}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]

    vals = np.maximum(vals, 0.0)  # clamp eigenvalue roundoff below zero
    return SpectralBasis(vals, _fix_signs(vecs), {"name": "exact", "k": k}, content_hash(lap))


def nystrom_eigs(
    lap: Laplacian,
    k: int,
    l: int,
    p: int = 10,
    q: int = 2,
    seed: int = 9876,
    inner: str = "gram",
) -> SpectralBasis:
    """Randomized column-sampled approximation of the k smallest eigenpairs.

    Works on the similarity S = I - L, which must be positive
    semidefinite.  Samples ``l`` columns without replacement to get the
    tall slice C and its square block A, runs ``q`` power iterations of A
    against a Gaussian test matrix with ``p`` extra columns, solves the
    projected eigenproblem, and lifts the eigenvectors back to all n
    vertices through C.

    ``inner`` picks the matrix whose eigenpairs seed the lift.  The
    default "gram" uses the Gram matrix of the lifted square root
    C A^{-1/2}; because that Gram pools all n rows, its eigenvalues
    estimate the spectrum of the full similarity.  "block" uses the
    sampled block A itself, whose eigenvalues live at the scale of the
    l-vertex subgraph; both choices coincide when l = n.

    The lifted eigenvectors are re-orthonormalized through their
    symmetric polar factor, which perturbs each column minimally while
    restoring U^T U = I.
    """
    n = lap.n
    if not 1 <= k <= l <= n:
        raise ValueError(f"need 1 <= k <= l <= n, got k={k} l={l} n={n}")
    if p < 0 or q < 1:
        raise ValueError(f"need p >= 0 and q >= 1, got p={p} q={q}")
    r = k + p
    if r > l:
        raise ValueError(f"k + p = {r} exceeds sample size l = {l}")
    if inner not in ("gram", "block"):
        raise ValueError(f"inner must be 'gram' or 'block', got {inner!r}")

    rng = np.random.default_rng(seed)
    cols = np.sort(rng.choice(n, size=l, replace=False))

    S = sparse.identity(n, format="csr") - lap.matrix
    C = np.asarray(S[:, cols].todense())
    A = C[cols, :]
    A = (A + A.T) * 0.5

    # A^{-1/2} with a floor so a rank-deficient block stays usable; the
    # floored directions carry no similarity mass and drop out of the lift
    mu, V = eigh(A)
    A_inv_half = (V / np.sqrt(np.maximum(mu, _EIG_FLOOR))) @ V.T

    if inner == "gram":
        G = C @ A_inv_half
        W = G.T @ G
        W = (W + W.T) * 0.5
    else:
        W = A

    omega = rng.standard_normal((l, r))
    Y = omega
    for _ in range(q):
        Y = A @ Y
    Q, _ = np.linalg.qr(Y)

    lhs = Q.T @ omega  # r-by-r
    rhs = Q.T @ (W @ omega)
    try:
        Z = np.linalg.solve(lhs.T, rhs.T).T
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"projected system is singular: {exc}") from exc

    zvals, zvecs = np.linalg.eig(Z)
    scale = max(np.max(np.abs(zvals)), 1.0)
    if np.max(np.abs(zvals.imag)) > 1e-6 * scale:
        raise NumericError("projected eigenproblem returned complex eigenvalues")
    zvals, zvecs = zvals.real, zvecs.real
    top = np.argsort(zvals)[::-1][:k]
    sigma = zvals[top]
    U_w = Q @ zvecs[:, top]

    U = C @ (A_inv_half @ U_w) / np.sqrt(np.maximum(sigma, _EIG_FLOOR))[None, :]

    # polar factor: closest matrix with orthonormal columns; repeat while
    # an ill-conditioned Gram keeps one pass short of machine precision.
    # A collapsed Gram means the sampled columns could not carry k
    # directions, except at k = n where the orthonormal completion is
    # forced and therefore still correct.
    for _ in range(3):
        gram = U.T @ U
        gvals, gvecs = eigh(gram)
        if k < n and gvals[0] <= 1e-8:
            raise RankDeficiencyError("lifted basis is rank deficient; increase the sample size l")
        if np.abs(gram - np.eye(k)).max() <= 1e-12:
            break
        U = U @ ((gvecs / np.sqrt(np.maximum(gvals, 1e-15))) @ gvecs.T)

    lam = np.maximum(1.0 - sigma, 0.0)
    order = np.argsort(lam, kind="stable")
    meta = {"name": "nystrom", "k": k, "l": l, "p": p, "q": q, "seed": seed, "inner": inner}
    return SpectralBasis(lam[order], _fix_signs(U[:, order]), meta, content_hash(lap))


def gft(basis: SpectralBasis, f: np.ndarray) -> np.ndarray:
    """Analysis transform: frequency coefficients U^T f.

    Accepts a length-n vector or an n-by-b batch of columns.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] != basis.n:
        raise ValueError(f"signal has {f.shape[0]} entries, basis expects {basis.n}")
    return basis.vectors.T @ f


def igft(basis: SpectralBasis, c: np.ndarray) -> np.ndarray:
    """Synthesis transform: vertex signal U c."""
    c = np.asarray(c, dtype=np.float64)
    if c.shape[0] != basis.k:
        raise ValueError(f"coefficients have {c.shape[0]} entries, basis expects {basis.k}")
    return basis.vectors @ c


def band_indices(basis: SpectralBasis, omega: float) -> np.ndarray:
    """Indices of basis columns inside the band [0, omega]."""
    return np.flatnonzero(basis.eigenvalues <= omega)


def save_basis(basis: SpectralBasis, path) -> None:
    meta = dict(basis.method)
    meta["laplacian_hash"] = basis.laplacian_hash
    np.savez_compressed(
        path,
        eigenvalues=basis.eigenvalues,
        vectors=basis.vectors,
        meta=np.array(json.dumps(meta, sort_keys=True)),
    )


def load_basis(path) -> SpectralBasis:
    with np.load(path, allow_pickle=False) as data:
        vals = np.array(data["eigenvalues"])
        vecs = np.array(data["vectors"])
        meta = json.loads(str(data["meta"]))
    if vecs.ndim != 2 or vals.shape != (vecs.shape[1],):
        raise ValueError("basis file is malformed")
    lap_hash = meta.pop("laplacian_hash", "")
    return SpectralBasis(vals, vecs, meta, lap_hash)
