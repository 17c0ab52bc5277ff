import numpy as np
import pytest
import scipy.sparse as sp

from specrec import (
    build_matrix,
    exact_eigs,
    gft,
    hypergraph_laplacian,
    igft,
    load_basis,
    nystrom_eigs,
    save_basis,
    split_users,
    window_log,
)
from specrec.spectral import RankDeficiencyError, band_indices

from conftest import random_rating_matrix

INV_SQRT2 = 1.0 / np.sqrt(2.0)


@pytest.fixture(scope="module")
def lowrank_lap():
    # few training users, so the similarity rank (24) sits well below the
    # sketch width and sampled-column counts used in the tests
    log = window_log(n_items=120, n_users=30, seed=1, events_lo=30, events_hi=50, width=12.0)
    split = split_users(log, (8, 1, 1), 9876)
    return hypergraph_laplacian(build_matrix(log, split).matrix)


class TestExactEigs:
    def test_path3_frozen_eigenvalues(self, path3_basis):
        assert np.allclose(path3_basis.eigenvalues, [0.0, 0.5, 1.0], atol=1e-10)

    def test_path3_frozen_eigenvectors(self, path3_basis):
        # analytic eigenvectors with the largest-entry-positive convention
        expect = np.array([
            [0.5, INV_SQRT2, 0.5],
            [INV_SQRT2, 0.0, -INV_SQRT2],
            [0.5, -INV_SQRT2, 0.5],
        ]).T
        got = path3_basis.vectors
        for j in range(3):
            assert np.allclose(got[:, j], expect[j], atol=1e-10) or np.allclose(
                got[:, j], -expect[j], atol=1e-10
            )
        # sign convention: largest-magnitude entry positive
        for j in range(3):
            col = got[:, j]
            assert col[np.argmax(np.abs(col))] > 0

    def test_diagonalizes_operator(self):
        rng = np.random.default_rng(0)
        R = random_rating_matrix(rng, 30, 18)
        lap = hypergraph_laplacian(R)
        basis = exact_eigs(lap, 30)
        resid = lap.matrix @ basis.vectors - basis.vectors * basis.eigenvalues
        assert np.abs(resid).max() < 1e-6
        assert np.abs(basis.vectors.T @ basis.vectors - np.eye(30)).max() < 1e-8

    def test_truncation_matches_full(self):
        rng = np.random.default_rng(1)
        R = random_rating_matrix(rng, 20, 10)
        lap = hypergraph_laplacian(R)
        full = exact_eigs(lap, 20)
        part = exact_eigs(lap, 6)
        assert np.allclose(part.eigenvalues, full.eigenvalues[:6], atol=1e-12)

    def test_eigenvalues_ascending_nonnegative(self, small_cohort):
        _, _, _, lap = small_cohort
        basis = exact_eigs(lap, lap.n)
        assert np.all(np.diff(basis.eigenvalues) >= -1e-14)
        assert basis.eigenvalues[0] >= 0.0

    def test_sparse_solver_path_deterministic(self):
        # n above the dense threshold with small k exercises the Lanczos path
        rng = np.random.default_rng(2)
        rows = rng.integers(0, 2100, 12000)
        cols = rng.integers(0, 420, 12000)
        R = sp.csr_matrix((np.ones(12000), (rows, cols)), shape=(2100, 420))
        R.data[:] = 1.0
        empty = np.flatnonzero(np.asarray(R.sum(axis=1)).ravel() == 0)
        if empty.size:
            patch = sp.csr_matrix(
                (np.ones(empty.size), (empty, np.zeros(empty.size, dtype=int))), shape=R.shape
            )
            R = sp.csr_matrix((R + patch).minimum(1.0))
        lap = hypergraph_laplacian(R)
        a = exact_eigs(lap, 5)
        b = exact_eigs(lap, 5)
        assert np.array_equal(a.eigenvalues, b.eigenvalues)
        assert np.array_equal(a.vectors, b.vectors)
        resid = lap.matrix @ a.vectors - a.vectors * a.eigenvalues
        assert np.abs(resid).max() < 1e-6

    def test_k_out_of_range(self, path3_lap):
        with pytest.raises(ValueError):
            exact_eigs(path3_lap, 0)
        with pytest.raises(ValueError):
            exact_eigs(path3_lap, 4)


class TestNystrom:
    def test_full_sampling_matches_exact(self):
        # similarity has full rank here (many more users than items), so
        # sampling every column reproduces the exact spectrum
        log = window_log(n_items=24, n_users=200, seed=3, events_lo=6, events_hi=12, width=6.0)
        split = split_users(log, (8, 1, 1), 9876)
        lap = hypergraph_laplacian(build_matrix(log, split).matrix)
        n = lap.n
        ex = exact_eigs(lap, n)
        ny = nystrom_eigs(lap, n, n, p=0, q=1, seed=11)
        assert np.abs(ny.eigenvalues - ex.eigenvalues).max() < 1e-6

    def test_fixture_full_sampling(self, path3_lap, path3_basis):
        ny = nystrom_eigs(path3_lap, 3, 3, p=0, q=1, seed=5)
        assert np.abs(ny.eigenvalues - path3_basis.eigenvalues).max() < 1e-6
        assert np.abs(ny.vectors.T @ ny.vectors - np.eye(3)).max() < 1e-3

    def test_deterministic_for_fixed_seed(self, lowrank_lap):
        a = nystrom_eigs(lowrank_lap, 10, 40, p=14, q=2, seed=42)
        b = nystrom_eigs(lowrank_lap, 10, 40, p=14, q=2, seed=42)
        assert np.array_equal(a.eigenvalues, b.eigenvalues)
        assert np.array_equal(a.vectors, b.vectors)

    def test_near_orthonormal_columns(self, lowrank_lap):
        ny = nystrom_eigs(lowrank_lap, 10, 40, p=14, q=2, seed=42)
        assert np.abs(ny.vectors.T @ ny.vectors - np.eye(10)).max() <= 1e-3

    def test_accurate_when_rank_within_sketch(self, lowrank_lap):
        # similarity rank 24 <= k + p, so the sketch captures everything
        ex = exact_eigs(lowrank_lap, 10)
        ny = nystrom_eigs(lowrank_lap, 10, 40, p=14, q=2, seed=7)
        assert np.abs(ny.eigenvalues - ex.eigenvalues).max() < 1e-8

    def test_overwhelmed_sketch_raises(self, small_cohort):
        # full-rank similarity with a narrow sketch: the projected problem
        # degrades to complex eigenvalues and must refuse rather than guess
        _, _, _, lap = small_cohort
        from specrec.spectral import NumericError
        with pytest.raises(NumericError, match="complex"):
            nystrom_eigs(lap, 10, 30, p=5, q=2, seed=42)

    def test_rank_deficient_sample_raises(self):
        # two disconnected cliques; the seeded draw picks both columns from
        # one clique, leaving only one independent direction for k=2
        R = sp.csr_matrix(np.array(
            [[1, 0], [1, 0], [1, 0], [0, 1], [0, 1], [0, 1]], dtype=float))
        lap = hypergraph_laplacian(R)
        with pytest.raises(RankDeficiencyError, match="increase the sample size"):
            nystrom_eigs(lap, 2, 2, p=0, q=1, seed=0)

    def test_parameter_validation(self, path3_lap):
        with pytest.raises(ValueError, match="k <= l <= n"):
            nystrom_eigs(path3_lap, 3, 2)
        with pytest.raises(ValueError, match="q >= 1"):
            nystrom_eigs(path3_lap, 2, 3, p=0, q=0)
        with pytest.raises(ValueError, match="exceeds sample size"):
            nystrom_eigs(path3_lap, 2, 3, p=5, q=1)
        with pytest.raises(ValueError, match="inner"):
            nystrom_eigs(path3_lap, 2, 3, p=0, q=1, inner="mystery")

    def test_method_metadata_recorded(self, lowrank_lap):
        ny = nystrom_eigs(lowrank_lap, 12, 48, p=12, q=2, seed=42)
        assert ny.method == {
            "name": "nystrom", "k": 12, "l": 48, "p": 12, "q": 2, "seed": 42, "inner": "gram",
        }


class TestTransforms:
    def test_gft_of_basis_column_is_unit(self, path3_basis):
        c = gft(path3_basis, path3_basis.vectors[:, 1])
        assert np.allclose(c, [0.0, 1.0, 0.0], atol=1e-12)

    def test_gft_zero(self, path3_basis):
        assert np.array_equal(gft(path3_basis, np.zeros(3)), np.zeros(3))

    def test_fixture_impulse_coefficients(self, path3_basis):
        c = gft(path3_basis, np.array([1.0, 0.0, 0.0]))
        assert np.allclose(np.abs(c), [0.5, INV_SQRT2, 0.5], atol=1e-10)

    def test_roundtrip_full_basis(self, path3_basis):
        rng = np.random.default_rng(3)
        f = rng.standard_normal(3)
        assert np.allclose(igft(path3_basis, gft(path3_basis, f)), f, atol=1e-12)

    def test_igft_of_unit_coefficient_is_column(self, path3_basis):
        assert np.allclose(igft(path3_basis, np.array([1.0, 0, 0])), path3_basis.vectors[:, 0])

    def test_truncated_roundtrip_is_projection(self, small_cohort):
        _, _, _, lap = small_cohort
        basis = exact_eigs(lap, 8)
        rng = np.random.default_rng(4)
        f = rng.standard_normal(lap.n)
        proj = basis.vectors @ (basis.vectors.T @ f)
        assert np.allclose(igft(basis, gft(basis, f)), proj, atol=1e-12)

    def test_parseval_inequality(self, small_cohort):
        _, _, _, lap = small_cohort
        basis = exact_eigs(lap, 8)
        rng = np.random.default_rng(5)
        for _ in range(20):
            f = rng.standard_normal(lap.n)
            assert np.linalg.norm(gft(basis, f)) <= np.linalg.norm(f) + 1e-12
        inband = basis.vectors @ rng.standard_normal(8)
        assert np.isclose(np.linalg.norm(gft(basis, inband)), np.linalg.norm(inband), atol=1e-12)

    def test_dimension_mismatch(self, path3_basis):
        with pytest.raises(ValueError):
            gft(path3_basis, np.zeros(4))
        with pytest.raises(ValueError):
            igft(path3_basis, np.zeros(5))

    def test_batch_transform(self, path3_basis):
        batch = np.eye(3)
        assert np.allclose(gft(path3_basis, batch), path3_basis.vectors.T, atol=1e-12)


def test_band_membership(small_cohort):
    _, _, _, lap = small_cohort
    basis = exact_eigs(lap, lap.n)
    omega = float(basis.eigenvalues[5])
    band = band_indices(basis, omega)
    assert band.size >= 6
    rng = np.random.default_rng(6)
    inband = basis.vectors[:, band] @ rng.standard_normal(band.size)
    U_b = basis.vectors[:, band]
    assert np.linalg.norm(inband - U_b @ (U_b.T @ inband)) <= 1e-8
    outband = basis.vectors[:, -1]
    assert np.linalg.norm(outband - U_b @ (U_b.T @ outband)) > 0.9


def test_basis_save_load_roundtrip(tmp_path, small_cohort):
    _, _, _, lap = small_cohort
    basis = nystrom_eigs(lap, 6, 20, p=4, q=2, seed=8)
    path = tmp_path / "basis.npz"
    save_basis(basis, path)
    back = load_basis(path)
    assert np.array_equal(back.eigenvalues, basis.eigenvalues)
    assert np.array_equal(back.vectors, basis.vectors)
    assert back.method == basis.method
    assert back.laplacian_hash == basis.laplacian_hash
