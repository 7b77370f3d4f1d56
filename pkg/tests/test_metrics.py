import numpy as np
import pytest

from colora.errors import DegenerateAverage, RankDeficient
from colora.metrics import (
    conditioning,
    reconstruction_error,
    similarity_mean,
    spectral_norm,
    subspace_dist,
    subspace_similarity,
    task_similarity_xi,
)
from colora.numkit import rand_gaussian, rand_orthonormal
from colora.taskgen import GroundTruth

E3 = np.eye(3)
INV_SQRT2 = 1.0 / np.sqrt(2.0)


def _random_basis_pair(seed, d=8, r=3):
    return rand_gaussian(d, r, 2 * seed), rand_gaussian(d, r, 2 * seed + 1)


class TestSpectralNorm:
    @pytest.mark.parametrize("seed", range(8))
    def test_matches_svd_oracle(self, seed):
        m = rand_gaussian(6, 4, 300 + seed)
        assert abs(spectral_norm(m) - np.linalg.norm(m, 2)) <= 1e-9 * np.linalg.norm(m, 2)

    def test_zero_matrix(self):
        assert spectral_norm(np.zeros((3, 2))) == 0.0

    def test_start_vector_orthogonal_to_range(self):
        # all-ones start lies in the null space of m^T m; the ramp restart
        # must still find sigma_1 = sqrt(2)
        m = np.array([[1.0, -1.0]])
        assert abs(spectral_norm(m) - np.sqrt(2.0)) <= 1e-9


class TestSubspaceDist:
    def test_same_input_is_zero(self):
        x = rand_gaussian(6, 2, 9)
        assert subspace_dist(x, x) <= 1e-12

    def test_orthogonal_lines(self):
        assert subspace_dist(E3[:, :1], E3[:, 1:2]) == pytest.approx(1.0, abs=1e-12)

    def test_forty_five_degrees(self):
        diag = np.array([[1.0], [1.0]]) / np.sqrt(2.0)
        e1 = np.array([[1.0], [0.0]])
        assert subspace_dist(e1, diag) == pytest.approx(INV_SQRT2, abs=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_symmetry_exact(self, seed):
        x1, x2 = _random_basis_pair(seed)
        assert subspace_dist(x1, x2) == subspace_dist(x2, x1)

    @pytest.mark.parametrize("seed", range(10))
    def test_triangle_inequality(self, seed):
        x1, x2 = _random_basis_pair(seed)
        x3 = rand_gaussian(8, 3, 1000 + seed)
        d12 = subspace_dist(x1, x2)
        d13 = subspace_dist(x1, x3)
        d23 = subspace_dist(x3, x2)
        assert d12 <= d13 + d23 + 1e-10

    @pytest.mark.parametrize("seed", range(10))
    def test_invariant_under_right_multiplication(self, seed):
        x1, x2 = _random_basis_pair(seed)
        t = rand_gaussian(3, 3, 500 + seed) + 3.0 * np.eye(3)
        assert abs(subspace_dist(x1 @ t, x2) - subspace_dist(x1, x2)) <= 1e-10

    def test_rank_deficient_propagates(self):
        col = np.arange(1.0, 5.0)[:, None]
        with pytest.raises(RankDeficient):
            subspace_dist(np.hstack([col, col]), rand_gaussian(4, 2, 1))

    @pytest.mark.parametrize("seed", range(10))
    def test_bound_by_similarity(self, seed):
        # dist^2 <= r (1 - sim^2)
        x1, x2 = _random_basis_pair(seed)
        d = subspace_dist(x1, x2)
        s = subspace_similarity(x1, x2)
        assert d * d <= 3 * (1.0 - s * s) + 1e-10


class TestSubspaceSimilarity:
    def test_identical_spans(self):
        x = rand_gaussian(6, 2, 3)
        assert subspace_similarity(x, x @ np.array([[2.0, 1.0], [0.0, 3.0]])) == pytest.approx(1.0, abs=1e-12)

    def test_fully_orthogonal_spans(self):
        e = np.eye(6)
        assert subspace_similarity(e[:, :2], e[:, 2:4]) == pytest.approx(0.0, abs=1e-12)

    def test_one_shared_direction(self):
        # span{e1,e2} vs span{e1,e3}: ||Q1^T Q2||_F = 1, score 1/sqrt(2)
        assert subspace_similarity(E3[:, [0, 1]], E3[:, [0, 2]]) == pytest.approx(
            INV_SQRT2, abs=1e-12
        )

    @pytest.mark.parametrize("seed", range(10))
    def test_range(self, seed):
        x1, x2 = _random_basis_pair(seed)
        assert 0.0 <= subspace_similarity(x1, x2) <= 1.0


def _manual_ground_truth(u_list, v_list, lambdas):
    targets = [u @ l @ v.T for u, l, v in zip(u_list, lambdas, v_list)]
    return GroundTruth(
        u_star=u_list[0], v_star=v_list[0], u_i=u_list, v_i=v_list,
        lambdas=lambdas, targets=targets,
    )


class TestTaskSimilarityXi:
    def test_identical_subspaces(self):
        u = rand_orthonormal(6, 2, 1)
        v = rand_orthonormal(6, 2, 2)
        lams = [np.diag([2.0, 1.0]), np.array([[1.0, 0.5], [0.0, 2.0]])]
        gt = _manual_ground_truth([u, u], [v, v], lams)
        assert task_similarity_xi(gt) >= 1.0 - 1e-9

    def test_half_overlap_columns_identical_rows(self):
        e6 = np.eye(6)
        u1, u2 = e6[:, [0, 1]], e6[:, [0, 2]]
        v = e6[:, [3, 4]]
        lams = [np.diag([1.0, 1.0])] * 2
        gt = _manual_ground_truth([u1, u2], [v, v], lams)
        assert task_similarity_xi(gt) == pytest.approx(INV_SQRT2, abs=1e-9)

    def test_never_exceeds_any_pairwise_similarity(self):
        us = [rand_orthonormal(8, 2, s) for s in (1, 2, 3)]
        vs = [rand_orthonormal(8, 2, s) for s in (4, 5, 6)]
        lams = [np.eye(2)] * 3
        gt = _manual_ground_truth(us, vs, lams)
        xi = task_similarity_xi(gt)
        for i in range(3):
            for j in range(i + 1, 3):
                assert xi <= subspace_similarity(us[i], us[j]) + 1e-12
                assert xi <= subspace_similarity(vs[i], vs[j]) + 1e-12

    def test_needs_two_tasks(self):
        u = rand_orthonormal(6, 2, 1)
        gt = _manual_ground_truth([u], [u], [np.eye(2)])
        with pytest.raises(ValueError):
            task_similarity_xi(gt)


class TestConditioning:
    def test_single_diagonal_target(self):
        report = conditioning([np.diag([2.0, 1.0, 0.0])], 2)
        assert report.kappa == pytest.approx(2.0, abs=1e-12)
        assert report.gamma == pytest.approx(2.0, abs=1e-12)

    def test_identical_flat_spectrum(self):
        q = rand_orthonormal(5, 5, 8)
        m = q[:, :2] @ q[:, 2:4].T
        report = conditioning([m, m, m], 2)
        assert report.kappa == pytest.approx(1.0, abs=1e-10)

    def test_degenerate_average(self):
        m = np.diag([1.0, 0.0])
        with pytest.raises(DegenerateAverage):
            conditioning([m, -m], 1)


class TestReconstructionError:
    def test_exact_factors(self):
        u = rand_orthonormal(6, 2, 11)
        v = rand_orthonormal(6, 2, 12)
        lam = np.diag([3.0, 1.0])
        assert reconstruction_error(u, lam, v, u @ lam @ v.T) <= 1e-12

    def test_zeroed_core_gives_target_norm(self):
        u = rand_orthonormal(6, 2, 13)
        v = rand_orthonormal(6, 2, 14)
        lam = np.diag([3.0, 1.0])
        m = u @ lam @ v.T
        assert reconstruction_error(u, np.zeros((2, 2)), v, m) == pytest.approx(
            3.0, abs=1e-10
        )

    def test_matches_svd_oracle_on_random_case(self):
        u = rand_orthonormal(4, 2, 15)
        v = rand_orthonormal(4, 2, 16)
        lam = rand_gaussian(2, 2, 17)
        m_star = rand_gaussian(4, 4, 18)
        diff = u @ lam @ v.T - m_star
        assert reconstruction_error(u, lam, v, m_star) == pytest.approx(
            np.linalg.norm(diff, 2), abs=1e-9
        )


class TestSimilarityMean:
    def test_plain_mean(self):
        assert similarity_mean([0.2, 0.4, 0.6]) == pytest.approx(0.4)

    def test_weighted(self):
        assert similarity_mean([0.0, 1.0], weights=[1.0, 3.0]) == pytest.approx(0.75)

    def test_validation(self):
        with pytest.raises(ValueError):
            similarity_mean([])
        with pytest.raises(ValueError):
            similarity_mean([0.5], weights=[0.0])
