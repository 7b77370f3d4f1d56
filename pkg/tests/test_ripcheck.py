import numpy as np
import pytest

from colora.numkit import rand_orthonormal
from colora.ripcheck import (
    CSV_COLUMNS,
    csv_row,
    draw_grip_test_family,
    draw_rip_test_matrix,
    draw_unit_core,
    estimate_grip,
    estimate_rip,
    estimate_subisometry,
    estimate_uv_rip,
    grip_deviation,
    quadratic_mean,
    rip_deviation,
    trial_seed,
    write_reports_csv,
)


def _ensemble(n, d, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, d, d))


def _grouped_ensemble(k, n, d, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((k, n, d, d))


class TestDeviationFormulas:
    def test_fixed_point_has_zero_deviation(self):
        # single measurement equal to the unit test matrix: <X, X>^2 = 1
        x = draw_rip_test_matrix(5, 2, 1)
        assert rip_deviation(x[None], x) <= 1e-14

    def test_zero_test_matrix(self):
        ens = _ensemble(4, 5, 2)
        assert rip_deviation(ens, np.zeros((5, 5))) == 0.0
        assert grip_deviation(ens[None], [np.zeros((5, 5))]) == 0.0

    def test_grip_collapses_to_rip_at_single_client(self):
        # same ensemble, same test matrix: the two statistics agree exactly
        ens = _ensemble(64, 6, 3)
        for seed in range(5):
            x = draw_rip_test_matrix(6, 2, seed)
            assert grip_deviation(ens[None], [x]) == pytest.approx(
                rip_deviation(ens, x), abs=1e-12
            )

    def test_subisometry_statistic_scale_invariant(self):
        ens = _grouped_ensemble(2, 16, 5, 4)
        xs = [draw_rip_test_matrix(5, 2, s) for s in (10, 11)]
        stat = sum(quadratic_mean(ens[i], xs[i]) for i in range(2)) / 2
        scaled = sum(quadratic_mean(ens[i], 2.0 * xs[i]) for i in range(2)) / 2
        norm = max(float(np.sum(x * x)) for x in xs)
        norm_scaled = max(float(np.sum(4.0 * x * x)) for x in xs)
        assert stat / norm == pytest.approx(scaled / norm_scaled, rel=1e-12)


class TestDraws:
    def test_rip_draw_unit_norm_and_rank(self):
        x = draw_rip_test_matrix(8, 2, 7)
        assert np.linalg.norm(x, "fro") == pytest.approx(1.0, abs=1e-12)
        s = np.linalg.svd(x, compute_uv=False)
        assert s[2] <= 1e-12

    def test_grip_family_shared_subspaces(self):
        family = draw_grip_test_family(8, 2, 3, 8)
        assert max(np.linalg.norm(x, "fro") for x in family) == pytest.approx(1.0, abs=1e-12)
        # all family members share column space: stacking keeps rank r
        stacked = np.hstack(family)
        s = np.linalg.svd(stacked, compute_uv=False)
        assert s[2] <= 1e-12

    def test_trial_seed_prefix_stable(self):
        a = trial_seed(42, 5)
        b = trial_seed(42, 5)
        assert np.random.default_rng(a).standard_normal(3).tobytes() == \
            np.random.default_rng(b).standard_normal(3).tobytes()


class TestEstimateRip:
    def test_concentration_at_desk_scale(self):
        ens = _ensemble(4096, 8, 10)
        report = estimate_rip(ens, 2, trials=64, seed=0)
        assert report.delta_hat <= 0.25
        assert report.sample_size == 4096

    def test_one_over_sqrt_n_trend(self):
        small = estimate_rip(_ensemble(512, 8, 11), 2, trials=64, seed=1)
        large = estimate_rip(_ensemble(2048, 8, 11), 2, trials=64, seed=1)
        assert 1.3 <= small.delta_hat / large.delta_hat <= 3.0

    def test_monotone_in_trials(self):
        ens = _ensemble(256, 6, 12)
        few = estimate_rip(ens, 2, trials=16, seed=2)
        many = estimate_rip(ens, 2, trials=64, seed=2)
        assert many.delta_hat >= few.delta_hat

    def test_invariant_under_sample_permutation(self):
        ens = _ensemble(128, 6, 13)
        perm = np.random.default_rng(0).permutation(128)
        a = estimate_rip(ens, 2, trials=16, seed=3)
        b = estimate_rip(ens[perm], 2, trials=16, seed=3)
        assert a.delta_hat == pytest.approx(b.delta_hat, abs=1e-12)

    def test_worst_case_payload_reproduces_delta(self):
        ens = _ensemble(128, 6, 14)
        report = estimate_rip(ens, 2, trials=32, seed=4)
        x = draw_rip_test_matrix(6, 2, trial_seed(report.worst_case_payload.seed,
                                                  report.worst_case_payload.trial))
        assert rip_deviation(ens, x) == pytest.approx(report.delta_hat, abs=1e-14)


class TestEstimateGrip:
    def test_concentration(self):
        ens = _grouped_ensemble(4, 512, 8, 20)
        report = estimate_grip(ens, 2, trials=64, seed=5)
        assert report.delta_hat <= 0.3
        assert report.sample_size == 2048

    def test_sample_scaling(self):
        small = estimate_grip(_grouped_ensemble(4, 512, 8, 21), 2, trials=64, seed=6)
        large = estimate_grip(_grouped_ensemble(4, 2048, 8, 21), 2, trials=64, seed=6)
        assert 1.3 <= small.delta_hat / large.delta_hat <= 3.0

    def test_monotone_in_trials(self):
        ens = _grouped_ensemble(2, 128, 6, 22)
        few = estimate_grip(ens, 2, trials=8, seed=7)
        many = estimate_grip(ens, 2, trials=32, seed=7)
        assert many.delta_hat >= few.delta_hat

    def test_invariant_under_sample_permutation(self):
        ens = _grouped_ensemble(2, 64, 6, 24)
        perm = np.random.default_rng(1).permutation(64)
        a = estimate_grip(ens, 2, trials=8, seed=8)
        b = estimate_grip(ens[:, perm], 2, trials=8, seed=8)
        assert a.delta_hat == pytest.approx(b.delta_hat, abs=1e-12)

    def test_worst_case_payload_reproduces_delta(self):
        ens = _grouped_ensemble(2, 128, 6, 23)
        report = estimate_grip(ens, 2, trials=16, seed=8)
        family = draw_grip_test_family(6, 2, 2, trial_seed(report.worst_case_payload.seed,
                                                           report.worst_case_payload.trial))
        assert grip_deviation(ens, family) == pytest.approx(report.delta_hat, abs=1e-14)


class TestEstimateUvRip:
    def test_concentration(self):
        u = rand_orthonormal(8, 2, 30)
        v = rand_orthonormal(8, 2, 31)
        report = estimate_uv_rip(u, v, _ensemble(4096, 8, 32), trials=64, seed=9)
        assert report.delta_hat <= 0.25

    def test_rotation_invariance_of_quadratic_form(self):
        u = rand_orthonormal(8, 3, 33)
        v = rand_orthonormal(8, 3, 34)
        q1 = rand_orthonormal(3, 3, 35)
        q2 = rand_orthonormal(3, 3, 36)
        ens = _ensemble(64, 8, 37)
        for seed in range(4):
            core = draw_unit_core(3, seed)
            base = rip_deviation(ens, u @ core @ v.T)
            rotated = rip_deviation(ens, (u @ q1) @ (q1.T @ core @ q2) @ (v @ q2).T)
            assert rotated == pytest.approx(base, abs=1e-12)

    def test_requires_orthonormal_factors(self):
        with pytest.raises(ValueError):
            estimate_uv_rip(np.ones((6, 2)), rand_orthonormal(6, 2, 1),
                            _ensemble(8, 6, 38), trials=2, seed=0)

    def test_worst_trial_reproducible(self):
        u = rand_orthonormal(6, 2, 39)
        v = rand_orthonormal(6, 2, 40)
        ens = _ensemble(64, 6, 41)
        report = estimate_uv_rip(u, v, ens, trials=16, seed=10)
        core = draw_unit_core(2, trial_seed(report.worst_case_payload.seed,
                                            report.worst_case_payload.trial))
        assert rip_deviation(ens, u @ core @ v.T) == pytest.approx(report.delta_hat, abs=1e-14)


class TestEstimateSubisometry:
    def test_concentration_near_one(self):
        ens = _grouped_ensemble(4, 2048, 8, 50)
        a_hat = estimate_subisometry(ens, 2, trials=64, seed=11)
        assert a_hat <= 2.0

    def test_monotone_in_trials(self):
        ens = _grouped_ensemble(2, 64, 6, 51)
        few = estimate_subisometry(ens, 2, trials=8, seed=12)
        many = estimate_subisometry(ens, 2, trials=32, seed=12)
        assert many >= few

    def test_contrived_unit_ratio(self):
        x = draw_rip_test_matrix(5, 2, 60)
        assert quadratic_mean(x[None], x) == pytest.approx(1.0, abs=1e-12)

    def test_invariant_under_sample_permutation(self):
        ens = _grouped_ensemble(2, 64, 6, 52)
        perm = np.random.default_rng(2).permutation(64)
        a = estimate_subisometry(ens, 2, trials=8, seed=13)
        b = estimate_subisometry(ens[:, perm], 2, trials=8, seed=13)
        assert a == pytest.approx(b, abs=1e-12)


class TestCsvExport:
    def test_row_and_file(self, tmp_path):
        row = csv_row("grip", 8, 2, 4, 512, 64, 0.125, 7)
        path = tmp_path / "reports.csv"
        write_reports_csv(path, [row])
        lines = path.read_text().strip().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert lines[1] == "grip,8,2,4,512,64,0.125,7"
