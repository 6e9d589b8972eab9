import numpy as np
import pytest

from modalform import (
    DeviationField,
    EUCLIDEAN,
    InterpolationFailureError,
    InvalidParameterError,
    SampleSet,
    build_degraded_projection,
    decompose,
    interpolate,
    reconstruct,
    renormalize,
    run_sweep,
    synthesize_defect,
    uniform_subsample,
    write_case_csv,
)


def degraded_from(dense, sample):
    return DeviationField(sample=sample, values=dense.values[sample.indices])


class TestBuildDegradedProjection:
    def test_full_sample_identity_restriction(self, profile_basis60, profile250):
        sample = SampleSet.of_geometry(profile250)
        projection = build_degraded_projection(profile_basis60, sample)
        np.testing.assert_array_equal(projection.restricted_modes, profile_basis60.modes)
        full_cond = np.linalg.cond(profile_basis60.modes)
        assert projection.condition_number == pytest.approx(full_cond, rel=1e-9)

    def test_point_count_caps_mode_count(self, profile_basis60, profile250):
        sample = uniform_subsample(profile250, 5, seed=1)
        projection = build_degraded_projection(profile_basis60, sample, max_modes=200)
        assert projection.n_kept == 5
        assert projection.kept_mode_numbers == (1, 2, 3, 4, 5)

    def test_farthest_point_sample_is_well_conditioned(self, profile_basis60, profile250):
        sample = uniform_subsample(profile250, 15, seed=0)
        projection = build_degraded_projection(profile_basis60, sample, max_modes=15)
        assert projection.condition_number < 1e8

    def test_rows_are_exact_copies(self, profile_basis60, profile250):
        sample = uniform_subsample(profile250, 20, seed=4)
        projection = build_degraded_projection(profile_basis60, sample)
        np.testing.assert_array_equal(
            projection.restricted_modes,
            profile_basis60.modes[sample.indices][:, : projection.n_kept],
        )

    def test_requires_infinity_norm(self, profile_basis60, profile250):
        euclid = renormalize(profile_basis60, EUCLIDEAN)
        sample = uniform_subsample(profile250, 10, seed=0)
        with pytest.raises(InvalidParameterError):
            build_degraded_projection(euclid, sample)

    def test_rejects_foreign_sample(self, profile_basis60, cap321):
        sample = uniform_subsample(cap321, 10, seed=0)
        with pytest.raises(InvalidParameterError):
            build_degraded_projection(profile_basis60, sample)


class TestInterpolate:
    def test_exact_recovery_in_model_class(self, profile_basis60, profile250):
        rng = np.random.default_rng(17)
        kept = 30
        target = np.zeros(60)
        target[:kept] = rng.uniform(-1.0, 1.0, kept)
        dense = DeviationField(
            sample=SampleSet.of_geometry(profile250),
            values=profile_basis60.modes @ target,
        )
        sample = uniform_subsample(profile250, 40, seed=2)
        projection = build_degraded_projection(profile_basis60, sample, max_modes=kept)
        signature, full = interpolate(degraded_from(dense, sample), projection)
        assert np.linalg.norm(signature.coefficients - target) <= 1e-9 * np.linalg.norm(target)
        assert np.linalg.norm(full.values - dense.values) <= 1e-9 * np.linalg.norm(dense.values)

    def test_zero_measurement_gives_zero(self, profile_basis60, profile250):
        sample = uniform_subsample(profile250, 25, seed=3)
        projection = build_degraded_projection(profile_basis60, sample)
        degraded = DeviationField(sample=sample, values=np.zeros(25))
        signature, full = interpolate(degraded, projection)
        assert np.abs(signature.coefficients).max() == 0.0
        assert np.abs(full.values).max() == 0.0

    def test_sample_mismatch_rejected(self, profile_basis60, profile250):
        sample_a = uniform_subsample(profile250, 25, seed=3)
        sample_b = uniform_subsample(profile250, 25, seed=8)
        projection = build_degraded_projection(profile_basis60, sample_a)
        degraded = DeviationField(sample=sample_b, values=np.zeros(25))
        if np.array_equal(sample_a.indices, sample_b.indices):
            pytest.skip("samples coincide for these seeds")
        with pytest.raises(InvalidParameterError):
            interpolate(degraded, projection)

    def test_rank_deficient_cluster_raises(self, profile_basis60, profile250):
        sample = SampleSet.of_geometry(profile250, np.arange(8))
        projection = build_degraded_projection(profile_basis60, sample)
        degraded = DeviationField(sample=sample, values=np.zeros(8))
        with pytest.raises(InterpolationFailureError, match="8 modes"):
            interpolate(degraded, projection)

    def test_nesting_consistency_with_decompose(self, profile_basis60, profile250):
        rng = np.random.default_rng(23)
        dense = DeviationField(
            sample=SampleSet.of_geometry(profile250), values=rng.normal(size=250)
        )
        projection = build_degraded_projection(
            profile_basis60, SampleSet.of_geometry(profile250)
        )
        _, lifted = interpolate(dense, projection)
        direct = reconstruct(decompose(dense, profile_basis60)).values
        assert np.abs(lifted.values - direct).max() <= 1e-10

    def test_never_fits_more_modes_than_points(self, profile_basis60, profile250):
        for q in (3, 10, 61):
            sample = uniform_subsample(profile250, q, seed=5)
            projection = build_degraded_projection(profile_basis60, sample)
            assert projection.n_kept <= q

    def test_pure_mode_recovery_at_sufficient_density(self, profile_basis60, profile250):
        c = 12
        dense = DeviationField(
            sample=SampleSet.of_geometry(profile250),
            values=profile_basis60.modes[:, c - 1],
        )
        sample = uniform_subsample(profile250, 30, seed=6)
        projection = build_degraded_projection(profile_basis60, sample, max_modes=20)
        assert projection.condition_number < 1e8
        _, full = interpolate(degraded_from(dense, sample), projection)
        assert np.linalg.norm(full.values - dense.values) <= 1e-8


class TestSynthesizeDefect:
    def test_field_range_rescales(self, profile_basis60):
        rng = np.random.default_rng(0)
        _, field = synthesize_defect(profile_basis60, 10, rng, field_range=3.0)
        assert field.values.max() - field.values.min() == pytest.approx(3.0, rel=1e-12)

    def test_complexity_limits(self, profile_basis60):
        rng = np.random.default_rng(0)
        with pytest.raises(InvalidParameterError):
            synthesize_defect(profile_basis60, 61, rng)
        coefficients, _ = synthesize_defect(profile_basis60, 5, rng)
        assert np.abs(coefficients[5:]).max() == 0.0


@pytest.fixture(scope="module")
def small_sweep(profile250, profile_basis60):
    return run_sweep(
        profile250,
        profile_basis60,
        complexities=[3, 9, 15],
        sample_counts=[20, 60, 250],
        trials=3,
        noise_sigma=0.0,
        seed=7,
    )


class TestRunSweep:
    def test_full_density_recovers_exactly(self, small_sweep):
        assert np.all(small_sweep.rms_grid[:, -1] <= 1e-9)

    def test_rms_non_increasing_in_density(self, small_sweep):
        grid = small_sweep.rms_grid
        se = small_sweep.se_grid
        for i in range(grid.shape[0]):
            for j in range(grid.shape[1] - 1):
                slack = np.hypot(se[i, j], se[i, j + 1]) + 1e-9
                assert grid[i, j + 1] <= grid[i, j] + slack

    def test_deterministic(self, profile250, profile_basis60, small_sweep):
        again = run_sweep(
            profile250,
            profile_basis60,
            complexities=[3, 9, 15],
            sample_counts=[20, 60, 250],
            trials=3,
            noise_sigma=0.0,
            seed=7,
        )
        np.testing.assert_array_equal(again.rms_grid, small_sweep.rms_grid)

    def test_grid_shape_and_finiteness(self, small_sweep):
        assert small_sweep.rms_grid.shape == (3, 3)
        assert np.all(np.isfinite(small_sweep.rms_grid))
        assert np.all(small_sweep.rms_grid >= 0.0)

    def test_undersampled_complex_defect_interpolates_poorly(
        self, profile250, profile_basis60
    ):
        result = run_sweep(
            profile250,
            profile_basis60,
            complexities=[40],
            sample_counts=[15],
            trials=3,
            noise_sigma=0.0,
            seed=11,
            field_range=3.0,
        )
        assert result.rms_grid[0, 0] > 0.1 * 3.0 / 3.0  # >10% of the defect range scale

    def test_axis_validation(self, profile250, profile_basis60):
        with pytest.raises(InvalidParameterError):
            run_sweep(profile250, profile_basis60, [3], [50, 20], 2, 0.0, 0)
        with pytest.raises(InvalidParameterError):
            run_sweep(profile250, profile_basis60, [100], [50], 2, 0.0, 0)

    def test_square_fits_leave_missing_cells(self, profile250, profile_basis60):
        # margin 1.0 fits 60 modes to 60 points, beyond what the sample
        # resolves; failed cells are NaN markers, not aborts
        result = run_sweep(
            profile250,
            profile_basis60,
            complexities=[3],
            sample_counts=[60],
            trials=3,
            noise_sigma=0.0,
            seed=7,
            mode_margin=1.0,
        )
        assert np.isnan(result.rms_grid[0, 0])

    def test_csv_export(self, small_sweep, tmp_path):
        path = tmp_path / "sweep.csv"
        small_sweep.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "complexity,sample_count,rms_mm,trials"
        assert len(lines) == 1 + 3 * 3

    def test_json_round_trip_values(self, small_sweep):
        import json

        payload = json.loads(small_sweep.to_json())
        assert payload["trials_per_cell"] == 3
        grid = np.asarray(payload["rms_grid"], dtype=float)
        np.testing.assert_allclose(grid, small_sweep.rms_grid, rtol=1e-15)


class TestCaseCsv:
    def test_columns_and_rows(self, tmp_path, profile250, profile_basis60):
        rng = np.random.default_rng(2)
        _, dense = synthesize_defect(profile_basis60, 8, rng)
        sample = uniform_subsample(profile250, 30, seed=1)
        degraded = degraded_from(dense, sample)
        projection = build_degraded_projection(profile_basis60, sample)
        _, full = interpolate(degraded, projection)
        path = tmp_path / "case.csv"
        write_case_csv(path, profile250, full, degraded, dense)
        lines = path.read_text().strip().splitlines()
        header = "node_index,x_mm,y_mm,z_mm,sampled,measured_mm,interpolated_mm,dense_mm"
        assert lines[0] == header
        assert len(lines) == 251
        sampled_rows = [line for line in lines[1:] if line.split(",")[4] == "1"]
        assert len(sampled_rows) == 30
