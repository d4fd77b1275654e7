import numpy as np
import pytest

from koopeq import (
    Dictionary,
    Kernel,
    KoopmanModel,
    ObservationMap,
    Spectrum,
    Trajectory,
    UndefinedFrequencyError,
    advect_trajectory,
    boundary_jump_excess,
    build_dataset,
    compare_spectra,
    fit_local,
    one_step_error,
    pool_datasets,
    rollout_error,
    shift_trajectory,
    split_dataset,
    spectrum,
    traveling_wave_frequency,
)
from koopeq.pde import GridField

L = 2 * np.pi
N = 32


def make_model(K, q):
    return KoopmanModel(K, Dictionary.identity(q),
                        ObservationMap(Kernel.dirac(), window_width=q),
                        0.1, "local", N, L)


class TestOneStepError:
    def test_exact_linear_model_near_zero_error(self, rng):
        A = 0.9 * np.eye(4) + 0.05 * rng.standard_normal((4, 4))
        Z = rng.standard_normal((4, 30))
        ds_map = ObservationMap(Kernel.dirac(), window_width=4)
        from koopeq import EmbeddedDataset, edmd_fit
        ds = EmbeddedDataset(Z, A @ Z, ds_map, 0.1, N)
        model = make_model(edmd_fit(ds.Z, ds.Zp, Dictionary.identity(4)), 4)
        assert one_step_error(model, ds) < 1e-8

    def test_zero_model_has_unit_relative_error(self, rng):
        from koopeq import EmbeddedDataset
        Z = rng.standard_normal((4, 30))
        ds = EmbeddedDataset(Z, Z, ObservationMap(Kernel.dirac(), window_width=4),
                             0.1, N)
        model = make_model(np.zeros((4, 4)), 4)
        assert one_step_error(model, ds) == pytest.approx(1.0)

    def test_invariant_under_global_shift_with_pooled_fit(self, rng):
        vals = np.cumsum(rng.standard_normal((40, N)), axis=0) * 0.1
        traj = Trajectory(vals, L, tau=0.1)
        obs_map = ObservationMap(Kernel.dirac(), window_width=4, delays=1)

        def err(t):
            model = fit_local(t, obs_map, pool_shifts=True, train_fraction=0.8)
            tests = []
            for anchor in range(N):
                ds = build_dataset(t, obs_map.with_anchor(anchor))
                tests.append(split_dataset(ds, 0.8)[1])
            return one_step_error(model, pool_datasets(tests))

        assert err(traj) == pytest.approx(err(shift_trajectory(traj, 5)), abs=1e-10)


class TestRolloutError:
    def test_identical_trajectories_zero(self, rng):
        vals = rng.standard_normal((20, N))
        traj = Trajectory(vals, L, tau=0.1)
        report = rollout_error(traj, traj)
        assert np.array_equal(report.per_step, np.zeros(20))
        assert report.first_exceed_step is None
        assert report.diverged_at is None

    def test_shifted_wave_prediction_error_is_displacement_norm(self, mu15_traj):
        # predicting y_{k+1} with y_k on a traveling wave: the error per step
        # equals the wave's own one-step displacement, small and bounded
        vals = mu15_traj.values[900:951]
        truth = Trajectory(vals[1:], L, tau=0.2)
        lagged = Trajectory(vals[:-1], L, tau=0.2)
        report = rollout_error(truth, lagged)
        expected = np.linalg.norm(vals[:-1] - vals[1:], axis=1) \
            / np.linalg.norm(vals[1:], axis=1)
        assert np.allclose(report.per_step, expected)
        assert report.per_step.max() < 2.0

    def test_divergent_prediction_truncated_with_flag(self, rng):
        vals = rng.standard_normal((10, N))
        pred = vals.copy()
        pred[6:] = np.inf
        report = rollout_error(Trajectory(vals, L, tau=0.1),
                               Trajectory(pred, L, tau=0.1))
        assert report.diverged_at == 6
        assert report.per_step.shape == (6,)

    def test_shape_mismatch_rejected(self, rng):
        a = Trajectory(rng.standard_normal((5, N)), L, tau=0.1)
        b = Trajectory(rng.standard_normal((6, N)), L, tau=0.1)
        with pytest.raises(ValueError):
            rollout_error(a, b)

    def test_first_exceed_flagged(self, rng):
        vals = rng.standard_normal((5, N))
        pred = vals.copy()
        pred[3] = vals[3] + 10 * np.linalg.norm(vals[3]) / np.sqrt(N)
        report = rollout_error(Trajectory(vals, L, tau=0.1),
                               Trajectory(pred, L, tau=0.1))
        assert report.first_exceed_step == 3


class TestTravelingWaveFrequency:
    def test_advection_phase_drift(self, rng):
        x = np.arange(N) * L / N
        y0 = GridField(np.sin(x) + 0.2 * np.sin(2 * x), L)
        traj = advect_trajectory(y0, c=1.0, tau=0.2, num_snapshots=100)
        freq = traveling_wave_frequency(traj)
        # dominant mode k=1 advances by e^{-i c tau} each step
        assert freq == pytest.approx(-0.2, abs=1e-8)

    def test_static_nonzero_trajectory_zero_frequency(self):
        x = np.arange(N) * L / N
        vals = np.tile(np.sin(x), (10, 1))
        assert traveling_wave_frequency(Trajectory(vals, L, tau=0.1)) == 0.0

    def test_zero_amplitude_is_undefined(self):
        vals = np.zeros((10, N))
        with pytest.raises(UndefinedFrequencyError):
            traveling_wave_frequency(Trajectory(vals, L, tau=0.1))

    def test_mu15_matches_leading_unit_circle_argument(self, mu15_traj):
        from koopeq import fit_global
        freq = traveling_wave_frequency(mu15_traj)
        model = fit_global(mu15_traj, train_fraction=0.8)
        ev = spectrum(model).eigenvalues
        near_unit = ev[np.abs(np.abs(ev) - 1) < 0.02]
        mismatch = np.min(np.abs(np.abs(np.angle(near_unit)) - abs(freq)))
        assert mismatch < 0.05 * abs(freq)


class TestCompareSpectra:
    def _spec(self, eigs):
        ev = np.asarray(eigs, dtype=complex)
        ev = ev[np.lexsort((-np.angle(ev), -np.abs(ev)))]
        return Spectrum(ev, "test")

    def test_identical_spectra_distance_zero(self):
        s = self._spec([1.0, 0.5 + 0.5j, 0.5 - 0.5j])
        cmp = compare_spectra(s, s, k=3)
        assert cmp.leading_hausdorff == 0.0

    def test_small_perturbation_bounded(self):
        base = np.array([0.9 + 0.3j, 0.9 - 0.3j, 0.5])
        pert = base + 1e-3 * (1 + 1j) / np.sqrt(2)
        cmp = compare_spectra(self._spec(base), self._spec(pert), k=3)
        assert cmp.leading_hausdorff <= 1e-3 * np.sqrt(2) + 1e-12

    def test_symmetric_under_conjugate_relabeling(self):
        a = self._spec([0.8 + 0.2j, 0.8 - 0.2j])
        b = self._spec([0.8 - 0.2j, 0.8 + 0.2j])
        assert compare_spectra(a, b, k=2).leading_hausdorff == 0.0

    def test_k_zero_rejected(self):
        s = self._spec([1.0])
        with pytest.raises(ValueError):
            compare_spectra(s, s, k=0)


class TestSplitAndPool:
    def test_chronological_split(self, rng):
        from koopeq import EmbeddedDataset
        Z = np.arange(20, dtype=float)[None, :]
        ds = EmbeddedDataset(Z, Z + 1, ObservationMap(Kernel.dirac(), window_width=1),
                             0.1, N)
        train, test = split_dataset(ds, 0.8)
        assert train.num_pairs == 16
        assert test.num_pairs == 4
        assert np.array_equal(test.Z[0], np.arange(16, 20))

    def test_pool_concatenates_columns(self, rng):
        from koopeq import EmbeddedDataset
        mk = lambda lo: EmbeddedDataset(
            np.full((2, 3), float(lo)), np.full((2, 3), float(lo + 1)),
            ObservationMap(Kernel.dirac(), window_width=2), 0.1, N)
        pooled = pool_datasets([mk(0), mk(5)])
        assert pooled.num_pairs == 6


class TestBoundaryJumpExcess:
    def test_identical_trajectories_near_one(self, mu15_traj):
        sl = Trajectory(mu15_traj.values[:60], L, tau=0.2)
        assert boundary_jump_excess(sl, sl, 4) == pytest.approx(1.0)

    def test_artificial_block_discontinuity_detected(self, rng):
        smooth = np.tile(np.sin(np.arange(N) * L / N), (40, 1))
        blocks = smooth.copy()
        blocks[:, 8:16] += 2.0
        blocks[:, 24:] -= 2.0
        truth = Trajectory(smooth + 0.01 * rng.standard_normal((40, N)), L, tau=0.1)
        pred = Trajectory(blocks, L, tau=0.1)
        assert boundary_jump_excess(pred, truth, 8) > 5.0
