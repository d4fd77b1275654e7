"""Quantitative evaluation: prediction errors, spectra, wave frequency."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from .errors import UndefinedFrequencyError
from .koopman import CoupledLocalModel, KoopmanModel, Spectrum, lift, project
from .observe import EmbeddedDataset
from .pde import Trajectory

DEFAULT_TRAIN_FRACTION = 0.8
DEFAULT_LEADING_K = 6  # three conjugate pairs


@dataclass(frozen=True)
class ErrorReport:
    """Per-step relative L2 errors of a rollout against the truth."""

    per_step: np.ndarray
    first_exceed_step: Optional[int]  # first step with error > 1
    diverged_at: Optional[int]  # first non-finite prediction step, if any
    config: dict = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return float(self.per_step.max()) if self.per_step.size else float("nan")


@dataclass(frozen=True)
class SpectrumComparison:
    global_spectrum: Spectrum
    local_spectrum: Spectrum
    matched: List[Tuple[complex, complex, float]]  # (local, global, distance)
    leading_hausdorff: float


def split_dataset(ds: EmbeddedDataset,
                  train_fraction: float = DEFAULT_TRAIN_FRACTION,
                  ) -> Tuple[EmbeddedDataset, EmbeddedDataset]:
    """Chronological holdout split: first part trains, the rest tests."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1) to leave test data")
    n_train = max(1, int(np.floor(train_fraction * ds.num_pairs)))
    if n_train >= ds.num_pairs:
        raise ValueError("not enough pairs to hold out a test set")
    return ds.slice_pairs(0, n_train), ds.slice_pairs(n_train, ds.num_pairs)


def pool_datasets(datasets: List[EmbeddedDataset]) -> EmbeddedDataset:
    """Concatenate pair columns of per-anchor datasets."""
    if not datasets:
        raise ValueError("no datasets to pool")
    Z = np.hstack([d.Z for d in datasets])
    Zp = np.hstack([d.Zp for d in datasets])
    return EmbeddedDataset(Z, Zp, datasets[0].source_map, datasets[0].tau,
                           datasets[0].n_grid)


def one_step_error(model: Union[KoopmanModel, CoupledLocalModel],
                   test_dataset: EmbeddedDataset) -> float:
    """Relative L2 error of one-step predictions over a held-out dataset.

    Aggregated as ||Z_hat - Z'||_F / ||Z'||_F so that scalar windows with
    near-zero entries cannot dominate.
    """
    if test_dataset.num_pairs < 1:
        raise ValueError("empty test set")
    dictionary = model.dictionary
    if isinstance(model, CoupledLocalModel):
        raise ValueError("one_step_error on a coupled model needs neighbor inputs; "
                         "evaluate through predict_rollout instead")
    K = model.block
    pred = project(K @ lift(test_dataset.Z, dictionary), dictionary)
    truth = test_dataset.Zp
    denom = np.linalg.norm(truth)
    if denom == 0:
        raise ValueError("test successors are identically zero")
    return float(np.linalg.norm(pred - truth) / denom)


def rollout_error(true_traj: Trajectory, pred_traj: Trajectory,
                  config: Optional[dict] = None) -> ErrorReport:
    """Per-step relative L2 error; truncates at the first non-finite step."""
    if true_traj.values.shape != pred_traj.values.shape:
        raise ValueError(f"shape mismatch: true {true_traj.values.shape} "
                         f"vs predicted {pred_traj.values.shape}")
    T = true_traj.values
    P = pred_traj.values
    finite = np.all(np.isfinite(P), axis=1)
    diverged_at = None
    last = T.shape[0]
    if not finite.all():
        diverged_at = int(np.argmin(finite))
        last = diverged_at
    norms = np.linalg.norm(T[:last], axis=1)
    norms = np.where(norms == 0, 1.0, norms)
    per_step = np.linalg.norm(P[:last] - T[:last], axis=1) / norms
    exceed = np.nonzero(per_step > 1.0)[0]
    return ErrorReport(per_step, int(exceed[0]) if exceed.size else None,
                       diverged_at, dict(config or {}))


def traveling_wave_frequency(traj: Trajectory, min_amplitude: float = 1e-8) -> float:
    """Signed phase drift per sampling step of the dominant Fourier mode.

    The dominant mode evolves by the factor e^{i * drift} each tau, so the
    result is directly comparable with fitted eigenvalue arguments.
    """
    F = np.fft.rfft(traj.values, axis=1)
    amps = np.abs(F).mean(axis=0)
    if amps.size < 2:
        raise ValueError("trajectory has no nonzero spatial modes")
    k_dom = 1 + int(np.argmax(amps[1:]))
    if amps[k_dom] < min_amplitude:
        raise UndefinedFrequencyError(
            f"dominant mode amplitude {amps[k_dom]:.2e} below {min_amplitude:.0e}"
        )
    if traj.num_snapshots < 2:
        raise ValueError("need at least two snapshots for a phase drift")
    col = F[:, k_dom]
    steps = np.angle(col[1:] * np.conj(col[:-1]))
    return float(steps.mean())


def compare_spectra(global_spectrum: Spectrum, local_spectrum: Spectrum,
                    k: int = DEFAULT_LEADING_K) -> SpectrumComparison:
    """Greedy nearest matching of the k leading local eigenvalues.

    Reports the matched pairs and the maximum matched distance (one-sided
    Hausdorff distance of the leading local eigenvalues to the global set).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > min(local_spectrum.eigenvalues.size, global_spectrum.eigenvalues.size):
        raise ValueError("k exceeds spectrum size")
    pool = list(global_spectrum.eigenvalues)
    matched = []
    worst = 0.0
    for lam in local_spectrum.eigenvalues[:k]:
        dists = [abs(lam - g) for g in pool]
        j = int(np.argmin(dists))
        matched.append((complex(lam), complex(pool[j]), float(dists[j])))
        worst = max(worst, float(dists[j]))
        pool.pop(j)
    return SpectrumComparison(global_spectrum, local_spectrum, matched, worst)


def boundary_jump_excess(pred_traj: Trajectory, true_traj: Trajectory,
                         block_width: int, skip: int = 10) -> float:
    """Decoherence statistic for tiled rollouts.

    Ratio of (mean |jump| across block boundaries / mean |jump| across
    interior bonds) in the prediction to the same quantity in the truth,
    averaged over steps from `skip` onwards. Values well above 1 mean the
    blocks developed artificial discontinuities.
    """
    if block_width < 1 or pred_traj.n % block_width != 0:
        raise ValueError("block width must divide the grid size")
    if pred_traj.values.shape != true_traj.values.shape:
        raise ValueError("trajectories must have matching shapes")

    def ratio(values: np.ndarray) -> np.ndarray:
        jumps = np.abs(values - np.roll(values, 1, axis=1))
        boundaries = np.arange(0, values.shape[1], block_width)
        interior = np.setdiff1d(np.arange(values.shape[1]), boundaries)
        return jumps[:, boundaries].mean(axis=1) / np.maximum(
            jumps[:, interior].mean(axis=1), 1e-300)

    r_pred = ratio(pred_traj.values[skip:])
    r_true = ratio(true_traj.values[skip:])
    return float(r_pred.mean() / r_true.mean())
