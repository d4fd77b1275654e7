"""Measurement extraction: convolution observables, windows, delays.

Observables are periodic circular convolutions of the state with a kernel
anchored at a grid site; a Dirac kernel reduces to point evaluation. The
shift group acts by integer grid translations, under which the observables
commute exactly: obs(shift(y, g), s) == obs(y, (s - g) mod n).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .pde import GridField, Trajectory


@dataclass(frozen=True)
class Kernel:
    """Convolution kernel, interpreted as periodic on the grid."""

    kind: str  # "dirac" | "gaussian" | "custom"
    alpha: Optional[float] = None
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "dirac":
            pass
        elif self.kind == "gaussian":
            if self.alpha is None or not (self.alpha > 0 and np.isfinite(self.alpha)):
                raise ValueError("gaussian kernel needs finite alpha > 0")
        elif self.kind == "custom":
            w = np.asarray(self.weights, dtype=float)
            if w.ndim != 1 or not np.all(np.isfinite(w)):
                raise ValueError("custom kernel needs a finite 1-D weight vector")
            object.__setattr__(self, "weights", w)
        else:
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    @classmethod
    def dirac(cls) -> "Kernel":
        return cls("dirac")

    @classmethod
    def gaussian(cls, alpha: float) -> "Kernel":
        return cls("gaussian", alpha=alpha)

    @classmethod
    def custom(cls, weights) -> "Kernel":
        return cls("custom", weights=np.asarray(weights, dtype=float))

    def samples(self, n: int, dx: float) -> np.ndarray:
        """Kernel values at grid offsets j*dx, j = 0..n-1, periodically wrapped."""
        if self.kind == "dirac":
            raise ValueError("dirac kernel has no quadrature samples")
        if self.kind == "custom":
            if self.weights.size != n:
                raise ValueError(
                    f"custom kernel has {self.weights.size} weights, grid has {n}"
                )
            return self.weights
        j = np.arange(n)
        dist = np.minimum(j, n - j) * dx
        return np.exp(-(dist**2) / self.alpha)


@dataclass(frozen=True)
class ObservationMap:
    """How measurements are extracted: kernel, window, delays, anchor."""

    kernel: Kernel
    window_width: int = 1  # q_w
    delays: int = 1  # q_d
    anchor: int = 0
    stride: int = 1

    def __post_init__(self):
        if self.window_width < 1:
            raise ValueError("window_width must be >= 1")
        if self.delays < 1:
            raise ValueError("delays must be >= 1")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.anchor < 0:
            raise ValueError("anchor must be >= 0")

    @property
    def q(self) -> int:
        """Total embedding dimension q_w * q_d."""
        return self.window_width * self.delays

    def with_anchor(self, anchor: int) -> "ObservationMap":
        return ObservationMap(self.kernel, self.window_width, self.delays,
                              anchor, self.stride)

    def sites(self, n: int) -> np.ndarray:
        """Measurement sites anchor, anchor+stride, ... modulo n."""
        if self.window_width * self.stride > n:
            raise ValueError(
                f"window_width*stride = {self.window_width * self.stride} exceeds n = {n}"
            )
        if self.anchor >= n:
            raise ValueError(f"anchor {self.anchor} out of range for n = {n}")
        return (self.anchor + self.stride * np.arange(self.window_width)) % n


@dataclass(frozen=True)
class EmbeddedDataset:
    """Snapshot pairs (Z, Z') of windowed, delay-stacked measurements."""

    Z: np.ndarray  # (q, m)
    Zp: np.ndarray  # (q, m), one-step successors
    source_map: ObservationMap
    tau: float
    n_grid: int

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        Zp = np.asarray(self.Zp, dtype=float)
        if Z.shape != Zp.shape or Z.ndim != 2 or Z.shape[1] < 1:
            raise ValueError(f"Z and Z' must be matching (q, m>=1) matrices, "
                             f"got {Z.shape} and {Zp.shape}")
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "Zp", Zp)

    @property
    def num_pairs(self) -> int:
        return self.Z.shape[1]

    def slice_pairs(self, start: int, stop: int) -> "EmbeddedDataset":
        return EmbeddedDataset(self.Z[:, start:stop], self.Zp[:, start:stop],
                               self.source_map, self.tau, self.n_grid)


def shift_field(y: GridField, g: int) -> GridField:
    """Cyclic grid translation: output(i) = y((i - g) mod n)."""
    return GridField(np.roll(y.values, g), y.domain_length)


def shift_trajectory(traj: Trajectory, g: int) -> Trajectory:
    return Trajectory(np.roll(traj.values, g, axis=1), traj.domain_length,
                      traj.tau, mu=traj.mu, dt=traj.dt,
                      burn_in_steps=traj.burn_in_steps)


def convolve_observe(y: GridField, kernel: Kernel, s: int,
                     pre_transform: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                     ) -> float:
    """Circular convolution (y * theta)(s); Dirac returns y(x_s) directly.

    The quadrature weight dx applies to gaussian/custom kernels only. An
    optional element-wise pre_transform is applied to the field first.
    """
    n = y.n
    if not 0 <= s < n:
        raise IndexError(f"site {s} out of range for n = {n}")
    v = y.values if pre_transform is None else np.asarray(pre_transform(y.values))
    if kernel.kind == "dirac":
        return float(v[s])
    theta = kernel.samples(n, y.dx)
    return float(y.dx * np.dot(v, theta[(s - np.arange(n)) % n]))


def _site_observations(traj: Trajectory, obs_map: ObservationMap) -> np.ndarray:
    """Observation of every snapshot at the map's sites, shape (S, q_w)."""
    sites = obs_map.sites(traj.n)
    if obs_map.kernel.kind == "dirac":
        return traj.values[:, sites]
    theta = obs_map.kernel.samples(traj.n, traj.domain_length / traj.n)
    dx = traj.domain_length / traj.n
    gather = theta[(sites[:, None] - np.arange(traj.n)[None, :]) % traj.n]  # (q_w, n)
    return dx * traj.values @ gather.T


def window_delay_observe(traj: Trajectory, obs_map: ObservationMap, k: int) -> np.ndarray:
    """Delay-stacked window measurement of snapshot k, most recent first.

    Index (j*q_w + i) of the result holds delay j, site i: the kernel
    observation at site anchor + i*stride applied to snapshot k - j.
    """
    if k < obs_map.delays - 1:
        raise ValueError(f"snapshot {k} has fewer than q_d = {obs_map.delays} history steps")
    if k >= traj.num_snapshots:
        raise ValueError(f"snapshot {k} out of range")
    obs = _site_observations(traj, obs_map)
    return np.concatenate([obs[k - j] for j in range(obs_map.delays)])


def build_dataset(traj: Trajectory, obs_map: ObservationMap) -> EmbeddedDataset:
    """Assemble all one-step measurement pairs from a trajectory.

    With S snapshots and q_d delays there are m = S - q_d pairs; column j
    of Z observes time index q_d - 1 + j, column j of Z' its successor.
    """
    q_d = obs_map.delays
    m = traj.num_snapshots - q_d
    if m < 1:
        raise ValueError(
            f"trajectory with {traj.num_snapshots} snapshots is too short for "
            f"q_d = {q_d} delays plus one successor"
        )
    obs = _site_observations(traj, obs_map)  # (S, q_w)
    Z = np.vstack([obs[q_d - 1 - j:q_d - 1 - j + m].T for j in range(q_d)])
    Zp = np.vstack([obs[q_d - j:q_d - j + m].T for j in range(q_d)])
    return EmbeddedDataset(Z, Zp, obs_map, traj.tau, traj.n)


def fourier_observe(y: GridField, k: int) -> complex:
    """Discrete Fourier observable dx * sum_i y(x_i) e^{-i (2 pi k / L) x_i}."""
    if not -y.n // 2 < k < y.n // 2:
        raise IndexError(f"frequency index {k} out of range |k| < {y.n // 2}")
    return complex(y.dx * np.fft.fft(y.values)[k % y.n])


def min_embedding_dim(d: float, sigma: float = 0.0) -> int:
    """Smallest integer strictly greater than 2 (1 + sigma) d."""
    if not (np.isfinite(d) and np.isfinite(sigma)) or d < 0 or sigma < 0:
        raise ValueError("d and sigma must be finite and non-negative")
    bound = 2.0 * (1.0 + sigma) * d
    nearest = round(bound)
    if abs(bound - nearest) < 1e-9:  # analytically integer, fp-noisy
        return int(nearest) + 1
    return int(np.floor(bound)) + 1


def box_counting_dim(points, eps_grid) -> float:
    """Finite-scale box-counting dimension of a point cloud.

    Covers the cloud with axis-aligned boxes of side eps, counts occupied
    boxes N(eps), and returns the least-squares slope of log N(eps)
    against -log eps over the given scales.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[0] < 10:
        raise ValueError("need at least 10 points of equal dimension")
    if not np.all(np.isfinite(P)):
        raise ValueError("points must be finite")
    eps = np.asarray(eps_grid, dtype=float)
    if eps.ndim != 1 or eps.size < 2:
        raise ValueError("eps_grid needs at least two scales")
    if not (np.all(eps > 0) and np.all(np.diff(eps) < 0)):
        raise ValueError("eps_grid must be strictly decreasing and positive")
    lo = P.min(axis=0)
    counts = np.empty(eps.size)
    for i, e in enumerate(eps):
        idx = np.floor((P - lo) / e).astype(np.int64)
        counts[i] = np.unique(idx, axis=0).shape[0]
    slope = np.polyfit(-np.log(eps), np.log(counts), 1)[0]
    return float(slope)


def default_eps_grid(points, num_scales: int = 12, span: float = 100.0) -> np.ndarray:
    """Logarithmically spaced scales from the cloud's extent downwards."""
    P = np.asarray(points, dtype=float)
    extent = float(np.max(P.max(axis=0) - P.min(axis=0)))
    if extent <= 0:
        extent = 1.0
    top = extent / 2
    return np.geomspace(top, top / span, num_scales)
