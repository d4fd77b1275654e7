"""Koopman matrix fitting and rollout.

All fits solve the least-squares problem || Psi(Z') - K Psi(Z) ||_F with the
minimum-Frobenius-norm pseudoinverse solution (SVD cutoff rcond relative to
the largest singular value). Local models share one matrix across anchor
positions by pooling shifted training pairs, which is justified by the exact
discrete shift equivariance of the observables.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from .errors import DivergenceError
from .observe import EmbeddedDataset, Kernel, ObservationMap, build_dataset
from .pde import Trajectory

DEFAULT_RCOND = 1e-10
ROLLOUT_GUARD = 1.0e6


@dataclass(frozen=True)
class Dictionary:
    """Lifting dictionary: identity, or all monomials of total degree <= s."""

    kind: str  # "identity" | "polynomial"
    input_dim: int
    degree: int = 0

    def __post_init__(self):
        if self.kind not in ("identity", "polynomial"):
            raise ValueError(f"unknown dictionary kind {self.kind!r}")
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.kind == "polynomial" and self.degree < 1:
            raise ValueError("polynomial dictionary needs degree >= 1")

    @classmethod
    def identity(cls, q: int) -> "Dictionary":
        return cls("identity", q)

    @classmethod
    def polynomial(cls, q: int, degree: int) -> "Dictionary":
        return cls("polynomial", q, degree)

    @property
    def lifted_dim(self) -> int:
        if self.kind == "identity":
            return self.input_dim
        return math.comb(self.input_dim + self.degree, self.degree)

    def monomials(self) -> List[Tuple[int, ...]]:
        """Variable-index tuples in graded lexicographic order, constant first."""
        out: List[Tuple[int, ...]] = []
        for deg in range(self.degree + 1):
            out.extend(itertools.combinations_with_replacement(range(self.input_dim), deg))
        return out


def lift(z: np.ndarray, dictionary: Dictionary) -> np.ndarray:
    """Apply the dictionary to a vector (or column-wise to a matrix)."""
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    Z = z[:, None] if single else z
    if Z.shape[0] != dictionary.input_dim:
        raise ValueError(f"expected {dictionary.input_dim} coordinates, got {Z.shape[0]}")
    if dictionary.kind == "identity":
        out = Z
    else:
        rows = [np.prod(Z[list(mono), :], axis=0) if mono else np.ones(Z.shape[1])
                for mono in dictionary.monomials()]
        out = np.vstack(rows)
    return out[:, 0] if single else out


def project(psi: np.ndarray, dictionary: Dictionary) -> np.ndarray:
    """Extract the degree-1 coordinates back out of a lifted vector/matrix."""
    psi = np.asarray(psi, dtype=float)
    dim = psi.shape[0]
    if dim != dictionary.lifted_dim:
        raise ValueError(f"expected lifted dimension {dictionary.lifted_dim}, got {dim}")
    if dictionary.kind == "identity":
        return psi
    return psi[1:dictionary.input_dim + 1]


def edmd_fit(Z: np.ndarray, Zp: np.ndarray, dictionary: Dictionary,
             rcond: float = DEFAULT_RCOND) -> np.ndarray:
    """Best-fit matrix K minimizing sum_i ||Psi(z'_i) - K Psi(z_i)||^2.

    Returns the minimum-Frobenius-norm minimizer Psi(Z') pinv(Psi(Z)).
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    Zp = np.atleast_2d(np.asarray(Zp, dtype=float))
    if Z.shape != Zp.shape:
        raise ValueError(f"Z and Z' shapes differ: {Z.shape} vs {Zp.shape}")
    if Z.shape[1] == 0:
        raise ValueError("empty dataset: no snapshot pairs")
    if not (np.all(np.isfinite(Z)) and np.all(np.isfinite(Zp))):
        raise ValueError("snapshot data must be finite")
    Psi = lift(Z, dictionary)
    Psip = lift(Zp, dictionary)
    if not np.any(Psi):
        raise ValueError("degenerate data: lifted snapshot matrix is zero")
    return Psip @ np.linalg.pinv(Psi, rcond=rcond)


@dataclass(frozen=True)
class KoopmanModel:
    """Fitted matrix plus the dictionary and observation map that made it."""

    K: np.ndarray
    dictionary: Dictionary
    obs_map: ObservationMap
    tau: float
    kind: str  # "global" | "local" | "tiled"
    n_grid: int
    domain_length: float
    rcond: float = DEFAULT_RCOND

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError(f"K must be square, got {K.shape}")
        if not np.all(np.isfinite(K)):
            raise ValueError("K must be finite")
        if self.kind not in ("global", "local", "tiled"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        ell = self.dictionary.lifted_dim
        blocks = K.shape[0] // ell
        if K.shape[0] != blocks * ell:
            raise ValueError(f"K size {K.shape[0]} is not a multiple of lifted dim {ell}")
        object.__setattr__(self, "K", K)

    @property
    def lifted_dim(self) -> int:
        return self.dictionary.lifted_dim

    @property
    def block(self) -> np.ndarray:
        """The (shared) single-window matrix; equals K unless tiled."""
        ell = self.lifted_dim
        return self.K[:ell, :ell]

    @property
    def num_blocks(self) -> int:
        return self.K.shape[0] // self.lifted_dim


@dataclass(frozen=True)
class CoupledLocalModel:
    """Local matrix plus neighbor-input columns for DMDc coupling."""

    K_hat: np.ndarray
    B_l: np.ndarray
    B_r: np.ndarray
    dictionary: Dictionary
    obs_map: ObservationMap
    tau: float
    n_grid: int
    domain_length: float
    rcond: float = DEFAULT_RCOND

    def __post_init__(self):
        ell = self.dictionary.lifted_dim
        q_d = self.obs_map.delays
        K = np.asarray(self.K_hat, dtype=float)
        Bl = np.asarray(self.B_l, dtype=float)
        Br = np.asarray(self.B_r, dtype=float)
        if K.shape != (ell, ell):
            raise ValueError(f"K_hat must be {ell}x{ell}, got {K.shape}")
        if Bl.shape != (ell, q_d) or Br.shape != (ell, q_d):
            raise ValueError(f"B_l and B_r must be {ell}x{q_d} "
                             f"(one delayed boundary site per side)")
        for name, M in (("K_hat", K), ("B_l", Bl), ("B_r", Br)):
            if not np.all(np.isfinite(M)):
                raise ValueError(f"{name} must be finite")
        object.__setattr__(self, "K_hat", K)
        object.__setattr__(self, "B_l", Bl)
        object.__setattr__(self, "B_r", Br)

    @property
    def lifted_dim(self) -> int:
        return self.dictionary.lifted_dim


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted by descending modulus, ties by descending argument."""

    eigenvalues: np.ndarray
    source_kind: str

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=complex)
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.eigenvalues)

    @property
    def arguments(self) -> np.ndarray:
        return np.angle(self.eigenvalues)


def _sorted_eigenvalues(M: np.ndarray) -> np.ndarray:
    ev = np.linalg.eigvals(M)
    order = np.lexsort((-np.angle(ev), -np.abs(ev)))
    return ev[order]


def spectrum(model: Union[KoopmanModel, CoupledLocalModel]) -> Spectrum:
    """All eigenvalues of the fitted matrix (DMDc: of K_hat alone)."""
    if isinstance(model, CoupledLocalModel):
        M, kind = model.K_hat, "dmdc"
    elif isinstance(model, KoopmanModel):
        M, kind = model.K, model.kind
    else:
        M = np.asarray(model, dtype=float)
        kind = "matrix"
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return Spectrum(_sorted_eigenvalues(M), kind)


def _train_slice(num_pairs: int, train_fraction: float) -> int:
    if not 0 < train_fraction <= 1:
        raise ValueError("train_fraction must be in (0, 1]")
    n = int(np.floor(train_fraction * num_pairs))
    return max(1, n)


def _pooled_dataset(traj: Trajectory, obs_map: ObservationMap,
                    train_fraction: float) -> Tuple[np.ndarray, np.ndarray]:
    """Chronological train slice of every anchor's dataset, pooled."""
    Zs, Zps = [], []
    for anchor in range(traj.n):
        ds = build_dataset(traj, obs_map.with_anchor(anchor))
        n_train = _train_slice(ds.num_pairs, train_fraction)
        Zs.append(ds.Z[:, :n_train])
        Zps.append(ds.Zp[:, :n_train])
    return np.hstack(Zs), np.hstack(Zps)


def full_state_map(n_grid: int, delays: int = 1) -> ObservationMap:
    """Dirac observations of every grid site (classic full state observable)."""
    return ObservationMap(Kernel.dirac(), window_width=n_grid, delays=delays,
                          anchor=0, stride=1)


def fit_global(traj: Trajectory, dictionary: Optional[Dictionary] = None,
               delays: int = 1, rcond: float = DEFAULT_RCOND,
               train_fraction: float = 1.0) -> KoopmanModel:
    """DMD/EDMD on the full state observable."""
    obs_map = full_state_map(traj.n, delays)
    if dictionary is None:
        dictionary = Dictionary.identity(obs_map.q)
    ds = build_dataset(traj, obs_map)
    n_train = _train_slice(ds.num_pairs, train_fraction)
    K = edmd_fit(ds.Z[:, :n_train], ds.Zp[:, :n_train], dictionary, rcond)
    return KoopmanModel(K, dictionary, obs_map, traj.tau, "global",
                        traj.n, traj.domain_length, rcond)


def fit_local(traj: Trajectory, obs_map: ObservationMap,
              dictionary: Optional[Dictionary] = None, pool_shifts: bool = True,
              rcond: float = DEFAULT_RCOND, train_fraction: float = 1.0,
              ) -> KoopmanModel:
    """Shared local model from windowed measurements.

    With pool_shifts the training pairs from all n anchor positions enter
    one regression (weight sharing across translations); otherwise only the
    map's own anchor is used. A full-width window (q_w = n) with pooling off
    reduces exactly to fit_global.
    """
    if obs_map.window_width > traj.n:
        raise ValueError(f"window_width {obs_map.window_width} exceeds grid size {traj.n}")
    if dictionary is None:
        dictionary = Dictionary.identity(obs_map.q)
    if pool_shifts:
        Z, Zp = _pooled_dataset(traj, obs_map, train_fraction)
    else:
        ds = build_dataset(traj, obs_map)
        n_train = _train_slice(ds.num_pairs, train_fraction)
        Z, Zp = ds.Z[:, :n_train], ds.Zp[:, :n_train]
    K = edmd_fit(Z, Zp, dictionary, rcond)
    return KoopmanModel(K, dictionary, obs_map, traj.tau, "local",
                        traj.n, traj.domain_length, rcond)


def tile_global(local: KoopmanModel, n_grid: int) -> KoopmanModel:
    """Block-diagonal global matrix with identical local blocks."""
    if local.kind != "local":
        raise ValueError(f"can only tile a local model, got kind {local.kind!r}")
    q_w = local.obs_map.window_width
    if local.obs_map.stride != 1:
        raise ValueError("tiling requires stride 1 (windows must partition the grid)")
    if n_grid % q_w != 0:
        raise ValueError(f"window width {q_w} does not divide n = {n_grid}")
    blocks = n_grid // q_w
    K = np.kron(np.eye(blocks), local.K)
    return KoopmanModel(K, local.dictionary, local.obs_map, local.tau, "tiled",
                        n_grid, local.domain_length, local.rcond)


def _neighbor_sites(obs_map: ObservationMap, n: int) -> Tuple[int, int]:
    left = (obs_map.anchor - 1) % n
    right = (obs_map.anchor + (obs_map.window_width - 1) * obs_map.stride + 1) % n
    return left, right


def _delayed_site_inputs(traj: Trajectory, site: int, q_d: int, m: int) -> np.ndarray:
    """(q_d, m) matrix of a single site's delayed values, most recent first."""
    col = traj.values[:, site]
    return np.vstack([col[q_d - 1 - j:q_d - 1 - j + m] for j in range(q_d)])


def fit_dmdc_local(traj: Trajectory, obs_map: ObservationMap,
                   dictionary: Optional[Dictionary] = None, pool_shifts: bool = True,
                   rcond: float = DEFAULT_RCOND, train_fraction: float = 1.0,
                   ) -> CoupledLocalModel:
    """Local model with the two boundary neighbors as control inputs.

    Stacked least squares over [Psi(z_window); u_left; u_right] where each
    input carries the full q_d delay history of the grid site immediately
    left/right of the window.
    """
    if obs_map.window_width >= traj.n:
        raise ValueError("DMDc coupling needs window_width < n")
    if dictionary is None:
        dictionary = Dictionary.identity(obs_map.q)
    q_d = obs_map.delays
    anchors = range(traj.n) if pool_shifts else [obs_map.anchor]
    Psis, Psips, Uls, Urs = [], [], [], []
    for anchor in anchors:
        amap = obs_map.with_anchor(anchor)
        ds = build_dataset(traj, amap)
        n_train = _train_slice(ds.num_pairs, train_fraction)
        left, right = _neighbor_sites(amap, traj.n)
        Psis.append(lift(ds.Z[:, :n_train], dictionary))
        Psips.append(lift(ds.Zp[:, :n_train], dictionary))
        Uls.append(_delayed_site_inputs(traj, left, q_d, ds.num_pairs)[:, :n_train])
        Urs.append(_delayed_site_inputs(traj, right, q_d, ds.num_pairs)[:, :n_train])
    G = np.vstack([np.hstack(Psis), np.hstack(Uls), np.hstack(Urs)])
    if not np.any(G):
        raise ValueError("degenerate data: regressor matrix is zero")
    KB = np.hstack(Psips) @ np.linalg.pinv(G, rcond=rcond)
    ell = dictionary.lifted_dim
    return CoupledLocalModel(KB[:, :ell], KB[:, ell:ell + q_d], KB[:, ell + q_d:],
                             dictionary, obs_map, traj.tau, traj.n,
                             traj.domain_length, rcond)


def _window_vector(history: np.ndarray, anchor: int, q_w: int, q_d: int,
                   stride: int) -> np.ndarray:
    n = history.shape[1]
    sites = (anchor + stride * np.arange(q_w)) % n
    return history[:q_d, sites].ravel()


def _check_rollout_state(history: np.ndarray, q_d: int, n_grid: int) -> np.ndarray:
    H = np.asarray(history, dtype=float)
    if H.ndim == 1:
        H = H[None, :]
    if H.shape != (q_d, n_grid):
        raise ValueError(
            f"initial state must be a (q_d={q_d}, n={n_grid}) delay history, "
            f"most recent snapshot first; got {H.shape}"
        )
    if not np.all(np.isfinite(H)):
        raise ValueError("initial state must be finite")
    return H.copy()


def predict_rollout(model: Union[KoopmanModel, CoupledLocalModel],
                    z0_state: np.ndarray, n_steps: int,
                    mode: str = "plain") -> Trajectory:
    """Roll the fitted model forward from a full-grid delay history.

    Modes:
      - "plain": disjoint windows advance independently (block-diagonal K).
      - "project_then_lift": overlapping windows at every anchor; per-site
        predictions averaged uniformly, then all windows re-lift from the
        averaged field.
      - "dmdc": disjoint windows with neighbor boundary values taken from
        the previous step's prediction, wrapping periodically.

    Delay histories shift down by one and receive the new prediction each
    step. Returns n_steps + 1 snapshots (the current one first).
    """
    if mode == "dmdc":
        if not isinstance(model, CoupledLocalModel):
            raise ValueError("dmdc mode needs a CoupledLocalModel")
    elif mode in ("plain", "project_then_lift"):
        if not isinstance(model, KoopmanModel):
            raise ValueError(f"{mode} mode needs a KoopmanModel")
    else:
        raise ValueError(f"unknown rollout mode {mode!r}")
    obs_map = model.obs_map
    if obs_map.kernel.kind != "dirac":
        raise ValueError("rollout requires point (dirac) measurements")
    if obs_map.stride != 1:
        raise ValueError("rollout requires stride-1 windows")
    q_w, q_d = obs_map.window_width, obs_map.delays
    n = model.n_grid
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    hist = _check_rollout_state(z0_state, q_d, n)
    if mode in ("plain", "dmdc") and n % q_w != 0:
        raise ValueError(f"window width {q_w} does not divide n = {n}")

    dictionary = model.dictionary
    if mode == "dmdc":
        K = model.K_hat
    else:
        K = model.block
    anchors = np.arange(0, n, q_w) if mode in ("plain", "dmdc") else np.arange(n)

    def advance(hist: np.ndarray) -> np.ndarray:
        if mode == "project_then_lift":
            acc = np.zeros(n)
            for a in anchors:
                z = _window_vector(hist, a, q_w, q_d, 1)
                znew = project(K @ lift(z, dictionary), dictionary)
                acc[(a + np.arange(q_w)) % n] += znew[:q_w]
            return acc / q_w
        ynew = np.empty(n)
        for a in anchors:
            z = _window_vector(hist, a, q_w, q_d, 1)
            psi_new = K @ lift(z, dictionary)
            if mode == "dmdc":
                psi_new = psi_new + model.B_l @ hist[:, (a - 1) % n] \
                    + model.B_r @ hist[:, (a + q_w) % n]
            znew = project(psi_new, dictionary)
            ynew[(a + np.arange(q_w)) % n] = znew[:q_w]
        return ynew

    out = np.empty((n_steps + 1, n))
    out[0] = hist[0]
    # blow-ups surface as inf/nan and trip the guard below
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(n_steps):
            ynew = advance(hist)
            if not np.all(np.isfinite(ynew)) or np.abs(ynew).max() > ROLLOUT_GUARD:
                raise DivergenceError(f"rollout diverged at step {step + 1}",
                                      step=step + 1)
            hist = np.vstack([ynew, hist[:-1]])
            out[step + 1] = ynew
    return Trajectory(out, model.domain_length, model.tau, dt=model.tau)
