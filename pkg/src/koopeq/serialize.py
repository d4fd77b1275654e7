"""On-disk formats: columnar text, compact binary, and CSV exports.

Text files carry one header line of key=value pairs followed by whitespace-
separated values at 17 significant digits (lossless for binary64). The
binary variant is a length-prefixed UTF-8 header followed by little-endian
64-bit floats; it round-trips bit-exactly.
"""

from __future__ import annotations

import io
import struct
from typing import List, Optional, Tuple, Union

import numpy as np

from .koopman import CoupledLocalModel, Dictionary, KoopmanModel, Spectrum
from .observe import EmbeddedDataset, Kernel, ObservationMap
from .pde import Trajectory

_TRAJ_MAGIC = b"KOOPEQ-TRAJ1"
_DATA_MAGIC = b"KOOPEQ-DATA1"
_MODEL_MAGIC = b"KOOPEQ-MODL1"

FLOAT_FMT = "%.17g"


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


def _header_line(tag: str, fields: dict) -> str:
    parts = [tag] + [f"{k}={_fmt(v) if isinstance(v, float) else v}"
                     for k, v in fields.items()]
    return " ".join(parts)


def _parse_header(line: str, expected_tag: str) -> dict:
    parts = line.split()
    if not parts or parts[0] != expected_tag:
        raise ValueError(f"expected {expected_tag!r} header, got {line[:60]!r}")
    out = {}
    for tok in parts[1:]:
        key, _, val = tok.partition("=")
        out[key] = val
    return out


def _write_rows(fh, rows: np.ndarray):
    for row in rows:
        fh.write(" ".join(_fmt(v) for v in row))
        fh.write("\n")


def _read_rows(lines: List[str], num_rows: int, num_cols: int, what: str) -> np.ndarray:
    if len(lines) < num_rows:
        raise ValueError(f"{what}: expected {num_rows} rows, found {len(lines)}")
    out = np.empty((num_rows, num_cols))
    for i in range(num_rows):
        vals = lines[i].split()
        if len(vals) != num_cols:
            raise ValueError(f"{what}: row {i} has {len(vals)} values, expected {num_cols}")
        out[i] = [float(v) for v in vals]
    return out


# --- trajectory -------------------------------------------------------------

def _traj_fields(traj: Trajectory) -> dict:
    return {
        "n_grid": traj.n,
        "domain_length": float(traj.domain_length),
        "mu": float(traj.mu),
        "dt": float(traj.dt),
        "tau": float(traj.tau),
        "num_snapshots": traj.num_snapshots,
        "burn_in_steps": traj.burn_in_steps,
    }


def _traj_from_fields(h: dict, values: np.ndarray) -> Trajectory:
    return Trajectory(values, float(h["domain_length"]), float(h["tau"]),
                      mu=float(h["mu"]), dt=float(h["dt"]),
                      burn_in_steps=int(h["burn_in_steps"]))


def save_trajectory_text(traj: Trajectory, path):
    with open(path, "w") as fh:
        fh.write(_header_line("koopeq-trajectory-v1", _traj_fields(traj)) + "\n")
        _write_rows(fh, traj.values)


def load_trajectory_text(path) -> Trajectory:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty trajectory file")
    h = _parse_header(lines[0], "koopeq-trajectory-v1")
    values = _read_rows(lines[1:], int(h["num_snapshots"]), int(h["n_grid"]), str(path))
    return _traj_from_fields(h, values)


def _write_binary(path, magic: bytes, header: str, payload: np.ndarray):
    blob = header.encode("utf-8")
    data = np.ascontiguousarray(payload, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<Q", data.size))
        fh.write(data.tobytes())


def _read_binary(path, magic: bytes) -> Tuple[str, np.ndarray]:
    with open(path, "rb") as fh:
        got = fh.read(len(magic))
        if got != magic:
            raise ValueError(f"{path}: bad magic {got!r}")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = fh.read(hlen).decode("utf-8")
        (count,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(count * 8), dtype="<f8").astype(float)
        if data.size != count:
            raise ValueError(f"{path}: truncated payload")
    return header, data


def save_trajectory_binary(traj: Trajectory, path):
    header = _header_line("koopeq-trajectory-v1", _traj_fields(traj))
    _write_binary(path, _TRAJ_MAGIC, header, traj.values)


def load_trajectory_binary(path) -> Trajectory:
    header, data = _read_binary(path, _TRAJ_MAGIC)
    h = _parse_header(header, "koopeq-trajectory-v1")
    values = data.reshape(int(h["num_snapshots"]), int(h["n_grid"]))
    return _traj_from_fields(h, values)


def load_trajectory(path) -> Trajectory:
    """Dispatch on the binary magic, else parse as text."""
    with open(path, "rb") as fh:
        head = fh.read(len(_TRAJ_MAGIC))
    if head == _TRAJ_MAGIC:
        return load_trajectory_binary(path)
    return load_trajectory_text(path)


# --- observation map / dataset ----------------------------------------------

def _obs_fields(obs_map: ObservationMap) -> dict:
    fields = {
        "kernel": obs_map.kernel.kind,
        "q_w": obs_map.window_width,
        "q_d": obs_map.delays,
        "anchor": obs_map.anchor,
        "stride": obs_map.stride,
    }
    if obs_map.kernel.kind == "gaussian":
        fields["alpha"] = float(obs_map.kernel.alpha)
    return fields


def _obs_from_fields(h: dict, weights: Optional[np.ndarray] = None) -> ObservationMap:
    kind = h["kernel"]
    if kind == "dirac":
        kernel = Kernel.dirac()
    elif kind == "gaussian":
        kernel = Kernel.gaussian(float(h["alpha"]))
    elif kind == "custom":
        if weights is None:
            raise ValueError("custom kernel header without a weights row")
        kernel = Kernel.custom(weights)
    else:
        raise ValueError(f"unknown kernel kind {kind!r}")
    return ObservationMap(kernel, int(h["q_w"]), int(h["q_d"]),
                          int(h["anchor"]), int(h["stride"]))


def _dataset_fields(ds: EmbeddedDataset) -> dict:
    fields = _obs_fields(ds.source_map)
    fields.update({"n_grid": ds.n_grid, "tau": float(ds.tau),
                   "num_pairs": ds.num_pairs})
    return fields


def save_dataset_text(ds: EmbeddedDataset, path):
    with open(path, "w") as fh:
        fh.write(_header_line("koopeq-dataset-v1", _dataset_fields(ds)) + "\n")
        if ds.source_map.kernel.kind == "custom":
            _write_rows(fh, ds.source_map.kernel.weights[None, :])
        _write_rows(fh, ds.Z)
        _write_rows(fh, ds.Zp)


def load_dataset_text(path) -> EmbeddedDataset:
    with open(path) as fh:
        lines = fh.read().splitlines()
    h = _parse_header(lines[0], "koopeq-dataset-v1")
    body = lines[1:]
    weights = None
    if h["kernel"] == "custom":
        weights = _read_rows(body[:1], 1, int(h["n_grid"]), str(path))[0]
        body = body[1:]
    obs_map = _obs_from_fields(h, weights)
    q = obs_map.q
    m = int(h["num_pairs"])
    Z = _read_rows(body[:q], q, m, str(path))
    Zp = _read_rows(body[q:2 * q], q, m, str(path))
    return EmbeddedDataset(Z, Zp, obs_map, float(h["tau"]), int(h["n_grid"]))


def save_dataset_binary(ds: EmbeddedDataset, path):
    header = _header_line("koopeq-dataset-v1", _dataset_fields(ds))
    blocks = [ds.Z, ds.Zp]
    if ds.source_map.kernel.kind == "custom":
        blocks.insert(0, ds.source_map.kernel.weights[None, :])
    payload = np.concatenate([b.ravel() for b in blocks])
    _write_binary(path, _DATA_MAGIC, header, payload)


def load_dataset_binary(path) -> EmbeddedDataset:
    header, data = _read_binary(path, _DATA_MAGIC)
    h = _parse_header(header, "koopeq-dataset-v1")
    n = int(h["n_grid"])
    weights = None
    if h["kernel"] == "custom":
        weights, data = data[:n], data[n:]
    obs_map = _obs_from_fields(h, weights)
    q = obs_map.q
    m = int(h["num_pairs"])
    Z = data[:q * m].reshape(q, m)
    Zp = data[q * m:2 * q * m].reshape(q, m)
    return EmbeddedDataset(Z, Zp, obs_map, float(h["tau"]), n)


def load_dataset(path) -> EmbeddedDataset:
    with open(path, "rb") as fh:
        head = fh.read(len(_DATA_MAGIC))
    if head == _DATA_MAGIC:
        return load_dataset_binary(path)
    return load_dataset_text(path)


# --- models -------------------------------------------------------------------

AnyModel = Union[KoopmanModel, CoupledLocalModel]


def _model_fields(model: AnyModel) -> Tuple[dict, np.ndarray]:
    d = model.dictionary
    fields = {
        "kind": "dmdc" if isinstance(model, CoupledLocalModel) else model.kind,
        "ell": d.lifted_dim,
        "dict": d.kind,
        "degree": d.degree,
        "input_dim": d.input_dim,
        "tau": float(model.tau),
        "rcond": float(model.rcond),
        "n_grid": model.n_grid,
        "domain_length": float(model.domain_length),
    }
    fields.update(_obs_fields(model.obs_map))
    if isinstance(model, CoupledLocalModel):
        matrix = np.hstack([model.K_hat, model.B_l, model.B_r])
    else:
        matrix = model.K
    fields["rows"] = matrix.shape[0]
    fields["cols"] = matrix.shape[1]
    return fields, matrix


def _model_from_fields(h: dict, matrix: np.ndarray,
                       weights: Optional[np.ndarray] = None) -> AnyModel:
    obs_map = _obs_from_fields(h, weights)
    dkind = h["dict"]
    q = int(h["input_dim"])
    dictionary = (Dictionary.identity(q) if dkind == "identity"
                  else Dictionary.polynomial(q, int(h["degree"])))
    common = dict(dictionary=dictionary, obs_map=obs_map, tau=float(h["tau"]),
                  n_grid=int(h["n_grid"]), domain_length=float(h["domain_length"]),
                  rcond=float(h["rcond"]))
    if h["kind"] == "dmdc":
        ell = int(h["ell"])
        q_d = obs_map.delays
        return CoupledLocalModel(matrix[:, :ell], matrix[:, ell:ell + q_d],
                                 matrix[:, ell + q_d:], **common)
    return KoopmanModel(matrix, kind=h["kind"], **common)


def save_model_text(model: AnyModel, path):
    fields, matrix = _model_fields(model)
    with open(path, "w") as fh:
        fh.write(_header_line("koopeq-model-v1", fields) + "\n")
        if model.obs_map.kernel.kind == "custom":
            _write_rows(fh, model.obs_map.kernel.weights[None, :])
        _write_rows(fh, matrix)


def load_model_text(path) -> AnyModel:
    with open(path) as fh:
        lines = fh.read().splitlines()
    h = _parse_header(lines[0], "koopeq-model-v1")
    body = lines[1:]
    weights = None
    if h["kernel"] == "custom":
        weights = _read_rows(body[:1], 1, int(h["n_grid"]), str(path))[0]
        body = body[1:]
    matrix = _read_rows(body, int(h["rows"]), int(h["cols"]), str(path))
    return _model_from_fields(h, matrix, weights)


def save_model_binary(model: AnyModel, path):
    fields, matrix = _model_fields(model)
    header = _header_line("koopeq-model-v1", fields)
    blocks = [matrix]
    if model.obs_map.kernel.kind == "custom":
        blocks.insert(0, model.obs_map.kernel.weights[None, :])
    payload = np.concatenate([b.ravel() for b in blocks])
    _write_binary(path, _MODEL_MAGIC, header, payload)


def load_model_binary(path) -> AnyModel:
    header, data = _read_binary(path, _MODEL_MAGIC)
    h = _parse_header(header, "koopeq-model-v1")
    weights = None
    if h["kernel"] == "custom":
        n = int(h["n_grid"])
        weights, data = data[:n], data[n:]
    matrix = data.reshape(int(h["rows"]), int(h["cols"]))
    return _model_from_fields(h, matrix, weights)


def load_model(path) -> AnyModel:
    with open(path, "rb") as fh:
        head = fh.read(len(_MODEL_MAGIC))
    if head == _MODEL_MAGIC:
        return load_model_binary(path)
    return load_model_text(path)


# --- CSV exports ---------------------------------------------------------------

def spectrum_csv(spec: Spectrum) -> str:
    buf = io.StringIO()
    buf.write("index,re,im,modulus,argument\r\n")
    for i, lam in enumerate(spec.eigenvalues):
        buf.write(f"{i},{_fmt(lam.real)},{_fmt(lam.imag)},"
                  f"{_fmt(abs(lam))},{_fmt(np.angle(lam))}\r\n")
    return buf.getvalue()


def error_report_csv(per_step: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write("step,relative_l2\r\n")
    for i, e in enumerate(per_step):
        buf.write(f"{i},{_fmt(e)}\r\n")
    return buf.getvalue()


def comparison_csv(matched) -> str:
    buf = io.StringIO()
    buf.write("index,local_re,local_im,global_re,global_im,distance\r\n")
    for i, (loc, glb, dist) in enumerate(matched):
        buf.write(f"{i},{_fmt(loc.real)},{_fmt(loc.imag)},"
                  f"{_fmt(glb.real)},{_fmt(glb.imag)},{_fmt(dist)}\r\n")
    return buf.getvalue()


def sweep_csv(rows) -> str:
    """rows: iterable of (q_w, q_d, error-or-None, status)."""
    buf = io.StringIO()
    buf.write("q_w,q_d,one_step_error,status\r\n")
    for q_w, q_d, err, status in rows:
        err_s = _fmt(err) if err is not None else ""
        status_s = '"%s"' % status.replace('"', '""') if any(
            c in status for c in ',"\r\n') else status
        buf.write(f"{q_w},{q_d},{err_s},{status_s}\r\n")
    return buf.getvalue()
