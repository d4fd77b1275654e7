"""Config-driven experiment commands behind the CLI.

Each command writes its outputs into one directory and finishes with a
manifest listing every emitted file with a sha256 checksum. Identical
config + seed produce byte-identical CSV/text outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis, koopman, observe, pde, serialize
from .errors import ConfigError, DivergenceError
from .heatmap import render_curves, save_heatmap, write_png
from .manifest import write_manifest

SCHEMA_VERSION = 1

#: boundary-jump excess above which a tiled rollout counts as decohered
DECOHERENCE_THRESHOLD = 1.15

_DEFAULTS = {
    "seed": 0,
    "sim": {
        "n_grid": 32,
        "domain_length": 2 * np.pi,
        "mu": 15.0,
        "dt": 0.01,
        "tau": 0.2,
        "burn_in_time": 50.0,
        "num_snapshots": 1000,
        "initial_condition": "random_smooth",
    },
    "observation": {
        "kernel": "dirac",
        "alpha": None,
        "window_width": 16,
        "delays": 1,
        "anchor": 0,
        "stride": 1,
    },
    "dictionary": {"kind": "identity", "degree": 1},
    "fit": {"mode": "global", "pool_shifts": True, "rcond": 1e-10},
    "split": {"train_fraction": 0.8},
    "rollout": {"n_steps": 100, "mode": "plain"},
    "sweep": {"window_widths": [1, 2, 4, 8, 16], "delays": [1]},
    "plot": {"space_scale": 8, "time_scale": 1},
    "spectrum": {"leading_k": 6},
    "output": {"dir": "out", "formats": ["csv", "png"]},
}


def _merge(defaults: dict, override: dict, context: str) -> dict:
    out = dict(defaults)
    for key, val in override.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {context}{key!r}")
        if isinstance(defaults[key], dict) and isinstance(val, dict):
            out[key] = _merge(defaults[key], val, f"{context}{key}.")
        else:
            out[key] = val
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, fully-resolved experiment configuration."""

    raw: dict

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        data = dict(data)
        version = data.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}")
        merged = _merge(_DEFAULTS, data, "")
        merged["schema_version"] = SCHEMA_VERSION
        cfg = cls(merged)
        cfg.sim_config()  # validate eagerly
        cfg.observation_map()
        if merged["fit"]["mode"] not in ("global", "local", "tiled", "dmdc"):
            raise ConfigError(f"unknown fit.mode {merged['fit']['mode']!r}")
        if merged["rollout"]["mode"] not in ("plain", "project_then_lift", "dmdc"):
            raise ConfigError(f"unknown rollout.mode {merged['rollout']['mode']!r}")
        if not 0 < merged["split"]["train_fraction"] < 1:
            raise ConfigError("split.train_fraction must be in (0, 1)")
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)

    def with_overrides(self, seed: Optional[int] = None,
                       out_dir: Optional[str] = None) -> "ExperimentConfig":
        raw = json.loads(json.dumps(self.raw))
        if seed is not None:
            raw["seed"] = seed
        if out_dir is not None:
            raw["output"]["dir"] = str(out_dir)
        return ExperimentConfig(raw)

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def out_dir(self) -> Path:
        return Path(self.raw["output"]["dir"])

    @property
    def formats(self) -> list:
        return list(self.raw["output"]["formats"])

    def sim_config(self) -> pde.SimConfig:
        s = self.raw["sim"]
        try:
            return pde.SimConfig(
                n_grid=int(s["n_grid"]), domain_length=float(s["domain_length"]),
                mu=float(s["mu"]), dt=float(s["dt"]), tau=float(s["tau"]),
                burn_in_time=float(s["burn_in_time"]),
                num_snapshots=int(s["num_snapshots"]), seed=self.seed,
                initial_condition=s["initial_condition"],
            )
        except ValueError as exc:
            raise ConfigError(f"sim: {exc}") from exc

    def observation_map(self, window_width: Optional[int] = None,
                        delays: Optional[int] = None) -> observe.ObservationMap:
        o = self.raw["observation"]
        try:
            if o["kernel"] == "dirac":
                kernel = observe.Kernel.dirac()
            elif o["kernel"] == "gaussian":
                kernel = observe.Kernel.gaussian(float(o["alpha"]))
            else:
                raise ValueError(f"unknown kernel {o['kernel']!r} "
                                 "(configs support dirac and gaussian)")
            return observe.ObservationMap(
                kernel,
                window_width=int(window_width if window_width is not None
                                 else o["window_width"]),
                delays=int(delays if delays is not None else o["delays"]),
                anchor=int(o["anchor"]), stride=int(o["stride"]),
            )
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"observation: {exc}") from exc

    def dictionary(self, q: int) -> koopman.Dictionary:
        d = self.raw["dictionary"]
        if d["kind"] == "identity":
            return koopman.Dictionary.identity(q)
        if d["kind"] == "polynomial":
            return koopman.Dictionary.polynomial(q, int(d["degree"]))
        raise ConfigError(f"unknown dictionary.kind {d['kind']!r}")


def _want(cfg: ExperimentConfig, fmt: str) -> bool:
    return fmt in cfg.formats


def _plot_scales(cfg: ExperimentConfig):
    p = cfg.raw["plot"]
    return int(p["space_scale"]), int(p["time_scale"])


def _echo(cfg: ExperimentConfig, **extra) -> dict:
    echo = {
        "mu": cfg.raw["sim"]["mu"],
        "tau": cfg.raw["sim"]["tau"],
        "window_width": cfg.raw["observation"]["window_width"],
        "delays": cfg.raw["observation"]["delays"],
        "dictionary": cfg.raw["dictionary"]["kind"],
        "fit_mode": cfg.raw["fit"]["mode"],
        "seed": cfg.seed,
    }
    echo.update(extra)
    return echo


def run_simulate(cfg: ExperimentConfig) -> dict:
    """Integrate the configured PDE; write trajectory (text+binary) + heatmap."""
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    traj = pde.integrate_ks(cfg.sim_config())
    serialize.save_trajectory_text(traj, out / "trajectory.txt")
    serialize.save_trajectory_binary(traj, out / "trajectory.bin")
    if _want(cfg, "png"):
        space, time = _plot_scales(cfg)
        save_heatmap(traj.values, out / "heatmap.png",
                     space_scale=space, time_scale=time)
    return write_manifest(out, cfg.raw, cfg.seed,
                          extra={"command": "simulate"})


def _fit_model(cfg: ExperimentConfig, traj: pde.Trajectory):
    fit = cfg.raw["fit"]
    mode = fit["mode"]
    rcond = float(fit["rcond"])
    frac = float(cfg.raw["split"]["train_fraction"])
    if mode == "global":
        obs_map = koopman.full_state_map(traj.n, int(cfg.raw["observation"]["delays"]))
        dictionary = cfg.dictionary(obs_map.q)
        model = koopman.fit_global(traj, dictionary, delays=obs_map.delays,
                                   rcond=rcond, train_fraction=frac)
    else:
        obs_map = cfg.observation_map()
        if obs_map.window_width > traj.n:
            raise ConfigError(f"observation.window_width {obs_map.window_width} "
                              f"exceeds grid size {traj.n}")
        dictionary = cfg.dictionary(obs_map.q)
        pool = bool(fit["pool_shifts"])
        if mode == "dmdc":
            model = koopman.fit_dmdc_local(traj, obs_map, dictionary, pool,
                                           rcond, frac)
        else:
            model = koopman.fit_local(traj, obs_map, dictionary, pool,
                                      rcond, frac)
            if mode == "tiled":
                model = koopman.tile_global(model, traj.n)
    num_pairs = traj.num_snapshots - obs_map.delays
    n_train = max(1, int(np.floor(frac * num_pairs)))
    split = {"train_pairs": [0, n_train], "test_pairs": [n_train, num_pairs]}
    return model, split


def run_train(cfg: ExperimentConfig, trajectory_path) -> dict:
    """Fit the configured model; write model (text+binary) + spectrum CSV."""
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    traj = serialize.load_trajectory(trajectory_path)
    model, split = _fit_model(cfg, traj)
    serialize.save_model_text(model, out / "model.txt")
    serialize.save_model_binary(model, out / "model.bin")
    if _want(cfg, "csv"):
        spec = koopman.spectrum(model)
        (out / "spectrum.csv").write_text(serialize.spectrum_csv(spec))
    return write_manifest(out, cfg.raw, cfg.seed,
                          extra={"command": "train", "split": split})


def _check_compatible(model, traj: pde.Trajectory):
    if model.n_grid != traj.n:
        raise ConfigError(f"incompatible n_grid: model {model.n_grid}, "
                          f"trajectory {traj.n}")
    if abs(model.tau - traj.tau) > 1e-9 * max(1.0, abs(traj.tau)):
        raise ConfigError(f"incompatible tau: model {model.tau}, "
                          f"trajectory {traj.tau}")
    if abs(model.domain_length - traj.domain_length) > 1e-9 * traj.domain_length:
        raise ConfigError(f"incompatible domain_length: model {model.domain_length}, "
                          f"trajectory {traj.domain_length}")
    q_d = model.obs_map.delays
    if traj.num_snapshots <= q_d:
        raise ConfigError(f"incompatible delays: model needs {q_d} history "
                          f"snapshots, trajectory has {traj.num_snapshots}")


def run_predict(cfg: ExperimentConfig, model_path, trajectory_path) -> dict:
    """Roll out from the first held-out state; write heatmaps + error CSV."""
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    model = serialize.load_model(model_path)
    traj = serialize.load_trajectory(trajectory_path)
    _check_compatible(model, traj)

    mode = cfg.raw["rollout"]["mode"]
    is_coupled = isinstance(model, koopman.CoupledLocalModel)
    if (mode == "dmdc") != is_coupled:
        raise ConfigError(f"rollout.mode {mode!r} does not match model kind "
                          f"{'dmdc' if is_coupled else model.kind!r}")

    q_d = model.obs_map.delays
    frac = float(cfg.raw["split"]["train_fraction"])
    num_pairs = traj.num_snapshots - q_d
    n_train = max(1, int(np.floor(frac * num_pairs)))
    t0 = q_d - 1 + n_train  # first admissible held-out state
    if t0 >= traj.num_snapshots:
        raise ConfigError("trajectory too short for the configured split")
    history = traj.values[t0 - q_d + 1:t0 + 1][::-1]

    n_steps = int(cfg.raw["rollout"]["n_steps"])
    pred = koopman.predict_rollout(model, history, n_steps, mode)
    serialize.save_trajectory_text(pred, out / "prediction.txt")
    serialize.save_trajectory_binary(pred, out / "prediction.bin")

    overlap = min(n_steps, traj.num_snapshots - 1 - t0)
    truth_slice = pde.Trajectory(traj.values[t0:t0 + overlap + 1],
                                 traj.domain_length, traj.tau)
    pred_slice = pde.Trajectory(pred.values[:overlap + 1],
                                traj.domain_length, traj.tau)
    report = analysis.rollout_error(truth_slice, pred_slice,
                                    config=_echo(cfg, rollout_mode=mode))

    sidecar = dict(report.config)
    sidecar.update({
        "n_steps": n_steps,
        "compared_steps": overlap,
        "start_snapshot": t0,
        "max_relative_error": report.max_error,
        "first_step_error_above_1": report.first_exceed_step,
        "diverged_at": report.diverged_at,
    })
    q_w = model.obs_map.window_width
    if mode in ("plain", "dmdc") and 1 < q_w < traj.n and overlap > 15:
        excess = analysis.boundary_jump_excess(pred_slice, truth_slice, q_w)
        sidecar["boundary_jump_excess"] = excess
        sidecar["decohered"] = bool(excess >= DECOHERENCE_THRESHOLD)
    if _want(cfg, "csv"):
        (out / "errors.csv").write_text(serialize.error_report_csv(report.per_step))
    (out / "errors.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    if _want(cfg, "png"):
        space, time = _plot_scales(cfg)
        lo = float(truth_slice.values.min())
        hi = float(truth_slice.values.max())
        save_heatmap(truth_slice.values, out / "truth.png", vmin=lo, vmax=hi,
                     space_scale=space, time_scale=time)
        save_heatmap(pred_slice.values, out / "prediction.png", vmin=lo, vmax=hi,
                     space_scale=space, time_scale=time)
        save_heatmap(np.abs(pred_slice.values - truth_slice.values),
                     out / "absdiff.png", space_scale=space, time_scale=time)
    return write_manifest(out, cfg.raw, cfg.seed,
                          extra={"command": "predict"})


def run_spectrum(cfg: ExperimentConfig, model_path, compare_path=None) -> dict:
    """Export a model's spectrum; optionally compare against a second model."""
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    spec = koopman.spectrum(serialize.load_model(model_path))
    (out / "spectrum.csv").write_text(serialize.spectrum_csv(spec))
    if compare_path is not None:
        other = koopman.spectrum(serialize.load_model(compare_path))
        k = min(int(cfg.raw["spectrum"]["leading_k"]),
                spec.eigenvalues.size, other.eigenvalues.size)
        comparison = analysis.compare_spectra(spec, other, k)
        (out / "spectrum_compare.csv").write_text(
            serialize.comparison_csv(comparison.matched))
        (out / "spectrum_compare.json").write_text(json.dumps(
            {"leading_k": k, "leading_hausdorff": comparison.leading_hausdorff},
            indent=2, sort_keys=True) + "\n")
    return write_manifest(out, cfg.raw, cfg.seed,
                          extra={"command": "spectrum"})


def run_sweep(cfg: ExperimentConfig, trajectory_path=None) -> dict:
    """One-step error for every configured (q_w, q_d); consolidated CSV + plot."""
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    widths = [int(w) for w in cfg.raw["sweep"]["window_widths"]]
    delay_list = [int(d) for d in cfg.raw["sweep"]["delays"]]
    if not widths or not delay_list:
        raise ConfigError("sweep needs non-empty window_widths and delays")
    if trajectory_path is not None:
        traj = serialize.load_trajectory(trajectory_path)
    else:
        traj = pde.integrate_ks(cfg.sim_config())
    frac = float(cfg.raw["split"]["train_fraction"])
    rcond = float(cfg.raw["fit"]["rcond"])
    pool = bool(cfg.raw["fit"]["pool_shifts"])

    rows = []
    failures = 0
    for q_d in delay_list:
        for q_w in widths:
            try:
                obs_map = cfg.observation_map(window_width=q_w, delays=q_d)
                dictionary = cfg.dictionary(obs_map.q)
                model = koopman.fit_local(traj, obs_map, dictionary, pool,
                                          rcond, frac)
                tests = []
                anchors = range(traj.n) if pool else [obs_map.anchor]
                for anchor in anchors:
                    ds = observe.build_dataset(traj, obs_map.with_anchor(anchor))
                    tests.append(analysis.split_dataset(ds, frac)[1])
                err = analysis.one_step_error(model, analysis.pool_datasets(tests))
                rows.append((q_w, q_d, err, "ok"))
            except (ValueError, ConfigError, DivergenceError) as exc:
                failures += 1
                rows.append((q_w, q_d, None, f"error: {exc}"))
    if _want(cfg, "csv"):
        (out / "sweep.csv").write_text(serialize.sweep_csv(rows))
    if _want(cfg, "png"):
        series = []
        for q_d in delay_list:
            pts = [(w, e) for w, d, e, s in rows if d == q_d and e is not None]
            if pts:
                series.append(([p[0] for p in pts], [p[1] for p in pts]))
        if series:
            write_png(out / "sweep.png", render_curves(series))
    (out / "sweep.json").write_text(json.dumps(
        {"config_echo": _echo(cfg), "window_widths": widths, "delays": delay_list,
         "y_axis": "relative one-step error (log scale in sweep.png)"},
        indent=2, sort_keys=True) + "\n")
    manifest = write_manifest(out, cfg.raw, cfg.seed,
                              extra={"command": "sweep", "failures": failures})
    if failures == len(rows):
        raise DivergenceError("every sweep configuration failed")
    return manifest
