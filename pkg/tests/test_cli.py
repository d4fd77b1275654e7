import json

import numpy as np
import pytest

from koopeq import Dictionary, Kernel, KoopmanModel, ObservationMap
from koopeq.cli import main
from koopeq.harness import ExperimentConfig, run_train
from koopeq.manifest import verify_manifest
from koopeq.serialize import load_model, load_trajectory, save_model_text

L = 2 * np.pi


def small_config(**overrides):
    cfg = {
        "schema_version": 1,
        "seed": 5,
        "sim": {"mu": 15.0, "tau": 0.2, "num_snapshots": 60, "burn_in_time": 5.0},
        "observation": {"window_width": 4, "delays": 1},
        "fit": {"mode": "local", "pool_shifts": True},
        "rollout": {"n_steps": 8, "mode": "plain"},
        "sweep": {"window_widths": [2, 4], "delays": [1]},
        "plot": {"space_scale": 2, "time_scale": 1},
    }
    for key, val in overrides.items():
        if isinstance(val, dict):
            cfg.setdefault(key, {}).update(val)
        else:
            cfg[key] = val
    return cfg


def write_config(tmp_path, name="cfg.json", **overrides):
    p = tmp_path / name
    p.write_text(json.dumps(small_config(**overrides)))
    return p


class TestSimulate:
    def test_writes_all_outputs_and_manifest(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "run"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        for name in ("trajectory.txt", "trajectory.bin", "heatmap.png", "manifest.json"):
            assert (out / name).exists(), name
        assert verify_manifest(out)
        traj = load_trajectory(out / "trajectory.bin")
        assert traj.num_snapshots == 61

    def test_determinism_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", str(cfg), "--out", str(a)]) == 0
        assert main(["simulate", "--config", str(cfg), "--out", str(b)]) == 0
        for name in ("trajectory.txt", "trajectory.bin", "heatmap.png", "manifest.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_seed_override_changes_data(self, tmp_path):
        cfg = write_config(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        main(["simulate", "--config", str(cfg), "--out", str(a)])
        main(["simulate", "--config", str(cfg), "--out", str(b), "--seed", "99"])
        assert (a / "trajectory.bin").read_bytes() != (b / "trajectory.bin").read_bytes()

    def test_zero_initial_condition_flat_heatmap(self, tmp_path):
        cfg = write_config(tmp_path, sim={"initial_condition": "zero",
                                          "num_snapshots": 10, "burn_in_time": 1.0})
        out = tmp_path / "run"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        traj = load_trajectory(out / "trajectory.bin")
        assert np.abs(traj.values).max() == 0.0

    def test_manifest_detects_tampering(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "run"
        main(["simulate", "--config", str(cfg), "--out", str(out)])
        with open(out / "trajectory.txt", "a") as fh:
            fh.write("tampered\n")
        assert not verify_manifest(out)

    def test_divergent_config_exit_3(self, tmp_path):
        cfg = write_config(tmp_path, sim={"dt": 1.0, "tau": 1.0,
                                          "burn_in_time": 0.0, "num_snapshots": 40})
        assert main(["simulate", "--config", str(cfg),
                     "--out", str(tmp_path / "x")]) == 3


class TestTrain:
    @pytest.fixture()
    def traj_file(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "sim"
        main(["simulate", "--config", str(cfg), "--out", str(out)])
        return out / "trajectory.bin"

    def test_local_model_and_spectrum(self, tmp_path, traj_file):
        cfg = write_config(tmp_path)
        out = tmp_path / "train"
        assert main(["train", "--config", str(cfg), str(traj_file),
                     "--out", str(out)]) == 0
        model = load_model(out / "model.bin")
        assert model.kind == "local"
        assert (out / "spectrum.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["split"]["train_pairs"] == [0, 48]
        assert manifest["split"]["test_pairs"] == [48, 60]
        assert verify_manifest(out)

    def test_spectrum_csv_deterministic(self, tmp_path, traj_file):
        cfg = write_config(tmp_path)
        a, b = tmp_path / "ta", tmp_path / "tb"
        main(["train", "--config", str(cfg), str(traj_file), "--out", str(a)])
        main(["train", "--config", str(cfg), str(traj_file), "--out", str(b)])
        assert (a / "spectrum.csv").read_bytes() == (b / "spectrum.csv").read_bytes()
        assert (a / "model.bin").read_bytes() == (b / "model.bin").read_bytes()

    def test_window_exceeding_grid_exit_2(self, tmp_path, traj_file, capsys):
        cfg = write_config(tmp_path, observation={"window_width": 33})
        assert main(["train", "--config", str(cfg), str(traj_file),
                     "--out", str(tmp_path / "x")]) == 2
        assert "window_width" in capsys.readouterr().err

    def test_tiled_and_dmdc_and_global_modes(self, tmp_path, traj_file):
        for mode, expect in (("tiled", "tiled"), ("global", "global")):
            cfg = write_config(tmp_path, name=f"{mode}.json", fit={"mode": mode})
            out = tmp_path / f"train_{mode}"
            assert main(["train", "--config", str(cfg), str(traj_file),
                         "--out", str(out)]) == 0
            assert load_model(out / "model.bin").kind == expect
        cfg = write_config(tmp_path, name="dmdc.json", fit={"mode": "dmdc"},
                           observation={"window_width": 1, "delays": 2})
        out = tmp_path / "train_dmdc"
        assert main(["train", "--config", str(cfg), str(traj_file),
                     "--out", str(out)]) == 0
        from koopeq import CoupledLocalModel
        assert isinstance(load_model(out / "model.bin"), CoupledLocalModel)

    def test_missing_trajectory_exit_4(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["train", "--config", str(cfg), str(tmp_path / "nope.bin"),
                     "--out", str(tmp_path / "x")]) == 4


class TestPredict:
    @pytest.fixture()
    def setup(self, tmp_path):
        cfg = write_config(tmp_path, fit={"mode": "tiled"},
                           observation={"window_width": 16})
        sim = tmp_path / "sim"
        main(["simulate", "--config", str(cfg), "--out", str(sim)])
        train = tmp_path / "train"
        main(["train", "--config", str(cfg), str(sim / "trajectory.bin"),
              "--out", str(train)])
        return cfg, sim / "trajectory.bin", train / "model.bin"

    def test_outputs_and_error_report(self, tmp_path, setup):
        cfg, traj_file, model_file = setup
        out = tmp_path / "pred"
        assert main(["predict", "--config", str(cfg), str(model_file),
                     str(traj_file), "--out", str(out)]) == 0
        for name in ("prediction.txt", "prediction.bin", "errors.csv",
                     "errors.json", "truth.png", "prediction.png",
                     "absdiff.png", "manifest.json"):
            assert (out / name).exists(), name
        sidecar = json.loads((out / "errors.json").read_text())
        assert sidecar["window_width"] == 16
        assert "max_relative_error" in sidecar
        assert verify_manifest(out)

    def test_incompatible_trajectory_exit_2(self, tmp_path, setup, capsys):
        cfg, traj_file, model_file = setup
        other = write_config(tmp_path, name="other.json",
                             sim={"n_grid": 16, "tau": 0.2})
        sim2 = tmp_path / "sim2"
        main(["simulate", "--config", str(other), "--out", str(sim2)])
        code = main(["predict", "--config", str(cfg), str(model_file),
                     str(sim2 / "trajectory.bin"), "--out", str(tmp_path / "x")])
        assert code == 2
        assert "n_grid" in capsys.readouterr().err

    def test_exploding_model_exit_3(self, tmp_path, setup):
        cfg, traj_file, _ = setup
        bad = KoopmanModel(50.0 * np.eye(32), Dictionary.identity(32),
                           ObservationMap(Kernel.dirac(), window_width=32),
                           0.2, "global", 32, L)
        bad_file = tmp_path / "bad_model.txt"
        save_model_text(bad, bad_file)
        assert main(["predict", "--config", str(cfg), str(bad_file),
                     str(traj_file), "--out", str(tmp_path / "x")]) == 3


class TestSpectrumCmd:
    def test_compare_two_models(self, tmp_path):
        cfg = write_config(tmp_path)
        sim = tmp_path / "sim"
        main(["simulate", "--config", str(cfg), "--out", str(sim)])
        cfg_g = write_config(tmp_path, name="g.json", fit={"mode": "global"})
        cfg_l = write_config(tmp_path, name="l.json", fit={"mode": "local"},
                             observation={"window_width": 16})
        tg, tl = tmp_path / "tg", tmp_path / "tl"
        main(["train", "--config", str(cfg_g), str(sim / "trajectory.bin"), "--out", str(tg)])
        main(["train", "--config", str(cfg_l), str(sim / "trajectory.bin"), "--out", str(tl)])
        out = tmp_path / "spec"
        assert main(["spectrum", "--config", str(cfg_g), str(tl / "model.bin"),
                     str(tg / "model.bin"), "--out", str(out)]) == 0
        assert (out / "spectrum.csv").exists()
        assert (out / "spectrum_compare.csv").exists()
        comparison = json.loads((out / "spectrum_compare.json").read_text())
        assert comparison["leading_hausdorff"] >= 0


class TestSweep:
    def test_rows_and_consistency_with_single_train(self, tmp_path):
        cfg = write_config(tmp_path)
        sim = tmp_path / "sim"
        main(["simulate", "--config", str(cfg), "--out", str(sim)])
        out = tmp_path / "sweep"
        assert main(["sweep", "--config", str(cfg), str(sim / "trajectory.bin"),
                     "--out", str(out)]) == 0
        lines = (out / "sweep.csv").read_bytes().decode().strip().split("\r\n")
        assert lines[0] == "q_w,q_d,one_step_error,status"
        assert len(lines) == 3
        assert (out / "sweep.png").exists()

        # a single-entry sweep reproduces the dedicated evaluation path
        from koopeq import (analysis, build_dataset, fit_local)
        traj = load_trajectory(sim / "trajectory.bin")
        row = lines[2].split(",")  # q_w=4 row
        obs_map = ExperimentConfig.from_dict(small_config()).observation_map(
            window_width=4, delays=1)
        model = fit_local(traj, obs_map, pool_shifts=True, train_fraction=0.8)
        tests = []
        for anchor in range(traj.n):
            ds = build_dataset(traj, obs_map.with_anchor(anchor))
            tests.append(analysis.split_dataset(ds, 0.8)[1])
        direct = analysis.one_step_error(model, analysis.pool_datasets(tests))
        assert float(row[2]) == pytest.approx(direct, rel=1e-12)

    def test_partial_failure_recorded_per_row(self, tmp_path):
        cfg = write_config(tmp_path, sweep={"window_widths": [4, 33], "delays": [1]})
        sim = tmp_path / "sim"
        main(["simulate", "--config", str(cfg), "--out", str(sim)])
        out = tmp_path / "sweep"
        assert main(["sweep", "--config", str(cfg), str(sim / "trajectory.bin"),
                     "--out", str(out)]) == 0
        lines = (out / "sweep.csv").read_bytes().decode().strip().split("\r\n")
        assert "ok" in lines[1]
        assert "error" in lines[2]


class TestConfigHandling:
    def test_preset_loading(self, tmp_path):
        cfg = ExperimentConfig.from_dict(
            __import__("koopeq.presets", fromlist=["get_preset"]).get_preset("mu15_global"))
        sim = cfg.sim_config()
        assert sim.n_grid == 32
        assert sim.mu == 15.0
        assert sim.tau == 0.2
        assert sim.num_snapshots == 1000

    def test_presets_encode_reference_values(self):
        from koopeq.presets import get_preset, preset_names
        for name in preset_names():
            sim = get_preset(name)["sim"]
            assert sim["n_grid"] == 32, name
            assert sim["domain_length"] == pytest.approx(2 * np.pi), name
            assert sim["dt"] == 0.01, name
            assert sim["num_snapshots"] == 1000, name
            expected_tau = 0.2 if name.startswith("mu15") else 0.05
            assert sim["tau"] == expected_tau, name

    def test_unknown_preset_exit_2(self, tmp_path):
        assert main(["simulate", "--config", "preset:nope",
                     "--out", str(tmp_path / "x")]) == 2

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"nonsense": 1}))
        assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "x")]) == 2

    def test_invalid_json_exit_2(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "x")]) == 2

    def test_missing_config_exit_2(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "absent.json"),
                     "--out", str(tmp_path / "x")]) == 2

    def test_run_train_records_split(self, tmp_path):
        cfg = ExperimentConfig.from_dict(small_config()).with_overrides(
            out_dir=tmp_path / "sim")
        from koopeq.harness import run_simulate
        run_simulate(cfg)
        cfg2 = cfg.with_overrides(out_dir=tmp_path / "train")
        manifest = run_train(cfg2, tmp_path / "sim" / "trajectory.bin")
        assert manifest["split"]["train_pairs"][1] == 48
