"""Command-line entry point.

Subcommands: simulate, train, predict, spectrum, sweep. Each takes
--config <file> (or preset:<name>) plus optional --out and --seed.
Exit codes: 0 success, 2 config error, 3 numerical divergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from . import harness, presets
from .errors import ConfigError, DivergenceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4


def _load_config(spec: str, seed, out_dir) -> harness.ExperimentConfig:
    if spec.startswith("preset:"):
        name = spec[len("preset:"):]
        try:
            cfg = harness.ExperimentConfig.from_dict(presets.get_preset(name))
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        cfg = harness.ExperimentConfig.from_file(spec)
    return cfg.with_overrides(seed=seed, out_dir=out_dir)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="koopeq",
        description="Equivariant Koopman surrogate models of 1-D periodic PDEs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True,
                       help="JSON config file, or preset:<name> "
                            f"(presets: {', '.join(presets.preset_names())})")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed override")

    p = sub.add_parser("simulate", help="integrate the PDE and store the trajectory")
    add_common(p)

    p = sub.add_parser("train", help="fit a Koopman model from a trajectory file")
    add_common(p)
    p.add_argument("trajectory", help="trajectory file (text or binary)")

    p = sub.add_parser("predict", help="roll out a fitted model against the truth")
    add_common(p)
    p.add_argument("model", help="model file (text or binary)")
    p.add_argument("trajectory", help="trajectory file (text or binary)")

    p = sub.add_parser("spectrum", help="export (and optionally compare) spectra")
    add_common(p)
    p.add_argument("model", help="model file")
    p.add_argument("compare", nargs="?", default=None,
                   help="second model to compare against")

    p = sub.add_parser("sweep", help="one-step error over window widths/delays")
    add_common(p)
    p.add_argument("trajectory", nargs="?", default=None,
                   help="trajectory file (otherwise simulated from the config)")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config, args.seed, args.out)
        if args.command == "simulate":
            manifest = harness.run_simulate(cfg)
        elif args.command == "train":
            manifest = harness.run_train(cfg, args.trajectory)
        elif args.command == "predict":
            manifest = harness.run_predict(cfg, args.model, args.trajectory)
        elif args.command == "spectrum":
            manifest = harness.run_spectrum(cfg, args.model, args.compare)
        else:
            manifest = harness.run_sweep(cfg, args.trajectory)
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {len(manifest['files'])} files to {cfg.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
