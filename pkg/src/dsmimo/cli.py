"""Command-line entry point.

Subcommands:

    dsmimo run --config FILE        run an arbitrary experiment
    dsmimo figure NAME              regenerate the data behind a figure preset
    dsmimo diag corr|fp             single-link channel diagnostics
    dsmimo smoke                    small CI-scale run

Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import diagnostics, output
from .config import ExperimentConfig, get_preset, load_config, parse_config
from .engine import run_experiment
from .errors import ConfigError, DomainError, NumericalError

log = logging.getLogger("dsmimo")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

SE_FIGURES = ("fig7", "fig8", "fig9")
DIAG_FIGURES = {
    "fig1": ("corr", ["rayleigh"]),
    "fig3": ("corr", ["ds-S21-dl0.5"]),
    "fig4": ("corr", ["ds-S81-dl0.5"]),
    "fig5": ("fp", ["rayleigh", "ds-S11-dl0.5", "ds-S21-dl0.5", "ds-S41-dl0.5"]),
}
FIGURES = tuple(sorted(DIAG_FIGURES)) + SE_FIGURES

CORR_SAMPLES = 100_000
FP_PAIRS = 2_000
DIAG_M = 100


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, help="master seed (U64)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--drops", type=int, help="number of user drops")
    p.add_argument("--realizations", type=int, help="fading realizations per drop")
    p.add_argument("--workers", type=int, help="worker processes for drops")
    p.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
        help="override one config key, e.g. --set network.M=32",
    )
    p.add_argument("--record-drops", action="store_true", help="also dump user drops as JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsmimo", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a config file")
    p.add_argument("--config", help="INI config file (missing keys use --preset)")
    p.add_argument("--preset", default="paper", help="base preset for missing keys")
    _common(p)

    p = sub.add_parser("figure", help="regenerate the data of a figure preset")
    p.add_argument("name", choices=FIGURES)
    _common(p)

    p = sub.add_parser("diag", help="channel correlation / favorable-propagation diagnostics")
    p.add_argument("kind", choices=("corr", "fp"))
    p.add_argument("--model", action="append", help="model label, e.g. ds-S21-dl0.5")
    p.add_argument("--M", type=int, default=DIAG_M, help="BS antennas")
    p.add_argument("--samples", type=int, help="realizations (corr) or pairs per angle (fp)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")

    p = sub.add_parser("smoke", help="CI-scale run (M=32, 10 drops, 200 realizations)")
    _common(p)
    return parser


def _flag_overrides(args) -> list:
    ov = list(args.overrides)
    for flag, key in (
        ("seed", "sampling.seed"),
        ("drops", "sampling.drops"),
        ("realizations", "sampling.realizations"),
        ("workers", "sampling.workers"),
        ("out", "output.dir"),
    ):
        v = getattr(args, flag, None)
        if v is not None:
            ov.append(f"{key}={v}")
    return ov


def resolve_config(args) -> tuple[ExperimentConfig, list]:
    overrides = _flag_overrides(args)
    if args.command == "run":
        base = get_preset(args.preset)
        if args.config:
            return load_config(args.config, overrides, base), overrides
        return parse_config("", overrides, base), overrides
    name = "smoke" if args.command == "smoke" else args.name
    return parse_config("", overrides, get_preset(name)), overrides


def run_se(args) -> dict:
    cfg, overrides = resolve_config(args)
    report = run_experiment(cfg)
    paths = output.emit_outputs(report, cfg.output_dir, overrides, args.record_drops)
    for (model, det), s in report.summary().items():
        print(f"{model:>14s} {det:>5s}  mean {s['mean']:.3f}  95%-likely {s['likely95']:.3f} bit/s/Hz")
    return paths


def run_diag(kind, models, M, n, seed, out_dir, name="diag") -> list:
    out = output.ensure_dir(out_dir)
    paths = []
    for i, label in enumerate(models):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        stem = output.output_stem(name, seed, label)
        if kind == "corr":
            grid = diagnostics.correlation_map(rng, diagnostics.model_spec(label, M), M, n)
            paths.append(output.write_correlation_csv(out / f"{stem}_corr.csv", grid))
        else:
            angles, stats = diagnostics.fp_curve(rng, label, M, n)
            paths.append(output.write_fp_csv(out / f"{stem}_fp.csv", angles, stats))
    return paths


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "diag":
            models = args.model or ["rayleigh"]
            n = args.samples or (CORR_SAMPLES if args.kind == "corr" else FP_PAIRS)
            paths = run_diag(args.kind, models, args.M, n, args.seed, args.out)
        elif args.command == "figure" and args.name in DIAG_FIGURES:
            kind, models = DIAG_FIGURES[args.name]
            n = args.realizations or (CORR_SAMPLES if kind == "corr" else FP_PAIRS)
            paths = run_diag(kind, models, DIAG_M, n, args.seed or 0, args.out or "out", args.name)
        else:
            paths = run_se(args)
            paths = list(paths.values())
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, DomainError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for p in paths:
        print(Path(p))
    return 0


if __name__ == "__main__":
    sys.exit(main())
