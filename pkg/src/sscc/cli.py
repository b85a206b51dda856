"""Command line: ``sscc curve | validate | analytic``.

Exit codes: 0 success, 1 validation failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from .config import ConfigError, ExperimentConfig

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def parse_grid(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:count`` (inclusive linspace)."""
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            n = int(count)
            if n < 1:
                raise ValueError
            return list(np.linspace(float(start), float(stop), n))
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed grid {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty grid")
    return values


def _radius_list(text: str) -> list[float]:
    return parse_grid(text)


def _add_common(p):
    p.add_argument("--config", type=Path, help="JSON experiment configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int, help="replications")
    p.add_argument("--radius", type=_radius_list, help="communication radius or comma list")
    p.add_argument("--out", type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sscc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("curve", help="trace hit probability against required cache size")
    _add_common(p)
    p = sub.add_parser("validate", help="run the cross-module oracle suite")
    _add_common(p)
    p = sub.add_parser("analytic", help="tabulate closed-form quantities")
    _add_common(p)
    p.add_argument("--intensity", type=float)
    p.add_argument("--r-grid", type=parse_grid, default=parse_grid("0.5:10:20"))
    p.add_argument("--mark-means", type=parse_grid, default=[2.0])
    p.add_argument("--mark-scale", type=float)
    p.add_argument("--softness", type=float, help="kernel softness c; 'inf' for the hard kernel")
    p.add_argument("--format", choices=("csv", "text"), default="csv")
    return parser


def load_config(args) -> ExperimentConfig:
    cfg = config_mod.load(args.config) if args.config else ExperimentConfig()
    return cfg.with_overrides(seed=args.seed, replications=args.reps, radius=args.radius, output_dir=args.out)


def cmd_curve(cfg: ExperimentConfig) -> int:
    from .experiment import run_curve

    summary = run_curve(cfg)
    for R, s in summary["radii"].items():
        ratios = ", ".join(f"{k}={v * 100:.1f}%" for k, v in s["excess_ratio"].items())
        print(f"R={R}: required at hit {s['hit_level']}: "
              + ", ".join(f"{k}={v:.3g}" for k, v in s["required"].items())
              + (f"; ratios vs sscc: {ratios}" if ratios else ""))
    print(f"wrote {cfg.run.output_dir}")
    return EXIT_OK


def cmd_validate(cfg: ExperimentConfig) -> int:
    from .experiment import atomic_write, csv_text, provenance
    from .validation import run_validate

    checks = run_validate(cfg)
    w = csv.writer(sys.stdout, lineterminator="\n")
    rows = [(c.name, c.expected, c.observed, c.tolerance, "pass" if c.passed else "fail") for c in checks]
    header = ("name", "expected", "observed", "tolerance", "verdict")
    w.writerow(header)
    for c, row in zip(checks, rows):
        w.writerow([row[0], f"{row[1]:.9g}", f"{row[2]:.9g}", f"{row[3]:.9g}", row[4]])
    atomic_write(Path(cfg.run.output_dir) / "validate.csv", csv_text(header, rows, provenance(cfg)))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


def cmd_analytic(cfg: ExperimentConfig, args) -> int:
    from .experiment import analytic_text, run_analytic

    intensity = args.intensity if args.intensity is not None else cfg.network.intensity
    if not intensity > 0:
        raise ConfigError("intensity", "must be positive")
    softness = args.softness if args.softness is not None else cfg.policies.softness
    if not softness > 0:
        raise ConfigError("softness", "must be positive")
    scale = args.mark_scale if args.mark_scale is not None else cfg.policies.mark_scale
    if scale < 0 or any(m < 0 for m in args.mark_means) or any(r < 0 for r in args.r_grid):
        raise ConfigError("grid", "marks, scales and radii must be non-negative")
    rows = run_analytic(intensity, args.r_grid, args.mark_means, scale, softness, cfg.policies.p0,
                        radius=max(cfg.network.radii), catalog_size=cfg.demand.catalog_size)
    sys.stdout.write(analytic_text(rows, args.format))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "curve":
            return cmd_curve(cfg)
        if args.command == "validate":
            return cmd_validate(cfg)
        return cmd_analytic(cfg, args)
    except ConfigError as exc:
        print(f"sscc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"sscc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
