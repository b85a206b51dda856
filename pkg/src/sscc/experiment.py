"""Batch experiments behind the command line: tradeoff curves and analytic tables."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .analytics import (
    SccDistributionSpec,
    bernstein_violation_bound,
    ctpp_matern2,
    ctpp_sscc,
    scdf_matern2,
    scdf_sscc,
    thinned_intensity,
)
from .calibration import (
    CalibrationTarget,
    TradeoffCurve,
    excess_ratios,
    solve_item_parameters,
    sweep_tradeoff,
)
from .config import ExperimentConfig
from .placement import MarkLaw

CURVE_COLUMNS = ("policy", "scale", "hit_mean", "hit_lo", "hit_hi", "mean_cache", "n_req",
                 "n_req_norm_M", "n_req_norm_indep")


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.9g}"


def provenance(cfg: ExperimentConfig) -> str:
    return f"# sscc {__version__} seed={cfg.run.seed} config={cfg.digest()}"


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: Sequence[str], rows: Iterable[Sequence], comment: str) -> str:
    buf = io.StringIO()
    buf.write(comment + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def reference_budget(cfg: ExperimentConfig, R: float) -> float:
    """Mean cache size at which independent placement reaches the configured hit level."""
    target = CalibrationTarget("hit_target", cfg.sweep.hit_level, cfg.policies.exponent, R)
    p, _ = solve_item_parameters("independent", cfg.demand_model, target, cfg.network.intensity)
    return float(p.sum())


def curve_budgets(cfg: ExperimentConfig, R: float) -> list[float]:
    base = reference_budget(cfg, R)
    M = cfg.demand.catalog_size
    return sorted({min(s * base, float(M)) for s in cfg.sweep.scales})


def run_sweep(cfg: ExperimentConfig, R: float) -> dict[str, TradeoffCurve]:
    budgets = curve_budgets(cfg, R)
    curves = sweep_tradeoff(cfg.policies.families, cfg.demand_model, cfg.network.intensity, cfg.window, R,
                            budgets, cfg.plan, cfg.policies.exponent, cfg.soft, cfg.sweep.coverage)
    base = reference_budget(cfg, R)
    for c in curves.values():
        c.rows = [r.__class__(r.policy, r.scale / base, r.hit, r.mean_cache, r.n_req) for r in c.rows]
    return curves


def curve_rows(curves: dict[str, TradeoffCurve], M: int):
    indep = {round(r.scale, 12): r.n_req for r in curves["independent"].rows} if "independent" in curves else {}
    for name, c in curves.items():
        for r in c.sorted().rows:
            ref = indep.get(round(r.scale, 12))
            yield (name, r.scale, r.hit.estimate, r.hit.lower, r.hit.upper, r.mean_cache, r.n_req,
                   r.n_req / M, r.n_req / ref if ref else float("nan"))


def summarize(curves: dict[str, TradeoffCurve], hit_level: float) -> dict:
    out = {"hit_level": hit_level, "required": {}, "excess_ratio": {}, "monotone": {}}
    for name, c in curves.items():
        out["required"][name] = c.required_at(hit_level)
        out["monotone"][name] = c.monotone
    if "sscc" in curves:
        out["excess_ratio"] = excess_ratios(curves, hit_level)
    return out


def run_curve(cfg: ExperimentConfig) -> dict:
    """Sweep every configured radius, write ``curve_R<R>.csv`` and ``summary.json``."""
    out_dir = Path(cfg.run.output_dir)
    summary = {"version": __version__, "seed": cfg.run.seed, "config": cfg.digest(), "radii": {}}
    for R in cfg.network.radii:
        curves = run_sweep(cfg, R)
        atomic_write(out_dir / f"curve_R{fmt(R)}.csv",
                     csv_text(CURVE_COLUMNS, curve_rows(curves, cfg.demand.catalog_size), provenance(cfg)))
        summary["radii"][fmt(R)] = summarize(curves, cfg.sweep.hit_level)
    atomic_write(out_dir / "summary.json", json.dumps(summary, indent=2, sort_keys=True, default=float) + "\n")
    return summary


ANALYTIC_COLUMNS = ("r", "mark_mean", "mark_scale", "softness", "lambda_th", "eta_M", "eta_GM", "H_M", "H_GM",
                    "bernstein")


def run_analytic(intensity: float, r_grid: Sequence[float], mark_means: Sequence[float],
                 mark_scale: float = 1.0, softness: float = 10.0, p0: float = 1.0,
                 radius: float = 10.0, catalog_size: int = 100, slack: float = 3.0) -> list[tuple]:
    """Table of intensity, CTPPs and contact distributions over a grid.

    The hard-core columns use exclusion radius ``2 * mark_mean``; the
    Bernstein column bounds ``P(C > N + slack)`` for ``catalog_size``
    identical items at the tabulated retention.
    """
    rows = []
    for mbar in mark_means:
        spec = SccDistributionSpec(intensity, MarkLaw(mbar, mark_scale), p0, softness)
        lam_th = thinned_intensity(spec)
        p = lam_th / intensity
        N = catalog_size * p
        bound = bernstein_violation_bound(N, N + slack, catalog_size * p * (1 - p))
        H_M = scdf_matern2(radius, 2 * mbar, intensity)
        H_GM = scdf_sscc(radius, spec)
        eta_gm = np.atleast_1d(ctpp_sscc(np.asarray(r_grid, dtype=float), spec))
        for r, eg in zip(r_grid, eta_gm):
            rows.append((r, mbar, mark_scale, softness, lam_th, ctpp_matern2(r, 2 * mbar, intensity), eg,
                         H_M, H_GM, bound))
    return rows


def analytic_text(rows, fmt_name: str = "csv") -> str:
    if fmt_name == "csv":
        return csv_text(ANALYTIC_COLUMNS, rows, f"# sscc {__version__} analytic")
    cells = [list(ANALYTIC_COLUMNS)] + [[fmt(v) for v in r] for r in rows]
    widths = [max(len(c[k]) for c in cells) for k in range(len(ANALYTIC_COLUMNS))]
    return "\n".join("  ".join(c[k].rjust(widths[k]) for k in range(len(c))) for c in cells) + "\n"
