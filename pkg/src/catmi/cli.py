"""Command line entry point: impute, simulate, report.

Exit codes: 0 success, 2 validation problem, 3 engine failure.  Warnings
(class saturation, degenerate between-imputation variance, boundary
intervals, fully observed input) go to the run manifest and stderr; they
never change the exit code.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .chained import ChainedConfig, multiple_impute
from .cart import CartEngine
from .data import Codebook, CodebookError, load_csv, write_csv
from .dpm import DpmConfig, dpm_multiple_impute
from .glm import EngineUnsupported, FitNotConverged, GlmEngine
from .simulator import (
    SimulationReport,
    config_from_json,
    render_csv,
    render_text,
    run_simulation,
    summarize,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ENGINE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="catmi",
        description="Multiple imputation for categorical data: impute a file, "
                    "run a repeated-sampling study, or print report tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    imp = sub.add_parser("impute", help="multiply-impute a CSV file")
    imp.add_argument("--data", required=True, help="CSV with a header row")
    imp.add_argument("--codebook", required=True, help="codebook JSON document")
    imp.add_argument("--engine", required=True, choices=("glm", "cart", "dpm"))
    imp.add_argument("--L", type=int, default=10, dest="n_imputations",
                     help="number of completed datasets (default 10)")
    imp.add_argument("--seed", type=int, default=0)
    imp.add_argument("--out-dir", required=True)
    imp.add_argument("--cycles", type=int, default=10,
                     help="chained-engine cycles (glm/cart)")
    imp.add_argument("--ordering", default="appearance",
                     choices=("appearance", "fewest_missing_first"))
    imp.add_argument("--ridge", type=float, default=1e-5, help="glm ridge penalty")
    imp.add_argument("--max-levels", type=int, default=10,
                     help="glm cap on target level count")
    imp.add_argument("--min-leaf", type=int, default=4, help="cart leaf minimum")
    imp.add_argument("--cp", type=float, default=1e-4,
                     help="cart complexity threshold")
    imp.add_argument("--k", type=int, default=35, help="dpm latent classes")
    imp.add_argument("--iterations", type=int, default=10000, help="dpm sweeps")
    imp.add_argument("--burn-in", type=int, default=2000, help="dpm burn-in")
    imp.add_argument("--diagnostics", default=None,
                     help="dpm only: write per-iteration diagnostics CSV here")

    sim = sub.add_parser("simulate", help="run a repeated-sampling study")
    sim.add_argument("--config", required=True, help="simulation config JSON")
    sim.add_argument("--out", required=True, help="report JSON destination")
    sim.add_argument("--jobs", type=int, default=1)

    rep = sub.add_parser("report", help="print quantile tables from a report")
    rep.add_argument("--report", required=True)
    rep.add_argument("--format", default="text", choices=("text", "csv"))
    return parser


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def cmd_impute(args) -> int:
    codebook = Codebook.from_json(args.codebook)
    data = load_csv(args.data, codebook)
    warnings = []
    manifest: dict = {
        "engine": args.engine,
        "seed": args.seed,
        "L": args.n_imputations,
        "n_rows": data.n,
        "variables": list(codebook.names),
        "missing_cells": int(data.missing.sum()),
    }
    if data.fully_observed:
        warnings.append("no missing cells; outputs are identical copies of the input")
    if args.engine == "dpm":
        cfg = DpmConfig(n_classes=args.k, iterations=args.iterations,
                        burn_in=args.burn_in, n_imputations=args.n_imputations)
        manifest["config"] = {"k": args.k, "iterations": args.iterations,
                              "burn_in": args.burn_in}
        result = dpm_multiple_impute(
            data, cfg, np.random.default_rng(np.random.SeedSequence(args.seed)),
            track_log_joint=args.diagnostics is not None,
        )
        datasets = result.datasets
        manifest["occupancy_max"] = int(result.occupancy.max())
        if result.saturated:
            warnings.append(
                f"occupied classes reached the truncation level {args.k}; "
                f"increase --k and rerun"
            )
        if args.diagnostics:
            _write_diagnostics(args.diagnostics, result)
    else:
        if args.engine == "glm":
            engine = GlmEngine(ridge=args.ridge, max_levels=args.max_levels)
            manifest["config"] = {"cycles": args.cycles, "ordering": args.ordering,
                                  "ridge": args.ridge, "max_levels": args.max_levels}
        else:
            engine = CartEngine(min_leaf=args.min_leaf, cp=args.cp)
            manifest["config"] = {"cycles": args.cycles, "ordering": args.ordering,
                                  "min_leaf": args.min_leaf, "cp": args.cp}
        cfg = ChainedConfig(engine=engine, cycles=args.cycles,
                            ordering=args.ordering,
                            n_imputations=args.n_imputations)
        datasets = multiple_impute(data, cfg, args.seed)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    width = max(2, len(str(args.n_imputations)))
    outputs = []
    for l, completed in enumerate(datasets, start=1):
        name = f"imputed_{l:0{width}d}.csv"
        write_csv(completed, out_dir / name)
        outputs.append(name)
    manifest["outputs"] = outputs
    manifest["warnings"] = warnings
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for message in warnings:
        _warn(message)
    return EXIT_OK


def _write_diagnostics(path, result) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,occupied_classes,alpha,log_joint\n")
        for it in range(len(result.occupancy)):
            fh.write(
                f"{it + 1},{int(result.occupancy[it])},"
                f"{float(result.alpha_trace[it])!r},"
                f"{float(result.log_joint_trace[it])!r}\n"
            )


def cmd_simulate(args) -> int:
    cfg = config_from_json(args.config)
    report = run_simulation(cfg, jobs=max(1, args.jobs))
    with open(args.out, "wb") as fh:
        fh.write(report.to_json_bytes())
    for name, out in report.engines.items():
        if out.n_failed:
            _warn(f"engine {name}: {out.n_failed} failed replications excluded")
        if out.saturation_count:
            _warn(f"engine {name}: class saturation on {out.saturation_count} "
                  f"replications; consider a larger class count")
    print(
        f"simulate: {report.replications} replications, "
        f"{len(report.estimands)} estimands, "
        f"{report.timing['total_seconds']:.1f}s wall",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        report = SimulationReport.from_json(args.report)
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise CodebookError(f"malformed report: {exc}") from exc
    summary = summarize(report)
    renderer = render_text if args.format == "text" else render_csv
    sys.stdout.write(renderer(summary))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"impute": cmd_impute, "simulate": cmd_simulate,
               "report": cmd_report}[args.command]
    try:
        return handler(args)
    except (EngineUnsupported, FitNotConverged) as exc:
        print(f"engine failure: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    except (CodebookError, ValueError, OSError, json.JSONDecodeError, KeyError,
            TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
