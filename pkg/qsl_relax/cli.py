"""Command-line front end for the relaxation speed-limit toolkit.

Subcommands write plot-ready CSV/JSON artifacts:

    qsl simulate --preset 20mM-sim --t-max 0.15 --points 2000 --out DIR
    qsl analyze (--preset NAME | --input FILE.csv) --out DIR
    qsl fit --input FILE.csv --model xi --fix-j 209.1 --out DIR
    qsl sweep --presets 20mM-sim,120mM-sim,300mM-sim --out DIR
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any

from dotenv import load_dotenv
from rich import print
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape

from .analysis import (
    SUMMARY_COLUMNS,
    Analysis,
    analyze_model,
    analyze_series,
    prepare_series,
    summary_row,
)
from .artifacts import ArtifactWriter
from .core import RelaxationParams
from .dynamics import sx_series, trotter_simulate
from .errors import ConfigError, DomainError, FitError, QslError
from .ingest import (
    FitResult,
    fit_exp_cos,
    fit_relaxivity,
    fit_xi_model,
    load_rates,
    load_series,
)
from .markovianity import coherence_series
from .presets import PRESETS, RunConfig, build_config, get_preset

logger = logging.getLogger(__name__)

DEFAULT_SWEEP = "20mM-sim,120mM-sim,300mM-sim"

err_console = Console(stderr=True)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help=f"Parameter preset ({', '.join(PRESETS)})")
    p.add_argument("--config", help="JSON config file (flags override its values)")
    p.add_argument("--out", help="Output directory (default: $QSL_OUT_DIR or qsl-out)")
    p.add_argument("--t-max", type=float, help="Grid end time in seconds")
    p.add_argument("--points", type=int, help="Number of grid points")
    p.add_argument("--x0", type=float, help="Initial <sigma_x> of carbon")
    p.add_argument("--z0", type=float, help="Initial <sigma_z> of carbon")
    p.add_argument("--rel-tol", type=float, help="Relative quadrature tolerance")
    p.add_argument("--abs-tol", type=float, help="Absolute quadrature tolerance")


def build_parser() -> argparse.ArgumentParser:
    """Build the CLI argument parser."""
    p = argparse.ArgumentParser(
        prog="qsl",
        description="Quantum speed limits of a relaxing carbon-hydrogen spin pair",
    )
    p.add_argument(
        "--debug",
        action="store_true",
        help="Log debug detail (quadrature pieces, fit progress) to stderr",
    )
    sub = p.add_subparsers(dest="command")

    sim = sub.add_parser("simulate", help="Write analytic and trotter <sigma_x> curves")
    _add_common(sim)
    sim.add_argument("--trotter-dt", type=float, help="Trotter step in seconds")

    ana = sub.add_parser("analyze", help="Relative deviations, crossovers, verdict")
    _add_common(ana)
    ana.add_argument("--input", help="Measured <sigma_x> series (t_s,value CSV)")
    ana.add_argument(
        "--reference",
        type=float,
        help="Normalize the input by this amplitude, then scale to x0",
    )
    ana.add_argument("--smooth-window", type=int, help="Smoothing window (odd)")
    ana.add_argument("--smooth-degree", type=int, help="Smoothing polynomial degree")
    ana.add_argument(
        "--no-smooth", action="store_true", help="Analyse the input unsmoothed"
    )
    ana.add_argument("--noise-floor", type=float, help="Crossover noise floor")
    ana.add_argument("--revival-threshold", type=float, help="Revival threshold")

    fit = sub.add_parser("fit", help="Fit a relaxation model to a series")
    fit.add_argument("--input", required=True, help="Series to fit (t_s,value CSV)")
    fit.add_argument("--model", choices=("expcos", "xi"), default="xi")
    fit.add_argument("--preset", help="Take starting values from a preset")
    fit.add_argument(
        "--config", help="JSON config file with starting params and output_dir"
    )
    fit.add_argument("--out", help="Output directory (default: $QSL_OUT_DIR)")
    fit.add_argument("--fix-j", type=float, help="Freeze J at this value (Hz)")
    fit.add_argument("--T1H", type=float, help="Starting T1H in seconds")
    fit.add_argument("--T2C", type=float, help="Starting T2C in seconds")
    fit.add_argument("--J", type=float, help="Starting J in Hz")
    fit.add_argument("--M0", type=float, help="Starting amplitude (expcos)")
    fit.add_argument("--omega", type=float, help="Starting omega in rad/s (expcos)")
    fit.add_argument(
        "--offset", action="store_true", help="Fit a frequency-offset factor (xi)"
    )
    fit.add_argument("--seed", type=int, help="Seed for jittered restarts")
    fit.add_argument("--restarts", type=int, default=0, help="Extra jittered starts")

    sw = sub.add_parser("sweep", help="Summarize several presets")
    _add_common(sw)
    sw.add_argument(
        "--presets",
        default=DEFAULT_SWEEP,
        help=f"Comma-separated presets (default: {DEFAULT_SWEEP})",
    )
    sw.add_argument(
        "--workers",
        type=int,
        default=None,
        help="Worker processes (default: number of processors)",
    )
    sw.add_argument("--rates", help="concentration_mM,rate_per_s CSV for relaxivity")
    return p


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Map flags onto the config-file layout; unset flags stay None."""

    def get(name: str) -> Any:
        return getattr(args, name, None)

    return {
        "initial_state": {"x0": get("x0"), "z0": get("z0")},
        "grid": {"t_max": get("t_max"), "n_points": get("points")},
        "quadrature": {"rel_tol": get("rel_tol"), "abs_tol": get("abs_tol")},
        "smoothing": {"window": get("smooth_window"), "degree": get("smooth_degree")},
        "crossover_noise_floor": get("noise_floor"),
        "revival_threshold": get("revival_threshold"),
        "trotter_dt": get("trotter_dt"),
        "output_dir": get("out"),
    }


def _config(args: argparse.Namespace, *, need_params: bool = True) -> RunConfig:
    cfg = build_config(args.preset, getattr(args, "config", None), _overrides(args))
    if need_params:
        cfg.require_params()
    return cfg


def cmd_simulate(args: argparse.Namespace) -> int:
    """Write ``sx.csv``, ``sx_trotter.csv`` and ``coherence.csv``."""
    cfg = _config(args)
    p = cfg.require_params()
    b0 = cfg.bloch()
    sx = sx_series(cfg.times(), b0, p)
    n_steps = max(1, math.ceil(cfg.grid.t_max / cfg.trotter_dt - 1e-9))
    trotter_sx, _, _ = trotter_simulate(cfg.grid.t_max, n_steps, b0, p)

    out = ArtifactWriter(cfg.output_dir)
    out.write_series("sx.csv", sx)
    out.write_series("sx_trotter.csv", trotter_sx)
    out.write_series("coherence.csv", coherence_series(sx))
    out.write_json("run.json", cfg.to_dict())
    for path in out.written:
        print(f"[bold]Wrote[/bold] {path}")
    return 0


def _write_analysis(out: ArtifactWriter, result: Analysis, source: str) -> None:
    report = result.report.to_dict()
    report["source"] = source
    out.write_json("report.json", report)
    out.write_series("delta_qfi.csv", result.delta_qfi)
    out.write_series("delta_wy.csv", result.delta_wy)
    out.write_series("delta_diff.csv", result.delta_diff)
    out.write_series("coherence.csv", result.coherence)


def cmd_analyze(args: argparse.Namespace) -> int:
    """Analyse a preset model or an ingested series."""
    if args.preset and args.input:
        raise ConfigError("give either --preset or --input, not both")
    if not (args.preset or args.input or args.config):
        raise ConfigError("give --preset, --input or --config")
    cfg = _config(args, need_params=not args.input)
    if args.input:
        raw = load_series(args.input)
        series = prepare_series(
            raw, cfg, reference=args.reference, smoothing=not args.no_smooth
        )
        result = analyze_series(series, cfg)
        source = os.path.basename(args.input)
    else:
        result = analyze_model(cfg)
        source = cfg.preset or "config"

    out = ArtifactWriter(cfg.output_dir)
    _write_analysis(out, result, source)
    rep = result.report
    verdict = rep.markovianity
    print(
        f"[bold]{source}[/bold]: "
        f"{verdict.label if verdict else 'no verdict'}, "
        f"{len(rep.crossovers.times)} crossovers"
    )
    if rep.undefined_points:
        print(
            f"[yellow]Warning:[/yellow] {rep.undefined_points} grid points with "
            "undefined deviation omitted"
        )
    for path in out.written:
        print(f"[bold]Wrote[/bold] {path}")
    return 0


def _fit_guess(args: argparse.Namespace, cfg: RunConfig) -> RelaxationParams:
    base = cfg.params or get_preset("20mM-sim").params
    j = args.fix_j if args.fix_j is not None else args.J
    try:
        return RelaxationParams(
            args.T1H if args.T1H is not None else base.T1H,
            args.T2C if args.T2C is not None else base.T2C,
            j if j is not None else base.J,
        )
    except DomainError as exc:
        raise DomainError(f"bad initial guess: {exc}") from exc


def cmd_fit(args: argparse.Namespace) -> int:
    """Fit ``expcos`` or ``xi`` to a series and write ``fit.json``."""
    cfg = build_config(args.preset, args.config, {"output_dir": args.out})
    out = ArtifactWriter(cfg.output_dir)
    series = load_series(args.input)
    guess = _fit_guess(args, cfg)
    try:
        if args.model == "expcos":
            result = fit_exp_cos(
                series,
                {
                    "M0": args.M0 if args.M0 is not None else float(series.value[0]),
                    "T2C": guess.T2C,
                    "omega": (
                        args.omega if args.omega is not None else math.pi * guess.J
                    ),
                },
                seed=args.seed,
                restarts=args.restarts,
            )
        else:
            result = fit_xi_model(
                series,
                guess,
                float(series.value[0]),
                fix_j=args.fix_j is not None,
                offset=args.offset,
                seed=args.seed,
                restarts=args.restarts,
            )
    except FitError as exc:
        if isinstance(exc.best, FitResult):
            path = out.write_json("fit_failed.json", exc.best.to_dict())
            err_console.print(f"[yellow]Best-so-far written to[/yellow] {path}")
        raise
    sys.stdout.write(result.to_json())
    path = out.write_json("fit.json", result.to_dict())
    for flag in result.flags:
        err_console.print(f"[yellow]Warning:[/yellow] {flag}")
    err_console.print(f"[bold]Wrote[/bold] {path}")
    return 0


def _sweep_names(names_arg: str) -> list[str]:
    names = [n.strip() for n in names_arg.split(",") if n.strip()]
    if not names:
        raise ConfigError("--presets needs at least one preset")
    resolved = [get_preset(n).name for n in names]
    dupes = sorted({n for n in resolved if resolved.count(n) > 1})
    if dupes:
        raise ConfigError(f"duplicate presets: {', '.join(dupes)}")
    return resolved


def cmd_sweep(args: argparse.Namespace) -> int:
    """Analyse several presets concurrently and write ``summary.csv``."""
    names = _sweep_names(args.presets)
    cfg = _config(args, need_params=False)
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
    if workers < 1:
        raise ConfigError("--workers must be >= 1")

    if workers == 1 or len(names) == 1:
        rows = [summary_row(n, cfg) for n in names]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(names))) as pool:
            rows = list(pool.map(summary_row, names, [cfg] * len(names)))
    rows.sort(key=lambda r: (r["concentration_mM"], r["preset"]))

    out = ArtifactWriter(cfg.output_dir)
    out.write_rows(
        "summary.csv", SUMMARY_COLUMNS, [[r[c] for c in SUMMARY_COLUMNS] for r in rows]
    )
    if args.rates:
        conc, rates = load_rates(args.rates)
        out.write_json("relaxivity.json", fit_relaxivity(conc, rates).to_dict())

    for r in rows:
        if r["status"] == "ok":
            print(f"[green]{r['preset']}[/green]: {r['verdict']}")
        else:
            print(f"[red]{r['preset']}[/red]: failed ({r['error']})")
    for path in out.written:
        print(f"[bold]Wrote[/bold] {path}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "fit": cmd_fit,
    "sweep": cmd_sweep,
}


def _setup_logging(debug: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


def main(argv: list[str] | None = None) -> int:
    """Run the CLI.

    Args:
        argv: Optional list of arguments (defaults to ``sys.argv`` when None).

    Returns:
        int: Process exit code: ``0`` success, ``2`` configuration or domain
        error, ``3`` data error, ``4`` convergence error, ``1`` otherwise.
    """
    load_dotenv()
    args = build_parser().parse_args(argv)
    if args.command is None:
        print("[red]Error:[/red] choose a command: " + ", ".join(COMMANDS))
        return 2
    _setup_logging(args.debug)
    try:
        return COMMANDS[args.command](args)
    except QslError as exc:
        err_console.print(f"[red]Error:[/red] {escape(str(exc))}", highlight=False)
        return exc.exit_code
    except Exception as exc:  # pragma: no cover - unexpected failures
        logger.debug("unexpected failure", exc_info=True)
        err_console.print(f"[red]Error:[/red] {escape(str(exc))}", highlight=False)
        return 1


if __name__ == "__main__":
    sys.exit(main())
