"""Batch command-line driver.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .errors import BoundaryDominatedError, ConfigError, DomainError, SolverBlowUpError
from .fkk import AlphaTable, asymptotic_waiting_time, equilibrium_waiting_time, waiting_time_recursion
from .histogram import Histogram, histogram_from_trades_csv
from .pde import (
    FilterParams,
    characteristic_report,
    local_maxima,
    solve_backward,
    solve_forward,
    stationary_report,
    terminal_density,
)
from .pricemap import PriorSpec, moments, price_distribution, rescale_to_dollars
from .sim import (
    empirical_theta_path,
    inter_arrival_ks,
    order_coverage,
    simulate,
    volume_at_price,
    waiting_time_oracle,
    write_traces_csv,
)
from .vwap import AliasKernel, alias_filter, mode_count

log = logging.getLogger("fkklob")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _fmt(x: float) -> str:
    return repr(float(x))


def cmd_fkk(cfg: RunConfig, out: Path, args) -> int:
    p = cfg.model
    levels = args.levels or cfg.fkk_levels
    table = AlphaTable.equilibrium(p.theta_p, levels)
    t = waiting_time_recursion(table, p.lam)
    t_inf = asymptotic_waiting_time(p.theta_p, p.lam)
    closed = equilibrium_waiting_time(np.arange(1, levels + 1), p.theta_p, p.lam)
    rows = []
    for h in range(1, levels + 1):
        gap = abs(t_inf - t[h - 1]) / t_inf
        rows.append([h, _fmt(t[h - 1]), _fmt(closed[h - 1]), _fmt(t_inf), _fmt(gap)])
    path = out / "waiting_times.csv"
    _write_rows(path, ["h", "T_h", "T_h_closed_form", "T_inf", "rel_gap"], rows)
    print(f"wrote {path} ({levels} levels, T_inf={t_inf:.6g})")
    return EXIT_OK


def _mode_summary(surface) -> list[dict]:
    rows = []
    for tau, slc in zip(surface.tau, surface.values):
        rows.append(
            {
                "tau": float(tau),
                "mode_count": mode_count(slc, 0.1),
                "mode_locations": [float(x) for x in local_maxima(slc, surface.grid)],
            }
        )
    return rows


def cmd_pde(cfg: RunConfig, out: Path, args) -> int:
    params = cfg.filter
    if args.characteristics:
        params = FilterParams(params.lam, 0.0, params.mu, params.horizon_t)
    grid, tc, steps = cfg.grid, cfg.terminal, cfg.n_tau_steps
    surface = solve_backward(params, grid, tc, steps)
    surface.to_csv(out / "surface.csv")
    summary = {
        "lam": params.lam,
        "sigma": params.sigma,
        "mu": params.mu,
        "horizon_t": params.horizon_t,
        "n_nodes": grid.n_nodes,
        "n_tau_steps": steps,
        "max_mass_drift": float(np.max(np.abs(surface.masses - 1.0))),
        "renorm_factor_min": float(surface.renorm_factors.min()),
        "renorm_factor_max": float(surface.renorm_factors.max()),
        "clip_mass_total": float(surface.clip_mass.sum()),
        "min_before_clip": float(surface.min_before_clip.min()),
        "modes": _mode_summary(surface),
    }
    if args.forward_check:
        if params.mu != 0.0:
            raise ConfigError("--forward-check needs filter.mu = 0")
        fwd = solve_forward(params, grid, terminal_density(grid, tc), steps)
        summary["forward_max_mass_drift"] = float(np.max(np.abs(fwd.masses - fwd.masses[0])))
    if args.characteristics:
        starts = [tc.theta_1, tc.theta_2]
        rows = characteristic_report(surface, params, starts)
        _write_rows(
            out / "characteristics.csv",
            ["tau", "start", "predicted", "error", "error_cells"],
            [[_fmt(r["tau"]), _fmt(r["start"]), _fmt(r["predicted"]), _fmt(r["error"]), _fmt(r["error"] / grid.h)] for r in rows],
        )
        summary["characteristic_max_error_cells"] = max(r["error"] for r in rows) / grid.h
    if params.sigma > 0:
        try:
            _write_json(out / "stationary_report.json", stationary_report(params, grid))
        except BoundaryDominatedError as exc:
            _write_json(out / "stationary_report.json", {"error": str(exc), "table": exc.table})
    _write_json(out / "summary.json", summary)
    counts = [m["mode_count"] for m in summary["modes"]]
    print(f"wrote {out / 'surface.csv'}; modes at tau=0: {counts[0]}, at tau=T: {counts[-1]}")
    if "forward_max_mass_drift" in summary:
        print(f"forward mass drift {summary['forward_max_mass_drift']:.3e}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out: Path, args) -> int:
    sc = cfg.sim
    traces = simulate(sc, workers=args.workers)
    write_traces_csv(traces, out / "traces.csv")
    volume_at_price(traces, cfg.bin_width, origin=sc.params.bid_b).to_csv(out / "volume_at_price.csv")
    report = waiting_time_oracle(traces, sc.params)
    rows = [
        [r.spread, r.level, _fmt(r.mean), _fmt(r.se), r.count, _fmt(r.theory), "PASS" if r.passed else "FAIL"]
        for r in report.rows
    ]
    if report.overall is not None:
        o = report.overall
        rows.append(["all_limit", "inf", _fmt(o.mean), _fmt(o.se), o.count, _fmt(o.theory), "PASS" if o.passed else "FAIL"])
    _write_rows(out / "oracle.csv", ["spread_ticks", "level", "mean_delay", "se", "count", "theory", "status"], rows)
    cov = order_coverage(traces)
    extra = {"coverage": cov, "ks_pvalue": inter_arrival_ks(traces, sc.params.lam)}
    if sc.mix_mode == "markov":
        horizon = min(float(t.time[-1]) for t in traces)
        edges = np.linspace(0.0, horizon, 11)
        path = empirical_theta_path(traces, edges, sc.initial_patient_prob, sc.params.lam)
        _write_rows(
            out / "theta_path.csv",
            ["t_lo", "t_hi", "fraction", "se", "count", "expected"],
            [
                [_fmt(a), _fmt(b), _fmt(f), _fmt(s), int(c), _fmt(e)]
                for a, b, f, s, c, e in zip(edges[:-1], edges[1:], path.fraction, path.se, path.count, path.expected)
            ],
        )
    _write_json(out / "simulate_summary.json", extra)
    status = "PASS" if report.passed else "FAIL"
    print(f"wrote {out / 'traces.csv'}; oracle {status}; executed {cov['executed']}/{cov['total']}")
    return EXIT_OK


def cmd_price(cfg: RunConfig, out: Path, args) -> int:
    model, params = cfg.model, cfg.filter
    times = args.times or cfg.price_times
    surface = solve_backward(params, cfg.grid, cfg.terminal, cfg.n_tau_steps)
    meta = {
        "lam": params.lam,
        "sigma": params.sigma,
        "mu": params.mu,
        "theta": model.theta_p,
        "T": params.horizon_t,
        "tick": model.tick,
    }
    rows = []
    for t in times:
        prior = PriorSpec.for_time(model.lam, model.theta_p, t)
        dens = price_distribution(surface, prior, t, model.max_spread_k, meta=meta)
        dens = rescale_to_dollars(dens, model.bid_b, model.tick, side="sell")
        dens.to_csv(out / f"price_t{t:g}.csv")
        mean, std = moments(dens)
        mean_d, std_d = moments(dens, in_dollars=True)
        rows.append([_fmt(t), _fmt(mean), _fmt(std), _fmt(mean_d), _fmt(std_d), _fmt(dens.clamped_mass), _fmt(dens.truncated_mass)])
    _write_rows(out / "moments.csv", ["t", "mean_ticks", "std_ticks", "mean_dollars", "std_dollars", "clamped_mass", "truncated_mass"], rows)
    print(f"wrote {len(times)} price densities and {out / 'moments.csv'}")
    return EXIT_OK


def cmd_filter(cfg: RunConfig, out: Path, args) -> int:
    if (args.input is None) == (args.trades is None):
        raise ConfigError("give exactly one of --input or --trades")
    if args.input is not None:
        hist = Histogram.from_csv(args.input)
    else:
        hist = histogram_from_trades_csv(args.trades, args.bin_width or cfg.bin_width)
    base = cfg.kernel
    kernel = AliasKernel(
        base.sigma_p if args.sigma_p is None else args.sigma_p,
        base.sigma_w if args.sigma_w is None else args.sigma_w,
        base.j if args.j is None else args.j,
    )
    filtered = alias_filter(hist, kernel)
    path = out / "filtered.csv"
    filtered.to_csv(path)
    print(f"wrote {path}; modes {mode_count(hist.masses, 0.1)} -> {mode_count(filtered.masses, 0.1)}")
    return EXIT_OK


COMMANDS = {
    "fkk": cmd_fkk,
    "pde": cmd_pde,
    "simulate": cmd_simulate,
    "price": cmd_price,
    "filter": cmd_filter,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fkklob", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fkk", parents=[common], help="equilibrium waiting-time table")
    p.add_argument("--levels", type=int, help="number of book levels")

    p = sub.add_parser("pde", parents=[common], help="solve for the patient-fraction density surface")
    p.add_argument("--forward-check", action="store_true", help="also run the conservative forward solve")
    p.add_argument("--characteristics", action="store_true", help="solve with sigma=0 and compare modes with characteristics")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo trading sessions")
    p.add_argument("--workers", type=int, default=1, help="worker processes")

    p = sub.add_parser("price", parents=[common], help="price densities and moments over integration times")
    p.add_argument("--times", type=float, nargs="+", help="real times t (override price.times)")

    p = sub.add_parser("filter", parents=[common], help="Gaussian aliasing filter for a histogram")
    p.add_argument("--input", type=Path, help="histogram CSV (bin_lo,bin_hi,mass)")
    p.add_argument("--trades", type=Path, help="trade CSV with price,volume columns")
    p.add_argument("--bin-width", type=float, help="bin width for --trades")
    p.add_argument("--sigma-p", type=float, help="price-domain std")
    p.add_argument("--sigma-w", type=float, help="frequency-domain low-pass width")
    p.add_argument("--j", type=int, help="integration periods")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_overrides(seed=args.seed)
        if args.out is not None:
            cfg = cfg.with_overrides(**{"output.dir": str(args.out)})
        out = cfg.output_dir
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except (ConfigError, DomainError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverBlowUpError, BoundaryDominatedError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
