"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) and then
asserts, so a failure is visible both in the summary and as a test failure.
"""
from __future__ import annotations

import math
import time

import numpy as np
import pytest

from fkklob.cli import main
from fkklob.fkk import (
    AlphaTable,
    ModelParams,
    asymptotic_waiting_time,
    equilibrium_waiting_time,
    waiting_time_recursion,
)
from fkklob.histogram import Histogram
from fkklob.pde import (
    FilterParams,
    OmegaGrid,
    TerminalCondition,
    characteristic_report,
    probability_current,
    solve_backward,
    solve_forward,
    stationary_numeric,
    stationary_report,
    terminal_density,
)
from fkklob.pricemap import PriorSpec, moments, price_distribution
from fkklob.sim import SimConfig, empirical_theta_path, simulate, waiting_time_oracle
from fkklob.vwap import AliasKernel, alias_filter, loss_estimate, mode_count

from oracles import enumerated_waiting_times, random_alpha_rows

DEFAULT_TC = TerminalCondition(0.5, 0.5, 0.13, 0.38)


def test_c01_closed_form_tends_to_constant(acceptance):
    start = time.perf_counter()
    worst = 0.0
    for theta in (0.1, 0.25, 0.3, 0.4):
        for lam in (0.25, 0.5, 1.0):
            t_inf = asymptotic_waiting_time(theta, lam)
            worst = max(worst, abs(equilibrium_waiting_time(200, theta, lam) - t_inf) / t_inf)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 1.0
    acceptance(1, "closed form at h=200", ok, f"max rel err {worst:.2e}", elapsed)
    assert ok


def test_c02_recursion_matches_enumeration(acceptance):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for n_levels in range(1, 6):
        for _ in range(4):
            rows = random_alpha_rows(rng, n_levels)
            lam = rng.uniform(0.2, 2.0)
            got = waiting_time_recursion(AlphaTable(rows), lam)
            want = enumerated_waiting_times(rows, lam)
            worst = max(worst, float(np.max(np.abs(got - want) / want)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 5.0
    acceptance(2, "recursion vs enumeration, j<=5", ok, f"max rel err {worst:.2e}", elapsed)
    assert ok


def test_c03_monte_carlo_delays(acceptance):
    # 100 ticks between the quotes so the book rarely reaches the top rung
    p = ModelParams(lam=1.0, theta_p=0.25, delta_p=0.1, delta_i=1.0, tick=0.01, ask_a=25.0, bid_b=24.0)
    start = time.perf_counter()
    traces = simulate(SimConfig(p, n_sessions=100, session_length=1000, seed=3))
    report = waiting_time_oracle(traces, p)
    elapsed = time.perf_counter() - start
    limits = [r for r in report.rows if r.level > 0]
    worst = max(abs(r.z) for r in limits)
    o = report.overall
    ok = report.passed and len(limits) >= 3 and elapsed < 30.0
    detail = f"{len(limits)} levels, max |z| {worst:.2f}; overall {o.mean:.4f} vs {o.theory:.4f} (z={o.z:.2f})"
    acceptance(3, "Monte Carlo delays vs closed form", ok, detail, elapsed)
    assert ok


def test_c04_markov_patient_fraction(acceptance):
    p = ModelParams(lam=0.25, theta_p=0.25, delta_p=0.05, delta_i=1.0, tick=0.01, ask_a=24.2, bid_b=24.0)
    start = time.perf_counter()
    cfg = SimConfig(p, n_sessions=10_000, session_length=10, seed=4, mix_mode="markov", theta_0=0.0)
    path = empirical_theta_path(simulate(cfg), [1.75, 2.25], 0.0, 0.25)
    elapsed = time.perf_counter() - start
    target = 0.5 * (1.0 - math.exp(-1.0))
    frac, se = float(path.fraction[0]), float(path.se[0])
    ok = abs(frac - target) <= 3 * se and elapsed < 30.0
    acceptance(4, "patient fraction at t=2", ok, f"{frac:.4f} +/- {se:.4f} vs {target:.5f}", elapsed)
    assert ok


def test_c05_forward_conservation(acceptance):
    p = FilterParams(0.25, 1.0, 0.0, 25.0)
    g = OmegaGrid(400)
    start = time.perf_counter()
    s = solve_forward(p, g, terminal_density(g, DEFAULT_TC), 250)
    drift = float(np.max(np.abs(s.masses - 1.0)))
    elapsed = time.perf_counter() - start
    ok = drift <= 1e-6 and elapsed < 30.0
    acceptance(5, "forward mass conservation", ok, f"max |mass-1| {drift:.2e}", elapsed)
    assert ok


def test_c06_spatial_convergence(acceptance):
    p = FilterParams(0.25, 1.0, 0.0, 10.0)
    tc = TerminalCondition(0.5, 0.5, 0.13, 0.38, eps=0.02)
    start = time.perf_counter()
    sols = [solve_backward(p, OmegaGrid(n), tc, 20).values[-1] for n in (101, 201, 401)]
    e_coarse = np.max(np.abs(sols[0] - sols[1][::2]))
    e_fine = np.max(np.abs(sols[1] - sols[2][::2]))
    order = math.log2(e_coarse / e_fine)
    elapsed = time.perf_counter() - start
    ok = order >= 1.8 and elapsed < 120.0
    acceptance(6, "Richardson order on tau=T", ok, f"order {order:.3f}", elapsed)
    assert ok


def test_c07_degenerate_advection(acceptance):
    p = FilterParams(0.25, 0.0, 0.0, 4.0)
    g = OmegaGrid(401)
    start = time.perf_counter()
    s = solve_backward(p, g, DEFAULT_TC, 40)
    worst = max(r["error"] for r in characteristic_report(s, p, [0.13, 0.38])) / g.h
    elapsed = time.perf_counter() - start
    ok = worst <= 1.0
    acceptance(7, "sigma=0 modes follow characteristics", ok, f"max error {worst:.3f} cells", elapsed)
    assert ok


def test_c08_stationary_density(acceptance):
    p = FilterParams(0.25, 1.0, 0.0)
    g = OmegaGrid(1001)
    start = time.perf_counter()
    dens = stationary_numeric(p, g)
    current = float(np.max(np.abs(probability_current(dens, g, p)[1:-1])) / dens.max())
    report = stationary_report(p, g)
    elapsed = time.perf_counter() - start
    ok = current <= 1e-6 and "printed_vs_numeric_l1" in report
    detail = f"max rel current {current:.2e}; printed form L1 gap {report['printed_vs_numeric_l1']:.3f}"
    acceptance(8, "zero-current stationary density", ok, detail, elapsed)
    assert ok


def test_c09_modes_split_over_the_session(acceptance):
    start = time.perf_counter()
    s = solve_backward(FilterParams(0.25, 1.0, 0.0, 10.0), OmegaGrid(401), DEFAULT_TC, 100)
    # tau runs backwards from the end of the session, so reverse for real time
    counts = [mode_count(v, 0.1) for v in s.values[::-1]]
    elapsed = time.perf_counter() - start
    ok = counts[0] == 1 and counts[-1] == 2 and all(b >= a for a, b in zip(counts, counts[1:]))
    switch = next(i for i, c in enumerate(counts) if c == 2) if 2 in counts else None
    acceptance(9, "mode count 1 -> 2 in real time", ok, f"first two-mode slice {switch} of {len(counts)}", elapsed)
    assert ok


def test_c10_price_std_rises_then_flattens(acceptance):
    lam, theta, horizon = 0.5, 0.1, 25.0
    start = time.perf_counter()
    s = solve_backward(FilterParams(lam, 1.0, 0.0, horizon), OmegaGrid(201), DEFAULT_TC, 100)
    stds = []
    for t in (5.0, 10.0, 15.0, 20.0, 25.0):
        d = price_distribution(s, PriorSpec.for_time(lam, theta, t), t, 50)
        stds.append(moments(d)[1])
    steps = np.diff(stds)
    elapsed = time.perf_counter() - start
    ok = bool(np.all(steps >= 0) and steps[-1] < steps[0])
    acceptance(10, "price std trend", ok, "std " + ", ".join(f"{x:.3f}" for x in stds), elapsed)
    assert ok


def test_c11_aliasing_filter(acceptance):
    start = time.perf_counter()
    delta = np.zeros(41)
    delta[20] = 1.0
    hist = Histogram.uniform(-0.5, 1.0, delta)
    std = moments(alias_filter(hist, AliasKernel(2.0, j=4)))[1]
    worst = 0.0
    for s1, s2 in ((2.0, 3.0), (1.5, 1.5), (4.0, 2.5)):
        twice = alias_filter(alias_filter(hist, AliasKernel(s1)), AliasKernel(s2))
        once = alias_filter(hist, AliasKernel(math.hypot(s1, s2)))
        lo = min(twice.edges[0], once.edges[0])
        n = int(round(max(twice.edges[-1], once.edges[-1]) - lo))
        grids = []
        for h in (twice, once):
            v = np.zeros(n)
            at = int(round(h.edges[0] - lo))
            v[at : at + len(h.masses)] = h.masses
            grids.append(v)
        worst = max(worst, float(np.max(np.abs(grids[0] - grids[1]))))
    elapsed = time.perf_counter() - start
    ok = abs(std - 4.0) <= 0.04 and worst <= 1e-6
    acceptance(11, "aliasing std and semigroup", ok, f"std {std:.5f} bins; semigroup gap {worst:.1e}", elapsed)
    assert ok


def test_c12_loss_band(acceptance):
    start = time.perf_counter()
    _, total = loss_estimate(85.0, 22)
    elapsed = time.perf_counter() - start
    ok = 300.0 <= total <= 470.0
    acceptance(12, "sqrt(n) loss accrual", ok, f"{total:.1f} bp over 22 periods", elapsed)
    assert ok


def test_c13_cli_determinism(tmp_path, acceptance):
    cfg = tmp_path / "run.toml"
    cfg.write_text("[model]\ntheta_p = 0.3\n\n[sim]\nn_sessions = 8\nsession_length = 400\n")
    start = time.perf_counter()
    outputs = []
    for name, workers in (("a", 1), ("b", 1), ("c", 2)):
        out = tmp_path / name
        assert main(["simulate", "--config", str(cfg), "--seed", "17", "--out", str(out), "--workers", str(workers)]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    elapsed = time.perf_counter() - start
    ok = outputs[0] == outputs[1] == outputs[2] and "traces.csv" in outputs[0]
    acceptance(13, "CLI simulate determinism", ok, f"{len(outputs[0])} files identical across runs and workers", elapsed)
    assert ok
