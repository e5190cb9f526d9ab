"""Discrete-event Monte Carlo of trading sessions under the undercutting strategy.

Buyers and sellers alternate (a seller opens each session).  Outstanding
limit orders form a stack: a patient trader facing a spread above the
bottom rung of the ladder posts one tick inside it, anyone else sends a
market order that executes against the most recent limit order, or against
the session-start quote when the book is empty.  Because sides alternate,
the top of the stack is always on the side opposite the next arrival.

Prices are tracked in ticks above the session-start bid ``b``; the ask
``a`` sits at ``K`` ticks.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import DomainError
from .fkk import ModelParams, equilibrium_waiting_time, asymptotic_waiting_time, spread_ladder
from .histogram import Histogram, bin_prices

log = logging.getLogger(__name__)

MIX_MODES = ("iid", "markov")
BUY, SELL = 1, -1


@dataclass(frozen=True)
class SimConfig:
    """Simulation setup.

    In ``"markov"`` mode the trader type follows a two-state chain that
    switches at rate ``params.lam`` in each direction, starting patient with
    probability ``theta_0`` (default ``params.theta_p``).
    """

    params: ModelParams
    n_sessions: int = 1
    session_length: int = 1000
    seed: int = 0
    mix_mode: str = "iid"
    theta_0: float | None = None

    def __post_init__(self) -> None:
        if self.n_sessions < 1 or self.session_length < 1:
            raise DomainError("n_sessions and session_length must be >= 1")
        if self.mix_mode not in MIX_MODES:
            raise DomainError(f"mix_mode must be one of {MIX_MODES}")
        if self.theta_0 is not None and not 0.0 <= self.theta_0 <= 1.0:
            raise DomainError("theta_0 must lie in [0, 1]")
        if self.seed < 0:
            raise DomainError("seed must be non-negative")

    @property
    def initial_patient_prob(self) -> float:
        return self.params.theta_p if self.theta_0 is None else self.theta_0

    def generator(self, session: int) -> np.random.Generator:
        # Philox is counter-based: each session owns an independent stream
        return np.random.Generator(np.random.Philox(np.random.SeedSequence([self.seed, session])))


@dataclass(frozen=True)
class SessionTrace:
    """Columnar event log of one session (one row per arrival).

    ``spread`` is 0 for market orders.  ``price`` is the posted price for
    limit orders and the execution price for market orders, in dollars.
    ``exec_time`` is NaN for limit orders still resting at session end.
    """

    session: int
    time: np.ndarray
    patient: np.ndarray
    market: np.ndarray
    side: np.ndarray
    spread: np.ndarray
    price: np.ndarray
    exec_time: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.time)
        cols = ("time", "patient", "market", "side", "spread", "price", "exec_time")
        if any(len(getattr(self, c)) != n for c in cols):
            raise ValueError("trace columns must have equal length")
        if n > 1 and np.any(np.diff(self.time) <= 0):
            raise ValueError("arrival times must be strictly increasing")
        done = ~np.isnan(self.exec_time)
        if np.any(self.exec_time[done] < self.time[done]):
            raise ValueError("execution before arrival")

    def __len__(self) -> int:
        return len(self.time)

    @property
    def delays(self) -> np.ndarray:
        """Execution delay per event.  A market order's delay is the gap
        since the previous arrival (its own waiting time in the flow)."""
        out = self.exec_time - self.time
        gaps = np.diff(self.time, prepend=0.0)
        return np.where(self.market, gaps, out)


def _switch_probs(gaps: np.ndarray, lam: float) -> np.ndarray:
    return 0.5 * (1.0 - np.exp(-2.0 * lam * gaps))


def _trader_types(config: SimConfig, rng: np.random.Generator, times: np.ndarray) -> np.ndarray:
    n = len(times)
    if config.mix_mode == "iid":
        return rng.random(n) < config.params.theta_p
    start = rng.random() < config.initial_patient_prob
    flips = rng.random(n) < _switch_probs(np.diff(times, prepend=0.0), config.params.lam)
    # state at arrival k = start XOR parity of flips up to k
    return np.logical_xor(start, np.cumsum(flips) % 2 == 1)


def simulate_session(config: SimConfig, session: int) -> SessionTrace:
    p = config.params
    n = config.session_length
    rng = config.generator(session)
    times = np.cumsum(rng.exponential(1.0 / p.lam, size=n))
    patient = _trader_types(config, rng, times)

    ladder = spread_ladder(p)
    bottom = ladder[0] if ladder else None
    k = p.max_spread_k
    market = np.zeros(n, dtype=bool)
    side = np.where(np.arange(n) % 2 == 0, SELL, BUY)
    spread = np.zeros(n, dtype=np.int64)
    ticks = np.zeros(n, dtype=np.int64)
    exec_time = np.full(n, np.nan)

    stack: list[int] = []  # indices of resting limit orders, most recent last
    for i in range(n):
        current = spread[stack[-1]] if stack else k
        if patient[i] and bottom is not None and current > bottom:
            s = current - 1
            spread[i] = s
            if side[i] == SELL:
                best_bid = ticks[stack[-1]] if stack else 0
                ticks[i] = best_bid + s
            else:
                best_ask = ticks[stack[-1]] if stack else k
                ticks[i] = best_ask - s
            stack.append(i)
        else:
            market[i] = True
            exec_time[i] = times[i]
            if stack:
                j = stack.pop()
                exec_time[j] = times[i]
                ticks[i] = ticks[j]
            else:
                ticks[i] = k if side[i] == BUY else 0
    price = p.bid_b + p.tick * ticks
    return SessionTrace(session, times, patient, market, side, spread, price, exec_time)


def _run_one(args: tuple[SimConfig, int]) -> SessionTrace:
    return simulate_session(*args)


def simulate(config: SimConfig, workers: int = 1) -> list[SessionTrace]:
    """All sessions of ``config``, in session order regardless of ``workers``."""
    jobs = [(config, s) for s in range(config.n_sessions)]
    if workers <= 1 or config.n_sessions == 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


@dataclass(frozen=True)
class LevelStats:
    mean: float
    se: float
    count: int


def _stats(values: np.ndarray) -> LevelStats:
    n = len(values)
    mean = math.fsum(values) / n
    if n > 1:
        se = math.sqrt(math.fsum((values - mean) ** 2) / (n - 1) / n)
    else:
        se = math.nan
    return LevelStats(mean, se, n)


def empirical_waiting_times(traces: Iterable[SessionTrace]) -> dict[int, LevelStats]:
    """Mean execution delay and its standard error per spread (in ticks).

    Key 0 holds market orders.  Limit orders unexecuted at session end are
    left out; levels without executions do not appear.
    """
    spreads, delays = _executed(traces)
    return {int(s): _stats(delays[spreads == s]) for s in np.unique(spreads)}


def overall_limit_delay(traces: Iterable[SessionTrace]) -> LevelStats:
    spreads, delays = _executed(traces)
    lim = delays[spreads > 0]
    if len(lim) == 0:
        raise ValueError("no executed limit orders")
    return _stats(lim)


def _executed(traces: Iterable[SessionTrace]) -> tuple[np.ndarray, np.ndarray]:
    traces = list(traces)
    if not traces:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    spreads = np.concatenate([t.spread for t in traces])
    delays = np.concatenate([t.delays for t in traces])
    done = ~np.isnan(delays)
    return spreads[done], delays[done]


def order_coverage(traces: Iterable[SessionTrace]) -> dict[str, int]:
    """Every order is either executed or still resting at session end."""
    executed = resting = 0
    for t in traces:
        done = int(np.count_nonzero(~np.isnan(t.exec_time)))
        executed += done
        resting += len(t) - done
    return {"executed": executed, "unexecuted": resting, "total": executed + resting}


@dataclass(frozen=True)
class ThetaPath:
    """Patient share of arrivals per time bin, with the chain's expected path
    averaged over each bin.  ``se`` is clustered by session."""

    edges: np.ndarray
    fraction: np.ndarray
    se: np.ndarray
    count: np.ndarray
    expected: np.ndarray

    @property
    def empty(self) -> np.ndarray:
        return self.count == 0


def empirical_theta_path(traces: Sequence[SessionTrace], edges, theta_0: float, lam: float) -> ThetaPath:
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be strictly increasing")
    nb = len(edges) - 1
    hits = np.zeros((len(traces), nb))
    counts = np.zeros((len(traces), nb))
    for r, t in enumerate(traces):
        idx = np.searchsorted(edges, t.time, side="right") - 1
        ok = (idx >= 0) & (idx < nb)
        np.add.at(counts[r], idx[ok], 1.0)
        np.add.at(hits[r], idx[ok], t.patient[ok].astype(float))
    n = counts.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = hits.sum(axis=0) / n
        resid = hits - frac * counts
        c = len(traces)
        se = np.sqrt(c / max(c - 1, 1) * (resid**2).sum(axis=0)) / n
    if np.any(n == 0):
        log.warning("empty time bins: %s", np.flatnonzero(n == 0).tolist())
    return ThetaPath(edges, frac, se, n.astype(int), _bin_average_path(edges, theta_0, lam))


def _bin_average_path(edges: np.ndarray, theta_0: float, lam: float) -> np.ndarray:
    # exact average of 1/2 + (theta_0 - 1/2) exp(-2 lam t) over each bin
    lo, hi = edges[:-1], edges[1:]
    decay = (np.exp(-2 * lam * lo) - np.exp(-2 * lam * hi)) / (2 * lam * (hi - lo))
    return 0.5 + (theta_0 - 0.5) * decay


def volume_at_price(traces: Iterable[SessionTrace], bin_width: float, origin: float | None = None) -> Histogram:
    """Trade counts binned by execution price (one trade per market order)."""
    prices = [t.price[t.market] for t in traces]
    prices = np.concatenate(prices) if prices else np.zeros(0)
    if prices.size == 0:
        raise ValueError("no executed trades")
    return bin_prices(prices, None, bin_width, origin)


def inter_arrival_ks(traces: Iterable[SessionTrace], lam: float) -> float:
    """p-value of a Kolmogorov-Smirnov test of inter-arrival gaps against Exp(lam)."""
    gaps = np.concatenate([np.diff(t.time, prepend=0.0) for t in traces])
    return float(stats.kstest(gaps, "expon", args=(0.0, 1.0 / lam)).pvalue)


@dataclass
class OracleRow:
    spread: int
    level: int
    mean: float
    se: float
    count: int
    theory: float

    @property
    def z(self) -> float:
        return (self.mean - self.theory) / self.se if self.se > 0 else math.inf

    @property
    def passed(self) -> bool:
        return abs(self.z) <= 3.0


@dataclass
class OracleReport:
    rows: list[OracleRow] = field(default_factory=list)
    overall: OracleRow | None = None

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows) and (self.overall is None or self.overall.passed)


def waiting_time_oracle(traces: Sequence[SessionTrace], params: ModelParams, min_count: int = 30) -> OracleReport:
    """Compare simulated delays with the closed-form equilibrium values.

    A limit order posted at ``n_1 + h - 1`` ticks sits on rung ``h`` of the
    ladder; market orders are compared with ``1 / lam``.  Levels with fewer
    than ``min_count`` executions are skipped.
    """
    ladder = spread_ladder(params)
    report = OracleReport()
    for s, st in sorted(empirical_waiting_times(traces).items()):
        if st.count < min_count:
            continue
        if s == 0:
            level, theory = 0, 1.0 / params.lam
        else:
            level = s - ladder[0] + 1
            theory = equilibrium_waiting_time(level, params.theta_p, params.lam)
        report.rows.append(OracleRow(s, level, st.mean, st.se, st.count, theory))
    try:
        st = overall_limit_delay(traces)
    except ValueError:
        return report
    t_inf = asymptotic_waiting_time(params.theta_p, params.lam)
    report.overall = OracleRow(-1, -1, st.mean, st.se, st.count, t_inf)
    return report


TRACE_COLUMNS = (
    "session",
    "event_index",
    "time",
    "trader_type",
    "order_type",
    "side",
    "spread_ticks",
    "price",
    "exec_time",
)


def write_traces_csv(traces: Iterable[SessionTrace], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for t in traces:
            for i in range(len(t)):
                ex = t.exec_time[i]
                w.writerow(
                    [
                        t.session,
                        i,
                        repr(float(t.time[i])),
                        "patient" if t.patient[i] else "impatient",
                        "market" if t.market[i] else "limit",
                        "buy" if t.side[i] == BUY else "sell",
                        int(t.spread[i]),
                        repr(float(t.price[i])),
                        "" if math.isnan(ex) else repr(float(ex)),
                    ]
                )


def read_traces_csv(path: str | Path) -> list[SessionTrace]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected trace columns {reader.fieldnames}")
        rows = list(reader)
    out: list[SessionTrace] = []
    start = 0
    while start < len(rows):
        sid = rows[start]["session"]
        stop = start
        while stop < len(rows) and rows[stop]["session"] == sid:
            stop += 1
        chunk = rows[start:stop]
        out.append(
            SessionTrace(
                int(sid),
                np.array([float(r["time"]) for r in chunk]),
                np.array([r["trader_type"] == "patient" for r in chunk]),
                np.array([r["order_type"] == "market" for r in chunk]),
                np.array([BUY if r["side"] == "buy" else SELL for r in chunk]),
                np.array([int(r["spread_ticks"]) for r in chunk], dtype=np.int64),
                np.array([float(r["price"]) for r in chunk]),
                np.array([float(r["exec_time"]) if r["exec_time"] else math.nan for r in chunk]),
            )
        )
        start = stop
    return out
