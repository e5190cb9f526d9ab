"""Static equilibrium of a limit order book with patient and impatient traders.

Prices are measured from the session-start quotes ``a`` (ask) and ``b``
(bid) in integer multiples of the tick.  A patient trader facing a spread
above its reservation spread undercuts by one rung of the spread ladder;
at the bottom rung, and always for impatient traders, a market order is
sent.  The waiting times produced by that strategy have a closed form
that converges geometrically to ``1 / (lambda * (1 - 2 theta_p))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NonExecutableBookError

THETA_GUARD = 1e-9
ROW_SUM_TOL = 1e-12


def check_theta(theta_p: float, guard: float = THETA_GUARD) -> float:
    theta_p = float(theta_p)
    if not (0.0 <= theta_p < 0.5 - guard):
        raise DomainError(
            f"theta_p={theta_p} outside [0, 0.5): divergent waiting time"
        )
    return theta_p


def _check_rate(lam: float) -> float:
    lam = float(lam)
    if not lam > 0.0:
        raise DomainError(f"arrival rate must be positive, got {lam}")
    return lam


@dataclass(frozen=True)
class ModelParams:
    """Market primitives of one trading session.

    ``max_spread_k`` is derived from the quotes: ``(ask_a - bid_b) / tick``
    must be a positive integer.
    """

    lam: float
    theta_p: float
    delta_p: float
    delta_i: float
    tick: float
    ask_a: float
    bid_b: float
    max_spread_k: int = field(init=False)

    def __post_init__(self) -> None:
        _check_rate(self.lam)
        check_theta(self.theta_p)
        if not (self.delta_i > self.delta_p > 0.0):
            raise DomainError("waiting costs must satisfy delta_i > delta_p > 0")
        if not self.tick > 0.0:
            raise DomainError("tick must be positive")
        if not self.ask_a > self.bid_b:
            raise DomainError("ask must exceed bid")
        ratio = (self.ask_a - self.bid_b) / self.tick
        k = int(round(ratio))
        if k < 1 or abs(ratio - k) > 1e-9 * max(1.0, ratio):
            raise DomainError(
                f"ask - bid = {self.ask_a - self.bid_b} is not a positive multiple of tick {self.tick}"
            )
        object.__setattr__(self, "max_spread_k", k)


class AlphaTable:
    """Order-type probabilities per book level.

    ``rows[j - 1][k]`` is the probability that the next arrival faced by a
    limit order at level ``j`` is an order of spread ``k`` (``k = 0`` is a
    market order).  Each row must sum to one.
    """

    def __init__(self, rows: Sequence[Sequence[float]]):
        checked = []
        for j, row in enumerate(rows, start=1):
            arr = np.asarray(row, dtype=float)
            if arr.shape != (j,):
                raise DomainError(f"row for level {j} must have {j} entries, got {arr.shape}")
            if np.any(arr < 0.0) or np.any(arr > 1.0):
                raise DomainError(f"probabilities of level {j} must lie in [0, 1]")
            if abs(arr.sum() - 1.0) > ROW_SUM_TOL:
                raise DomainError(f"probabilities of level {j} sum to {arr.sum()!r}, not 1")
            arr.setflags(write=False)
            checked.append(arr)
        if not checked:
            raise DomainError("AlphaTable needs at least one level")
        self._rows = tuple(checked)

    @classmethod
    def equilibrium(cls, theta_p: float, n_levels: int) -> "AlphaTable":
        """Table of the undercutting strategy: a patient arrival (probability
        ``theta_p``) posts one level lower, everyone else executes."""
        check_theta(theta_p)
        rows = [[1.0]]
        for j in range(2, n_levels + 1):
            row = [0.0] * j
            row[0] = 1.0 - theta_p
            row[j - 1] = theta_p
            rows.append(row)
        return cls(rows)

    @property
    def n_levels(self) -> int:
        return len(self._rows)

    def row(self, j: int) -> np.ndarray:
        return self._rows[j - 1]

    def __len__(self) -> int:
        return len(self._rows)


def waiting_time_recursion(alpha: AlphaTable, lam: float) -> np.ndarray:
    """Expected execution delays ``T(1), ..., T(J)`` of a limit order per level.

    ``T(j) = (1 / alpha_0(j)) * (1 / lam + sum_{k=1}^{j-1} alpha_k(j) T(k))``
    """
    if lam < 0:
        raise DomainError(f"arrival rate must be non-negative, got {lam}")
    lam = _check_rate(lam)
    t = np.empty(alpha.n_levels)
    for j in range(1, alpha.n_levels + 1):
        row = alpha.row(j)
        if row[0] <= 0.0:
            raise NonExecutableBookError(f"level {j} has no market orders: non-executable book")
        t[j - 1] = (1.0 / lam + float(np.dot(row[1:], t[: j - 1]))) / row[0]
    return t


def equilibrium_waiting_time(h, theta_p: float, lam: float):
    """Equilibrium delay ``(1/lam) * (1 + 2 * sum_{k=1}^{h-1} r**k)`` with
    ``r = theta_p / (1 - theta_p)``, in closed form.  ``h`` may be an array."""
    theta_p = check_theta(theta_p)
    lam = _check_rate(lam)
    h_arr = np.asarray(h)
    if np.any(h_arr < 1):
        raise DomainError("level index h must be >= 1")
    r = theta_p / (1.0 - theta_p)
    if r == 0.0:
        out = np.full(h_arr.shape, 1.0 / lam)
    else:
        # 1 - r**(h-1) computed as -expm1 keeps precision when r**(h-1) ~ 1
        tail = -np.expm1((h_arr.astype(float) - 1.0) * math.log(r))
        out = (1.0 + 2.0 * r * tail / (1.0 - r)) / lam
    return float(out) if out.ndim == 0 else out


def asymptotic_rate(theta_p: float, lam: float) -> float:
    """Long-book execution rate ``lam * (1 - 2 theta_p)``, the inverse of T_inf."""
    return _check_rate(lam) * (1.0 - 2.0 * check_theta(theta_p))


def asymptotic_waiting_time(theta_p: float, lam: float) -> float:
    return 1.0 / asymptotic_rate(theta_p, lam)


def waiting_payoff(j: float, delta: float, t_wait: float, tick: float) -> float:
    """Spread revenue minus delay cost, ``j * tick - delta * t_wait``."""
    if j < 0 or delta <= 0 or t_wait < 0 or tick <= 0:
        raise DomainError("waiting_payoff needs j >= 0, delta > 0, t_wait >= 0, tick > 0")
    return j * tick - delta * t_wait


def reservation_spread(
    delta: float, params: ModelParams, t_of: Callable[[int], float]
) -> int | None:
    """Smallest spread ``j`` in ``1..K`` whose waiting payoff is non-negative.

    Returns ``None`` when no spread inside the book compensates the wait.
    """
    for j in range(1, params.max_spread_k + 1):
        t_wait = float(t_of(j))
        revenue = j * params.tick
        cost = delta * t_wait
        # relative slack absorbs rounding at exact indifference points
        if revenue - cost >= -1e-12 * max(revenue, cost):
            return j
    return None


def expected_prices(params: ModelParams, j_p: int, j_i: int) -> tuple[float, float]:
    """Expected buy and sell prices after patience-weighted adjustment.

    The sell side is anchored at the bid, mirroring the buy side at the ask.
    """
    k = params.max_spread_k
    if not (0 <= j_p <= k and 0 <= j_i <= k):
        raise DomainError(f"spreads must lie in [0, {k}]")
    shift = params.tick * (params.theta_p * j_p + (1.0 - params.theta_p) * j_i)
    return params.ask_a - shift, params.bid_b + shift


def spread_ladder(params: ModelParams) -> list[int]:
    """Spreads ``n_1 < n_2 < ... < n_q = K`` (in ticks) of the equilibrium ladder.

    ``n_1`` is the patient reservation spread when the order executes with the
    next arrival (delay ``1 / lam``); higher rungs sit one tick apart.  An
    empty list means patient traders cannot profitably post inside the book.
    """
    n1 = reservation_spread(params.delta_p, params, lambda j: 1.0 / params.lam)
    if n1 is None:
        return []
    return list(range(n1, params.max_spread_k + 1))
