"""Map the patient-fraction density onto a distribution of price adjustments.

The ``i``-th quote update moves the price by ``i`` ticks away from the
session-start quote.  Update counts up to real time ``t`` are Poisson with
rate ``lam (1 - 2 theta)`` for patient flow and ``lam`` for impatient flow;
the patient share at the ``i``-th update is the mean of the density slice at
``tau_i = i / lam``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import gammaln
from scipy.stats import poisson

from .errors import DomainError, InterpolationError
from .fkk import check_theta
from .histogram import Histogram
from .pde import DensitySurface

TAIL_TOL = 1e-10


def poisson_pmf(i, rate: float, t: float):
    """``exp(-rate t) (rate t)^i / i!`` evaluated in log space."""
    if not (rate > 0 and t > 0):
        raise DomainError("poisson_pmf needs rate > 0 and t > 0")
    i = np.asarray(i)
    if np.any(i < 0):
        raise DomainError("count must be non-negative")
    m = rate * t
    out = np.exp(-m + i * math.log(m) - gammaln(i + 1.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PriorSpec:
    patient_rate: float
    impatient_rate: float
    i_max: int

    def __post_init__(self) -> None:
        if not (self.patient_rate > 0 and self.impatient_rate > 0):
            raise DomainError("prior rates must be positive")
        if self.i_max < 0:
            raise DomainError("i_max must be non-negative")

    @classmethod
    def for_time(cls, lam: float, theta: float, t: float, tol: float = TAIL_TOL) -> "PriorSpec":
        """Rates ``lam (1 - 2 theta)`` and ``lam`` with the smallest ``i_max``
        leaving less than ``tol`` Poisson mass beyond it at time ``t``."""
        theta = check_theta(theta)
        patient = lam * (1.0 - 2.0 * theta)
        if not (patient > 0 and t > 0):
            raise DomainError("need lam > 0 and t > 0")
        i_max = 0
        for rate in (patient, lam):
            m = rate * t
            i = int(poisson.ppf(1.0 - tol, m))
            while poisson.sf(i, m) >= tol:
                i += 1
            i_max = max(i_max, i)
        return cls(patient, lam, i_max)

    def tail_mass(self, t: float) -> float:
        return max(poisson.sf(self.i_max, r * t) for r in (self.patient_rate, self.impatient_rate))


@dataclass(frozen=True)
class PriceDensity:
    """Density of the price adjustment over a tick grid.

    ``density`` is per tick and has unit trapezoid mass.  ``dollars`` is
    filled in by :func:`rescale_to_dollars`.
    """

    ticks: np.ndarray
    density: np.ndarray
    t: float
    dollars: np.ndarray | None = None
    truncated_mass: float = 0.0
    clamped_mass: float = 0.0
    raw_mass: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        ticks = np.array(self.ticks, dtype=float)
        dens = np.array(self.density, dtype=float)
        if ticks.shape != dens.shape or ticks.ndim != 1 or len(ticks) < 2:
            raise ValueError("ticks and density must be equal-length 1-d arrays")
        if np.any(dens < 0):
            raise ValueError("density must be non-negative")
        for a in (ticks, dens):
            a.setflags(write=False)
        object.__setattr__(self, "ticks", ticks)
        object.__setattr__(self, "density", dens)
        if self.dollars is not None:
            d = np.array(self.dollars, dtype=float)
            d.setflags(write=False)
            object.__setattr__(self, "dollars", d)

    @property
    def mass(self) -> float:
        return float(trapezoid(self.density, self.ticks))

    def to_csv(self, path: str | Path) -> None:
        dollars = self.dollars if self.dollars is not None else np.full_like(self.ticks, np.nan)
        with open(path, "w", newline="") as fh:
            for key, val in self.meta.items():
                fh.write(f"# {key}={val!r}\n")
            fh.write(f"# t={self.t!r}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["price_ticks", "price_dollars", "density"])
            for i, d, p in zip(self.ticks, dollars, self.density):
                w.writerow([repr(float(i)), repr(float(d)), repr(float(p))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "PriceDensity":
        meta: dict = {}
        body = []
        with open(path, newline="") as fh:
            for line in fh:
                if line.startswith("#"):
                    key, _, val = line[1:].strip().partition("=")
                    meta[key.strip()] = float(val)
                else:
                    body.append(line)
        rows = list(csv.DictReader(body))
        ticks = np.array([float(r["price_ticks"]) for r in rows])
        dollars = np.array([float(r["price_dollars"]) for r in rows])
        dens = np.array([float(r["density"]) for r in rows])
        t = meta.pop("t")
        return cls(ticks, dens, t, None if np.all(np.isnan(dollars)) else dollars, meta=meta)


def price_distribution(
    surface: DensitySurface,
    prior: PriorSpec,
    t: float,
    max_spread_k: int,
    *,
    renormalize: bool = True,
    meta: dict | None = None,
) -> PriceDensity:
    """Poisson-weighted mixture of patient and impatient adjustment counts.

    ``P(i) = m1(tau_i) Pois(i; patient_rate t) + (m0(tau_i) - m1(tau_i)) Pois(i; lam t)``

    with ``m0``, ``m1`` the zeroth and first omega-moments of the slice at
    ``tau_i = min(i / lam, horizon)``.  Counts above ``max_spread_k`` are cut
    off and their mass reported as ``clamped_mass``; the Poisson tail above
    ``prior.i_max`` is reported as ``truncated_mass``.  ``raw_mass`` is the
    discrete sum before renormalization; it equals one minus the truncated
    and clamped mass only when the slice mean does not vary with ``tau``,
    since otherwise the mixture weights themselves do not sum to one.  The buy side (measured
    down from the ask) and the sell side (up from the bid) share this
    density.
    """
    horizon = float(surface.tau[-1])
    if not (0.0 < t <= horizon + 1e-12 * max(1.0, horizon)):
        raise InterpolationError(f"t={t} outside surface coverage (0, {horizon}]")
    if max_spread_k < 1:
        raise DomainError("max_spread_k must be >= 1")
    lam = prior.impatient_rate
    i = np.arange(prior.i_max + 1)
    m0, m1 = _slice_moments(surface, np.minimum(i / lam, horizon))
    raw_all = m1 * poisson_pmf(i, prior.patient_rate, t) + (m0 - m1) * poisson_pmf(i, lam, t)

    n_kept = min(prior.i_max, max_spread_k) + 1
    clamped = float(raw_all[n_kept:].sum())
    # Poisson tail beyond i_max, weighted by the slice the next count would use
    t0, t1 = _slice_moments(surface, np.array([min((prior.i_max + 1) / lam, horizon)]))
    truncated = float(
        t1[0] * poisson.sf(prior.i_max, prior.patient_rate * t) + (t0[0] - t1[0]) * poisson.sf(prior.i_max, lam * t)
    )

    density = np.zeros(max_spread_k + 1)
    density[:n_kept] = raw_all[:n_kept]
    ticks = np.arange(max_spread_k + 1, dtype=float)
    raw_mass = float(density.sum())
    if renormalize:
        density = density / trapezoid(density, ticks)
    return PriceDensity(
        ticks,
        density,
        float(t),
        truncated_mass=truncated,
        clamped_mass=clamped,
        raw_mass=raw_mass,
        meta=dict(meta or {}),
    )


def _slice_moments(surface: DensitySurface, taus: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    nodes = surface.grid.nodes
    m0 = np.empty(len(taus))
    m1 = np.empty(len(taus))
    for k, tau in enumerate(taus):
        slc = surface.slice_at(float(tau))
        m0[k] = surface.grid.mass(slc)
        m1[k] = surface.grid.mass(slc * nodes)
    return m0, m1


def moments(density: PriceDensity | Histogram, *, in_dollars: bool = False) -> tuple[float, float]:
    """Mean and standard deviation.

    A :class:`PriceDensity` is integrated with the trapezoid rule (over ticks,
    or over ``dollars`` when ``in_dollars``); a :class:`Histogram` is weighted
    by bin mass at the bin centres.
    """
    if isinstance(density, Histogram):
        w = density.masses
        x = density.centers
        total = w.sum()
        if total <= 0:
            raise ValueError("empty histogram")
        mean = float(np.dot(w, x) / total)
        var = float(np.dot(w, (x - mean) ** 2) / total)
        return mean, math.sqrt(max(var, 0.0))
    if in_dollars:
        if density.dollars is None:
            raise ValueError("density has no dollar axis; call rescale_to_dollars first")
        order = np.argsort(density.dollars)
        x = density.dollars[order]
        spacing = abs(density.dollars[1] - density.dollars[0]) / abs(density.ticks[1] - density.ticks[0])
        f = density.density[order] / spacing
    else:
        x, f = density.ticks, density.density
    total = trapezoid(f, x)
    if not total > 0:
        raise ValueError("empty density")
    mean = float(trapezoid(f * x, x) / total)
    var = float(trapezoid(f * (x - mean) ** 2, x) / total)
    return mean, math.sqrt(max(var, 0.0))


def rescale_to_dollars(density: PriceDensity, anchor: float, tick: float, side: str = "sell") -> PriceDensity:
    """Attach dollar prices ``anchor + tick * i`` (``side="sell"``, measured
    up from the bid) or ``anchor - tick * i`` (``side="buy"``, down from the
    ask).  The per-tick density and its mass are unchanged."""
    if not tick > 0:
        raise DomainError("tick must be positive")
    if side not in ("buy", "sell"):
        raise DomainError("side must be 'buy' or 'sell'")
    sign = -1.0 if side == "buy" else 1.0
    dollars = anchor + sign * tick * density.ticks
    meta = dict(density.meta, anchor=anchor, tick=tick)
    return PriceDensity(
        density.ticks,
        density.density,
        density.t,
        dollars,
        density.truncated_mass,
        density.clamped_mass,
        density.raw_mass,
        meta,
    )
