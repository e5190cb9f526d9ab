from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Histogram:
    """Binned mass over price: ``masses[i]`` covers ``[edges[i], edges[i+1])``."""

    edges: np.ndarray
    masses: np.ndarray

    def __post_init__(self) -> None:
        edges = np.array(self.edges, dtype=float)
        masses = np.array(self.masses, dtype=float)
        if edges.ndim != 1 or len(edges) != len(masses) + 1:
            raise ValueError("need len(edges) == len(masses) + 1")
        if len(masses) == 0:
            raise ValueError("histogram must have at least one bin")
        if np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        if np.any(masses < 0) or not np.all(np.isfinite(masses)):
            raise ValueError("masses must be finite and non-negative")
        edges.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "masses", masses)

    @classmethod
    def uniform(cls, start: float, width: float, masses) -> "Histogram":
        masses = np.asarray(masses, dtype=float)
        return cls(start + width * np.arange(len(masses) + 1), masses)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def is_uniform(self, rtol: float = 1e-9) -> bool:
        w = self.widths
        return bool(np.all(np.abs(w - w[0]) <= rtol * w[0]))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_lo", "bin_hi", "mass"])
            for lo, hi, m in zip(self.edges[:-1], self.edges[1:], self.masses):
                w.writerow([repr(float(lo)), repr(float(hi)), repr(float(m))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "Histogram":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: empty histogram")
        lo = [float(r["bin_lo"]) for r in rows]
        hi = [float(r["bin_hi"]) for r in rows]
        if any(abs(a - b) > 1e-12 * max(1.0, abs(a)) for a, b in zip(hi[:-1], lo[1:])):
            raise ValueError(f"{path}: bins are not contiguous")
        return cls(np.array(lo + [hi[-1]]), np.array([float(r["mass"]) for r in rows]))


def bin_prices(prices, weights, bin_width: float, origin: float | None = None) -> Histogram:
    """Histogram of ``prices`` on a uniform grid of ``bin_width``.

    Bins are centred on multiples of ``bin_width`` offset from ``origin``
    (default: the smallest price), so prices sitting on tick multiples land
    in the middle of a bin.
    """
    if not bin_width > 0:
        raise ValueError("bin width must be positive")
    prices = np.asarray(prices, dtype=float)
    weights = np.ones_like(prices) if weights is None else np.asarray(weights, dtype=float)
    if prices.size == 0:
        raise ValueError("no prices to bin")
    origin = float(prices.min()) if origin is None else origin
    idx = np.floor((prices - origin) / bin_width + 0.5 + 1e-9).astype(int)
    lo_idx = int(idx.min())
    idx -= lo_idx
    masses = np.bincount(idx, weights=weights, minlength=int(idx.max()) + 1)
    start = origin + (lo_idx - 0.5) * bin_width
    return Histogram.uniform(start, bin_width, masses)


def histogram_from_trades_csv(path: str | Path, bin_width: float) -> Histogram:
    """Volume-at-price histogram from a CSV with ``price`` and ``volume`` columns."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "price" not in rows[0] or "volume" not in rows[0]:
        raise ValueError(f"{path}: expected columns price, volume")
    prices = [float(r["price"]) for r in rows]
    volumes = [float(r["volume"]) for r in rows]
    return bin_prices(prices, volumes, bin_width)
