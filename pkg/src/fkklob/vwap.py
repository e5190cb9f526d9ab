"""Post-processing of volume-at-price histograms: Gaussian aliasing filter,
mode counting and the square-root loss accrual."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .histogram import Histogram

log = logging.getLogger(__name__)

KERNEL_RADIUS = 8.0


@dataclass(frozen=True)
class AliasKernel:
    """Gaussian smoothing widths for ``j`` integration periods.

    ``sigma_p`` is a standard deviation in price units, applied as
    ``sigma_p * sqrt(j)``.  ``sigma_w`` is the width of the low-pass in
    angular frequency (radians per price unit), applied as
    ``sigma_w / sqrt(j)``.  ``sigma_p = 0`` and ``sigma_w = inf`` switch the
    respective stage off.
    """

    sigma_p: float
    sigma_w: float = math.inf
    j: int = 1

    def __post_init__(self) -> None:
        if not (self.sigma_p >= 0 and math.isfinite(self.sigma_p)):
            raise DomainError("sigma_p must be finite and >= 0")
        if not self.sigma_w > 0:
            raise DomainError("sigma_w must be > 0")
        if int(self.j) != self.j or self.j < 1:
            raise DomainError("j must be an integer >= 1")

    @property
    def price_std(self) -> float:
        return self.sigma_p * math.sqrt(self.j)

    @property
    def freq_width(self) -> float:
        return self.sigma_w / math.sqrt(self.j)

    def total_std(self) -> float:
        """Std of the combined smoothing: the low-pass of width ``s`` acts as
        a price-domain Gaussian of std ``1 / s``."""
        return math.hypot(self.price_std, 1.0 / self.freq_width)


def sampled_gaussian(std_bins: float, radius: int) -> np.ndarray:
    """Unit-sum Gaussian sampled on ``-radius..radius``; a delta when ``std_bins == 0``."""
    x = np.arange(-radius, radius + 1, dtype=float)
    if std_bins == 0:
        return (x == 0).astype(float)
    with np.errstate(over="ignore"):
        w = np.exp(-0.5 * (x / std_bins) ** 2)
    return w / w.sum()


def alias_filter(hist: Histogram, kernel: AliasKernel) -> Histogram:
    """Gaussian convolution in price, then a Gaussian low-pass in frequency.

    The support is widened by ``8`` combined standard deviations on each side
    so that neither stage wraps around or loses mass.
    """
    if not hist.is_uniform():
        raise ValueError("alias_filter needs uniform bins; resample first")
    width = float(hist.widths[0])
    std_bins = kernel.price_std / width
    pad = int(math.ceil(KERNEL_RADIUS * kernel.total_std() / width))
    masses = np.concatenate([np.zeros(pad), hist.masses, np.zeros(pad)])

    if std_bins > 0:
        radius = int(math.ceil(KERNEL_RADIUS * std_bins))
        masses = np.convolve(masses, sampled_gaussian(std_bins, radius), mode="same")
    if math.isfinite(kernel.sigma_w):
        masses = np.fft.irfft(np.fft.rfft(masses) * _lowpass_gain(len(masses), kernel.freq_width * width), n=len(masses))

    neg = masses < 0
    if np.any(neg):
        log.info("alias_filter clipped %d bins, mass %.3e", int(neg.sum()), float(-masses[neg].sum()))
        masses = np.where(neg, 0.0, masses)
    return Histogram.uniform(float(hist.edges[0]) - pad * width, width, masses)


def _lowpass_gain(n: int, width: float) -> np.ndarray:
    """Transfer function of a Gaussian low-pass of angular width ``width``
    (radians per bin) on an ``n``-point periodic grid.

    Taken as the DFT of the wrapped Gaussian of std ``1 / width`` bins rather
    than by sampling ``exp(-k^2 / 2 width^2)`` directly: the two agree when the
    width is resolved, and the wrapped form has a non-negative impulse
    response, so the filter cannot ring below zero.
    """
    std = 1.0 / width
    x = np.arange(n, dtype=float)
    x = np.minimum(x, n - x)
    with np.errstate(over="ignore"):
        impulse = np.exp(-0.5 * (x / std) ** 2)
    return np.fft.rfft(impulse / impulse.sum()).real


def _gaussian_smooth(values: np.ndarray, std_bins: float) -> np.ndarray:
    if std_bins <= 0:
        return values
    radius = int(math.ceil(4 * std_bins))
    # reflect at the ends so edge peaks are not pulled down
    padded = np.pad(values, radius, mode="reflect")
    return np.convolve(padded, sampled_gaussian(std_bins, radius), mode="same")[radius:-radius]


def prominences(values) -> tuple[np.ndarray, np.ndarray]:
    """Positions and prominences of local maxima.

    Plateaus count once, at their leftmost bin.  An end bin is a maximum
    when its inner neighbour is lower; its prominence is measured on the
    inner side only.  A peak with nothing higher on either side is measured
    from the global minimum, so the highest peak always has full prominence.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1:
        raise ValueError("values must be one-dimensional")
    if len(v) == 0:
        return np.zeros(0, dtype=int), np.zeros(0)
    # run-length compress plateaus
    starts = np.flatnonzero(np.r_[True, v[1:] != v[:-1]])
    r = v[starts]
    n = len(r)
    peaks = []
    for i in range(n):
        left_lower = i == 0 or r[i - 1] < r[i]
        right_lower = i == n - 1 or r[i + 1] < r[i]
        if left_lower and right_lower and n > 1:
            peaks.append(i)
    proms = []
    for i in peaks:
        bases = []
        higher = False
        if i > 0:
            lo = i - 1
            while lo > 0 and r[lo] <= r[i]:
                lo -= 1
            higher |= bool(r[lo] > r[i])
            seg = r[lo + 1 : i] if r[lo] > r[i] else r[:i]
            bases.append(seg.min())
        if i < n - 1:
            hi = i + 1
            while hi < n - 1 and r[hi] <= r[i]:
                hi += 1
            higher |= bool(r[hi] > r[i])
            seg = r[i + 1 : hi] if r[hi] > r[i] else r[i + 1 :]
            bases.append(seg.min())
        # the highest peak has no key col; measure it from the lowest point
        proms.append(r[i] - (max(bases) if higher else r.min()))
    return starts[peaks], np.array(proms)


def mode_count(hist, min_prominence: float = 0.1, smooth_bins: float = 0.0) -> int:
    """Number of local maxima with prominence above ``min_prominence * max``.

    ``hist`` may be a :class:`Histogram` or a plain array of values.  An
    optional Gaussian pre-smoothing of ``smooth_bins`` is applied first.
    """
    if not 0.0 < min_prominence < 1.0:
        raise DomainError("min_prominence must lie in (0, 1)")
    values = hist.masses if isinstance(hist, Histogram) else np.asarray(hist, dtype=float)
    values = _gaussian_smooth(values, smooth_bins)
    top = values.max() if len(values) else 0.0
    if top <= 0:
        return 0
    _, prom = prominences(values)
    return int(np.count_nonzero(prom > min_prominence * top))


def loss_estimate(std: float, n: int, bimodal: bool = False) -> tuple[float, float]:
    """Per-period loss proxy and its ``sqrt(n)`` accrual over ``n`` periods.

    The proxy is the distribution's std, or half of it for a bimodal profile
    (roughly the width of one peak).
    """
    if std < 0 or n < 1:
        raise DomainError("need std >= 0 and n >= 1")
    per_period = 0.5 * std if bimodal else float(std)
    return per_period, per_period * math.sqrt(n)
