"""Finite-difference solvers for the density of the patient-trader fraction.

The state ``omega`` lives on ``[0, 1/2]``.  Two evolutions are provided:

* ``solve_backward`` marches the non-conservative equation

      d pi / d tau = -a(omega) d pi / d omega + D(omega) d2 pi / d omega2

  in reversed time ``tau = T - t`` from a bimodal terminal density, with
  ``pi(0) = 0`` and a zero-current condition at ``omega = 1/2``.  The
  equation does not conserve mass, so each stored slice is renormalized and
  the factor is kept.

* ``solve_forward`` marches the Fokker-Planck equation in flux form,

      d P / d tau = -d J / d omega,   J = a P - d(D P) / d omega,

  with ``P(0) = 0`` and ``J(1/2) = 0``.  Face fluxes use exponential fitting
  (Scharfetter-Gummel) with the cell-averaged ratio ``a / D`` so the scheme
  is exactly conservative and reproduces the zero-current density.

Both use Crank-Nicolson in time.  Each stored step is split into substeps
short enough for the explicit half to keep non-negative coefficients, so
the march cannot create negative densities.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.special import exprel

from .errors import (
    BoundaryDominatedError,
    DomainError,
    InterpolationError,
    SolverBlowUpError,
    UnderResolvedError,
)

log = logging.getLogger(__name__)

OMEGA_MAX = 0.5
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class FilterParams:
    lam: float
    sigma: float
    mu: float = 0.0
    horizon_t: float = 10.0

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise DomainError("lam must be positive")
        if not self.sigma >= 0:
            raise DomainError("sigma must be non-negative")
        if not self.horizon_t > 0:
            raise DomainError("horizon_t must be positive")


@dataclass(frozen=True)
class OmegaGrid:
    n_nodes: int

    def __post_init__(self) -> None:
        if self.n_nodes < 16:
            raise DomainError("OmegaGrid needs at least 16 nodes")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, OMEGA_MAX, self.n_nodes)

    @property
    def h(self) -> float:
        return OMEGA_MAX / (self.n_nodes - 1)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.n_nodes, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def mass(self, values: np.ndarray) -> np.ndarray | float:
        """Trapezoid mass over the last axis."""
        return values @ self.weights


@dataclass(frozen=True)
class TerminalCondition:
    """Two narrow Gaussians standing in for point masses at ``theta_1`` and
    ``theta_2``.  ``eps=None`` means four grid cells."""

    weight_a: float
    weight_b: float
    theta_1: float
    theta_2: float
    eps: float | None = None

    def __post_init__(self) -> None:
        if self.weight_a < 0 or self.weight_b < 0 or abs(self.weight_a + self.weight_b - 1.0) > 1e-12:
            raise DomainError("mixture weights must be non-negative and sum to 1")
        if not (0.0 < self.theta_1 < self.theta_2 < OMEGA_MAX):
            raise DomainError("need 0 < theta_1 < theta_2 < 0.5")
        if self.eps is not None:
            self._check_eps(self.eps)

    def _check_eps(self, eps: float) -> None:
        if not (0.0 < eps < 0.5 * (self.theta_2 - self.theta_1)):
            raise DomainError("eps must be positive and below half the mode separation")

    def width(self, grid: OmegaGrid) -> float:
        eps = 4.0 * grid.h if self.eps is None else self.eps
        self._check_eps(eps)
        return eps


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DensitySurface:
    """Density values on an omega x tau grid.

    ``values[k, i]`` is the density at ``tau[k]``, ``grid.nodes[i]``.  The
    per-step diagnostics have one entry per stored step after the first.
    """

    grid: OmegaGrid
    tau: np.ndarray
    values: np.ndarray
    renorm_factors: np.ndarray = field(default=None)
    clip_mass: np.ndarray = field(default=None)
    min_before_clip: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        n = len(self.tau) - 1
        for name in ("renorm_factors", "clip_mass", "min_before_clip"):
            val = getattr(self, name)
            default = 1.0 if name == "renorm_factors" else 0.0
            object.__setattr__(self, name, _frozen(np.full(n, default) if val is None else val))
        object.__setattr__(self, "tau", _frozen(self.tau))
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.shape != (len(self.tau), self.grid.n_nodes):
            raise ValueError("values shape does not match tau x grid")

    @property
    def masses(self) -> np.ndarray:
        return self.grid.mass(self.values)

    def mean_omega(self) -> np.ndarray:
        """First moment of every slice (not normalized by the slice mass)."""
        return self.grid.mass(self.values * self.grid.nodes)

    def slice_at(self, tau: float) -> np.ndarray:
        """Slice at ``tau``, linear in tau between stored steps."""
        t0, t1 = self.tau[0], self.tau[-1]
        span = max(abs(t1), 1.0) * 1e-12
        if not (t0 - span <= tau <= t1 + span):
            raise InterpolationError(f"tau={tau} outside surface coverage [{t0}, {t1}]")
        k = int(np.searchsorted(self.tau, tau, side="right")) - 1
        k = min(max(k, 0), len(self.tau) - 2)
        frac = (tau - self.tau[k]) / (self.tau[k + 1] - self.tau[k])
        frac = min(max(frac, 0.0), 1.0)
        return (1.0 - frac) * self.values[k] + frac * self.values[k + 1]

    def to_csv(self, path: str | Path) -> None:
        """Write ``omega,tau,density`` rows, omega-major."""
        nodes = self.grid.nodes
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["omega", "tau", "density"])
            for i, om in enumerate(nodes):
                for k, tau in enumerate(self.tau):
                    w.writerow([repr(float(om)), repr(float(tau)), repr(float(self.values[k, i]))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "DensitySurface":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: no data rows")
        omegas = np.array([float(r["omega"]) for r in rows])
        taus = np.array([float(r["tau"]) for r in rows])
        dens = np.array([float(r["density"]) for r in rows])
        tau = np.unique(taus)
        n_nodes = len(np.unique(omegas))
        grid = OmegaGrid(n_nodes)
        values = dens.reshape(n_nodes, len(tau)).T
        return cls(grid=grid, tau=tau, values=values)


def drift(omega, params: FilterParams):
    """``lam (1 - 2 omega) - mu omega (1 - omega)``."""
    omega = np.asarray(omega, dtype=float)
    return params.lam * (1.0 - 2.0 * omega) - params.mu * omega * (1.0 - omega)


def diffusion(omega, params: FilterParams):
    """``(lam sigma)^2 / 2 * omega^2 (1 - omega)^2``."""
    omega = np.asarray(omega, dtype=float)
    return 0.5 * (params.lam * params.sigma) ** 2 * (omega * (1.0 - omega)) ** 2


def markov_mean_path(theta_0, lam: float, t):
    """Solution ``1/2 + (theta_0 - 1/2) exp(-2 lam t)`` of the two-state mean equation."""
    theta_0 = np.asarray(theta_0, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(theta_0 < 0) or np.any(theta_0 > 1) or np.any(t < 0):
        raise DomainError("need 0 <= theta_0 <= 1 and t >= 0")
    out = 0.5 + (theta_0 - 0.5) * np.exp(-2.0 * lam * t)
    return float(out) if out.ndim == 0 else out


def terminal_density(grid: OmegaGrid, tc: TerminalCondition) -> np.ndarray:
    nodes = grid.nodes
    eps = tc.width(grid)
    for theta, weight in ((tc.theta_1, tc.weight_a), (tc.theta_2, tc.weight_b)):
        if weight == 0.0:
            continue
        inside = np.count_nonzero(np.abs(nodes - theta) <= 3.0 * eps)
        if inside < 3:
            raise UnderResolvedError(
                f"under-resolved terminal condition: {inside} nodes within 3*eps of {theta}"
            )

    def gauss(mu: float) -> np.ndarray:
        return np.exp(-0.5 * ((nodes - mu) / eps) ** 2) / (eps * math.sqrt(2.0 * math.pi))

    values = tc.weight_a * gauss(tc.theta_1) + tc.weight_b * gauss(tc.theta_2)
    return values / grid.mass(values)


def probability_current(density: np.ndarray, grid: OmegaGrid, params: FilterParams) -> np.ndarray:
    """Current ``-a P + d(D P)/d omega`` with second-order differences
    (centered inside, one-sided at the two ends)."""
    nodes = grid.nodes
    p = np.asarray(density, dtype=float)
    dp = np.gradient(diffusion(nodes, params) * p, grid.h, edge_order=2)
    return -drift(nodes, params) * p + dp


# --- discretization helpers -------------------------------------------------


def _log_ratio(omega, params: FilterParams):
    """``a / D``: the log-derivative of ``D P`` for a zero-current density."""
    return drift(omega, params) / diffusion(omega, params)


def _cell_increments(grid: OmegaGrid, params: FilterParams) -> np.ndarray:
    """Integral of ``a / D`` over every cell; the first cell diverges."""
    nodes = grid.nodes
    lo, hi = nodes[:-1], nodes[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[:, None] + half[:, None] * _GL_X[None, :]
    out = (_log_ratio(pts, params) @ _GL_W) * half
    out[0] = np.inf
    return out


def _bernoulli(z: np.ndarray) -> np.ndarray:
    # z / (exp(z) - 1), with B(0) = 1 and B(+inf) = 0
    with np.errstate(over="ignore", divide="ignore"):
        return 1.0 / exprel(z)


def _forward_operator(grid: OmegaGrid, params: FilterParams) -> sp.csc_matrix:
    """Matrix ``M`` with ``W dP/dtau = M P``; columns sum to zero."""
    n = grid.n_nodes
    h = grid.h
    nodes = grid.nodes
    if params.sigma > 0:
        z = _cell_increments(grid, params)
        d = diffusion(nodes, params)
        with np.errstate(invalid="ignore"):
            c_left = d[:-1] * _bernoulli(-z) / h
            c_right = d[1:] * _bernoulli(z) / h
    else:
        a_face = drift(0.5 * (nodes[:-1] + nodes[1:]), params)
        c_left = np.maximum(a_face, 0.0)
        c_right = np.maximum(-a_face, 0.0)
    # node 0 is pinned to zero, so nothing crosses the first face
    c_left[0] = 0.0
    c_right[0] = 0.0

    main = np.zeros(n)
    main[:-1] -= c_left
    main[1:] -= c_right
    upper = c_right.copy()  # M[i, i+1]
    lower = c_left.copy()  # M[i+1, i]
    main[0] = 0.0
    upper[0] = 0.0
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csc")


def _fitted_diffusion(a: np.ndarray, d: np.ndarray, h: float) -> np.ndarray:
    """Il'in-Allen-Southwell coefficient ``(a h / 2) coth(a h / 2D)``.

    Equals ``D + O(h^2)`` where diffusion dominates and ``|a| h / 2`` where it
    vanishes, which keeps the difference stencil monotone."""
    half = 0.5 * np.abs(a) * h
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(d > 0, half / np.where(d > 0, d, 1.0), np.inf)
        fitted = half / np.tanh(x)
    return np.where(half > 0, fitted, d)


def upper_robin_slope(params: FilterParams) -> float:
    """``P'(1/2) / P(1/2)`` for zero current at the upper end; 0 when mu = 0."""
    d_half = diffusion(OMEGA_MAX, params)
    if d_half == 0.0:
        return 0.0
    return -params.mu * OMEGA_MAX * (1.0 - OMEGA_MAX) / d_half


def _backward_operator(grid: OmegaGrid, params: FilterParams) -> sp.csc_matrix:
    """Matrix ``L`` with ``d pi / d tau = L pi``."""
    n = grid.n_nodes
    h = grid.h
    nodes = grid.nodes
    a = drift(nodes, params)
    d_fit = _fitted_diffusion(a, diffusion(nodes, params), h)

    lower = np.zeros(n - 1)  # L[i, i-1]
    main = np.zeros(n)
    upper = np.zeros(n - 1)  # L[i, i+1]
    i = np.arange(1, n - 1)
    lower[i - 1] = d_fit[i] / h**2 + a[i] / (2 * h)
    main[i] = -2.0 * d_fit[i] / h**2
    upper[i] = d_fit[i] / h**2 - a[i] / (2 * h)
    # ghost node beyond 1/2 carries the zero-current slope g
    g = upper_robin_slope(params)
    last = n - 1
    lower[last - 1] = 2.0 * d_fit[last] / h**2
    main[last] = -2.0 * d_fit[last] / h**2 + 2.0 * d_fit[last] * g / h - a[last] * g
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csc")


@dataclass
class _CrankNicolson:
    """``W x' = M x`` marched with Crank-Nicolson substeps."""

    lhs_weights: np.ndarray
    operator: sp.csc_matrix
    dt_out: float
    max_substep: float | None = None

    def __post_init__(self) -> None:
        diag = -self.operator.diagonal()
        with np.errstate(divide="ignore"):
            limits = np.where(diag > 0, 2.0 * self.lhs_weights / np.where(diag > 0, diag, 1.0), np.inf)
        dt_pos = float(limits.min())
        if self.max_substep is not None:
            dt_pos = min(dt_pos, self.max_substep)
        self.n_sub = max(1, math.ceil(self.dt_out / dt_pos * (1.0 - 1e-12)))
        dt = self.dt_out / self.n_sub
        w = sp.diags(self.lhs_weights, format="csc")
        self.explicit = (w + 0.5 * dt * self.operator).tocsr()
        self._lu = splu((w - 0.5 * dt * self.operator).tocsc())

    def step(self, x: np.ndarray) -> np.ndarray:
        for _ in range(self.n_sub):
            x = self._lu.solve(self.explicit @ x)
        return x


def _march(x0, stepper, grid, n_steps, dt, renormalize, pin_zero):
    n = grid.n_nodes
    values = np.empty((n_steps + 1, n))
    values[0] = x0
    factors = np.ones(n_steps)
    clipped = np.zeros(n_steps)
    minima = np.zeros(n_steps)
    x = x0.copy()
    for k in range(n_steps):
        x = stepper.step(x)
        if pin_zero:
            x[0] = 0.0
        tau = (k + 1) * dt
        if not np.all(np.isfinite(x)):
            raise SolverBlowUpError(tau)
        minima[k] = x.min()
        neg = x < 0.0
        if neg.any():
            clipped[k] = -grid.mass(np.where(neg, x, 0.0))
            x[neg] = 0.0
            log.debug("tau=%.4g: clipped mass %.3e", tau, clipped[k])
        if renormalize:
            m = grid.mass(x)
            if not (m > 0 and np.isfinite(m)):
                raise SolverBlowUpError(tau, f"density mass collapsed to {m} at tau={tau:.6g}")
            factors[k] = 1.0 / m
            x *= factors[k]
        values[k + 1] = x
    return values, factors, clipped, minima


def solve_backward(
    params: FilterParams,
    grid: OmegaGrid,
    tc: TerminalCondition,
    n_tau_steps: int,
    *,
    max_substep: float | None = None,
) -> DensitySurface:
    """Evolve the terminal density over ``tau`` in ``[0, horizon_t]``.

    Slice ``k`` is stored at ``tau = k * horizon_t / n_tau_steps``.  Every
    stored slice is renormalized to unit trapezoid mass.
    """
    if n_tau_steps < 1:
        raise DomainError("n_tau_steps must be >= 1")
    dt = params.horizon_t / n_tau_steps
    x0 = terminal_density(grid, tc)
    stepper = _CrankNicolson(np.ones(grid.n_nodes), _backward_operator(grid, params), dt, max_substep)
    values, factors, clipped, minima = _march(
        x0, stepper, grid, n_tau_steps, dt, renormalize=True, pin_zero=True
    )
    tau = np.linspace(0.0, params.horizon_t, n_tau_steps + 1)
    return DensitySurface(grid, tau, values, factors, clipped, minima)


def solve_forward(
    params: FilterParams,
    grid: OmegaGrid,
    init: np.ndarray,
    n_tau_steps: int,
    *,
    max_substep: float | None = None,
) -> DensitySurface:
    """Evolve ``init`` with the conservative Fokker-Planck scheme.

    ``init[0]`` is set to zero (``P(0) = 0``); the mass is not renormalized.
    """
    if n_tau_steps < 1:
        raise DomainError("n_tau_steps must be >= 1")
    x0 = np.array(init, dtype=float)
    if x0.shape != (grid.n_nodes,) or np.any(x0 < 0) or not np.all(np.isfinite(x0)):
        raise DomainError("init must be a finite non-negative vector on the grid")
    x0[0] = 0.0
    dt = params.horizon_t / n_tau_steps
    stepper = _CrankNicolson(grid.weights, _forward_operator(grid, params), dt, max_substep)
    values, factors, clipped, minima = _march(
        x0, stepper, grid, n_tau_steps, dt, renormalize=False, pin_zero=True
    )
    tau = np.linspace(0.0, params.horizon_t, n_tau_steps + 1)
    return DensitySurface(grid, tau, values, factors, clipped, minima)


# --- stationary densities ---------------------------------------------------


def stationary_numeric(params: FilterParams, grid: OmegaGrid) -> np.ndarray:
    """Zero-current density on the grid.

    ``Q = D P`` solves ``Q' = (a / D) Q``; ``log Q`` is accumulated cell by
    cell with Gauss-Legendre quadrature starting from the first interior
    node.  The value at ``omega = 0`` is zero.
    """
    if not params.sigma > 0:
        raise DomainError("stationary density needs sigma > 0")
    nodes = grid.nodes
    incr = _cell_increments(grid, params)
    log_q = np.full(grid.n_nodes, -np.inf)
    log_q[1:] = np.concatenate(([0.0], np.cumsum(incr[1:])))
    log_p = log_q.copy()
    log_p[1:] -= np.log(diffusion(nodes[1:], params))
    p = np.exp(log_p - log_p[1:].max())
    p[0] = 0.0

    w = grid.weights
    tail = np.cumsum((p * w)[::-1])[::-1]
    total = tail[1]
    table = [(float(nodes[i]), float(tail[i] / total)) for i in range(1, min(6, grid.n_nodes))]
    # mass piling up against the lower cut-off means the density is not normalizable
    if (tail[1] - tail[3]) > 0.5 * total:
        raise BoundaryDominatedError(table)
    return p / grid.mass(p)


def stationary_printed(omega, params: FilterParams):
    """Unnormalized stationary form as printed in the source model:
    ``(w / (1 - w))**alpha * exp(-(1 / (lam sigma^2)) (1/w + 1/(1-w)))``
    with ``alpha = 2 mu / (lam sigma^2)``."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0) or np.any(omega >= 1):
        raise DomainError("stationary_printed is defined for 0 < omega < 1")
    if not params.sigma > 0:
        raise DomainError("stationary_printed needs sigma > 0")
    ls2 = params.lam * params.sigma**2
    alpha = 2.0 * params.mu / ls2
    out = (omega / (1.0 - omega)) ** alpha * np.exp(-(1.0 / omega + 1.0 / (1.0 - omega)) / ls2)
    return float(out) if out.ndim == 0 else out


def stationary_exact(omega, params: FilterParams):
    """Unnormalized closed-form zero-current density

    ``(w/(1-w))**(-2 mu / (lam sigma)^2) exp(-(2 / (lam sigma^2)) (1/w + 1/(1-w))) / (w (1-w))**2``.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0) or np.any(omega >= 1):
        raise DomainError("stationary_exact is defined for 0 < omega < 1")
    ls2 = params.lam * params.sigma**2
    beta = -2.0 * params.mu / (params.lam * params.sigma) ** 2
    log_p = (
        beta * np.log(omega / (1.0 - omega))
        - 2.0 * (1.0 / omega + 1.0 / (1.0 - omega)) / ls2
        - 2.0 * np.log(omega * (1.0 - omega))
    )
    out = np.exp(log_p)
    return float(out) if out.ndim == 0 else out


def _normalized_on_grid(fn, params: FilterParams, grid: OmegaGrid) -> np.ndarray:
    nodes = grid.nodes
    vals = np.zeros(grid.n_nodes)
    vals[1:] = fn(nodes[1:], params)
    return vals / grid.mass(vals)


def stationary_report(params: FilterParams, grid: OmegaGrid) -> dict:
    """Compare the numeric zero-current density with the printed closed form.

    Currents are reported relative to the density maximum; the printed form
    is not expected to have zero current.
    """
    numeric = stationary_numeric(params, grid)
    printed = _normalized_on_grid(stationary_printed, params, grid)
    exact = _normalized_on_grid(stationary_exact, params, grid)
    interior = slice(1, grid.n_nodes - 1)

    def rel_current(p: np.ndarray) -> float:
        j = probability_current(p, grid, params)
        return float(np.max(np.abs(j[interior])) / np.max(p))

    ls2 = params.lam * params.sigma**2
    return {
        "lam": params.lam,
        "sigma": params.sigma,
        "mu": params.mu,
        "n_nodes": grid.n_nodes,
        "numeric_max_rel_current": rel_current(numeric),
        "printed_max_rel_current": rel_current(printed),
        "numeric_vs_closed_form_max_rel_diff": float(
            np.max(np.abs(numeric - exact)) / np.max(exact)
        ),
        "printed_vs_numeric_l1": float(grid.mass(np.abs(printed - numeric))),
        "printed_vs_numeric_max_abs": float(np.max(np.abs(printed - numeric))),
        "numeric_mode": float(grid.nodes[np.argmax(numeric)]),
        "printed_mode": float(grid.nodes[np.argmax(printed)]),
        "printed_exponent_coeff": 1.0 / ls2,
        "zero_current_exponent_coeff": 2.0 / ls2,
        "printed_power": 2.0 * params.mu / ls2,
        "zero_current_power": -2.0 * params.mu / (params.lam * params.sigma) ** 2,
        "boundary_relation_printed_coeff": ls2 / 8.0,
        "boundary_relation_direct_coeff": ls2 / 32.0,
    }


# --- diagnostics ------------------------------------------------------------


def local_maxima(values: np.ndarray, grid: OmegaGrid, min_rel: float = 0.1) -> np.ndarray:
    """Locations of maxima at least ``min_rel`` of the slice max.

    Interior maxima are refined by the vertex of the parabola through the
    three surrounding nodes; edge maxima stay on the edge node.
    """
    v = np.asarray(values, dtype=float)
    top = v.max()
    if top <= 0:
        return np.empty(0)
    padded = np.concatenate(([-np.inf], v, [-np.inf]))
    is_max = (padded[1:-1] > padded[:-2]) & (padded[1:-1] >= padded[2:]) & (v >= min_rel * top)
    nodes = grid.nodes
    out = []
    for i in np.flatnonzero(is_max):
        if 0 < i < len(v) - 1:
            curv = v[i - 1] - 2.0 * v[i] + v[i + 1]
            shift = 0.5 * (v[i - 1] - v[i + 1]) / curv if curv < 0 else 0.0
            out.append(nodes[i] + shift * grid.h)
        else:
            out.append(nodes[i])
    return np.array(out)


def characteristic_report(surface: DensitySurface, params: FilterParams, starts) -> list[dict]:
    """Per stored tau, distance between each predicted characteristic foot
    ``1/2 + (w0 - 1/2) exp(-2 lam tau)`` and the nearest local maximum."""
    rows = []
    for tau, slc in zip(surface.tau, surface.values):
        found = local_maxima(slc, surface.grid)
        for w0 in starts:
            pred = markov_mean_path(w0, params.lam, tau)
            err = float(np.min(np.abs(found - pred))) if found.size else math.inf
            rows.append({"tau": float(tau), "start": float(w0), "predicted": pred, "error": err})
    return rows
