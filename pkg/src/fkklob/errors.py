from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the region where the model is defined."""


class NonExecutableBookError(DomainError):
    """A level of the order book has zero market-order probability."""


class UnderResolvedError(ValueError):
    """The grid is too coarse for the requested terminal condition."""


class SolverBlowUpError(ArithmeticError):
    def __init__(self, tau: float, message: str | None = None):
        self.tau = float(tau)
        super().__init__(message or f"non-finite density produced at tau={self.tau:.6g}")


class BoundaryDominatedError(ArithmeticError):
    def __init__(self, table: list[tuple[float, float]]):
        # (omega_lo, mass) pairs showing how mass depends on the cut-off
        self.table = table
        rows = ", ".join(f"{w:.4g}:{m:.4g}" for w, m in table)
        super().__init__(f"boundary-dominated stationary density (omega_lo:mass {rows})")


class InterpolationError(ValueError):
    """A requested time lies outside the stored surface."""


class ConfigError(ValueError):
    """Invalid or unknown run-configuration entries."""
