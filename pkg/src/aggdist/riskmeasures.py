"""VaR and expected shortfall extracted from a compound lattice grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridTooShortError, ParameterError, TailMassError
from .grid import CompoundGrid

__all__ = ["RiskReport", "var_from_grid", "es_from_grid"]


@dataclass(frozen=True)
class RiskReport:
    alpha: float
    var: float
    es: float | None
    engine: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.var < 0:
            raise ParameterError(f"VaR cannot be negative, got {self.var}")
        if self.es is not None and self.es < self.var - 1e-12:
            raise ParameterError(f"ES {self.es} below VaR {self.var}")


def var_from_grid(grid: CompoundGrid, alpha: float) -> float:
    """Smallest lattice point with cdf >= alpha (generalised inverse)."""
    if not (0.0 < alpha < 1.0):
        raise ParameterError(f"alpha must be in (0,1), got {alpha}")
    idx = int(np.searchsorted(grid.cdf, alpha, side="left"))
    if idx >= len(grid):
        raise GridTooShortError(
            f"grid cdf tops out at {grid.total_mass:.9f} < {alpha}; extend the lattice")
    return idx * grid.step


def es_from_grid(grid: CompoundGrid, alpha: float, *,
                 threshold: float | None = None,
                 tail_mass_bound: float = 1e-6) -> float:
    """Tail-conditional mean sum(n d h_n | n d >= q) / sum(h_n | n d >= q).

    q is the grid VaR at alpha, or ``threshold`` when given (expected
    exceedance above an arbitrary level).  Requires the grid to hold all
    but ``tail_mass_bound`` of the distribution's mass.
    """
    missing = 1.0 - grid.total_mass
    if missing > tail_mass_bound:
        raise TailMassError(
            f"grid is missing {missing:.3e} of mass (allowed {tail_mass_bound:.1e}); "
            "tail mean would be biased low")
    q = threshold if threshold is not None else var_from_grid(grid, alpha)
    start = int(np.ceil(q / grid.step - 1e-12))
    dens = grid.density[start:]
    tail_mass = float(dens.sum())
    if tail_mass <= 0.0:
        raise TailMassError(f"no grid mass at or above {q}")
    lattice = np.arange(start, len(grid)) * grid.step
    return float(np.dot(lattice, dens) / tail_mass)
