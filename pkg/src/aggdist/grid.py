"""Compound-distribution lattice grids produced by the engines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

__all__ = ["CompoundGrid"]


@dataclass(frozen=True)
class CompoundGrid:
    """Lattice density h_n = Pr[Z = n*step] with running cdf.

    ``settings`` records the engine configuration that produced the grid.
    Instances are immutable and safe to share across threads.
    """

    step: float
    density: np.ndarray
    cdf: np.ndarray
    engine: str
    settings: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.step > 0):
            raise ParameterError(f"grid step must be positive, got {self.step}")
        if len(self.density) != len(self.cdf):
            raise ParameterError("density and cdf lengths differ")
        self.density.setflags(write=False)
        self.cdf.setflags(write=False)

    @classmethod
    def from_density(cls, step: float, density: np.ndarray, engine: str,
                     settings: dict | None = None) -> "CompoundGrid":
        """Clamp tiny negative densities to zero and accumulate the cdf."""
        h = np.asarray(density, dtype=float).copy()
        if h.min() < -1e-10:
            raise ParameterError(f"grid density has a significant negative value: {h.min()}")
        np.maximum(h, 0.0, out=h)
        return cls(step=step, density=h, cdf=np.cumsum(h), engine=engine,
                   settings=dict(settings or {}))

    def __len__(self):
        return len(self.density)

    @property
    def lattice(self) -> np.ndarray:
        return np.arange(len(self.density)) * self.step

    @property
    def total_mass(self) -> float:
        return float(self.cdf[-1])
