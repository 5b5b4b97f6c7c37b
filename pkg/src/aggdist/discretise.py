"""Lattice discretisation of continuous severities.

Maps a severity with cdf F onto {0, delta, 2*delta, ...} by cdf differences:

    central   f_0 = F(delta/2),  f_n = F(n*delta + delta/2) - F(n*delta - delta/2)
    forward   f_n = F(n*delta + delta) - F(n*delta)
    backward  f_n = F(n*delta) - F(n*delta - delta)

Forward differences shift mass down (upper bound for the compound cdf),
backward differences shift it up (lower bound).
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from .distributions import SeverityModel
from .errors import ParameterError

__all__ = ["Mode", "TailPolicy", "DiscreteSeverity", "discretise"]

log = logging.getLogger(__name__)


class Mode(enum.Enum):
    CENTRAL = "central"
    FORWARD = "forward"
    BACKWARD = "backward"


class TailPolicy(enum.Enum):
    ABSORB_LAST = "absorb"
    IGNORE = "ignore"


@dataclass(frozen=True)
class DiscreteSeverity:
    step: float
    probs: np.ndarray
    mode: Mode
    tail_policy: TailPolicy

    def __post_init__(self):
        if not (self.step > 0):
            raise ParameterError(f"lattice step must be positive, got {self.step}")
        if len(self.probs) < 2:
            raise ParameterError("lattice needs at least two points")
        if self.probs.min() < 0:
            raise ParameterError("negative lattice probability")
        if self.probs.sum() > 1.0 + 1e-12:
            raise ParameterError(f"lattice mass exceeds 1: {self.probs.sum()}")
        self.probs.setflags(write=False)

    def __len__(self):
        return len(self.probs)

    @property
    def total_mass(self) -> float:
        return float(self.probs.sum())


def discretise(sev: SeverityModel, step: float, n_points: int,
               mode: Mode = Mode.CENTRAL,
               tail_policy: TailPolicy = TailPolicy.IGNORE) -> DiscreteSeverity:
    """Discretise ``sev`` onto n_points lattice points with the given step."""
    if not (step > 0):
        raise ParameterError(f"lattice step must be positive, got {step}")
    if n_points < 2:
        raise ParameterError(f"need at least two lattice points, got {n_points}")

    n = np.arange(n_points, dtype=float)
    if mode is Mode.CENTRAL:
        upper = sev.cdf((n + 0.5) * step)
        f = np.empty(n_points)
        f[0] = upper[0]
        f[1:] = upper[1:] - upper[:-1]
    elif mode is Mode.FORWARD:
        c = sev.cdf(np.concatenate([n, [n_points]]) * step)
        f = c[1:] - c[:-1]
    elif mode is Mode.BACKWARD:
        c = sev.cdf(np.concatenate([[0.0], n]) * step)
        f = c[1:] - c[:-1]
    else:  # pragma: no cover
        raise ParameterError(f"unknown mode {mode}")

    neg = f < 0
    if neg.any():
        clamped = -float(f[neg].sum())
        # cancellation of nearly equal cdf values in the far tail
        log.debug("clamped %.3e of negative lattice mass at %d points", clamped, int(neg.sum()))
        f[neg] = 0.0

    if tail_policy is TailPolicy.ABSORB_LAST:
        residual = 1.0 - f.sum()
        if residual > 0:
            f[-1] += residual

    return DiscreteSeverity(step=step, probs=f, mode=mode, tail_policy=tail_policy)
