"""Closed-form moments and cumulants of the compound distribution.

For Z = X_1 + ... + X_N with i.i.d. severities independent of the count:

    E[Z]   = E[N] E[X]
    Var[Z] = E[N] Var[X] + Var[N] E[X]^2
    mu3[Z] = E[N] mu3[X] + 3 Var[N] Var[X] E[X] + mu3[N] E[X]^3
    mu4[Z] = E[N] mu4[X] + 4 Var[N] mu3[X] E[X]
             + 3 (Var[N] + E[N](E[N]-1)) Var[X]^2
             + 6 (mu3[N] + E[N] Var[N]) E[X]^2 Var[X] + mu4[N] E[X]^4

Missing severity moments propagate as math.inf markers rather than errors,
so approximation layers can detect and skip them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .distributions import FrequencyModel, SeverityModel
from .errors import ParameterError

__all__ = ["CompoundMoments", "compound_central_moments", "compound_poisson_cumulants"]


@dataclass(frozen=True)
class CompoundMoments:
    mean: float
    variance: float
    central3: float
    central4: float

    @property
    def skewness(self) -> float:
        if not (math.isfinite(self.variance) and math.isfinite(self.central3)):
            return math.inf
        return self.central3 / self.variance ** 1.5

    @property
    def kurtosis(self) -> float:
        if not (math.isfinite(self.variance) and math.isfinite(self.central4)):
            return math.inf
        return -3.0 + self.central4 / self.variance ** 2


def _severity_centrals(sev: SeverityModel):
    m = [sev.raw_moment(k) for k in (1, 2, 3, 4)]
    if not all(map(math.isfinite, m)):
        finite = [v if math.isfinite(v) else math.inf for v in m]
        out = [finite[0], math.inf, math.inf, math.inf]
        if math.isfinite(m[1]):
            out[1] = m[1] - m[0] ** 2
        if math.isfinite(m[2]):
            out[2] = m[2] - 3 * m[0] * m[1] + 2 * m[0] ** 3
        return out
    m1, m2, m3, m4 = m
    var = m2 - m1 * m1
    mu3 = m3 - 3 * m1 * m2 + 2 * m1 ** 3
    mu4 = m4 - 4 * m1 * m3 + 6 * m1 * m1 * m2 - 3 * m1 ** 4
    return [m1, var, mu3, mu4]


def compound_central_moments(freq: FrequencyModel, sev: SeverityModel) -> CompoundMoments:
    """First four central moments of the compound loss."""
    n = freq.central_moments()
    x1, xvar, xmu3, xmu4 = _severity_centrals(sev)
    if not math.isfinite(x1):
        return CompoundMoments(math.inf, math.inf, math.inf, math.inf)
    mean = n.mean * x1
    if not math.isfinite(xvar):
        return CompoundMoments(mean, math.inf, math.inf, math.inf)
    var = n.mean * xvar + n.variance * x1 * x1
    if not math.isfinite(xmu3):
        return CompoundMoments(mean, var, math.inf, math.inf)
    mu3 = n.mean * xmu3 + 3.0 * n.variance * xvar * x1 + n.central3 * x1 ** 3
    if not math.isfinite(xmu4):
        return CompoundMoments(mean, var, mu3, math.inf)
    mu4 = (n.mean * xmu4
           + 4.0 * n.variance * xmu3 * x1
           + 3.0 * (n.variance + n.mean * (n.mean - 1.0)) * xvar * xvar
           + 6.0 * (n.central3 + n.mean * n.variance) * x1 * x1 * xvar
           + n.central4 * x1 ** 4)
    return CompoundMoments(mean, var, mu3, mu4)


def compound_poisson_cumulants(lam: float, sev: SeverityModel, k: int) -> float:
    """k-th cumulant of a compound Poisson loss: kappa_k = lam * E[X^k]."""
    if not (lam > 0):
        raise ParameterError(f"rate must be positive, got {lam}")
    if not 1 <= k <= 4:
        raise ParameterError(f"only cumulants 1..4 are supported, got {k}")
    m = sev.raw_moment(k)
    return lam * m if math.isfinite(m) else math.inf
