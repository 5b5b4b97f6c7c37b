"""Closed-form quantile approximations for the compound distribution.

Three flavours with different validity regimes:

* normal: moment matching of mean/variance (central-limit regime);
* translated gamma: moment matching of mean/variance/skewness;
* heavy-tail asymptotics: 1 - H(z) -> E[N](1 - F(z)), valid for
  sub-exponential severities as the level approaches 1.

Each returns None when its required moments do not exist.  Results carry a
``quality`` tag so front-ends can label them honestly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import gammaincinv, ndtri

from .distributions import GPD, FrequencyModel, Lognormal, Poisson, SeverityModel
from .errors import ParameterError
from .moments import compound_central_moments

__all__ = ["TranslatedGammaFit", "normal_approx_quantile", "translated_gamma_fit",
           "heavy_tail_var", "APPROX_QUALITY"]

APPROX_QUALITY = {
    "normal": "moment-matched",
    "translated-gamma": "moment-matched",
    "heavy-tail": "asymptotic",
}


@dataclass(frozen=True)
class TranslatedGammaFit:
    """Shifted gamma a + Gamma(shape, scale) matched to three moments."""

    shift: float
    shape: float
    scale: float

    def quantile(self, alpha: float) -> float:
        if not (0.0 < alpha < 1.0):
            raise ParameterError(f"alpha must be in (0,1), got {alpha}")
        return self.shift + self.scale * float(gammaincinv(self.shape, alpha))

    def mean(self) -> float:
        return self.shift + self.shape * self.scale

    def variance(self) -> float:
        return self.shape * self.scale ** 2

    def skewness(self) -> float:
        return 2.0 / math.sqrt(self.shape)


def normal_approx_quantile(freq: FrequencyModel, sev: SeverityModel,
                           alpha: float) -> float | None:
    """E[Z] + z_alpha sqrt(Var[Z]); None when a needed moment is infinite."""
    if not (0.0 < alpha < 1.0):
        raise ParameterError(f"alpha must be in (0,1), got {alpha}")
    mom = compound_central_moments(freq, sev)
    if not (math.isfinite(mom.mean) and math.isfinite(mom.variance)):
        return None
    return mom.mean + float(ndtri(alpha)) * math.sqrt(mom.variance)


def translated_gamma_fit(freq: FrequencyModel, sev: SeverityModel) -> TranslatedGammaFit | None:
    """Match mean, variance and skewness; None when impossible."""
    mom = compound_central_moments(freq, sev)
    if not (math.isfinite(mom.mean) and math.isfinite(mom.variance)
            and math.isfinite(mom.central3)):
        return None
    return fit_translated_gamma(mom.mean, mom.variance, mom.skewness)


def fit_translated_gamma(mean: float, variance: float, skewness: float) -> TranslatedGammaFit | None:
    """Solve shift + shape*scale = mean, shape*scale^2 = variance,
    2/sqrt(shape) = skewness.  Requires strictly positive skewness."""
    if not (variance > 0):
        raise ParameterError(f"variance must be positive, got {variance}")
    if not (skewness > 0 and math.isfinite(skewness)):
        return None
    shape = 4.0 / (skewness * skewness)
    scale = math.sqrt(variance / shape)
    return TranslatedGammaFit(shift=mean - shape * scale, shape=shape, scale=scale)


def heavy_tail_var(freq: FrequencyModel, sev: SeverityModel,
                   alpha: float) -> float | None:
    """Quantile from the sub-exponential tail relation: F^{-1}(1 - (1-alpha)/E[N]).

    For a Poisson count with GPD severities this is the closed form
    (beta/xi) (lam/(1-alpha))^xi.  Returns None outside the heavy-tailed
    catalogue or when the tail argument leaves (0, 1).
    """
    if not (0.0 < alpha < 1.0):
        raise ParameterError(f"alpha must be in (0,1), got {alpha}")
    if not isinstance(sev, (Lognormal, GPD)):
        return None
    mean_n = freq.mean()
    u = 1.0 - (1.0 - alpha) / mean_n
    if u <= 0.0:
        return None
    if isinstance(sev, GPD) and isinstance(freq, Poisson) and sev.xi > 0:
        return (sev.beta / sev.xi) * (freq.lam / (1.0 - alpha)) ** sev.xi
    return sev.quantile(u)
