"""Frequency and severity distribution catalogue.

Frequencies (event counts): Poisson, Binomial, NegBin.
Severities (loss amounts): Lognormal, Gamma, GPD, Normal.

All models are immutable after construction and every method is pure, so
instances can be shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, ndtr, ndtri

from .errors import ParameterError, UnderflowError

__all__ = [
    "FrequencyModel", "Poisson", "Binomial", "NegBin",
    "SeverityModel", "Lognormal", "Gamma", "GPD", "Normal",
    "FrequencyMoments", "parse_frequency", "parse_severity",
]

# Exponent beyond which exp() underflows to zero in IEEE double precision.
_EXP_UNDERFLOW = 745.0

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class FrequencyMoments:
    mean: float
    variance: float
    central3: float
    central4: float


class FrequencyModel:
    """Common interface for event-count distributions."""

    def pmf(self, k: int) -> float:
        raise NotImplementedError

    def pgf(self, s: float) -> float:
        """Probability generating function E[s^N] for s in [0, 1].

        Raises UnderflowError when the closed form evaluates to zero in
        double precision although the true value is positive.
        """
        raise NotImplementedError

    def pgf_complex(self, z):
        """pgf evaluated on complex arguments (scalar or ndarray).

        Uses the principal branch for complex powers.  Values that underflow
        to zero are returned as zero; callers that need the total-mass scale
        must check the real argument separately via pgf().
        """
        raise NotImplementedError

    def central_moments(self) -> FrequencyMoments:
        raise NotImplementedError

    def mean(self) -> float:
        return self.central_moments().mean

    def prob_zero(self) -> float:
        return self.pmf(0)

    def panjer_ab(self) -> tuple[float, float]:
        """(a, b) of the recursion class p_n = (a + b/n) p_{n-1}, n >= 1."""
        raise NotImplementedError

    def mass_truncation_index(self, eps: float = 1e-14) -> int:
        """Smallest K with cumulative pmf mass above 1 - eps."""
        total = 0.0
        k = 0
        while total < 1.0 - eps:
            total += self.pmf(k)
            k += 1
            if k > 10_000_000:  # pragma: no cover - defensive
                break
        return k

    def pmf_sequence(self, k_max: int) -> np.ndarray:
        return np.array([self.pmf(k) for k in range(k_max + 1)])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Poisson(FrequencyModel):
    lam: float

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ParameterError(f"Poisson rate must be positive, got {self.lam}")

    def pmf(self, k):
        if k < 0:
            return 0.0
        return math.exp(k * math.log(self.lam) - self.lam - gammaln(k + 1))

    def pgf(self, s):
        expo = self.lam * (s - 1.0)
        if expo < -_EXP_UNDERFLOW:
            raise UnderflowError(
                f"Poisson pgf exp({expo:.1f}) underflows; use a scaled computation")
        return math.exp(expo)

    def pgf_complex(self, z):
        return np.exp(self.lam * (np.asarray(z) - 1.0))

    def central_moments(self):
        lam = self.lam
        return FrequencyMoments(lam, lam, lam, lam * (1.0 + 3.0 * lam))

    def panjer_ab(self):
        return 0.0, self.lam

    def sample(self, rng, size):
        return rng.poisson(self.lam, size)


@dataclass(frozen=True)
class Binomial(FrequencyModel):
    n: int
    p: float

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ParameterError(f"Binomial trial count must be a positive integer, got {self.n}")
        if not (0.0 < self.p < 1.0):
            raise ParameterError(f"Binomial success probability must be in (0,1), got {self.p}")

    def pmf(self, k):
        if k < 0 or k > self.n:
            return 0.0
        logc = gammaln(self.n + 1) - gammaln(k + 1) - gammaln(self.n - k + 1)
        return math.exp(logc + k * math.log(self.p) + (self.n - k) * math.log1p(-self.p))

    def pgf(self, s):
        base = 1.0 + self.p * (s - 1.0)
        val = base ** self.n
        if val == 0.0:
            raise UnderflowError("Binomial pgf underflows; use a scaled computation")
        return val

    def pgf_complex(self, z):
        return (1.0 + self.p * (np.asarray(z) - 1.0)) ** self.n

    def central_moments(self):
        n, p = self.n, self.p
        q = 1.0 - p
        mean = n * p
        var = n * p * q
        mu3 = n * p * q * (q - p)
        mu4 = n * p * q * (1.0 + 3.0 * (n - 2.0) * p * q)
        return FrequencyMoments(mean, var, mu3, mu4)

    def panjer_ab(self):
        q = self.p
        return -q / (1.0 - q), q * (self.n + 1) / (1.0 - q)

    def mass_truncation_index(self, eps=1e-14):
        return self.n + 1

    def sample(self, rng, size):
        return rng.binomial(self.n, self.p, size)


@dataclass(frozen=True)
class NegBin(FrequencyModel):
    r: float
    p: float

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ParameterError(f"NegBin shape must be positive, got {self.r}")
        if not (0.0 < self.p < 1.0):
            raise ParameterError(f"NegBin success probability must be in (0,1), got {self.p}")

    def pmf(self, k):
        if k < 0:
            return 0.0
        r, p = self.r, self.p
        logc = gammaln(k + r) - gammaln(k + 1) - gammaln(r)
        return math.exp(logc + r * math.log(p) + k * math.log1p(-p))

    def pgf(self, s):
        r, p = self.r, self.p
        val = (p / (1.0 - (1.0 - p) * s)) ** r
        if val == 0.0:
            raise UnderflowError("NegBin pgf underflows; use a scaled computation")
        return val

    def pgf_complex(self, z):
        r, p = self.r, self.p
        return (p / (1.0 - (1.0 - p) * np.asarray(z))) ** r

    def central_moments(self):
        r, p = self.r, self.p
        q = 1.0 - p
        mean = r * q / p
        var = r * q / p ** 2
        # cumulants of the negative binomial; mu3 = k3, mu4 = k4 + 3 k2^2
        k3 = r * q * (1.0 + q) / p ** 3
        k4 = r * q * (1.0 + 4.0 * q + q * q) / p ** 4
        return FrequencyMoments(mean, var, k3, k4 + 3.0 * var * var)

    def panjer_ab(self):
        q = self.p  # recursion-table parameterisation coincides with p
        return 1.0 - q, (1.0 - q) * (self.r - 1.0)

    def sample(self, rng, size):
        return rng.negative_binomial(self.r, self.p, size)


class SeverityModel:
    """Common interface for single-loss distributions."""

    #: smallest x with positive density (0 for positive-support kinds)
    support_lower: float = 0.0

    def cdf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def _pdf_scalar(self, x: float) -> float:
        """Scalar fast path used by tight quadrature loops."""
        return float(self.pdf(x))

    def quantile(self, u: float) -> float:
        raise NotImplementedError

    def raw_moment(self, k: int) -> float:
        """E[X^k]; returns math.inf when the moment diverges."""
        raise NotImplementedError

    def mean(self) -> float:
        return self.raw_moment(1)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def _check_u(self, u):
        if not (0.0 < u < 1.0):
            raise ParameterError(f"quantile level must be in (0,1), got {u}")


@dataclass(frozen=True)
class Lognormal(SeverityModel):
    mu: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma) and math.isfinite(self.mu)):
            raise ParameterError(f"Lognormal needs finite mu and sigma > 0, got {self.mu}, {self.sigma}")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = ndtr((np.log(x[pos]) - self.mu) / self.sigma)
        return out if out.ndim else float(out)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        lx = (np.log(x[pos]) - self.mu) / self.sigma
        out[pos] = np.exp(-0.5 * lx * lx) / (x[pos] * self.sigma * _SQRT_2PI)
        return out if out.ndim else float(out)

    def _pdf_scalar(self, x):
        if x <= 0.0:
            return 0.0
        lx = (math.log(x) - self.mu) / self.sigma
        return math.exp(-0.5 * lx * lx) / (x * self.sigma * _SQRT_2PI)

    def quantile(self, u):
        self._check_u(u)
        return math.exp(self.mu + self.sigma * ndtri(u))

    def raw_moment(self, k):
        return math.exp(k * self.mu + 0.5 * (k * self.sigma) ** 2)

    def sample(self, rng, size):
        return np.exp(self.mu + self.sigma * rng.standard_normal(size))


@dataclass(frozen=True)
class Gamma(SeverityModel):
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ParameterError(f"Gamma needs alpha > 0 and beta > 0, got {self.alpha}, {self.beta}")

    def cdf(self, x):
        from scipy.special import gammainc
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = gammainc(self.alpha, x[pos] / self.beta)
        return out if out.ndim else float(out)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        a, b = self.alpha, self.beta
        out[pos] = np.exp((a - 1.0) * np.log(x[pos]) - x[pos] / b - gammaln(a) - a * math.log(b))
        return out if out.ndim else float(out)

    def _pdf_scalar(self, x):
        if x <= 0.0:
            return 0.0
        a, b = self.alpha, self.beta
        return math.exp((a - 1.0) * math.log(x) - x / b - gammaln(a) - a * math.log(b))

    def quantile(self, u):
        from scipy.special import gammaincinv
        self._check_u(u)
        return self.beta * float(gammaincinv(self.alpha, u))

    def raw_moment(self, k):
        return self.beta ** k * math.exp(gammaln(self.alpha + k) - gammaln(self.alpha))

    def sample(self, rng, size):
        return rng.gamma(self.alpha, self.beta, size)


@dataclass(frozen=True)
class GPD(SeverityModel):
    """Generalised Pareto with nonnegative shape (heavy-tail regime)."""

    xi: float
    beta: float

    def __post_init__(self):
        if self.xi < 0:
            raise ParameterError(f"GPD shape must be >= 0, got {self.xi}")
        if not (self.beta > 0):
            raise ParameterError(f"GPD scale must be positive, got {self.beta}")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        if self.xi == 0.0:
            out[pos] = -np.expm1(-x[pos] / self.beta)
        else:
            out[pos] = 1.0 - (1.0 + self.xi * x[pos] / self.beta) ** (-1.0 / self.xi)
        return out if out.ndim else float(out)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x >= 0
        if self.xi == 0.0:
            out[pos] = np.exp(-x[pos] / self.beta) / self.beta
        else:
            out[pos] = (1.0 + self.xi * x[pos] / self.beta) ** (-1.0 / self.xi - 1.0) / self.beta
        return out if out.ndim else float(out)

    def _pdf_scalar(self, x):
        if x < 0.0:
            return 0.0
        if self.xi == 0.0:
            return math.exp(-x / self.beta) / self.beta
        return (1.0 + self.xi * x / self.beta) ** (-1.0 / self.xi - 1.0) / self.beta

    def quantile(self, u):
        self._check_u(u)
        if self.xi == 0.0:
            return -self.beta * math.log1p(-u)
        return self.beta * ((1.0 - u) ** -self.xi - 1.0) / self.xi

    def raw_moment(self, k):
        if self.xi * k >= 1.0:
            return math.inf
        denom = 1.0
        for j in range(1, k + 1):
            denom *= 1.0 - j * self.xi
        return self.beta ** k * math.factorial(k) / denom

    def sample(self, rng, size):
        u = rng.random(size)
        if self.xi == 0.0:
            return -self.beta * np.log1p(-u)
        return self.beta * ((1.0 - u) ** -self.xi - 1.0) / self.xi


@dataclass(frozen=True)
class Normal(SeverityModel):
    mu: float
    sigma: float
    support_lower = -math.inf

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.mu)):
            raise ParameterError(f"Normal needs finite mu and sigma > 0, got {self.mu}, {self.sigma}")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = ndtr((x - self.mu) / self.sigma)
        return out if out.ndim else float(out)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        zsc = (x - self.mu) / self.sigma
        out = np.exp(-0.5 * zsc * zsc) / (self.sigma * _SQRT_2PI)
        return out if out.ndim else float(out)

    def _pdf_scalar(self, x):
        zsc = (x - self.mu) / self.sigma
        return math.exp(-0.5 * zsc * zsc) / (self.sigma * _SQRT_2PI)

    def quantile(self, u):
        self._check_u(u)
        return self.mu + self.sigma * float(ndtri(u))

    def raw_moment(self, k):
        # m_k = mu m_{k-1} + (k-1) sigma^2 m_{k-2}
        m_prev, m = 1.0, self.mu
        for j in range(2, k + 1):
            m_prev, m = m, self.mu * m + (j - 1) * self.sigma ** 2 * m_prev
        return m if k >= 1 else 1.0

    def sample(self, rng, size):
        return self.mu + self.sigma * rng.standard_normal(size)


_FREQ_KINDS = {"poisson": (Poisson, 1), "binomial": (Binomial, 2), "negbin": (NegBin, 2)}
_SEV_KINDS = {"lognormal": (Lognormal, 2), "gamma": (Gamma, 2), "gpd": (GPD, 2), "normal": (Normal, 2)}


def _parse(spec: str, table, what: str):
    name, _, rest = spec.partition(":")
    name = name.strip().lower()
    if name not in table:
        raise ParameterError(f"unknown {what} kind {name!r}; expected one of {sorted(table)}")
    cls, n_args = table[name]
    try:
        args = [float(tok) for tok in rest.split(",")] if rest else []
    except ValueError as exc:
        raise ParameterError(f"cannot parse {what} parameters in {spec!r}: {exc}") from None
    if len(args) != n_args:
        raise ParameterError(f"{name} takes {n_args} parameters, got {len(args)} in {spec!r}")
    if cls is Binomial:
        if args[0] != int(args[0]):
            raise ParameterError(f"binomial trial count must be an integer, got {args[0]}")
        args[0] = int(args[0])
    return cls(*args)


def parse_frequency(spec: str) -> FrequencyModel:
    """Parse 'poisson:100', 'binomial:10,0.3' or 'negbin:2,0.5'."""
    return _parse(spec, _FREQ_KINDS, "frequency")


def parse_severity(spec: str) -> SeverityModel:
    """Parse 'lognormal:0,2', 'gamma:2,3', 'gpd:1,1' or 'normal:0,1'."""
    return _parse(spec, _SEV_KINDS, "severity")


def render_frequency(freq: FrequencyModel) -> str:
    if isinstance(freq, Poisson):
        return f"poisson:{freq.lam:g}"
    if isinstance(freq, Binomial):
        return f"binomial:{freq.n:d},{freq.p:g}"
    if isinstance(freq, NegBin):
        return f"negbin:{freq.r:g},{freq.p:g}"
    raise TypeError(type(freq))


def render_severity(sev: SeverityModel) -> str:
    if isinstance(sev, Lognormal):
        return f"lognormal:{sev.mu:g},{sev.sigma:g}"
    if isinstance(sev, Gamma):
        return f"gamma:{sev.alpha:g},{sev.beta:g}"
    if isinstance(sev, GPD):
        return f"gpd:{sev.xi:g},{sev.beta:g}"
    if isinstance(sev, Normal):
        return f"normal:{sev.mu:g},{sev.sigma:g}"
    raise TypeError(type(sev))
