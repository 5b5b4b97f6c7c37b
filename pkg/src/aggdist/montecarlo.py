"""Monte Carlo engine for compound losses.

Samples Z = X_1 + ... + X_N per draw, keeping only the largest samples
needed for the requested quantile range plus streaming mean/variance, so
memory stays flat for very large sample counts.

Chunks use substreams derived from the master seed by counter spawning;
for a fixed chunk plan the results are bitwise reproducible regardless of
how many workers execute the chunks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom
from scipy.special import ndtri

from .distributions import FrequencyModel, SeverityModel
from .errors import InsufficientSamplesError, ParameterError

__all__ = ["McRun", "QuantileInterval", "simulate_compound", "mc_quantile",
           "mc_quantile_ci", "mc_es"]

_DEFAULT_CHUNK = 200_000


@dataclass(frozen=True)
class McRun:
    """Result of a simulation run.

    retained holds the largest samples, ascending; its length is
    min(sample_count, sample_count - floor(sample_count*alpha_min) + 1), just
    enough for every quantile level at or above alpha_min.
    """

    sample_count: int
    seed: int
    alpha_min: float
    retained: np.ndarray
    mean: float
    variance: float
    chunk_size: int

    def __post_init__(self):
        self.retained.setflags(write=False)

    @classmethod
    def from_samples(cls, samples: np.ndarray, alpha_min: float = 0.0,
                     seed: int = 0) -> "McRun":
        samples = np.asarray(samples, dtype=float)
        k = len(samples)
        keep = min(k, k - math.floor(k * alpha_min) + 1)
        retained = np.sort(samples)[k - keep:]
        return cls(sample_count=k, seed=seed, alpha_min=alpha_min,
                   retained=retained, mean=float(np.mean(samples)),
                   variance=float(np.var(samples, ddof=1)) if k > 1 else 0.0,
                   chunk_size=k)


def _worker_count() -> int:
    env = os.environ.get("AGGDIST_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ParameterError(f"AGGDIST_THREADS must be an integer, got {env!r}")
    return 1


def _simulate_chunk(freq: FrequencyModel, sev: SeverityModel, size: int,
                    ss: np.random.SeedSequence) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(ss))
    counts = freq.sample(rng, size)
    total = int(counts.sum())
    if total == 0:
        return np.zeros(size)
    severities = sev.sample(rng, total)
    owner = np.repeat(np.arange(size), counts)
    return np.bincount(owner, weights=severities, minlength=size)


def simulate_compound(freq: FrequencyModel, sev: SeverityModel, samples: int,
                      seed: int, alpha_min: float = 0.99,
                      chunk_size: int = _DEFAULT_CHUNK,
                      workers: int | None = None) -> McRun:
    """Simulate ``samples`` compound draws.

    alpha_min bounds the quantile levels later queries may use; only the
    top (1 - alpha_min) fraction of samples (plus one) is retained.
    """
    if samples < 1:
        raise ParameterError(f"need at least one sample, got {samples}")
    if not (0.0 <= alpha_min < 1.0):
        raise ParameterError(f"alpha_min must be in [0,1), got {alpha_min}")
    workers = workers if workers is not None else _worker_count()
    keep = min(samples, samples - math.floor(samples * alpha_min) + 1)

    plan = []
    start = 0
    while start < samples:
        plan.append(min(chunk_size, samples - start))
        start += plan[-1]
    streams = np.random.SeedSequence(seed).spawn(len(plan))

    def run(idx: int) -> tuple[np.ndarray, int, float, float]:
        sums = _simulate_chunk(freq, sev, plan[idx], streams[idx])
        n = len(sums)
        mean = float(sums.mean())
        m2 = float(((sums - mean) ** 2).sum())
        top = np.sort(sums)[max(0, n - keep):]
        return top, n, mean, m2

    if workers > 1 and len(plan) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(len(plan))))
    else:
        results = [run(i) for i in range(len(plan))]

    # merge in chunk order so the outcome is independent of scheduling
    retained = results[0][0]
    n_tot, mean_tot, m2_tot = results[0][1], results[0][2], results[0][3]
    for top, n, mean, m2 in results[1:]:
        retained = np.sort(np.concatenate([retained, top]))[-keep:] \
            if len(retained) + len(top) > keep else np.sort(np.concatenate([retained, top]))
        delta = mean - mean_tot
        new_n = n_tot + n
        m2_tot = m2_tot + m2 + delta * delta * n_tot * n / new_n
        mean_tot = mean_tot + delta * n / new_n
        n_tot = new_n

    variance = m2_tot / (n_tot - 1) if n_tot > 1 else 0.0
    return McRun(sample_count=samples, seed=seed, alpha_min=alpha_min,
                 retained=retained, mean=mean_tot, variance=variance,
                 chunk_size=chunk_size)


def _order_statistic(run: McRun, index_one_based: int) -> float:
    """Overall order statistic Z~_(i) fetched from the retained tail."""
    offset = index_one_based - (run.sample_count - len(run.retained))
    if offset < 1:
        raise InsufficientSamplesError(
            f"order statistic {index_one_based} was not retained "
            f"(run keeps the top {len(run.retained)} of {run.sample_count})")
    return float(run.retained[offset - 1])


def mc_quantile(run: McRun, alpha: float) -> float:
    """Quantile estimator Z~_(floor(K*alpha)+1)."""
    if not (0.0 < alpha < 1.0):
        raise ParameterError(f"alpha must be in (0,1), got {alpha}")
    if alpha < run.alpha_min:
        raise InsufficientSamplesError(
            f"run retained samples for levels >= {run.alpha_min}, requested {alpha}")
    return _order_statistic(run, math.floor(run.sample_count * alpha) + 1)


@dataclass(frozen=True)
class QuantileInterval:
    r: int
    s: int
    lower: float
    upper: float
    exact_coverage: float

    @property
    def half_width(self) -> float:
        return 0.5 * (self.upper - self.lower)


def mc_quantile_ci(run: McRun, alpha: float, gamma: float) -> QuantileInterval:
    """Conservative order-statistic interval for the true quantile.

    Indices from the normal approximation of Bin(K, alpha):
        r = floor(K a - z sqrt(K a (1-a))), s = ceil(K a + z sqrt(...)),
    with z = ndtri((1+gamma)/2).  exact_coverage is the binomial probability
    Pr[r <= Bin(K, alpha) <= s-1], the exact chance the interval covers the
    true quantile.  The normal index rule needs K a (1-a) >= 50 or so;
    smaller runs get a warning.
    """
    if not (0.0 < gamma < 1.0):
        raise ParameterError(f"gamma must be in (0,1), got {gamma}")
    k = run.sample_count
    ka = k * alpha
    spread = math.sqrt(ka * (1.0 - alpha))
    if spread ** 2 < 50.0:
        import warnings
        warnings.warn(f"K*alpha*(1-alpha) = {spread**2:.1f} < 50: normal-index "
                      "approximation is outside its validity range")
    z = float(ndtri(0.5 * (1.0 + gamma)))
    r = math.floor(ka - z * spread)
    s = math.ceil(ka + z * spread)
    r = max(r, 1)
    s = min(s, k)
    if not 1 <= r < s <= k:
        raise ParameterError(f"degenerate interval indices r={r}, s={s}")
    coverage = float(binom.cdf(s - 1, k, alpha) - binom.cdf(r - 1, k, alpha))
    return QuantileInterval(r=r, s=s,
                            lower=_order_statistic(run, r),
                            upper=_order_statistic(run, s),
                            exact_coverage=coverage)


def mc_es(run: McRun, alpha: float, q_hat: float) -> tuple[float, float]:
    """Tail-average estimator of expected shortfall with its naive stderr.

    (es, stderr) where es = sum(Z 1{Z >= q_hat}) / (K - floor(K alpha)).
    The stderr treats q_hat as known, so it understates the real error.
    """
    tail = run.retained[run.retained >= q_hat]
    if len(tail) == 0:
        raise InsufficientSamplesError(f"no retained samples at or above {q_hat}")
    denom = run.sample_count - math.floor(run.sample_count * alpha)
    es = float(tail.sum() / denom)
    k = run.sample_count
    sigma2 = k * float(((tail - es) ** 2).sum()) / float(len(tail)) ** 2
    return es, math.sqrt(sigma2 / k)
