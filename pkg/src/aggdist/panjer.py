"""Panjer recursion for compound lattice distributions.

Covers the (a,b,0) classes (Poisson, binomial, negative binomial), the
(a,b,1) extension for zero-truncated/zero-modified counts, an (a,b,l)
variant for counts vanishing below l, a brute-force convolution oracle,
and an underflow-safe path for very large frequencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from . import fft as fft_mod
from .discretise import DiscreteSeverity, Mode, TailPolicy, discretise
from .distributions import Binomial, FrequencyModel, NegBin, Poisson
from .errors import GridTooShortError, ParameterError, UnderflowError
from .grid import CompoundGrid

__all__ = [
    "PanjerParams", "AtQuantile", "AtIndex", "panjer_params",
    "panjer_recursion", "Ab1Frequency", "zero_truncated", "zero_modified",
    "extended_panjer_recursion", "panjer_recursion_abl",
    "brute_force_convolution", "stabilised_compound", "scaled_frequency",
    "panjer_quantile",
]

# Largest frequency parameter run directly; beyond this the recursion start
# h0 = exp(-lambda) underflows in double precision.
UNDERFLOW_GUARD_PARAM = 700.0

_HARD_STEP_CAP = 8_000_000


class AtQuantile(NamedTuple):
    """Stop as soon as the running cdf reaches alpha."""
    alpha: float


class AtIndex(NamedTuple):
    """Compute the grid up to lattice index n inclusive."""
    n: int


StopRule = Union[AtQuantile, AtIndex]


@dataclass(frozen=True)
class PanjerParams:
    a: float
    b: float
    h0: float


def panjer_params(freq: FrequencyModel, f0: float) -> PanjerParams:
    """Recursion coefficients and starting value h0 = pgf(f0).

    Raises UnderflowError when h0 computes to zero in double precision;
    callers should then switch to stabilised_compound.
    """
    if not (0.0 <= f0 < 1.0):
        raise ParameterError(f"f0 must be in [0,1), got {f0}")
    a, b = freq.panjer_ab()
    h0 = freq.pgf(f0)
    if h0 == 0.0:
        raise UnderflowError("recursion start h0 underflowed; use stabilised_compound")
    return PanjerParams(a=a, b=b, h0=h0)


def _run_recursion(fw: np.ndarray, a: float, b: float, h0: float,
                   stop: StopRule, extra_coeff: float = 0.0,
                   start_term: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Shared recursion loop.

    h_n = [extra_coeff * fw_n + start_term_n
           + sum_{j=1..n} (a + b j/n) fw_j h_{n-j}] / (1 - a fw_0)

    The running cdf uses compensated summation since rounding error of the
    recursion grows linearly with the number of steps.
    """
    f0 = fw[0]
    denom = 1.0 - a * f0
    if denom == 0.0:
        raise ParameterError("recursion denominator 1 - a*f0 is zero")
    m_sev = len(fw)
    f_rev = fw[::-1].copy()
    jf_rev = (np.arange(m_sev) * fw)[::-1].copy()

    if isinstance(stop, AtIndex):
        if stop.n < 0:
            raise ParameterError(f"stop index must be nonnegative, got {stop.n}")
        cap = stop.n + 1
        target_alpha = None
    else:
        if not (0.0 < stop.alpha < 1.0):
            raise ParameterError(f"stop level must be in (0,1), got {stop.alpha}")
        cap = 4096
        target_alpha = stop.alpha

    h = np.zeros(cap)
    h[0] = h0
    big_h = np.zeros(cap)
    total = h0
    comp = 0.0
    big_h[0] = total
    n = 0
    if target_alpha is not None and total >= target_alpha:
        return h[:1], big_h[:1]

    inv_denom = 1.0 / denom
    while True:
        n += 1
        if n >= cap:
            if target_alpha is None:
                break
            cap *= 2
            if cap > _HARD_STEP_CAP:
                raise GridTooShortError(
                    f"cdf only reached {total:.12f} after {n - 1} steps; "
                    f"target {target_alpha} may be unreachable at this severity truncation")
            h = np.resize(h, cap)
            h[n:] = 0.0
            big_h = np.resize(big_h, cap)
        m = min(n, m_sev - 1)
        lo = m_sev - 1 - m
        seg = slice(n - m, n)
        hn = a * np.dot(f_rev[lo:m_sev - 1], h[seg]) \
            + (b / n) * np.dot(jf_rev[lo:m_sev - 1], h[seg])
        if extra_coeff != 0.0 and n < m_sev:
            hn += extra_coeff * fw[n]
        if start_term is not None and n < len(start_term):
            hn += start_term[n]
        hn *= inv_denom
        if hn < 0.0:
            hn = 0.0
        h[n] = hn
        y = hn - comp
        t = total + y
        comp = (t - total) - y
        total = t
        big_h[n] = total
        if target_alpha is not None and total >= target_alpha:
            break
        if target_alpha is None and n >= stop.n:
            break
    return h[:n + 1], big_h[:n + 1]


def _reachable_mass(freq_pgf_total: float, alpha: float, context: str):
    if freq_pgf_total < alpha:
        raise GridTooShortError(
            f"{context}: severity lattice keeps only enough mass for a compound "
            f"cdf limit of {freq_pgf_total:.9f} < target {alpha}")


def panjer_recursion(disc: DiscreteSeverity, params: PanjerParams,
                     stop: StopRule) -> CompoundGrid:
    """Compound lattice distribution for an (a,b,0) frequency."""
    if isinstance(stop, AtQuantile):
        # with a truncated severity the cdf converges to pgf(total mass) < 1
        f_total = min(disc.total_mass, 1.0)
        limit = _pgf_from_ab(params.a, params.b, params.h0, float(disc.probs[0]), f_total)
        _reachable_mass(limit, stop.alpha, "panjer_recursion")
    h, big_h = _run_recursion(disc.probs, params.a, params.b, params.h0, stop)
    return CompoundGrid(step=disc.step, density=h, cdf=big_h, engine="panjer",
                        settings={"a": params.a, "b": params.b, "h0": params.h0,
                                  "mode": disc.mode.value})


def _pgf_from_ab(a: float, b: float, h0: float, f0: float, s: float) -> float:
    """pgf(s) reconstructed from the recursion class, given pgf(f0) = h0."""
    # closed forms per class: a == 0 -> Poisson(b); a > 0 -> NegBin; a < 0 -> Binomial
    if a == 0.0:
        return h0 * math.exp(b * (s - f0))
    r = b / a + 1.0
    return h0 * ((1.0 - a * s) / (1.0 - a * f0)) ** (-r)


@dataclass(frozen=True)
class Ab1Frequency:
    """(a,b,1) count law: the recursion p_n = (a + b/n) p_{n-1} holds for n >= 2.

    Built from a base (a,b,0) law whose k >= 1 probabilities are rescaled,
    with an explicit zero-class probability.
    """

    a: float
    b: float
    p0: float
    p1: float
    base: FrequencyModel
    scale: float

    def pmf(self, k: int) -> float:
        if k == 0:
            return self.p0
        return self.scale * self.base.pmf(k)

    def pgf(self, s: float) -> float:
        if self.scale == 1.0:
            return self.base.pgf(s)
        base0 = self.base.pmf(0)
        return self.p0 + self.scale * (self.base.pgf(s) - base0)

    def pmf_sequence(self, k_max: int) -> np.ndarray:
        return np.array([self.pmf(k) for k in range(k_max + 1)])

    def mass_truncation_index(self, eps: float = 1e-14) -> int:
        return self.base.mass_truncation_index(eps)


def zero_truncated(freq: FrequencyModel) -> Ab1Frequency:
    a, b = freq.panjer_ab()
    p0 = freq.pmf(0)
    scale = 1.0 / (1.0 - p0)
    return Ab1Frequency(a=a, b=b, p0=0.0, p1=scale * (a + b) * p0, base=freq, scale=scale)


def zero_modified(freq: FrequencyModel, p0_new: float) -> Ab1Frequency:
    if not (0.0 <= p0_new < 1.0):
        raise ParameterError(f"modified zero probability must be in [0,1), got {p0_new}")
    a, b = freq.panjer_ab()
    p0 = freq.pmf(0)
    if p0_new == p0:
        scale = 1.0
    else:
        scale = (1.0 - p0_new) / (1.0 - p0)
    return Ab1Frequency(a=a, b=b, p0=p0_new, p1=scale * (a + b) * p0, base=freq, scale=scale)


def extended_panjer_recursion(disc: DiscreteSeverity, freq: Ab1Frequency,
                              stop: StopRule) -> CompoundGrid:
    """Compound lattice distribution for an (a,b,1) frequency."""
    f0 = float(disc.probs[0])
    h0 = freq.pgf(f0) if f0 > 0.0 else freq.p0
    extra = freq.p1 - (freq.a + freq.b) * freq.p0
    if isinstance(stop, AtQuantile):
        _reachable_mass(freq.pgf(min(disc.total_mass, 1.0)), stop.alpha,
                        "extended_panjer_recursion")
    h, big_h = _run_recursion(disc.probs, freq.a, freq.b, h0, stop, extra_coeff=extra)
    return CompoundGrid(step=disc.step, density=h, cdf=big_h, engine="panjer-ab1",
                        settings={"a": freq.a, "b": freq.b, "p0": freq.p0, "p1": freq.p1})


def panjer_recursion_abl(disc: DiscreteSeverity, a: float, b: float, l: int,
                         p_l: float, stop: StopRule) -> CompoundGrid:
    """Recursion for counts with p_0 = ... = p_{l-1} = 0; requires f_0 = 0.

    The starting convolution f^(l)* is built by l-1 direct lattice
    convolutions and enters as p_l * f^(l)*_n.
    """
    if disc.probs[0] != 0.0:
        raise ParameterError("the (a,b,l) recursion requires a severity lattice with f0 = 0")
    if l < 1:
        raise ParameterError(f"l must be >= 1, got {l}")
    if isinstance(stop, AtIndex):
        out_len = stop.n + 1
    else:
        out_len = None
    fl = disc.probs.copy()
    limit = out_len or 4 * len(disc)
    for _ in range(l - 1):
        fl = np.convolve(fl, disc.probs)[:limit]
    start = p_l * fl
    h, big_h = _run_recursion(disc.probs, a, b, 0.0, stop, start_term=start)
    return CompoundGrid(step=disc.step, density=h, cdf=big_h, engine="panjer-abl",
                        settings={"a": a, "b": b, "l": l, "p_l": p_l})


def brute_force_convolution(disc: DiscreteSeverity,
                            freq: FrequencyModel | Ab1Frequency | np.ndarray,
                            n_max: int) -> CompoundGrid:
    """Ground-truth compound density h_n = sum_k p_k f^(k)*_n, n <= n_max.

    O(n^2) per convolution power; only suitable for short grids.  The count
    sum is truncated once the pmf accumulates mass above 1 - 1e-14.
    """
    if isinstance(freq, np.ndarray):
        pmf = np.asarray(freq, dtype=float)
    else:
        pmf = freq.pmf_sequence(freq.mass_truncation_index(1e-14))
    h = np.zeros(n_max + 1)
    power = np.zeros(n_max + 1)
    power[0] = 1.0  # zero-fold convolution: point mass at 0
    h += pmf[0] * power
    for k in range(1, len(pmf)):
        power = np.convolve(power, disc.probs)[: n_max + 1]
        h += pmf[k] * power
    return CompoundGrid.from_density(disc.step, h, engine="oracle",
                                     settings={"n_max": n_max, "k_terms": len(pmf)})


def scaled_frequency(freq: FrequencyModel, min_splits: int = 1):
    """Power-of-two frequency split (freq_scaled, splits) with
    compound(freq) = compound(freq_scaled) convolved with itself `splits`
    times.  Splitting keeps the scaled parameter below the double-precision
    underflow guard."""
    if min_splits < 1 or min_splits & (min_splits - 1):
        raise ParameterError(f"min_splits must be a power of two, got {min_splits}")
    if isinstance(freq, Poisson):
        param = freq.lam
    elif isinstance(freq, NegBin):
        param = freq.r
    else:
        raise ValueError("only Poisson and NegBin frequencies support plain splitting")
    splits = min_splits
    while param / splits > UNDERFLOW_GUARD_PARAM:
        splits *= 2
    if splits == 1:
        return freq, 1
    if isinstance(freq, Poisson):
        return Poisson(freq.lam / splits), splits
    return NegBin(freq.r / splits, freq.p), splits


def stabilised_compound(freq: FrequencyModel, disc: DiscreteSeverity,
                        stop: StopRule) -> CompoundGrid:
    """Panjer computation that stays representable for large frequencies.

    The frequency is split into 2^k identical parts (Poisson and NegBin) or
    a power-of-two multiple plus remainder (binomial); each part is run
    through the plain recursion and the parts are recombined by FFT
    self-convolution of the densities.
    """
    if isinstance(freq, Binomial):
        return _stabilised_binomial(freq, disc, stop)
    sub, splits = scaled_frequency(freq)
    if splits == 1:
        return panjer_recursion(disc, panjer_params(freq, float(disc.probs[0])), stop)

    out_len = _resolve_length(stop, disc, freq)
    attempts = 0
    while True:
        part = panjer_recursion(disc, panjer_params(sub, float(disc.probs[0])),
                                AtIndex(out_len - 1))
        dens = fft_mod.self_convolve_power(part.density, splits, out_len)
        grid = _finalise_stabilised(disc, dens, stop, splits)
        if grid is not None:
            return grid
        attempts += 1
        if attempts > 8:
            raise GridTooShortError("stabilised compound could not reach the target level")
        out_len *= 2


def _stabilised_binomial(freq: Binomial, disc: DiscreteSeverity,
                         stop: StopRule) -> CompoundGrid:
    q = freq.p
    per_trial_limit = max(1, int(UNDERFLOW_GUARD_PARAM / max(-math.log1p(q * (disc.probs[0] - 1.0)), 1e-9)))
    splits = 1
    while freq.n // splits > per_trial_limit:
        splits *= 2
    if splits == 1:
        return panjer_recursion(disc, panjer_params(freq, float(disc.probs[0])), stop)
    m1, m2 = freq.n // splits, freq.n - splits * (freq.n // splits)
    out_len = _resolve_length(stop, disc, freq)
    attempts = 0
    while True:
        part = panjer_recursion(disc, panjer_params(Binomial(m1, q), float(disc.probs[0])),
                                AtIndex(out_len - 1))
        dens = fft_mod.self_convolve_power(part.density, splits, out_len)
        if m2 > 0:
            rest = panjer_recursion(disc, panjer_params(Binomial(m2, q), float(disc.probs[0])),
                                    AtIndex(out_len - 1))
            dens = _convolve_pair(dens, rest.density, out_len)
        grid = _finalise_stabilised(disc, dens, stop, splits)
        if grid is not None:
            return grid
        attempts += 1
        if attempts > 8:
            raise GridTooShortError("stabilised compound could not reach the target level")
        out_len *= 2


def _convolve_pair(x: np.ndarray, y: np.ndarray, out_len: int) -> np.ndarray:
    pad = 1 << (len(x) + len(y) - 1).bit_length()
    bx = np.zeros(pad, dtype=np.complex128)
    by = np.zeros(pad, dtype=np.complex128)
    bx[: len(x)] = x
    by[: len(y)] = y
    fft_mod.fft_transform(bx)
    fft_mod.fft_transform(by)
    bx *= by
    fft_mod.fft_transform(bx, inverse=True)
    return np.maximum(bx.real[:out_len], 0.0)


def _resolve_length(stop: StopRule, disc: DiscreteSeverity, freq: FrequencyModel) -> int:
    if isinstance(stop, AtIndex):
        return stop.n + 1
    # lattice mean of the compound as a starting length; the caller doubles
    # the length until the target level is reached
    mean_steps = freq.mean() * float(np.dot(np.arange(len(disc)), disc.probs))
    return max(2 * int(mean_steps), 1024)


def _finalise_stabilised(disc: DiscreteSeverity, dens: np.ndarray,
                         stop: StopRule, splits: int) -> CompoundGrid | None:
    cdf = np.cumsum(dens)
    if isinstance(stop, AtQuantile):
        hits = np.nonzero(cdf >= stop.alpha)[0]
        if len(hits) == 0:
            return None
        end = int(hits[0]) + 1
        dens, cdf = dens[:end], cdf[:end]
    return CompoundGrid(step=disc.step, density=np.maximum(dens, 0.0), cdf=cdf,
                        engine="panjer-stabilised", settings={"splits": splits})


def panjer_quantile(freq: FrequencyModel, sev, step: float, alpha: float,
                    mode: Mode = Mode.CENTRAL,
                    tail_policy: TailPolicy = TailPolicy.IGNORE) -> tuple[float, CompoundGrid]:
    """Convenience: discretise with an automatically grown lattice, recurse
    to the target level, and return (quantile, grid)."""
    n_points = 4096
    for _ in range(16):
        disc = discretise(sev, step, n_points, mode, tail_policy)
        try:
            params = panjer_params(freq, float(disc.probs[0]))
        except UnderflowError:
            grid = stabilised_compound(freq, disc, AtQuantile(alpha))
            return (len(grid) - 1) * step, grid
        try:
            grid = panjer_recursion(disc, params, AtQuantile(alpha))
        except GridTooShortError:
            n_points *= 4
            continue
        return (len(grid) - 1) * step, grid
    raise GridTooShortError(f"could not reach level {alpha} within {n_points} lattice points")
