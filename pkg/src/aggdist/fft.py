"""Radix-2 FFT engine for compound distributions.

The transform convention matches the characteristic-function orientation:

    forward   phi_k = sum_m f_m exp(+2 pi i m k / M)
    inverse   f_k   = (1/M) sum_m phi_m exp(-2 pi i m k / M)

Aliasing from mass beyond the lattice window is suppressed by exponential
tilting: damp f_j by exp(-j*theta) before the transform and undo it after.
"""

from __future__ import annotations

import functools
import math

import numpy as np

from .discretise import DiscreteSeverity
from .distributions import FrequencyModel
from .errors import ParameterError, UnderflowError
from .grid import CompoundGrid

__all__ = ["fft_transform", "compound_via_fft", "tilt", "untilt",
           "self_convolve_power", "default_tilt"]

_LOG_HUGE = 700.0  # exp argument ceiling before overflow


def _require_power_of_two(n: int):
    if n < 2 or n & (n - 1):
        raise ParameterError(f"length must be a power of two >= 2, got {n}")


def _bit_reversal_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    rev = np.arange(n, dtype=np.uint32)
    rev = ((rev & 0x55555555) << 1) | ((rev & 0xAAAAAAAA) >> 1)
    rev = ((rev & 0x33333333) << 2) | ((rev & 0xCCCCCCCC) >> 2)
    rev = ((rev & 0x0F0F0F0F) << 4) | ((rev & 0xF0F0F0F0) >> 4)
    rev = ((rev & 0x00FF00FF) << 8) | ((rev & 0xFF00FF00) >> 8)
    rev = (rev << 16) | (rev >> 16)
    rev >>= np.uint32(32 - bits)
    return rev.astype(np.intp)


@functools.lru_cache(maxsize=8)
def _stage_twiddles(n: int) -> tuple:
    """Forward twiddle factors for each butterfly stage of length n."""
    out = []
    m = 2
    while m <= n:
        half = m // 2
        out.append(np.exp(2j * math.pi * np.arange(half) / m))
        m *= 2
    return tuple(out)


def fft_transform(values: np.ndarray, inverse: bool = False) -> np.ndarray:
    """In-place radix-2 transform: bit-reversal permutation, then log2(M)
    butterfly stages with precomputed twiddles.  Returns its argument."""
    n = len(values)
    _require_power_of_two(n)
    if values.dtype != np.complex128:
        raise ParameterError("buffer must be complex128")
    values[:] = values[_bit_reversal_indices(n)]
    for w in _stage_twiddles(n):
        if inverse:
            w = w.conj()
        m = 2 * len(w)
        view = values.reshape(-1, m)
        upper = view[:, : m // 2].copy()
        t = view[:, m // 2:] * w
        view[:, : m // 2] = upper + t
        view[:, m // 2:] = upper - t
    if inverse:
        values /= n
    return values


def default_tilt(m_points: int) -> float:
    """Tilt rate theta = 20/M, a safe choice for double precision."""
    return 20.0 / m_points


def tilt(probs: np.ndarray, theta: float) -> np.ndarray:
    return probs * np.exp(-theta * np.arange(len(probs)))


def untilt(probs: np.ndarray, theta: float) -> np.ndarray:
    return probs * np.exp(theta * np.arange(len(probs)))


def compound_via_fft(disc: DiscreteSeverity, freq: FrequencyModel,
                     m_points: int, theta: float = 0.0) -> CompoundGrid:
    """Compound lattice density via the characteristic function.

    Steps: tilt the severity, forward transform, apply the frequency pgf
    pointwise, inverse transform, untilt, accumulate the cdf.  theta = 0
    disables tilting.
    """
    _require_power_of_two(m_points)
    if len(disc) > m_points:
        raise ParameterError(f"severity lattice ({len(disc)}) longer than transform ({m_points})")
    if theta < 0:
        raise ParameterError(f"tilt rate must be nonnegative, got {theta}")
    if theta * (m_points - 1) > _LOG_HUGE:
        raise ParameterError(
            f"tilt rate {theta} overflows when untilting a length-{m_points} grid")

    f = np.zeros(m_points)
    f[: len(disc)] = disc.probs
    if theta > 0.0:
        f = tilt(f, theta)

    buf = f.astype(np.complex128)
    fft_transform(buf)
    chi = freq.pgf_complex(buf)

    if chi[0] == 0.0:
        # The total-mass coordinate pgf(phi_0) only underflows when the
        # frequency is so large that the distribution bulk lies beyond the
        # lattice window, so no rescaling can recover it here.
        raise UnderflowError(
            "frequency pgf underflowed at the total-mass coordinate; the grid "
            "is far too short for this frequency. Enlarge m_points (and/or "
            "reduce the tilt), or compute via panjer.stabilised_compound, "
            "which splits the frequency into convolution parts.")
    fft_transform(chi, inverse=True)
    h = chi.real

    if theta > 0.0:
        h = h * np.exp(theta * np.arange(m_points))

    return CompoundGrid.from_density(
        disc.step, h, engine="fft",
        settings={"m_points": m_points, "theta": theta, "mode": disc.mode.value,
                  "tail_policy": disc.tail_policy.value})


def self_convolve_power(dens: np.ndarray, power: int, out_len: int) -> np.ndarray:
    """power-fold lattice self-convolution of a density, truncated to out_len.

    power must be a power of two; the convolution is exact (linear, not
    circular) for indices below out_len.
    """
    if power < 1 or power & (power - 1):
        raise ParameterError(f"power must be a power of two, got {power}")
    work = np.asarray(dens, dtype=float)[:out_len]
    while power > 1:
        pad = 1 << (2 * len(work) - 1).bit_length()
        buf = np.zeros(pad, dtype=np.complex128)
        buf[: len(work)] = work
        fft_transform(buf)
        buf *= buf
        fft_transform(buf, inverse=True)
        work = np.maximum(buf.real[: min(2 * len(work) - 1, out_len)], 0.0)
        power //= 2
    return work
