"""Discrete spectra and the concentration score that drives partitioning.

The transform is an unnormalized DFT: X[k] = sum_n x[n] exp(-2 pi i k.n / S).
Power-of-two axes go through an iterative radix-2 FFT; any other length falls
back to a direct transform, which is fine because blocks are small. No
external FFT library is involved, so the codec stays self-contained.

The concentration score of a block is the mass of its top M spectral
magnitudes over the total: close to 1 means the block is nearly a pure tone
(or constant), close to 0 means its energy is spread wide.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Spectrum:
    """Magnitudes of the unnormalized DFT of one block, same shape as the block."""

    magnitudes: np.ndarray


@dataclass(frozen=True)
class ConcentrationScore:
    value: float
    m_top: int

    def __post_init__(self):
        if not 0.0 < self.value <= 1.0:
            raise ValueError(f"concentration must be in (0, 1], got {self.value}")


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev = (rev << 1) | ((idx >> b) & 1)
    return rev


def _fft_pow2(a: np.ndarray) -> np.ndarray:
    """Iterative radix-2 FFT over the last axis of a (..., S) complex array."""
    s = a.shape[-1]
    a = a[..., _bit_reverse_indices(s)]
    half = 1
    while half < s:
        step = half * 2
        tw = np.exp((-1j * np.pi / half) * np.arange(half))
        v = a.reshape(*a.shape[:-1], s // step, step)
        even = v[..., :half]
        odd = v[..., half:] * tw
        a = np.concatenate([even + odd, even - odd], axis=-1).reshape(*a.shape)
        half = step
    return a


def _dft_direct(a: np.ndarray) -> np.ndarray:
    """O(S^2) transform over the last axis, for non-power-of-two lengths."""
    s = a.shape[-1]
    k = np.arange(s)
    w = np.exp((-2j * np.pi / s) * np.outer(k, k))
    return a @ w.T


def _transform_axis(a: np.ndarray, axis: int) -> np.ndarray:
    a = np.moveaxis(a, axis, -1)
    s = a.shape[-1]
    a = np.ascontiguousarray(a)
    if s & (s - 1) == 0 and s > 0:
        a = _fft_pow2(a)
    else:
        a = _dft_direct(a)
    return np.moveaxis(a, -1, axis)


def dft(block: np.ndarray) -> np.ndarray:
    """Unnormalized DFT over every axis of the array. Returns complex128."""
    if block.size == 0:
        raise ValueError("cannot transform an empty block")
    if not np.all(np.isfinite(block)):
        raise ValueError("block contains non-finite samples")
    out = block.astype(np.complex128)
    for axis in range(out.ndim):
        out = _transform_axis(out, axis)
    return out


def dft_magnitude(block: np.ndarray) -> Spectrum:
    """Spectral magnitudes |DFT(block)| over every axis of the array."""
    return Spectrum(np.abs(dft(block)))


def volume_spectrum(arr: np.ndarray, n_spatial: int) -> Spectrum:
    """Magnitudes over the spatial axes of an (*dims, channels) array.

    Channels pool by root-sum-square so Parseval carries over unchanged.
    """
    if arr.ndim != n_spatial + 1:
        raise ValueError(f"expected {n_spatial} spatial axes plus channels")
    if arr.shape[-1] == 1:
        return dft_magnitude(arr[..., 0])
    energy = np.zeros(arr.shape[:-1])
    for ch in range(arr.shape[-1]):
        energy += np.abs(dft(arr[..., ch])) ** 2
    return Spectrum(np.sqrt(energy))


def concentration(spec: Spectrum, m_top: int = 1, power: float = 1.0) -> ConcentrationScore:
    """Share of spectral mass held by the M largest bins.

    Magnitudes are summed as-is by default; power=2 sums |X|^2 instead (an
    ablation knob). Ties rank by lower flat bin index. Both sums run over the
    same sorted vector, so M = bin count gives exactly 1.0. An all-zero
    spectrum scores 1.0 by convention and is logged, since a constant block
    concentrates trivially.
    """
    if m_top < 1:
        raise ValueError(f"m_top must be >= 1, got {m_top}")
    if m_top > spec.magnitudes.size:
        raise ValueError(
            f"m_top {m_top} exceeds the {spec.magnitudes.size} spectrum bins"
        )
    vals = spec.magnitudes.ravel()
    if power != 1.0:
        vals = vals**power
    total_zero = not np.any(vals)
    if total_zero:
        log.info("all-zero spectrum; concentration defaults to 1.0")
        return ConcentrationScore(1.0, m_top)
    # stable argsort on the negated values: descending, ties by lower index
    order = np.argsort(-vals, kind="stable")
    ranked = vals[order]
    top = float(ranked[: min(m_top, ranked.size)].sum())
    total = float(ranked.sum())
    return ConcentrationScore(min(top / total, 1.0), m_top)
