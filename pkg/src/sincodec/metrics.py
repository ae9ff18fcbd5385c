"""Reconstruction quality and rate metrics on raw-intensity volumes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .volume import DTYPE_MAX, VolumeTensor

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def _check_pair(a: VolumeTensor, b: VolumeTensor) -> float:
    if a.data.shape != b.data.shape or a.dtype_name != b.dtype_name:
        raise ValueError(
            f"volumes differ: {a.data.shape}/{a.dtype_name} vs {b.data.shape}/{b.dtype_name}"
        )
    return float(DTYPE_MAX[a.dtype_name])


def psnr(a: VolumeTensor, b: VolumeTensor) -> float:
    """10 log10(R^2 / MSE) with R the dtype maximum; +inf for identical volumes."""
    peak = _check_pair(a, b)
    mse = float(np.mean((a.data.astype(np.float64) - b.data.astype(np.float64)) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_kernel() -> np.ndarray:
    half = SSIM_WINDOW // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2.0 * SSIM_SIGMA**2))
    return k / k.sum()


def _filter2d(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = correlate1d(img, kernel, axis=0, mode="constant")
    out = correlate1d(out, kernel, axis=1, mode="constant")
    half = SSIM_WINDOW // 2
    return out[half:-half, half:-half]


def _ssim_2d(a: np.ndarray, b: np.ndarray, peak: float) -> float:
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ValueError(f"slice {a.shape} smaller than the {SSIM_WINDOW}-tap window")
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    k = _gaussian_kernel()
    mu_a = _filter2d(a, k)
    mu_b = _filter2d(b, k)
    var_a = _filter2d(a * a, k) - mu_a**2
    var_b = _filter2d(b * b, k) - mu_b**2
    cov = _filter2d(a * b, k) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def ssim(a: VolumeTensor, b: VolumeTensor) -> float:
    """Mean structural similarity over 2-D slices along the first axis.

    Gaussian window (11 taps, sigma 1.5), valid region only, stabilizers
    C1 = (0.01 R)^2 and C2 = (0.03 R)^2. 2-D volumes are a single slice.
    """
    peak = _check_pair(a, b)
    xa = a.data.astype(np.float64)
    xb = b.data.astype(np.float64)
    scores = []
    for ch in range(a.channels):
        if a.ndim_spatial == 2:
            scores.append(_ssim_2d(xa[..., ch], xb[..., ch], peak))
        else:
            for z in range(a.dims[0]):
                scores.append(_ssim_2d(xa[z, ..., ch], xb[z, ..., ch], peak))
    return float(np.mean(scores))


def accuracy(a: VolumeTensor, b: VolumeTensor, tau: float) -> float:
    """Agreement rate of the binarizations x >= tau.

    tau may sit outside the dtype range on purpose: both sides then binarize
    identically and the score is 1.0.
    """
    _check_pair(a, b)
    return float(np.mean((a.data >= tau) == (b.data >= tau)))


def bpv(bit_count: int, voxels: int) -> float:
    """Bits per voxel, channels counted as voxels."""
    if voxels < 1:
        raise ValueError("voxel count must be positive")
    return bit_count / voxels


@dataclass(frozen=True)
class RateReport:
    bpv: float | None
    psnr_db: float
    ssim: float
    accuracy: dict[float, float] = field(default_factory=dict)

    def csv(self) -> str:
        taus = sorted(self.accuracy)
        header = "bpv,psnr,ssim," + ",".join(f"acc@{t:g}" for t in taus)
        bpv_cell = "" if self.bpv is None else f"{self.bpv:.6f}"
        cells = [bpv_cell, f"{self.psnr_db:.4f}", f"{self.ssim:.6f}"]
        cells += [f"{self.accuracy[t]:.6f}" for t in taus]
        return header + "\n" + ",".join(cells)


def evaluate(
    orig: VolumeTensor,
    recon: VolumeTensor,
    archive_bits: int | None = None,
    taus: tuple[float, ...] = (200.0, 500.0),
) -> RateReport:
    rate = None if archive_bits is None else bpv(archive_bits, orig.voxels)
    return RateReport(
        rate,
        psnr(orig, recon),
        ssim(orig, recon),
        {t: accuracy(orig, recon, t) for t in taus},
    )
