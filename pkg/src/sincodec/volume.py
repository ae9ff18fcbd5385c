"""Dense intensity volumes: raw file I/O, normalization, block slicing.

A volume is a little-endian u8 or u16 grid in row-major order (last axis
fastest) with an explicit trailing channel axis. Blocks are axis-aligned
sub-grids addressed by voxel offset and extent.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

DTYPES = {"u8": np.dtype("u1"), "u16": np.dtype("<u2")}
DTYPE_BITS = {"u8": 8, "u16": 16}
DTYPE_MAX = {"u8": 255, "u16": 65535}


@dataclass(frozen=True)
class IntensityNorm:
    """Affine map sending raw intensity lo -> -1.0 and hi -> +1.0."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"degenerate intensity range: lo={self.lo}, hi={self.hi}")


@dataclass(frozen=True)
class BlockRegion:
    """Axis-aligned sub-grid: voxel origin, per-axis extent, tree level (1 = root)."""

    origin: tuple[int, ...]
    extent: tuple[int, ...]
    level: int = 1

    def __post_init__(self):
        if len(self.origin) != len(self.extent):
            raise ValueError("origin and extent rank mismatch")
        if any(o < 0 for o in self.origin) or any(e < 1 for e in self.extent):
            raise ValueError(f"bad region origin={self.origin} extent={self.extent}")
        if self.level < 1:
            raise ValueError(f"level must be >= 1, got {self.level}")

    @property
    def ndim(self) -> int:
        return len(self.origin)

    @property
    def voxels(self) -> int:
        return int(np.prod(self.extent))

    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(o, o + e) for o, e in zip(self.origin, self.extent))


@dataclass
class VolumeTensor:
    """Raw intensity grid. data has shape (*dims, channels), dtype u8 or u16 LE."""

    data: np.ndarray
    norm: IntensityNorm

    def __post_init__(self):
        name = dtype_name(self.data.dtype)
        if name is None:
            raise ValueError(f"unsupported dtype {self.data.dtype}; need u8 or u16")
        if not 2 <= self.data.ndim - 1 <= 3:
            raise ValueError(
                f"volumes are 2-D or 3-D grids; got {self.data.ndim - 1} spatial axes"
            )

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape[:-1]

    @property
    def channels(self) -> int:
        return self.data.shape[-1]

    @property
    def ndim_spatial(self) -> int:
        return self.data.ndim - 1

    @property
    def dtype_name(self) -> str:
        return dtype_name(self.data.dtype)

    @property
    def voxels(self) -> int:
        """Total sample count, channels included."""
        return int(self.data.size)

    @property
    def source_bits(self) -> int:
        return self.voxels * DTYPE_BITS[self.dtype_name]


def dtype_name(dt: np.dtype) -> str | None:
    for name, cand in DTYPES.items():
        if dt == cand:
            return name
    return None


def default_norm(dtype: str) -> IntensityNorm:
    """Full dtype range: lo = 0, hi = dtype max."""
    return IntensityNorm(0.0, float(DTYPE_MAX[dtype]))


def data_norm(v: VolumeTensor) -> IntensityNorm:
    """Observed min/max of the data. Raises on constant volumes."""
    lo = float(v.data.min())
    hi = float(v.data.max())
    return IntensityNorm(lo, hi)


def load_raw(
    path: str | Path,
    dims: tuple[int, ...],
    dtype: str,
    channels: int = 1,
    norm: IntensityNorm | None = None,
) -> VolumeTensor:
    """Read a headerless raw volume. File size must match dims exactly."""
    if dtype not in DTYPES:
        raise ValueError(f"unsupported dtype {dtype!r}; need u8 or u16")
    if channels < 1:
        raise ValueError(f"channels must be >= 1, got {channels}")
    raw = Path(path).read_bytes()
    expected = int(np.prod(dims)) * channels * (DTYPE_BITS[dtype] // 8)
    if len(raw) != expected:
        raise ValueError(
            f"{path}: size mismatch, expected {expected} bytes for "
            f"dims={'x'.join(map(str, dims))} dtype={dtype} channels={channels}, "
            f"got {len(raw)}"
        )
    data = np.frombuffer(raw, dtype=DTYPES[dtype]).reshape(*dims, channels).copy()
    return VolumeTensor(data, norm or default_norm(dtype))


def save_raw(v: VolumeTensor, path: str | Path) -> None:
    """Write the grid back out, little-endian, row-major, no header."""
    Path(path).write_bytes(np.ascontiguousarray(v.data).tobytes())


def normalize_array(arr: np.ndarray, norm: IntensityNorm) -> np.ndarray:
    """Map raw intensities through 2(x - lo)/(hi - lo) - 1, clamped to [-1, 1]."""
    out = (arr.astype(np.float64) - norm.lo) * (2.0 / (norm.hi - norm.lo)) - 1.0
    return np.clip(out, -1.0, 1.0)


def normalize(v: VolumeTensor, norm: IntensityNorm | None = None) -> np.ndarray:
    return normalize_array(v.data, norm or v.norm)


def denormalize(arr: np.ndarray, norm: IntensityNorm) -> np.ndarray:
    """Inverse of normalize_array, back to the raw intensity scale (float)."""
    return norm.lo + (arr.astype(np.float64) + 1.0) * ((norm.hi - norm.lo) / 2.0)


def quantize(arr: np.ndarray, dtype: str) -> np.ndarray:
    """Round a raw-scale float array to the storage dtype, clamped to its range."""
    return np.clip(np.rint(arr), 0, DTYPE_MAX[dtype]).astype(DTYPES[dtype])


def extract_block(v: VolumeTensor, region: BlockRegion) -> VolumeTensor:
    """Copy one block out. Region must lie fully inside the volume."""
    _check_bounds(v.dims, region)
    return VolumeTensor(v.data[region.slices()].copy(), v.norm)


def paste_block(dest: np.ndarray, block: np.ndarray, region: BlockRegion) -> None:
    """Write a block (spatial dims + channel axis) into dest in place."""
    _check_bounds(dest.shape[: region.ndim], region)
    dest[region.slices()] = block


def _check_bounds(dims: tuple[int, ...], region: BlockRegion) -> None:
    if region.ndim != len(dims):
        raise ValueError(f"region rank {region.ndim} != volume rank {len(dims)}")
    for o, e, s in zip(region.origin, region.extent, dims):
        if o + e > s:
            raise ValueError(
                f"region origin={region.origin} extent={region.extent} "
                f"exceeds volume dims={dims}"
            )


def pad_volume(v: VolumeTensor, target_dims: tuple[int, ...]) -> VolumeTensor:
    """Edge-replicate pad up to target_dims (each target >= current)."""
    if any(t < d for t, d in zip(target_dims, v.dims)):
        raise ValueError(f"pad target {target_dims} smaller than dims {v.dims}")
    pad = [(0, t - d) for t, d in zip(target_dims, v.dims)] + [(0, 0)]
    return VolumeTensor(np.pad(v.data, pad, mode="edge"), v.norm)


def crop_volume(v: VolumeTensor, target_dims: tuple[int, ...]) -> VolumeTensor:
    """Crop down to target_dims, keeping the origin corner."""
    if any(t > d for t, d in zip(target_dims, v.dims)):
        raise ValueError(f"crop target {target_dims} larger than dims {v.dims}")
    sl = tuple(slice(0, t) for t in target_dims)
    return VolumeTensor(v.data[sl].copy(), v.norm)
