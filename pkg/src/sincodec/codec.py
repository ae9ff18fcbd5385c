"""The archive format and the end-to-end compress/decompress pipelines.

Single-file container, little-endian throughout:

    magic "SCI1" | meta_len u32 | meta utf-8 | block_count u32 | records...

Each record: name_len u16 | name | widths_count u8 | widths u16[] |
payload_len u32 | payload. The payload is the block network's parameters in
layer order, weights row-major then bias per layer, as binary16 (or float32
when param_bits=32). The metadata section is flat key=value lines; values
from closed sets are stored as small enum codes (see docs/FORMAT.md).

Block names spell out inclusive voxel ranges per axis, depth/height/width
order, e.g. "d_0_15-h_256_383-w_0_127"; 2-D volumes drop the d segment.
Decoding is order-independent: names alone place every block.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import allocation, partition
from .allocation import BitBudget, BlockPlan, BudgetError
from .inr import ArchitectureSpec, from_flat
from .trainer import TrainConfig, block_coords, fit_block
from .volume import (
    DTYPE_MAX,
    BlockRegion,
    IntensityNorm,
    VolumeTensor,
    crop_volume,
    data_norm,
    denormalize,
    normalize,
    quantize,
)

log = logging.getLogger(__name__)

MAGIC = b"SCI1"
FORMAT_VERSION = 1

DTYPE_CODES = {"u8": 0, "u16": 1}
DTYPE_FROM_CODE = {v: k for k, v in DTYPE_CODES.items()}
PARAM_BITS_CODES = {16: 0, 32: 1}
PARAM_BITS_FROM_CODE = {v: k for k, v in PARAM_BITS_CODES.items()}
COORDS_CODES = {"block": 0, "global": 1}
COORDS_FROM_CODE = {v: k for k, v in COORDS_CODES.items()}

_AXIS_PREFIXES = {3: ("d", "h", "w"), 2: ("h", "w")}
_NAME_SEGMENT = re.compile(r"^([dhw])_(\d+)_(\d+)$")

DEBLOCK_TAU_FRACTION = 0.02


class ArchiveError(ValueError):
    """Malformed or truncated archive bytes."""


def render_block_name(region: BlockRegion) -> str:
    prefixes = _AXIS_PREFIXES.get(region.ndim)
    if prefixes is None:
        raise ValueError(f"block names cover 2-D and 3-D regions, not {region.ndim}-D")
    parts = []
    for prefix, o, e in zip(prefixes, region.origin, region.extent):
        parts.append(f"{prefix}_{o}_{o + e - 1}")
    return "-".join(parts)


def parse_block_name(name: str) -> BlockRegion:
    """Inverse of render_block_name. The level is not encoded; it parses as 1."""
    segments = name.split("-")
    prefixes = _AXIS_PREFIXES.get(len(segments))
    if prefixes is None:
        raise ArchiveError(f"block name {name!r} must have 2 or 3 segments")
    origin, extent = [], []
    for segment, expected in zip(segments, prefixes):
        m = _NAME_SEGMENT.match(segment)
        if m is None or m.group(1) != expected:
            raise ArchiveError(f"bad segment {segment!r} in block name {name!r}")
        lo, hi = int(m.group(2)), int(m.group(3))
        if hi < lo:
            raise ArchiveError(f"empty range {segment!r} in block name {name!r}")
        origin.append(lo)
        extent.append(hi - lo + 1)
    return BlockRegion(tuple(origin), tuple(extent))


@dataclass(frozen=True)
class BlockRecord:
    name: str
    widths: tuple[int, ...]
    payload: bytes


@dataclass
class CompressedArchive:
    meta: dict[str, str]
    records: list[BlockRecord]

    def to_bytes(self) -> bytes:
        meta_text = "\n".join(f"{k}={v}" for k, v in self.meta.items()).encode()
        out = bytearray()
        out += MAGIC
        out += len(meta_text).to_bytes(4, "little")
        out += meta_text
        out += len(self.records).to_bytes(4, "little")
        for rec in self.records:
            name = rec.name.encode()
            out += len(name).to_bytes(2, "little")
            out += name
            out += len(rec.widths).to_bytes(1, "little")
            for w in rec.widths:
                out += int(w).to_bytes(2, "little")
            out += len(rec.payload).to_bytes(4, "little")
            out += rec.payload
        return bytes(out)

    @property
    def byte_size(self) -> int:
        return len(self.to_bytes())

    @property
    def bit_size(self) -> int:
        return 8 * self.byte_size

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, blob: bytes) -> "CompressedArchive":
        off = 0

        def take(n: int, what: str) -> bytes:
            nonlocal off
            if off + n > len(blob):
                raise ArchiveError(f"truncated archive at byte {off}: expected {what}")
            piece = blob[off : off + n]
            off += n
            return piece

        if take(4, "magic") != MAGIC:
            raise ArchiveError("bad magic at byte 0: not an SCI1 archive")
        meta_len = int.from_bytes(take(4, "metadata length"), "little")
        meta_text = take(meta_len, "metadata").decode()
        meta: dict[str, str] = {}
        for line in meta_text.splitlines():
            if not line:
                continue
            if "=" not in line:
                raise ArchiveError(f"metadata line without '=': {line!r}")
            k, v = line.split("=", 1)
            meta[k] = v
        count = int.from_bytes(take(4, "block count"), "little")
        records = []
        for n in range(count):
            name_len = int.from_bytes(take(2, f"name length of block {n}"), "little")
            name = take(name_len, f"name of block {n}").decode()
            widths_count = take(1, f"widths count of block {name!r}")[0]
            widths = tuple(
                int.from_bytes(take(2, f"widths of block {name!r}"), "little")
                for _ in range(widths_count)
            )
            payload_len = int.from_bytes(
                take(4, f"payload length of block {name!r}"), "little"
            )
            payload = take(payload_len, f"payload of block {name!r}")
            records.append(BlockRecord(name, widths, payload))
        if off != len(blob):
            raise ArchiveError(f"{len(blob) - off} trailing bytes after block {count - 1}")
        return cls(meta, records)

    @classmethod
    def load(cls, path: str | Path) -> "CompressedArchive":
        return cls.from_bytes(Path(path).read_bytes())

    def save_directory(self, dirpath: str | Path) -> None:
        """File-per-block layout: metadata.txt plus one <name>.bin per block."""
        d = Path(dirpath)
        d.mkdir(parents=True, exist_ok=True)
        lines = [f"{k}={v}" for k, v in self.meta.items()]
        for rec in self.records:
            lines.append(f"widths:{rec.name}={','.join(map(str, rec.widths))}")
            (d / f"{rec.name}.bin").write_bytes(rec.payload)
        (d / "metadata.txt").write_text("\n".join(lines))

    @classmethod
    def load_directory(cls, dirpath: str | Path) -> "CompressedArchive":
        d = Path(dirpath)
        meta: dict[str, str] = {}
        widths: dict[str, tuple[int, ...]] = {}
        for line in (d / "metadata.txt").read_text().splitlines():
            if not line:
                continue
            k, v = line.split("=", 1)
            if k.startswith("widths:"):
                widths[k[len("widths:") :]] = tuple(int(t) for t in v.split(","))
            else:
                meta[k] = v
        records = []
        for name in meta.get("blocks", "").split(","):
            if not name:
                continue
            records.append(
                BlockRecord(name, widths[name], (d / f"{name}.bin").read_bytes())
            )
        return cls(meta, records)


@dataclass(frozen=True)
class EncodeConfig:
    """Everything the compressor needs besides the volume itself."""

    ratio: float | None = None
    bpv: float | None = None
    partition: str = "adaptive"  # adaptive | equidistant | none
    levels: int | None = None  # tree depth, None = auto from dims
    ep_level: int | None = None  # equidistant level, None = deepest
    m_top: int = 1
    concentration_power: float = 1.0
    max_blocks: int = 50
    alloc: str = "spectrum"
    layers: int = 7
    fr: float = 2.2
    w0: float = 20.0
    param_bits: int = 16
    norm_mode: str = "dtype"  # dtype | data
    coords_mode: str = "block"  # block | global
    taper: bool = False
    train: TrainConfig = field(default_factory=TrainConfig)
    workers: int = 1


@dataclass
class EncodePlan:
    """Partition, budget and per-block plans, fixed before any training."""

    norm: IntensityNorm
    levels: int
    solution: partition.PartitionSolution
    budget: BitBudget
    plans: list[BlockPlan]
    meta: dict[str, str]


def _target_bits(v: VolumeTensor, cfg: EncodeConfig) -> int:
    if (cfg.ratio is None) == (cfg.bpv is None):
        raise ValueError("exactly one of ratio and bpv must be set")
    if cfg.ratio is not None:
        if cfg.ratio <= 0:
            raise ValueError(f"ratio must be positive, got {cfg.ratio}")
        target = int(v.source_bits / cfg.ratio)
    else:
        if cfg.bpv <= 0:
            raise ValueError(f"bpv must be positive, got {cfg.bpv}")
        target = int(cfg.bpv * v.voxels)
    if target < 1:
        raise ValueError(
            f"rate target rounds to {target} bits; lower the ratio or raise the bpv"
        )
    return target


def _build_meta(
    v: VolumeTensor,
    cfg: EncodeConfig,
    norm: IntensityNorm,
    names: list[str],
    orig_dims: tuple[int, ...] | None = None,
) -> dict[str, str]:
    return {
        "version": str(FORMAT_VERSION),
        "ndim": str(v.ndim_spatial),
        "dims": ",".join(map(str, v.dims)),
        "orig_dims": ",".join(map(str, orig_dims or v.dims)),
        "channels": str(v.channels),
        "dtype": str(DTYPE_CODES[v.dtype_name]),
        "norm_lo": repr(norm.lo),
        "norm_hi": repr(norm.hi),
        "w0": repr(cfg.w0),
        "fr": repr(cfg.fr),
        "layers": str(cfg.layers),
        "param_bits": str(PARAM_BITS_CODES[cfg.param_bits]),
        "coords": str(COORDS_CODES[cfg.coords_mode]),
        "blocks": ",".join(names),
    }


def _overhead_bits(meta: dict[str, str], names: list[str], layers: int) -> int:
    """Exact container size, payloads excluded: a two-pass serialization probe."""
    skeleton = CompressedArchive(
        meta, [BlockRecord(name, (0,) * layers, b"") for name in names]
    )
    return skeleton.bit_size


def plan_encode(
    v: VolumeTensor, cfg: EncodeConfig, orig_dims: tuple[int, ...] | None = None
) -> EncodePlan:
    """Partition, measure overhead, and allocate; no training happens here.

    Adaptive mode caps the block count by what the parameter budget can
    feed (a block below the minimum viable network is useless), and shrinks
    the cap further if exact overhead still leaves allocation infeasible.
    orig_dims records pre-padding dims so decode can crop back.
    """
    norm = data_norm(v) if cfg.norm_mode == "data" else v.norm
    target_bits = _target_bits(v, cfg)
    n = v.ndim_spatial
    floor_params = allocation.min_params(n, v.channels, cfg.layers, cfg.fr)

    def finish(solution: partition.PartitionSolution, levels: int) -> EncodePlan:
        names = [render_block_name(r) for r in solution.regions]
        meta = _build_meta(v, cfg, norm, names, orig_dims)
        overhead = _overhead_bits(meta, names, cfg.layers)
        budget = BitBudget(v.source_bits, v.source_bits / target_bits, overhead, cfg.param_bits)
        plans = allocation.allocate(
            solution,
            budget,
            cfg.alloc,
            in_dim=n,
            out_dim=v.channels,
            layers=cfg.layers,
            fr=cfg.fr,
            w0=cfg.w0,
            taper=cfg.taper,
        )
        return EncodePlan(norm, levels, solution, budget, plans, meta)

    if cfg.partition == "none":
        return finish(partition.equidistant_partition(v, 1, cfg.m_top, cfg.concentration_power), 1)
    if cfg.partition == "equidistant":
        levels = cfg.ep_level or cfg.levels or partition.default_levels(v.dims)
        return finish(
            partition.equidistant_partition(v, levels, cfg.m_top, cfg.concentration_power),
            levels,
        )
    if cfg.partition != "adaptive":
        raise ValueError(f"unknown partition mode {cfg.partition!r}")

    levels = cfg.levels or partition.default_levels(v.dims)
    tree = partition.build_tree(v, levels, cfg.m_top, cfg.concentration_power)
    # a too-low cap silently forecloses better tilings, while a too-high one
    # just trips the retry loop below, so bound the per-block cost tightly:
    # framed name and its listing copy (worst case from the dims), widths,
    # and the two length fields
    name_bound = sum(2 * len(str(d - 1)) + 3 for d in v.dims) + v.ndim_spatial - 1
    per_block_overhead = 8 * (2 + name_bound + 1 + 2 * cfg.layers + 4 + name_bound + 1)
    base = _overhead_bits(_build_meta(v, cfg, norm, []), [], cfg.layers)
    cap_estimate = (target_bits - base) // (floor_params * cfg.param_bits + per_block_overhead)
    cap = max(1, min(cfg.max_blocks, int(cap_estimate)))
    while True:
        solution = partition.solve_partition(tree, cap)
        try:
            return finish(solution, levels)
        except BudgetError:
            if solution.n_blocks <= 1:
                raise
            cap = solution.n_blocks - 1
            log.info("allocation infeasible; retrying with at most %d blocks", cap)


def _fit_task(args):
    block, arch, region, tcfg, coords_mode, full_dims = args
    net, loss = fit_block(block, arch, region, tcfg, coords_mode, full_dims)
    return net.to_flat(), loss


def _payload_dtype(param_bits: int) -> np.dtype:
    return np.dtype("<f2") if param_bits == 16 else np.dtype("<f4")


def encode(
    v: VolumeTensor, cfg: EncodeConfig, orig_dims: tuple[int, ...] | None = None
) -> CompressedArchive:
    """Compress a volume: partition, allocate, fit each block, serialize.

    Identical inputs, flags and seed give byte-identical archives for any
    worker count: per-block seeds derive from the block region, and records
    are emitted in partition order regardless of completion order.
    """
    plan = plan_encode(v, cfg, orig_dims)
    x = normalize(v, plan.norm)
    tasks = [
        (
            np.ascontiguousarray(x[p.region.slices()]),
            p.arch,
            p.region,
            cfg.train,
            cfg.coords_mode,
            v.dims,
        )
        for p in plan.plans
    ]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_fit_task, tasks))
    else:
        results = [_fit_task(t) for t in tasks]

    dtype = _payload_dtype(cfg.param_bits)
    records = []
    for p, (flat, loss) in zip(plan.plans, results):
        log.debug("block %s: %d params, train mse %.3e", p.region, flat.size, loss)
        records.append(
            BlockRecord(
                render_block_name(p.region),
                p.arch.widths,
                flat.astype(dtype).tobytes(),
            )
        )
    return CompressedArchive(plan.meta, records)


def _meta_int(meta: dict[str, str], key: str) -> int:
    try:
        return int(meta[key])
    except KeyError:
        raise ArchiveError(f"metadata missing key {key!r}")
    except ValueError:
        raise ArchiveError(f"metadata key {key!r} is not an integer: {meta[key]!r}")


def _meta_float(meta: dict[str, str], key: str) -> float:
    try:
        return float(meta[key])
    except KeyError:
        raise ArchiveError(f"metadata missing key {key!r}")
    except ValueError:
        raise ArchiveError(f"metadata key {key!r} is not a number: {meta[key]!r}")


def decode(
    archive: CompressedArchive,
    deblock_filter: bool = True,
    deblock_tau: float | None = None,
    chunk: int = 65536,
) -> VolumeTensor:
    """Reconstruct the volume: run every block network on its voxel grid,
    denormalize, optionally deblock, and quantize back to the source dtype."""
    meta = archive.meta
    ndim = _meta_int(meta, "ndim")
    dims = tuple(int(t) for t in meta["dims"].split(","))
    orig_dims = tuple(int(t) for t in meta["orig_dims"].split(","))
    channels = _meta_int(meta, "channels")
    dtype = DTYPE_FROM_CODE.get(_meta_int(meta, "dtype"))
    param_bits = PARAM_BITS_FROM_CODE.get(_meta_int(meta, "param_bits"))
    coords_mode = COORDS_FROM_CODE.get(_meta_int(meta, "coords"))
    if len(dims) != ndim or dtype is None or param_bits is None or coords_mode is None:
        raise ArchiveError("inconsistent archive metadata")
    norm = IntensityNorm(_meta_float(meta, "norm_lo"), _meta_float(meta, "norm_hi"))
    w0 = _meta_float(meta, "w0")
    fr = _meta_float(meta, "fr")
    layers = _meta_int(meta, "layers")

    listed = set(meta.get("blocks", "").split(","))
    seen = {rec.name for rec in archive.records}
    if meta.get("blocks") and listed != seen:
        raise ArchiveError("record names do not match the metadata partition listing")

    regions = []
    hits = np.zeros(dims, dtype=np.uint8)
    for rec in archive.records:
        region = parse_block_name(rec.name)
        if region.ndim != ndim:
            raise ArchiveError(f"block {rec.name!r} has wrong dimensionality")
        if any(o + e > d for o, e, d in zip(region.origin, region.extent, dims)):
            raise ArchiveError(f"block {rec.name!r} exceeds volume dims {dims}")
        hits[region.slices()] += 1
        regions.append(region)
    if len(archive.records) == 0 or not np.all(hits == 1):
        raise ArchiveError("blocks do not tile the volume exactly once")

    out = np.empty((*dims, channels), dtype=np.float32)
    pdtype = _payload_dtype(param_bits)
    for rec, region in zip(archive.records, regions):
        if len(rec.widths) != layers:
            raise ArchiveError(
                f"block {rec.name!r} has {len(rec.widths)} widths, expected {layers}"
            )
        spec = ArchitectureSpec(rec.widths, ndim, w0, fr)
        expect = spec.n_params * pdtype.itemsize
        if len(rec.payload) != expect:
            raise ArchiveError(
                f"block {rec.name!r} payload is {len(rec.payload)} bytes, expected {expect}"
            )
        flat = np.frombuffer(rec.payload, dtype=pdtype).astype(np.float32)
        net = from_flat(spec, flat)
        coords = block_coords(region, coords_mode, dims).astype(np.float32)
        values = np.empty((len(coords), channels), dtype=np.float32)
        for lo in range(0, len(coords), chunk):
            values[lo : lo + chunk] = net.forward(coords[lo : lo + chunk])
        out[region.slices()] = values.reshape(*region.extent, channels)

    raw = denormalize(out, norm)
    if deblock_filter and len(regions) > 1:
        tau = deblock_tau if deblock_tau is not None else DEBLOCK_TAU_FRACTION * DTYPE_MAX[dtype]
        raw = deblock_array(raw, regions, tau)
    vol = VolumeTensor(quantize(raw, dtype), norm)
    if orig_dims != dims:
        vol = crop_volume(vol, orig_dims)
    return vol


def deblock_array(
    arr: np.ndarray, regions: list[BlockRegion], tau: float
) -> np.ndarray:
    """Smooth inter-block seams on a raw-scale float array.

    For every boundary-crossing line [p1 p0 | q0 q1], if |p0-q0| < tau and
    both one-sided steps stay under tau/2, p0 and q0 become 3-tap averages
    across the seam. Real edges (big steps) pass through untouched, and no
    sample ever moves by more than tau. Each face belongs to the block whose
    origin starts it, so every face is filtered exactly once, in a fixed
    order.
    """
    arr = arr.copy()
    ndim = regions[0].ndim if regions else arr.ndim - 1
    for region in sorted(regions, key=lambda r: (r.origin, r.extent)):
        base = [slice(o, o + e) for o, e in zip(region.origin, region.extent)]
        for axis in range(ndim):
            s = region.origin[axis]
            # the 4-tap stencil needs two samples on each side of the seam
            if s < 2 or s + 1 >= arr.shape[axis]:
                continue

            def face(k: int) -> tuple:
                sl = list(base)
                sl[axis] = k
                return tuple(sl)

            p1 = arr[face(s - 2)]
            p0 = arr[face(s - 1)]
            q0 = arr[face(s)]
            q1 = arr[face(s + 1)]
            mask = (
                (np.abs(p0 - q0) < tau)
                & (np.abs(p1 - p0) < tau / 2)
                & (np.abs(q1 - q0) < tau / 2)
            )
            new_p0 = (p1 + p0 + q0) / 3.0
            new_q0 = (p0 + q0 + q1) / 3.0
            arr[face(s - 1)] = np.where(mask, new_p0, p0)
            arr[face(s)] = np.where(mask, new_q0, q0)
    return arr


def deblock(
    v: VolumeTensor, regions: list[BlockRegion], tau: float | None = None
) -> VolumeTensor:
    """Deblock a quantized volume directly (decode applies the float-domain
    version before quantization; this is the standalone form)."""
    if tau is None:
        tau = DEBLOCK_TAU_FRACTION * DTYPE_MAX[v.dtype_name]
    raw = deblock_array(v.data.astype(np.float64), regions, tau)
    return VolumeTensor(quantize(raw, v.dtype_name), v.norm)
