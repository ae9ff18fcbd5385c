"""Command line front end.

Subcommands: compress, decompress, analyze, eval, theory. Volumes travel as
headerless little-endian raw files, so every command that reads one needs
--dims (AxBxC, slowest axis first) and --dtype. Reports go to stdout as
key=value lines (compress, decompress) or CSV (analyze, eval, theory).

Exit codes: 0 success, 1 pipeline failure (bad data, infeasible budget,
malformed archive), 2 usage errors (argparse).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time

import numpy as np

from . import allocation, codec, metrics, partition, theory
from .codec import ArchiveError, CompressedArchive, EncodeConfig
from .trainer import TrainConfig
from .volume import (
    DTYPES,
    VolumeTensor,
    crop_volume,
    load_raw,
    pad_volume,
    save_raw,
)

log = logging.getLogger(__name__)


def _parse_dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(t) for t in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must look like 64x64x64, got {text!r}")
    if len(dims) not in (2, 3) or any(d < 1 for d in dims):
        raise argparse.ArgumentTypeError(f"dims must be 2 or 3 positive sizes, got {text!r}")
    return dims


def _parse_taus(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"thresholds must be comma-separated numbers, got {text!r}")


def _parse_betas(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"betas must be comma-separated numbers, got {text!r}")


def _add_volume_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dims", type=_parse_dims, required=True,
                   help="grid sizes, slowest axis first, e.g. 64x64x64 or 512x512")
    p.add_argument("--dtype", choices=sorted(DTYPES), default="u8")
    p.add_argument("--channels", type=int, default=1)


def _add_partition_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--partition", choices=("adaptive", "equidistant", "none"),
                   default="adaptive")
    p.add_argument("--levels", type=int, default=None,
                   help="octree depth; default keeps the smallest block side at 16")
    p.add_argument("--ep-level", type=int, default=None,
                   help="level for --partition equidistant (default: deepest)")
    p.add_argument("--top-m", type=int, default=1,
                   help="spectral peaks counted by the concentration score")
    p.add_argument("--concentration-power", type=float, default=1.0,
                   help="magnitude exponent in the concentration score (2 = energy)")
    p.add_argument("--max-blocks", type=int, default=50)


def build_parser() -> argparse.ArgumentParser:
    root = argparse.ArgumentParser(
        prog="sci", description="Sinusoidal-network compression of volumetric grids."
    )
    root.add_argument("--log", default="warning",
                      choices=("debug", "info", "warning", "error"))
    sub = root.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compress", help="fit block networks and write an archive")
    c.add_argument("input", help="raw volume file")
    c.add_argument("output", help="archive file (or directory with --directory)")
    _add_volume_args(c)
    g = c.add_mutually_exclusive_group(required=True)
    g.add_argument("--ratio", type=float, help="source bits / archive bits target")
    g.add_argument("--bpv", type=float, help="archive bits per voxel target")
    _add_partition_args(c)
    c.add_argument("--alloc", choices=allocation.ALLOC_MODES, default="spectrum")
    c.add_argument("--layers", type=int, default=7, help="affine layers per network")
    c.add_argument("--fr", type=float, default=2.2, help="first-layer funnel ratio")
    c.add_argument("--w0", type=float, default=20.0, help="sine frequency scale")
    c.add_argument("--taper", action="store_true",
                   help="shrink body widths stepwise instead of keeping them flat")
    c.add_argument("--param-bits", type=int, choices=(16, 32), default=16)
    c.add_argument("--norm", choices=("dtype", "data"), default="dtype",
                   help="intensity range: full dtype span or observed min/max")
    c.add_argument("--coords", choices=("block", "global"), default="block")
    c.add_argument("--dim-adjust", choices=("reject", "pad", "crop"), default="reject",
                   help="what to do when dims do not divide into the requested levels")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--iterations", type=int, default=5000)
    c.add_argument("--batch-size", type=int, default=4096)
    c.add_argument("--lr", type=float, default=1e-3)
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--directory", action="store_true",
                   help="write the file-per-block layout instead of one archive file")
    c.add_argument("--no-report", action="store_true",
                   help="skip the decode pass that measures psnr")

    d = sub.add_parser("decompress", help="reconstruct a raw volume from an archive")
    d.add_argument("input", help="archive file (or directory with --directory)")
    d.add_argument("output", help="raw volume file to write")
    d.add_argument("--directory", action="store_true")
    d.add_argument("--no-deblock", action="store_true")
    d.add_argument("--deblock-tau", type=float, default=None,
                   help="seam threshold in raw intensity units (default 2%% of range)")

    a = sub.add_parser("analyze", help="print per-node concentration scores as CSV")
    a.add_argument("input")
    _add_volume_args(a)
    _add_partition_args(a)
    a.add_argument("--emit-partition", action="store_true",
                   help="also solve the partition and list the chosen blocks")
    a.add_argument("--emit-plan", action="store_true",
                   help="also print the parameter allocation (needs --ratio or --bpv)")
    g = a.add_mutually_exclusive_group()
    g.add_argument("--ratio", type=float)
    g.add_argument("--bpv", type=float)
    a.add_argument("--alloc", choices=allocation.ALLOC_MODES, default="spectrum")
    a.add_argument("--layers", type=int, default=7)
    a.add_argument("--fr", type=float, default=2.2)
    a.add_argument("--w0", type=float, default=20.0)
    a.add_argument("--taper", action="store_true")
    a.add_argument("--param-bits", type=int, choices=(16, 32), default=16)
    a.add_argument("--norm", choices=("dtype", "data"), default="dtype")

    e = sub.add_parser("eval", help="decode an archive and score it against the original")
    e.add_argument("original", help="raw volume file")
    e.add_argument("archive", help="archive file (or directory with --directory)")
    _add_volume_args(e)
    e.add_argument("--directory", action="store_true")
    e.add_argument("--no-deblock", action="store_true")
    e.add_argument("--deblock-tau", type=float, default=None)
    e.add_argument("--taus", type=_parse_taus, default=(200.0, 500.0),
                   help="binarization thresholds for the accuracy columns")

    t = sub.add_parser("theory", help="predicted vs measured harmonic amplitudes")
    t.add_argument("--beta", type=_parse_betas, default=(0.5, 1.0, 2.0),
                   help="modulation depths, comma separated")
    t.add_argument("--max-order", type=int, default=7)
    t.add_argument("--samples", type=int, default=256)
    t.add_argument("--cycles", type=int, default=1)

    return root


def _load_archive(path: str, directory: bool) -> CompressedArchive:
    if directory:
        return CompressedArchive.load_directory(path)
    return CompressedArchive.load(path)


def _adjusted(v: VolumeTensor, levels: int, mode: str) -> VolumeTensor:
    """Pad or crop so every dim divides into 2^(levels-1) blocks of side >= 4."""
    multiple = 1 << (levels - 1)
    floor_dim = 4 * multiple
    if all(d % multiple == 0 and d >= floor_dim for d in v.dims):
        return v
    if mode == "reject":
        raise ValueError(
            f"dims {v.dims} do not support {levels} levels; "
            f"use --dim-adjust pad/crop, or --levels"
        )
    if mode == "pad":
        target = tuple(max(floor_dim, -(-d // multiple) * multiple) for d in v.dims)
        return pad_volume(v, target)
    target = tuple((d // multiple) * multiple for d in v.dims)
    if any(t < floor_dim for t in target):
        raise ValueError(f"dims {v.dims} too small to crop for {levels} levels")
    return crop_volume(v, target)


def _encode_config(args: argparse.Namespace) -> EncodeConfig:
    return EncodeConfig(
        ratio=args.ratio,
        bpv=args.bpv,
        partition=args.partition,
        levels=args.levels,
        ep_level=args.ep_level,
        m_top=args.top_m,
        concentration_power=args.concentration_power,
        max_blocks=args.max_blocks,
        alloc=args.alloc,
        layers=args.layers,
        fr=args.fr,
        w0=args.w0,
        param_bits=args.param_bits,
        norm_mode=args.norm,
        coords_mode=args.coords,
        taper=args.taper,
        train=TrainConfig(
            lr=args.lr,
            iterations=args.iterations,
            batch_size=args.batch_size,
            seed=args.seed,
        ),
        workers=args.workers,
    )


def _cmd_compress(args: argparse.Namespace) -> int:
    t0 = time.monotonic()
    v = load_raw(args.input, args.dims, args.dtype, args.channels)
    levels = args.levels or partition.default_levels(v.dims)
    orig_dims = v.dims
    v = _adjusted(v, levels, args.dim_adjust)
    cfg = _encode_config(args)
    if cfg.levels is None:
        cfg = dataclasses.replace(cfg, levels=levels)
    padded = args.dim_adjust == "pad" and v.dims != orig_dims
    archive = codec.encode(v, cfg, orig_dims if padded else None)
    if args.directory:
        archive.save_directory(args.output)
    else:
        archive.save(args.output)

    n_params = sum(
        len(rec.payload) // (2 if args.param_bits == 16 else 4)
        for rec in archive.records
    )
    voxels = int(np.prod(orig_dims)) * args.channels
    print(f"blocks={len(archive.records)}")
    print(f"params={n_params}")
    print(f"bytes={archive.byte_size}")
    print(f"bpv={archive.bit_size / voxels:.6f}")
    if not args.no_report:
        recon = codec.decode(archive)
        # padding decodes back to orig dims; cropping leaves the smaller grid
        reference = crop_volume(v, recon.dims)
        print(f"psnr={metrics.psnr(reference, recon):.4f}")
    print(f"seconds={time.monotonic() - t0:.2f}")
    return 0


def _cmd_decompress(args: argparse.Namespace) -> int:
    archive = _load_archive(args.input, args.directory)
    v = codec.decode(
        archive, deblock_filter=not args.no_deblock, deblock_tau=args.deblock_tau
    )
    save_raw(v, args.output)
    print(f"dims={'x'.join(map(str, v.dims))}")
    print(f"channels={v.channels}")
    print(f"dtype={v.dtype_name}")
    print(f"bytes={v.data.nbytes}")
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    v = load_raw(args.input, args.dims, args.dtype, args.channels)
    levels = args.levels or partition.default_levels(v.dims)
    tree = partition.build_tree(v, levels, args.top_m, args.concentration_power)
    print("level,origin,extent,D")
    for level in range(1, levels + 1):
        for i in range(partition.node_count(level, tree.n_dim)):
            region = partition.node_region(v.dims, level, i)
            o = "x".join(map(str, region.origin))
            e = "x".join(map(str, region.extent))
            print(f"{level},{o},{e},{tree.score(level, i):.6f}")
    if not (args.emit_partition or args.emit_plan):
        return 0

    if args.partition == "equidistant":
        solution = partition.equidistant_solution(tree, args.ep_level or levels)
    elif args.partition == "none":
        solution = partition.equidistant_solution(tree, 1)
    else:
        solution = partition.solve_partition(tree, args.max_blocks)
    if args.emit_partition:
        print("name,level,D")
        for (level, index), region, score in zip(
            solution.selected, solution.regions, solution.scores
        ):
            print(f"{codec.render_block_name(region)},{level},{score:.6f}")
    if args.emit_plan:
        if args.ratio is None and args.bpv is None:
            raise ValueError("--emit-plan needs --ratio or --bpv")
        cfg = EncodeConfig(
            ratio=args.ratio, bpv=args.bpv, partition=args.partition,
            levels=levels, ep_level=args.ep_level, m_top=args.top_m,
            concentration_power=args.concentration_power,
            max_blocks=args.max_blocks, alloc=args.alloc, layers=args.layers,
            fr=args.fr, w0=args.w0, param_bits=args.param_bits,
            norm_mode=args.norm, taper=args.taper,
        )
        plan = codec.plan_encode(v, cfg)
        print("name,params,hidden,widths")
        for p in plan.plans:
            widths = "x".join(map(str, p.arch.widths))
            hidden = p.arch.widths[1] if len(p.arch.widths) > 2 else p.arch.widths[0]
            print(f"{codec.render_block_name(p.region)},{p.arch.n_params},{hidden},{widths}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    orig = load_raw(args.original, args.dims, args.dtype, args.channels)
    archive = _load_archive(args.archive, args.directory)
    recon = codec.decode(
        archive, deblock_filter=not args.no_deblock, deblock_tau=args.deblock_tau
    )
    report = metrics.evaluate(orig, recon, archive.bit_size, args.taus)
    print(report.csv())
    return 0


def _cmd_theory(args: argparse.Namespace) -> int:
    print("beta,m,freq,predicted,measured")
    for beta in args.beta:
        rows = theory.odd_harmonic_table(beta, args.max_order, args.samples, args.cycles)
        for m, freq, predicted, measured in rows:
            print(f"{beta:g},{m},{freq:.6f},{predicted:.12f},{measured:.12f}")
    return 0


_COMMANDS = {
    "compress": _cmd_compress,
    "decompress": _cmd_decompress,
    "analyze": _cmd_analyze,
    "eval": _cmd_eval,
    "theory": _cmd_theory,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, ArchiveError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
