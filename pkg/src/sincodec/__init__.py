"""Volumetric compression with small sinusoidal networks.

A volume is split into blocks by an exact octree partition search driven by
how concentrated each block's spectrum is; each block gets a parameter
budget in proportion to its size over its concentration, a funnel-shaped
sine network is fit to it, and the binary16 weights plus a tiny header
become the archive. Decoding runs the networks back over the voxel grid.
"""

from .allocation import (
    ALLOC_MODES,
    BitBudget,
    BlockPlan,
    BudgetError,
    allocate,
    budget_from_bpv,
    budget_from_ratio,
    min_params,
    solve_architecture,
    total_params,
    widths_for,
)
from .codec import (
    ArchiveError,
    BlockRecord,
    CompressedArchive,
    EncodeConfig,
    decode,
    deblock,
    encode,
    parse_block_name,
    plan_encode,
    render_block_name,
)
from .inr import ArchitectureSpec, FunnelNetwork, from_flat, init
from .metrics import RateReport, accuracy, bpv, evaluate, psnr, ssim
from .partition import (
    PartitionSolution,
    PartitionTree,
    build_tree,
    coverage_exact,
    default_levels,
    equidistant_partition,
    solve_partition,
    solve_partition_bruteforce,
)
from .spectrum import concentration, dft, dft_magnitude, volume_spectrum
from .theory import (
    bessel_j,
    harmonic_amplitudes,
    measure_concentration,
    modulated_tone,
    odd_harmonic_table,
    predict_spectrum,
)
from .trainer import TrainConfig, adamax_step, block_coords, block_seed, fit_block
from .volume import (
    BlockRegion,
    IntensityNorm,
    VolumeTensor,
    load_raw,
    normalize,
    quantize,
    save_raw,
)

__version__ = "0.1.0"

__all__ = [
    "ALLOC_MODES",
    "ArchitectureSpec",
    "ArchiveError",
    "BitBudget",
    "BlockPlan",
    "BlockRecord",
    "BlockRegion",
    "BudgetError",
    "CompressedArchive",
    "EncodeConfig",
    "FunnelNetwork",
    "IntensityNorm",
    "PartitionSolution",
    "PartitionTree",
    "RateReport",
    "TrainConfig",
    "VolumeTensor",
    "accuracy",
    "adamax_step",
    "allocate",
    "bessel_j",
    "block_coords",
    "block_seed",
    "bpv",
    "budget_from_bpv",
    "budget_from_ratio",
    "build_tree",
    "concentration",
    "coverage_exact",
    "deblock",
    "decode",
    "default_levels",
    "dft",
    "dft_magnitude",
    "encode",
    "equidistant_partition",
    "evaluate",
    "fit_block",
    "from_flat",
    "harmonic_amplitudes",
    "init",
    "load_raw",
    "measure_concentration",
    "min_params",
    "modulated_tone",
    "normalize",
    "odd_harmonic_table",
    "parse_block_name",
    "plan_encode",
    "predict_spectrum",
    "psnr",
    "quantize",
    "render_block_name",
    "save_raw",
    "solve_architecture",
    "solve_partition",
    "solve_partition_bruteforce",
    "ssim",
    "total_params",
    "volume_spectrum",
    "widths_for",
]
