"""Oversampled coded diffraction patterns and ptychographic acquisition.

A pattern is |F|^2 of an m x m exit wave sampled on the (2m-1) x (2m-1)
frequency grid L, which is exactly the zero-padded length-(2m-1) DFT per
axis. That sampling rate recovers the autocorrelation of the exit wave, the
property the forward-model oracle tests pin down.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from . import __version__
from .core import ComplexField, GridSpec, Point, ShapeError, block_of, restrict
from .scheme import ScanScheme, scheme_from_dict, scheme_to_dict

log = logging.getLogger("ptychocert.forward")

NEG_CLAMP_SLACK = 1e-12


@dataclass
class ExitWave:
    """Masked object block mu^t ⊙ f^t in block coordinates, tagged by its shift."""

    field: ComplexField
    shift: Point

    @property
    def m(self) -> int:
        return self.field.side


@dataclass
class DiffractionPattern:
    """(2m-1)^2 nonnegative intensities on the oversampling grid L."""

    m: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        side = 2 * self.m - 1
        if vals.shape != (side, side):
            raise ShapeError(f"pattern must be {side} x {side}, got {vals.shape}")
        floor = -NEG_CLAMP_SLACK * max(vals.max(initial=0.0), 1.0)
        if vals.min(initial=0.0) < floor:
            raise ValueError("pattern has negative values beyond rounding slack")
        if (vals < 0).any():
            log.debug("clamping %d negative rounding residues", int((vals < 0).sum()))
            vals = np.where(vals < 0, 0.0, vals)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)


@dataclass
class PtychoDataset:
    """One diffraction pattern per shift, in scheme order, plus provenance."""

    scheme: ScanScheme
    patterns: Tuple[DiffractionPattern, ...]
    meta: Dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.patterns) != len(self.scheme):
            raise ShapeError("pattern count must equal the number of shifts")
        ms = {p.m for p in self.patterns}
        if len(ms) > 1:
            raise ShapeError(f"patterns mix block sizes {ms}")


def exit_wave(mask: ComplexField, obj: ComplexField, t, grid: GridSpec) -> ExitWave:
    """Componentwise product of the shifted mask and the object restriction."""
    if mask.data.shape != (grid.m, grid.m):
        raise ShapeError(f"mask shape {mask.data.shape} does not match m={grid.m}")
    if obj.data.shape != (grid.n, grid.n):
        raise ShapeError(f"object shape {obj.data.shape} does not match n={grid.n}")
    t = grid.canonical_shift(t)
    blk = restrict(obj, block_of(grid, t))
    return ExitWave(ComplexField(mask.data * blk.data, origin=t), t)


def diffract(w: Union[ExitWave, ComplexField]) -> DiffractionPattern:
    """Squared Fourier magnitude of an exit wave on the grid L.

    values(omega) = |sum_k w(k) exp(-2i pi k.omega)|^2 at omega_j in
    {0, 1/(2m-1), ..., (2m-2)/(2m-1)}, computed as the zero-padded
    (2m-1)-point transform per axis.
    """
    f = w.field if isinstance(w, ExitWave) else w
    m = f.side
    side = 2 * m - 1
    spectrum = np.fft.fft2(f.data, s=(side, side))
    return DiffractionPattern(m, np.abs(spectrum) ** 2)


def thread_count() -> int:
    """Worker cap from PTYCHO_THREADS; defaults to 1 (serial)."""
    try:
        return max(1, int(os.environ.get("PTYCHO_THREADS", "1")))
    except ValueError:
        return 1


def acquire(scheme: ScanScheme, mask: ComplexField, obj: ComplexField,
            meta: Optional[Dict] = None) -> PtychoDataset:
    """Diffraction pattern of the masked block at every shift, in scheme order.

    Per-shift work is pure and assembled by index, so the result is identical
    for any worker count.
    """
    grid = scheme.grid

    def one(t):
        return diffract(exit_wave(mask, obj, t, grid))

    workers = thread_count()
    if workers == 1 or len(scheme) == 1:
        patterns = tuple(one(t) for t in scheme.shifts)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            patterns = tuple(pool.map(one, scheme.shifts))
    return PtychoDataset(scheme, patterns, dict(meta or {}))


def data_distance(d1: PtychoDataset, d2: PtychoDataset) -> float:
    """Max over shifts of ||p1 - p2||_2 / max(||p1||_2, ||p2||_2); 0 iff equal."""
    if len(d1.patterns) != len(d2.patterns):
        raise ShapeError("datasets have different shift counts")
    worst = 0.0
    for a, b in zip(d1.patterns, d2.patterns):
        if a.m != b.m:
            raise ShapeError("datasets have different block sizes")
        na = float(np.linalg.norm(a.values))
        nb = float(np.linalg.norm(b.values))
        denom = max(na, nb)
        if denom == 0.0:
            continue
        worst = max(worst, float(np.linalg.norm(a.values - b.values)) / denom)
    return worst


# --- dataset directory layout --------------------------------------------------
#
# <dir>/manifest.json            scheme, gamma, seeds, boundary, tool version
# <dir>/patterns/patt_<k>.f64    raw little-endian float64, row-major,
#                                (2m-1)^2 entries, k zero-padded to 4 digits

FORMAT_VERSION = 1


def save_dataset(dirpath, ds: PtychoDataset) -> None:
    root = Path(dirpath)
    (root / "patterns").mkdir(parents=True, exist_ok=True)
    side = 2 * ds.scheme.grid.m - 1
    manifest = {
        "format_version": FORMAT_VERSION,
        "tool": "ptychocert",
        "tool_version": __version__,
        "boundary": ds.scheme.grid.boundary,
        "pattern_side": side,
        "scheme": scheme_to_dict(ds.scheme),
    }
    manifest.update(ds.meta)
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for k, patt in enumerate(ds.patterns):
        (root / "patterns" / f"patt_{k:04d}.f64").write_bytes(
            patt.values.astype("<f8").tobytes())


def load_dataset(dirpath) -> PtychoDataset:
    root = Path(dirpath)
    manifest = json.loads((root / "manifest.json").read_text())
    scheme = scheme_from_dict(manifest["scheme"])
    m = scheme.grid.m
    side = 2 * m - 1
    patterns = []
    for k in range(len(scheme)):
        raw = np.frombuffer((root / "patterns" / f"patt_{k:04d}.f64").read_bytes(),
                            dtype="<f8")
        if raw.size != side * side:
            raise ShapeError(f"pattern {k}: expected {side * side} values, got {raw.size}")
        patterns.append(DiffractionPattern(m, raw.reshape(side, side)))
    meta = {k: v for k, v in manifest.items() if k not in ("scheme",)}
    return PtychoDataset(scheme, tuple(patterns), meta)
