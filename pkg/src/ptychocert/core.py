"""Grids, blocks, pixel sets, complex fields and deterministic random generation.

Conventions used throughout the package: a pixel is an integer pair
``(k, l)`` indexing arrays as ``data[k, l]`` (row-major, so ``height`` is the
extent of the first coordinate and ``width`` the extent of the second). The
object lives on the n x n grid, the mask on an m x m block, and under the
torus boundary all coordinates are taken mod n.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Tuple, Union

import numpy as np

Point = Tuple[int, int]

TORUS = "torus"
DIRICHLET = "dirichlet-zero"
BOUNDARIES = (TORUS, DIRICHLET)


class OutOfDomainError(ValueError):
    """A shifted block leaves the object grid under dirichlet-zero boundary."""


class ShapeError(ValueError):
    """Array shape does not match what the operation requires."""


class EmptySetError(ValueError):
    """Operation requires a nonempty pixel set."""


@dataclass(frozen=True)
class GridSpec:
    """Object grid of side n with an m x m scanning block and a boundary rule."""

    n: int
    m: int
    boundary: str = TORUS

    def __post_init__(self):
        if not (1 <= self.m <= self.n):
            raise ValueError(f"need 1 <= m <= n, got m={self.m}, n={self.n}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @property
    def torus(self) -> bool:
        return self.boundary == TORUS

    def canonical_shift(self, t: Iterable[int]) -> Point:
        """Canonicalize a shift: componentwise mod n on the torus, as-is otherwise."""
        t1, t2 = (int(v) for v in t)
        if self.torus:
            return (t1 % self.n, t2 % self.n)
        return (t1, t2)

    def wrap(self, p: Iterable[int]) -> Point:
        p1, p2 = (int(v) for v in p)
        return (p1 % self.n, p2 % self.n)


@dataclass(frozen=True)
class PixelSet:
    """A set of pixels on a grid, canonicalized per the boundary rule.

    ``anchor`` is filled by :func:`block_of` so that block sets remember where
    they were cut from even after a torus wrap.
    """

    grid: GridSpec
    members: frozenset
    anchor: Optional[Point] = field(default=None, compare=False)

    @classmethod
    def of(cls, grid: GridSpec, points: Iterable[Iterable[int]],
           anchor: Optional[Point] = None) -> "PixelSet":
        canon = set()
        for p in points:
            p1, p2 = (int(v) for v in p)
            if grid.torus:
                canon.add((p1 % grid.n, p2 % grid.n))
            else:
                if not (0 <= p1 < grid.n and 0 <= p2 < grid.n):
                    raise OutOfDomainError(f"pixel {(p1, p2)} outside Z_{grid.n}^2")
                canon.add((p1, p2))
        return cls(grid, frozenset(canon), anchor)

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, p) -> bool:
        return self.grid.canonical_shift(p) in self.members

    def sorted_members(self):
        return sorted(self.members)

    def intersection(self, other: "PixelSet") -> "PixelSet":
        return PixelSet(self.grid, self.members & other.members)

    def union(self, other: "PixelSet") -> "PixelSet":
        return PixelSet(self.grid, self.members | other.members)

    def translate(self, t: Iterable[int]) -> "PixelSet":
        t1, t2 = (int(v) for v in t)
        return PixelSet.of(self.grid, ((p1 + t1, p2 + t2) for p1, p2 in self.members))

    def as_mask(self) -> np.ndarray:
        """Boolean n x n occupancy array."""
        out = np.zeros((self.grid.n, self.grid.n), dtype=bool)
        for p1, p2 in self.members:
            out[p1, p2] = True
        return out


def block_of(grid: GridSpec, t: Iterable[int]) -> PixelSet:
    """Pixels of the shifted block M^t = M^0 + t.

    Under the torus boundary the block wraps mod n; under dirichlet-zero the
    block must lie inside the grid or an OutOfDomainError is raised.
    """
    t1, t2 = grid.canonical_shift(t)
    if not grid.torus:
        if t1 < 0 or t2 < 0 or t1 + grid.m > grid.n or t2 + grid.m > grid.n:
            raise OutOfDomainError(
                f"block at {(t1, t2)} exceeds Z_{grid.n}^2 under {DIRICHLET}")
    pts = ((t1 + k, t2 + l) for k in range(grid.m) for l in range(grid.m))
    return PixelSet.of(grid, pts, anchor=(t1, t2))


def _axis_hull(values, n: int, torus: bool) -> Tuple[int, int]:
    """Inclusive [lo, hi] hull of one coordinate, lifted past the largest gap
    on a torus so the hull is as tight as possible."""
    vals = sorted(set(values))
    if not torus:
        return vals[0], vals[-1]
    if len(vals) == n:
        return 0, n - 1
    # find largest circular gap; lift the window to start just after it
    best_gap, best_start = -1, vals[0]
    for i, v in enumerate(vals):
        nxt = vals[(i + 1) % len(vals)]
        gap = (nxt - v - 1) % n
        if gap > best_gap:
            best_gap, best_start = gap, nxt
    span = (vals[(vals.index(best_start) - 1) % len(vals)] - best_start) % n
    return best_start, best_start + span


def box_hull(s: PixelSet) -> PixelSet:
    """Smallest axis-aligned rectangle containing the set.

    On a torus the hull is computed in the lift where the set avoids its
    largest per-axis gap, then canonicalized back.
    """
    if not s.members:
        raise EmptySetError("box_hull of empty pixel set")
    grid = s.grid
    lo1, hi1 = _axis_hull([p[0] for p in s.members], grid.n, grid.torus)
    lo2, hi2 = _axis_hull([p[1] for p in s.members], grid.n, grid.torus)
    pts = ((a, b) for a in range(lo1, hi1 + 1) for b in range(lo2, hi2 + 1))
    return PixelSet.of(grid, pts, anchor=(lo1 % grid.n, lo2 % grid.n) if grid.torus
                       else (lo1, lo2))


@dataclass
class ComplexField:
    """Immutable 2-D complex array anchored at ``origin`` in the object grid."""

    data: np.ndarray
    origin: Point = (0, 0)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.complex128)
        if arr.ndim != 2:
            raise ShapeError(f"field must be 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field entries must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def side(self) -> int:
        if self.height != self.width:
            raise ShapeError(f"field is not square: {self.data.shape}")
        return self.height

    def __eq__(self, other) -> bool:
        return (isinstance(other, ComplexField)
                and self.origin == other.origin
                and self.data.shape == other.data.shape
                and bool(np.array_equal(self.data, other.data)))


@dataclass(frozen=True)
class MaskSpec:
    """Random phase mask parameters.

    ``gamma`` controls the phase range (-gamma*pi, gamma*pi]; amplitudes are
    strictly positive ("the mask is transparent"). The phase density is
    uniform on its support, a concrete choice flagged in generation reports.
    """

    m: int
    gamma: float = 1.0
    amplitude: Union[str, np.ndarray] = "unimodular"
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if isinstance(self.amplitude, str):
            if self.amplitude != "unimodular":
                raise ValueError(f"unknown amplitude kind {self.amplitude!r}")
        else:
            amp = np.asarray(self.amplitude, dtype=float)
            if amp.shape != (self.m, self.m):
                raise ShapeError("amplitude array must be m x m")
            if not np.all(amp > 0):
                raise ValueError("mask amplitudes must be strictly positive")


def _philox(seed: int) -> np.random.Generator:
    # Counter-based stream keyed by the seed; pixels consume consecutive
    # counter slots in row-major order, so generation is schedule-independent.
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def random_phase_mask(spec: MaskSpec) -> ComplexField:
    """m x m mask with i.i.d. phases uniform on (-gamma*pi, gamma*pi].

    Deterministic in the seed: the same spec always yields a bit-identical
    field, regardless of threading or call order elsewhere.
    """
    rng = _philox(spec.seed)
    u = rng.random(spec.m * spec.m).reshape(spec.m, spec.m)
    phases = spec.gamma * np.pi * (1.0 - 2.0 * u)  # maps [0,1) onto (-g*pi, g*pi]
    if isinstance(spec.amplitude, str):
        amp = np.ones((spec.m, spec.m))
    else:
        amp = np.asarray(spec.amplitude, dtype=float)
    return ComplexField(amp * np.exp(1j * phases))


def random_object(n: int, seed: int,
                  amplitude_range: Tuple[float, float] = (0.5, 1.5)) -> ComplexField:
    """Nonvanishing random n x n object: uniform amplitude and full-range phase."""
    lo, hi = amplitude_range
    if not (0.0 < lo <= hi):
        raise ValueError("amplitude range must be positive")
    rng = _philox(seed)
    u = rng.random(2 * n * n)
    amp = lo + (hi - lo) * u[: n * n].reshape(n, n)
    phases = np.pi * (1.0 - 2.0 * u[n * n:].reshape(n, n))
    return ComplexField(amp * np.exp(1j * phases))


def twin(f: ComplexField) -> ComplexField:
    """Conjugate spatial inversion of a square field within its block frame.

    out(k) = conj(in((m-1, m-1) - k)), an exact involution. This is the
    paper-style twin image re-anchored to the block so indices never leave
    Z_m^2; the residual translation is invisible to diffraction magnitudes.
    """
    f.side  # raises ShapeError when non-square
    out = np.conj(f.data[::-1, ::-1])
    return ComplexField(out, origin=f.origin)


def _block_anchor(block: PixelSet) -> Point:
    if block.anchor is not None:
        return block.anchor
    grid = block.grid
    a1, _ = _axis_hull([p[0] for p in block.members], grid.n, grid.torus)
    a2, _ = _axis_hull([p[1] for p in block.members], grid.n, grid.torus)
    return (a1 % grid.n, a2 % grid.n) if grid.torus else (a1, a2)


def restrict(obj: ComplexField, block: PixelSet) -> ComplexField:
    """Object values on an m x m block, in block coordinates.

    Torus blocks wrap mod n; dirichlet blocks read zero outside the grid
    (the object extended by zeros).
    """
    grid = block.grid
    m = grid.m
    if len(block) != m * m:
        raise ShapeError(f"block has {len(block)} pixels, expected {m * m}")
    if obj.data.shape != (grid.n, grid.n):
        raise ShapeError(f"object shape {obj.data.shape} does not match n={grid.n}")
    t1, t2 = _block_anchor(block)
    if grid.torus:
        idx1 = (t1 + np.arange(m)) % grid.n
        idx2 = (t2 + np.arange(m)) % grid.n
        out = obj.data[np.ix_(idx1, idx2)]
    else:
        out = np.zeros((m, m), dtype=np.complex128)
        i1 = np.arange(m) + t1
        i2 = np.arange(m) + t2
        ok1 = (i1 >= 0) & (i1 < grid.n)
        ok2 = (i2 >= 0) & (i2 < grid.n)
        out[np.ix_(ok1, ok2)] = obj.data[np.ix_(i1[ok1], i2[ok2])]
    return ComplexField(out, origin=(t1, t2))


# --- cf64 file format -------------------------------------------------------
#
# <name>.cf64 holds raw little-endian float64 (re, im) pairs, row-major, and
# <name>.cf64.json is the sidecar {kind, width, height, origin, dtype}.

CF64_DTYPE = "c128le"


def save_field(path, f: ComplexField, kind: str = "complex_field") -> None:
    path = Path(path)
    path.write_bytes(f.data.astype("<c16").tobytes())
    sidecar = {
        "kind": kind,
        "width": f.width,
        "height": f.height,
        "origin": list(f.origin),
        "dtype": CF64_DTYPE,
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def load_field(path) -> ComplexField:
    path = Path(path)
    meta = json.loads(Path(str(path) + ".json").read_text())
    if meta.get("dtype") != CF64_DTYPE:
        raise ValueError(f"unsupported dtype {meta.get('dtype')!r}")
    raw = np.frombuffer(path.read_bytes(), dtype="<c16")
    h, w = int(meta["height"]), int(meta["width"])
    if raw.size != h * w:
        raise ShapeError(f"{path}: expected {h * w} values, found {raw.size}")
    data = raw.reshape(h, w).astype(np.complex128)
    return ComplexField(data, origin=tuple(meta.get("origin", (0, 0))))
