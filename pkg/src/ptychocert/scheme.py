"""Scan schemes: construction, connectivity analysis, and mixing certification.

The mixing machinery works on the discrete torus Z_n^2. A reduction vector
``a = p1*s1 - p2*s2`` built from a shift triplet earns a place in a
certificate when its coverage region (the union, over all scheme shifts and
all monotone lattice paths, of the translated validity sets) is the whole
torus. The scheme is certified mixing when the integer lattice generated by
such vectors is all of Z^2, witnessed by explicit unit-determinant
combinations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    TORUS,
    GridSpec,
    PixelSet,
    Point,
    block_of,
)


@dataclass(frozen=True)
class RasterParams:
    """Raster parameters: step tau, count q, and integer perturbations."""

    tau: int
    q: int
    delta1: Tuple[int, ...]
    delta2: Tuple[int, ...]


@dataclass(frozen=True)
class ScanScheme:
    """Ordered shift set T with t_0 = (0,0) on a grid."""

    grid: GridSpec
    shifts: Tuple[Point, ...]
    raster: Optional[RasterParams] = None

    def __post_init__(self):
        canon = tuple(self.grid.canonical_shift(t) for t in self.shifts)
        object.__setattr__(self, "shifts", canon)
        if not canon:
            raise ValueError("scheme has no shifts")
        if canon[0] != (0, 0):
            raise ValueError(f"t_0 must be (0,0), got {canon[0]}")
        if len(set(canon)) != len(canon):
            raise ValueError("shifts collide after canonicalization")
        if self.raster is not None:
            r = self.raster
            expect = tuple(
                self.grid.canonical_shift((r.tau * k + r.delta1[k], r.tau * l + r.delta2[l]))
                for k in range(r.q) for l in range(r.q))
            if expect != canon:
                raise ValueError("raster params do not reconstruct the shift list")

    def __len__(self) -> int:
        return len(self.shifts)

    def blocks(self) -> List[PixelSet]:
        return [block_of(self.grid, t) for t in self.shifts]


def raster_scheme(grid: GridSpec, tau: int) -> ScanScheme:
    """Raster scan t_kl = tau*(k, l), k,l = 0..q-1 with q = n/tau, row-major."""
    if not grid.torus:
        raise ValueError("raster schemes use the torus boundary")
    if tau <= 0 or grid.n % tau != 0:
        raise ValueError(f"tau={tau} must divide n={grid.n}")
    q = grid.n // tau
    shifts = tuple((tau * k, tau * l) for k in range(q) for l in range(q))
    params = RasterParams(tau, q, (0,) * q, (0,) * q)
    return ScanScheme(grid, shifts, params)


def perturbed_raster(grid: GridSpec, tau: int,
                     delta1: Sequence[int], delta2: Sequence[int]) -> ScanScheme:
    """Perturbed raster t_kl = tau*(k, l) + (delta1_k, delta2_l), mod n."""
    if not grid.torus:
        raise ValueError("perturbed raster schemes use the torus boundary")
    if tau <= 0 or grid.n % tau != 0:
        raise ValueError(f"tau={tau} must divide n={grid.n}")
    q = grid.n // tau
    d1 = tuple(int(v) for v in delta1)
    d2 = tuple(int(v) for v in delta2)
    if len(d1) != q or len(d2) != q:
        raise ValueError(f"need q={q} perturbations per axis, got {len(d1)}, {len(d2)}")
    if d1[0] != 0 or d2[0] != 0:
        raise ValueError("delta1[0] and delta2[0] must be 0 so that t_0 = (0,0)")
    shifts = tuple((tau * k + d1[k], tau * l + d2[l]) for k in range(q) for l in range(q))
    canon = [grid.canonical_shift(t) for t in shifts]
    if len(set(canon)) != len(canon):
        raise ValueError("perturbations collide: duplicate shifts after canonicalization")
    return ScanScheme(grid, shifts, RasterParams(tau, q, d1, d2))


# --- connectivity ------------------------------------------------------------


class UnionFind:
    def __init__(self, size: int):
        self.parent = list(range(size))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x: int, y: int) -> bool:
        px, py = self.find(x), self.find(y)
        if px == py:
            return False
        self.parent[max(px, py)] = min(px, py)
        return True


@dataclass
class ConnectivityReport:
    """Pairwise overlap counts and the connectivity strength of the scheme.

    ``strength`` is the largest s for which the s-connective reduced graph is
    connected, i.e. the bottleneck of a maximum spanning tree over the overlap
    weights. ``None`` means unbounded (single-block scheme).
    """

    edge_overlaps: Dict[Tuple[int, int], int]
    strength: Optional[int]
    connected_at: Dict[int, bool]
    strong: bool

    def to_dict(self) -> dict:
        return {
            "edge_overlaps": {f"{i}-{j}": c for (i, j), c in sorted(self.edge_overlaps.items())},
            "strength": self.strength,
            "connected_at": {str(s): v for s, v in sorted(self.connected_at.items())},
            "strong": self.strong,
        }


def connectivity(scheme: ScanScheme, support: PixelSet,
                 query_s: Iterable[int] = ()) -> ConnectivityReport:
    """Overlap counts |M^k ∩ M^l ∩ supp| and the max-spanning-tree bottleneck."""
    q = len(scheme)
    if q == 0:
        raise ValueError("empty scheme")
    n = scheme.grid.n
    sup = support.as_mask()
    blocks = np.zeros((q, n * n), dtype=np.float32)
    union_mask = np.zeros((n, n), dtype=bool)
    for i, t in enumerate(scheme.shifts):
        bm = block_of(scheme.grid, t).as_mask()
        union_mask |= bm
        blocks[i] = (bm & sup).reshape(-1)
    if not (sup <= union_mask).all():
        raise ValueError("support is not covered by the scheme blocks")
    counts = blocks @ blocks.T  # overlap pixel counts, exact in float32 for m^2 < 2^24
    overlaps = {(i, j): int(round(counts[i, j]))
                for i in range(q) for j in range(i + 1, q)}
    if q == 1:
        strength: Optional[int] = None
        connected = {int(s): True for s in query_s}
        return ConnectivityReport({}, strength, connected, True)
    edges = sorted(overlaps.items(), key=lambda kv: (-kv[1], kv[0]))
    uf = UnionFind(q)
    strength = None
    merged = 0
    for (i, j), w in edges:
        if uf.union(i, j):
            merged += 1
            strength = w if strength is None else min(strength, w)
            if merged == q - 1:
                break
    strength = int(strength)
    connected = {int(s): strength >= int(s) for s in query_s}
    return ConnectivityReport(overlaps, strength, connected, strength >= 2)


# --- lattice paths and validity sets -----------------------------------------


@dataclass(frozen=True)
class LatticePath:
    """Monotone directed path on Z^2 ending at the origin.

    Every step changes exactly one coordinate by 1 toward 0, so the path has
    |x0| + |y0| edges; these are the "shortest" reduction paths.
    """

    vertices: Tuple[Point, ...]

    def __post_init__(self):
        v = self.vertices
        if len(v) < 2 or v[-1] != (0, 0):
            raise ValueError("path must end at (0,0) and have at least one edge")
        for (x0, y0), (x1, y1) in zip(v, v[1:]):
            dx, dy = x1 - x0, y1 - y0
            ok_x = dy == 0 and abs(x1) == abs(x0) - 1 and x0 != 0
            ok_y = dx == 0 and abs(y1) == abs(y0) - 1 and y0 != 0
            if not (ok_x or ok_y):
                raise ValueError(f"non-monotone step {(x0, y0)} -> {(x1, y1)}")

    @property
    def start(self) -> Point:
        return self.vertices[0]

    @property
    def edges(self) -> List[Tuple[Point, Point]]:
        return list(zip(self.vertices, self.vertices[1:]))


def _toward_zero(v: int) -> int:
    return v - 1 if v > 0 else v + 1


def lattice_paths(start: Point) -> Tuple[LatticePath, ...]:
    """All monotone paths from ``start`` (any quadrant) to the origin."""
    x0, y0 = int(start[0]), int(start[1])
    if (x0, y0) == (0, 0):
        raise ValueError("start must differ from the origin")
    paths: List[LatticePath] = []

    def walk(prefix: List[Point]):
        x, y = prefix[-1]
        if (x, y) == (0, 0):
            paths.append(LatticePath(tuple(prefix)))
            return
        if x != 0:
            walk(prefix + [(_toward_zero(x), y)])
        if y != 0:
            walk(prefix + [(x, _toward_zero(y))])

    walk([(x0, y0)])
    return tuple(paths)


def enumerate_paths(p1: int, p2: int) -> Tuple[LatticePath, ...]:
    """Monotone paths from (p1, -p2) to (0,0); count = binomial(p1+p2, p1)."""
    if p1 < 0 or p2 < 0 or (p1 == 0 and p2 == 0):
        raise ValueError("need p1, p2 >= 0, not both 0")
    return lattice_paths((p1, -p2))


def _constraint_points(path: LatticePath) -> List[Point]:
    """Left or lower endpoint of every edge; these carry the validity blocks."""
    pts = []
    for (x0, y0), (x1, y1) in path.edges:
        if y0 == y1:  # horizontal edge
            pts.append((min(x0, x1), y0))
        else:  # vertical edge
            pts.append((x0, min(y0, y1)))
    return pts


def _shift_pixelset(ps: PixelSet, vec: Point) -> PixelSet:
    """Translate a pixel set; wraps on the torus, clips under dirichlet-zero."""
    grid = ps.grid
    v1, v2 = vec
    if grid.torus:
        return PixelSet.of(grid, ((p1 + v1, p2 + v2) for p1, p2 in ps.members))
    kept = [(p1 + v1, p2 + v2) for p1, p2 in ps.members
            if 0 <= p1 + v1 < grid.n and 0 <= p2 + v2 < grid.n]
    return PixelSet(grid, frozenset(kept))


def validity_set(path: LatticePath, s1: Point, s2: Point,
                 base_block: PixelSet) -> PixelSet:
    """Validity set of a reduction path.

    Intersects the base block shifted by -(x*s1 + y*s2) for the grid point
    (x, y) at the left or lower end of each path edge. May be empty.
    """
    result = None
    for x, y in _constraint_points(path):
        v = (x * s1[0] + y * s2[0], x * s1[1] + y * s2[1])
        shifted = _shift_pixelset(base_block, (-v[0], -v[1]))
        result = shifted if result is None else result.intersection(shifted)
        if not result.members:
            break
    return result


def min_rep(d: int, n: int) -> int:
    """Symmetric representative of d mod n in (-n/2, n/2]."""
    r = d % n
    return r - n if r > n // 2 else r


def shift_difference(scheme: ScanScheme, i: int, j: int) -> Point:
    """Minimal integer representative of t_i - t_j on the torus."""
    n = scheme.grid.n
    ti, tj = scheme.shifts[i], scheme.shifts[j]
    return (min_rep(ti[0] - tj[0], n), min_rep(ti[1] - tj[1], n))


# --- coverage regions ---------------------------------------------------------


def _roll(mask: np.ndarray, vec: Point) -> np.ndarray:
    return np.roll(mask, (vec[0], vec[1]), axis=(0, 1))


def _coverage_mask(scheme: ScanScheme, t_l0: Point, s1: Point, s2: Point,
                   p1: int, p2: int, a: Point) -> np.ndarray:
    """Boolean coverage region D on the torus, via bitset rolls."""
    n, m = scheme.grid.n, scheme.grid.m
    base = np.zeros((n, n), dtype=bool)
    base[:m, :m] = True
    ml0 = _roll(base, t_l0)
    inter = ml0 & _roll(ml0, (-a[0], -a[1]))
    out = np.zeros((n, n), dtype=bool)
    if not inter.any():
        return out
    for path in lattice_paths((p1, -p2)):
        sigma = ml0
        for x, y in _constraint_points(path):
            v = (x * s1[0] + y * s2[0], x * s1[1] + y * s2[1])
            sigma = sigma & _roll(ml0, (-v[0], -v[1]))
            if not sigma.any():
                break
        piece = inter & sigma
        if not piece.any():
            continue
        for t in scheme.shifts:
            out |= _roll(piece, (t[0] - t_l0[0], t[1] - t_l0[1]))
            if out.all():
                return out
    return out


def coverage_region(scheme: ScanScheme, triplet: Tuple[int, int, int],
                    p1: int, p2: int, a: Point) -> PixelSet:
    """Coverage region D of a reduction vector, pixel-exact on the torus.

    Requires a = p1*(t_l1 - t_l0) - p2*(t_l2 - t_l0) (mod n componentwise);
    the mixing property needs the result to equal the full torus.
    """
    if not scheme.grid.torus:
        raise ValueError("coverage regions are defined on the torus boundary")
    l0, l1, l2 = triplet
    if len({l0, l1, l2}) != 3:
        raise ValueError("triplet indices must be distinct")
    s1 = shift_difference(scheme, l1, l0)
    s2 = shift_difference(scheme, l2, l0)
    n = scheme.grid.n
    combo = (p1 * s1[0] - p2 * s2[0], p1 * s1[1] - p2 * s2[1])
    if ((combo[0] - a[0]) % n, (combo[1] - a[1]) % n) != (0, 0):
        raise ValueError(
            f"triplet violates the reduction identity: p1*s1 - p2*s2 = {combo}, a = {tuple(a)}")
    a_mod = (min_rep(a[0], n), min_rep(a[1], n))
    mask = _coverage_mask(scheme, scheme.shifts[l0], s1, s2, p1, p2, a_mod)
    pts = [(int(i), int(j)) for i, j in zip(*np.nonzero(mask))]
    return PixelSet.of(scheme.grid, pts)


# --- integer lattice reduction ------------------------------------------------


def _xgcd(a: int, b: int) -> Tuple[int, int, int]:
    if b == 0:
        return (abs(a), (1 if a >= 0 else -1) if a != 0 else 0, 0)
    g, x, y = _xgcd(b, a % b)
    return g, y, x - (a // b) * y


def hnf_with_transform(rows: Sequence[Point]):
    """Hermite normal form of stacked integer 2-vectors, with transform.

    Returns (h, u) where h = [[h00, h01], [0, h11]] spans the same lattice as
    ``rows`` and u is a list of integer coefficient vectors over the input
    rows producing the rows of h. h11 = 0 signals rank < 2.
    """
    k = len(rows)
    m = [[int(r[0]), int(r[1])] for r in rows]
    u = [[1 if i == j else 0 for j in range(k)] for i in range(k)]

    def rowop(i, j, col):
        # zero out m[j][col] against pivot m[i][col] via extended gcd
        a, b = m[i][col], m[j][col]
        g, x, y = _xgcd(a, b)
        if g == 0:
            return
        ai, bi = a // g, b // g
        mi = [x * m[i][c] + y * m[j][c] for c in range(2)]
        mj = [-bi * m[i][c] + ai * m[j][c] for c in range(2)]
        ui = [x * u[i][c] + y * u[j][c] for c in range(k)]
        uj = [-bi * u[i][c] + ai * u[j][c] for c in range(k)]
        m[i], m[j], u[i], u[j] = mi, mj, ui, uj

    pivot = None
    for i in range(k):
        if m[i][0] != 0:
            if pivot is None:
                pivot = i
            else:
                rowop(pivot, i, 0)
    if pivot is not None and pivot != 0:
        m[0], m[pivot] = m[pivot], m[0]
        u[0], u[pivot] = u[pivot], u[0]
    if m and m[0][0] < 0:
        m[0] = [-v for v in m[0]]
        u[0] = [-v for v in u[0]]

    pivot2 = None
    for i in range(1, k):
        if m[i][1] != 0:
            if pivot2 is None:
                pivot2 = i
            else:
                rowop(pivot2, i, 1)
    if pivot2 is not None and pivot2 != 1:
        m[1], m[pivot2] = m[pivot2], m[1]
        u[1], u[pivot2] = u[pivot2], u[1]
    if k >= 2 and m[1][1] < 0:
        m[1] = [-v for v in m[1]]
        u[1] = [-v for v in u[1]]

    h00 = m[0][0] if k >= 1 else 0
    h11 = m[1][1] if k >= 2 else 0
    h01 = m[0][1] if k >= 1 else 0
    if h11 != 0:
        qd = h01 // h11
        m[0] = [m[0][0], m[0][1] - qd * m[1][1]]
        u[0] = [u[0][c] - qd * u[1][c] for c in range(k)]
        h01 = m[0][1]
    h = [[h00, h01], [0, h11]]
    return h, u


def lattice_is_full(rows: Sequence[Point]) -> bool:
    h, _ = hnf_with_transform(rows)
    return h[0][0] == 1 and h[1][1] == 1


def lattice_index(rows: Sequence[Point]) -> Optional[int]:
    """Index [Z^2 : L(rows)], or None when the lattice has rank < 2."""
    h, _ = hnf_with_transform(rows)
    if h[0][0] == 0 or h[1][1] == 0:
        return None
    return abs(h[0][0] * h[1][1])


# --- mixing certification -----------------------------------------------------


@dataclass(frozen=True)
class CertEntry:
    """One certified reduction vector with its full witness."""

    triplet: Tuple[int, int, int]
    p1: int
    p2: int
    a: Point
    s1: Point
    s2: Point
    paths: Tuple[Tuple[Point, ...], ...]
    sigma_sizes: Tuple[int, ...]
    coverage_verified: bool = False

    def to_dict(self) -> dict:
        return {
            "triplet": list(self.triplet),
            "p1": self.p1, "p2": self.p2,
            "a": list(self.a), "s1": list(self.s1), "s2": list(self.s2),
            "paths": [[list(v) for v in p] for p in self.paths],
            "sigma_sizes": list(self.sigma_sizes),
            "coverage_verified": self.coverage_verified,
        }


@dataclass
class MixingCertificate:
    """Machine-checkable mixing witness, or a refusal with a reason."""

    certified: bool
    entries: Tuple[CertEntry, ...] = ()
    c1: Tuple[int, ...] = ()
    c2: Tuple[int, ...] = ()
    u1: Point = (1, 0)
    u2: Point = (0, 1)
    basis_inverse: Tuple[Tuple[int, int], Tuple[int, int]] = ((1, 0), (0, 1))
    refusal_reason: Optional[str] = None
    refusal_detail: Optional[dict] = None
    notes: str = ""

    def to_dict(self) -> dict:
        out = {"certified": self.certified, "notes": self.notes}
        if self.certified:
            out.update({
                "entries": [e.to_dict() for e in self.entries],
                "c1": list(self.c1), "c2": list(self.c2),
                "u1": list(self.u1), "u2": list(self.u2),
                "basis_inverse": [list(r) for r in self.basis_inverse],
            })
        else:
            out.update({
                "refusal_reason": self.refusal_reason,
                "refusal_detail": self.refusal_detail or {},
            })
        return out


_SEARCH_NOTE = ("search restricted to monotone (shortest) reduction paths and "
                "|p1|,|p2| <= max_p; a refusal means 'not certified', not "
                "'proven non-mixing', except for the structural common-factor case")


def _p_pairs(max_p: int) -> List[Tuple[int, int]]:
    pairs = [(p1, p2)
             for p1 in range(-max_p, max_p + 1)
             for p2 in range(-max_p, max_p + 1)
             if (p1, p2) != (0, 0)]
    pairs.sort(key=lambda p: (abs(p[0]) + abs(p[1]), p))
    return pairs


def certify_mixing(scheme: ScanScheme, max_p: int = 2,
                   neighborhood_radius: Optional[int] = None) -> MixingCertificate:
    """Search for a mixing certificate, or refuse with a reason.

    Enumerates triplets (all of them when Q <= 64, else within a shift
    neighborhood radius), keeps reduction vectors whose coverage region is the
    full torus, and certifies once the integer lattice they generate reduces
    to the identity. Deterministic: triplets stream in a stable
    nearest-neighbor order and the search stops at the first complete basis.
    """
    if not scheme.grid.torus:
        raise ValueError("mixing certification requires the torus boundary")
    if max_p < 1:
        raise ValueError("max_p must be >= 1")
    q = len(scheme)
    n = scheme.grid.n

    # Structural check: every reachable vector a lies in the lattice spanned by
    # the shift differences (plus the torus periods), so a proper difference
    # lattice refuses regardless of the p bound.
    diffs = [shift_difference(scheme, k, 0) for k in range(1, q)]
    struct_rows = diffs + [(n, 0), (0, n)]
    if not lattice_is_full(struct_rows):
        idx = lattice_index(struct_rows)
        return MixingCertificate(
            certified=False,
            refusal_reason="common-factor",
            refusal_detail={"lattice_index": idx, "structural": True},
            notes="shift differences span a proper sublattice of Z^2; " + _SEARCH_NOTE)

    if q < 3:
        return MixingCertificate(
            certified=False,
            refusal_reason="no-coverage-vectors",
            refusal_detail={"max_p": max_p, "reason": "fewer than 3 shifts"},
            notes=_SEARCH_NOTE)

    if neighborhood_radius is None and q > 64:
        tau = scheme.raster.tau if scheme.raster is not None else scheme.grid.m
        neighborhood_radius = 2 * tau + 2

    def neighbors(l0: int) -> List[int]:
        cand = []
        for j in range(q):
            if j == l0:
                continue
            d = shift_difference(scheme, j, l0)
            r = max(abs(d[0]), abs(d[1]))
            if neighborhood_radius is None or r <= neighborhood_radius:
                cand.append((r, j))
        cand.sort()
        return [j for _, j in cand]

    pairs = _p_pairs(max_p)
    certified: List[CertEntry] = []
    certified_a = set()
    tried = set()

    def try_candidate(l0: int, l1: int, l2: int, p1: int, p2: int) -> bool:
        s1 = shift_difference(scheme, l1, l0)
        s2 = shift_difference(scheme, l2, l0)
        a = (p1 * s1[0] - p2 * s2[0], p1 * s1[1] - p2 * s2[1])
        if a == (0, 0) or a in certified_a:
            return False
        if a[0] < 0 or (a[0] == 0 and a[1] < 0):
            return False  # (-p1,-p2) yields -a, which spans the same lattice
        a_mod = (min_rep(a[0], n), min_rep(a[1], n))
        m = scheme.grid.m
        for c in a_mod:
            if abs(c) >= m and n - abs(c) >= m:
                return False  # block never overlaps its a-translate
        key = (s1, s2, p1, p2)
        if key in tried:
            return False
        tried.add(key)
        mask = _coverage_mask(scheme, scheme.shifts[l0], s1, s2, p1, p2, a_mod)
        if not mask.all():
            return False
        paths = lattice_paths((p1, -p2))
        sizes = tuple(len(validity_set(
            p, s1, s2, block_of(scheme.grid, scheme.shifts[l0])).members) for p in paths)
        certified.append(CertEntry((l0, l1, l2), p1, p2, a, s1, s2,
                                   tuple(p.vertices for p in paths), sizes))
        certified_a.add(a)
        return True

    done = False
    for l0 in range(q):
        nb = neighbors(l0)
        for l1, l2 in itertools.permutations(nb, 2):
            for p1, p2 in pairs:
                if try_candidate(l0, l1, l2, p1, p2):
                    if len(certified) >= 2 and lattice_is_full([e.a for e in certified]):
                        done = True
                        break
            if done:
                break
        if done:
            break

    if not done:
        if not certified:
            return MixingCertificate(
                certified=False,
                refusal_reason="no-coverage-vectors",
                refusal_detail={"max_p": max_p, "p_bound_exhausted": True},
                notes=_SEARCH_NOTE)
        idx = lattice_index([e.a for e in certified])
        return MixingCertificate(
            certified=False,
            refusal_reason="proper-sublattice",
            refusal_detail={"lattice_index": idx, "max_p": max_p,
                            "p_bound_exhausted": True,
                            "vectors": [list(e.a) for e in certified]},
            notes=_SEARCH_NOTE)

    h, u = hnf_with_transform([e.a for e in certified])
    assert h == [[1, 0], [0, 1]]
    c1_full, c2_full = u[0], u[1]
    cited = [j for j in range(len(certified)) if c1_full[j] != 0 or c2_full[j] != 0]
    entries = []
    c1, c2 = [], []
    for j in cited:
        e = certified[j]
        cov = coverage_region(scheme, e.triplet, e.p1, e.p2, e.a)
        if len(cov.members) != n * n:
            raise AssertionError("certificate re-verification failed for coverage")
        entries.append(CertEntry(e.triplet, e.p1, e.p2, e.a, e.s1, e.s2,
                                 e.paths, e.sigma_sizes, coverage_verified=True))
        c1.append(c1_full[j])
        c2.append(c2_full[j])

    # re-verify the combination by substitution
    for ci, ui in ((c1, (1, 0)), (c2, (0, 1))):
        acc = (sum(c * e.a[0] for c, e in zip(ci, entries)),
               sum(c * e.a[1] for c, e in zip(ci, entries)))
        if acc != ui:
            raise AssertionError("certificate re-verification failed for combination")
    u1, u2 = (1, 0), (0, 1)
    det = u1[0] * u2[1] - u1[1] * u2[0]
    if det != 1:
        raise AssertionError("certificate basis determinant is not 1")

    return MixingCertificate(
        certified=True,
        entries=tuple(entries),
        c1=tuple(c1), c2=tuple(c2),
        u1=u1, u2=u2,
        basis_inverse=((1, 0), (0, 1)),
        notes=_SEARCH_NOTE)


# --- serialization ------------------------------------------------------------


def perturbation_margins(scheme: ScanScheme) -> Optional[dict]:
    """Worked-example conditions for a perturbed raster, with their margins.

    For each axis: the second-difference vectors a_k, their gcd (the witness
    that unit combinations exist), the 50%-overlap margins m - 2*tau -
    (delta_{k+1} - delta_{k-1}), the |s| >= |a| slack, and the
    neighbor-overlap slack m - 1 - |a| - (step + |a|). All margins must be
    >= 0 for the example's sufficient conditions to hold. None when the
    scheme carries no raster parameters.
    """
    if scheme.raster is None:
        return None
    r = scheme.raster
    m = scheme.grid.m
    out = {}
    for axis, delta in (("axis1", r.delta1), ("axis2", r.delta2)):
        a_vals = [delta[k + 1] + delta[k - 1] - 2 * delta[k]
                  for k in range(1, r.q - 1)]
        norms = [abs(v) for v in a_vals if v != 0]
        gcd = 0
        for v in norms:
            gcd = _xgcd(gcd, v)[0]
        overlap_margins = [m - 2 * r.tau - (delta[k + 1] - delta[k - 1])
                           for k in range(1, r.q - 1)]
        step_margins = []
        slack_margins = []
        for k in range(1, r.q - 1):
            na = abs(a_vals[k - 1])
            s_plus = r.tau + delta[k + 1] - delta[k]
            s_minus = -r.tau + delta[k - 1] - delta[k]
            step_margins.append(min(abs(s_plus), abs(s_minus)) - na)
            for kp in range(r.q - 1):
                step = r.tau + delta[kp + 1] - delta[kp]
                slack_margins.append(m - 1 - na - (step + na))
        axis_ok = (gcd == 1
                   and all(v >= 0 for v in overlap_margins)
                   and all(v >= 0 for v in step_margins)
                   and all(v >= 0 for v in slack_margins))
        out[axis] = {
            "a_values": a_vals,
            "gcd": gcd,
            "overlap_margins": overlap_margins,
            "step_margins": step_margins,
            "min_neighbor_slack": min(slack_margins, default=0),
            "satisfied": axis_ok,
        }
    out["satisfied"] = out["axis1"]["satisfied"] and out["axis2"]["satisfied"]
    return out


def scheme_to_dict(scheme: ScanScheme) -> dict:
    out = {
        "n": scheme.grid.n,
        "m": scheme.grid.m,
        "boundary": scheme.grid.boundary,
        "shifts": [list(t) for t in scheme.shifts],
    }
    if scheme.raster is not None:
        r = scheme.raster
        out["raster"] = {"tau": r.tau, "q": r.q,
                         "delta1": list(r.delta1), "delta2": list(r.delta2)}
    return out


def scheme_from_dict(d: dict) -> ScanScheme:
    grid = GridSpec(int(d["n"]), int(d["m"]), d.get("boundary", TORUS))
    shifts = tuple((int(t[0]), int(t[1])) for t in d["shifts"])
    raster = None
    if d.get("raster"):
        r = d["raster"]
        raster = RasterParams(int(r["tau"]), int(r["q"]),
                              tuple(int(v) for v in r["delta1"]),
                              tuple(int(v) for v in r["delta2"]))
    return ScanScheme(grid, shifts, raster)
