"""Inherent-ambiguity constructors and the data-invariance verifier.

Scaling and affine-phase pairs leave every diffraction pattern unchanged for
any scheme; the twin and translate constructions reproduce the paper-style
counterexamples that exist only when MPC or OSC is dropped. The example
constructors hard-require their exact two-block geometry; they are regression
fixtures, not general tools.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .core import ComplexField, GridSpec, Point, block_of, restrict, twin
from .forward import ExitWave, acquire, data_distance
from .scheme import ScanScheme


@dataclass
class SolutionPair:
    """A candidate (object, mask) estimate pair."""

    object: ComplexField
    mask: ComplexField


@dataclass(frozen=True)
class AmbiguityParams:
    """Parameters of the inherent transformations."""

    c: float = 1.0
    a: float = 0.0
    b: float = 0.0
    w: Tuple[float, float] = (0.0, 0.0)
    theta: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError(f"scaling constant must be positive, got {self.c}")


def apply_scaling(f: ComplexField, mu: ComplexField, c: float) -> SolutionPair:
    """g = c*f, nu = mu/c for c > 0; exit waves are unchanged by cancellation."""
    if c <= 0:
        raise ValueError(f"scaling constant must be positive, got {c}")
    return SolutionPair(ComplexField(c * f.data, origin=f.origin),
                        ComplexField(mu.data / c, origin=mu.origin))


def _coord_grids(shape) -> Tuple[np.ndarray, np.ndarray]:
    return np.meshgrid(np.arange(shape[0]), np.arange(shape[1]), indexing="ij")


def apply_affine_phase(f: ComplexField, mu: ComplexField,
                       a: float, b: float, w: Sequence[float]) -> SolutionPair:
    """Affine phase pair: nu(k) = mu(k) e^{-i(a + w.k)}, g(p) = f(p) e^{i(b + w.p)}.

    Exit waves pick up the constant block phase w.t + (b - a) per shift, so
    the data are invariant. On a torus grid exactness additionally requires
    w in (2*pi/n) * Z^2 so the phase ramp is n-periodic.
    """
    w1, w2 = float(w[0]), float(w[1])
    k1, k2 = _coord_grids(mu.data.shape)
    nu = mu.data * np.exp(-1j * (a + w1 * k1 + w2 * k2))
    p1, p2 = _coord_grids(f.data.shape)
    g = f.data * np.exp(1j * (b + w1 * p1 + w2 * p2))
    return SolutionPair(ComplexField(g, origin=f.origin),
                        ComplexField(nu, origin=mu.origin))


def apply_block_phases(exit_waves: Sequence[ExitWave],
                       theta: Sequence[float]) -> List[ExitWave]:
    """Multiply each exit wave by its unimodular block phase e^{i theta_k}."""
    if len(exit_waves) != len(theta):
        raise ValueError(
            f"need one phase per exit wave, got {len(theta)} for {len(exit_waves)}")
    return [ExitWave(ComplexField(np.exp(1j * float(th)) * ew.field.data,
                                  origin=ew.field.origin), ew.shift)
            for ew, th in zip(exit_waves, theta)]


# --- the paper-style two-block counterexamples ----------------------------------


def _two_block_geometry(scheme: ScanScheme) -> Tuple[GridSpec, int, Point]:
    grid = scheme.grid
    m = grid.m
    if m % 2 != 0:
        raise ValueError("example geometry needs an even block side m")
    expected = (grid.canonical_shift((0, 0)), grid.canonical_shift((m // 2, 0)))
    if tuple(scheme.shifts) != expected:
        raise ValueError(
            f"example geometry needs shifts [(0,0), (m/2,0)] = {list(expected)}, "
            f"got {list(scheme.shifts)}")
    return grid, m, expected[1]


def _paste_block(canvas: np.ndarray, grid: GridSpec, t: Point,
                 block: np.ndarray, written: np.ndarray) -> None:
    m = grid.m
    idx1 = (t[0] + np.arange(m)) % grid.n if grid.torus else t[0] + np.arange(m)
    idx2 = (t[1] + np.arange(m)) % grid.n if grid.torus else t[1] + np.arange(m)
    sub = np.ix_(idx1, idx2)
    prev = written[sub]
    if prev.any():
        if not np.array_equal(canvas[sub][prev], block[prev]):
            raise ValueError("blocks disagree on the doubly covered region")
    canvas[sub] = block
    written[sub] = True


def twin_pair_ex0(f: ComplexField, mu: ComplexField,
                  scheme: ScanScheme) -> SolutionPair:
    """Twin-image pair: nu = Twin(mu), g the blockwise twins of f.

    Needs the two-block geometry t = (m/2, 0) with the overlap symmetry
    f^0_0 = f^1_1 (automatic on a torus with m = n). The resulting mask
    estimate has the maximal phase ratio range, so it fails MPC.
    """
    grid, m, t = _two_block_geometry(scheme)
    f0 = restrict(f, block_of(grid, (0, 0)))
    ft = restrict(f, block_of(grid, t))
    half = m // 2
    if not np.array_equal(f0.data[:half], ft.data[half:]):
        raise ValueError("object does not satisfy the overlap symmetry f^0_0 = f^1_1")
    g = np.zeros((grid.n, grid.n), dtype=np.complex128)
    written = np.zeros((grid.n, grid.n), dtype=bool)
    _paste_block(g, grid, (0, 0), twin(f0).data, written)
    _paste_block(g, grid, t, twin(ft).data, written)
    return SolutionPair(ComplexField(g, origin=f.origin), twin(mu))


def translate_pair_ex31(f: ComplexField, mu: ComplexField, scheme: ScanScheme,
                        variant: str = "translate") -> SolutionPair:
    """Loose-support pair: nu = mu and g carries translated (or twin-like)
    content compensated through the mask ratio.

    Needs the two-block geometry with zero flanks, f = [0, f^0_1, 0], and
    disjoint flank strips (2n >= 3m). The pair reproduces the data but is not
    a block-phase multiple of the truth, and a tightened T0 rejects it via
    the OSC.
    """
    if variant not in ("translate", "twin"):
        raise ValueError(f"unknown variant {variant!r}")
    grid, m, t = _two_block_geometry(scheme)
    if 2 * grid.n < 3 * m:
        raise ValueError("example geometry needs 2n >= 3m so the flank strips are disjoint")
    f0 = restrict(f, block_of(grid, (0, 0)))
    ft = restrict(f, block_of(grid, t))
    half = m // 2
    if np.any(f0.data[:half] != 0) or np.any(ft.data[half:] != 0):
        raise ValueError("object must vanish on the flank strips (f^0_0 = f^1_1 = 0)")
    g0 = np.zeros((m, m), dtype=np.complex128)
    gt = np.zeros((m, m), dtype=np.complex128)
    if variant == "translate":
        g0[:half] = f0.data[half:] * mu.data[half:] / mu.data[:half]
        gt[half:] = ft.data[:half] * mu.data[:half] / mu.data[half:]
    else:
        g0[:] = np.conj((mu.data * f0.data)[::-1, ::-1]) / mu.data
        gt[:] = np.conj((mu.data * ft.data)[::-1, ::-1]) / mu.data
    g = np.zeros((grid.n, grid.n), dtype=np.complex128)
    written = np.zeros((grid.n, grid.n), dtype=bool)
    _paste_block(g, grid, (0, 0), g0, written)
    _paste_block(g, grid, t, gt, written)
    return SolutionPair(ComplexField(g, origin=f.origin),
                        ComplexField(mu.data.copy(), origin=mu.origin))


def example_t0(m: int, tighten: int = 0) -> frozenset:
    """The shift prior T0 = {(a, 0): a = 0..m/2 - tighten} of the loose-support
    example; tighten >= 1 rejects both constructed ambiguities."""
    if tighten < 0 or m // 2 - tighten < 0:
        raise ValueError("tighten must be in [0, m/2]")
    return frozenset((a, 0) for a in range(0, m // 2 - tighten + 1))


# --- verifier --------------------------------------------------------------------


@dataclass
class EquivalenceReport:
    """Outcome of comparing a candidate pair against the ground truth."""

    data_equal: bool
    max_deviation: float
    theta: Tuple[float, ...]
    blockwise_residuals: Tuple[float, ...]
    blockwise_pass: bool
    classification: str
    params: Dict[str, object]

    def to_dict(self) -> dict:
        return {
            "data_equal": self.data_equal,
            "max_dev": self.max_deviation,
            "theta": list(self.theta),
            "blockwise_residuals": list(self.blockwise_residuals),
            "blockwise_pass": self.blockwise_pass,
            "classification": self.classification,
            "params": {k: (list(v) if isinstance(v, tuple) else v)
                       for k, v in self.params.items()},
        }


def verify_equivalence(pair: SolutionPair, f: ComplexField, mu: ComplexField,
                       scheme: ScanScheme, tol: float = 1e-10) -> EquivalenceReport:
    """Check data invariance and classify the relation to the ground truth.

    Classification order: scaling, then affine (circular regression of the
    block phases over the shifts), then block-phase-only, else "other".
    """
    from .analysis import align_pair, block_phases  # local import avoids a cycle

    d_true = acquire(scheme, mu, f)
    d_cand = acquire(scheme, pair.mask, pair.object)
    dev = data_distance(d_true, d_cand)

    theta, residuals = block_phases(pair, f, mu, scheme, strict=False)
    block_ok = all(r <= max(tol, 1e-8) for r in residuals)

    classification = "other"
    params: Dict[str, object] = {}
    norm_f = float(np.linalg.norm(f.data))
    if norm_f > 0:
        c = float(np.linalg.norm(pair.object.data)) / norm_f
        if c > 0:
            scale_dev = max(
                float(np.linalg.norm(pair.object.data - c * f.data))
                / max(float(np.linalg.norm(pair.object.data)), 1e-300),
                float(np.linalg.norm(pair.mask.data - mu.data / c))
                / max(float(np.linalg.norm(pair.mask.data)), 1e-300))
            if scale_dev <= tol:
                classification = "scaling"
                params = {"c": c}
    if classification == "other":
        err, align_params = align_pair(pair, f, mu, scheme)
        if err <= max(tol, 1e-8):
            classification = "affine"
            params = align_params
        elif block_ok:
            classification = "block-phase-only"
            params = {"theta": tuple(theta)}

    return EquivalenceReport(
        data_equal=dev <= tol,
        max_deviation=dev,
        theta=tuple(theta),
        blockwise_residuals=tuple(residuals),
        blockwise_pass=block_ok,
        classification=classification,
        params=params,
    )
