"""Mask phase constraint (MPC) and object support constraint (OSC) checkers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Optional, Tuple

import numpy as np

from .core import ComplexField, PixelSet, Point, ShapeError, block_of, box_hull

TWO_PI = 2.0 * np.pi


def wrap_phase(phi):
    """Wrap angles to the canonical interval (-pi, pi]."""
    out = np.mod(np.asarray(phi, dtype=float) + np.pi, TWO_PI) - np.pi
    return np.where(out <= -np.pi, out + TWO_PI, out)


@dataclass
class MaskRatio:
    """Polar decomposition alpha * exp(i*phi) of the mask ratio nu/mu."""

    alpha: np.ndarray
    phi: np.ndarray


def mask_ratio(nu: ComplexField, mu: ComplexField) -> MaskRatio:
    if nu.data.shape != mu.data.shape:
        raise ShapeError("mask estimate and mask must have the same shape")
    if (np.abs(mu.data) == 0).any():
        raise ValueError("mask has a zero pixel; the ratio is undefined")
    ratio = nu.data / mu.data
    return MaskRatio(np.abs(ratio), wrap_phase(np.angle(ratio)))


@dataclass(frozen=True)
class MPCParams:
    """Mask phase constraint parameters, delta < min(gamma, 1/2)."""

    delta: float
    gamma: float

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if not (0.0 < self.delta < min(self.gamma, 0.5)):
            raise ValueError(
                f"delta must satisfy 0 < delta < min(gamma, 1/2), got {self.delta}")

    def p_flat(self, samples: int = 200_000, seed: int = 0) -> float:
        """Monte-Carlo estimate of max_a Pr{Theta in (a - 2*delta*pi, a + 2*delta*pi]}
        for Theta the sum of two phases drawn from the uniform density on
        (-gamma*pi, gamma*pi]. The maximum sits at a = 0 by symmetry."""
        rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
        u = rng.random((2, samples))
        theta = self.gamma * np.pi * (1.0 - 2.0 * u)
        total = theta[0] + theta[1]
        return float(np.mean(np.abs(total) <= 2.0 * self.delta * np.pi))


def minimal_enclosing_arc(phases: np.ndarray) -> Tuple[float, float]:
    """(width, midpoint) of the smallest circular arc containing all phases.

    Sorted-gap construction: the minimal arc is the complement of the largest
    gap between consecutive sorted phases, so width = 2*pi - max gap.
    """
    phi = np.sort(wrap_phase(np.ravel(phases)))
    if phi.size == 0:
        raise ValueError("no phases given")
    if phi.size == 1:
        return 0.0, float(phi[0])
    gaps = np.diff(phi)
    wrap_gap = phi[0] + TWO_PI - phi[-1]
    idx = int(np.argmax(gaps)) if gaps.size and gaps.max() > wrap_gap else None
    if idx is None:
        start = phi[0]
        width = phi[-1] - phi[0]
    else:
        start = phi[idx + 1]
        width = TWO_PI - gaps[idx]
    mid = float(wrap_phase(start + width / 2.0))
    return float(width), mid


@dataclass
class MPCResult:
    passed: bool
    phi0: float
    arc_width: float
    delta: float
    gamma: float

    def to_dict(self) -> dict:
        return {"constraint": "mpc", "pass": self.passed,
                "witness": {"phi0": self.phi0, "arc_width": self.arc_width},
                "params": {"delta": self.delta, "gamma": self.gamma,
                           "phase_density": "uniform"}}


def check_mpc(nu: ComplexField, mu: ComplexField, params: MPCParams) -> MPCResult:
    """Pass iff the phases of nu/mu fit in a circular arc of width 2*delta*pi.

    The witness phi0 is the arc midpoint; the check is invariant under a
    global rotation of nu. For gamma > 1/2 and delta -> 1/2 this coincides
    with asking for a rotation making Re(conj(nu)*mu) > 0 at every pixel
    (arc width below pi).
    """
    ratio = mask_ratio(nu, mu)
    width, mid = minimal_enclosing_arc(ratio.phi)
    return MPCResult(width <= 2.0 * params.delta * np.pi, mid, width,
                     params.delta, params.gamma)


def mpc_sign_test(nu: ComplexField, mu: ComplexField) -> bool:
    """Literal pointwise form Re(conj(nu) * mu) > 0 (phi0 fixed at 0)."""
    if nu.data.shape != mu.data.shape:
        raise ShapeError("mask estimate and mask must have the same shape")
    return bool((np.real(np.conj(nu.data) * mu.data) > 0).all())


# --- object support constraint --------------------------------------------------


@dataclass(frozen=True)
class OSCParams:
    """Shift prior T0 and the box hull of the true part's support."""

    t0: FrozenSet[Point]
    fbox: PixelSet

    def __post_init__(self):
        if not self.t0:
            raise ValueError("T0 must be nonempty")
        object.__setattr__(self, "t0", frozenset((int(a), int(b)) for a, b in self.t0))


@dataclass
class OSCResult:
    passed: bool
    offender: Optional[Point]
    triggering_shifts: List[Point]

    def to_dict(self) -> dict:
        return {"constraint": "osc", "pass": self.passed,
                "witness": {"offending_shift": list(self.offender) if self.offender else None,
                            "triggering_shifts": [list(t) for t in self.triggering_shifts]}}


def _support_points(g0: ComplexField, rel_threshold: float) -> List[Point]:
    mags = np.abs(g0.data)
    peak = float(mags.max(initial=0.0))
    if peak == 0.0:
        return []
    idx = np.nonzero(mags > rel_threshold * peak)
    return [(int(i), int(j)) for i, j in zip(*idx)]


def _bounds(points: Iterable[Point]):
    pts = list(points)
    lo1 = min(p[0] for p in pts); hi1 = max(p[0] for p in pts)
    lo2 = min(p[1] for p in pts); hi2 = max(p[1] for p in pts)
    return (lo1, hi1), (lo2, hi2)


def check_osc(g0: ComplexField, params: OSCParams,
              rel_threshold: float = 1e-12) -> OSCResult:
    """Verify Assumption II: every shift that tucks supp(g0) or its twin into
    fbox - shift must already be in T0.

    Pixels below rel_threshold * max|g0| count as zero. An empty support
    triggers the condition for every candidate shift, so it passes only when
    T0 covers the whole candidate rectangle [fbox.min-(m-1), fbox.max].
    """
    m = g0.side
    (fb1_lo, fb1_hi), (fb2_lo, fb2_hi) = _bounds(params.fbox.members)
    supp = _support_points(g0, rel_threshold)
    twin_supp = [(m - 1 - p1, m - 1 - p2) for p1, p2 in supp]

    triggers = set()
    for src in (supp, twin_supp):
        if not src:
            triggers.update((a, b)
                            for a in range(fb1_lo - (m - 1), fb1_hi + 1)
                            for b in range(fb2_lo - (m - 1), fb2_hi + 1))
            continue
        (g1_lo, g1_hi), (g2_lo, g2_hi) = _bounds(src)
        # supp + shift inside fbox componentwise
        a_lo, a_hi = fb1_lo - g1_lo, fb1_hi - g1_hi
        b_lo, b_hi = fb2_lo - g2_lo, fb2_hi - g2_hi
        triggers.update((a, b)
                        for a in range(a_lo, a_hi + 1)
                        for b in range(b_lo, b_hi + 1))

    ordered = sorted(triggers)
    for shift in ordered:
        if shift not in params.t0:
            return OSCResult(False, shift, ordered)
    return OSCResult(True, None, ordered)


def tight_hull_anchors(scheme, support: Optional[PixelSet] = None) -> List[int]:
    """Indices of shifts whose block sees a support with a tight box hull.

    A tightly supported part is always an anchor, so these shifts admit the
    null T0 = {(0,0)} prior.
    """
    anchors = []
    for k, t in enumerate(scheme.shifts):
        blk = block_of(scheme.grid, t)
        sup = blk if support is None else blk.intersection(support)
        if not sup.members:
            continue
        if box_hull(sup).members == blk.members:
            anchors.append(k)
    return anchors
