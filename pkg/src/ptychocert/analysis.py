"""Quantitative solution-pair analysis: log-ratio field, block phases, phase
drift, and the affine phase profile.

All phase arithmetic runs on unit-circle representatives: fits maximize the
concentration |sum_k exp(i(theta_k - theta0 - t_k . r))| and residuals are
wrapped deviations, so nothing depends on branch cuts of raw angles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .constraints import wrap_phase
from .core import ComplexField, ShapeError, block_of
from .forward import exit_wave
from .scheme import MixingCertificate, ScanScheme

TWO_PI = 2.0 * np.pi


@dataclass
class LogRatioField:
    """h = ln g - ln f where both factors are above the zero threshold.

    Real part: log amplitude ratio. Imaginary part: phase in (-pi, pi].
    Undefined pixels hold 0 and are masked out of every fit.
    """

    values: np.ndarray
    defined: np.ndarray


def log_ratio(g: ComplexField, f: ComplexField,
              zero_threshold: float = 1e-12) -> LogRatioField:
    if g.data.shape != f.data.shape:
        raise ShapeError("fields must have the same shape")
    absf = np.abs(f.data)
    absg = np.abs(g.data)
    defined = ((absf > zero_threshold * absf.max(initial=0.0))
               & (absg > zero_threshold * absg.max(initial=0.0)))
    values = np.zeros(g.data.shape, dtype=np.complex128)
    ratio = np.divide(g.data, f.data, out=np.ones_like(values), where=defined)
    values[defined] = (np.log(np.abs(ratio[defined]))
                       + 1j * wrap_phase(np.angle(ratio[defined])))
    return LogRatioField(values, defined)


def block_phases(pair, f: ComplexField, mu: ComplexField, scheme: ScanScheme,
                 strict: bool = True) -> Tuple[List[float], List[float]]:
    """Per-shift block phase theta_k = arg<mu^k f^k, nu^k g^k> and the
    unimodularity residual ||nu^k g^k - e^{i theta_k} mu^k f^k|| / ||mu^k f^k||.

    A zero masked block raises unless strict=False, in which case theta_k = 0
    and the residual is inf (or 0 when the candidate block is zero too).
    """
    grid = scheme.grid
    theta, residuals = [], []
    for t in scheme.shifts:
        wt = exit_wave(mu, f, t, grid).field.data
        wc = exit_wave(pair.mask, pair.object, t, grid).field.data
        nt = float(np.linalg.norm(wt))
        if nt == 0.0:
            if strict:
                raise ValueError(f"zero masked block at shift {t}")
            theta.append(0.0)
            residuals.append(0.0 if np.linalg.norm(wc) == 0 else np.inf)
            continue
        th = float(np.angle(np.vdot(wt, wc)))
        theta.append(th)
        residuals.append(float(np.linalg.norm(wc - np.exp(1j * th) * wt)) / nt)
    return theta, residuals


def phase_drift(theta: Sequence[float], scheme: ScanScheme,
                min_overlap: int = 1) -> Dict[Tuple[int, int], float]:
    """Wrapped block-phase differences theta_k - theta_l over overlapping pairs."""
    if len(theta) != len(scheme):
        raise ValueError("need one phase per shift")
    masks = [block_of(scheme.grid, t).members for t in scheme.shifts]
    out = {}
    for k in range(len(scheme)):
        for l in range(k + 1, len(scheme)):
            if len(masks[k] & masks[l]) >= min_overlap:
                out[(k, l)] = float(wrap_phase(theta[k] - theta[l]))
    return out


# --- circular regression -----------------------------------------------------


@dataclass
class BlockPhaseProfile:
    """Affine fit theta_k ~ theta0 + (t_k - t_0) . r of the block phases."""

    theta: Tuple[float, ...]
    r: Tuple[float, float]
    theta0: float
    residual: float
    determined: Tuple[bool, bool]

    def to_dict(self) -> dict:
        return {"theta": list(self.theta), "r": list(self.r),
                "theta0": self.theta0, "residual": self.residual,
                "determined": list(self.determined)}


def _concentration(unit: np.ndarray, pos: np.ndarray, cands: np.ndarray) -> np.ndarray:
    """|sum_k unit_k exp(-i pos_k . r)| for every candidate r, chunked."""
    out = np.empty(len(cands))
    chunk = max(1, int(4_000_000 // max(len(unit), 1)))
    for s in range(0, len(cands), chunk):
        block = cands[s:s + chunk]
        out[s:s + chunk] = np.abs(np.exp(-1j * (pos @ block.T)).T @ unit)
    return out


def _wrapped_norm(r: np.ndarray) -> float:
    rr = np.mod(r, TWO_PI)
    rr = np.minimum(rr, TWO_PI - rr)
    return float(rr @ rr)


def fit_affine_phase(positions, phases) -> BlockPhaseProfile:
    """Circular regression of phases against integer positions.

    Coarse grid of resolution 2*pi/(4*span) over [0, 2*pi)^2 (ties broken
    toward the smallest wrapped |r|, so constant input returns r = 0),
    followed by zoom refinement and a linearized polish. Collinear positions
    leave one direction undetermined; the flags report per-axis
    determinability and the fit returns the minimum-norm representative.
    """
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    th = np.asarray(phases, dtype=float).reshape(-1)
    if len(pos) != len(th) or len(th) == 0:
        raise ValueError("positions and phases must align and be nonempty")
    unit = np.exp(1j * th)

    span = float(np.max(pos) - np.min(pos)) if len(pos) > 1 else 0.0
    centered = pos - pos.mean(axis=0)
    var0 = float(np.abs(centered[:, 0]).max(initial=0.0))
    var1 = float(np.abs(centered[:, 1]).max(initial=0.0))
    rank = int(np.linalg.matrix_rank(centered, tol=1e-9)) if len(pos) > 1 else 0
    if rank == 2:
        determined = (True, True)
    elif rank == 1:
        determined = (var1 == 0.0, var0 == 0.0)  # axis-aligned line pins one axis
    else:
        determined = (False, False)

    if span == 0.0 or rank == 0:
        theta0 = float(np.angle(unit.sum()))
        res = float(np.max(np.abs(np.angle(unit * np.exp(-1j * theta0)))))
        wrapped = tuple(float(v) for v in np.atleast_1d(wrap_phase(th)))
        return BlockPhaseProfile(wrapped, (0.0, 0.0), theta0, res, determined)

    step = TWO_PI / (4.0 * (span + 1.0))
    axis = np.arange(0.0, TWO_PI, step)
    cands = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    obj = _concentration(unit, pos, cands)
    best = obj.max()
    near = cands[obj >= best - 1e-9 * max(best, 1.0)]
    center = min(near.tolist(), key=lambda r: (_wrapped_norm(np.array(r)), r))
    center = np.array(center)

    half = step
    while half > 1e-13:
        offs = np.linspace(-half, half, 9)
        local = np.stack(np.meshgrid(center[0] + offs, center[1] + offs,
                                     indexing="ij"), axis=-1).reshape(-1, 2)
        lobj = _concentration(unit, pos, local)
        lbest = lobj.max()
        lnear = local[lobj >= lbest - 1e-15 * max(lbest, 1.0)]
        center = np.array(min(lnear.tolist(),
                              key=lambda r: (_wrapped_norm(np.array(r)), r)))
        half /= 4.0

    r = center
    theta0 = float(np.angle(np.sum(unit * np.exp(-1j * (pos @ r)))))
    design = np.hstack([pos, np.ones((len(pos), 1))])
    for _ in range(3):
        delta = np.angle(unit * np.exp(-1j * (theta0 + pos @ r)))
        if np.max(np.abs(delta)) > 1.0:
            break
        sol, *_ = np.linalg.lstsq(design, delta, rcond=None)
        r = r + sol[:2]
        theta0 = float(wrap_phase(theta0 + sol[2]))

    # keep the reported r in the canonical cell, components in (-pi, pi] scaled
    # by nothing: r is only meaningful mod 2*pi on integer positions
    r_rep = wrap_phase(r) if np.all(np.abs(pos - np.round(pos)) < 1e-12) else r
    theta0 = float(np.angle(np.sum(unit * np.exp(-1j * (pos @ r_rep)))))
    delta = np.angle(unit * np.exp(-1j * (theta0 + pos @ r_rep)))
    residual = float(np.max(np.abs(delta)))
    if not determined[0]:
        r_rep = np.array([0.0, r_rep[1]]) if var0 == 0.0 else r_rep
    if not determined[1]:
        r_rep = np.array([r_rep[0], 0.0]) if var1 == 0.0 else r_rep
    wrapped = tuple(float(v) for v in np.atleast_1d(wrap_phase(th)))
    return BlockPhaseProfile(wrapped, (float(r_rep[0]), float(r_rep[1])),
                             theta0, residual, determined)


def affine_fit(theta: Sequence[float], scheme: ScanScheme) -> BlockPhaseProfile:
    """Fit theta_k = theta0 + (t_k - t_0) . r mod 2*pi over the scheme shifts."""
    if len(theta) != len(scheme):
        raise ValueError("need one phase per shift")
    t0 = scheme.shifts[0]
    positions = np.array([(t[0] - t0[0], t[1] - t0[1]) for t in scheme.shifts],
                         dtype=float)
    return fit_affine_phase(positions, theta)


# --- alignment modulo the inherent ambiguities ---------------------------------


def align_pair(pair, f: ComplexField, mu: ComplexField,
               scheme: ScanScheme) -> Tuple[float, Dict[str, object]]:
    """Best relative l2 error of (g, nu) against scaling+affine transforms of
    (f, mu); the scaling comes from the norm ratio, the frequency from the
    block-phase fit with a whole-grid log-ratio fit as a fallback candidate
    (pure rasters alias the block-phase frequency)."""
    g = pair.object.data
    nu = pair.mask.data
    norm_f = float(np.linalg.norm(f.data))
    c = float(np.linalg.norm(g)) / norm_f if norm_f > 0 else 1.0
    if c <= 0:
        c = 1.0
    theta, _ = block_phases(pair, f, mu, scheme, strict=False)
    positions = np.array(scheme.shifts, dtype=float)
    finite = np.isfinite(theta)

    p1, p2 = np.meshgrid(np.arange(g.shape[0]), np.arange(g.shape[1]), indexing="ij")
    k1, k2 = np.meshgrid(np.arange(nu.shape[0]), np.arange(nu.shape[1]), indexing="ij")
    denom = float(np.linalg.norm(g) ** 2 + np.linalg.norm(nu) ** 2)
    if denom == 0.0:
        return 0.0, {"c": c, "w": (0.0, 0.0), "b": 0.0, "a": 0.0, "theta0": 0.0}

    def evaluate(w):
        ramp_obj = np.exp(1j * (w[0] * p1 + w[1] * p2))
        b = float(np.angle(np.vdot(f.data * ramp_obj, g)))
        th_arr = np.asarray(theta)[finite]
        th0 = float(np.angle(np.sum(np.exp(1j * (th_arr - positions[finite] @ w))))) \
            if finite.any() else 0.0
        a = b - th0
        ghat = c * f.data * np.exp(1j * b) * ramp_obj
        nuhat = (mu.data / c) * np.exp(-1j * (a + w[0] * k1 + w[1] * k2))
        err = float(np.sqrt((np.linalg.norm(g - ghat) ** 2
                             + np.linalg.norm(nu - nuhat) ** 2) / denom))
        return err, {"c": c, "w": (float(w[0]), float(w[1])),
                     "b": b, "a": a, "theta0": th0}

    if finite.any():
        fit_b = fit_affine_phase(positions[finite], np.asarray(theta)[finite])
        best_err, best_params = evaluate(np.array(fit_b.r))
    else:
        best_err, best_params = evaluate(np.zeros(2))
    if best_err > 1e-9:
        # block phases determine w only mod the raster aliasing; disambiguate
        # with a whole-grid fit of Im h when the cheap candidate fails
        h = log_ratio(pair.object, f)
        if h.defined.any():
            pix = np.argwhere(h.defined).astype(float)
            fit_g = fit_affine_phase(pix, np.imag(h.values[h.defined]))
            err, params = evaluate(np.array(fit_g.r))
            if err < best_err:
                best_err, best_params = err, params
    return best_err, best_params


def aligned_error(pair, f: ComplexField, mu: ComplexField,
                  scheme: ScanScheme) -> float:
    """Relative l2 error modulo the inherent ambiguities; 0 for any
    scaling/affine pair, bounded away from 0 otherwise."""
    return align_pair(pair, f, mu, scheme)[0]


def affine_vector_from_certificate(cert: MixingCertificate,
                                   theta: Sequence[float]) -> Tuple[float, float]:
    """Reconstruct the affine vector r from a mixing certificate's witnesses.

    r_j = sum_i b_ji * sum_entries c^i [p1 (theta_l1 - theta_l0)
          - p2 (theta_l2 - theta_l0)], meaningful mod 2*pi per component.
    """
    if not cert.certified:
        raise ValueError("certificate is a refusal; no witnesses to evaluate")
    inner = []
    for ci in (cert.c1, cert.c2):
        acc = 0.0
        for coeff, e in zip(ci, cert.entries):
            l0, l1, l2 = e.triplet
            acc += coeff * (e.p1 * (theta[l1] - theta[l0])
                            - e.p2 * (theta[l2] - theta[l0]))
        inner.append(acc)
    b = cert.basis_inverse
    return (float(b[0][0] * inner[0] + b[0][1] * inner[1]),
            float(b[1][0] * inner[0] + b[1][1] * inner[1]))
