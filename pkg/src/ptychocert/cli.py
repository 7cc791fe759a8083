"""Command-line front end tying generation, certification, ambiguity
construction and analysis into reproducible runs.

Exit codes: 0 success, 1 a required property failed, 2 usage or validation
error, 3 I/O error. All angles are radians, all shifts are pixels. Set
PTYCHO_THREADS to cap internal parallelism.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ambiguity import (
    SolutionPair,
    apply_affine_phase,
    apply_block_phases,
    apply_scaling,
    example_t0,
    translate_pair_ex31,
    twin_pair_ex0,
    verify_equivalence,
)
from .analysis import affine_fit, aligned_error, block_phases, phase_drift
from .constraints import MPCParams, OSCParams, check_mpc, check_osc, tight_hull_anchors
from .core import (
    GridSpec,
    MaskSpec,
    PixelSet,
    load_field,
    random_object,
    random_phase_mask,
    save_field,
)
from .forward import acquire, diffract, exit_wave, load_dataset, save_dataset
from .scheme import (
    ScanScheme,
    certify_mixing,
    connectivity,
    perturbation_margins,
    perturbed_raster,
    raster_scheme,
    scheme_from_dict,
    scheme_to_dict,
)

EXIT_OK = 0
EXIT_PROPERTY = 1
EXIT_USAGE = 2
EXIT_IO = 3

REPORT_VERSION = 1


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip() != ""]


def _parse_w(text):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 2:
        raise ValueError("w must be two comma-separated radians/pixel values")
    return (parts[0], parts[1])


def _write_report(report: dict, out) -> None:
    report = {"report_version": REPORT_VERSION, **report}
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _scheme_from_args(args) -> ScanScheme:
    if getattr(args, "scheme", None):
        data = json.loads(Path(args.scheme).read_text())
        return scheme_from_dict(data)
    if args.n is None or args.m is None:
        raise ValueError("give either --scheme FILE or --n/--m with a builtin scheme")
    grid = GridSpec(args.n, args.m, args.boundary)
    if args.raster_tau is None:
        raise ValueError("builtin schemes need --raster-tau")
    if args.delta1 or args.delta2:
        q = grid.n // args.raster_tau if args.raster_tau else 0
        d1 = _int_list(args.delta1) if args.delta1 else [0] * q
        d2 = _int_list(args.delta2) if args.delta2 else [0] * q
        return perturbed_raster(grid, args.raster_tau, d1, d2)
    return raster_scheme(grid, args.raster_tau)


def _add_scheme_args(p):
    p.add_argument("--scheme", help="scheme.json path")
    p.add_argument("--n", type=int, help="object side length (pixels)")
    p.add_argument("--m", type=int, help="mask side length (pixels)")
    p.add_argument("--boundary", default="torus", choices=["torus", "dirichlet-zero"])
    p.add_argument("--raster-tau", type=int, help="raster step (pixels)")
    p.add_argument("--delta1", help="comma-separated raster perturbations, first axis")
    p.add_argument("--delta2", help="comma-separated raster perturbations, second axis")


def cmd_gen(args) -> int:
    scheme = _scheme_from_args(args)
    grid = scheme.grid
    mask_seed = args.mask_seed if args.mask_seed is not None else args.seed
    object_seed = args.object_seed if args.object_seed is not None else args.seed + 1
    mask = random_phase_mask(MaskSpec(grid.m, args.gamma, "unimodular", mask_seed))
    if args.object:
        obj = load_field(args.object)
    else:
        obj = random_object(grid.n, object_seed)
    ds = acquire(scheme, mask, obj, meta={
        "gamma": args.gamma,
        "mask_seed": mask_seed,
        "object_seed": None if args.object else object_seed,
        "phase_density": "uniform",
    })
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(out, ds)
    (out / "scheme.json").write_text(
        json.dumps(scheme_to_dict(scheme), indent=2, sort_keys=True) + "\n")
    save_field(out / "mask.cf64", mask, kind="mask")
    save_field(out / "object.cf64", obj, kind="object")
    return EXIT_OK


def cmd_check_scheme(args) -> int:
    scheme = _scheme_from_args(args)
    support = PixelSet.of(scheme.grid,
                          ((i, j) for i in range(scheme.grid.n)
                           for j in range(scheme.grid.n)))
    conn = connectivity(scheme, support, query_s=(2,))
    cert = certify_mixing(scheme, max_p=args.max_p)
    anchors = tight_hull_anchors(scheme)
    report = {
        "scheme": scheme_to_dict(scheme),
        "connectivity": conn.to_dict(),
        "mixing": cert.to_dict(),
        "anchors": anchors,
    }
    margins = perturbation_margins(scheme)
    if margins is not None:
        report["perturbation_conditions"] = margins
    _write_report(report, args.out)
    if args.require_mixing and not cert.certified:
        return EXIT_PROPERTY
    return EXIT_OK


def _load_pair_dir(path) -> SolutionPair:
    root = Path(path)
    return SolutionPair(load_field(root / "object.cf64"), load_field(root / "mask.cf64"))


def cmd_ambiguity(args) -> int:
    if args.tol <= 0:
        raise ValueError("tolerance must be positive")
    ds = load_dataset(args.dataset)
    scheme = ds.scheme
    mask = load_field(Path(args.dataset) / "mask.cf64")
    obj = load_field(Path(args.dataset) / "object.cf64")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.kind == "block-phase":
        theta = [float(v) for v in args.theta.split(",")] if args.theta else []
        waves = [exit_wave(mask, obj, t, scheme.grid) for t in scheme.shifts]
        shifted = apply_block_phases(waves, theta)
        worst = max(
            float(np.linalg.norm(diffract(w2).values - p1.values))
            / max(float(np.linalg.norm(p1.values)), 1e-300)
            for w2, p1 in zip(shifted, ds.patterns))
        _write_report({"kind": "block-phase", "theta": theta,
                       "max_pattern_change": worst}, out / "report.json")
        return EXIT_OK

    if args.kind == "scaling":
        pair = apply_scaling(obj, mask, args.c)
        extra = {"c": args.c}
    elif args.kind == "affine":
        w = _parse_w(args.w) if args.w else (0.0, 0.0)
        pair = apply_affine_phase(obj, mask, args.a, args.b, w)
        extra = {"a": args.a, "b": args.b, "w": list(w)}
    elif args.kind == "ex0":
        pair = twin_pair_ex0(obj, mask, scheme)
        extra = {}
    elif args.kind == "ex31":
        pair = translate_pair_ex31(obj, mask, scheme, variant=args.variant)
        extra = {"variant": args.variant}
    else:
        raise ValueError(f"unknown ambiguity kind {args.kind!r}")

    report = verify_equivalence(pair, obj, mask, scheme, tol=args.tol).to_dict()
    report.update({"kind": args.kind, **extra})

    if args.kind == "ex0":
        params = MPCParams(delta=0.4, gamma=float(ds.meta.get("gamma", 1.0)))
        report["mpc"] = check_mpc(pair.mask, mask, params).to_dict()
    if args.kind == "ex31" and args.t0_tighten is not None:
        from .core import block_of, box_hull, restrict
        m = scheme.grid.m
        f0 = restrict(obj, block_of(scheme.grid, (0, 0)))
        supp = [(int(i), int(j)) for i, j in zip(*np.nonzero(np.abs(f0.data) > 0))]
        fbox = box_hull(PixelSet.of(GridSpec(m, m, "dirichlet-zero"), supp))
        g0 = restrict(pair.object, block_of(scheme.grid, (0, 0)))
        osc = check_osc(g0, OSCParams(example_t0(m, args.t0_tighten), fbox))
        report["osc"] = osc.to_dict()
        report["osc"]["t0_tighten"] = args.t0_tighten

    save_field(out / "object.cf64", pair.object, kind="object-estimate")
    save_field(out / "mask.cf64", pair.mask, kind="mask-estimate")
    _write_report(report, out / "report.json")
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.tol <= 0:
        raise ValueError("tolerance must be positive")
    truth = Path(args.truth)
    ds = load_dataset(truth)
    scheme = ds.scheme
    mask = load_field(truth / "mask.cf64")
    obj = load_field(truth / "object.cf64")
    pair = _load_pair_dir(args.candidate)
    theta, residuals = block_phases(pair, obj, mask, scheme, strict=False)
    profile = affine_fit(theta, scheme)
    drift = phase_drift(theta, scheme)
    verdict = verify_equivalence(pair, obj, mask, scheme, tol=args.tol)
    gamma = float(ds.meta.get("gamma", 1.0))
    report = {
        "theta": list(theta),
        "r": list(profile.r),
        "theta0": profile.theta0,
        "fit_residual": profile.residual,
        "unimodularity_residuals": list(residuals),
        "phase_drift": {f"{k}-{l}": v for (k, l), v in sorted(drift.items())},
        "aligned_error": aligned_error(pair, obj, mask, scheme),
        "classification": verdict.classification,
        "data_equal": verdict.data_equal,
        "max_dev": verdict.max_deviation,
        "mpc": check_mpc(pair.mask, mask,
                         MPCParams(min(0.4, gamma / 2), gamma)).to_dict(),
    }
    _write_report(report, args.out)
    return EXIT_OK


def cmd_mpc(args) -> int:
    mu = load_field(args.mask)
    nu = load_field(args.estimate)
    params = MPCParams(delta=args.delta, gamma=args.gamma)
    result = check_mpc(nu, mu, params)
    _write_report(result.to_dict(), args.out)
    if args.require_pass and not result.passed:
        return EXIT_PROPERTY
    return EXIT_OK


def cmd_osc(args) -> int:
    g0 = load_field(args.g0)
    lo1, hi1, lo2, hi2 = (int(v) for v in args.fbox.split(","))
    m = g0.side
    grid = GridSpec(max(m, hi1 + 1, hi2 + 1), m, "dirichlet-zero")
    fbox = PixelSet.of(grid, ((i, j) for i in range(lo1, hi1 + 1)
                              for j in range(lo2, hi2 + 1)))
    t0 = frozenset(tuple(int(v) for v in pair.split(","))
                   for pair in args.t0.split(";") if pair.strip())
    result = check_osc(g0, OSCParams(t0, fbox))
    _write_report(result.to_dict(), args.out)
    if args.require_pass and not result.passed:
        return EXIT_PROPERTY
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ptychocert",
        description="Simulate blind-ptychography data, certify scan schemes, "
                    "construct ambiguities, and analyze solution pairs.")
    ap.add_argument("--version", action="version", version=f"ptychocert {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="acquire a ptychographic dataset")
    _add_scheme_args(g)
    g.add_argument("--gamma", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0, help="base seed (mask; object uses seed+1)")
    g.add_argument("--mask-seed", type=int)
    g.add_argument("--object-seed", type=int)
    g.add_argument("--object", help="object cf64 path instead of a random object")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("check-scheme", help="connectivity, mixing certificate, anchors")
    _add_scheme_args(c)
    c.add_argument("--max-p", type=int, default=2)
    c.add_argument("--require-mixing", action="store_true")
    c.add_argument("--out")
    c.set_defaults(func=cmd_check_scheme)

    a = sub.add_parser("ambiguity", help="construct an ambiguity pair and verify it")
    a.add_argument("--dataset", required=True)
    a.add_argument("--kind", required=True,
                   choices=["scaling", "affine", "block-phase", "ex0", "ex31"])
    a.add_argument("--c", type=float, default=2.0)
    a.add_argument("--a", type=float, default=0.0)
    a.add_argument("--b", type=float, default=0.0)
    a.add_argument("--w", help="wx,wy in radians/pixel")
    a.add_argument("--theta", help="comma-separated block phases (block-phase kind)")
    a.add_argument("--variant", default="translate", choices=["translate", "twin"])
    a.add_argument("--t0-tighten", type=int, help="tighten the example T0 by l (ex31)")
    a.add_argument("--tol", type=float, default=1e-10)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_ambiguity)

    n = sub.add_parser("analyze", help="compare a candidate pair to ground truth")
    n.add_argument("--truth", required=True, help="dataset directory from gen")
    n.add_argument("--candidate", required=True, help="pair directory from ambiguity")
    n.add_argument("--tol", type=float, default=1e-10)
    n.add_argument("--out")
    n.set_defaults(func=cmd_analyze)

    mp = sub.add_parser("mpc", help="check the mask phase constraint")
    mp.add_argument("--mask", required=True)
    mp.add_argument("--estimate", required=True)
    mp.add_argument("--gamma", type=float, default=1.0)
    mp.add_argument("--delta", type=float, default=0.4)
    mp.add_argument("--require-pass", action="store_true")
    mp.add_argument("--out")
    mp.set_defaults(func=cmd_mpc)

    oc = sub.add_parser("osc", help="check the object support constraint")
    oc.add_argument("--g0", required=True)
    oc.add_argument("--fbox", required=True, help="lo1,hi1,lo2,hi2 inclusive bounds")
    oc.add_argument("--t0", required=True, help="semicolon-separated a,b shifts")
    oc.add_argument("--require-pass", action="store_true")
    oc.add_argument("--out")
    oc.set_defaults(func=cmd_osc)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"ptychocert: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"ptychocert: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
