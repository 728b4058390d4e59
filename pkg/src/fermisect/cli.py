"""Command-line interface.

Subcommands mirror the library layers: ``curve certify``, ``sectorize``,
``count mom3`` / ``count pairs``, ``norms eval`` / ``norms resectorize``,
``scan`` and ``verify``.  Exit codes: 0 pass, 1 fail, 2 incomplete.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import curve as _curve
from . import harness as _harness
from . import momentum as _momentum
from . import norms as _norms
from . import reporting as _reporting
from . import sectorization as _sect
from .curve import CurveModel
from .errors import FermisectError


def _load_curve(path):
    with open(path) as fh:
        return CurveModel.from_dict(json.load(fh))


def _load_sig(path):
    with open(path) as fh:
        return _sect.Sectorization.from_dict(json.load(fh))


def _dump(data, out):
    text = json.dumps(data, indent=1, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_point(text):
    parts = text.replace(",", " ").split()
    return np.array([float(parts[0]), float(parts[1])])


def cmd_curve_certify(args):
    curve = _load_curve(args.curve)
    cert = _curve.certify(curve, n_max=args.nmax, grid=args.grid,
                          tol=args.tol)
    data = {
        "symmetric": cert.symmetric,
        "n_max": cert.n_max,
        "grid_size": cert.grid_size,
        "n0": cert.n0,
        "min_jet_gap": cert.min_jet_gap,
        "symmetry_center": (None if cert.symmetry_center is None
                            else list(map(float, cert.symmetry_center))),
        "per_point_order": [[t, o] for t, o in cert.per_point_order],
    }
    _dump(data, args.out)
    return 0


def cmd_sectorize(args):
    curve = _load_curve(args.curve)
    sig = _sect.build(curve, M=args.M, j=args.j, ell=args.ell,
                      aleph=args.aleph, Lambda=args.Lambda)
    _dump(sig.to_dict(), args.out)
    return 0


def cmd_count_mom3(args):
    sig = _load_sig(args.sig)
    target = _momentum.Target.of_sector(
        _sect.sector_at(sig.curve, args.target_theta, sig.ell, sig.Lambda))
    res = _momentum.mom_count(sig, 3, target, mode=args.mode,
                              emit_tuples=args.emit_tuples)
    data = {"count": res.count, "mode": res.mode, "Lambda": sig.Lambda,
            "ell": sig.ell, "elapsed": res.elapsed,
            "pruned_pairs": res.pruned_pairs}
    if args.emit_tuples:
        data["tuples"] = [list(t) for t in res.tuples]
    _dump(data, args.out)
    return 0


def cmd_count_pairs(args):
    sig = _load_sig(args.sig)
    if args.target_kind == "momentum-pair":
        count = _momentum.pair_sum_count(sig, "momentum_pair",
                                         _parse_point(args.k1),
                                         _parse_point(args.k2))
    elif args.target_kind == "sector-pair":
        s1 = sig[args.s1]
        s2 = sig[args.s2]
        count = _momentum.pair_sum_count(sig, "sector_pair", s1, s2)
    else:
        count = _momentum.pair_sum_count(
            sig, "momentum_plus_sector", _parse_point(args.k1), sig[args.s1])
    _dump({"count": count, "ell": sig.ell, "Lambda": sig.Lambda,
           "target_kind": args.target_kind}, args.out)
    return 0


def cmd_norms_eval(args):
    sig = _load_sig(args.sig)
    with open(args.kernel) as fh:
        K = _norms.SectorKernel.from_dict(json.load(fh), sig)
    rep = _norms.p_norm(K, args.p)
    _dump({"p": args.p, "value": rep.value,
           "argmax": [[list(pos), list(sec)] for pos, sec in rep.argmax_legs]},
          args.out)
    return 0


def cmd_norms_resectorize(args):
    src = _load_sig(args.src)
    dst = _load_sig(args.dst)
    with open(args.kernel) as fh:
        K = _norms.SectorKernel.from_dict(json.load(fh), src)
    Kf = _norms.resectorize(K, dst)
    _dump(Kf.to_dict(), args.out)
    return 0


def cmd_scan(args):
    cfg = _harness.ScanConfig.from_json(args.config)
    if args.workers is not None:
        cfg.workers = args.workers
    if args.budget_seconds is not None:
        cfg.budget_seconds = args.budget_seconds
    report = _harness.scaling_scan(cfg)
    _reporting.write_csv(report, args.out)
    if args.json:
        _reporting.write_json(report, args.json)
    if not args.no_plot:
        out = str(args.out)
        stem = out.rsplit(".", 1)[0] if "." in out.rsplit("/", 1)[-1] else out
        png = args.plot or (stem + ".png")
        _reporting.render_figure(report, png)
    return 0 if report.complete else 2


def cmd_verify(args):
    report = _reporting.read_csv(args.report)
    verdict = _harness.verify_bounds(report, band=args.band,
                                     slope=args.slope, slope_tol=args.tol,
                                     slope_min=args.slope_min)
    out = {"pass": verdict.passed, "reasons": verdict.reasons,
           "fitted_slope": report.fitted_slope}
    sys.stdout.write(json.dumps(out, indent=1) + "\n")
    return verdict.exit_code


def build_parser():
    p = argparse.ArgumentParser(prog="fermisect")
    sub = p.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("curve", help="curve-level operations")
    csub = pc.add_subparsers(dest="subcommand", required=True)
    cc = csub.add_parser("certify", help="asymmetry certification")
    cc.add_argument("--curve", required=True)
    cc.add_argument("--nmax", type=int, default=6)
    cc.add_argument("--grid", type=int, default=1024)
    cc.add_argument("--tol", type=float, default=1e-6)
    cc.add_argument("--out")
    cc.set_defaults(func=cmd_curve_certify)

    ps = sub.add_parser("sectorize", help="build a sectorization")
    ps.add_argument("--curve", required=True)
    ps.add_argument("--M", type=float, required=True)
    ps.add_argument("--j", type=int, required=True)
    ps.add_argument("--ell", type=float)
    ps.add_argument("--aleph", type=float)
    ps.add_argument("--Lambda", type=float)
    ps.add_argument("--out")
    ps.set_defaults(func=cmd_sectorize)

    pk = sub.add_parser("count", help="sector-tuple counting")
    ksub = pk.add_subparsers(dest="subcommand", required=True)
    km = ksub.add_parser("mom3")
    km.add_argument("--sig", required=True)
    km.add_argument("--target-theta", type=float, required=True)
    km.add_argument("--mode", choices=("rect", "sampled"), default="rect")
    km.add_argument("--emit-tuples", action="store_true")
    km.add_argument("--out")
    km.set_defaults(func=cmd_count_mom3)
    kp = ksub.add_parser("pairs")
    kp.add_argument("--sig", required=True)
    kp.add_argument("--target-kind", required=True,
                    choices=("momentum-pair", "sector-pair",
                             "momentum-plus-sector"))
    kp.add_argument("--k1")
    kp.add_argument("--k2")
    kp.add_argument("--s1", type=int)
    kp.add_argument("--s2", type=int)
    kp.add_argument("--out")
    kp.set_defaults(func=cmd_count_pairs)

    pn = sub.add_parser("norms", help="kernel norms")
    nsub = pn.add_subparsers(dest="subcommand", required=True)
    ne = nsub.add_parser("eval")
    ne.add_argument("--kernel", required=True)
    ne.add_argument("--sig", required=True)
    ne.add_argument("--p", type=int, default=1)
    ne.add_argument("--out")
    ne.set_defaults(func=cmd_norms_eval)
    nr = nsub.add_parser("resectorize")
    nr.add_argument("--kernel", required=True)
    nr.add_argument("--from", "--src", dest="src", required=True,
                    help="sectorization the kernel lives on")
    nr.add_argument("--to", "--dst", dest="dst", required=True,
                    help="target sectorization")
    nr.add_argument("--out")
    nr.set_defaults(func=cmd_norms_resectorize)

    pscan = sub.add_parser("scan", help="scaling scan")
    pscan.add_argument("--config", required=True)
    pscan.add_argument("--out", required=True)
    pscan.add_argument("--json")
    pscan.add_argument("--workers", type=int)
    pscan.add_argument("--budget-seconds", type=float)
    pscan.add_argument("--plot", help="explicit figure path")
    pscan.add_argument("--no-plot", action="store_true")
    pscan.set_defaults(func=cmd_scan)

    pv = sub.add_parser("verify", help="check a report against thresholds")
    pv.add_argument("--report", required=True)
    pv.add_argument("--band", type=float, default=4.0)
    pv.add_argument("--slope", type=float)
    pv.add_argument("--tol", type=float, default=0.1)
    pv.add_argument("--slope-min", type=float)
    pv.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FermisectError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
