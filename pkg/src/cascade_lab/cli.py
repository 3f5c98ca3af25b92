"""Command line entry point: ``cascade-lab`` or ``python -m cascade_lab``."""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import __version__
from .harness import (ConfigError, HarnessError, format_report, load_artifact, load_config,
                      overall, report, resolve_threads, run_experiment, validate_config)


def _common(p, seed_required=False):
    p.add_argument("--seed", type=int, required=seed_required, help="64-bit run seed")
    p.add_argument("--out", help="artifact directory")
    p.add_argument("--threads", type=int, help="worker threads (default: CASCADE_LAB_THREADS or 1)")


def _on_off(v):
    v = v.lower()
    if v in ("on", "true", "1", "yes"):
        return True
    if v in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {v!r}")


def _floats(text):
    return [float(x) for x in text.replace(" ", "").split(",") if x]


def _ints(text):
    return [int(x) for x in text.replace(" ", "").split(",") if x]


def _sweep(text):
    hi, lo = (float(x) for x in text.split(":"))
    if not (hi > 0 and lo > 0):
        raise argparse.ArgumentTypeError("sweep bounds must be positive")
    a, b = sorted((math.log10(hi), math.log10(lo)))
    n = int(round(b - a))
    return [10 ** (b - k) for k in range(n + 1)]


def _parse_modes(text):
    out = []
    for part in text.split(";"):
        part = part.strip().strip("()")
        if part:
            m, n = (int(x) for x in part.split(","))
            out.append((m, n))
    return out


def build_parser():
    ap = argparse.ArgumentParser(prog="cascade-lab", description=__doc__)
    ap.add_argument("--version", action="version", version=f"cascade-lab {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="run an experiment from a TOML or JSON config")
    run.add_argument("--config", required=True)
    _common(run)

    rep = sub.add_parser("report", help="acceptance table over artifact directories")
    rep.add_argument("dirs", nargs="*")

    lat = sub.add_parser("lattice", help="build and certify a resonant set")
    lsub = lat.add_subparsers(dest="action", required=True)
    b = lsub.add_parser("build")
    b.add_argument("--g", type=int, default=4)
    b.add_argument("--spread", type=float, help="prototype spread (default by g)")
    b.add_argument("--rich-factor", type=float)
    b.add_argument("--N", "--scale-n", dest="N", type=int, default=32)
    b.add_argument("--f-scale", type=float, default=1e3)
    _common(b, True)
    v = lsub.add_parser("verify")
    v.add_argument("path", help="lambda.json")

    spec = sub.add_parser("spectrum", help="frequency model and Melnikov sampling")
    ssub = spec.add_subparsers(dest="action", required=True)
    r = ssub.add_parser("mu", aliases=["roots"], help="roots of the characteristic polynomial")
    r.add_argument("--lambda", "--lam", dest="lam", type=_floats, required=True, help="e.g. 0.6,0.8")
    m = ssub.add_parser("melnikov")
    m.add_argument("--sites", type=int, nargs="+", default=[2, 7])
    m.add_argument("--p", type=int, default=4)
    m.add_argument("--N", type=int, default=8)
    m.add_argument("--window", type=int, default=20)
    m.add_argument("--ell-max", type=int, default=6)
    m.add_argument("--samples", type=int, default=500)
    m.add_argument("--gammas", type=float, nargs="+", default=[1e-1, 1e-2, 1e-3, 1e-4, 1e-5])
    m.add_argument("--gamma-sweep", type=_sweep, help="decade sweep hi:lo, e.g. 1e-1:1e-4")
    _common(m, True)

    res = sub.add_parser("resonance", help="monomial classification and nonresonance audit")
    rsub = res.add_subparsers(dest="action", required=True)
    k = rsub.add_parser("classify")
    k.add_argument("--modes", required=True, help='e.g. "(4,0);(1,3);(-3,3);(0,0)"')
    k.add_argument("--sigma", required=True, help='e.g. "+-+-"')
    k.add_argument("--ell", type=_ints, default=None, help="e.g. 0 or 1,-1 (default zero)")
    k.add_argument("--sites", type=_ints, default=[1, 2])
    k.add_argument("--N", type=int, default=1)
    k.add_argument("--M0", type=int, default=32)
    a = rsub.add_parser("audit")
    a.add_argument("--sites", type=int, nargs="+", default=[1, 2])
    a.add_argument("--N", type=int, default=3)
    a.add_argument("--window", type=int, default=8)
    a.add_argument("--trials", type=int, default=100)
    _common(a, True)

    dyn = sub.add_parser("dynamics", help="toy traversal and lattice cascade")
    dsub = dyn.add_subparsers(dest="action", required=True)
    t = dsub.add_parser("toy")
    t.add_argument("--g", type=int, default=6)
    t.add_argument("--mu", type=float, default=1e-4)
    t.add_argument("--tol", type=float, default=1e-10)
    _common(t)
    c = dsub.add_parser("cascade")
    c.add_argument("--lattice", help="saved lambda.json (default: build one from --g)")
    c.add_argument("--g", type=int, default=6)
    c.add_argument("--mu", type=float, default=1e-2)
    c.add_argument("--spread", type=float, help="prototype spread (default by g)")
    c.add_argument("--rich-factor", type=float)
    c.add_argument("--nu", type=float, default=50.0)
    c.add_argument("--sigma", type=float, default=0.05)
    c.add_argument("--J1", type=_on_off, help="custom knobs: rectangle phases on/off")
    c.add_argument("--J2", type=float, help="custom knobs: quartic noise amplitude")
    c.add_argument("--R", type=float, help="custom knobs: quintic tail amplitude")
    c.add_argument("--zero", action="store_true", help="all knobs off")
    _common(c)
    return ap


def _config_from_args(args):
    cmd, act = args.cmd, getattr(args, "action", None)
    seed = args.seed if args.seed is not None else 0
    if cmd == "lattice":
        params = {"g": args.g, "spread": args.spread, "rich_factor": args.rich_factor, "N": args.N,
                  "f_scale": args.f_scale}
        return {"kind": "lattice-build", "seed": seed, "params": params}
    if cmd == "spectrum":
        params = {"sites": args.sites, "N": args.N, "window": args.window, "ell_max": args.ell_max,
                  "samples": args.samples, "p": args.p,
                  "gammas": args.gamma_sweep if args.gamma_sweep else args.gammas}
        return {"kind": "melnikov-sweep", "seed": seed, "params": params}
    if cmd == "resonance":
        params = {"audit_sites": args.sites, "audit_N": args.N, "audit_window": args.window,
                  "trials": args.trials}
        return {"kind": "nf-audit", "seed": seed, "params": params}
    if act == "toy":
        return {"kind": "toy-traversal", "seed": seed, "params": {"g": args.g, "mu": args.mu, "tol": args.tol}}
    params = {"g": args.g, "mu": args.mu, "nu": args.nu, "sigma": args.sigma, "lattice": args.lattice,
              "spread": args.spread, "rich_factor": args.rich_factor}
    if args.zero:
        params["perturbation"] = "zero"
    elif args.J1 is not None or args.J2 is not None or args.R is not None:
        params.update(perturbation="custom", J1=bool(args.J1), J2amplitude=args.J2 or 0.0, Rmodel=args.R or 0.0)
    return {"kind": "cascade", "seed": seed, "params": params}


def _finish(art, out):
    for c in art.checks:
        tag = f"criterion {c.criterion}" if c.criterion else "supplementary"
        print(f"[{'PASS' if c.passed else 'FAIL'}] {tag}: {c.name} = {c.measured} (target {c.target})")
    print(f"hash {art.hash}")
    if out:
        print(f"artifacts in {out}")
    return 0 if art.passed else 1


def _classify(args):
    from .resonance import K_and_F, classify
    from .spectrum import make_sites
    modes = _parse_modes(args.modes)
    sigma = [1 if c == "+" else -1 for c in args.sigma.strip() if c in "+-"]
    sites = make_sites(args.sites, 1)
    ell = args.ell if args.ell and len(args.ell) == sites.d else [0] * sites.d
    if len(sigma) != len(modes):
        print("error: --sigma must give one sign per mode", file=sys.stderr)
        return 2
    cls = classify(modes, ell, sigma, sites, args.N, args.M0)
    K, F = K_and_F(modes, ell, sigma, sites)
    print(json.dumps({"tag": cls.tag, "witness": cls.witness, "K": K,
                      "F_at_0.75": F([0.75] * sites.d)}, default=list))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "report":
            arts = [load_artifact(d) for d in args.dirs]
            rows = report(*arts)
            print(format_report(rows))
            return 1 if overall(rows) == "fail" else 0
        if args.cmd == "lattice" and args.action == "verify":
            from .lattice import CertifiedLambda, verify_properties
            with open(args.path) as fh:
                lam = CertifiedLambda.from_dict(json.load(fh))
            rep = verify_properties(lam.candidate())
            print(json.dumps(rep.to_dict(), indent=1, sort_keys=True, default=str))
            return 0 if rep.ok else 1
        if args.cmd == "spectrum" and args.action in ("mu", "roots"):
            from .spectrum import mu_roots
            print(" ".join(repr(x.item()) for x in mu_roots(args.lam)))
            return 0
        if args.cmd == "resonance" and args.action == "classify":
            return _classify(args)
        threads = resolve_threads(args.threads)
        if args.cmd == "run":
            cfg = load_config(args.config)
            raw = cfg.to_dict()
            if args.seed is not None:
                raw["seed"] = args.seed
            cfg = validate_config(raw)
        else:
            cfg = validate_config(_config_from_args(args))
        out = args.out if args.out is not None else cfg.out
        art = run_experiment(cfg, out=out, threads=threads)
        return _finish(art, out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (HarnessError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
