"""Command-line entry point.

Every subcommand writes its outputs into ``--out`` and exits with status 0
iff all checks it enabled passed (1 otherwise, 2 on usage errors).
"""
import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .bound_verifier import (
    ModeSet,
    T1Params,
    T2Params,
    T4Params,
    build_schedule,
    d_sequence,
    hypothesis_bound,
    profile_modes,
    split_majorant,
)
from .errors import ConfigurationError, NSGalerkinError, PreconditionError
from .experiments import (
    ExperimentConfig,
    load_config,
    profile_field,
    recompute_verdict,
    run_bootstrap_study,
    run_constants,
    run_h_half_study,
    run_simulation,
    run_smallness_experiment,
    StudyReport,
    _constants_dict,
)
from .spectral_core import SpectralField, read_field

SUBCOMMANDS = {
    "simulate": "simulate",
    "verify-bounds": "verify-bounds",
    "bootstrap-study": "bootstrap",
    "h-half-study": "h-half",
    "smallness": "smallness",
    "constants": "constants",
}


def _add_common(p):
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--cutoff", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--dt", type=float)
    p.add_argument("--scheme", help="time scheme, or splitting scheme for verify-bounds")
    p.add_argument("--no-nonlinear", action="store_true", dest="no_nonlinear")
    p.add_argument("--complex", action="store_true", help="complex (non-real) data")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="any other configuration key")


def build_parser():
    parser = argparse.ArgumentParser(prog="nsgalerkin",
                                     description="Fourier-Galerkin Navier-Stokes studies")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        _add_common(sub.add_parser(name))
    rp = sub.add_parser("report", help="recompute verdicts of finished runs")
    rp.add_argument("dirs", nargs="*", help="output directories (default: --out)")
    rp.add_argument("--out", help="output directory")
    rp.add_argument("--config", help="ignored; accepted for uniformity")
    return parser


def resolve_config(args, kind):
    """Defaults < config file < ``--set`` < explicit flags."""
    mapping = {"kind": kind}
    if args.config:
        mapping.update(load_config(args.config))
        mapping["kind"] = kind
    for item in args.set:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        mapping[key.strip()] = value.strip()
    for name in ("seed", "out", "cutoff", "epsilon", "rho", "t_end", "dt"):
        value = getattr(args, name)
        if value is not None:
            mapping[name] = value
    if args.scheme is not None:
        mapping["split_scheme" if kind == "verify-bounds" else "scheme"] = args.scheme
    if args.no_nonlinear:
        mapping["nonlinear"] = False
    if args.complex:
        mapping["real"] = False
    return ExperimentConfig.from_mapping({k: v if isinstance(v, str) else v
                                          for k, v in mapping.items()})


def _targets(lo, hi):
    n = int(math.floor(hi))
    r = np.arange(-n, n + 1)
    g = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    n2 = np.einsum("pi,pi->p", g, g)
    keep = (n2 > 0) & (n2 >= lo * lo * (1 - 1e-12)) & (n2 <= hi * hi * (1 + 1e-12))
    return [tuple(int(x) for x in v) for v in g[keep]]


def run_verify_bounds(cfg, out_dir=None):
    """Region-wise splitting check for every target in the scheme's range."""
    report = StudyReport(kind=cfg.kind, config=_cfg_dict(cfg),
                         constants=_constants_dict(cfg.r_max))
    scheme = cfg.split_scheme.upper()
    u = read_field(cfg.field) if cfg.field else profile_field(cfg.cutoff, cfg.epsilon, cfg.alpha)
    C = report.constants["C"]
    if scheme == "T2":
        params = T2Params(cfg.epsilon, C)
        lo = 1.0
    elif scheme == "T1":
        D = cfg.D if cfg.D is not None else cfg.epsilon / 10
        sched = build_schedule(cfg.rho, cfg.epsilon, cfg.k_minus1, D, max(cfg.n_max, cfg.n))
        params = T1Params(sched, cfg.n, C)
        lo = float(sched.k[cfg.n + 1])
        if not cfg.field:
            # default support saturates the rung-n hypothesis instead of the plain profile
            base = profile_modes(cfg.cutoff, 1.0)
            u = ModeSet(base.vectors, hypothesis_bound(sched, cfg.n, base.norm2))
    elif scheme == "T4":
        from .experiments import h_half_K0
        from .norms import sobolev_norm
        c = cfg.c if cfg.c is not None else report.constants["c_coeff_sum"]
        L0 = sobolev_norm(u, 0.5) ** 2
        K0 = h_half_K0(L0, cfg.rho, cfg.n_max)
        ds = d_sequence(max(cfg.n, 1), L0, c)
        params = T4Params(L0, c, float(ds.values[cfg.n]), cfg.n, K0)
        lo = K0 * 2 ** (cfg.n + 1)
    else:
        raise ConfigurationError(f"unknown splitting scheme {cfg.split_scheme!r}; use T2, T1 or T4")
    hi = (u.cutoff if isinstance(u, SpectralField) else cfg.cutoff) / 2
    targets = _targets(lo, hi)
    if not targets:
        report.infeasible.append(f"no targets with {lo:.6g} <= |k| <= {hi:.6g}")
    rows = []
    for k in targets:
        try:
            b = split_majorant(u, k, scheme, params)
        except PreconditionError as err:
            report.notes.append(str(err))
            continue
        for r in b.regions:
            rows.append((k, r.name, r.computed, r.claimed, r.margin))
            report.add(f"region_{r.name}", f"k={k}", r.computed, r.claimed)
        rows.append((k, "total", b.total, b.claimed_total, b.claimed_total - b.total))
        report.add("total", f"k={k}", b.total, b.claimed_total)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "verify_bounds.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k1", "k2", "k3", "region", "computed", "claimed", "margin"])
            for k, name, comp, claim, margin in rows:
                w.writerow([*k, name, repr(comp), repr(claim), repr(margin)])
        report.write(out_dir)
    return report, None


def _cfg_dict(cfg):
    from dataclasses import asdict
    return asdict(cfg)


RUNNERS = {
    "simulate": run_simulation,
    "smallness": run_smallness_experiment,
    "bootstrap": run_bootstrap_study,
    "h-half": run_h_half_study,
    "constants": run_constants,
    "verify-bounds": run_verify_bounds,
}


def _summarise(report, out_dir, stream):
    failed = [c for c in report.checks if not c.passed]
    status = "PASS" if report.passed else ("REFUSED" if report.refused else "FAIL")
    print(f"{report.kind}: {status} ({len(report.checks) - len(failed)}/{len(report.checks)} "
          f"checks passed) -> {out_dir}", file=stream)
    for c in failed[:10]:
        print(f"  failed {c.check} [{c.subject}]: {c.computed:.6g} > {c.claimed:.6g}", file=stream)
    if len(failed) > 10:
        print(f"  ... {len(failed) - 10} more", file=stream)
    if report.infeasible:
        print(f"  infeasible at this cutoff: {', '.join(map(str, report.infeasible))}", file=stream)
    for n in report.notes:
        print(f"  note: {n}", file=stream)


def _report(args, stream):
    dirs = list(args.dirs) or ([args.out] if args.out else [])
    if not dirs:
        print("report: give output directories or --out", file=sys.stderr)
        return 2
    all_ok = True
    for d in dirs:
        try:
            ok, rows = recompute_verdict(d)
        except FileNotFoundError:
            print(f"{d}: no checks.csv", file=stream)
            all_ok = False
            continue
        kind = "?"
        stored = None
        rp = os.path.join(d, "report.json")
        if os.path.exists(rp):
            with open(rp) as fh:
                data = json.load(fh)
            kind, stored = data.get("kind", "?"), data.get("passed")
        n_fail = sum(float(r["computed"]) > float(r["claimed"]) for r in rows)
        agree = "" if stored is None or stored == ok else " (disagrees with report.json)"
        print(f"{d}: {kind} {'PASS' if ok else 'FAIL'} "
              f"({len(rows) - n_fail}/{len(rows)} checks){agree}", file=stream)
        all_ok &= ok and (stored is None or stored == ok)
    return 0 if all_ok else 1


def main(argv=None, stream=None):
    stream = stream or sys.stdout
    args = build_parser().parse_args(argv)
    if args.command == "report":
        return _report(args, stream)
    kind = SUBCOMMANDS[args.command]
    try:
        cfg = resolve_config(args, kind)
        report, _ = RUNNERS[kind](cfg, cfg.out)
    except (NSGalerkinError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    _summarise(report, cfg.out, stream)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
