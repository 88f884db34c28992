"""Command-line entry point: ``thermodbar <verb> ...`` writing JSON reports to stdout."""

from __future__ import annotations

import argparse
import json
import sys

from . import experiments
from .coupling_lab import dbar_upper_bounds, simulate_pair, z_chain
from .dbar_oracle import dbar_sandwich
from .gmeasure_lab import GFunction, g_measure
from .potential_lab import Potential, load_table
from .pressure_lab import gurevich_pressure, spr_classify
from .rpf_transfer import normalized_potential_gap, rpf_eigendata
from .shift_core import BoundViolation, CapacityError

EXIT_OK, EXIT_USAGE, EXIT_ASSERT = 0, 1, 2


def _emit(doc) -> None:
    json.dump(doc, sys.stdout, indent=2, sort_keys=True, default=experiments._jsonable)
    sys.stdout.write("\n")


def _potential(path) -> Potential:
    t = load_table(path)
    if isinstance(t, GFunction):
        return t.log_potential()
    return t


def _g(path) -> GFunction:
    t = load_table(path)
    if not isinstance(t, GFunction):
        raise ValueError(f"{path} does not hold a g-function")
    return t


def cmd_pressure(args):
    phi = _potential(args.potential)
    est = gurevich_pressure(phi, args.state, args.n_max)
    rec = spr_classify(phi, args.state, args.n_max)
    _emit({"pressure": est.limit, "perron": est.reference, "sequence": est.sequence,
           "spr_margin": rec.spr_margin, "classification": rec.classification,
           "loop_rate": rec.loop_rate})


def cmd_rpf(args):
    eig = rpf_eigendata(_potential(args.potential), args.depth)
    _emit({"lambda": eig.lam, "depth": eig.depth, "h": eig.h.table, "nu": eig.nu.table,
           "residual": eig.residual, "iterations": eig.iterations})


def cmd_gmeasure(args):
    mu = g_measure(_g(args.g), args.depth)
    _emit({"depth": mu.depth, "alphabet_size": mu.alphabet_size, "table": mu.table})


def cmd_ggap(args):
    rep = normalized_potential_gap(_potential(args.phi), _potential(args.tau))
    _emit({"gap": rep.gap, "sup_term": rep.sup_term, "ratio_term": rep.ratio_term})


def cmd_couple(args):
    g, h = _g(args.g), _g(args.h)
    b = dbar_upper_bounds(g, h)
    zc = z_chain(g, h)
    doc = dict(b._asdict())
    doc.update({"expected_return": zc.expected_return, "mismatch_mass": zc.mismatch_mass,
                "match_prob": zc.match_prob[:8]})
    if args.simulate:
        s = simulate_pair(g, h, steps=args.simulate, seed=args.seed)
        doc["simulation"] = s._asdict()
    _emit(doc)


def cmd_dbar(args):
    n_list = [int(v) for v in args.nlist.split(",")]
    rep = dbar_sandwich(_g(args.g), _g(args.h), n_list)
    _emit({"lower": rep.lower, "upper": rep.upper, "per_n": {str(k): v for k, v in rep.per_n.items()},
           "certified": rep.certified, "exact": rep.exact})


def cmd_sweep(args):
    cfg = experiments.ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.output:
        cfg.output = args.output
    if args.csv:
        cfg.csv_output = args.csv
    if args.timing:
        cfg.record_time = True
    report = experiments.run(cfg)
    if not cfg.output:
        sys.stdout.write(report.to_json() + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thermodbar", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("pressure", help="Gurevich pressure and recurrence margin")
    s.add_argument("--potential", required=True)
    s.add_argument("--state", type=int, default=0)
    s.add_argument("--nmax", "--n-max", dest="n_max", type=int, default=16)
    s.set_defaults(func=cmd_pressure)

    s = sub.add_parser("rpf", help="Perron eigendata of the transfer operator")
    s.add_argument("--potential", required=True)
    s.add_argument("--depth", type=int, default=None)
    s.set_defaults(func=cmd_rpf)

    s = sub.add_parser("gmeasure", help="cylinder masses of the g-measure")
    s.add_argument("--g", required=True)
    s.add_argument("--depth", type=int, required=True)
    s.set_defaults(func=cmd_gmeasure)

    s = sub.add_parser("ggap", help="distance between normalized potentials")
    s.add_argument("--phi", required=True)
    s.add_argument("--tau", required=True)
    s.set_defaults(func=cmd_ggap)

    s = sub.add_parser("couple", help="coupling-based d-bar upper bounds")
    s.add_argument("--g", required=True)
    s.add_argument("--h", required=True)
    s.add_argument("--depth", type=int, default=None, help="accepted for symmetry; unused")
    s.add_argument("--simulate", type=int, default=0, metavar="STEPS")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_couple)

    s = sub.add_parser("dbar", help="block-transport lower bound against the coupling bound")
    s.add_argument("--g", required=True)
    s.add_argument("--h", required=True)
    s.add_argument("--nlist", default="1,2,3")
    s.set_defaults(func=cmd_dbar)

    s = sub.add_parser("sweep", help="run an experiment config")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--output", default=None)
    s.add_argument("--csv", default=None)
    s.add_argument("--timing", action="store_true", help="record wall time in the report")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        args.func(args)
    except BoundViolation as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except (OSError, ValueError, KeyError, CapacityError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
