"""Command-line interface.

Subcommands: region, plan, allocate, simulate, sweep, lattice-cert.  Each
reads a JSON config (--config FILE; `simulate` alternatively takes direct
flags) and writes bit-stable CSV/JSON files into --out DIR.  Exit codes:
0 success, 2 validation error, 3 structurally infeasible request.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction

from .allocation import dof_from_params, phase_budget, plan_phase, plan_terminal_phase
from .errors import InfeasibleError, ValidationError
from .exponents import averages, averages_from_dict, label_users
from .harness import (compare, config_from_json_dict, export, load_json,
                      profile_from_config, resolve_point, run_experiment)
from .lattice import certify
from .rational import as_fraction, rat_str
from .region import corner_points, plan_regions, scheme_params_for_corner
from .simulator import SimKnobs, run_scheme


def _require_config(args):
    if not args.config:
        raise ValidationError("this subcommand needs --config FILE")
    return load_json(args.config)


def _averages_from_config(cfg):
    """Exponent averages from either an explicit block or a profile."""
    if "averages" in cfg:
        return averages_from_dict(cfg["averages"])
    if "profile" in cfg:
        S = int(cfg.get("S", 10))
        T = int(cfg.get("T", 3))
        return averages(profile_from_config(cfg["profile"], S, T))
    raise ValidationError("config needs either 'averages' or 'profile'")


def _out(args, name):
    return os.path.join(args.out, name)


def cmd_region(args):
    cfg = _require_config(args)
    raw = _averages_from_config(cfg)
    result = plan_regions(raw)
    doc = {
        "averages": result["averages"].to_json_dict(),
        "swapped": result["swapped"],
        "inner": result["inner"].to_json_dict(),
        "outer": result["outer"].to_json_dict(),
        "optimal": result["optimal"].to_json_dict(),
        "corners": result["corners"].to_json_dict(),
    }
    export(doc, _out(args, "regions.json"), "json")
    export(result["inner"], _out(args, "region_inner.csv"), "csv")
    export(result["outer"], _out(args, "region_outer.csv"), "csv")
    export(result["optimal"], _out(args, "region_optimal.csv"), "csv")
    return 0


def cmd_plan(args):
    cfg = _require_config(args)
    raw = _averages_from_config(cfg)
    labeled, swapped = label_users(raw)
    report = corner_points(labeled)
    doc = {"averages": labeled.to_json_dict(), "swapped": swapped,
           "corners": report.to_json_dict()}
    if "corner" in cfg or "delta_bar" in cfg:
        if "corner" in cfg:
            delta_bar, omega = scheme_params_for_corner(labeled, cfg["corner"])
            doc["corner"] = cfg["corner"]
        else:
            delta_bar = as_fraction(cfg["delta_bar"])
            omega = as_fraction(cfg.get("omega", 0))
        budget = phase_budget(labeled, delta_bar)
        point = dof_from_params(labeled, delta_bar, omega)
        doc["delta_bar"] = rat_str(delta_bar)
        doc["omega"] = rat_str(omega)
        doc["budget"] = budget.to_json_dict()
        doc["predicted"] = point.to_json_dict()
    export(doc, _out(args, "plan.json"), "json")
    export(report, _out(args, "corners.csv"), "csv")
    return 0


def cmd_allocate(args):
    cfg = _require_config(args)
    try:
        if cfg.get("terminal", False):
            plan = plan_terminal_phase(cfg["alpha1"], cfg["alpha2"],
                                       cfg["target_mean"])
        else:
            plan = plan_phase(cfg["alpha1"], cfg["alpha2"], cfg["beta1"],
                              cfg["beta2"], cfg["delta_bar"])
    except KeyError as exc:
        raise ValidationError(f"allocate config missing key {exc}") from exc
    export(plan.to_json_dict(), _out(args, "allocation.json"), "json")
    export(plan, _out(args, "allocation.csv"), "csv")
    return 0


def _simulate_config(args):
    """Merge --config with direct flags (flags win)."""
    cfg = load_json(args.config) if args.config else {}
    if args.profile:
        cfg["profile"] = load_json(args.profile)
    if args.snr_db:
        try:
            cfg["snr_db"] = [float(x) for x in args.snr_db.split(",") if x]
        except ValueError as exc:
            raise ValidationError(f"bad --snr-db list: {exc}") from exc
    if args.phases is not None:
        cfg["S"] = args.phases
    if args.phase_len is not None:
        cfg["T"] = args.phase_len
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.epsilon is not None:
        cfg["epsilon"] = args.epsilon
    return cfg


def cmd_simulate(args):
    cfg = _simulate_config(args)
    if "profile" not in cfg:
        raise ValidationError("simulate needs a profile (--profile or config)")
    S = int(cfg.get("S", 10))
    T = int(cfg.get("T", 3))
    prof = profile_from_config(cfg["profile"], S, T)
    seed = int(cfg.get("seed", 1))
    epsilon = as_fraction(cfg.get("epsilon", Fraction(1, 20)))
    snr_db = [float(x) for x in cfg.get("snr_db", [50.0])]
    knobs_node = cfg.get("knobs", {})
    defaults = SimKnobs()
    knobs = SimKnobs(
        range_factor=float(knobs_node.get("range_factor",
                                          defaults.range_factor)),
        common_gap_bits=float(knobs_node.get("common_gap_bits",
                                             defaults.common_gap_bits)),
        private_margin_bits=int(knobs_node.get("private_margin_bits",
                                               defaults.private_margin_bits)),
        pair_error_target=float(knobs_node.get("pair_error_target",
                                               defaults.pair_error_target)),
    )
    if "corner" in cfg:
        point = resolve_point(prof, corner=cfg["corner"])
        delta_bar, omega = point.delta_bar, point.omega
    else:
        delta_bar = as_fraction(cfg.get("delta_bar", Fraction(1, 3)))
        omega = as_fraction(cfg.get("omega", Fraction(1, 2)))
    summary = []
    for db in snr_db:
        result = run_scheme(profile=prof, delta_bar=delta_bar, omega=omega,
                            S=S, T=T, P=10.0 ** (db / 10.0), seed=seed,
                            epsilon=epsilon, knobs=knobs,
                            channel_model=cfg.get("channel_model", "iid"))
        export(result.to_json_dict(), _out(args, f"run_{db:g}dB.json"), "json")
        for user in (1, 2):
            summary.append({
                "snr_db": db, "user": user,
                "bits_per_slot": result.rate_bits_per_slot[user],
                "failures": sum(1 for f in result.failures
                                if f.user == user),
            })
    export(summary, _out(args, "simulate_summary.csv"), "csv")
    return 0


def cmd_sweep(args):
    raw = _require_config(args)
    cfg = config_from_json_dict(raw)
    report = run_experiment(cfg)
    verdict = compare(report, tolerance=float(raw.get("tolerance", 0.25)))
    export(cfg.to_json_dict(), _out(args, "sweep_config.json"), "json")
    export(report, _out(args, "rate_report.json"), "json")
    export(report, _out(args, "rate_report.csv"), "csv")
    export(verdict, _out(args, "verdict.json"), "json")
    export(verdict, _out(args, "verdict.csv"), "csv")
    return 0


def cmd_lattice_cert(args):
    cfg = load_json(args.config) if args.config else {}
    dims = [int(t) for t in cfg.get("T", [1, 2, 3, 4])]
    q = int(cfg.get("q", 4))
    thetas = [float(x) for x in cfg.get("theta", [1.0, 2.0, 4.0])]
    if not dims or not thetas:
        raise ValidationError("need at least one dimension and one theta")
    records = [certify(T, q=q, theta=theta) for T in dims for theta in thetas]
    export(records, _out(args, "lattice_cert.json"), "json")
    export(records, _out(args, "lattice_cert.csv"), "csv")
    return 0


_DISPATCH = {
    "region": cmd_region,
    "plan": cmd_plan,
    "allocate": cmd_allocate,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "lattice-cert": cmd_lattice_cert,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="miso-dof",
        description="DoF-region planner and phased-scheme simulator for the "
                    "two-user broadcast channel with imperfect and delayed "
                    "channel knowledge.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _DISPATCH.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", metavar="FILE",
                       help="JSON configuration file")
        p.add_argument("--out", metavar="DIR", default=".",
                       help="output directory (default: current)")
        if name == "simulate":
            p.add_argument("--profile", metavar="FILE",
                           help="JSON exponent profile")
            p.add_argument("--snr-db", metavar="LIST",
                           help="comma-separated dB values")
            p.add_argument("--phases", type=int, metavar="S")
            p.add_argument("--phase-len", type=int, metavar="T")
            p.add_argument("--seed", type=int)
            p.add_argument("--epsilon", metavar="RAT")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
