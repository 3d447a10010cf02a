"""Experiment orchestration: SNR sweeps, slope fits, planner comparison, I/O.

An experiment pins a feedback profile and a scheme operating point (either a
named planner corner or an explicit (delta_bar, omega)), runs the simulator
over an SNR grid with a fixed seed list, averages delivered bits per slot,
and fits each user's rate-vs-log2(P) slope.  The fitted slopes sit next to
the planner's exact prediction so the two can be compared mechanically.

All file output is bit-stable: CSV with a header row and LF line endings,
rationals rendered "p/q", floats with 12 significant digits, JSON with keys
in canonical (sorted) order.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from .allocation import AllocationPlan, dof_from_params, phase_budget
from .errors import DegenerateGrid, ValidationError
from .exponents import (ExponentProfile, averages, label_users, mat_profile,
                        profile, profile_from_dict)
from .rational import as_fraction, rat_str
from .region import (CornerReport, DofRegion, NotTight,
                     imperfect_delayed_threshold, optimal_region,
                     scheme_params_for_corner)
from .simulator import SimKnobs, run_scheme

DEFAULT_SNR_GRID = (30.0, 40.0, 50.0, 60.0, 70.0)


def _snr_to_power(snr_db):
    return 10.0 ** (float(snr_db) / 10.0)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: profile, operating point, SNR grid, trials and seeds.

    The operating point is either `corner` (resolved through the planner's
    corner table and required to be active) or an explicit (delta_bar,
    omega) pair; exactly one route must be given.  Each trial uses one entry
    of `seeds` at every SNR point, so grid points share their channel draws
    trial-for-trial and slope fits see common random numbers.
    """

    profile: ExponentProfile
    S: int
    T: int
    snr_db: tuple = DEFAULT_SNR_GRID
    corner: str | None = None
    delta_bar: Fraction | None = None
    omega: Fraction | None = None
    seeds: tuple = (1, 2, 3, 4, 5, 6)
    epsilon: Fraction = Fraction(1, 20)
    channel_model: str = "iid"
    knobs: SimKnobs = SimKnobs()
    workers: int | None = None

    def validate(self) -> "ExperimentConfig":
        self.profile.validate()
        if self.S < 2:
            raise ValidationError("need at least two phases")
        if self.T < 1:
            raise ValidationError("phase length must be positive")
        if self.profile.n < (2 * self.S - 1) * self.T:
            raise ValidationError(
                f"profile covers {self.profile.n} slots; the interleaved "
                f"phases need {(2 * self.S - 1) * self.T}")
        if not self.snr_db:
            raise ValidationError("empty SNR grid")
        if any(b <= a for a, b in zip(self.snr_db, self.snr_db[1:])):
            raise ValidationError("SNR grid must be strictly increasing")
        if not self.seeds:
            raise ValidationError("need at least one trial seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValidationError("trial seeds must be distinct")
        have_corner = self.corner is not None
        have_point = self.delta_bar is not None or self.omega is not None
        if have_corner == have_point:
            raise ValidationError(
                "give exactly one of: corner label, or explicit "
                "(delta_bar, omega)")
        if have_point and (self.delta_bar is None or self.omega is None):
            raise ValidationError("explicit point needs both delta_bar and omega")
        if not (0 <= self.epsilon < 1):
            raise ValidationError("epsilon must lie in [0, 1)")
        if self.workers is not None and self.workers < 1:
            raise ValidationError("workers must be positive")
        return self

    @property
    def trials(self):
        return len(self.seeds)

    def to_json_dict(self):
        out = {
            "profile": self.profile.to_json_dict(),
            "S": self.S,
            "T": self.T,
            "snr_db": [float(x) for x in self.snr_db],
            "seeds": list(self.seeds),
            "epsilon": rat_str(self.epsilon),
            "channel_model": self.channel_model,
            "knobs": {
                "range_factor": self.knobs.range_factor,
                "common_gap_bits": self.knobs.common_gap_bits,
                "private_margin_bits": self.knobs.private_margin_bits,
                "pair_error_target": self.knobs.pair_error_target,
            },
        }
        if self.corner is not None:
            out["corner"] = self.corner
        else:
            out["delta_bar"] = rat_str(self.delta_bar)
            out["omega"] = rat_str(self.omega)
        if self.workers is not None:
            out["workers"] = self.workers
        return out


def profile_from_config(node, S, T):
    """Profile from a config node: explicit sequences or a named family."""
    if not isinstance(node, dict):
        raise ValidationError("profile must be a JSON object")
    need = (2 * S - 1) * T
    kind = node.get("kind")
    if kind is None:
        return profile_from_dict(node)
    if kind == "mat":
        return mat_profile(-(-need // 3), eta=int(node.get("eta", 3)))
    if kind == "zero":
        zero = [0] * need
        return profile(zero, zero, zero, zero, eta=int(node.get("eta", T)))
    raise ValidationError(f"unknown profile kind {kind!r}")


def config_from_json_dict(d: dict) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from parsed JSON."""
    if not isinstance(d, dict):
        raise ValidationError("config must be a JSON object")
    try:
        S = int(d.get("S", 10))
        T = int(d.get("T", 3))
        prof = profile_from_config(d["profile"], S, T)
    except KeyError as exc:
        raise ValidationError(f"config missing key {exc}") from exc
    knobs_node = d.get("knobs", {})
    if not isinstance(knobs_node, dict):
        raise ValidationError("knobs must be a JSON object")
    allowed = {"range_factor", "common_gap_bits", "private_margin_bits",
               "pair_error_target"}
    unknown = set(knobs_node) - allowed
    if unknown:
        raise ValidationError(f"unknown knob(s): {sorted(unknown)}")
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
    seeds = d.get("seeds")
    if seeds is None:
        seeds = tuple(range(1, int(d.get("trials", 6)) + 1))
    else:
        seeds = tuple(int(s) for s in seeds)
        if "trials" in d and int(d["trials"]) != len(seeds):
            raise ValidationError("trials disagrees with the seed list length")
    cfg = ExperimentConfig(
        profile=prof, S=S, T=T,
        snr_db=tuple(float(x) for x in d.get("snr_db", DEFAULT_SNR_GRID)),
        corner=d.get("corner"),
        delta_bar=as_fraction(d["delta_bar"]) if "delta_bar" in d else None,
        omega=as_fraction(d["omega"]) if "omega" in d else None,
        seeds=seeds,
        epsilon=as_fraction(d.get("epsilon", Fraction(1, 20))),
        channel_model=d.get("channel_model", "iid"),
        knobs=knobs,
        workers=int(d["workers"]) if d.get("workers") is not None else None,
    )
    return cfg.validate()


# ---------------------------------------------------------------------------
# Operating-point resolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResolvedPoint:
    """Scheme parameters plus the planner's exact prediction.

    delta_bar/omega are in the simulator's literal user ordering; predicted
    DoF are per literal user as well (mirrored back if the planner had to
    relabel).  `tight` records whether the planner region is provably
    optimal for this profile.
    """

    delta_bar: Fraction
    omega: Fraction
    predicted: dict          # user -> Fraction
    tight: bool
    min_beta: Fraction
    threshold: Fraction


def resolve_point(profile_or_cfg, *, corner=None, delta_bar=None,
                  omega=None) -> ResolvedPoint:
    if isinstance(profile_or_cfg, ExperimentConfig):
        cfg = profile_or_cfg
        prof, corner = cfg.profile, cfg.corner
        delta_bar, omega = cfg.delta_bar, cfg.omega
    else:
        prof = profile_or_cfg
    avg = averages(prof)
    labeled, swapped = label_users(avg)
    if corner is not None:
        delta_bar, omega_lab = scheme_params_for_corner(labeled, corner)
    else:
        if delta_bar is None or omega is None:
            raise ValidationError(
                "resolve_point needs a corner label or both delta_bar "
                "and omega")
        delta_bar = as_fraction(delta_bar)
        omega_lit = as_fraction(omega)
        omega_lab = 1 - omega_lit if swapped else omega_lit
    phase_budget(labeled, delta_bar)  # raises DeltaBarTooLarge when infeasible
    point = dof_from_params(labeled, delta_bar, omega_lab)
    if swapped:
        predicted = {1: point.d2, 2: point.d1}
        omega_lit = 1 - omega_lab
    else:
        predicted = {1: point.d1, 2: point.d2}
        omega_lit = omega_lab
    tight = isinstance(optimal_region(labeled), DofRegion)
    min_beta = min(labeled.b1, labeled.b2)
    threshold = imperfect_delayed_threshold(labeled)
    return ResolvedPoint(delta_bar=delta_bar, omega=omega_lit,
                         predicted=predicted, tight=tight,
                         min_beta=min_beta, threshold=threshold)


# ---------------------------------------------------------------------------
# Sweeping and fitting
# ---------------------------------------------------------------------------


def _one_run(args):
    """One (SNR point, trial) cell; top-level so worker processes can load it."""
    (prof, delta_bar, omega, S, T, snr_db, seed, epsilon, knobs, model) = args
    r = run_scheme(profile=prof, delta_bar=delta_bar, omega=omega, S=S, T=T,
                   P=_snr_to_power(snr_db), seed=seed, epsilon=epsilon,
                   knobs=knobs, channel_model=model)
    fail = {u: sum(1 for f in r.failures if f.user == u) for u in (1, 2)}
    return {"snr_db": float(snr_db), "seed": seed,
            "rate": dict(r.rate_bits_per_slot), "failures": fail,
            "slots_used": r.slots_used}


@dataclass(frozen=True)
class RatePoint:
    """Trial-averaged delivered rate at one SNR point."""

    snr_db: float
    log2_P: float
    bits_per_slot: dict   # user -> mean delivered payload bits per slot
    failures: dict        # user -> decode-failure records over all trials

    def to_json_dict(self):
        return {"snr_db": self.snr_db, "log2_P": self.log2_P,
                "bits_per_slot": {str(u): self.bits_per_slot[u] for u in (1, 2)},
                "failures": {str(u): self.failures[u] for u in (1, 2)}}


@dataclass(frozen=True)
class RateReport:
    """Sweep outcome: per-SNR delivered rates, fitted slopes, prediction."""

    points: tuple
    slots_per_run: int
    trials: int
    seeds: tuple
    d_hat: dict           # user -> fitted DoF slope (bits per log2 P)
    residual: dict        # user -> RMS residual of that fit
    predicted: dict       # user -> exact planner DoF (Fraction)
    delta_bar: Fraction
    omega: Fraction
    tight: bool
    min_beta: Fraction
    threshold: Fraction

    @property
    def sum_d_hat(self):
        return self.d_hat[1] + self.d_hat[2]

    def to_json_dict(self):
        return {
            "points": [p.to_json_dict() for p in self.points],
            "slots_per_run": self.slots_per_run,
            "trials": self.trials,
            "seeds": list(self.seeds),
            "d_hat": {str(u): self.d_hat[u] for u in (1, 2)},
            "sum_d_hat": self.sum_d_hat,
            "residual": {str(u): self.residual[u] for u in (1, 2)},
            "predicted": {str(u): rat_str(self.predicted[u]) for u in (1, 2)},
            "delta_bar": rat_str(self.delta_bar),
            "omega": rat_str(self.omega),
            "tight": self.tight,
            "min_beta": rat_str(self.min_beta),
            "threshold": rat_str(self.threshold),
        }


def fit_dof_slope(points):
    """Ordinary least squares on (log2 P, bits per slot) pairs.

    Returns (slope, rms_residual); the intercept absorbs any o(log P) term.
    """
    pts = [(float(x), float(y)) for x, y in points]
    if len({x for x, _ in pts}) < 3:
        raise DegenerateGrid("slope fit needs at least three distinct "
                             "grid points")
    n = len(pts)
    mx = sum(x for x, _ in pts) / n
    my = sum(y for _, y in pts) / n
    sxx = sum((x - mx) ** 2 for x, _ in pts)
    sxy = sum((x - mx) * (y - my) for x, y in pts)
    slope = sxy / sxx
    icept = my - slope * mx
    rms = math.sqrt(sum((y - (slope * x + icept)) ** 2 for x, y in pts) / n)
    return slope, rms


def run_experiment(cfg: ExperimentConfig) -> RateReport:
    """Run every (SNR, trial) cell, average, and fit both users' slopes.

    Cells fan out to a process pool when more than one worker is configured
    (default: the machine's CPU count); aggregation is keyed by (SNR, seed)
    so results are identical whatever the completion order.
    """
    cfg.validate()
    point = resolve_point(cfg)
    jobs = [(cfg.profile, point.delta_bar, point.omega, cfg.S, cfg.T,
             snr, seed, cfg.epsilon, cfg.knobs, cfg.channel_model)
            for snr in cfg.snr_db for seed in cfg.seeds]
    workers = cfg.workers if cfg.workers is not None else (os.cpu_count() or 1)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_run, jobs))
    else:
        results = [_one_run(j) for j in jobs]
    by_cell = {(r["snr_db"], r["seed"]): r for r in results}

    slots = results[0]["slots_used"]
    pts = []
    for snr in cfg.snr_db:
        cells = [by_cell[(float(snr), seed)] for seed in cfg.seeds]
        rate = {u: sum(c["rate"][u] for c in cells) / len(cells)
                for u in (1, 2)}
        fails = {u: sum(c["failures"][u] for c in cells) for u in (1, 2)}
        pts.append(RatePoint(snr_db=float(snr),
                             log2_P=math.log2(_snr_to_power(snr)),
                             bits_per_slot=rate, failures=fails))
    d_hat, resid = {}, {}
    for u in (1, 2):
        d_hat[u], resid[u] = fit_dof_slope(
            [(p.log2_P, p.bits_per_slot[u]) for p in pts])
    return RateReport(points=tuple(pts), slots_per_run=slots,
                      trials=cfg.trials, seeds=tuple(cfg.seeds),
                      d_hat=d_hat, residual=resid, predicted=point.predicted,
                      delta_bar=point.delta_bar, omega=point.omega,
                      tight=point.tight, min_beta=point.min_beta,
                      threshold=point.threshold)


# ---------------------------------------------------------------------------
# Planner-vs-measurement comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VerdictTable:
    """Per-user |measured - predicted| against a tolerance.

    `note` carries "bounds only" when the planner region is not provably
    optimal for the profile (the prediction is then an inner-bound corner).
    """

    rows: tuple           # per-user dicts
    tolerance: float
    tight: bool
    note: str

    def to_json_dict(self):
        return {"rows": list(self.rows), "tolerance": self.tolerance,
                "tight": self.tight, "note": self.note}


def compare(report: RateReport, tolerance: float = 0.25) -> VerdictTable:
    """Check each fitted slope against the planner's exact prediction."""
    if tolerance <= 0:
        raise ValidationError("tolerance must be positive")
    note = "" if report.tight else "bounds only"
    rows = []
    for u in (1, 2):
        pred = report.predicted[u]
        meas = report.d_hat[u]
        err = abs(meas - float(pred))
        rows.append({"user": u, "predicted": rat_str(pred),
                     "measured": meas, "abs_error": err,
                     "verdict": "pass" if err <= tolerance else "fail",
                     "note": note})
    return VerdictTable(rows=tuple(rows), tolerance=tolerance,
                        tight=report.tight, note=note)


# ---------------------------------------------------------------------------
# Bit-stable file output
# ---------------------------------------------------------------------------


def _fmt(x):
    """Canonical cell rendering: rationals as p/q, floats to 12 significant
    digits, everything else via str."""
    if isinstance(x, Fraction):
        return rat_str(x)
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def _csv_text(rows):
    """rows: list of dicts sharing identical keys, first row fixes order."""
    header = list(rows[0].keys()) if rows else []
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(row[k]) for k in header))
    return "\n".join(lines) + "\n"


def csv_rows(obj):
    """Flatten a reportable object into CSV rows (see export)."""
    if isinstance(obj, list):
        if not all(isinstance(r, dict) for r in obj):
            raise ValidationError("CSV rows must be dicts")
        return obj
    if isinstance(obj, RateReport):
        out = []
        for p in obj.points:
            for u in (1, 2):
                out.append({"snr_db": p.snr_db, "user": u,
                            "bits_per_slot": p.bits_per_slot[u],
                            "failures": p.failures[u]})
        return out
    if isinstance(obj, DofRegion):
        return [{"d1": v.d1, "d2": v.d2, "label": lab}
                for v, lab in zip(obj.vertices, obj.labels)]
    if isinstance(obj, NotTight):
        out = []
        for kind, region in (("inner", obj.inner), ("outer", obj.outer)):
            for v, lab in zip(region.vertices, region.labels):
                out.append({"region": kind, "d1": v.d1, "d2": v.d2,
                            "label": lab})
        return out
    if isinstance(obj, CornerReport):
        return [{"corner": name, "d1": obj.points[name].d1,
                 "d2": obj.points[name].d2,
                 "active": name in obj.active}
                for name in sorted(obj.points)]
    if isinstance(obj, AllocationPlan):
        return [{"slot": t + 1, "delta1": obj.delta1[t],
                 "delta2": obj.delta2[t], "r_a": obj.r_a[t],
                 "r_ap": obj.r_ap[t], "r_b": obj.r_b[t],
                 "r_bp": obj.r_bp[t]}
                for t in range(obj.T)]
    if isinstance(obj, VerdictTable):
        return list(obj.rows)
    raise ValidationError(f"no CSV form for {type(obj).__name__}")


def _json_payload(obj):
    if hasattr(obj, "to_json_dict"):
        return obj.to_json_dict()
    if isinstance(obj, (dict, list)):
        return obj
    raise ValidationError(f"no JSON form for {type(obj).__name__}")


def _round_floats(node):
    """Clamp every float to 12 significant digits for stable re-export."""
    if isinstance(node, float):
        return float(format(node, ".12g"))
    if isinstance(node, dict):
        return {k: _round_floats(v) for k, v in node.items()}
    if isinstance(node, (list, tuple)):
        return [_round_floats(v) for v in node]
    return node


def export(obj, path, fmt) -> str:
    """Write `obj` to `path` as csv or json; returns the path written.

    Output is byte-stable for equal inputs: LF endings, sorted JSON keys,
    12-significant-digit floats, rationals as "p/q".
    """
    if fmt == "csv":
        text = _csv_text(csv_rows(obj))
    elif fmt == "json":
        text = json.dumps(_round_floats(_json_payload(obj)),
                          sort_keys=True, indent=2,
                          ensure_ascii=False) + "\n"
    else:
        raise ValidationError(f"unknown export format {fmt!r}")
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def load_json(path):
    """Parse a JSON file (config or previously exported document)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed JSON in {path}: {exc}") from exc
