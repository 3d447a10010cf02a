"""Exact DoF-region geometry and feedback-planning corollaries.

Regions live in the (d1, d2) plane and are intersections of halfplanes with
rational coefficients, so every vertex is rational and computed exactly.
User labeling convention throughout: alpha_bar^(2) <= alpha_bar^(1).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import CornerInactive, RangeViolation, TargetUnachievable, ValidationError
from .exponents import ExponentAverages, label_users
from .rational import as_fraction, pos_part, rat_str

ZERO = Fraction(0)
ONE = Fraction(1)
TWO = Fraction(2)


@dataclass(frozen=True, order=True)
class DofPoint:
    d1: Fraction
    d2: Fraction

    def to_json_dict(self):
        return {"d1": rat_str(self.d1), "d2": rat_str(self.d2)}


@dataclass(frozen=True)
class Halfplane:
    """a*d1 + b*d2 <= c."""

    a: Fraction
    b: Fraction
    c: Fraction

    def contains(self, p: DofPoint) -> bool:
        return self.a * p.d1 + self.b * p.d2 <= self.c

    def slack(self, p: DofPoint) -> Fraction:
        return self.c - (self.a * p.d1 + self.b * p.d2)


def _cross(o: DofPoint, u: DofPoint, v: DofPoint) -> Fraction:
    return (u.d1 - o.d1) * (v.d2 - o.d2) - (u.d2 - o.d2) * (v.d1 - o.d1)


def _clip(poly, hp: Halfplane):
    # Sutherland-Hodgman against a single halfplane, exact arithmetic.
    out = []
    m = len(poly)
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        sp, sq = hp.slack(p), hp.slack(q)
        if sp >= 0:
            out.append(p)
        if (sp > 0 and sq < 0) or (sp < 0 and sq > 0):
            t = sp / (sp - sq)
            out.append(DofPoint(p.d1 + t * (q.d1 - p.d1), p.d2 + t * (q.d2 - p.d2)))
    return out


def _canonical(poly):
    # Drop duplicate and collinear vertices, then rotate to start at (0,0).
    dedup = []
    for p in poly:
        if not dedup or p != dedup[-1]:
            dedup.append(p)
    if len(dedup) > 1 and dedup[0] == dedup[-1]:
        dedup.pop()
    verts = []
    m = len(dedup)
    for i in range(m):
        o, p, q = dedup[i - 1], dedup[i], dedup[(i + 1) % m]
        if _cross(o, p, q) != 0:
            verts.append(p)
    origin = DofPoint(ZERO, ZERO)
    if origin not in verts:
        raise ValidationError("region does not contain the origin as a vertex")
    k = verts.index(origin)
    return tuple(verts[k:] + verts[:k])


def intersect_halfplanes(halfplanes) -> tuple:
    """Vertices of the intersection within [0,1]^2, CCW starting at (0,0)."""
    poly = [DofPoint(ZERO, ZERO), DofPoint(ONE, ZERO),
            DofPoint(ONE, ONE), DofPoint(ZERO, ONE)]
    for hp in halfplanes:
        poly = _clip(poly, hp)
        if not poly:
            raise ValidationError("empty halfplane intersection")
    return _canonical(poly)


@dataclass(frozen=True)
class DofRegion:
    """Convex DoF region: CCW vertices starting at (0,0) with corner labels."""

    kind: str  # "inner" | "outer" | "optimal"
    vertices: tuple
    labels: tuple  # per-vertex label string, "" when unnamed

    def contains(self, p: DofPoint) -> bool:
        m = len(self.vertices)
        return all(_cross(self.vertices[i], self.vertices[(i + 1) % m], p) >= 0
                   for i in range(m))

    def sum_dof(self) -> Fraction:
        return max(v.d1 + v.d2 for v in self.vertices)

    def vertex_set(self):
        return {(v.d1, v.d2) for v in self.vertices}

    def to_json_dict(self):
        return {"kind": self.kind,
                "vertices": [[rat_str(v.d1), rat_str(v.d2)] for v in self.vertices],
                "labels": list(self.labels)}


@dataclass(frozen=True)
class NotTight:
    """Bounds do not provably coincide; both polygons are carried."""

    inner: DofRegion
    outer: DofRegion
    min_beta: Fraction
    threshold: Fraction

    def to_json_dict(self):
        return {"tight": False,
                "min_beta": rat_str(self.min_beta),
                "threshold": rat_str(self.threshold),
                "inner": self.inner.to_json_dict(),
                "outer": self.outer.to_json_dict()}


def _require_labeled(a: ExponentAverages) -> ExponentAverages:
    a.validate()
    if a.a2 > a.a1:
        raise ValidationError("averages must be labeled with alpha_bar^(2) <= alpha_bar^(1)")
    return a


def corner_formulas(a: ExponentAverages) -> dict:
    """Named corner points A..G as closed forms of the averages."""
    _require_labeled(a)
    m = min(a.b1, a.b2)
    return {
        "A": DofPoint(ONE, (ONE + a.a2) / 2),
        "B": DofPoint(a.a2, ONE),
        "C": DofPoint((TWO + 2 * a.a1 - a.a2) / 3, (TWO + 2 * a.a2 - a.a1) / 3),
        "D": DofPoint(ONE, a.a1),
        "E": DofPoint(2 * m - a.a2, ONE + a.a2 - m),
        "F": DofPoint(ONE + a.a1 - m, 2 * m - a.a1),
        "G": DofPoint(ONE, m),
    }


def imperfect_delayed_threshold(a: ExponentAverages) -> Fraction:
    """Minimum min(beta_bar) at which the outer bound is met: the region is
    optimal iff min(beta_bar) >= min((1+a1+a2)/3, (1+a2)/2)."""
    _require_labeled(a)
    return min((ONE + a.a1 + a.a2) / 3, (ONE + a.a2) / 2)


def _label_vertices(vertices, points_by_name):
    by_point = {}
    for name in sorted(points_by_name):
        by_point.setdefault(points_by_name[name], []).append(name)
    return tuple("".join(by_point.get(v, [])) for v in vertices)


def _base_halfplanes(a: ExponentAverages):
    return [Halfplane(TWO, ONE, TWO + a.a1), Halfplane(ONE, TWO, TWO + a.a2)]


def outer_region(a: ExponentAverages) -> DofRegion:
    """d1 <= 1, d2 <= 1, 2d1 + d2 <= 2 + a1, d1 + 2d2 <= 2 + a2."""
    _require_labeled(a)
    verts = intersect_halfplanes(_base_halfplanes(a))
    names = {k: v for k, v in corner_formulas(a).items() if k in "ABCD"}
    return DofRegion("outer", verts, _label_vertices(verts, names))


def inner_region(a: ExponentAverages) -> DofRegion:
    """Outer halfplanes plus the delayed-quality cut d1 + d2 <= 1 + min(beta_bar)."""
    _require_labeled(a)
    m = min(a.b1, a.b2)
    verts = intersect_halfplanes(_base_halfplanes(a) + [Halfplane(ONE, ONE, ONE + m)])
    names = corner_formulas(a)
    return DofRegion("inner", verts, _label_vertices(verts, names))


def optimal_region(a: ExponentAverages):
    """The exact region when delayed quality meets the threshold, else NotTight."""
    _require_labeled(a)
    m = min(a.b1, a.b2)
    thr = imperfect_delayed_threshold(a)
    if m >= thr:
        out = outer_region(a)
        return DofRegion("optimal", out.vertices, out.labels)
    return NotTight(inner=inner_region(a), outer=outer_region(a),
                    min_beta=m, threshold=thr)


@dataclass(frozen=True)
class CornerReport:
    """All named corners plus the active set per the case analysis."""

    points: dict
    active: tuple
    case: int          # 1: 2*a1 - a2 < 1, 2: otherwise
    regime: str        # "optimal" | "inner"
    min_beta: Fraction
    threshold: Fraction

    def to_json_dict(self):
        return {"case": self.case, "regime": self.regime,
                "min_beta": rat_str(self.min_beta),
                "threshold": rat_str(self.threshold),
                "active": list(self.active),
                "points": {k: self.points[k].to_json_dict() for k in sorted(self.points)}}


def corner_points(a: ExponentAverages) -> CornerReport:
    _require_labeled(a)
    pts = corner_formulas(a)
    m = min(a.b1, a.b2)
    thr = imperfect_delayed_threshold(a)
    case = 1 if 2 * a.a1 - a.a2 < 1 else 2
    if m >= thr:
        regime = "optimal"
        active = ("B", "C", "D") if case == 1 else ("A", "B")
    else:
        regime = "inner"
        if case == 1 and m >= a.a1:
            active = ("B", "D", "E", "F")
        else:
            active = ("B", "E", "G")
    return CornerReport(points=pts, active=active, case=case, regime=regime,
                        min_beta=m, threshold=thr)


# (delta_bar, omega) pairs achieving each corner; m stands for min(beta_bar).
def scheme_params_for_corner(a: ExponentAverages, corner: str):
    """Phase parameters (delta_bar, omega) that achieve a named active corner."""
    report = corner_points(a)
    if corner not in report.points:
        raise ValidationError(f"unknown corner {corner!r}")
    if corner not in report.active:
        raise CornerInactive(
            f"corner {corner} inactive (case {report.case}, {report.regime} regime)")
    m = report.min_beta
    table = {
        "A": ((ONE + a.a2) / 2, ZERO),
        "B": (a.a2, ZERO),
        "C": ((ONE + a.a1 + a.a2) / 3, ZERO),
        "D": (a.a1, ONE),
        "E": (m, ZERO),
        "F": (m, ONE),
        "G": (m, ONE),
    }
    return table[corner]


def symmetry_gain(a1, a2) -> Fraction:
    """Sum-DoF gain of symmetrizing the current-CSIT budget:
    (1/6) * (2*a1 - a2 - 1)^+ under perfect delayed CSIT."""
    a1, a2 = as_fraction(a1), as_fraction(a2)
    if not (ZERO <= a2 <= a1 <= ONE):
        raise RangeViolation("need 0 <= a2 <= a1 <= 1")
    return pos_part(2 * a1 - a2 - 1) / 6


@dataclass(frozen=True)
class FeedbackOption:
    """One sufficient feedback configuration for symmetric target DoF d."""

    alpha_bar_min: Fraction
    delayed_min: Fraction
    delayed_kind: str  # "beta_bar" | "alpha_end_of_block"

    def to_json_dict(self):
        return {"alpha_bar_min": rat_str(self.alpha_bar_min),
                "delayed_min": rat_str(self.delayed_min),
                "delayed_kind": self.delayed_kind}


def sufficient_feedback(d) -> tuple:
    """Two sufficient options for symmetric DoF (d, d): current quality
    alpha_bar >= 3d - 2 combined with either beta >= 2d - 1 or end-of-block
    current quality alpha_Tc >= 2d - 1 (no extra delayed feedback).

    Bounds are clamped at 0 (they are vacuous below d = 2/3 resp. 1/2).
    """
    d = as_fraction(d)
    if not (ZERO <= d <= ONE):
        raise TargetUnachievable(f"symmetric DoF target {rat_str(d)} outside [0, 1]")
    a_min = pos_part(3 * d - 2)
    late_min = pos_part(2 * d - 1)
    return (FeedbackOption(a_min, late_min, "beta_bar"),
            FeedbackOption(a_min, late_min, "alpha_end_of_block"))


@dataclass(frozen=True)
class AlphaMax:
    value: Fraction


@dataclass(frozen=True)
class BetaMax:
    value: Fraction


def allowable_delay(d, constraint=None) -> Fraction:
    """Largest fraction gamma of each coherence block that current feedback
    may arrive late while the symmetric target (d, d) stays achievable.

    constraint: None (quality unconstrained), AlphaMax(a) capping the current
    quality reached within a block, or BetaMax(b) capping delayed quality.
    """
    d = as_fraction(d)
    if not (ZERO <= d <= ONE):
        raise TargetUnachievable(f"symmetric DoF target {rat_str(d)} outside [0, 1]")
    two_thirds = Fraction(2, 3)
    if constraint is None:
        if d <= two_thirds:
            return ONE
        return 3 * (ONE - d)
    if isinstance(constraint, AlphaMax):
        a_max = as_fraction(constraint.value)
        if not (ZERO < a_max <= ONE):
            raise RangeViolation("alpha_max must lie in (0, 1]")
        if d <= two_thirds:
            return ONE
        if d > (TWO + a_max) / 3:
            raise TargetUnachievable(
                f"target {rat_str(d)} needs current quality above {rat_str(a_max)}")
        return ONE - (3 * d - 2) / a_max
    if isinstance(constraint, BetaMax):
        b_max = as_fraction(constraint.value)
        if not (ZERO < b_max <= ONE):
            raise RangeViolation("beta_max must lie in (0, 1]")
        knee = (ONE + min(b_max, Fraction(1, 3))) / 2
        if d <= knee:
            return ONE
        if d > (ONE + b_max) / 2:
            raise TargetUnachievable(
                f"target {rat_str(d)} needs delayed quality above {rat_str(b_max)}")
        return (ONE / (2 * d - 1) - 1) / 2
    raise ValidationError(f"unknown delay constraint {constraint!r}")


def mirror_region(region: DofRegion) -> DofRegion:
    """Reflect across d1 = d2 (user relabeling), keeping canonical order."""
    verts = [DofPoint(v.d2, v.d1) for v in region.vertices]
    labs = list(region.labels)
    # Reversing restores CCW orientation after the reflection.
    verts.reverse()
    labs.reverse()
    k = verts.index(DofPoint(ZERO, ZERO))
    verts = tuple(verts[k:] + verts[:k])
    labs = tuple(labs[k:] + labs[:k])
    return DofRegion(region.kind, verts, labs)


def plan_regions(raw: ExponentAverages):
    """Label users, compute all three regions, and mirror back if relabeled.

    Returns a dict with the labeled averages, swap flag, regions, and the
    corner report (corner report refers to the labeled ordering).
    """
    labeled, swapped = label_users(raw)
    inner = inner_region(labeled)
    outer = outer_region(labeled)
    opt = optimal_region(labeled)
    if swapped:
        inner = mirror_region(inner)
        outer = mirror_region(outer)
        if isinstance(opt, DofRegion):
            opt = mirror_region(opt)
        else:
            opt = NotTight(inner=inner, outer=outer,
                           min_beta=opt.min_beta, threshold=opt.threshold)
    return {"averages": labeled, "swapped": swapped, "inner": inner,
            "outer": outer, "optimal": opt, "corners": corner_points(labeled)}
