"""Per-slot power-exponent allocation within a phase.

Given a phase's quality exponents and a target phase mean delta_bar, the
recursions produce per-slot exponents delta_t with, exactly:

    delta_t <= beta_t                       (delayed quality cap)
    (1/T) sum_t delta_t = delta_bar
    (1/T) sum_t (delta_t - alpha_t)^+ = (delta_bar - alpha_bar)^+

All arithmetic is rational; the constraints are re-verified after
construction and violations raise (they indicate a bug, not bad input).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import DeltaBarTooLarge, Infeasible, LengthMismatch
from .exponents import ExponentAverages
from .rational import as_fraction, mean, pos_part, rat_str
from .region import DofPoint

ZERO = Fraction(0)
ONE = Fraction(1)


def _check_sequence(alpha, beta, delta, delta_bar):
    T = len(delta)
    abar = mean(alpha)
    assert all(d <= b for d, b in zip(delta, beta)), "delta exceeds beta"
    assert all(d >= 0 for d in delta), "negative delta"
    assert sum(delta, ZERO) == T * delta_bar, "phase mean off target"
    assert sum((pos_part(d - a) for d, a in zip(delta, alpha)), ZERO) \
        == T * pos_part(delta_bar - abar), "surplus identity violated"


def solve_delta_sequence(alpha, beta, delta_bar):
    """Fill delta_t front-to-back for one user over one phase.

    Case delta_bar >= mean(alpha): delta_t = min(beta_t, alpha_t + remaining
    surplus); case delta_bar <= mean(alpha): delta_t = min(alpha_t, remaining
    budget).  Exact-boundary ties take the first branch.
    """
    alpha = [as_fraction(a) for a in alpha]
    beta = [as_fraction(b) for b in beta]
    delta_bar = as_fraction(delta_bar)
    if len(alpha) != len(beta):
        raise LengthMismatch("alpha and beta length differ")
    T = len(alpha)
    if T == 0:
        raise LengthMismatch("empty phase")
    if not all(ZERO <= a <= b <= ONE for a, b in zip(alpha, beta)):
        raise Infeasible("exponents must satisfy 0 <= alpha_t <= beta_t <= 1")
    if delta_bar < 0 or delta_bar > mean(beta):
        raise Infeasible(
            f"delta_bar={rat_str(delta_bar)} outside [0, mean(beta)={rat_str(mean(beta))}]")
    abar = mean(alpha)
    delta = []
    if delta_bar >= abar:
        acc = ZERO  # accumulated surplus sum (delta - alpha)
        target = T * (delta_bar - abar)
        for a, b in zip(alpha, beta):
            cand = target - acc + a
            d = cand if b >= cand else b
            delta.append(d)
            acc += d - a
    else:
        acc = ZERO  # accumulated sum of delta
        budget = T * delta_bar
        for a in alpha:
            cand = budget - acc
            d = a if a <= cand else cand
            delta.append(d)
            acc += d
    _check_sequence(alpha, beta, delta, delta_bar)
    return delta


def solve_last_phase(alpha1, target_mean):
    """Terminal-phase exponents for user 1: delta_t <= alpha_t^(1) with phase
    mean exactly target_mean (the budget-capped recursion)."""
    alpha1 = [as_fraction(a) for a in alpha1]
    target_mean = as_fraction(target_mean)
    if not alpha1:
        raise LengthMismatch("empty phase")
    if target_mean < 0 or target_mean > mean(alpha1):
        raise Infeasible(
            f"target mean {rat_str(target_mean)} outside [0, mean(alpha1)]")
    T = len(alpha1)
    delta, acc = [], ZERO
    budget = T * target_mean
    for a in alpha1:
        cand = budget - acc
        d = a if a <= cand else cand
        delta.append(d)
        acc += d
    assert sum(delta, ZERO) == budget
    assert all(d <= a for d, a in zip(delta, alpha1))
    return delta


@dataclass(frozen=True)
class AllocationPlan:
    """Per-slot exponents and symbol-rate prelogs for one regular phase.

    Rates follow the symbol roles: user 1 rides the a/a' symbols whose power
    exponents are indexed by user 2's quality, and vice versa.
    """

    T: int
    delta_bar: Fraction
    delta1: tuple
    delta2: tuple
    r_a: tuple    # user-1 top private symbol, prelog delta_t^(2)
    r_ap: tuple   # user-1 quantization-protected symbol, (delta^(2)-alpha^(2))^+
    r_b: tuple    # user-2 top private symbol, prelog delta_t^(1)
    r_bp: tuple   # user-2 quantization-protected symbol, (delta^(1)-alpha^(1))^+

    def to_json_dict(self):
        return {"T": self.T, "delta_bar": rat_str(self.delta_bar),
                "delta1": [rat_str(x) for x in self.delta1],
                "delta2": [rat_str(x) for x in self.delta2],
                "r_a": [rat_str(x) for x in self.r_a],
                "r_ap": [rat_str(x) for x in self.r_ap],
                "r_b": [rat_str(x) for x in self.r_b],
                "r_bp": [rat_str(x) for x in self.r_bp]}


def plan_phase(alpha1, alpha2, beta1, beta2, delta_bar) -> AllocationPlan:
    """Solve both users' sequences and derive the per-slot rate prelogs."""
    delta_bar = as_fraction(delta_bar)
    d1 = solve_delta_sequence(alpha1, beta1, delta_bar)
    d2 = solve_delta_sequence(alpha2, beta2, delta_bar)
    a1 = [as_fraction(x) for x in alpha1]
    a2 = [as_fraction(x) for x in alpha2]
    return AllocationPlan(
        T=len(d1), delta_bar=delta_bar,
        delta1=tuple(d1), delta2=tuple(d2),
        r_a=tuple(d2),
        r_ap=tuple(pos_part(d - a) for d, a in zip(d2, a2)),
        r_b=tuple(d1),
        r_bp=tuple(pos_part(d - a) for d, a in zip(d1, a1)))


def plan_terminal_phase(alpha1, alpha2, target_mean) -> AllocationPlan:
    """Terminal phase: a_t at prelog alpha_t^(2), b_t at prelog delta_t^(1)
    with delta^(1) <= alpha^(1) averaging to target_mean; no primed symbols."""
    d1 = solve_last_phase(alpha1, target_mean)
    a2 = [as_fraction(x) for x in alpha2]
    if len(a2) != len(d1):
        raise LengthMismatch("alpha2 length differs")
    zero = (ZERO,) * len(d1)
    return AllocationPlan(
        T=len(d1), delta_bar=as_fraction(target_mean),
        delta1=tuple(d1), delta2=tuple(a2),
        r_a=tuple(a2), r_ap=zero, r_b=tuple(d1), r_bp=zero)


@dataclass(frozen=True)
class PhaseBudget:
    """Per-phase bit budgets as prelog-per-slot multiples of T log P."""

    private1: Fraction
    private2: Fraction
    common: Fraction
    quantized: Fraction
    delta_com: Fraction  # fresh-bit headroom of the common stream

    def to_json_dict(self):
        return {"private1": rat_str(self.private1),
                "private2": rat_str(self.private2),
                "common": rat_str(self.common),
                "quantized": rat_str(self.quantized),
                "delta_com": rat_str(self.delta_com)}


def phase_budget(a: ExponentAverages, delta_bar) -> PhaseBudget:
    """Steady-state per-phase budgets for parameters (delta_bar, omega)."""
    a.validate()
    delta_bar = as_fraction(delta_bar)
    if not (ZERO <= delta_bar <= ONE):
        raise Infeasible("delta_bar outside [0, 1]")
    q1 = pos_part(delta_bar - a.a1)
    q2 = pos_part(delta_bar - a.a2)
    delta_com = ONE - delta_bar - q1 - q2
    if delta_com < 0:
        raise DeltaBarTooLarge(
            f"delta_bar={rat_str(delta_bar)} leaves negative common headroom "
            f"({rat_str(delta_com)})")
    return PhaseBudget(private1=delta_bar + q2, private2=delta_bar + q1,
                       common=ONE - delta_bar, quantized=q1 + q2,
                       delta_com=delta_com)


def dof_from_params(a: ExponentAverages, delta_bar, omega) -> DofPoint:
    """DoF pair delivered by scheme parameters (delta_bar, omega):
    d1 = delta_bar + (delta_bar - a2)^+ + omega * Delta_com and symmetrically
    for d2 with the fresh-bit split 1 - omega."""
    omega = as_fraction(omega)
    if not (ZERO <= omega <= ONE):
        raise Infeasible("omega outside [0, 1]")
    b = phase_budget(a, delta_bar)
    delta_bar = as_fraction(delta_bar)
    return DofPoint(b.private1 + omega * b.delta_com,
                    b.private2 + (ONE - omega) * b.delta_com)
