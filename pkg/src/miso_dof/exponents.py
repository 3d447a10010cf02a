"""Feedback-quality exponent profiles and their long-term statistics.

A profile assigns each slot t and user i a current-CSIT quality exponent
alpha_t^(i) and a delayed-CSIT quality exponent beta_t^(i), with
0 <= alpha_t^(i) <= beta_t^(i) <= 1 (estimation error powers P^-alpha before
the slot, P^-beta after a delay of at most eta slots).  The planner consumes
only the long-term averages; the simulator consumes the per-slot sequences.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import LengthMismatch, RangeViolation, ValidationError
from .rational import as_fraction, mean, rat_str

ZERO = Fraction(0)
ONE = Fraction(1)


def _coerce_seq(values):
    return tuple(as_fraction(v) for v in values)


@dataclass(frozen=True)
class ExponentProfile:
    """Per-slot quality exponents for both users over n slots.

    eta is the delayed-feedback arrival bound: the slot-t delayed estimate is
    available from slot t + eta on.
    """

    n: int
    eta: int
    alpha1: tuple
    alpha2: tuple
    beta1: tuple
    beta2: tuple

    def validate(self) -> "ExponentProfile":
        if self.n < 1:
            raise ValidationError("profile needs at least one slot")
        if self.eta < 1:
            raise ValidationError("eta must be a positive slot count")
        seqs = {"alpha1": self.alpha1, "alpha2": self.alpha2,
                "beta1": self.beta1, "beta2": self.beta2}
        for name, seq in seqs.items():
            if len(seq) != self.n:
                raise LengthMismatch(f"{name} has {len(seq)} slots, expected {self.n}")
        for alpha, beta, user in ((self.alpha1, self.beta1, 1), (self.alpha2, self.beta2, 2)):
            for t, (a, b) in enumerate(zip(alpha, beta), start=1):
                if not (ZERO <= a <= b <= ONE):
                    raise RangeViolation(
                        f"user {user} slot {t}: need 0 <= alpha <= beta <= 1, "
                        f"got alpha={rat_str(a)}, beta={rat_str(b)}")
        return self

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "eta": self.eta,
            "alpha1": [rat_str(x) for x in self.alpha1],
            "alpha2": [rat_str(x) for x in self.alpha2],
            "beta1": [rat_str(x) for x in self.beta1],
            "beta2": [rat_str(x) for x in self.beta2],
        }


def profile(alpha1, alpha2, beta1, beta2, eta: int = 1) -> ExponentProfile:
    """Build and validate a profile from per-slot sequences."""
    a1, a2 = _coerce_seq(alpha1), _coerce_seq(alpha2)
    b1, b2 = _coerce_seq(beta1), _coerce_seq(beta2)
    return ExponentProfile(n=len(a1), eta=eta, alpha1=a1, alpha2=a2,
                           beta1=b1, beta2=b2).validate()


def profile_from_dict(d: dict) -> ExponentProfile:
    try:
        p = profile(d["alpha1"], d["alpha2"], d["beta1"], d["beta2"],
                    eta=int(d.get("eta", 1)))
    except KeyError as exc:
        raise ValidationError(f"profile JSON missing key {exc}") from exc
    if "n" in d and int(d["n"]) != p.n:
        raise LengthMismatch(f"profile JSON declares n={d['n']} but sequences have {p.n}")
    return p


@dataclass(frozen=True)
class ExponentAverages:
    """Long-term averages (a1, a2, b1, b2) = (alpha_bar^(1), alpha_bar^(2),
    beta_bar^(1), beta_bar^(2))."""

    a1: Fraction
    a2: Fraction
    b1: Fraction
    b2: Fraction

    def validate(self) -> "ExponentAverages":
        for name, x in (("a1", self.a1), ("a2", self.a2), ("b1", self.b1), ("b2", self.b2)):
            if not (ZERO <= x <= ONE):
                raise RangeViolation(f"{name}={rat_str(x)} outside [0, 1]")
        if self.a1 > self.b1 or self.a2 > self.b2:
            raise RangeViolation("need alpha_bar <= beta_bar per user")
        return self

    def to_json_dict(self) -> dict:
        return {"a1": rat_str(self.a1), "a2": rat_str(self.a2),
                "b1": rat_str(self.b1), "b2": rat_str(self.b2)}


def averages_from_dict(d: dict) -> ExponentAverages:
    try:
        return ExponentAverages(as_fraction(d["a1"]), as_fraction(d["a2"]),
                                as_fraction(d["b1"]), as_fraction(d["b2"])).validate()
    except KeyError as exc:
        raise ValidationError(f"averages JSON missing key {exc}") from exc


def averages(p: ExponentProfile) -> ExponentAverages:
    """Arithmetic means of the four exponent sequences (exact)."""
    return ExponentAverages(mean(p.alpha1), mean(p.alpha2),
                            mean(p.beta1), mean(p.beta2)).validate()


def label_users(a: ExponentAverages):
    """Relabel so alpha_bar^(2) <= alpha_bar^(1).

    Returns (labeled_averages, swapped).  When swapped, downstream DoF points
    refer to the relabeled users and must be mirrored across d1 = d2 on
    output.
    """
    if a.a2 > a.a1:
        return ExponentAverages(a.a2, a.a1, a.b2, a.b1), True
    return a, False


@dataclass(frozen=True)
class PeriodicFeedbackSpec:
    """Periodically evolving current CSIT within a coherence block.

    events: quality increments keyed by the slot (1-based, within the block)
    where the refined estimate becomes available; the current exponent is the
    running cumulative sum.  delayed_extra is added on top of the end-of-block
    quality for the delayed estimates of every slot of the block.
    """

    coherence: int
    events: tuple
    delayed_extra: Fraction = ZERO

    def validate(self) -> "PeriodicFeedbackSpec":
        if self.coherence < 1:
            raise ValidationError("coherence must be at least one slot")
        total = ZERO
        prev_slot = 0
        for slot, inc in self.events:
            if not (1 <= slot <= self.coherence):
                raise ValidationError(f"event slot {slot} outside 1..{self.coherence}")
            if slot <= prev_slot:
                raise ValidationError("event slots must be strictly increasing")
            prev_slot = slot
            if inc < 0:
                raise RangeViolation("quality increments must be nonnegative")
            total += inc
        if self.delayed_extra < 0:
            raise RangeViolation("delayed_extra must be nonnegative")
        if total + self.delayed_extra > ONE:
            raise RangeViolation("cumulative quality exceeds 1")
        return self

    def alpha_block(self) -> tuple:
        """Current exponents over one coherence block."""
        inc = {slot: as_fraction(v) for slot, v in self.events}
        out, run = [], ZERO
        for t in range(1, self.coherence + 1):
            run += inc.get(t, ZERO)
            out.append(run)
        return tuple(out)

    def beta_block(self) -> tuple:
        """Delayed exponents over one block: end-of-block quality + extra."""
        alpha = self.alpha_block()
        final = (alpha[-1] if alpha else ZERO) + self.delayed_extra
        return tuple(final for _ in range(self.coherence))

    def to_json_dict(self) -> dict:
        return {"Tc": self.coherence,
                "events": [[slot, rat_str(as_fraction(v))] for slot, v in self.events],
                "delayed_extra": rat_str(self.delayed_extra)}


def periodic_spec(coherence: int, events, delayed_extra=ZERO) -> PeriodicFeedbackSpec:
    ev = tuple((int(slot), as_fraction(inc)) for slot, inc in events)
    return PeriodicFeedbackSpec(coherence=coherence, events=ev,
                                delayed_extra=as_fraction(delayed_extra)).validate()


def periodic_spec_from_dict(d: dict) -> PeriodicFeedbackSpec:
    try:
        return periodic_spec(int(d["Tc"]), d.get("events", []),
                             d.get("delayed_extra", 0))
    except KeyError as exc:
        raise ValidationError(f"periodic spec JSON missing key {exc}") from exc


def make_periodic_profile(spec: PeriodicFeedbackSpec, periods: int,
                          spec2: PeriodicFeedbackSpec = None,
                          eta: int = None) -> ExponentProfile:
    """Tile a periodic feedback spec into a profile of `periods` blocks.

    Both users follow `spec` unless an independent `spec2` (same coherence) is
    given for user 2.  eta defaults to the coherence length.
    """
    if periods < 1:
        raise ValidationError("periods must be positive")
    spec = spec.validate()
    other = spec if spec2 is None else spec2.validate()
    if other.coherence != spec.coherence:
        raise ValidationError("user specs must share the coherence length")
    a1 = spec.alpha_block() * periods
    b1 = spec.beta_block() * periods
    a2 = other.alpha_block() * periods
    b2 = other.beta_block() * periods
    return profile(a1, a2, b1, b2, eta=spec.coherence if eta is None else eta)


def mat_profile(periods: int, eta: int = 3) -> ExponentProfile:
    """No current CSIT; perfect delayed CSIT for every third realization.

    Per user i, beta_t^(i) = 1 when t = i (mod 3) and 0 otherwise, so
    beta_bar^(i) = 1/3 with alpha_bar = 0.
    """
    if periods < 1:
        raise ValidationError("periods must be positive")
    n = 3 * periods
    zero = (ZERO,) * n
    b1 = tuple(ONE if t % 3 == 1 else ZERO for t in range(1, n + 1))
    b2 = tuple(ONE if t % 3 == 2 else ZERO for t in range(1, n + 1))
    return ExponentProfile(n=n, eta=eta, alpha1=zero, alpha2=zero,
                           beta1=b1, beta2=b2).validate()


def alternating_csit_map(lambda_perfect, lambda_delayed) -> ExponentAverages:
    """Averages for alternating perfect/delayed/none CSIT availability.

    A fraction lambda_perfect of slots has perfect current CSIT and a further
    fraction lambda_delayed has (perfect) delayed CSIT, identically for both
    users: alpha_bar = lambda_perfect, beta_bar = lambda_perfect +
    lambda_delayed.
    """
    lp, ld = as_fraction(lambda_perfect), as_fraction(lambda_delayed)
    if lp < 0 or ld < 0 or lp + ld > 1:
        raise RangeViolation("need lambda_perfect, lambda_delayed >= 0 with sum <= 1")
    return ExponentAverages(lp, lp, lp + ld, lp + ld).validate()
