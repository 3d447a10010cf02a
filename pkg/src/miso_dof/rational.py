"""Exact rational plumbing: parsing, formatting, conversions.

All planner quantities are `fractions.Fraction`.  The JSON/CSV wire format
renders a rational as the string "p/q" ("p" when q == 1).  Floats are accepted
on input and converted with a declared denominator bound so results stay
reproducible.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import ValidationError

# Denominator bound used when converting float inputs to rationals.
FLOAT_DENOMINATOR_BOUND = 10**6


def as_fraction(value) -> Fraction:
    """Coerce value (Fraction, int, 'p/q' string, or float) to Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValidationError(f"not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"cannot parse rational {value!r}") from exc
    if isinstance(value, float):
        return Fraction(value).limit_denominator(FLOAT_DENOMINATOR_BOUND)
    raise ValidationError(f"cannot parse rational {value!r}")


def rat_str(x: Fraction) -> str:
    """Render a Fraction as 'p/q' ('p' when the denominator is 1)."""
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def pos_part(x: Fraction) -> Fraction:
    """(x)^+ = max(x, 0)."""
    return x if x > 0 else Fraction(0)


def mean(xs) -> Fraction:
    xs = list(xs)
    if not xs:
        raise ValidationError("mean of empty sequence")
    return sum(xs, Fraction(0)) / len(xs)
