"""Exact rational time.

All instants and durations are :class:`fractions.Fraction` seconds. Periods such
as 1/15 s have no finite decimal tick, so the engine never touches floats;
conversion happens only when results are reported.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Iterable

TimeStamp = Fraction
TimeSpan = Fraction

# Values are kept within signed 64-bit numerator/denominator; anything larger
# means a runaway horizon and is treated as a hard error rather than wrapping.
INT_LIMIT = 2**63 - 1

UNITS = {"s": Fraction(1), "ms": Fraction(1, 1000), "us": Fraction(1, 10**6)}

_DURATION_RE = re.compile(
    r"^\s*(?P<sign>[+-]?)\s*(?P<num>\d+(?:\.\d*)?|\.\d+)"
    r"(?:\s*/\s*(?P<den>\d+))?\s*(?P<unit>s|ms|us)\s*$"
)


class TimeError(ValueError):
    """Raised for malformed or out-of-range time values."""


def checked(value: Fraction) -> Fraction:
    if abs(value.numerator) > INT_LIMIT or value.denominator > INT_LIMIT:
        raise OverflowError(f"time value {value} exceeds 64-bit rational range")
    return value


def rational(num: int, den: int = 1) -> TimeStamp:
    """Canonical ``num/den`` seconds; the sign ends up on the numerator."""
    if den == 0:
        raise TimeError("zero denominator in rational time value")
    return checked(Fraction(num, den))


def hyperperiod(periods: Iterable[TimeSpan]) -> TimeSpan:
    """Least positive common multiple of rational periods.

    For canonical fractions a_i/b_i this is lcm(a_i) / gcd(b_i).
    """
    periods = [Fraction(p) for p in periods]
    if not periods:
        raise TimeError("hyperperiod of an empty period list")
    for p in periods:
        if p <= 0:
            raise TimeError(f"non-positive period {p}")
    num = math.lcm(*(p.numerator for p in periods))
    den = math.gcd(*(p.denominator for p in periods))
    return checked(Fraction(num, den))


def parse_duration(text: str) -> TimeSpan:
    """Parse ``"20ms"``, ``"0.2ms"``, ``"1/15s"`` or ``"250us"``.

    A unit suffix is mandatory; bare numbers are rejected.
    """
    if not isinstance(text, str):
        raise TimeError(f"duration must be a string with a unit suffix, got {text!r}")
    m = _DURATION_RE.match(text)
    if m is None:
        raise TimeError(
            f"malformed duration {text!r} (expected e.g. '20ms', '0.2ms', '1/15s')"
        )
    value = Fraction(m["num"])
    if m["den"] is not None:
        if "." in m["num"]:
            raise TimeError(f"malformed duration {text!r}: fraction needs integers")
        if int(m["den"]) == 0:
            raise TimeError(f"zero denominator in duration {text!r}")
        value /= int(m["den"])
    if m["sign"] == "-":
        value = -value
    return checked(value * UNITS[m["unit"]])


def is_decimal(value: Fraction) -> bool:
    den = value.denominator
    for p in (2, 5):
        while den % p == 0:
            den //= p
    return den == 1


def format_number(value: Fraction) -> str:
    """Exact decimal string when one exists, else ``num/den``."""
    value = Fraction(value)
    if not is_decimal(value):
        return f"{value.numerator}/{value.denominator}"
    digits = 0
    scaled = value
    while scaled.denominator != 1:
        scaled *= 10
        digits += 1
    sign = "-" if scaled < 0 else ""
    mag = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    if digits == 0:
        return sign + mag
    return f"{sign}{mag[:-digits]}.{mag[-digits:]}"


def parse_number(text: str) -> Fraction:
    """Inverse of :func:`format_number`."""
    try:
        return checked(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise TimeError(f"malformed number {text!r}") from exc


def format_duration(value: TimeSpan, unit: str = "ms") -> str:
    return format_number(Fraction(value) / UNITS[unit]) + unit


def to_ms(value: TimeSpan) -> float:
    return float(Fraction(value) * 1000)
