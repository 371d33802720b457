"""Exact number parsing and formatting.

Every value that appears in a certified statement goes through these helpers,
so binary floating point never leaks into a certificate.
"""
from fractions import Fraction
import re

from .errors import InvalidParameterError

_DECIMAL = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_RATIO = re.compile(r"^[+-]?\d+\s*/\s*\d+$")


def parse_rational(value):
    """Parse an exact rational from a decimal string, a ratio string or an int.

    Floats are rejected: ``0.1`` as a float is not one tenth.

    >>> parse_rational("3.3")
    Fraction(33, 10)
    >>> parse_rational("27/16")
    Fraction(27, 16)
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise InvalidParameterError(f"not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        raise InvalidParameterError(
            f"refusing binary float {value!r}; pass an exact decimal string")
    if isinstance(value, str):
        text = value.strip()
        if _DECIMAL.match(text) or _RATIO.match(text):
            try:
                return Fraction(text.replace(" ", ""))
            except (ValueError, ZeroDivisionError) as exc:
                raise InvalidParameterError(f"not a rational: {value!r}") from exc
    raise InvalidParameterError(f"not a rational: {value!r}")


def parse_activity(value):
    """Parse an activity and check it is strictly positive."""
    lam = parse_rational(value)
    if lam <= 0:
        raise InvalidParameterError(f"activity must be positive, got {lam}")
    return lam


def format_rational(x):
    """Format a Fraction as a terminating decimal when possible, else ``p/q``."""
    x = Fraction(x)
    den = x.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{x.numerator}/{x.denominator}"
    digits = max(twos, fives)
    if digits == 0:
        return str(x.numerator)
    scaled = x * 10 ** digits
    assert scaled.denominator == 1
    n = scaled.numerator
    sign = "-" if n < 0 else ""
    s = str(abs(n)).rjust(digits + 1, "0")
    return f"{sign}{s[:-digits]}.{s[-digits:]}"


def format_fixed(numerator, scale):
    """Render ``numerator * 10**-scale`` with exactly ``scale`` fractional digits."""
    if scale == 0:
        return str(numerator)
    sign = "-" if numerator < 0 else ""
    s = str(abs(numerator)).rjust(scale + 1, "0")
    return f"{sign}{s[:-scale]}.{s[-scale:]}"


def parse_fixed(text, scale):
    """Inverse of :func:`format_fixed`; the digit count must match ``scale``."""
    text = text.strip()
    if scale == 0:
        return int(text)
    if "." not in text:
        raise InvalidParameterError(f"expected {scale} fractional digits: {text!r}")
    whole, frac = text.split(".")
    if len(frac) != scale or not frac.isdigit():
        raise InvalidParameterError(f"expected {scale} fractional digits: {text!r}")
    sign = -1 if whole.startswith("-") else 1
    return sign * (abs(int(whole or "0")) * 10 ** scale + int(frac))


def ceil_div(a, b):
    return -((-a) // b)
