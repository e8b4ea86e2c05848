import re
from fractions import Fraction
from typing import Union

from takagi.errors import ContractError

_RATIONAL = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+)(?:\s*\^\s*(\d+))?)?\s*$")


def parse_rational(text: Union[str, int, Fraction], flag: str = "value") -> Fraction:
    """Parse `num/den`, `k/2^n` or a bare integer into an exact Fraction.

    Floats are rejected; every number on the command line round-trips exactly.
    """
    if isinstance(text, Fraction):
        return text
    if isinstance(text, bool):
        raise ContractError(f"{flag}: expected a rational, got {text!r}")
    if isinstance(text, int):
        return Fraction(text)
    match = _RATIONAL.match(str(text))
    if not match:
        raise ContractError(f"{flag}: malformed rational {text!r} (use num/den or k/2^n)")
    num, base, power = match.groups()
    if base is None:
        return Fraction(int(num))
    den = int(base) ** int(power) if power is not None else int(base)
    if den == 0:
        raise ContractError(f"{flag}: zero denominator in {text!r}")
    return Fraction(int(num), den)


def format_rational(value: Fraction) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"
