"""Sign/log-magnitude scalars.

The indicator pipeline manipulates quantities like e^{tau*T} * I(tau) whose
magnitudes overflow double precision well inside the useful tau range
(tau*T > 700 is routine), and the layered-medium closed form multiplies
factors like e^{tau*b} that individually overflow long before their product
does.  Everything exponentially large or small is therefore carried as a
(sign, log|value|) pair and only materialized as a float on request.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_LOG_TINY = math.log(5e-324)   # smallest subnormal double
_LOG_HUGE = math.log(1.7976931348623157e308)


class UnderflowError(ArithmeticError):
    """Materializing a log-space value would flush to zero."""


class OverflowMaterializeError(ArithmeticError):
    """Materializing a log-space value would overflow to inf."""


@dataclass(frozen=True)
class LogScalar:
    """A real number stored as sign and natural log of its magnitude.

    ``sign`` is -1, 0 or +1; for sign 0 the log-magnitude is -inf by
    convention.  Arithmetic never leaves log space, so products and powers
    of astronomically scaled factors stay exact to float precision in the
    exponent.
    """

    sign: int
    logmag: float

    @staticmethod
    def zero() -> "LogScalar":
        return LogScalar(0, float("-inf"))

    @staticmethod
    def from_float(x: float) -> "LogScalar":
        if x == 0.0:
            return LogScalar.zero()
        if math.isnan(x) or math.isinf(x):
            raise ValueError(f"cannot represent {x!r} in log space")
        return LogScalar(1 if x > 0 else -1, math.log(abs(x)))

    @staticmethod
    def exp(logmag: float, sign: int = 1) -> "LogScalar":
        """Value sign * e^{logmag} without evaluating the exponential."""
        if sign == 0:
            return LogScalar.zero()
        return LogScalar(1 if sign > 0 else -1, float(logmag))

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def to_float(self, strict: bool = True) -> float:
        """Materialize as a double.

        With ``strict`` the conversion refuses to silently flush or
        overflow; otherwise it returns 0.0 / +-inf.
        """
        if self.sign == 0:
            return 0.0
        if self.logmag < _LOG_TINY:
            if strict:
                raise UnderflowError(
                    f"log-magnitude {self.logmag:.3f} underflows double precision"
                )
            return 0.0 * self.sign
        if self.logmag > _LOG_HUGE:
            if strict:
                raise OverflowMaterializeError(
                    f"log-magnitude {self.logmag:.3f} overflows double precision"
                )
            return math.inf * self.sign
        return self.sign * math.exp(self.logmag)

    def __mul__(self, other: "LogScalar | float | int") -> "LogScalar":
        other = _coerce(other)
        if self.sign == 0 or other.sign == 0:
            return LogScalar.zero()
        return LogScalar(self.sign * other.sign, self.logmag + other.logmag)

    __rmul__ = __mul__

    def __truediv__(self, other: "LogScalar | float | int") -> "LogScalar":
        other = _coerce(other)
        if other.sign == 0:
            raise ZeroDivisionError("log-space division by zero")
        if self.sign == 0:
            return LogScalar.zero()
        return LogScalar(self.sign * other.sign, self.logmag - other.logmag)

    def __add__(self, other: "LogScalar | float | int") -> "LogScalar":
        other = _coerce(other)
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        hi, lo = (self, other) if self.logmag >= other.logmag else (other, self)
        d = lo.logmag - hi.logmag  # <= 0
        if self.sign == other.sign:
            return LogScalar(self.sign, hi.logmag + math.log1p(math.exp(d)))
        diff = -math.expm1(d)  # 1 - e^d in (0, 1]
        if diff == 0.0:
            return LogScalar.zero()
        return LogScalar(hi.sign, hi.logmag + math.log(diff))

    __radd__ = __add__

    def __sub__(self, other: "LogScalar | float | int") -> "LogScalar":
        return self + (-_coerce(other))

    def __rsub__(self, other: "LogScalar | float | int") -> "LogScalar":
        return _coerce(other) + (-self)

    def __neg__(self) -> "LogScalar":
        return LogScalar(-self.sign, self.logmag)

    def __abs__(self) -> "LogScalar":
        return LogScalar(abs(self.sign), self.logmag)

    def powi(self, n: int) -> "LogScalar":
        if self.sign == 0:
            return LogScalar.zero() if n > 0 else _coerce(1.0)
        sign = 1 if (self.sign > 0 or n % 2 == 0) else -1
        return LogScalar(sign, n * self.logmag)

    def compare(self, other: "LogScalar") -> int:
        d = (self - other).sign
        return d

    def __lt__(self, other: "LogScalar | float | int") -> bool:
        return self.compare(_coerce(other)) < 0

    def __gt__(self, other: "LogScalar | float | int") -> bool:
        return self.compare(_coerce(other)) > 0

    def __repr__(self) -> str:
        if self.sign == 0:
            return "LogScalar(0)"
        s = "+" if self.sign > 0 else "-"
        return f"LogScalar({s}exp({self.logmag:.6g}))"


def _coerce(x: "LogScalar | float | int") -> LogScalar:
    if isinstance(x, LogScalar):
        return x
    return LogScalar.from_float(float(x))


def log1mexp(x: float) -> float:
    """log(1 - e^{-x}) for x > 0, stable for both tiny and large x."""
    if x <= 0:
        raise ValueError("log1mexp requires x > 0")
    if x < math.log(2.0):
        return math.log(-math.expm1(-x))
    return math.log1p(-math.exp(-x))
