"""Scalars: exact elements of Q(sqrt(-m)) and double-precision complex numbers.

Exact values are :class:`QuadExact`; approximate values are plain Python
``complex``. Both are accepted wherever a ``Scalar`` is expected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Union

import numpy as np

from .errors import FieldMismatchError, SliceFormatError

Rational = Union[int, Fraction]
ComplexApprox = complex


def _is_squarefree(m: int) -> bool:
    if m < 1:
        return False
    p = 2
    while p * p <= m:
        if m % (p * p) == 0:
            return False
        p += 1
    return True


@dataclass(frozen=True)
class QuadExact:
    """The number ``a + b*sqrt(-m)`` with rational ``a``, ``b``."""

    a: Fraction
    b: Fraction
    m: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", Fraction(self.a))
        object.__setattr__(self, "b", Fraction(self.b))
        if not _is_squarefree(int(self.m)):
            raise SliceFormatError(f"field parameter m={self.m} is not a positive squarefree integer")

    @classmethod
    def rational(cls, x: Rational, m: int) -> QuadExact:
        return cls(Fraction(x), Fraction(0), m)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, QuadExact):
            return self.m == other.m and self.a == other.a and self.b == other.b
        if isinstance(other, (int, Fraction)):
            return self.b == 0 and self.a == other
        return NotImplemented

    def __hash__(self) -> int:
        # rationals hash like the matching int/Fraction
        return hash(self.a) if self.b == 0 else hash((self.a, self.b, self.m))

    def _coerce(self, other: Any) -> QuadExact:
        if isinstance(other, QuadExact):
            if other.m != self.m:
                raise FieldMismatchError(f"field mismatch: m={self.m} vs m={other.m}")
            return other
        if isinstance(other, (int, Fraction)):
            return QuadExact.rational(other, self.m)
        return NotImplemented

    def __add__(self, other: Any) -> QuadExact:
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return QuadExact(self.a + o.a, self.b + o.b, self.m)

    __radd__ = __add__

    def __neg__(self) -> QuadExact:
        return QuadExact(-self.a, -self.b, self.m)

    def __sub__(self, other: Any) -> QuadExact:
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return QuadExact(self.a - o.a, self.b - o.b, self.m)

    def __rsub__(self, other: Any) -> QuadExact:
        return (-self) + other

    def __mul__(self, other: Any) -> QuadExact:
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return QuadExact(
            self.a * o.a - self.m * self.b * o.b,
            self.a * o.b + self.b * o.a,
            self.m,
        )

    __rmul__ = __mul__

    def conj(self) -> QuadExact:
        return QuadExact(self.a, -self.b, self.m)

    def norm(self) -> Fraction:
        """``|x|^2 = x * conj(x)``, a non-negative rational."""
        return self.a * self.a + self.m * self.b * self.b

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def is_real(self) -> bool:
        return self.b == 0

    def inverse(self) -> QuadExact:
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("inverse of zero in Q(sqrt(-m))")
        return QuadExact(self.a / n, -self.b / n, self.m)

    def __truediv__(self, other: Any) -> QuadExact:
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other: Any) -> QuadExact:
        return self.inverse() * other

    def __pow__(self, n: int) -> QuadExact:
        if n < 0:
            return self.inverse() ** (-n)
        out = QuadExact.rational(1, self.m)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __complex__(self) -> complex:
        return to_complex(self)

    def __str__(self) -> str:
        if self.b == 0:
            return str(self.a)
        return f"{self.a}{'+' if self.b > 0 else '-'}{abs(self.b)}*sqrt(-{self.m})"

    def to_json(self) -> dict[str, Any]:
        return {"a": str(self.a), "b": str(self.b), "m": self.m}


Scalar = Union[QuadExact, complex]


def to_complex(x: Union[Scalar, Rational, float]) -> complex:
    """Evaluate a scalar in double precision.

    Each component of a :class:`QuadExact` is rounded once from the exact
    rational, the imaginary part once more for the multiplication by
    ``sqrt(m)``.
    """
    if isinstance(x, QuadExact):
        return complex(float(x.a), float(x.b) * math.sqrt(x.m))
    return complex(x)


def scalar_eq(x: Scalar, y: Scalar, tol: float = 1e-9) -> bool:
    """Field equality for exact scalars, ``|x - y| <= tol`` otherwise."""
    if tol < 0:
        raise ValueError("tol must be non-negative")
    if isinstance(x, QuadExact) and isinstance(y, QuadExact):
        if x.m != y.m:
            raise FieldMismatchError(f"field mismatch: m={x.m} vs m={y.m}")
        return x == y
    return abs(to_complex(x) - to_complex(y)) <= tol


def parse_scalar(raw: Any, m: Union[int, None]) -> Scalar:
    """Decode a scalar from its file encoding.

    Accepted forms are ``{"a": "p/q", "b": "p/q", "m": n}``, a rational given
    as number or string (exact when ``m`` is known), and ``[re, im]`` for
    approximate values.
    """
    if isinstance(raw, dict):
        unknown = set(raw) - {"a", "b", "m"}
        if unknown:
            raise SliceFormatError(f"unknown field {sorted(unknown)} in scalar")
        field_m = int(raw.get("m", m if m is not None else 0))
        if m is not None and field_m != m:
            raise FieldMismatchError(f"field mismatch: m={field_m} vs m={m}")
        try:
            return QuadExact(Fraction(str(raw.get("a", 0))), Fraction(str(raw.get("b", 0))), field_m)
        except (ValueError, ZeroDivisionError) as e:
            raise SliceFormatError(f"bad scalar {raw!r}: {e}") from e
    if isinstance(raw, (list, tuple)):
        if len(raw) != 2:
            raise SliceFormatError(f"bad approximate scalar {raw!r}")
        return complex(float(raw[0]), float(raw[1]))
    if isinstance(raw, (int, str)) and not isinstance(raw, bool):
        try:
            value = Fraction(str(raw))
        except (ValueError, ZeroDivisionError) as e:
            raise SliceFormatError(f"bad scalar {raw!r}: {e}") from e
        return QuadExact.rational(value, m) if m is not None else complex(float(value))
    if isinstance(raw, float):
        if m is not None:
            return QuadExact.rational(Fraction(raw), m)
        return complex(raw)
    raise SliceFormatError(f"bad scalar {raw!r}")


def dump_scalar(x: Scalar) -> Any:
    if isinstance(x, QuadExact):
        return x.to_json()
    c = complex(x)
    return [c.real, c.imag]


def as_complex_array(values: Any) -> np.ndarray:
    """Vectorised :func:`to_complex` for nested sequences of scalars."""
    arr = np.asarray(values, dtype=object)
    return np.vectorize(to_complex, otypes=[complex])(arr)
