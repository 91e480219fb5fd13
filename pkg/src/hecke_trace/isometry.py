"""Isometries of hyperbolic 3-space acting on the upper half-space model.

An :class:`Isometry` is a projective 2x2 matrix. Exact matrices have entries
in Q(sqrt(-m)) and may carry any nonzero determinant ``det``; they stand for
``M / sqrt(det)``. Approximate matrices have ``complex`` entries, are scaled to
determinant one and sign-canonicalised on construction.
"""
from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Optional

import numpy as np

from .config import settings
from .errors import ClassificationError, DataValidationError, FieldMismatchError
from .scalars import QuadExact, Scalar, to_complex

log = logging.getLogger(__name__)

IDENTITY = "identity"
ELLIPTIC = "elliptic"
PARABOLIC = "parabolic"
LOXODROMIC = "loxodromic"


@dataclass(frozen=True)
class PointH3:
    """The point ``z + r j`` of upper half-space."""

    z: complex
    r: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "z", complex(self.z))
        object.__setattr__(self, "r", float(self.r))
        if not (self.r > 0 and math.isfinite(self.r)):
            raise DataValidationError(f"point height must be positive, got r={self.r}")

    @property
    def quaternion_norm(self) -> float:
        return math.sqrt(abs(self.z) ** 2 + self.r ** 2)


J = PointH3(0j, 1.0)


def _sign_canonical(entries: tuple[complex, ...], tol: float) -> tuple[complex, ...]:
    for x in entries:
        if abs(x) > tol:
            flip = x.real < -tol or (abs(x.real) <= tol and x.imag < 0)
            return tuple(-e for e in entries) if flip else entries
    return entries


class Isometry:
    """A projective element of PSL(2, C).

    Build exact elements with :meth:`exact` and approximate ones with
    :meth:`approx`; the constructor dispatches on the entry types.
    """

    def __init__(self, a: Scalar, b: Scalar, c: Scalar, d: Scalar):
        entries = (a, b, c, d)
        if all(isinstance(x, QuadExact) for x in entries):
            ms = {x.m for x in entries}
            if len(ms) != 1:
                raise FieldMismatchError(f"field mismatch: entries over m={sorted(ms)}")
            if (a * d - b * c).is_zero():
                raise DataValidationError("singular matrix is not an isometry")
        else:
            entries = tuple(to_complex(x) for x in entries)
            det = entries[0] * entries[3] - entries[1] * entries[2]
            if abs(det) == 0:
                raise DataValidationError("singular matrix is not an isometry")
            root = cmath.sqrt(det)
            entries = _sign_canonical(tuple(x / root for x in entries), settings.tolerances.approx)
        self.a, self.b, self.c, self.d = entries

    @classmethod
    def exact(cls, a: Scalar, b: Scalar, c: Scalar, d: Scalar, m: Optional[int] = None) -> Isometry:
        if m is not None:
            a, b, c, d = (x if isinstance(x, QuadExact) else QuadExact.rational(Fraction(x), m) for x in (a, b, c, d))
        return cls(a, b, c, d)

    @classmethod
    def approx(cls, a: complex, b: complex, c: complex, d: complex) -> Isometry:
        return cls(complex(a), complex(b), complex(c), complex(d))

    @classmethod
    def from_numpy(cls, arr: np.ndarray) -> Isometry:
        arr = np.asarray(arr, dtype=complex)
        return cls.approx(arr[0, 0], arr[0, 1], arr[1, 0], arr[1, 1])

    @classmethod
    def identity(cls, m: Optional[int] = None) -> Isometry:
        if m is None:
            return cls.approx(1, 0, 0, 1)
        return cls.exact(1, 0, 0, 1, m=m)

    @property
    def entries(self) -> tuple[Scalar, Scalar, Scalar, Scalar]:
        return (self.a, self.b, self.c, self.d)

    @property
    def is_exact(self) -> bool:
        return isinstance(self.a, QuadExact)

    @property
    def field_m(self) -> Optional[int]:
        return self.a.m if self.is_exact else None

    @cached_property
    def det(self) -> Scalar:
        return self.a * self.d - self.b * self.c

    @cached_property
    def abs_det(self) -> float:
        if self.is_exact:
            return math.sqrt(float(self.det.norm()))
        return 1.0

    @property
    def trace(self) -> Scalar:
        return self.a + self.d

    @cached_property
    def tau(self) -> Scalar:
        """Scale-free squared trace ``tr^2 / det``."""
        t = self.trace
        if self.is_exact:
            return t * t / self.det
        return t * t

    def to_numpy(self) -> np.ndarray:
        """Determinant-one complex matrix representing this element."""
        arr = np.array([[to_complex(self.a), to_complex(self.b)],
                        [to_complex(self.c), to_complex(self.d)]], dtype=complex)
        if self.is_exact:
            arr = arr / cmath.sqrt(to_complex(self.det))
        return arr

    def to_approx(self) -> Isometry:
        if not self.is_exact:
            return self
        return Isometry.from_numpy(self.to_numpy())

    @cached_property
    def key(self) -> tuple:
        """Projective hash key: the entries divided by the first nonzero one.

        Approximate elements round their canonical entries; use
        :meth:`isclose` rather than keys when comparing those.
        """
        if self.is_exact:
            pivot = next(x for x in self.entries if not x.is_zero())
            return tuple((y.a, y.b) for y in (x / pivot for x in self.entries))
        return tuple((round(x.real, 9) + 0.0, round(x.imag, 9) + 0.0) for x in self.entries)

    def isclose(self, other: Isometry, tol: Optional[float] = None) -> bool:
        tol = settings.tolerances.approx if tol is None else tol
        if self.is_exact and other.is_exact:
            if self.field_m != other.field_m:
                raise FieldMismatchError(f"field mismatch: m={self.field_m} vs m={other.field_m}")
            return self.key == other.key
        A, B = self.to_numpy(), other.to_numpy()
        return min(np.abs(A - B).max(), np.abs(A + B).max()) <= tol

    def __eq__(self, other: object) -> bool:
        """Key equality for exact elements, tolerance for approximate ones.

        Exact and approximate elements never compare equal; use
        :meth:`isclose` to compare across the two.
        """
        if not isinstance(other, Isometry):
            return NotImplemented
        if self.is_exact != other.is_exact:
            return False
        return self.isclose(other)

    def __hash__(self) -> int:
        if self.is_exact:
            return hash(self.key)
        # tolerance equality is not transitive: approximate elements share one bucket
        return hash(Isometry)

    def __matmul__(self, other: Isometry) -> Isometry:
        if self.is_exact and other.is_exact:
            if self.field_m != other.field_m:
                raise FieldMismatchError(f"field mismatch: m={self.field_m} vs m={other.field_m}")
            a, b, c, d = self.entries
            e, f, g, h = other.entries
            return Isometry(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)
        return Isometry.from_numpy(self.to_numpy() @ other.to_numpy())

    def inverse(self) -> Isometry:
        a, b, c, d = self.entries
        return Isometry(d, -b, -c, a)

    def __pow__(self, n: int) -> Isometry:
        if n < 0:
            return self.inverse() ** (-n)
        out = Isometry.identity(self.field_m)
        base = self
        while n:
            if n & 1:
                out = out @ base
            base = base @ base
            n >>= 1
        return out

    def is_identity(self) -> bool:
        if self.is_exact:
            return self.b.is_zero() and self.c.is_zero() and self.a == self.d
        tol = settings.tolerances.approx
        return abs(self.b) <= tol and abs(self.c) <= tol and abs(self.a - self.d) <= tol

    def commutes_with(self, other: Isometry, tol: Optional[float] = None) -> bool:
        """``self @ other == other @ self`` in PSL(2, C)."""
        if self.is_exact and other.is_exact:
            return (self @ other).key == (other @ self).key
        tol = settings.tolerances.commutation if tol is None else tol
        A, B = self.to_numpy(), other.to_numpy()
        AB, BA = A @ B, B @ A
        return min(np.linalg.norm(AB - BA), np.linalg.norm(AB + BA)) <= tol

    @cached_property
    def frobenius_sq(self) -> float:
        """``||M||_F^2 / |det|``."""
        total = sum(float(x.norm()) if self.is_exact else abs(x) ** 2 for x in self.entries)
        return total / self.abs_det

    @cached_property
    def displacement(self) -> float:
        """``delta(M j, j)``, the cosh of the distance ``M`` moves ``j``."""
        return max(1.0, self.frobenius_sq / 2.0)

    @cached_property
    def sort_key(self) -> tuple:
        """Canonical ordering: identity first, then displacement of ``j``, then entries."""
        if self.is_exact:
            total = sum((x.norm() for x in self.entries), Fraction(0))
            disp_sq = total * total / self.det.norm()
        else:
            disp_sq = round(self.frobenius_sq ** 2, 9)
        return (0 if self.is_identity() else 1, disp_sq, self.key)

    def __lt__(self, other: Isometry) -> bool:
        return self.sort_key < other.sort_key

    def __repr__(self) -> str:
        return "Isometry([[{}, {}], [{}, {}]])".format(*(str(x) for x in self.entries))


# -- action and distance ---------------------------------------------------

def apply(M: Isometry, P: PointH3) -> PointH3:
    """Act by ``M`` on ``P = z + r j``."""
    a, b, c, d = (to_complex(x) for x in M.entries)
    z, r = P.z, P.r
    cz_d = c * z + d
    denom = abs(cz_d) ** 2 + abs(c) ** 2 * r * r
    z_new = ((a * z + b) * cz_d.conjugate() + a * c.conjugate() * r * r) / denom
    r_new = r * M.abs_det / denom
    return PointH3(z_new, r_new)


def delta(P: PointH3, Q: PointH3) -> float:
    """Point-pair invariant ``(|z - z'|^2 + r^2 + r'^2) / (2 r r')``."""
    value = (abs(P.z - Q.z) ** 2 + P.r ** 2 + Q.r ** 2) / (2.0 * P.r * Q.r)
    return max(1.0, value)


def distance(P: PointH3, Q: PointH3) -> float:
    return math.acosh(delta(P, Q))


def hyperbolic_volume_element_weight(P: PointH3) -> float:
    """Density of ``dv`` against ``dx dy dr``."""
    return 1.0 / P.r ** 3


# -- classification --------------------------------------------------------

@dataclass(frozen=True)
class IsometryClassification:
    kind: str
    tau: complex
    a_of_T: Optional[complex] = None
    norm: Optional[float] = None
    half_angle: Optional[float] = None

    @property
    def rotation_angle(self) -> Optional[float]:
        return None if self.half_angle is None else 2.0 * self.half_angle

    @property
    def trace(self) -> Optional[float]:
        """Real trace of an elliptic element, taken non-negative."""
        if self.kind != ELLIPTIC:
            return None
        return math.sqrt(max(self.tau.real, 0.0))

    @property
    def trace_sq_minus_4(self) -> float:
        return abs(self.tau - 4)


def _segment_distance(tau: complex) -> float:
    if tau.real < 0:
        return abs(tau)
    if tau.real > 4:
        return abs(tau - 4)
    return abs(tau.imag)


def _elliptic(tau: complex) -> IsometryClassification:
    half = math.acos(min(1.0, math.sqrt(max(tau.real, 0.0)) / 2.0))
    return IsometryClassification(ELLIPTIC, tau, half_angle=half)


def _loxodromic(tau: complex) -> IsometryClassification:
    tr = cmath.sqrt(tau)
    disc = cmath.sqrt(tau - 4)
    a = max(((tr + disc) / 2, (tr - disc) / 2), key=abs)
    return IsometryClassification(LOXODROMIC, tau, a_of_T=a, norm=abs(a) ** 2)


def classify(M: Isometry, tol: Optional[float] = None) -> IsometryClassification:
    """Identity, elliptic, parabolic or loxodromic, with the class invariants.

    Exact matrices are classified by exact arithmetic on ``tau = tr^2/det``.
    Approximate matrices whose ``tau`` lies just outside the tolerance of a
    boundary (the segment [0, 4] or the point 4) raise "classification unstable".
    """
    if M.is_identity():
        return IsometryClassification(IDENTITY, complex(4.0))

    if M.is_exact:
        tau = M.tau
        tau_c = to_complex(tau)
        if tau == 4:
            return IsometryClassification(PARABOLIC, tau_c)
        if tau.is_real() and 0 <= tau.a < 4:
            return _elliptic(tau_c)
        return _loxodromic(tau_c)

    tol = settings.tolerances.approx if tol is None else tol
    band = settings.tolerances.classification_band * tol
    tau = complex(M.tau)
    gap4 = abs(tau - 4)
    if gap4 <= tol:
        return IsometryClassification(PARABOLIC, tau)
    if gap4 <= band:
        raise ClassificationError(f"classification unstable: |tr^2 - 4| = {gap4:.3e}")
    gap = _segment_distance(tau)
    if gap <= tol:
        return _elliptic(complex(min(max(tau.real, 0.0), 4.0)))
    if gap <= band:
        raise ClassificationError(f"classification unstable: tr^2 at distance {gap:.3e} from [0, 4]")
    return _loxodromic(tau)


# -- normal forms ----------------------------------------------------------

@dataclass(frozen=True)
class NormalForm:
    C: Isometry
    D: Isometry


def _eigvec(arr: np.ndarray, lam: complex, tol: float) -> np.ndarray:
    a, b, c, d = arr[0, 0], arr[0, 1], arr[1, 0], arr[1, 1]
    if abs(c) > tol:
        return np.array([lam - d, c])
    if abs(b) > tol:
        return np.array([b, lam - a])
    return np.array([1, 0]) if abs(a - lam) <= abs(d - lam) else np.array([0, 1])


def _first_eigenvalue(kind: str, lams: tuple[complex, complex]) -> int:
    if kind == LOXODROMIC:
        return 0 if abs(lams[0]) >= abs(lams[1]) else 1
    # squares are sign-free; a rotation by pi ties and either order is the same element
    sq0, sq1 = (lams[0] ** 2).imag, (lams[1] ** 2).imag
    if abs(sq0 - sq1) > settings.tolerances.approx:
        return 0 if sq0 > sq1 else 1
    return 0 if lams[0].imag >= 0 else 1


def conjugate_to_normal_form(M: Isometry) -> NormalForm:
    """Return ``C``, ``D`` with ``C^-1 M C = D`` diagonal.

    Loxodromic ``D`` is ``diag(a(T), a(T)^-1)`` with ``|a(T)| > 1``; elliptic
    ``D`` is the rotation ``diag(e^{i phi/2}, e^{-i phi/2})`` with the first
    eigenvalue in the upper half plane. Diagonal exact input stays exact.
    """
    info = classify(M)
    if info.kind not in (ELLIPTIC, LOXODROMIC):
        raise ClassificationError(f"no diagonal form for {info.kind} element")

    if M.is_exact and M.b.is_zero() and M.c.is_zero():
        lams = (to_complex(M.a) / cmath.sqrt(to_complex(M.det)), to_complex(M.d) / cmath.sqrt(to_complex(M.det)))
        m = M.field_m
        if _first_eigenvalue(info.kind, lams) == 0:
            return NormalForm(Isometry.identity(m), M)
        S = Isometry.exact(0, 1, -1, 0, m=m)
        return NormalForm(S, Isometry(M.d, M.c, M.b, M.a))

    arr = M.to_numpy()
    tr = arr[0, 0] + arr[1, 1]
    disc = cmath.sqrt(tr * tr - 4)
    lams = ((tr + disc) / 2, (tr - disc) / 2)
    first = _first_eigenvalue(info.kind, lams)
    l1, l2 = lams[first], lams[1 - first]
    tol = settings.tolerances.approx
    C = np.column_stack([_eigvec(arr, l1, tol), _eigvec(arr, l2, tol)]).astype(complex)
    C = C / cmath.sqrt(np.linalg.det(C))
    D = np.linalg.inv(C) @ arr @ C
    D[0, 1] = D[1, 0] = 0
    log.debug("normal form eigenvalues %s, %s", l1, l2)
    return NormalForm(Isometry.from_numpy(C), Isometry.from_numpy(D))
