"""Rigidity checks between spectral packages: eigenvalues, lengths and the elliptic number.

A package bundles the eigenvalue data ``S``, the length spectrum ``L`` and
the elliptic number ``E`` of one group and correspondence. Packages that
differ in finitely many, but not zero, entries contradict the rigidity
theorem and are flagged as bad data.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Sequence, Union

import numpy as np

from .config import settings
from .conjugacy import ClassRecord
from .errors import AdmissibilityError, ComparisonError, DataValidationError, SliceFormatError
from .trace import DISTINCT, LengthSpectrum, SpectralData, elliptic_number, length_spectrum

log = logging.getLogger(__name__)

IDENTICAL = "identical"
FINITE = "finite"
COFINITE = "cofinite"

_PACKAGE_KEYS = {"label", "S", "L", "E"}


@dataclass(frozen=True)
class SpectrumPackage:
    S: Optional[SpectralData]
    L: Optional[LengthSpectrum]
    E: Optional[float]
    label: str = ""

    def require(self) -> None:
        missing = [name for name in ("S", "L", "E") if getattr(self, name) is None]
        if missing:
            raise DataValidationError(f"package '{self.label}' lacks {', '.join(missing)}")


def spectrum_package_from_classes(classes: Sequence[ClassRecord], sd: Optional[SpectralData] = None,
                                  label: str = "") -> SpectrumPackage:
    return SpectrumPackage(sd, length_spectrum(classes), elliptic_number(classes), label)


def load_package(path: Union[str, Path]) -> SpectrumPackage:
    path = Path(path)
    log.info("Loading spectrum package %s", path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    unknown = set(raw) - _PACKAGE_KEYS
    if unknown:
        raise SliceFormatError(f"unknown field {sorted(unknown)} in {path.name}")

    S = None
    if raw.get("S") is not None:
        rows = np.asarray(raw["S"], dtype=float).reshape(-1, 3)
        S = SpectralData(rows[:, 0], rows[:, 1] + 1j * rows[:, 2], DISTINCT)
    L = None
    if raw.get("L") is not None:
        rows = np.asarray(raw["L"], dtype=float).reshape(-1, 2)
        L = LengthSpectrum(rows[:, 0], rows[:, 1])
    E = None if raw.get("E") is None else float(raw["E"])
    return SpectrumPackage(S, L, E, str(raw.get("label", path.stem)))


def dump_package(p: SpectrumPackage, path: Union[str, Path]) -> None:
    path = Path(path)
    out = {
        "label": p.label,
        "S": None if p.S is None else [[float(l), float(w.real), float(w.imag)] for l, w in zip(p.S.lambdas, p.S.omegas)],
        "L": None if p.L is None else [[float(m), float(w)] for m, w in zip(p.L.mu, p.L.weight)],
        "E": p.E,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")
    log.info("Wrote spectrum package %s", path)


def resolvent_identity_residual(p: SpectrumPackage, s: complex, B: complex) -> complex:
    """Length side minus spectral side of the resolvent identity.

    Length side: ``(1/2s) sum w e^{-s mu} - (1/2B) sum w e^{-B mu}``.
    Spectral side: ``sum omega (1/(s^2 - s_n^2) - 1/(B^2 - s_n^2)) - (1/2s - 1/2B) E``.
    """
    s, B = complex(s), complex(B)
    if s.real <= 1:
        raise AdmissibilityError(f"outside convergence region: Re(s) = {s.real} <= 1")
    if not s.real < B.real:
        raise AdmissibilityError(f"outside convergence region: need Re(s) < Re(B), got s={s}, B={B}")
    p.require()

    mu, w = p.L.mu, p.L.weight
    lhs = np.sum(w * np.exp(-s * mu)) / (2 * s) - np.sum(w * np.exp(-B * mu)) / (2 * B)
    sn2 = 1 - p.S.lambdas
    rhs = np.sum(p.S.omegas * (1 / (s * s - sn2) - 1 / (B * B - sn2))) - (1 / (2 * s) - 1 / (2 * B)) * p.E
    return complex(lhs - rhs)


# -- comparisons -----------------------------------------------------------

def _close(x: complex, y: complex, tol: float) -> bool:
    return abs(x - y) <= tol * max(1.0, abs(x), abs(y))


def _match(left: list[tuple[float, complex]], right: list[tuple[float, complex]], tol: float) -> tuple[list[int], list[int]]:
    """Indices of unmatched entries on each side; entries match on value and weight."""
    used = [False] * len(right)
    unmatched_left = []
    for i, (v, w) in enumerate(left):
        for j, (v2, w2) in enumerate(right):
            if not used[j] and _close(v, v2, tol) and _close(w, w2, tol):
                used[j] = True
                break
        else:
            unmatched_left.append(i)
    return unmatched_left, [j for j, u in enumerate(used) if not u]


def _entries(p: SpectrumPackage, mode: str) -> list[tuple[float, complex]]:
    if mode == "S":
        if p.S is None:
            raise DataValidationError(f"package '{p.label}' has no eigenvalue data")
        return [(float(l), complex(w)) for l, w in zip(p.S.lambdas, p.S.omegas)]
    if p.L is None:
        raise DataValidationError(f"package '{p.label}' has no length spectrum")
    return [(float(m), complex(w)) for m, w in zip(p.L.mu, p.L.weight)]


def _tail_unmatched(n: int, unmatched: list[int]) -> bool:
    if n == 0:
        return True
    top = max(1, math.ceil(settings.huber_tail_fraction * n))
    return set(range(n - top, n)) <= set(unmatched)


@dataclass(frozen=True)
class RigidityReport:
    mode: str
    status: str
    difference: int
    only_left: list[float]
    only_right: list[float]
    contradiction: bool
    E_equal: Optional[bool]
    labels: tuple[str, str]


def compare_spectra(pA: SpectrumPackage, pB: SpectrumPackage, mode: Literal["S", "L"] = "L") -> RigidityReport:
    """Classify the difference between two packages' spectra.

    ``identical`` when every entry matches, ``cofinite`` when the top
    ``settings.huber_tail_fraction`` of both lists is unmatched, ``finite``
    otherwise; a finite non-empty difference is a contradiction.
    """
    if mode not in ("S", "L"):
        raise DataValidationError(f"unknown comparison mode '{mode}'")
    tol = settings.tolerances.match
    left, right = _entries(pA, mode), _entries(pB, mode)
    only_l, only_r = _match(left, right, tol)
    k = len(only_l) + len(only_r)
    if k == 0:
        status = IDENTICAL
    elif _tail_unmatched(len(left), only_l) and _tail_unmatched(len(right), only_r):
        status = COFINITE
    else:
        status = FINITE
    contradiction = status == FINITE
    E_equal = None
    if pA.E is not None and pB.E is not None:
        E_equal = _close(pA.E, pB.E, tol)
    if contradiction:
        log.warning("rigidity contradiction between '%s' and '%s': %d %s entries differ", pA.label, pB.label, k, mode)
    return RigidityReport(
        mode, status, k,
        [left[i][0] for i in only_l], [right[j][0] for j in only_r],
        contradiction, E_equal, (pA.label, pB.label),
    )


@dataclass(frozen=True)
class CorollaryReport:
    passed: bool
    differing: list[float]
    contradiction: bool


def corollary_check(pA: SpectrumPackage, pB: SpectrumPackage) -> CorollaryReport:
    """Two correspondences on one group: their ``omega`` may not differ in finitely many places."""
    left, right = _entries(pA, "S"), _entries(pB, "S")
    tol = settings.tolerances.match
    if len(left) != len(right) or any(not _close(a[0], b[0], tol) for a, b in zip(left, right)):
        raise ComparisonError("not a single-group comparison: eigenvalue lists differ")
    differing = [i for i, (a, b) in enumerate(zip(left, right)) if not _close(a[1], b[1], tol)]
    if not differing:
        return CorollaryReport(True, [], False)
    log.warning("corollary contradiction between '%s' and '%s' at %d eigenvalues", pA.label, pB.label, len(differing))
    return CorollaryReport(False, [left[i][0] for i in differing], True)
