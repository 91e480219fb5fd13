"""Both sides of the Hecke trace formula on a slice, and the heat-kernel applications."""
from __future__ import annotations

import cmath
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.integrate import IntegrationWarning, nquad

from .config import settings
from .conjugacy import ORDER2_EXTENSION, ClassRecord, CentralizerData
from .correspondence import CorrespondenceData, UnitaryRep, chi_on_double_coset
from .errors import AdmissibilityError, ClassificationError, DataValidationError, DatasetInvalidError, QuadratureError
from .groupdata import GroupSlice
from .io import read_spectral_csv
from .isometry import ELLIPTIC, LOXODROMIC, Isometry, PointH3, apply, conjugate_to_normal_form, delta
from .scalars import to_complex
from .transforms import GeodesicTestFunction, PointPairFunction, SpectralTestFunction, integrate

log = logging.getLogger(__name__)

MULTIPLICITY = "multiplicity"
DISTINCT = "distinct"


# -- spectral data ---------------------------------------------------------

@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues with their weights ``omega``.

    Under the ``distinct`` convention each eigenvalue appears once and its
    ``omega`` already carries the multiplicity.
    """

    lambdas: np.ndarray
    omegas: np.ndarray
    convention: str = DISTINCT

    def __post_init__(self) -> None:
        lam = np.asarray(self.lambdas, dtype=float)
        om = np.asarray(self.omegas, dtype=complex)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "omegas", om)
        if lam.shape != om.shape:
            raise DataValidationError("spectral data: lambda and omega lengths differ")
        if self.convention not in (DISTINCT, MULTIPLICITY):
            raise DataValidationError(f"unknown spectral convention '{self.convention}'")
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(om))):
            raise DataValidationError("spectral data contains non-finite entries")
        if np.any(lam < 0):
            raise DataValidationError("spectral data: negative eigenvalue")
        steps = np.diff(lam)
        if np.any(steps < 0) or (self.convention == DISTINCT and np.any(steps == 0)):
            raise DataValidationError(f"spectral data: eigenvalues not ordered for the {self.convention} convention")

    def __len__(self) -> int:
        return len(self.lambdas)

    @property
    def s_values(self) -> np.ndarray:
        """Roots of ``s^2 = 1 - lambda`` with non-negative real and imaginary parts."""
        lam = self.lambdas
        return np.where(lam <= 1, np.sqrt(np.clip(1 - lam, 0, None)) + 0j, 1j * np.sqrt(np.clip(lam - 1, 0, None)))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"lambda": self.lambdas, "omega": self.omegas})

    @classmethod
    def from_frame(cls, df: pd.DataFrame, convention: str = DISTINCT) -> SpectralData:
        return cls(df["lambda"].to_numpy(dtype=float), df["omega"].to_numpy(dtype=complex), convention)


def load_spectral(path: Union[str, Path], convention: str = DISTINCT) -> SpectralData:
    log.info("Loading spectral data %s", path)
    return SpectralData.from_frame(read_spectral_csv(path), convention)


def _fsum_complex(values: Sequence[complex]) -> complex:
    return complex(math.fsum(complex(v).real for v in values), math.fsum(complex(v).imag for v in values))


def spectral_side(sd: SpectralData, h: SpectralTestFunction) -> complex:
    """``sum_m h(lambda_m) omega_m``."""
    return _fsum_complex([h(float(lam)) * om for lam, om in zip(sd.lambdas, sd.omegas)])


def check_omega_real(sd: SpectralData, assumption2: Optional[bool]) -> bool:
    """Whether all ``omega`` are real; an error when self-adjointness says they must be."""
    real = bool(np.all(np.abs(sd.omegas.imag) <= settings.tolerances.match * np.maximum(1.0, np.abs(sd.omegas))))
    if assumption2 and not real:
        raise DataValidationError("omega not real although the Hecke operator is self-adjoint")
    return real


# -- class terms -----------------------------------------------------------

def class_weight(c: ClassRecord) -> float:
    """``log N(T0) / (m |a(T) - a(T)^-1|^2)`` for loxodromic, ``log N(T0) / (m |tr^2 - 4|)`` for elliptic."""
    cent = c.require_centralizer()
    if c.kind == LOXODROMIC:
        a = c.a_of_T
        return math.log(cent.N_T0) / (cent.elliptic_order * abs(a - 1 / a) ** 2)
    if c.trace_sq_minus_4 < settings.tolerances.degenerate_elliptic:
        raise ClassificationError(f"degenerate elliptic: |tr^2 - 4| = {c.trace_sq_minus_4:.3e}")
    return math.log(cent.N_T0) / (cent.elliptic_order * c.trace_sq_minus_4)


def loxodromic_term(c: ClassRecord, g: GeodesicTestFunction, chi_weight: complex = 1.0) -> complex:
    if c.kind != LOXODROMIC:
        raise DataValidationError(f"loxodromic term for a {c.kind} class")
    if chi_weight == 0:
        return 0.0
    return chi_weight * g(math.log(c.norm)) * class_weight(c)


def elliptic_term(c: ClassRecord, g0: complex, chi_weight: complex = 1.0) -> complex:
    if c.kind != ELLIPTIC:
        raise DataValidationError(f"elliptic term for a {c.kind} class")
    weight = class_weight(c)
    return chi_weight * g0 * weight


def chi_weight(s: GroupSlice, cd: Optional[CorrespondenceData], chi: UnitaryRep, T: Isometry) -> complex:
    """``tr chi(T^-1)^*`` through the extension of ``chi`` to the double coset."""
    if chi.is_trivial:
        return 1.0
    if cd is None:
        raise DataValidationError("a non-trivial representation needs the coset decomposition")
    return complex(np.trace(chi_on_double_coset(s, cd, chi, T.inverse()))).conjugate()


def _oracle_nquad(f, ranges, limit: int) -> float:
    opts = {"limit": limit, "epsrel": settings.quadrature.oracle_epsrel, "epsabs": 1e-14}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        value, _ = nquad(f, ranges, opts=[opts, opts, opts])
    for w in caught:
        log.debug("oracle nquad: %s", w.message)
    return value


def orbital_integral_oracle(T: Isometry, cent: CentralizerData, k: PointPairFunction) -> float:
    """Integrate ``k(delta(P, T P))`` over a fundamental domain of the centralizer.

    With ``T`` diagonal, ``T0`` scales the quaternion norm ``|P|`` by
    ``N(T0)`` and the elliptic part rotates about the vertical axis, so the
    domain is the shell ``1 <= |P| < N(T0)`` cut to the sector
    ``0 <= arg z < 2 pi / r`` for ``r`` rotations about the axis. Points are
    ``P = R (w e^{i phi} + j) / sqrt(1 + w^2)`` with ``dv = w dw dphi dR / R``.
    When an element of the centralizer inverts ``T0`` it swaps the two halves
    ``|P| < sqrt N(T0)`` and ``|P| > sqrt N(T0)`` of the shell, and only the
    lower half is kept.
    """
    if not k.bounded:
        raise AdmissibilityError("oracle needs a kernel of bounded support")
    D = conjugate_to_normal_form(T).D
    lam = to_complex(D.a) / cmath.sqrt(to_complex(D.det))
    length, turn = 2 * math.log(abs(lam)), 2 * cmath.phase(lam)
    ch = math.cosh(length)
    spread = ch - math.cos(turn)
    if k.support_bound < ch or spread <= 0:
        return 0.0
    w_max = math.sqrt((k.support_bound - ch) / spread)

    def integrand(w: float, phi: float, R: float) -> float:
        scale = R / math.sqrt(1 + w * w)
        P = PointH3(scale * w * cmath.exp(1j * phi), scale)
        return float(np.real(k(delta(P, apply(D, P))))) * w / R

    rotations, top = cent.elliptic_order, cent.N_T0
    if cent.structure_case == ORDER2_EXTENSION:
        rotations, top = rotations // 2, math.sqrt(top)
    ranges = [(0.0, w_max), (0.0, 2 * math.pi / rotations), (1.0, top)]
    limit = settings.quadrature.oracle_limit
    try:
        coarse = _oracle_nquad(integrand, ranges, limit)
        fine = _oracle_nquad(integrand, ranges, 2 * limit)
    except (ValueError, ArithmeticError) as e:
        raise QuadratureError(f"oracle quadrature failed: {e}") from e
    if not math.isfinite(fine) or abs(fine - coarse) > 1e-4 * max(abs(fine), 1e-300):
        raise QuadratureError(f"oracle quadrature failed: {coarse!r} vs {fine!r}")
    return fine


# -- geometric side --------------------------------------------------------

@dataclass(frozen=True)
class GeometricSide:
    elliptic_terms: list[tuple[int, complex]] = field(default_factory=list)
    loxodromic_terms: list[tuple[int, complex]] = field(default_factory=list)
    elliptic_number: float = 0.0
    truncation_radius: float = 0.0
    chi_weights_applied: bool = False
    tail_bound: float = 0.0

    @property
    def elliptic_total(self) -> complex:
        return _fsum_complex([v for _, v in self.elliptic_terms])

    @property
    def loxodromic_total(self) -> complex:
        return _fsum_complex([v for _, v in self.loxodromic_terms])

    @property
    def total(self) -> complex:
        return _fsum_complex([self.elliptic_total, self.loxodromic_total])


def elliptic_number(classes: Sequence[ClassRecord]) -> float:
    """Sum of ``log N(T0) / (m |tr(R)^2 - 4|)`` over the elliptic classes."""
    return math.fsum(class_weight(c) for c in classes if c.kind == ELLIPTIC)


def _tail_bound(g: GeodesicTestFunction, start: float) -> float:
    cap = settings.quadrature.distance_cap
    if start >= cap:
        return 0.0
    return integrate(lambda x: abs(g(x)) * math.exp(x), start, cap, failure="tail bound quadrature failed")


def geometric_side(s: GroupSlice, classes: Sequence[ClassRecord], pair: tuple[SpectralTestFunction, GeodesicTestFunction],
                   chi: Optional[UnitaryRep] = None, cd: Optional[CorrespondenceData] = None) -> GeometricSide:
    """Elliptic and loxodromic terms in sorted class order.

    ``tail_bound`` integrates ``|g(x)| e^x`` beyond the larger of the slice
    radius and ``log`` of the norm gap: class counts grow like ``e^{2x}``
    and class weights decay like ``e^{-x}``.
    """
    _, g = pair
    chi = chi or UnitaryRep.trivial()
    ordered = sorted(enumerate(classes), key=lambda ic: ic[1].representative.sort_key)
    g0 = g.g0

    def term(ic: tuple[int, ClassRecord]) -> tuple[int, str, complex]:
        i, c = ic
        w = chi_weight(s, cd, chi, c.representative)
        if c.kind == ELLIPTIC:
            return i, ELLIPTIC, elliptic_term(c, g0, w)
        return i, LOXODROMIC, loxodromic_term(c, g, w)

    with ThreadPoolExecutor(max_workers=settings.threads()) as pool:
        results = list(pool.map(term, ordered))

    ell = [(i, v) for i, kind, v in results if kind == ELLIPTIC]
    lox = [(i, v) for i, kind, v in results if kind == LOXODROMIC]
    gap = min((c.norm for c in classes if c.kind == LOXODROMIC), default=math.e)
    tail = _tail_bound(g, max(s.radius, math.log(gap))) if classes else 0.0
    side = GeometricSide(ell, lox, elliptic_number(classes), s.radius, not chi.is_trivial, tail)
    log.info("Geometric side: %d elliptic, %d loxodromic terms, total %s", len(ell), len(lox), side.total)
    return side


# -- length spectrum -------------------------------------------------------

@dataclass(frozen=True)
class LengthSpectrum:
    mu: np.ndarray
    weight: np.ndarray

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=float)
        weight = np.asarray(self.weight, dtype=float)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "weight", weight)
        if mu.shape != weight.shape:
            raise DataValidationError("length spectrum: mu and weight lengths differ")
        if np.any(np.diff(mu) <= 0) or np.any(mu <= 0):
            raise DataValidationError("length spectrum: lengths must be positive and strictly increasing")
        if np.any(weight <= 0):
            raise DataValidationError("length spectrum: weights must be positive")

    def __len__(self) -> int:
        return len(self.mu)


def length_spectrum(classes: Sequence[ClassRecord]) -> LengthSpectrum:
    """Class weights summed per length ``log N(T)``, lengths merged at 1e-9."""
    rows = [(math.log(c.norm), class_weight(c)) for c in classes if c.kind == LOXODROMIC]
    if not rows:
        return LengthSpectrum(np.empty(0), np.empty(0))
    df = pd.DataFrame(rows, columns=["mu", "weight"])
    df["bucket"] = df["mu"].round(9)
    grouped = df.groupby("bucket", sort=True).agg(mu=("mu", "min"), weight=("weight", "sum"))
    return LengthSpectrum(grouped["mu"].to_numpy(), grouped["weight"].to_numpy())


# -- heat kernel -----------------------------------------------------------

@dataclass(frozen=True)
class HeatTrace:
    t: float
    elliptic_piece: float
    loxodromic_piece: float

    @property
    def total(self) -> float:
        return self.elliptic_piece + self.loxodromic_piece


def _heat_prefactor(t: float) -> float:
    if not t > 0:
        raise DataValidationError(f"heat trace needs t > 0, got {t}")
    return math.exp(-t) / math.sqrt(4 * math.pi * t)


def heat_trace_geometric(classes: Sequence[ClassRecord], E: float, t: float) -> HeatTrace:
    """Geometric side for ``h(z) = exp(-z t)`` with a given elliptic number ``E``."""
    pref = _heat_prefactor(t)
    lox = math.fsum(
        math.exp(-math.log(c.norm) ** 2 / (4 * t)) * class_weight(c)
        for c in classes if c.kind == LOXODROMIC
    )
    return HeatTrace(t, pref * E, pref * lox)


def norm_gap(classes: Sequence[ClassRecord]) -> float:
    """Least ``N(T)`` over loxodromic classes; must exceed 1."""
    norms = [c.norm for c in classes if c.kind == LOXODROMIC]
    if not norms:
        raise DataValidationError("norm gap needs at least one loxodromic class")
    c0 = min(norms)
    if c0 <= 1 + settings.tolerances.norm_gap:
        raise DatasetInvalidError(f"norm gap violated — dataset invalid: c0 = {c0}")
    return c0


def heat_tail_envelope(classes: Sequence[ClassRecord], t: float) -> pd.DataFrame:
    """Loxodromic heat terms next to the envelope given by the norm gap."""
    pref = _heat_prefactor(t)
    c0 = norm_gap(classes)
    floor = math.exp(-math.log(c0) ** 2 / (4 * t))
    rows = []
    for c in classes:
        if c.kind != LOXODROMIC:
            continue
        w = class_weight(c)
        term = pref * math.exp(-math.log(c.norm) ** 2 / (4 * t)) * w
        rows.append({"norm": c.norm, "term": term, "envelope": pref * floor * w})
    df = pd.DataFrame(rows, columns=["norm", "term", "envelope"])
    df["within"] = df["term"] <= df["envelope"] * (1 + 1e-12)
    return df


@dataclass(frozen=True)
class HeatAsymptoticReport:
    t: np.ndarray
    residual: np.ndarray
    ratio: np.ndarray
    slope: float
    passed: bool

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.t, "residual": self.residual, "ratio": self.ratio})


def heat_asymptotic_check(classes: Sequence[ClassRecord], E: float, t_grid: Sequence[float]) -> HeatAsymptoticReport:
    """Is ``|heat(t) - E / sqrt(4 pi t)|`` of order ``sqrt(t)`` along a decreasing grid?

    ``heat(t)`` is built from the classes themselves; ``E`` is the claimed
    elliptic number under test.

    The log-log slope of ``r(t)/sqrt(t)`` against ``t`` must stay above
    ``settings.heat_slope_floor``; a wrong ``E`` leaves a ``t^-1`` trend.
    """
    ts = np.asarray(list(t_grid), dtype=float)
    if len(ts) < 2 or np.any(ts <= 0) or np.any(np.diff(ts) >= 0):
        raise DataValidationError("heat grid must be positive, strictly decreasing and have two points")
    actual = elliptic_number(classes)
    residual = np.array([abs(heat_trace_geometric(classes, actual, t).total - E / math.sqrt(4 * math.pi * t)) for t in ts])
    ratio = residual / np.sqrt(ts)
    if np.all(residual == 0):
        return HeatAsymptoticReport(ts, residual, ratio, 0.0, True)
    positive = ratio > 0
    if positive.sum() < 2:
        return HeatAsymptoticReport(ts, residual, ratio, 0.0, True)
    slope = float(np.polyfit(np.log(ts[positive]), np.log(ratio[positive]), 1)[0])
    passed = slope > settings.heat_slope_floor
    log.info("Heat asymptotics: slope %.4g (%s)", slope, "bounded" if passed else "diverging")
    return HeatAsymptoticReport(ts, residual, ratio, slope, passed)


def weyl_prediction(vol: float, t: float) -> float:
    """``vol / (8 pi^{3/2}) t^{-3/2}``."""
    if not (vol > 0 and t > 0):
        raise DataValidationError(f"Weyl prediction needs vol > 0 and t > 0, got vol={vol}, t={t}")
    return vol / (8 * math.pi ** 1.5) * t ** -1.5
