"""Test-function triples ``(k, h, g)``.

``k`` is a point-pair function of ``delta = cosh(distance)``, ``h`` its
Selberg/Harish-Chandra transform as a function of the eigenvalue
``lambda = 1 - s^2`` and ``g`` the Fourier transform of ``t -> h(1 + t^2)``.
All quadrature goes through :func:`integrate`, which refuses to return a value
that does not survive a doubling of the subdivision limit.
"""
from __future__ import annotations

import cmath
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .config import settings
from .errors import AdmissibilityError, QuadratureError

log = logging.getLogger(__name__)

Number = Union[float, complex]

HEAT = "heat"
RESOLVENT = "resolvent"


# -- quadrature ------------------------------------------------------------

def integrate(f: Callable[[float], float], a: float, b: float, *, failure: str = "quadrature failed",
              limit: Optional[int] = None, **kwargs) -> float:
    """``scipy.integrate.quad`` at subdivision limits ``L`` and ``2L``.

    Raises :class:`QuadratureError` when the two estimates disagree by more
    than ``settings.quadrature.disagreement`` (relative, floored at 1) or
    when either is not finite.
    """
    cfg = settings.quadrature
    limit = limit or cfg.limit
    opts = dict(epsrel=cfg.epsrel, epsabs=cfg.epsabs, **kwargs)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        coarse, _ = quad(f, a, b, limit=limit, **opts)
        fine, err = quad(f, a, b, limit=2 * limit, **opts)
    for w in caught:
        log.debug("quad on [%g, %g]: %s", a, b, w.message)
    if not (math.isfinite(coarse) and math.isfinite(fine)):
        raise QuadratureError(f"{failure}: non-finite estimate on [{a}, {b}]")
    gap = abs(coarse - fine)
    if gap > cfg.disagreement * max(1.0, abs(fine)):
        raise QuadratureError(f"{failure}: estimates {coarse!r} and {fine!r} disagree by {gap:.3e}")
    return fine


def integrate_complex(f: Callable[[float], complex], a: float, b: float, **kwargs) -> Number:
    re = integrate(lambda u: complex(f(u)).real, a, b, **kwargs)
    im = integrate(lambda u: complex(f(u)).imag, a, b, **kwargs)
    return re if im == 0 else complex(re, im)


# -- function types --------------------------------------------------------

@dataclass(frozen=True)
class PointPairFunction:
    """``k(delta)`` on ``[1, inf)``, zero beyond ``support_bound``."""

    k: Callable[[float], float]
    support_bound: float = math.inf
    smooth: bool = True

    def __call__(self, delta: float) -> float:
        if delta > self.support_bound:
            return 0.0
        return self.k(delta)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.support_bound)

    @property
    def radius(self) -> float:
        """Largest distance at which ``k`` can be nonzero."""
        if self.bounded:
            return math.acosh(max(1.0, self.support_bound))
        return settings.quadrature.distance_cap


@dataclass(frozen=True)
class SpectralTestFunction:
    """``h(lambda)`` with its declared decay ``|h(1+t^2)| <= C (1+t^2)^-p``.

    ``decay_exponent`` is ``p``; ``math.inf`` declares faster than any
    polynomial, in which case ``truncation`` (or the distance cap) bounds the
    line integral.
    """

    h: Callable[[Number], Number]
    strip_halfwidth: float = math.inf
    decay_exponent: float = math.inf
    decay_constant: float = 1.0
    truncation: Optional[float] = None

    def __call__(self, lam: Number) -> Number:
        return self.h(lam)

    def on_line(self, t: float) -> Number:
        return self.h(1.0 + t * t)


@dataclass(frozen=True)
class GeodesicTestFunction:
    g: Callable[[float], Number]

    def __call__(self, x: float) -> Number:
        return self.g(x)

    @property
    def g0(self) -> Number:
        return self.g(0.0)

    def max_evenness_defect(self, samples: np.ndarray) -> float:
        return float(max((abs(self.g(x) - self.g(-x)) for x in samples), default=0.0))


@dataclass(frozen=True)
class ClosedFormPair:
    """Heat ``h(z) = exp(-z t)`` or resolvent ``h(w) = 1/(s^2+w-1) - 1/(B^2+w-1)``."""

    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.name == HEAT:
            t = self.params.get("t")
            if t is None or not t > 0:
                raise AdmissibilityError(f"outside admissible region: heat needs t > 0, got t={t}")
        elif self.name == RESOLVENT:
            s, B = complex(self.params.get("s", 0)), complex(self.params.get("B", 0))
            if not 1 < s.real < B.real:
                raise AdmissibilityError(
                    f"outside admissible region: resolvent needs 1 < Re(s) < Re(B), got s={s}, B={B}"
                )
        else:
            raise AdmissibilityError(f"outside admissible region: unknown pair '{self.name}'")

    @classmethod
    def heat(cls, t: float) -> ClosedFormPair:
        return cls(HEAT, {"t": float(t)})

    @classmethod
    def resolvent(cls, s: Number, B: Number) -> ClosedFormPair:
        return cls(RESOLVENT, {"s": s, "B": B})


# -- closed forms ----------------------------------------------------------

def _heat(t: float) -> tuple[SpectralTestFunction, GeodesicTestFunction]:
    pref = math.exp(-t) / math.sqrt(4 * math.pi * t)
    h = SpectralTestFunction(
        h=lambda z: cmath.exp(-z * t) if isinstance(z, complex) else math.exp(-z * t),
        decay_exponent=math.inf,
        truncation=math.sqrt(30.0 / t),
    )
    g = GeodesicTestFunction(lambda r: pref * math.exp(-r * r / (4 * t)))
    return h, g


def _resolvent(s: Number, B: Number) -> tuple[SpectralTestFunction, GeodesicTestFunction]:
    s_, B_ = complex(s), complex(B)
    real = s_.imag == 0 and B_.imag == 0

    def h(w: Number) -> Number:
        value = 1 / (s_ * s_ + w - 1) - 1 / (B_ * B_ + w - 1)
        return value.real if real and not isinstance(w, complex) else value

    def g(x: float) -> Number:
        ax = abs(x)
        value = cmath.exp(-s_ * ax) / (2 * s_) - cmath.exp(-B_ * ax) / (2 * B_)
        return value.real if real else value

    spectral = SpectralTestFunction(
        h=h,
        strip_halfwidth=s_.real,
        decay_exponent=2.0,
        decay_constant=abs(B_ * B_ - s_ * s_),
    )
    return spectral, GeodesicTestFunction(g)


def closed_form_pair(p: ClosedFormPair) -> tuple[SpectralTestFunction, GeodesicTestFunction]:
    if p.name == HEAT:
        return _heat(p.params["t"])
    return _resolvent(p.params["s"], p.params["B"])


def closed_form_kernel(p: ClosedFormPair) -> PointPairFunction:
    """The point-pair function whose transforms are the closed-form pair."""
    if p.name == HEAT:
        t = p.params["t"]
        norm = (4 * math.pi * t) ** -1.5

        def k(delta: float) -> float:
            rho = math.acosh(max(delta, 1.0))
            ratio = 1.0 if rho == 0 else rho / math.sinh(rho)
            return norm * ratio * math.exp(-t - rho * rho / (4 * t))

        return PointPairFunction(k)

    s, B = complex(p.params["s"]), complex(p.params["B"])

    def k_res(delta: float) -> Number:
        rho = math.acosh(max(delta, 1.0))
        if rho == 0:
            value = (B - s) / (4 * math.pi)
        else:
            value = (cmath.exp(-s * rho) - cmath.exp(-B * rho)) / (4 * math.pi * math.sinh(rho))
        return value.real if value.imag == 0 else value

    return PointPairFunction(k_res)


# -- transforms ------------------------------------------------------------

def spectral_parameter(lam: Number) -> complex:
    """Principal ``s`` with ``s^2 = 1 - lambda``."""
    return cmath.sqrt(1 - complex(lam))


def shc_transform(k: PointPairFunction, lam: Number) -> Number:
    """``h(lambda) = (pi/s) int_0^U k(cosh u) 4 sinh(s u) sinh(u) du``.

    ``lambda = 1`` (``s = 0``) uses the analytic limit
    ``4 pi int_0^U k(cosh u) u sinh(u) du``.
    """
    s = spectral_parameter(lam)
    upper = k.radius
    if s == 0:
        return 4 * math.pi * integrate(lambda u: k(math.cosh(u)) * u * math.sinh(u), 0.0, upper)

    def integrand(u: float) -> complex:
        kv = k(math.cosh(u))
        if kv == 0:
            return 0j
        return kv * 4 * math.pi * (cmath.sinh(s * u) / s) * math.sinh(u)

    return integrate_complex(integrand, 0.0, upper)


def geodesic_from_kernel(k: PointPairFunction, x: float) -> Number:
    """``g(x) = 2 pi int_{cosh x}^inf k(delta) d delta``, integrated in ``u = acosh(delta)``."""
    x = abs(x)
    upper = k.radius
    if x >= upper:
        return 0.0
    return 2 * math.pi * integrate_complex(lambda u: k(math.cosh(u)) * math.sinh(u), x, upper)


def _line_truncation(h: SpectralTestFunction) -> float:
    p = h.decay_exponent
    if not p > 0:
        raise AdmissibilityError(f"inadmissible h: decay exponent {p} <= 0")
    if not p > 0.5:
        raise AdmissibilityError(f"line integral of h(1+t^2) needs decay exponent > 1/2, got {p}")
    if h.truncation is not None:
        return float(h.truncation)
    if math.isinf(p):
        return settings.quadrature.distance_cap
    tail = settings.quadrature.line_tail
    return (h.decay_constant / (math.pi * (2 * p - 1) * tail)) ** (1.0 / (2 * p - 1))


def fourier_g(h: SpectralTestFunction, x: float) -> Number:
    """``g(x) = (1/pi) int_0^T0 h(1 + t^2) cos(t x) dt`` for even ``h(1+t^2)``.

    ``T0`` is chosen from the declared decay so the discarded tail is below
    ``settings.quadrature.line_tail``.
    """
    T0 = _line_truncation(h)
    kwargs = {"weight": "cos", "wvar": abs(x)} if x != 0 else {}
    value = integrate_complex(h.on_line, 0.0, T0, **kwargs)
    return value / math.pi


def fourier_h(g: GeodesicTestFunction, t: float, cutoff: Optional[float] = None) -> Number:
    """Inverse of :func:`fourier_g`: ``h(1 + t^2) = 2 int_0^X g(x) cos(t x) dx``."""
    X = settings.quadrature.distance_cap if cutoff is None else cutoff
    kwargs = {"weight": "cos", "wvar": abs(t)} if t != 0 else {}
    return 2 * integrate_complex(g, 0.0, X, **kwargs)


def numerical_pair(k: PointPairFunction) -> tuple[SpectralTestFunction, GeodesicTestFunction]:
    """``(h, g)`` from ``k`` by quadrature; ``g`` is integrated directly, not via ``h``."""
    spectral = SpectralTestFunction(h=lambda lam: shc_transform(k, lam))
    geodesic = GeodesicTestFunction(lambda x: geodesic_from_kernel(k, x))
    return spectral, geodesic


# -- admissibility ---------------------------------------------------------

@dataclass(frozen=True)
class AdmissibilityReport:
    passed: bool
    slope: float
    worst_t: float
    worst_value: float
    real_on_line: bool
    strip_halfwidth: float


def check_admissible(h: SpectralTestFunction) -> AdmissibilityReport:
    """Sample the growth bound ``|h(1+t^2)| (1+t^2)^(-3/2+eps)`` on the real axis.

    The log-log slope over the upper half of a geometric grid on
    ``[1, t_max]`` must not exceed ``growth_slope``. Evenness in ``t`` holds
    by construction since ``h`` is sampled at ``1 + t^2``; ``real_on_line``
    records whether ``g`` comes out real. Report only.
    """
    cfg = settings.admissibility
    ts = np.geomspace(1.0, cfg.t_max, cfg.samples)
    values = np.array([h.on_line(t) for t in ts], dtype=complex)
    line = np.abs(values)
    bound = line * (1.0 + ts ** 2) ** (-1.5 + cfg.epsilon)
    worst = int(np.nanargmax(np.where(np.isfinite(bound), bound, np.inf)))
    real = bool(np.all(np.abs(values.imag) <= settings.tolerances.approx * np.maximum(1.0, line)))

    if not np.all(np.isfinite(bound)):
        return AdmissibilityReport(False, math.inf, float(ts[worst]), math.inf, real, h.strip_halfwidth)

    upper = slice(cfg.samples // 2, None)
    if not np.any(bound[upper] > 0):
        slope = -math.inf
    else:
        logs = np.log(np.clip(bound[upper], np.finfo(float).tiny, None))
        slope = float(np.polyfit(np.log(ts[upper]), logs, 1)[0])
    passed = slope <= cfg.growth_slope
    if not passed:
        log.warning("h fails the growth check: slope %.3f at t up to %g", slope, cfg.t_max)
    return AdmissibilityReport(passed, slope, float(ts[worst]), float(bound[worst]), real, h.strip_halfwidth)
