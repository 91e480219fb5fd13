"""Finite, radius-bounded slices of a Kleinian group and one of its Hecke layers.

A :class:`GroupSlice` stands in for the infinite group: membership in
``Gamma`` means "listed", and every answer built on a slice is only as good
as its radius. Slices come from JSON files (:func:`load_slice`) or from the
arithmetic factory (:func:`enumerate_order`), which enumerates elements of a
quaternion order embedded in 2x2 matrices over Q(sqrt(-m)).
"""
from __future__ import annotations

import cmath
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

import numpy as np

from .config import settings
from .errors import DataValidationError, FieldMismatchError, SliceFormatError
from .isometry import PARABOLIC, J, Isometry, PointH3, apply, classify, delta
from .scalars import QuadExact, dump_scalar, parse_scalar, to_complex

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
_DATA_DIR = Path(__file__).parent / "data"

_SLICE_KEYS = {"format_version", "field_m", "radius", "provenance", "alpha", "gamma",
               "double_coset", "basepoint", "plumbing", "counts"}
_ORDER_KEYS = {"format_version", "field_m", "basis", "hilbert", "norm_one_bound", "hecke_norm", "alpha", "provenance"}


def bundled_path(name: str) -> Path:
    """Path of a data file shipped with the package."""
    path = _DATA_DIR / name
    if not path.exists():
        raise FileNotFoundError(f"No bundled data file '{name}' in {_DATA_DIR}")
    return path


class ElementIndex:
    """Membership lookup for a list of isometries.

    Exact lists are hashed on the projective key; approximate ones are
    scanned with numpy under ``settings.tolerances.approx``, up to sign.
    """

    def __init__(self, elements: Sequence[Isometry]):
        self._exact = bool(elements) and all(e.is_exact for e in elements)
        if self._exact:
            self._keys = {e.key: i for i, e in enumerate(elements)}
        else:
            self._arr = np.array([e.to_numpy().ravel() for e in elements], dtype=complex).reshape(-1, 4)

    def find(self, M: Isometry) -> Optional[int]:
        if self._exact and M.is_exact:
            return self._keys.get(M.key)
        if self._exact:
            return None
        if len(self._arr) == 0:
            return None
        v = M.to_numpy().ravel()
        gap = np.minimum(np.abs(self._arr - v).max(axis=1), np.abs(self._arr + v).max(axis=1))
        i = int(np.argmin(gap))
        return i if gap[i] <= settings.tolerances.approx else None

    def __contains__(self, M: Isometry) -> bool:
        return self.find(M) is not None


@dataclass
class GroupSlice:
    field_m: Optional[int]
    gamma: list[Isometry]
    double_coset: list[Isometry]
    alpha: Isometry
    radius: float
    provenance: str = ""
    basepoint: PointH3 = J
    plumbing: bool = False
    source_order: list[Isometry] = field(default_factory=list)

    @property
    def is_exact(self) -> bool:
        return self.field_m is not None

    @property
    def cosh_radius(self) -> float:
        return math.cosh(self.radius)

    @cached_property
    def gamma_index(self) -> ElementIndex:
        return ElementIndex(self.gamma)

    @cached_property
    def layer_index(self) -> ElementIndex:
        return ElementIndex(self.double_coset)

    @property
    def identity(self) -> Isometry:
        return Isometry.identity(self.field_m)

    def within_radius(self, M: Isometry, radius: Optional[float] = None) -> bool:
        bound = self.cosh_radius if radius is None else math.cosh(radius)
        return M.displacement <= bound * (1 + 1e-12)

    def in_gamma(self, M: Isometry) -> Optional[bool]:
        """True if listed, False if provably absent, None beyond the radius."""
        if M in self.gamma_index:
            return True
        return False if self.within_radius(M) else None

    def in_layer(self, M: Isometry) -> Optional[bool]:
        if M in self.layer_index:
            return True
        return False if self.within_radius(M) else None

    def word_element(self, file_index: int) -> Isometry:
        """Gamma element by its position in the source file (rep words use these)."""
        order = self.source_order or self.gamma
        try:
            return order[file_index]
        except IndexError:
            raise SliceFormatError(f"word index {file_index} outside the gamma list") from None


# -- slice files -----------------------------------------------------------

def _parse_matrix(raw: Any, m: Optional[int], where: str) -> tuple[Isometry, Optional[Any]]:
    if not isinstance(raw, dict):
        raise SliceFormatError(f"{where}: matrix must be an object with a, b, c, d")
    unknown = set(raw) - {"a", "b", "c", "d", "scale"}
    if unknown:
        raise SliceFormatError(f"unknown field {sorted(unknown)} in {where}")
    missing = {"a", "b", "c", "d"} - set(raw)
    if missing:
        raise SliceFormatError(f"{where}: missing entries {sorted(missing)}")
    entries = [parse_scalar(raw[k], m) for k in ("a", "b", "c", "d")]
    if m is not None and not all(isinstance(x, QuadExact) for x in entries):
        raise FieldMismatchError(f"field mismatch: approximate entry in exact slice at {where}")
    a, b, c, d = entries
    det = a * d - b * c
    if m is None:
        # approximate entries are rescaled on construction; check the raw determinant first
        scale = complex(parse_scalar(raw["scale"], None)) if "scale" in raw else 1.0
        if abs(det - scale) > settings.tolerances.approx * max(1.0, abs(scale)):
            raise SliceFormatError(f"not unimodular: {where} has det {det}")
        return Isometry(a, b, c, d), scale
    scale = parse_scalar(raw["scale"], m) if "scale" in raw else QuadExact.rational(1, m)
    if det != scale:
        raise SliceFormatError(f"not unimodular: {where} has det {det}, expected {scale}")
    return Isometry(a, b, c, d), scale


def _dedupe_check(elements: list[Isometry], where: str) -> None:
    index: dict = {}
    for i, e in enumerate(elements):
        if e.is_exact:
            if e.key in index:
                raise SliceFormatError(f"duplicate: {where}[{i}] equals {where}[{index[e.key]}]")
            index[e.key] = i
    if elements and not elements[0].is_exact:
        for i in range(len(elements)):
            for j in range(i):
                if elements[i].isclose(elements[j]):
                    raise SliceFormatError(f"duplicate: {where}[{i}] equals {where}[{j}]")


def validate_slice(s: GroupSlice) -> None:
    """Check the structural invariants of a slice, raising on the first violation."""
    _dedupe_check(s.gamma, "gamma")
    _dedupe_check(s.double_coset, "double_coset")
    if not any(g.is_identity() for g in s.gamma):
        raise SliceFormatError("closure violation: identity missing from gamma")
    for where, elements in (("gamma", s.gamma), ("double_coset", s.double_coset)):
        for i, g in enumerate(elements):
            if not s.within_radius(g):
                raise SliceFormatError(
                    f"outside radius: {where}[{i}] displaces j by {math.acosh(g.displacement):.6g} > {s.radius}"
                )
    for i, g in enumerate(s.gamma):
        if g.inverse() not in s.gamma_index:
            raise SliceFormatError(f"closure violation: inverse of gamma[{i}] not listed")
    if not s.plumbing and s.alpha in s.gamma_index:
        raise SliceFormatError("alpha in Gamma")


def load_slice(path: Union[str, Path]) -> GroupSlice:
    """Read and validate a slice file (format version 1)."""
    path = Path(path)
    log.info("Loading slice %s", path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SliceFormatError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise SliceFormatError(f"{path}: top level must be an object")
    unknown = set(raw) - _SLICE_KEYS
    if unknown:
        raise SliceFormatError(f"unknown field {sorted(unknown)} in {path.name}")
    if raw.get("format_version") != FORMAT_VERSION:
        raise SliceFormatError(f"unsupported format_version {raw.get('format_version')!r}")
    for key in ("field_m", "radius", "alpha", "gamma", "double_coset"):
        if key not in raw:
            raise SliceFormatError(f"{path.name}: missing '{key}'")

    field_m = raw["field_m"]
    if field_m == "approx":
        m = None
    elif isinstance(field_m, int) and not isinstance(field_m, bool):
        m = field_m
    else:
        raise SliceFormatError(f"bad field_m {field_m!r}")

    alpha, _ = _parse_matrix(raw["alpha"], m, "alpha")
    gamma = []
    for i, x in enumerate(raw["gamma"]):
        g, scale = _parse_matrix(x, m, f"gamma[{i}]")
        if scale != 1:
            raise SliceFormatError(f"not unimodular: gamma[{i}] has det {scale}")
        gamma.append(g)
    layer = [_parse_matrix(x, m, f"double_coset[{i}]")[0] for i, x in enumerate(raw["double_coset"])]

    base = raw.get("basepoint")
    basepoint = J if base is None else PointH3(complex(base[0], base[1]), float(base[2]))

    s = GroupSlice(
        field_m=m,
        gamma=sorted(gamma, key=lambda g: g.sort_key),
        double_coset=sorted(layer, key=lambda g: g.sort_key),
        alpha=alpha,
        radius=float(raw["radius"]),
        provenance=str(raw.get("provenance", "")),
        basepoint=basepoint,
        plumbing=bool(raw.get("plumbing", False)),
        source_order=gamma,
    )
    validate_slice(s)

    counts = raw.get("counts")
    if counts is not None:
        if counts.get("gamma") != len(s.gamma) or counts.get("double_coset") != len(s.double_coset):
            raise SliceFormatError(f"{path.name}: header counts {counts} do not match the listed elements")
    log.info("Slice %s: %d gamma elements, %d layer elements, radius %g",
             path, len(s.gamma), len(s.double_coset), s.radius)
    return s


def _dump_matrix(M: Isometry, with_scale: bool) -> dict[str, Any]:
    out = {k: dump_scalar(x) for k, x in zip("abcd", M.entries)}
    if with_scale and M.is_exact and M.det != 1:
        out["scale"] = dump_scalar(M.det)
    return out


def slice_to_json(s: GroupSlice) -> dict[str, Any]:
    out: dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "field_m": s.field_m if s.is_exact else "approx",
        "radius": s.radius,
        "provenance": s.provenance,
        "plumbing": s.plumbing,
        "counts": {"gamma": len(s.gamma), "double_coset": len(s.double_coset)},
        "basepoint": [s.basepoint.z.real, s.basepoint.z.imag, s.basepoint.r],
        "alpha": _dump_matrix(s.alpha, True),
        "gamma": [_dump_matrix(g, False) for g in s.gamma],
        "double_coset": [_dump_matrix(g, True) for g in s.double_coset],
    }
    return out


def dump_slice(s: GroupSlice, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        path.write_text(json.dumps(slice_to_json(s), indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise IOError(f"Failed to write slice to '{path}': {e}") from e
    log.info("Wrote slice %s", path)


# -- cocompactness audit ---------------------------------------------------

@dataclass(frozen=True)
class CocompactReport:
    parabolics: list[tuple[str, int]]
    unstable: list[tuple[str, int]]
    kinds: dict[str, int]
    min_displacement: float
    radius: float

    @property
    def consistent(self) -> bool:
        return not self.parabolics


def validate_cocompact_consistency(s: GroupSlice) -> CocompactReport:
    """Classify every listed element; parabolics falsify the dataset.

    ``min_displacement`` is the least hyperbolic distance a non-identity
    gamma element moves the slice basepoint.
    """
    parabolics, unstable = [], []
    kinds: dict[str, int] = {}
    for where, elements in (("gamma", s.gamma), ("double_coset", s.double_coset)):
        for i, g in enumerate(elements):
            try:
                kind = classify(g).kind
            except DataValidationError:
                unstable.append((where, i))
                continue
            kinds[kind] = kinds.get(kind, 0) + 1
            if kind == PARABOLIC:
                parabolics.append((where, i))
    moves = [delta(apply(g, s.basepoint), s.basepoint) for g in s.gamma if not g.is_identity()]
    margin = math.acosh(min(moves)) if moves else math.inf
    if parabolics:
        log.warning("slice contains %d parabolic elements", len(parabolics))
    return CocompactReport(parabolics, unstable, kinds, margin, s.radius)


# -- arithmetic factory ----------------------------------------------------

@dataclass(frozen=True)
class _RawMatrix:
    """A basis matrix; unlike :class:`Isometry` it may be singular."""

    a: QuadExact
    b: QuadExact
    c: QuadExact
    d: QuadExact

    @property
    def entries(self) -> tuple[QuadExact, ...]:
        return (self.a, self.b, self.c, self.d)

    def to_numpy(self) -> np.ndarray:
        return np.array([to_complex(x) for x in self.entries], dtype=complex)


@dataclass(frozen=True)
class OrderConfig:
    field_m: int
    basis: tuple[_RawMatrix, ...]
    norm_one_bound: float
    hecke_norm: Fraction
    alpha: Optional[Isometry] = None
    provenance: str = ""


@dataclass(frozen=True)
class HilbertOrderConfig:
    """The order ``O_K<1, i, j, ij>`` of the quaternion algebra ``(a, b)`` over ``K = Q(sqrt(-m))``.

    ``i^2 = a``, ``j^2 = b`` and ``ij = -ji`` with rational ``a``, ``b``. A
    division algebra over K has no matrix model over K itself, so elements are
    realised numerically by ``i -> diag(sqrt a, -sqrt a)`` and
    ``j -> [[0, b], [1, 0]]``; reduced norms stay exact on the coordinates.
    """

    field_m: int
    a: Fraction
    b: Fraction
    norm_one_bound: float
    hecke_norm: Fraction
    alpha: Optional[tuple[QuadExact, ...]] = None
    provenance: str = ""

    @property
    def integral_basis(self) -> tuple[QuadExact, QuadExact]:
        """``1, omega`` spanning the integers of K over Z."""
        m = self.field_m
        omega = QuadExact(Fraction(1, 2), Fraction(1, 2), m) if m % 4 == 3 else QuadExact(0, 1, m)
        return QuadExact.rational(1, m), omega

    def reduced_norm(self, x: Sequence[QuadExact]) -> QuadExact:
        x0, x1, x2, x3 = x
        return x0 * x0 - self.a * (x1 * x1) - self.b * (x2 * x2 - self.a * (x3 * x3))

    def to_matrix(self, x: Sequence[QuadExact]) -> np.ndarray:
        s = cmath.sqrt(float(self.a))
        x0, x1, x2, x3 = (to_complex(v) for v in x)
        return np.array([[x0 + s * x1, float(self.b) * (x2 + s * x3)],
                         [x2 - s * x3, x0 - s * x1]], dtype=complex)

    def to_isometry(self, x: Sequence[QuadExact]) -> Isometry:
        return Isometry.from_numpy(self.to_matrix(x))


def _load_hilbert_config(raw: dict[str, Any], m: int, path: Path) -> HilbertOrderConfig:
    if "basis" in raw:
        raise SliceFormatError("bad basis: give either 'basis' or 'hilbert', not both")
    symbol = raw["hilbert"]
    if not isinstance(symbol, list) or len(symbol) != 2:
        raise SliceFormatError(f"bad hilbert symbol {symbol!r}: expected [a, b]")
    try:
        a, b = (Fraction(str(x)) for x in symbol)
    except (ValueError, ZeroDivisionError) as e:
        raise SliceFormatError(f"bad hilbert symbol {symbol!r}: {e}") from e
    if a == 0 or b == 0:
        raise SliceFormatError(f"bad hilbert symbol {symbol!r}: entries must be nonzero")
    alpha = None
    if "alpha" in raw:
        coords = raw["alpha"]
        if not isinstance(coords, list) or len(coords) != 4:
            raise SliceFormatError("bad alpha: a hilbert order takes 4 coordinates over K")
        alpha = tuple(parse_scalar(x, m) for x in coords)
        if not all(isinstance(x, QuadExact) for x in alpha):
            raise FieldMismatchError(f"field mismatch: alpha has coordinates outside Q(sqrt(-{m}))")
    cfg = HilbertOrderConfig(
        field_m=m,
        a=a,
        b=b,
        norm_one_bound=float(raw.get("norm_one_bound", 2.0)),
        hecke_norm=Fraction(str(raw.get("hecke_norm", 1))),
        alpha=alpha,
        provenance=str(raw.get("provenance", path.name)),
    )
    if alpha is not None and cfg.reduced_norm(alpha) != cfg.hecke_norm:
        raise SliceFormatError(f"bad alpha: reduced norm {cfg.reduced_norm(alpha)} is not {cfg.hecke_norm}")
    return cfg


def load_order_config(path: Union[str, Path]) -> Union[OrderConfig, HilbertOrderConfig]:
    """Read an order config: a Z-basis of 4 matrices, or a Hilbert symbol over K."""
    path = Path(path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    unknown = set(raw) - _ORDER_KEYS
    if unknown:
        raise SliceFormatError(f"unknown field {sorted(unknown)} in {path.name}")
    if raw.get("format_version") != FORMAT_VERSION:
        raise SliceFormatError(f"unsupported format_version {raw.get('format_version')!r}")
    m = raw.get("field_m")
    if not isinstance(m, int) or isinstance(m, bool):
        raise SliceFormatError(f"bad field_m {m!r} in order config")
    if "hilbert" in raw:
        return _load_hilbert_config(raw, m, path)
    basis_raw = raw.get("basis")
    if not isinstance(basis_raw, list) or len(basis_raw) != 4:
        raise SliceFormatError("bad basis: an order config needs exactly 4 basis matrices")
    basis = []
    for i, b in enumerate(basis_raw):
        entries = [parse_scalar(b[k], m) for k in "abcd"]
        if not all(isinstance(x, QuadExact) for x in entries):
            raise FieldMismatchError(f"field mismatch: basis[{i}] has entries outside Q(sqrt(-{m}))")
        basis.append(_RawMatrix(*entries))
    alpha = _parse_matrix(raw["alpha"], m, "alpha")[0] if "alpha" in raw else None
    return OrderConfig(
        field_m=m,
        basis=tuple(basis),
        norm_one_bound=float(raw.get("norm_one_bound", 2.0)),
        hecke_norm=Fraction(str(raw.get("hecke_norm", 1))),
        alpha=alpha,
        provenance=str(raw.get("provenance", path.name)),
    )


def _combine(basis: Sequence[_RawMatrix], n: Sequence[int], m: int) -> tuple[QuadExact, ...]:
    out = [QuadExact.rational(0, m)] * 4
    for coeff, B in zip(n, basis):
        if coeff:
            out = [o + x * int(coeff) for o, x in zip(out, B.entries)]
    return tuple(out)


def _gram(basis: Sequence[_RawMatrix]) -> np.ndarray:
    flat = np.array([B.to_numpy() for B in basis])
    return (flat @ flat.conj().T).real


def _identity_coordinates(basis: Sequence[_RawMatrix], m: int) -> tuple[int, ...]:
    flat = np.array([B.to_numpy() for B in basis])
    target = np.array([1, 0, 0, 1], dtype=complex)
    A = np.concatenate([flat.T.real, flat.T.imag])
    y = np.concatenate([target.real, target.imag])
    sol, *_ = np.linalg.lstsq(A, y, rcond=None)
    n = tuple(int(round(v)) for v in sol)
    if np.abs(sol - np.round(sol)).max() > 1e-9 or _combine(basis, n, m) != tuple(
            QuadExact.rational(v, m) for v in (1, 0, 0, 1)):
        raise SliceFormatError("bad basis: identity is not an integral combination of the basis")
    return n


def _lattice_points(gram: np.ndarray, bound: float) -> np.ndarray:
    """Integer vectors ``n`` with ``n^T G n <= bound``."""
    inv = np.linalg.inv(gram)
    box = np.floor(np.sqrt(np.maximum(bound * np.diag(inv), 0.0)) + 1e-9).astype(int)
    axes = [np.arange(-b, b + 1) for b in box]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(box))
    q = np.einsum("ni,ij,nj->n", pts, gram, pts)
    return pts[q <= bound * (1 + 1e-9)]


def _elements_of_norm(cfg: OrderConfig, nu: Fraction, radius: float) -> list[Isometry]:
    basis, m = cfg.basis, cfg.field_m
    bound = 2 * abs(float(nu)) * math.cosh(radius)
    pts = _lattice_points(_gram(basis), bound)
    flat = np.array([B.to_numpy() for B in basis])
    x = pts @ flat
    det = x[:, 0] * x[:, 3] - x[:, 1] * x[:, 2]
    candidates = pts[np.abs(det - float(nu)) < 1e-6 * max(1.0, float(nu))]
    target = QuadExact.rational(nu, m)
    seen: dict = {}
    for n in candidates:
        entries = _combine(basis, n, m)
        a, b, c, d = entries
        if a * d - b * c != target:
            continue
        M = Isometry(*entries)
        if M.displacement <= math.cosh(radius) * (1 + 1e-12):
            seen.setdefault(M.key, M)
    return sorted(seen.values(), key=lambda g: g.sort_key)


def _hilbert_block(cfg: HilbertOrderConfig, top: complex, bottom: complex) -> np.ndarray:
    # images in C^2 of (1, omega) * x_k, where x_k enters one antidiagonal or diagonal pair
    vectors = [[complex(w) * top, complex(w) * bottom] for w in cfg.integral_basis]
    return np.array(vectors, dtype=complex)


def _hilbert_elements(cfg: HilbertOrderConfig, nu: Fraction, radius: float) -> list[Isometry]:
    """Elements of reduced norm ``nu`` within ``radius``, one per sign pair.

    ``||x||_F^2`` splits into a form in ``(x0, x1)`` plus one in ``(x2, x3)``,
    and so does the reduced norm, so each half is enumerated once and the
    halves are matched exactly on ``N(x0, x1) - nu = b N(x2, x3)``.
    """
    m = cfg.field_m
    s = cmath.sqrt(float(cfg.a))
    b = float(cfg.b)
    diag = np.concatenate([_hilbert_block(cfg, 1, 1), _hilbert_block(cfg, s, -s)])
    off = np.concatenate([_hilbert_block(cfg, b, 1), _hilbert_block(cfg, b * s, -s)])
    bound = 2 * abs(float(nu)) * math.cosh(radius)
    omega = cfg.integral_basis

    def coords(n: np.ndarray) -> tuple[QuadExact, QuadExact]:
        return (omega[0] * int(n[0]) + omega[1] * int(n[1]), omega[0] * int(n[2]) + omega[1] * int(n[3]))

    gram_off = (off @ off.conj().T).real
    by_norm: dict[QuadExact, list[tuple[np.ndarray, float]]] = {}
    for n in _lattice_points(gram_off, bound):
        x2, x3 = coords(n)
        by_norm.setdefault(cfg.b * (x2 * x2 - cfg.a * (x3 * x3)), []).append((n, float(n @ gram_off @ n)))

    gram_diag = (diag @ diag.conj().T).real
    cosh_r = math.cosh(radius)
    found = []
    for n1 in _lattice_points(gram_diag, bound):
        x0, x1 = coords(n1)
        q1 = float(n1 @ gram_diag @ n1)
        for n2, q2 in by_norm.get(x0 * x0 - cfg.a * (x1 * x1) - nu, ()):
            if q1 + q2 > bound * (1 + 1e-9):
                continue
            full = np.concatenate([n1, n2])
            lead = full[np.flatnonzero(full)[0]]
            if lead < 0:
                continue
            x = coords(n1) + coords(n2)
            M = cfg.to_isometry(x)
            if M.displacement <= cosh_r * (1 + 1e-12):
                found.append(M)
    return sorted(found, key=lambda g: g.sort_key)


def enumerate_order(cfg: Union[OrderConfig, HilbertOrderConfig], radius: Optional[float] = None) -> GroupSlice:
    """Norm-one units of the order and its reduced-norm ``hecke_norm`` layer.

    Elements ``x = sum n_i B_i`` with ``||x||_F^2 <= 2 |nu| cosh(R)`` lie in an
    ellipsoid of the Gram form of the basis, so the search box is finite.
    ``hecke_norm = 1`` is plumbing mode: alpha is the identity and the layer
    is Gamma itself. Orders given by a Hilbert symbol produce approximate
    slices.
    """
    R = cfg.norm_one_bound if radius is None else float(radius)
    if isinstance(cfg, HilbertOrderConfig):
        m = None
        elements_of_norm = lambda nu: _hilbert_elements(cfg, nu, R)
        given_alpha = cfg.to_isometry(cfg.alpha) if cfg.alpha is not None else None
    else:
        m = cfg.field_m
        _identity_coordinates(cfg.basis, m)
        elements_of_norm = lambda nu: _elements_of_norm(cfg, nu, R)
        given_alpha = cfg.alpha
    gamma = elements_of_norm(Fraction(1))
    if len(gamma) <= 1:
        log.warning("slice trivial: no norm-one units beyond the identity within radius %g", R)

    plumbing = cfg.hecke_norm == 1
    if plumbing:
        alpha = Isometry.identity(m)
        layer = list(gamma)
    else:
        forward = elements_of_norm(cfg.hecke_norm)
        if given_alpha is not None:
            alpha = given_alpha
        elif forward:
            alpha = forward[0]
        else:
            raise SliceFormatError(f"no element of reduced norm {cfg.hecke_norm} within radius {R}")
        # the layer holds Gamma alpha^-1 Gamma; adjugates of norm-nu elements are again norm nu
        layer = sorted((g.inverse() for g in forward), key=lambda g: g.sort_key)

    s = GroupSlice(
        field_m=m,
        gamma=gamma,
        double_coset=layer,
        alpha=alpha,
        radius=R,
        provenance=cfg.provenance or f"order enumeration, hecke_norm={cfg.hecke_norm}",
        plumbing=plumbing,
    )
    validate_slice(s)
    log.info("Enumerated %d units and %d layer elements at radius %g", len(gamma), len(layer), R)
    return s


# -- anisotropy ------------------------------------------------------------

@dataclass(frozen=True)
class AnisotropyReport:
    """Sampled local behaviour of the reduced norm.

    ``over_field`` is set for orders over ``Q(sqrt(-m))`` given by a Hilbert
    symbol; only primes split in that field are sampled for those, since the
    completion there is ``Q_p`` itself.
    """

    isotropic_mod_p2: dict[int, bool]
    over_field: Optional[int] = None

    @property
    def anisotropic_at(self) -> list[int]:
        return [p for p, iso in self.isotropic_mod_p2.items() if not iso]

    @property
    def passed(self) -> bool:
        return bool(self.anisotropic_at)

    @property
    def kleinian(self) -> bool:
        """A division algebra over an imaginary quadratic field: Gamma is a cocompact Kleinian group."""
        return self.passed and self.over_field is not None


def _splits(p: int, m: int) -> bool:
    return p % 2 == 1 and m % p != 0 and pow(-m % p, (p - 1) // 2, p) == 1


def norm_form(cfg: Union[OrderConfig, HilbertOrderConfig]) -> tuple[np.ndarray, int]:
    """Integral symmetric matrix ``A`` and denominator ``D`` with ``det(x(n)) = n^T A n / (2 D)``.

    For a Hilbert symbol ``(a, b)`` this is the rational norm form
    ``x0^2 - a x1^2 - b x2^2 + ab x3^2``.
    """
    if isinstance(cfg, HilbertOrderConfig):
        coeffs = [[Fraction(0)] * 4 for _ in range(4)]
        for i, c in enumerate((1, -cfg.a, -cfg.b, cfg.a * cfg.b)):
            coeffs[i][i] = 2 * Fraction(c)
        D = math.lcm(*(c.denominator for row in coeffs for c in row))
        return np.array([[int(c * D) for c in row] for row in coeffs], dtype=np.int64), D
    m = cfg.field_m
    q = lambda n: (lambda e: e[0] * e[3] - e[1] * e[2])(_combine(cfg.basis, n, m))
    coeffs = [[Fraction(0)] * 4 for _ in range(4)]
    for i in range(4):
        ei = [int(k == i) for k in range(4)]
        qi = q(ei)
        if not qi.is_real():
            raise SliceFormatError("bad basis: reduced norm is not rational")
        coeffs[i][i] = 2 * qi.a
        for j in range(i):
            eij = [int(k in (i, j)) for k in range(4)]
            cross = q(eij) - qi - q([int(k == j) for k in range(4)])
            if not cross.is_real():
                raise SliceFormatError("bad basis: reduced norm is not rational")
            coeffs[i][j] = coeffs[j][i] = cross.a
    D = math.lcm(*(c.denominator for row in coeffs for c in row))
    A = np.array([[int(c * D) for c in row] for row in coeffs], dtype=np.int64)
    return A, D


def _isotropic_mod_p2(A: np.ndarray, p: int) -> bool:
    rng = np.arange(p, dtype=np.int64)
    rest = np.stack(np.meshgrid(rng, rng, rng, indexing="ij"), axis=-1).reshape(-1, 3)
    for first in range(p):
        n = np.concatenate([np.full((len(rest), 1), first, dtype=np.int64), rest], axis=1)
        if first == 0:
            n = n[np.any(n != 0, axis=1)]
        quad2 = np.einsum("ni,ij,nj->n", n, A, n)  # 2 D q(n)
        zeros = n[quad2 % p == 0]
        if len(zeros) == 0:
            continue
        grad = (zeros @ A) % p
        if np.any(np.any(grad != 0, axis=1)):
            return True
        if np.any(np.einsum("ni,ij,nj->n", zeros, A, zeros) % (p * p) == 0):
            return True
    return False


def check_anisotropy(cfg: Union[OrderConfig, HilbertOrderConfig],
                     primes: Optional[Iterable[int]] = None) -> AnisotropyReport:
    """Look for primitive zeros of the reduced norm modulo ``p^2`` for odd ``p <= 50``.

    A prime with none certifies that the norm form is anisotropic over Q_p,
    so the algebra is a division algebra and Gamma has no parabolics. For a
    Hilbert symbol over ``Q(sqrt(-m))`` only primes split in that field count.
    """
    A, _ = norm_form(cfg)
    over_field = cfg.field_m if isinstance(cfg, HilbertOrderConfig) else None
    if primes is None:
        primes = [p for p in range(3, 51) if all(p % d for d in range(2, int(p ** 0.5) + 1))]
    if over_field is not None:
        primes = [p for p in primes if _splits(p, over_field)]
    out = {}
    for p in primes:
        A_p = A.copy()
        # drop the p-content so the reduction mod p is not identically zero
        while np.all(A_p % p == 0):
            A_p //= p
        out[p] = _isotropic_mod_p2(A_p, p)
    report = AnisotropyReport(out, over_field)
    log.info("anisotropic at %s", report.anisotropic_at or "no sampled prime")
    return report
