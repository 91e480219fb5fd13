"""Gamma-conjugacy classes of the Hecke layer and their centralizers."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

from .config import settings
from .errors import ClassificationError, DatasetInvalidError, NumericalFailure, RadiusInsufficientError
from .correspondence import UnionFind
from .groupdata import GroupSlice
from .isometry import ELLIPTIC, IDENTITY, LOXODROMIC, PARABOLIC, Isometry, IsometryClassification, classify

log = logging.getLogger(__name__)

CYCLIC = "cyclic"
ORDER2_EXTENSION = "order2_extension"


@dataclass(frozen=True)
class CentralizerData:
    """Centralizer of a class representative, as witnessed by the slice.

    Attributes
    ----------
    T0 : Isometry
        Loxodromic element of least norm commuting with the representative.
    N_T0 : float
        Its norm, always > 1.
    elliptic_order : int
        Order of the finite part of the centralizer: the rotations about the
        axis of ``T0``, doubled in the ``order2_extension`` case.
    structure_case : str
        ``cyclic`` or ``order2_extension`` (an element of the centralizer
        inverts ``T0``).
    members : int
        Number of slice elements found in the centralizer.
    """

    T0: Isometry
    N_T0: float
    elliptic_order: int
    structure_case: str
    members: int


@dataclass(frozen=True)
class ClassRecord:
    representative: Isometry
    kind: str
    members_found: int
    invariants: IsometryClassification
    centralizer: Optional[CentralizerData]
    resolved: bool = True
    ratio: Optional[float] = None

    @property
    def norm(self) -> Optional[float]:
        return self.invariants.norm

    @property
    def a_of_T(self) -> Optional[complex]:
        return self.invariants.a_of_T

    @property
    def trace(self) -> Optional[float]:
        return self.invariants.trace

    @property
    def trace_sq_minus_4(self) -> float:
        return self.invariants.trace_sq_minus_4

    def require_centralizer(self) -> CentralizerData:
        if self.centralizer is None:
            raise RadiusInsufficientError(f"radius insufficient for T0 of {self.representative!r}")
        return self.centralizer


def _elliptic_order(E: Isometry) -> int:
    cap = settings.elliptic_order_cap
    power = E
    for n in range(1, cap + 1):
        if power.is_identity():
            return n
        power = power @ E
    raise NumericalFailure(f"elliptic order exceeds cap {cap}")


def _inverts(sigma: Isometry, T0: Isometry) -> bool:
    return (sigma @ T0 @ sigma.inverse()).isclose(T0.inverse())


def _verify_structure(collected: list[tuple[Isometry, IsometryClassification]], T0: Isometry, N0: float,
                      axis_elliptic: list[Isometry], flips: bool) -> None:
    for c, info in collected:
        if info.kind == IDENTITY or (info.kind == ELLIPTIC and any(c.isclose(e) for e in axis_elliptic)):
            continue
        if flips and _inverts(c, T0):
            continue
        n = round(math.log(info.norm) / math.log(N0)) if info.kind == LOXODROMIC else 0
        ok = False
        for k in {n, -n}:
            E = (T0 ** -k) @ c
            if E.is_identity() or (classify(E).kind == ELLIPTIC and E.commutes_with(T0)):
                ok = True
                break
        if not ok:
            raise DatasetInvalidError(f"centralizer element {c!r} is not a power of T0 times an elliptic")


def centralizer_data(s: GroupSlice, T: Isometry) -> CentralizerData:
    """Least-norm loxodromic ``T0``, elliptic order and structure of the centralizer of ``T``.

    Only slice elements are seen; when none of them is loxodromic this raises
    "radius insufficient for T0" rather than guessing.
    """
    info = classify(T)
    if info.kind not in (ELLIPTIC, LOXODROMIC):
        raise ClassificationError(f"centralizer needs an elliptic or loxodromic element, got {info.kind}")

    collected = [(g, classify(g)) for g in s.gamma if g.commutes_with(T)]
    loxodromic = [(g, c) for g, c in collected if c.kind == LOXODROMIC]
    if not loxodromic:
        raise RadiusInsufficientError(f"radius insufficient for T0: no loxodromic centralizer element within {s.radius}")
    T0, T0_info = min(loxodromic, key=lambda gc: (gc[1].norm, gc[0].sort_key))
    N0 = T0_info.norm
    if N0 <= 1 + settings.tolerances.norm_gap:
        raise DatasetInvalidError(f"norm gap violated: N(T0) = {N0}")

    axis_elliptic = [g for g, c in collected if c.kind == ELLIPTIC and g.commutes_with(T0)]
    if axis_elliptic:
        gen = min(axis_elliptic, key=lambda g: (classify(g).half_angle, g.sort_key))
        m = _elliptic_order(gen)
    else:
        m = 1
    flips = any(_inverts(g, T0) for g, _ in collected)
    _verify_structure(collected, T0, N0, axis_elliptic, flips)
    if flips:
        m *= 2
    return CentralizerData(T0, N0, m, ORDER2_EXTENSION if flips else CYCLIC, len(collected))


def is_primitive(s: GroupSlice, T0: Isometry) -> bool:
    """True unless some loxodromic slice element has a power equal to ``T0``."""
    info = classify(T0)
    if info.kind != LOXODROMIC:
        raise ClassificationError(f"primitivity needs a loxodromic element, got {info.kind}")
    candidates = [(g, classify(g)) for g in s.gamma]
    candidates = [(g, c) for g, c in candidates if c.kind == LOXODROMIC]
    if not candidates:
        return True
    least = min(c.norm for _, c in candidates)
    if info.norm <= least * (1 + 1e-12):
        return True
    max_power = int(math.log(info.norm) / math.log(least) + 1e-9)
    for g, c in candidates:
        for k in range(2, max_power + 1):
            if abs(c.norm ** k - info.norm) <= 1e-9 * info.norm and (g ** k).isclose(T0):
                log.debug("%r is the %d-th power of %r", T0, k, g)
                return False
    return True


def _conjugate_indices(s: GroupSlice, T: Isometry) -> list[int]:
    found = []
    for sigma in s.gamma:
        j = s.layer_index.find(sigma.inverse() @ T @ sigma)
        if j is not None:
            found.append(j)
    return found


def _tau_key(M: Isometry):
    if M.is_exact:
        return M.tau
    return complex(round(M.tau.real, 9), round(M.tau.imag, 9))


def reduce_classes(s: GroupSlice, with_centralizers: bool = True) -> list[ClassRecord]:
    """Partition the layer into Gamma-conjugacy classes certified by explicit conjugators.

    Classes with equal ``tr^2/det`` that no listed conjugator joins are kept
    apart and marked unresolved. A missing centralizer witness is recorded
    as ``centralizer=None`` and raised when a term needs it.
    """
    layer = s.double_coset
    infos = [classify(T) for T in layer]
    for T, info in zip(layer, infos):
        if info.kind == PARABOLIC:
            raise DatasetInvalidError(f"parabolic in double coset — dataset invalid: {T!r}")

    with ThreadPoolExecutor(max_workers=settings.threads()) as pool:
        conjugates = list(pool.map(lambda T: _conjugate_indices(s, T), layer))

    uf = UnionFind(len(layer))
    for i, js in enumerate(conjugates):
        for j in js:
            if infos[i].norm is not None and abs(infos[i].norm - infos[j].norm) > 1e-10 * infos[i].norm:
                raise NumericalFailure(f"conjugate elements with different norms: {layer[i]!r}, {layer[j]!r}")
            uf.union(i, j)

    groups: dict[int, list[int]] = {}
    for i in range(len(layer)):
        groups.setdefault(uf.find(i), []).append(i)

    tau_count: dict = {}
    for members in groups.values():
        key = _tau_key(layer[members[0]])
        tau_count[key] = tau_count.get(key, 0) + 1

    records = []
    for members in groups.values():
        rep_i = min(members, key=lambda i: layer[i].sort_key)
        rep, info = layer[rep_i], infos[rep_i]
        if info.kind == IDENTITY:
            log.warning("identity in the layer (alpha in Gamma); its class is left out")
            continue
        cent = None
        if with_centralizers:
            try:
                cent = centralizer_data(s, rep)
            except RadiusInsufficientError as e:
                log.warning("%s", e)
        ratio = None
        if cent is not None and info.kind == LOXODROMIC:
            ratio = math.log(info.norm) / math.log(cent.N_T0)
        resolved = tau_count[_tau_key(rep)] == 1
        records.append(ClassRecord(rep, info.kind, len(members), info, cent, resolved, ratio))

    records.sort(key=lambda r: r.representative.sort_key)
    unresolved = sum(1 for r in records if not r.resolved)
    log.info("%d classes in the layer (%d unresolved at radius %g)", len(records), unresolved, s.radius)
    return records
