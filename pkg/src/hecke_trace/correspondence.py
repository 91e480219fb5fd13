"""Hecke correspondence on a slice: cosets, degree, the operator and its adjoint.

Right cosets of ``Gamma ∩ alpha^-1 Gamma alpha`` in ``Gamma`` are found by
union-find over slice elements with the relation
``g ~ g'  iff  alpha g g'^-1 alpha^-1`` is listed in the slice. A test element
beyond the slice radius is undecided, never guessed.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .errors import DataValidationError, NumericalFailure, RadiusInsufficientError, SliceFormatError
from .groupdata import ElementIndex, GroupSlice
from .isometry import J, Isometry, PointH3, apply, delta, distance
from .scalars import parse_scalar, to_complex
from .transforms import PointPairFunction

log = logging.getLogger(__name__)


# -- representations -------------------------------------------------------

@dataclass
class UnitaryRep:
    """A finite-dimensional unitary representation of Gamma with a value at alpha.

    ``values`` pairs slice elements with their images; elements without an
    entry are only allowed when the representation is trivial.
    """

    dim: int = 1
    generators: dict[str, np.ndarray] = field(default_factory=dict)
    alpha_image: Optional[np.ndarray] = None
    values: list[tuple[Isometry, np.ndarray]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.alpha_image is None:
            self.alpha_image = np.eye(self.dim, dtype=complex)
        self.alpha_image = np.asarray(self.alpha_image, dtype=complex)
        if self.alpha_image.shape != (self.dim, self.dim):
            raise DataValidationError(f"alpha image has shape {self.alpha_image.shape}, expected dim {self.dim}")
        for name, U in self.generators.items():
            U = np.asarray(U, dtype=complex)
            if np.abs(U.conj().T @ U - np.eye(self.dim)).max() > 1e-10:
                raise DataValidationError(f"generator image '{name}' is not unitary")
        if not np.isfinite(np.linalg.cond(self.alpha_image)) or np.linalg.cond(self.alpha_image) > 1e12:
            raise DataValidationError("alpha image is not invertible")
        self._index = ElementIndex([g for g, _ in self.values])

    @classmethod
    def trivial(cls) -> UnitaryRep:
        return cls()

    @property
    def is_trivial(self) -> bool:
        one = np.eye(self.dim)
        return (
            self.dim == 1
            and np.allclose(self.alpha_image, one)
            and all(np.allclose(v, one) for _, v in self.values)
        )

    def chi(self, g: Isometry) -> np.ndarray:
        if g.is_identity():
            return np.eye(self.dim, dtype=complex)
        i = self._index.find(g) if self.values else None
        if i is not None:
            return self.values[i][1]
        if self.is_trivial:
            return np.eye(self.dim, dtype=complex)
        raise DataValidationError(f"no word for element {g!r} in the representation")


def _token_image(token: str, generators: dict[str, np.ndarray]) -> np.ndarray:
    name, inverse = (token[:-3], True) if token.endswith("^-1") else (token, False)
    if name not in generators:
        raise SliceFormatError(f"unknown generator '{name}' in word")
    U = generators[name]
    return U.conj().T if inverse else U


def _parse_rep_matrix(raw, dim: int) -> np.ndarray:
    arr = np.array([[to_complex(parse_scalar(x, None)) for x in row] for row in raw], dtype=complex)
    if arr.shape != (dim, dim):
        raise SliceFormatError(f"rep matrix has shape {arr.shape}, expected ({dim}, {dim})")
    return arr


def load_rep(path: Union[str, Path], s: GroupSlice) -> UnitaryRep:
    """Read a representation file; words refer to gamma elements by file position."""
    path = Path(path)
    log.info("Loading representation %s", path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    unknown = set(raw) - {"dim", "generators", "alpha", "words"}
    if unknown:
        raise SliceFormatError(f"unknown field {sorted(unknown)} in {path.name}")
    dim = int(raw.get("dim", 1))
    gens = {name: _parse_rep_matrix(m, dim) for name, m in raw.get("generators", {}).items()}
    alpha = _parse_rep_matrix(raw["alpha"], dim) if "alpha" in raw else None
    values = []
    for idx, word in raw.get("words", {}).items():
        image = np.eye(dim, dtype=complex)
        for token in word:
            image = image @ _token_image(token, gens)
        values.append((s.word_element(int(idx)), image))
    return UnitaryRep(dim=dim, generators=gens, alpha_image=alpha, values=values)


# -- cosets ----------------------------------------------------------------

class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x: int, y: int) -> None:
        x, y = self.find(x), self.find(y)
        if x != y:
            self.parent[max(x, y)] = min(x, y)


@dataclass(frozen=True)
class _CosetPartition:
    reps: list[Isometry]
    sizes: list[int]
    core_radius: float


def default_core_radius(s: GroupSlice, a: Isometry) -> float:
    return (s.radius - 2 * math.acosh(a.displacement)) / 2


def _same_coset(s: GroupSlice, a: Isometry, a_inv: Isometry, g: Isometry, h: Isometry) -> Optional[bool]:
    return s.in_gamma(a @ g @ h.inverse() @ a_inv)


def _coset_partition(s: GroupSlice, a: Isometry, core_radius: Optional[float]) -> _CosetPartition:
    rho = default_core_radius(s, a) if core_radius is None else float(core_radius)
    if rho < 0:
        raise RadiusInsufficientError(
            f"radius insufficient: slice radius {s.radius} cannot certify cosets for alpha displacing j by "
            f"{math.acosh(a.displacement):.6g}"
        )
    a_inv = a.inverse()
    core = [g for g in s.gamma if s.within_radius(g, rho)]
    uf = UnionFind(len(core))
    distinct: set[tuple[int, int]] = set()
    undecided: list[tuple[int, int]] = []
    for i in range(len(core)):
        for j in range(i):
            same = _same_coset(s, a, a_inv, core[i], core[j])
            if same:
                uf.union(i, j)
            elif same is False:
                distinct.add((i, j))
            else:
                undecided.append((i, j))

    roots = sorted({uf.find(i) for i in range(len(core))})
    if undecided:
        certified = {(uf.find(i), uf.find(j)) for i, j in distinct}
        certified |= {(y, x) for x, y in certified}
        for x in roots:
            for y in roots:
                if x < y and (x, y) not in certified:
                    raise RadiusInsufficientError(
                        f"radius insufficient: cosets of core elements {x} and {y} undecided at radius {s.radius}"
                    )

    members: dict[int, list[Isometry]] = {r: [] for r in roots}
    for i, g in enumerate(core):
        members[uf.find(i)].append(g)
    reps = sorted((min(ms, key=lambda g: g.sort_key) for ms in members.values()), key=lambda g: g.sort_key)
    sizes = [0] * len(reps)
    for g in sorted(s.gamma, key=lambda g: g.sort_key):
        verdicts = [_same_coset(s, a, a_inv, g, rep) for rep in reps]
        if True in verdicts:
            sizes[verdicts.index(True)] += 1
        elif all(v is False for v in verdicts):
            log.debug("new coset beyond the core: %r", g)
            reps.append(g)
            sizes.append(1)
        else:
            raise RadiusInsufficientError(f"radius insufficient: coset of {g!r} undecided at radius {s.radius}")
    order = sorted(range(len(reps)), key=lambda i: reps[i].sort_key)
    return _CosetPartition([reps[i] for i in order], [sizes[i] for i in order], rho)


@dataclass(frozen=True)
class CorrespondenceData:
    degree: int
    epsilon: list[Isometry]
    alpha_i: list[Isometry]
    beta: list[Isometry]
    chi_alpha_i: list[np.ndarray]
    coset_sizes: list[int]
    core_radius: float
    radius: float


def decompose(s: GroupSlice, chi: Optional[UnitaryRep] = None, core_radius: Optional[float] = None) -> CorrespondenceData:
    """Coset representatives ``epsilon_i`` with ``Gamma alpha Gamma = ⊔ Gamma alpha epsilon_i``.

    Cosets are certified on the core of Gamma elements within
    ``core_radius`` of ``j`` (default: half of what the radius leaves after
    two alpha displacements); every pair of core elements is then decidable.
    Representatives are the canonically least members. The ``beta`` layer is
    the same construction for ``alpha^-1``.
    """
    chi = chi or UnitaryRep.trivial()
    alpha = s.alpha
    forward = _coset_partition(s, alpha, core_radius)
    backward = _coset_partition(s, alpha.inverse(), core_radius)
    alpha_inv = alpha.inverse()
    alpha_i = [alpha @ e for e in forward.reps]
    beta = [alpha_inv @ e for e in backward.reps]
    chi_alpha_i = [chi.alpha_image @ chi.chi(e) for e in forward.reps]
    if len(beta) != len(alpha_i):
        log.warning("beta layer has %d cosets, alpha layer %d, at radius %g", len(beta), len(alpha_i), s.radius)
    log.info("Decomposition degree d=%d (core radius %.4g)", len(forward.reps), forward.core_radius)
    return CorrespondenceData(
        degree=len(forward.reps),
        epsilon=forward.reps,
        alpha_i=alpha_i,
        beta=beta,
        chi_alpha_i=chi_alpha_i,
        coset_sizes=forward.sizes,
        core_radius=forward.core_radius,
        radius=s.radius,
    )


@dataclass(frozen=True)
class DecompositionAudit:
    overlaps: int
    covered: int
    uncovered: int
    undecided: int

    @property
    def disjoint(self) -> bool:
        return self.overlaps == 0

    @property
    def complete(self) -> bool:
        return self.uncovered == 0


def audit_decomposition(s: GroupSlice, cd: CorrespondenceData) -> DecompositionAudit:
    """Check that the listed part of ``Gamma alpha Gamma`` splits over the ``Gamma alpha epsilon_i``.

    ``Gamma alpha Gamma`` is listed as the inverses of the stored layer.
    """
    overlaps = covered = uncovered = undecided = 0
    inverses = [a.inverse() for a in cd.alpha_i]
    for T in s.double_coset:
        X = T.inverse()
        hits = [s.in_gamma(X @ ai) for ai in inverses]
        n_true = sum(1 for h in hits if h)
        if n_true > 1:
            overlaps += 1
        if n_true:
            covered += 1
        elif any(h is None for h in hits):
            undecided += 1
        else:
            uncovered += 1
    return DecompositionAudit(overlaps, covered, uncovered, undecided)


def chi_on_double_coset(s: GroupSlice, cd: CorrespondenceData, chi: UnitaryRep, X: Isometry) -> np.ndarray:
    """Extension of ``chi`` to ``X = gamma alpha epsilon_i``: ``chi(gamma) chi(alpha) chi(epsilon_i)``."""
    undecided = False
    for ai, chi_ai in zip(cd.alpha_i, cd.chi_alpha_i):
        gamma = X @ ai.inverse()
        member = s.in_gamma(gamma)
        if member:
            return chi.chi(gamma) @ chi_ai
        undecided |= member is None
    if undecided:
        raise RadiusInsufficientError(f"radius insufficient: cannot place {X!r} in a coset of the double coset")
    raise DataValidationError(f"{X!r} is not in Gamma alpha Gamma")


# -- operators on kernels and sampled functions ----------------------------

@dataclass(frozen=True)
class KernelEvaluation:
    value: np.ndarray
    via_layer: np.ndarray
    via_cosets: np.ndarray


def kernel_gamma(s: GroupSlice, chi: UnitaryRep, k: PointPairFunction, P: PointH3, Q: PointH3) -> np.ndarray:
    """Truncated Poincare series ``sum_gamma chi(gamma) k(delta(P, gamma Q))``."""
    out = np.zeros((chi.dim, chi.dim), dtype=complex)
    for g in s.gamma:
        kv = k(delta(P, apply(g, Q)))
        if kv != 0:
            out += chi.chi(g) * kv
    return out


def _check_truncation(s: GroupSlice, k: PointPairFunction, P: PointH3, Q: PointH3, cd: CorrespondenceData) -> None:
    if not k.bounded:
        raise RadiusInsufficientError("truncation unsound: kernel support is unbounded")
    reach = k.radius + distance(Q, J)
    need = max([distance(P, J)] + [distance(apply(ai, P), J) for ai in cd.alpha_i]) + reach
    if need > s.radius:
        raise RadiusInsufficientError(
            f"truncation unsound: kernel support needs radius {need:.6g} > slice radius {s.radius}"
        )


def hecke_apply_to_kernel(s: GroupSlice, cd: CorrespondenceData, k: PointPairFunction, P: PointH3, Q: PointH3,
                          chi: Optional[UnitaryRep] = None) -> KernelEvaluation:
    """``K_M(P, Q)`` evaluated two ways, which must agree.

    Over the layer: ``sum_T chi(T^-1)^* k(delta(P, T Q))``.
    Over cosets: ``sum_i chi(alpha_i)^* K_Gamma(alpha_i P, Q)``.
    """
    chi = chi or UnitaryRep.trivial()
    _check_truncation(s, k, P, Q, cd)

    via_layer = np.zeros((chi.dim, chi.dim), dtype=complex)
    for T in s.double_coset:
        kv = k(delta(P, apply(T, Q)))
        if kv != 0:
            via_layer += chi_on_double_coset(s, cd, chi, T.inverse()).conj().T * kv

    via_cosets = np.zeros_like(via_layer)
    for ai, chi_ai in zip(cd.alpha_i, cd.chi_alpha_i):
        via_cosets += chi_ai.conj().T @ kernel_gamma(s, chi, k, apply(ai, P), Q)

    gap = float(np.abs(via_layer - via_cosets).max())
    scale = max(1.0, float(np.abs(via_cosets).max()))
    if gap > 1e-9 * scale:
        raise NumericalFailure(f"kernel identity mismatch: evaluations differ by {gap:.3e}")
    return KernelEvaluation(via_cosets, via_layer, via_cosets)


def hecke_operator(cd: CorrespondenceData, f: Callable[[PointH3], np.ndarray], P: PointH3) -> np.ndarray:
    """``(M f)(P) = sum_i chi(alpha_i)^* f(alpha_i P)`` for a vector-valued ``f``."""
    return sum(chi_ai.conj().T @ np.asarray(f(apply(ai, P)), dtype=complex)
               for ai, chi_ai in zip(cd.alpha_i, cd.chi_alpha_i))


def hecke_adjoint(s: GroupSlice, cd: CorrespondenceData, chi: UnitaryRep, f: Callable[[PointH3], np.ndarray],
                  P: PointH3) -> np.ndarray:
    """``(M^* f)(P) = sum_k chi(beta_k^-1) f(beta_k P)``."""
    return sum(chi_on_double_coset(s, cd, chi, b.inverse()) @ np.asarray(f(apply(b, P)), dtype=complex)
               for b in cd.beta)


# -- assumptions -----------------------------------------------------------

@dataclass(frozen=True)
class AssumptionReport:
    extension_single_valued: bool
    factorizations_checked: int
    layer_symmetric: Optional[bool]
    chi_alpha_inverse_adjoint: Optional[bool]
    radius: float
    caveat: str = "within radius"

    @property
    def assumption1(self) -> bool:
        return self.extension_single_valued

    @property
    def assumption2(self) -> bool:
        return bool(self.layer_symmetric) and bool(self.chi_alpha_inverse_adjoint)


def check_assumptions(s: GroupSlice, cd: CorrespondenceData, chi: Optional[UnitaryRep] = None) -> AssumptionReport:
    """Evidence for the extension and self-adjointness hypotheses.

    The extension is single valued when every listed ``X = g1 alpha g2`` gets
    the same ``chi(g1) chi(alpha) chi(g2)`` from all its factorisations in
    the slice. Self-adjointness needs ``Gamma alpha Gamma = Gamma alpha^-1 Gamma``
    (the listed layer is closed under inversion and contains alpha) and
    ``chi(alpha^-1) = chi(alpha)^*``.
    """
    chi = chi or UnitaryRep.trivial()
    forward = [T.inverse() for T in s.double_coset]
    forward_index = ElementIndex(forward)
    seen: dict[int, np.ndarray] = {}
    single_valued, checked = True, 0
    for g1 in s.gamma:
        left = g1 @ s.alpha
        left_chi = chi.chi(g1) @ chi.alpha_image
        for g2 in s.gamma:
            i = forward_index.find(left @ g2)
            if i is None:
                continue
            value = left_chi @ chi.chi(g2)
            checked += 1
            if i in seen:
                if np.abs(seen[i] - value).max() > 1e-10:
                    single_valued = False
            else:
                seen[i] = value

    layer_symmetric: Optional[bool] = all(T.inverse() in s.layer_index for T in s.double_coset)
    alpha_listed = s.in_layer(s.alpha)
    if alpha_listed is None:
        layer_symmetric = None
    else:
        layer_symmetric = layer_symmetric and alpha_listed

    adjoint: Optional[bool]
    if layer_symmetric:
        try:
            chi_inv = chi_on_double_coset(s, cd, chi, s.alpha.inverse())
            adjoint = bool(np.abs(chi_inv - chi.alpha_image.conj().T).max() <= 1e-10)
        except RadiusInsufficientError:
            adjoint = None
    else:
        adjoint = False if layer_symmetric is False else None

    report = AssumptionReport(single_valued, checked, layer_symmetric, adjoint, s.radius)
    log.info("Assumption checks: extension %s (%d factorisations), self-adjoint %s",
             single_valued, checked, report.assumption2)
    return report
