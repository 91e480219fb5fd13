import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
import math
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
import pytest

from hecke_trace.correspondence import UnitaryRep, load_rep
from hecke_trace.groupdata import GroupSlice, bundled_path, dump_slice, load_slice
from hecke_trace.isometry import Isometry
from hecke_trace.scalars import QuadExact
from hecke_trace.transforms import ClosedFormPair, PointPairFunction, closed_form_pair


def gaussian(a, b=0) -> QuadExact:
    return QuadExact(Fraction(a), Fraction(b), 1)


@pytest.fixture
def gens() -> dict[str, Isometry]:
    """Generators over Q(i): L = diag(2, 1/2), E = diag(i, -i), S = [[0, 1], [-1, 0]], alpha = diag(2+i, 2-i)."""
    return {
        "L": Isometry.exact(2, 0, 0, Fraction(1, 2), m=1),
        "E": Isometry(gaussian(0, 1), gaussian(0), gaussian(0), gaussian(0, -1)),
        "S": Isometry.exact(0, 1, -1, 0, m=1),
        "alpha": Isometry(gaussian(2, 1), gaussian(0), gaussian(0), gaussian(2, -1)),
    }


@pytest.fixture
def bundled_slice() -> GroupSlice:
    return load_slice(bundled_path("synthetic_slice.json"))


@pytest.fixture
def dihedral_slice() -> GroupSlice:
    """Gamma = D u S D with D = {L^n E^e : |n| <= 2}; the layer is alpha^-1 Gamma u alpha Gamma."""
    return load_slice(bundled_path("dihedral_slice.json"))


@pytest.fixture
def dihedral_rep(dihedral_slice) -> UnitaryRep:
    """chi(L) = 1, chi(E) = chi(S) = -1, chi(alpha) = 1."""
    return load_rep(bundled_path("dihedral_rep.json"), dihedral_slice)


@pytest.fixture
def bump_kernel() -> PointPairFunction:
    """``(cosh 1 - delta)^2`` on ``delta <= cosh 1``."""
    top = math.cosh(1.0)
    return PointPairFunction(lambda d: (top - d) ** 2, support_bound=top)


@pytest.fixture
def heat_pair():
    return closed_form_pair(ClosedFormPair.heat(0.5))


@pytest.fixture
def resolvent_pair():
    return closed_form_pair(ClosedFormPair.resolvent(1.5, 2.5))


@pytest.fixture
def write_slice(tmp_path) -> Callable[..., Path]:
    """Dump a hand-made slice into ``tmp_path`` and return its path."""

    def _write(gamma: Sequence[Isometry], layer: Sequence[Isometry], alpha: Isometry,
               radius: float = 3.0, name: str = "slice.json") -> Path:
        s = GroupSlice(field_m=1, gamma=list(gamma), double_coset=list(layer), alpha=alpha, radius=radius)
        path = tmp_path / name
        dump_slice(s, path)
        return path

    return _write


@pytest.fixture
def parabolic_slice_path(write_slice) -> Path:
    P = Isometry.exact(1, 1, 0, 1, m=1)
    return write_slice([Isometry.identity(1)], [P.inverse()], P, name="parabolic.json")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)
