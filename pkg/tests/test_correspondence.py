import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
import dataclasses
import json
import math

import numpy as np
import pytest

from hecke_trace.correspondence import (UnitaryRep, audit_decomposition, check_assumptions, chi_on_double_coset,
                                        decompose, default_core_radius, hecke_adjoint, hecke_apply_to_kernel,
                                        hecke_operator, kernel_gamma, load_rep)
from hecke_trace.errors import (DataValidationError, RadiusInsufficientError, SliceFormatError)
from hecke_trace.groupdata import bundled_path
from hecke_trace.isometry import J, PointH3
from hecke_trace.transforms import ClosedFormPair, closed_form_kernel


@pytest.fixture
def bundled_rep(bundled_slice) -> UnitaryRep:
    return load_rep(bundled_path("synthetic_rep.json"), bundled_slice)


def _point(rng) -> PointH3:
    z = complex(*rng.uniform(-0.25, 0.25, size=2))
    return PointH3(z, rng.uniform(0.8, 1.25))


def _brute_force_cosets(s) -> list[set]:
    """Blocks of Gamma under g ~ g' iff alpha g g'^-1 alpha^-1 is listed, by exhaustive search."""
    a, a_inv = s.alpha, s.alpha.inverse()
    blocks: list[list] = []
    for g in s.gamma:
        for block in blocks:
            if s.in_gamma(a @ g @ block[0].inverse() @ a_inv):
                block.append(g)
                break
        else:
            blocks.append([g])
    return [{g.key for g in b} for b in blocks]


def test_bundled_degree(bundled_slice):
    cd = decompose(bundled_slice)
    assert cd.degree == 1
    assert cd.epsilon[0].is_identity()
    assert cd.coset_sizes == [10]
    assert len(cd.beta) == cd.degree
    assert cd.core_radius == pytest.approx(1.5)
    assert cd.alpha_i[0] == bundled_slice.alpha


def test_dihedral_degree(dihedral_slice, gens):
    cd = decompose(dihedral_slice)
    assert cd.degree == 2
    assert cd.epsilon[0].is_identity()
    assert cd.epsilon[1] == gens["S"]
    assert cd.coset_sizes == [10, 10]
    assert len(cd.beta) == 2


@pytest.mark.parametrize("name", ["bundled_slice", "dihedral_slice"])
def test_cosets_match_exhaustive_search(name, request):
    s = request.getfixturevalue(name)
    cd = decompose(s)
    blocks = _brute_force_cosets(s)
    assert sorted(len(b) for b in blocks) == sorted(cd.coset_sizes)
    for eps in cd.epsilon:
        assert sum(eps.key in b for b in blocks) == 1


def test_permuted_input_same_representatives(dihedral_slice):
    shuffled = dataclasses.replace(
        dihedral_slice,
        gamma=list(reversed(dihedral_slice.gamma)),
        double_coset=list(reversed(dihedral_slice.double_coset)),
    )
    assert [e.key for e in decompose(shuffled).epsilon] == [e.key for e in decompose(dihedral_slice).epsilon]


@pytest.mark.parametrize("name", ["bundled_slice", "dihedral_slice"])
def test_audit_disjoint_and_complete(name, request):
    s = request.getfixturevalue(name)
    audit = audit_decomposition(s, decompose(s))
    assert audit.disjoint and audit.complete
    assert audit.covered == len(s.double_coset)
    assert audit.undecided == 0


def test_negative_core_radius(bundled_slice):
    with pytest.raises(RadiusInsufficientError, match="radius insufficient"):
        decompose(bundled_slice, core_radius=-0.5)
    assert default_core_radius(bundled_slice, bundled_slice.alpha) == pytest.approx(1.5)


def test_rep_file(bundled_slice, bundled_rep, gens):
    chi = bundled_rep
    assert chi.dim == 1 and not chi.is_trivial
    assert chi.chi(gens["E"])[0, 0] == -1
    assert chi.chi(gens["L"] @ gens["E"])[0, 0] == -1
    assert chi.chi(gens["L"] ** 2)[0, 0] == 1
    assert chi.alpha_image[0, 0] == 1j
    with pytest.raises(DataValidationError, match="no word"):
        chi.chi(gens["S"])


def test_rep_rejects_non_unitary(bundled_slice, tmp_path):
    raw = json.loads(bundled_path("synthetic_rep.json").read_text())
    raw["generators"]["L"] = [[[2.0, 0.0]]]
    path = tmp_path / "rep.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(DataValidationError, match="not unitary"):
        load_rep(path, bundled_slice)


def test_rep_rejects_unknown_generator(bundled_slice, tmp_path):
    raw = json.loads(bundled_path("synthetic_rep.json").read_text())
    raw["words"]["2"] = ["M"]
    path = tmp_path / "rep.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(SliceFormatError, match="unknown generator"):
        load_rep(path, bundled_slice)


def test_chi_extension(bundled_slice, bundled_rep, gens):
    cd = decompose(bundled_slice, bundled_rep)
    assert cd.chi_alpha_i[0][0, 0] == 1j
    X = gens["E"] @ bundled_slice.alpha
    assert chi_on_double_coset(bundled_slice, cd, bundled_rep, X)[0, 0] == -1j
    with pytest.raises(DataValidationError, match="not in Gamma alpha Gamma"):
        chi_on_double_coset(bundled_slice, cd, bundled_rep, gens["L"])
    with pytest.raises(RadiusInsufficientError):
        chi_on_double_coset(bundled_slice, cd, bundled_rep, gens["L"] ** 3 @ bundled_slice.alpha)


@pytest.mark.parametrize("with_rep", [False, True])
def test_kernel_identity_on_bundled_slice(bundled_slice, bundled_rep, bump_kernel, rng, with_rep):
    chi = bundled_rep if with_rep else None
    cd = decompose(bundled_slice, chi)
    nonzero = 0
    for _ in range(10):
        P, Q = _point(rng), _point(rng)
        ev = hecke_apply_to_kernel(bundled_slice, cd, bump_kernel, P, Q, chi)
        np.testing.assert_allclose(ev.via_layer, ev.via_cosets, rtol=0, atol=1e-9)
        nonzero += bool(np.abs(ev.value).max() > 0)
    assert nonzero > 0


@pytest.mark.parametrize("with_rep", [False, True])
def test_kernel_identity_on_dihedral_slice(dihedral_slice, dihedral_rep, bump_kernel, rng, with_rep):
    chi = dihedral_rep if with_rep else None
    cd = decompose(dihedral_slice, chi)
    nonzero = 0
    for _ in range(10):
        P, Q = _point(rng), _point(rng)
        ev = hecke_apply_to_kernel(dihedral_slice, cd, bump_kernel, P, Q, chi)
        np.testing.assert_allclose(ev.via_layer, ev.via_cosets, rtol=0, atol=1e-9)
        nonzero += bool(np.abs(ev.value).max() > 0)
    assert nonzero > 0


def test_kernel_truncation_guard(bundled_slice, bump_kernel):
    cd = decompose(bundled_slice)
    with pytest.raises(RadiusInsufficientError, match="truncation unsound"):
        hecke_apply_to_kernel(bundled_slice, cd, bump_kernel, J, PointH3(0j, math.exp(2.5)))
    unbounded = closed_form_kernel(ClosedFormPair.heat(0.5))
    with pytest.raises(RadiusInsufficientError, match="truncation unsound"):
        hecke_apply_to_kernel(bundled_slice, cd, unbounded, J, J)


def test_kernel_gamma_at_identity(bundled_slice, bump_kernel):
    value = kernel_gamma(bundled_slice, UnitaryRep.trivial(), bump_kernel, J, J)
    # only I and E fix j; every other element moves it beyond cosh 1
    assert value[0, 0] == pytest.approx(2 * (math.cosh(1.0) - 1) ** 2)


def test_hecke_operator_on_constants(bundled_slice, dihedral_slice, bundled_rep):
    one = lambda P: np.ones(1)
    assert hecke_operator(decompose(bundled_slice), one, J)[0] == pytest.approx(1.0)
    cd = decompose(dihedral_slice)
    assert hecke_operator(cd, one, J)[0] == pytest.approx(2.0)
    assert hecke_adjoint(dihedral_slice, cd, UnitaryRep.trivial(), one, J)[0] == pytest.approx(2.0)
    twisted = decompose(bundled_slice, bundled_rep)
    assert hecke_operator(twisted, one, J)[0] == pytest.approx(-1j)


def test_assumptions_on_bundled_slice(bundled_slice, bundled_rep):
    report = check_assumptions(bundled_slice, decompose(bundled_slice, bundled_rep), bundled_rep)
    assert report.assumption1
    assert report.factorizations_checked >= len(bundled_slice.double_coset)
    assert report.layer_symmetric is False
    assert not report.assumption2
    assert report.caveat == "within radius"


def test_assumptions_on_dihedral_slice(dihedral_slice):
    cd = decompose(dihedral_slice)
    report = check_assumptions(dihedral_slice, cd)
    assert report.assumption1
    assert report.layer_symmetric
    assert report.chi_alpha_inverse_adjoint
    assert report.assumption2

    twisted = UnitaryRep(dim=1, alpha_image=np.array([[1j]]),
                         values=[(g, np.eye(1, dtype=complex)) for g in dihedral_slice.gamma])
    cd = decompose(dihedral_slice, twisted)
    report = check_assumptions(dihedral_slice, cd, twisted)
    assert report.layer_symmetric
    assert report.chi_alpha_inverse_adjoint is False
    assert not report.assumption2


def test_dihedral_rep_file(dihedral_slice, dihedral_rep, gens):
    chi, S, E, L = dihedral_rep, gens["S"], gens["E"], gens["L"]
    assert chi.chi(S)[0, 0] == -1
    assert chi.chi(S @ E)[0, 0] == 1
    assert chi.chi(S @ L)[0, 0] == -1
    cd = decompose(dihedral_slice, chi)
    assert [c[0, 0] for c in cd.chi_alpha_i] == [1, -1]
    assert chi_on_double_coset(dihedral_slice, cd, chi, S @ dihedral_slice.alpha)[0, 0] == -1


def test_twisted_hecke_operator_on_dihedral_slice(dihedral_slice, dihedral_rep):
    cd = decompose(dihedral_slice, dihedral_rep)
    one = lambda P: np.ones(1)
    assert abs(hecke_operator(cd, one, J)[0]) < 1e-12
    assert abs(hecke_adjoint(dihedral_slice, cd, dihedral_rep, one, J)[0]) < 1e-12
    report = check_assumptions(dihedral_slice, cd, dihedral_rep)
    assert report.assumption1
    assert report.chi_alpha_inverse_adjoint
    assert report.assumption2
