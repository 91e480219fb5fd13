import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from hecke_trace.errors import FieldMismatchError, SliceFormatError
from hecke_trace.groupdata import (ElementIndex, HilbertOrderConfig, bundled_path, check_anisotropy, dump_slice,
                                   enumerate_order, load_order_config, load_slice, norm_form,
                                   validate_cocompact_consistency)
from hecke_trace.isometry import ELLIPTIC, LOXODROMIC, Isometry, classify
from hecke_trace.scalars import QuadExact


def _raw_bundled() -> dict:
    return json.loads(bundled_path("synthetic_slice.json").read_text())


def _write(tmp_path, raw: dict, name: str = "slice.json") -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return path


def test_bundled_slice_loads(bundled_slice, gens):
    s = bundled_slice
    assert s.field_m == 1 and s.is_exact
    assert len(s.gamma) == 10
    assert len(s.double_coset) == 10
    assert s.radius == 3.0
    assert s.gamma[0].is_identity()
    assert s.alpha == gens["alpha"]
    assert s.basepoint.z == 0.5 and s.basepoint.r == 1.0
    assert [g.sort_key for g in s.gamma] == sorted(g.sort_key for g in s.gamma)


def test_membership_with_radius(bundled_slice, gens):
    s, L = bundled_slice, gens["L"]
    assert s.in_gamma(L ** 2) is True
    assert s.in_gamma(gens["alpha"]) is False
    assert s.in_gamma(L ** 3) is None
    assert s.in_layer(gens["alpha"].inverse()) is True


def test_word_element_uses_file_order(bundled_slice, gens):
    assert bundled_slice.word_element(2) == gens["L"]
    assert bundled_slice.word_element(1) == gens["E"]
    with pytest.raises(SliceFormatError, match="outside the gamma list"):
        bundled_slice.word_element(10)


def test_element_index_approximate(gens):
    approx = [g.to_approx() for g in (gens["L"], gens["E"])]
    index = ElementIndex(approx)
    assert index.find(gens["E"].to_approx()) == 1
    assert gens["S"].to_approx() not in index
    exact_index = ElementIndex([gens["L"]])
    assert exact_index.find(gens["L"].to_approx()) is None


def test_unknown_field(tmp_path):
    raw = _raw_bundled()
    raw["comment"] = "extra"
    with pytest.raises(SliceFormatError, match="unknown field"):
        load_slice(_write(tmp_path, raw))


def test_duplicate_element(tmp_path):
    raw = _raw_bundled()
    raw["gamma"].append(raw["gamma"][2])
    raw.pop("counts")
    with pytest.raises(SliceFormatError, match="duplicate"):
        load_slice(_write(tmp_path, raw))


def test_not_unimodular(tmp_path):
    raw = _raw_bundled()
    raw["gamma"][2] = {"a": "2", "b": "0", "c": "0", "d": "1"}
    with pytest.raises(SliceFormatError, match="not unimodular"):
        load_slice(_write(tmp_path, raw))


def test_missing_inverse(tmp_path):
    raw = _raw_bundled()
    del raw["gamma"][3]
    raw.pop("counts")
    with pytest.raises(SliceFormatError, match="closure violation"):
        load_slice(_write(tmp_path, raw))


def test_alpha_in_gamma(tmp_path):
    raw = _raw_bundled()
    raw["alpha"] = raw["gamma"][2]
    with pytest.raises(SliceFormatError, match="alpha in Gamma"):
        load_slice(_write(tmp_path, raw))


def test_outside_radius(tmp_path):
    raw = _raw_bundled()
    raw["radius"] = 2.0
    with pytest.raises(SliceFormatError, match="outside radius"):
        load_slice(_write(tmp_path, raw))


def test_field_mismatch_in_slice(tmp_path):
    raw = _raw_bundled()
    raw["gamma"][1]["a"] = [0.0, 1.0]
    with pytest.raises(FieldMismatchError, match="field mismatch"):
        load_slice(_write(tmp_path, raw))


def test_bad_counts(tmp_path):
    raw = _raw_bundled()
    raw["counts"]["gamma"] = 11
    with pytest.raises(SliceFormatError, match="header counts"):
        load_slice(_write(tmp_path, raw))


def test_dump_then_load_keeps_elements(bundled_slice, tmp_path):
    path = tmp_path / "out" / "copy.json"
    dump_slice(bundled_slice, path)
    again = load_slice(path)
    assert [g.key for g in again.gamma] == [g.key for g in bundled_slice.gamma]
    assert [g.key for g in again.double_coset] == [g.key for g in bundled_slice.double_coset]
    assert again.alpha == bundled_slice.alpha


def test_cocompact_audit(bundled_slice):
    report = validate_cocompact_consistency(bundled_slice)
    assert report.consistent
    assert report.kinds[ELLIPTIC] == 3
    assert report.kinds[LOXODROMIC] == 16
    assert report.kinds["identity"] == 1
    assert report.min_displacement == pytest.approx(math.acosh(1.5))


def test_parabolic_is_reported(parabolic_slice_path):
    report = validate_cocompact_consistency(load_slice(parabolic_slice_path))
    assert not report.consistent
    assert report.parabolics == [("double_coset", 0)]


def test_order_enumeration():
    cfg = load_order_config(bundled_path("order_disc6.json"))
    assert cfg.hecke_norm == Fraction(5)
    s = enumerate_order(cfg, 3.0)
    assert len(s.gamma) == 10
    assert len(s.double_coset) == 60
    assert not s.plumbing
    assert all(g.det == 1 for g in s.gamma)
    assert all(T.det == 5 for T in s.double_coset)
    for g in s.gamma:
        assert g.inverse() in s.gamma_index
    assert all(classify(g).kind != "parabolic" for g in s.gamma[1:])


def test_order_plumbing_mode(tmp_path):
    raw = json.loads(bundled_path("order_disc6.json").read_text())
    raw["hecke_norm"] = "1"
    raw.pop("alpha")
    path = tmp_path / "plumbing.json"
    path.write_text(json.dumps(raw))
    s = enumerate_order(load_order_config(path), 3.0)
    assert s.plumbing
    assert s.alpha.is_identity()
    assert [g.key for g in s.double_coset] == [g.key for g in s.gamma]


def test_order_config_rejects_short_basis(tmp_path):
    raw = json.loads(bundled_path("order_disc6.json").read_text())
    raw["basis"] = raw["basis"][:3]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(SliceFormatError, match="bad basis"):
        load_order_config(path)


def test_norm_form_of_order():
    A, D = norm_form(load_order_config(bundled_path("order_disc6.json")))
    assert D == 1
    assert A.tolist() == [[2, 0, 0, 0], [0, 2, 0, 0], [0, 0, -6, 0], [0, 0, 0, -6]]


def test_anisotropy_at_three_only():
    report = check_anisotropy(load_order_config(bundled_path("order_disc6.json")))
    assert report.passed
    assert report.anisotropic_at == [3]


def test_bundled_dihedral_matches_generators(dihedral_slice, gens):
    L, E, S, alpha = gens["L"], gens["E"], gens["S"], gens["alpha"]
    D = [L ** n @ E ** e for n in range(-2, 3) for e in (0, 1)]
    gamma = D + [S @ d for d in D]
    layer = [alpha.inverse() @ g for g in gamma] + [alpha @ g for g in gamma]
    assert len(dihedral_slice.gamma) == 20 and len(dihedral_slice.double_coset) == 40
    assert {g.key for g in dihedral_slice.gamma} == {g.key for g in gamma}
    assert {T.key for T in dihedral_slice.double_coset} == {T.key for T in layer}
    assert dihedral_slice.word_element(12) == S @ L
    assert dihedral_slice.alpha == alpha
    assert sum(not g.commutes_with(alpha) for g in dihedral_slice.gamma) == 10


def _brute_force(flat: np.ndarray, span: int, nu: float, radius: float) -> list[Isometry]:
    """Every sign class of integer combinations in a cube with det ``nu`` inside ``radius``."""
    axis = np.arange(-span, span + 1)
    pts = np.stack(np.meshgrid(*[axis] * len(flat), indexing="ij"), axis=-1).reshape(-1, len(flat))
    x = pts @ flat
    det = x[:, 0] * x[:, 3] - x[:, 1] * x[:, 2]
    frob = (np.abs(x) ** 2).sum(axis=1)
    keep = (np.abs(det - nu) < 1e-9) & (frob <= 2 * nu * math.cosh(radius) * (1 + 1e-9))
    out = []
    for n, row in zip(pts[keep], x[keep]):
        if n[np.flatnonzero(n)[0]] > 0:
            out.append(Isometry.from_numpy(row.reshape(2, 2)))
    return out


def test_order_enumeration_is_complete():
    cfg = load_order_config(bundled_path("order_disc6.json"))
    s = enumerate_order(cfg, 2.0)
    flat = np.array([B.to_numpy() for B in cfg.basis])
    brute = _brute_force(flat, 5, 1.0, 2.0)
    index = ElementIndex([g.to_approx() for g in s.gamma])
    assert len(brute) == len(s.gamma)
    assert all(g in index for g in brute)


@pytest.fixture(scope="module")
def kleinian_config() -> HilbertOrderConfig:
    return load_order_config(bundled_path("order_kleinian_m2.json"))


def _hilbert_flat(cfg: HilbertOrderConfig) -> np.ndarray:
    zero = QuadExact.rational(0, cfg.field_m)
    rows = []
    for k in range(4):
        for w in cfg.integral_basis:
            x = [zero] * 4
            x[k] = w
            rows.append(cfg.to_matrix(x).ravel())
    return np.array(rows)


def test_hilbert_config_loads(kleinian_config):
    cfg = kleinian_config
    assert isinstance(cfg, HilbertOrderConfig)
    assert (cfg.field_m, cfg.a, cfg.b, cfg.hecke_norm) == (2, Fraction(-1), Fraction(3), Fraction(2))
    assert cfg.reduced_norm(cfg.alpha) == 2
    assert abs(np.linalg.det(cfg.to_matrix(cfg.alpha)) - 2) < 1e-12


def test_hilbert_units_are_complete(kleinian_config):
    s = enumerate_order(kleinian_config, 2.5)
    assert not s.is_exact
    assert len(s.gamma) > 1
    brute = _brute_force(_hilbert_flat(kleinian_config), 2, 1.0, 2.5)
    assert len(brute) == len(s.gamma)
    assert all(g in s.gamma_index for g in brute)
    assert any(abs(g.trace) < 1e-12 for g in s.gamma)


def test_hilbert_layer_is_complete(kleinian_config):
    s = enumerate_order(kleinian_config, 1.5)
    assert not s.plumbing
    assert s.alpha.isclose(kleinian_config.to_isometry(kleinian_config.alpha))
    brute = _brute_force(_hilbert_flat(kleinian_config), 2, 2.0, 1.5)
    assert len(brute) == len(s.double_coset) > 0
    # the reduced-norm-2 elements are closed under inversion
    assert all(T in s.layer_index for T in brute)


def test_hilbert_slice_dumps_and_reloads(kleinian_config, tmp_path):
    s = enumerate_order(kleinian_config, 1.5)
    dump_slice(s, tmp_path / "kleinian.json")
    again = load_slice(tmp_path / "kleinian.json")
    assert again.field_m is None
    assert len(again.gamma) == len(s.gamma)
    assert all(g in again.layer_index for g in s.double_coset)


def test_hilbert_norm_form_and_anisotropy(kleinian_config):
    A, D = norm_form(kleinian_config)
    assert D == 1
    assert A.tolist() == [[2, 0, 0, 0], [0, 2, 0, 0], [0, 0, -6, 0], [0, 0, 0, -6]]
    report = check_anisotropy(kleinian_config)
    # only primes split in Q(sqrt(-2)) are sampled
    assert list(report.isotropic_mod_p2) == [3, 11, 17, 19, 41, 43]
    assert report.anisotropic_at == [3]
    assert report.kleinian


def test_order_over_q_is_not_kleinian():
    report = check_anisotropy(load_order_config(bundled_path("order_disc6.json")))
    assert report.over_field is None
    assert not report.kleinian


def test_hilbert_config_rejects_wrong_alpha(tmp_path):
    raw = json.loads(bundled_path("order_kleinian_m2.json").read_text())
    raw["alpha"] = ["1", "0", "0", "0"]
    with pytest.raises(SliceFormatError, match="bad alpha: reduced norm 1 is not 2"):
        load_order_config(_write(tmp_path, raw, "order.json"))


def test_hilbert_config_rejects_basis_too(tmp_path):
    raw = json.loads(bundled_path("order_kleinian_m2.json").read_text())
    raw["basis"] = json.loads(bundled_path("order_disc6.json").read_text())["basis"]
    with pytest.raises(SliceFormatError, match="not both"):
        load_order_config(_write(tmp_path, raw, "order.json"))
