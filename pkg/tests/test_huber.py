import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
import dataclasses
import json
import math

import numpy as np
import pytest

from hecke_trace.errors import AdmissibilityError, ComparisonError, DataValidationError, SliceFormatError
from hecke_trace.huber import (COFINITE, FINITE, IDENTICAL, SpectrumPackage, compare_spectra, corollary_check,
                               dump_package, load_package, resolvent_identity_residual,
                               spectrum_package_from_classes)
from hecke_trace.conjugacy import reduce_classes
from hecke_trace.trace import LengthSpectrum, SpectralData

S_PARAM, B_PARAM = 1.5, 2.5


def _engineered(weights=(0.3, 0.1)) -> SpectrumPackage:
    """One eigenvalue 1.25 whose omega balances lengths log 4, log 16 and E = 1 at (s, B) = (1.5, 2.5)."""
    mu = np.array([math.log(4), math.log(16)])
    w = np.array(weights)
    s, B, E, lam = S_PARAM, B_PARAM, 1.0, 1.25
    lhs = np.sum(w * np.exp(-s * mu)) / (2 * s) - np.sum(w * np.exp(-B * mu)) / (2 * B)
    sn2 = 1 - lam
    omega = (lhs + (1 / (2 * s) - 1 / (2 * B)) * E) / (1 / (s * s - sn2) - 1 / (B * B - sn2))
    return SpectrumPackage(SpectralData([lam], [omega]), LengthSpectrum(mu, w), E, "engineered")


def _lengths(mu, weight, label="") -> SpectrumPackage:
    return SpectrumPackage(None, LengthSpectrum(np.asarray(mu), np.asarray(weight)), 1.0, label)


def test_engineered_package_balances():
    assert abs(resolvent_identity_residual(_engineered(), S_PARAM, B_PARAM)) < 1e-8


def test_perturbed_weights_leave_linear_residual():
    p = _engineered()
    one = dataclasses.replace(p, L=LengthSpectrum(p.L.mu, p.L.weight * np.array([1.01, 1.0])))
    two = dataclasses.replace(p, L=LengthSpectrum(p.L.mu, p.L.weight * np.array([1.02, 1.0])))
    r1 = resolvent_identity_residual(one, S_PARAM, B_PARAM)
    r2 = resolvent_identity_residual(two, S_PARAM, B_PARAM)
    expected = 0.003 * (math.exp(-S_PARAM * math.log(4)) / (2 * S_PARAM) - math.exp(-B_PARAM * math.log(4)) / (2 * B_PARAM))
    assert r1 == pytest.approx(expected, rel=1e-6)
    assert r2 == pytest.approx(2 * r1, rel=1e-6)


def test_resolvent_outside_convergence_region():
    p = _engineered()
    with pytest.raises(AdmissibilityError, match="outside convergence region"):
        resolvent_identity_residual(p, 1.0, 2.5)
    with pytest.raises(AdmissibilityError, match="outside convergence region"):
        resolvent_identity_residual(p, 2.5, 1.5)


def test_resolvent_needs_full_package():
    p = dataclasses.replace(_engineered(), E=None)
    with pytest.raises(DataValidationError, match="lacks E"):
        resolvent_identity_residual(p, S_PARAM, B_PARAM)


def test_identical_length_spectra():
    mu = np.log(np.arange(2.0, 10.0))
    a, b = _lengths(mu, np.ones(8), "a"), _lengths(mu, np.ones(8), "b")
    report = compare_spectra(a, b, "L")
    assert report.status == IDENTICAL
    assert report.difference == 0 and not report.contradiction
    assert report.E_equal is True


def test_finite_difference_is_a_contradiction():
    mu = np.log(np.arange(2.0, 10.0))
    weights = np.ones(8)
    changed = weights.copy()
    changed[0] = 2.0
    report = compare_spectra(_lengths(mu, weights), _lengths(mu, changed), "L")
    assert report.status == FINITE
    assert report.difference == 2
    assert report.contradiction
    assert report.only_left == pytest.approx([math.log(2.0)])


def test_wholesale_shift_is_cofinite():
    mu = np.log(np.arange(2.0, 10.0))
    report = compare_spectra(_lengths(mu, np.ones(8)), _lengths(mu + 0.1, np.ones(8)), "L")
    assert report.status == COFINITE
    assert not report.contradiction


def test_eigenvalue_mode_and_missing_data():
    a = _engineered()
    assert compare_spectra(a, _engineered(), "S").status == IDENTICAL
    with pytest.raises(DataValidationError, match="no eigenvalue data"):
        compare_spectra(a, _lengths([1.0], [1.0]), "S")
    with pytest.raises(DataValidationError, match="unknown comparison mode"):
        compare_spectra(a, a, "X")


def test_corollary_check():
    lam = [0.5, 2.0, 3.0]
    a = SpectrumPackage(SpectralData(lam, [1.0, 1.0, 1.0]), None, None, "a")
    assert corollary_check(a, a).passed
    b = dataclasses.replace(a, S=SpectralData(lam, [1.0, -1.0, 1.0]), label="b")
    report = corollary_check(a, b)
    assert not report.passed and report.contradiction
    assert report.differing == [2.0]
    c = dataclasses.replace(a, S=SpectralData([0.5, 2.0, 4.0], [1.0, 1.0, 1.0]))
    with pytest.raises(ComparisonError, match="not a single-group comparison"):
        corollary_check(a, c)


def test_package_file(tmp_path):
    p = _engineered()
    path = tmp_path / "pkg" / "engineered.json"
    dump_package(p, path)
    again = load_package(path)
    assert again.label == "engineered"
    assert again.E == 1.0
    assert abs(resolvent_identity_residual(again, S_PARAM, B_PARAM)) < 1e-8

    raw = json.loads(path.read_text())
    raw["extra"] = 1
    path.write_text(json.dumps(raw))
    with pytest.raises(SliceFormatError, match="unknown field"):
        load_package(path)


def test_package_from_classes(bundled_slice):
    p = spectrum_package_from_classes(reduce_classes(bundled_slice), label="bundled")
    assert p.S is None
    assert len(p.L) == 2
    assert p.E == pytest.approx(25 / 32 * math.log(4))
