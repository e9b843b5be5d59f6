import cmath
import math
import re

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqfilter.errors import ValidationError
from sqfilter.gaussian import (
    Squeezing,
    SqueezingParams,
    characteristic_value,
    classify,
    covariance_eigenvalues,
    covariance_matrix,
    quadrature_variance,
)

from conftest import squeezing_params


def test_covariance_examples():
    np.testing.assert_array_equal(covariance_matrix(SqueezingParams(0, 0)), [[1, 0], [0, 0]])
    np.testing.assert_array_equal(covariance_matrix(SqueezingParams(1, 0)), [[2, 0], [0, 1]])
    C = covariance_matrix(SqueezingParams(1, math.sqrt(2) * cmath.exp(1j * math.pi / 3)))
    np.testing.assert_allclose(C, C.conj().T)
    assert abs(np.linalg.det(C)) < 1e-12


@pytest.mark.parametrize("n, m, what", [(-0.1, 0, "n >= 0"), (1, 2, "n(n+1) - |m|^2 >= 0")])
def test_invalid_parameters_name_the_inequality(n, m, what):
    with pytest.raises(ValidationError, match=re.escape(what)):
        covariance_matrix(SqueezingParams(n, m))


def test_eigenvalue_examples():
    assert covariance_eigenvalues(SqueezingParams(0, 0)) == pytest.approx((1, 0), abs=1e-15)
    assert covariance_eigenvalues(SqueezingParams(1, 0)) == pytest.approx((2, 1), abs=1e-15)
    p = SqueezingParams(2, 1 + 1j)
    ref = np.linalg.eigvalsh(covariance_matrix(p))[::-1]
    np.testing.assert_allclose(covariance_eigenvalues(p), ref, atol=1e-12)


@given(squeezing_params())
def test_covariance_invariants(p):
    C = covariance_matrix(p)
    scale = 1 + p.n**2
    assert np.max(np.abs(C - C.conj().T)) == 0
    assert abs(np.trace(C) - (2 * p.n + 1)) <= 1e-12 * scale
    assert abs(np.linalg.det(C) - p.delta) <= 1e-12 * scale
    lp, lm = covariance_eigenvalues(p)
    np.testing.assert_allclose([lp, lm], np.linalg.eigvalsh(C)[::-1], atol=1e-12 * scale)
    assert abs(lp * lm - p.delta) <= 1e-10 * scale


def test_classify_examples():
    assert classify(SqueezingParams(3, 0)) is Squeezing.THERMAL
    assert classify(SqueezingParams(1, math.sqrt(2))) is Squeezing.MAXIMAL
    assert classify(SqueezingParams(1, 1)) is Squeezing.SUB_MAXIMAL
    assert classify(SqueezingParams(1, 2)) is Squeezing.INVALID
    assert classify(SqueezingParams(-1, 0)) is Squeezing.INVALID


@given(st.floats(1e-6, 50), st.floats(0, 2 * math.pi))
def test_maximal_has_singular_covariance(n, phase):
    p = SqueezingParams(n, math.sqrt(n * (n + 1)) * cmath.exp(1j * phase))
    if p.m != 0:
        assert classify(p) is Squeezing.MAXIMAL
    assert abs(np.linalg.det(covariance_matrix(p))) <= 1e-10 * (1 + n * n)


def test_characteristic_examples():
    assert characteristic_value(SqueezingParams(1, 0.5j), 0) == 1.0
    assert characteristic_value(SqueezingParams(0, 0), 1) == pytest.approx(math.exp(-0.5), rel=1e-15)
    # exponent -3/2 - Re(i * 1) = -3/2
    assert characteristic_value(SqueezingParams(1, 1j), 1) == pytest.approx(math.exp(-1.5), rel=1e-15)


@given(squeezing_params(), st.complex_numbers(max_magnitude=3))
def test_characteristic_matches_symmetric_exponent(p, u):
    # -1/2 m conj(u)^2 - 1/2 conj(m) u^2 written out without Re()
    exponent = -0.5 * (2 * p.n + 1) * abs(u) ** 2 - 0.5 * p.m * u.conjugate() ** 2 - 0.5 * p.m.conjugate() * u**2
    assert abs(exponent.imag) < 1e-12 * (1 + abs(exponent))
    assert characteristic_value(p, u) == pytest.approx(math.exp(exponent.real), rel=1e-12)


def test_quadrature_variance_examples():
    for lam in (0.0, 0.3, 2.0):
        assert quadrature_variance(SqueezingParams(0, 0), lam) == 1.0
    assert quadrature_variance(SqueezingParams(1, 0), math.pi / 2) == pytest.approx(3.0)


@given(squeezing_params(), st.floats(-10, 10))
def test_quadrature_variance_periodicity_and_minimum(p, lam):
    v = quadrature_variance(p, lam)
    assert v > 0 or p.delta < 1e-9
    assert quadrature_variance(p, lam + math.pi) == pytest.approx(v, rel=1e-10, abs=1e-12)
    if abs(p.m) > 0:
        lam_min = 0.5 * (math.pi - cmath.phase(p.m))
        assert quadrature_variance(p, lam_min) <= v + 1e-12 * (1 + p.n)
        assert quadrature_variance(p, lam_min) == pytest.approx(2 * p.n + 1 - 2 * abs(p.m), abs=1e-12 * (1 + p.n))
