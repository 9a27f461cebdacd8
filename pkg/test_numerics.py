import math
import warnings

import numpy as np
import pytest
from scipy import special

from errors import AccuracyWarning, DomainError, NotSkewSymmetric, QuadratureFailure
from numerics import (
    SignedLogComplex,
    _erf_faddeeva,
    _erf_series,
    check_skew,
    erf_complex,
    integrate_1d,
    integrate_disk,
    integrate_segment,
    log_binomial,
    log_binomial_array,
    pfaffian,
    signed_log_sum,
    signed_log_sum_complex,
)


def test_log_binomial_matches_exact():
    assert log_binomial(10, 3) == pytest.approx(math.log(120))
    assert log_binomial(7, 0) == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(np.exp(log_binomial_array(6, np.arange(7))), [1, 6, 15, 20, 15, 6, 1], rtol=1e-12)


def test_log_binomial_rejects_bad_k():
    with pytest.raises(DomainError):
        log_binomial(3, 4)
    with pytest.raises(DomainError):
        log_binomial_array(3, np.array([-1, 0]))


def test_signed_log_sum_complex_handles_huge_moduli():
    total, digits = signed_log_sum_complex(np.array([math.log(1.0), math.log(2.0)]))
    assert total.log() == pytest.approx(math.log(3.0))
    assert digits == pytest.approx(0.0, abs=1e-12)
    total, _ = signed_log_sum_complex(np.array([1000.0, 1000.0 + 1j * math.pi / 2]))
    # e^1000 (1 + i)
    assert total.log_modulus == pytest.approx(1000 + 0.5 * math.log(2))
    assert total.phase == pytest.approx(math.pi / 4)


def test_signed_log_sum_complex_reports_cancellation():
    # 1000 - 999 + 1e-3 i
    terms = np.log(np.array([1000.0, -999.0, 1e-3j], dtype=complex))
    total, digits = signed_log_sum_complex(terms)
    assert total.to_complex() == pytest.approx(1 + 1e-3j, rel=1e-12)
    assert digits == pytest.approx(math.log10(1999.001 / abs(1 + 1e-3j)), rel=1e-9)


def test_signed_log_sum_complex_of_zero_terms():
    total, digits = signed_log_sum_complex(np.array([-np.inf, -np.inf], dtype=complex))
    assert total.log_modulus == -math.inf
    assert total.to_complex() == 0j
    assert digits == math.inf


def test_signed_log_sum_reports_cancellation():
    sign, log_val, digits = signed_log_sum(np.log([3.0, 1.0]), np.array([1.0, -1.0]))
    assert sign == 1.0
    assert log_val == pytest.approx(math.log(2.0))
    assert digits == pytest.approx(math.log10(2.0))

    sign, log_val, _ = signed_log_sum(np.log([1.0, 4.0]), np.array([1.0, -1.0]))
    assert sign == -1.0
    assert log_val == pytest.approx(math.log(3.0))


def test_signed_log_sum_exact_cancellation():
    sign, log_val, digits = signed_log_sum(np.log([2.0, 2.0]), np.array([1.0, -1.0]))
    assert sign == 0.0
    assert log_val == -math.inf
    assert digits == math.inf


def test_signed_log_complex_round_trip_and_phase():
    z = SignedLogComplex.from_log(complex(math.log(8.0), 2.5 * math.pi))
    assert z.to_complex() == pytest.approx(8j)
    assert z.reduced_phase() == pytest.approx(0.5 * math.pi)
    assert SignedLogComplex(0.0, -math.pi).reduced_phase() == math.pi
    assert SignedLogComplex.from_log(complex(-math.inf, 0.0)).to_complex() == 0j
    assert SignedLogComplex.from_parts(-1.0, 0.0, 1.0, math.log(2.0)).to_complex() == pytest.approx(-1 + 2j)


# ==============================
# erf
# ==============================

@pytest.mark.parametrize("z", [0.1, 1.5, 2.5, -3.0, 1 + 1j, 0.5 - 2j, 3j, -2.2 + 1.7j, 4 + 4j, -1 - 5j])
def test_erf_complex_matches_scipy(z):
    expected = complex(special.erf(complex(z)))
    got = erf_complex(z)
    assert abs(got - expected) <= 1e-10 * max(1.0, abs(expected))


def test_erf_series_and_faddeeva_agree_on_overlap_band():
    rng = np.random.default_rng(3)
    radius = rng.uniform(1.0, 2.5, 200)
    z = radius * np.exp(1j * rng.uniform(-math.pi, math.pi, 200))
    series = _erf_series(z)
    faddeeva = _erf_faddeeva(z)
    scale = np.maximum(1.0, np.abs(faddeeva))
    assert np.max(np.abs(series - faddeeva) / scale) < 1e-10


def test_erf_complex_is_odd_and_vectorised():
    z = np.array([0.3 + 0.2j, 2.7 - 1.1j, -0.4 + 3.3j])
    np.testing.assert_allclose(erf_complex(-z), -erf_complex(z), rtol=1e-13)
    assert erf_complex(z).shape == (3,)


def test_erf_complex_warns_outside_envelope():
    with pytest.warns(AccuracyWarning):
        erf_complex(40.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        erf_complex(10.0)


# ==============================
# Quadrature
# ==============================

def test_integrate_1d():
    value, err = integrate_1d(math.sin, 0.0, math.pi)
    assert value == pytest.approx(2.0, abs=1e-12)
    assert err < 1e-10


def test_integrate_1d_failure_carries_estimate():
    with pytest.raises(QuadratureFailure) as excinfo:
        integrate_1d(lambda x: math.sin(200 * x), 0.0, 10.0, abs_tol=1e-14, rel_tol=1e-14, limit=1)
    assert excinfo.value.estimate is not None
    assert excinfo.value.error is not None


def test_integrate_segment_polynomial():
    value, _ = integrate_segment(lambda z: z**2, 0.0, 1 + 1j)
    assert value == pytest.approx((1 + 1j) ** 3 / 3, abs=1e-12)


def test_integrate_segment_follows_principal_log():
    value, _ = integrate_segment(lambda z: 1 / z, 1.0, 1j)
    assert value == pytest.approx(1j * math.pi / 2, abs=1e-10)


def test_integrate_disk_scalar_and_matrix():
    value, _ = integrate_disk(lambda w: np.abs(w) ** 2)
    assert value.real == pytest.approx(math.pi / 2, rel=1e-10)
    assert abs(value.imag) < 1e-12

    stacked, _ = integrate_disk(lambda w: np.stack([np.ones_like(w), w * w.conj(), w], axis=-1))
    np.testing.assert_allclose(stacked, [math.pi, math.pi / 2, 0.0], atol=1e-10)


# ==============================
# Pfaffian
# ==============================

def test_check_skew():
    assert check_skew(np.array([[0.0, 2.0], [-2.0, 0.0]])) == 0.0
    with pytest.raises(NotSkewSymmetric):
        check_skew(np.eye(2))
    with pytest.raises(NotSkewSymmetric):
        check_skew(np.zeros((2, 3)))


def test_pfaffian_small_cases():
    assert pfaffian(np.zeros((0, 0))) == 1
    assert pfaffian(np.zeros((3, 3))) == 0
    assert pfaffian(np.array([[0.0, 2.5], [-2.5, 0.0]])) == pytest.approx(2.5)
    a, b, c, d, e, f = 1.0, 2.0, 3.0, 4.0, 5.0, 6.0
    m = np.array([[0, a, b, c], [-a, 0, d, e], [-b, -d, 0, f], [-c, -e, -f, 0]])
    assert pfaffian(m) == pytest.approx(a * f - b * e + c * d)


@pytest.mark.parametrize("size", [2, 6, 10, 16])
def test_pfaffian_squared_is_determinant(size):
    rng = np.random.default_rng(size)
    a = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    m = a - a.T
    pf = pfaffian(m)
    det = np.linalg.det(m)
    assert abs(pf * pf - det) <= 1e-8 * abs(det)


def test_pfaffian_rejects_non_skew():
    with pytest.raises(NotSkewSymmetric):
        pfaffian(np.array([[0.0, 1.0], [1.0, 0.0]]))
