import math

import numpy as np
import pytest

from errors import DomainError, PoleError
from moebius_transforms import check_disk, flt_lambda_to_w, flt_w_to_lambda, stereographic


def test_flt_fixed_points():
    assert flt_lambda_to_w(1j) == pytest.approx(0)
    assert flt_lambda_to_w(0) == pytest.approx(1)
    assert flt_w_to_lambda(0) == pytest.approx(1j)
    assert flt_w_to_lambda(1) == pytest.approx(0)


def test_flt_roundtrip_and_upper_half_plane_maps_into_disk():
    rng = np.random.default_rng(0)
    lam = rng.standard_normal(500) * 5 + 1j * rng.exponential(2.0, 500)
    w = flt_lambda_to_w(lam)
    assert np.all(np.abs(w) < 1)
    np.testing.assert_allclose(flt_w_to_lambda(w), lam, rtol=1e-10, atol=1e-12)


def test_flt_real_axis_maps_to_unit_circle():
    w = flt_lambda_to_w(np.array([-3.0, 0.5, 7.0]))
    np.testing.assert_allclose(np.abs(w), 1.0, rtol=1e-15)


def test_flt_poles():
    with pytest.raises(PoleError):
        flt_lambda_to_w(-1j)
    with pytest.raises(PoleError):
        flt_w_to_lambda(np.array([0.5, -1.0]))
    assert isinstance(PoleError("x"), DomainError)


def test_check_disk():
    check_disk(np.array([0.5, 1.0 + 1e-12]))
    with pytest.raises(DomainError):
        check_disk(1.01)


def test_stereographic_poles_and_equator():
    south = stereographic(0)
    assert (south.x, south.y, south.z) == pytest.approx((0.0, 0.0, -1.0))
    east = stereographic(1)
    assert (east.x, east.y, east.z) == pytest.approx((1.0, 0.0, 0.0))
    north = stereographic(1e200 * 1j)
    assert (north.x, north.y, north.z) == pytest.approx((0.0, 0.0, 1.0))


def test_stereographic_lands_on_unit_sphere():
    rng = np.random.default_rng(1)
    lam = (rng.standard_normal(200) + 1j * rng.standard_normal(200)) * np.exp(rng.uniform(-20, 20, 200))
    p = stereographic(lam)
    np.testing.assert_allclose(p.x**2 + p.y**2 + p.z**2, 1.0, rtol=1e-12)
    # upper half-plane goes to the y > 0 hemisphere
    assert np.all((p.y > 0) == (lam.imag > 0))


def test_stereographic_is_rotation_equivariant():
    lam = 0.7 + 0.2j
    a = stereographic(lam)
    b = stereographic(lam * 1j)
    assert (b.x, b.y, b.z) == pytest.approx((-a.y, a.x, a.z))
    assert stereographic(2.0).z == pytest.approx(3.0 / 5.0)
    assert math.isclose(stereographic(0.5).z, -0.6)
