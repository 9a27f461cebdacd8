"""
Half-plane <-> disk fractional linear maps and stereographic projection.

lambda = (1/i)(w - 1)/(w + 1) sends the unit disk to the upper half-plane;
its inverse w = (1 + i lambda)/(1 - i lambda) is used to bring eigenvalues
into the disk. Functions accept scalars or numpy arrays.
"""
import logging
from typing import NamedTuple, Union

import numpy as np

from errors import DomainError, PoleError

logger = logging.getLogger(__name__)

DISK_TOL = 1e-9

ArrayLike = Union[complex, np.ndarray]


class SpherePoint(NamedTuple):
    x: ArrayLike
    y: ArrayLike
    z: ArrayLike


def _out(value: np.ndarray):
    return complex(value) if value.ndim == 0 else value


def flt_lambda_to_w(lam: ArrayLike) -> ArrayLike:
    """w = (1 + i lambda)/(1 - i lambda); pole at lambda = -i."""
    lam = np.asarray(lam, dtype=complex)
    den = 1 - 1j * lam
    if np.any(den == 0):
        raise PoleError("flt_lambda_to_w: lambda = -i is the pole of the map")
    return _out((1 + 1j * lam) / den)


def flt_w_to_lambda(w: ArrayLike) -> ArrayLike:
    """lambda = (1/i)(w - 1)/(w + 1); pole at w = -1."""
    w = np.asarray(w, dtype=complex)
    den = w + 1
    if np.any(den == 0):
        raise PoleError("flt_w_to_lambda: w = -1 is the pole of the map")
    return _out(-1j * (w - 1) / den)


def check_disk(w: ArrayLike, tol: float = DISK_TOL) -> None:
    """Raise DomainError unless every |w| <= 1 + tol."""
    r = np.abs(np.asarray(w, dtype=complex))
    if np.any(r > 1 + tol):
        raise DomainError(f"point outside the unit disk (|w| = {float(np.max(r)):.12g})")


def stereographic(lam: ArrayLike) -> SpherePoint:
    """(2X, 2Y, |lambda|^2 - 1) / (|lambda|^2 + 1) on the unit sphere.

    0 goes to the south pole, the unit circle to the equator and infinity to
    the north pole. Large moduli are handled through 1/|lambda|.
    """
    lam = np.asarray(lam, dtype=complex)
    m = np.abs(lam)
    big = m > 1
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(big, 1.0 / np.where(big, m, 1.0), 0.0)
        unit = np.where(big, lam / np.where(big, m, 1.0), 0.0)
        # |lambda| <= 1
        d_small = m * m + 1
        x_small = 2 * lam.real / d_small
        y_small = 2 * lam.imag / d_small
        z_small = (m * m - 1) / d_small
        # |lambda| > 1
        d_big = 1 + inv * inv
        x_big = 2 * unit.real * inv / d_big
        y_big = 2 * unit.imag * inv / d_big
        z_big = (1 - inv * inv) / d_big
    x = np.where(big, x_big, x_small)
    y = np.where(big, y_big, y_small)
    z = np.where(big, z_big, z_small)
    if x.ndim == 0:
        return SpherePoint(float(x), float(y), float(z))
    return SpherePoint(x, y, z)

