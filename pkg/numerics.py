"""
Shared numerical kernels.

Log-space helpers (binomials, signed and complex log-sum-exp), the complex
error function, adaptive quadrature wrappers and the Pfaffian of a
skew-symmetric matrix.
"""
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from pfapack import pfaffian as pfapack_pfaffian
from scipy import integrate, special

from config import default_quad_tol
from errors import AccuracyWarning, DomainError, NotSkewSymmetric, QuadratureFailure

logger = logging.getLogger(__name__)

# erf: Maclaurin series inside this radius, Faddeeva function outside
ERF_SERIES_RADIUS = 2.0
ERF_SERIES_TERMS = 48
ERF_ENVELOPE = 30.0

# offset angular trapezoid used by integrate_disk
DISK_ANGLES = 64

SKEW_TOL = 1e-10


# ==============================
# Log-space arithmetic
# ==============================

def log_binomial(n: int, k: int) -> float:
    """log C(n, k) via log-gamma."""
    if k < 0 or n < 0 or k > n:
        raise DomainError(f"log_binomial needs 0 <= k <= n, got n={n}, k={k}")
    return float(special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1))


def log_binomial_array(n: int, k: np.ndarray) -> np.ndarray:
    k = np.asarray(k)
    if np.any(k < 0) or np.any(k > n):
        raise DomainError(f"log_binomial needs 0 <= k <= {n}")
    return special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)


@dataclass(frozen=True)
class SignedLogComplex:
    """A complex number stored as log-modulus and phase."""

    log_modulus: float
    phase: float

    @classmethod
    def from_log(cls, log_z: complex) -> "SignedLogComplex":
        return cls(float(np.real(log_z)), float(np.imag(log_z)))

    def reduced_phase(self) -> float:
        """Phase wrapped to (-pi, pi]."""
        p = math.remainder(self.phase, 2 * math.pi)
        return math.pi if p == -math.pi else p

    @classmethod
    def from_parts(cls, sign_re: float, log_re: float, sign_im: float, log_im: float) -> "SignedLogComplex":
        """Combine signed log-moduli of the real and imaginary parts."""
        top = max(log_re, log_im)
        if top == -math.inf:
            return cls(-math.inf, 0.0)
        z = sign_re * math.exp(log_re - top) + 1j * sign_im * math.exp(log_im - top)
        if z == 0:
            return cls(-math.inf, 0.0)
        return cls(top + math.log(abs(z)), math.atan2(z.imag, z.real))

    def log(self) -> complex:
        return complex(self.log_modulus, self.phase)

    def to_complex(self) -> complex:
        if self.log_modulus == -math.inf:
            return 0j
        return complex(np.exp(self.log_modulus + 1j * self.phase))


def signed_log_sum(log_abs: np.ndarray, signs: np.ndarray) -> Tuple[float, float, float]:
    """Sum of real terms sign_k * exp(log_abs_k).

    Returns (sign, log|sum|, cancellation digits). Positive and negative
    parts are accumulated separately and combined once; the cancellation
    diagnostic is log10(sum|terms| / |sum|).
    """
    log_abs = np.asarray(log_abs, dtype=float)
    signs = np.asarray(signs, dtype=float)
    pos = log_abs[signs > 0]
    neg = log_abs[signs < 0]
    log_pos = special.logsumexp(pos) if pos.size else -math.inf
    log_neg = special.logsumexp(neg) if neg.size else -math.inf
    log_total_abs = np.logaddexp(log_pos, log_neg)

    if log_pos == log_neg:
        return 0.0, -math.inf, math.inf
    if log_pos > log_neg:
        sign, hi, lo = 1.0, log_pos, log_neg
    else:
        sign, hi, lo = -1.0, log_neg, log_pos
    # log(e^hi - e^lo)
    log_result = hi + math.log1p(-math.exp(lo - hi))
    digits = (log_total_abs - log_result) / math.log(10)
    return sign, float(log_result), float(digits)


def signed_log_sum_complex(log_terms: np.ndarray) -> Tuple[SignedLogComplex, float]:
    """Sum of exp(log_terms) with real and imaginary parts bucketed by sign.

    Returns the sum and its cancellation digits log10(sum|t_k| / |sum t_k|).
    """
    log_terms = np.asarray(log_terms, dtype=complex).ravel()
    with np.errstate(divide="ignore"):
        cos, sin = np.cos(log_terms.imag), np.sin(log_terms.imag)
        sign_re, log_re, _ = signed_log_sum(log_terms.real + np.log(np.abs(cos)), np.sign(cos))
        sign_im, log_im, _ = signed_log_sum(log_terms.real + np.log(np.abs(sin)), np.sign(sin))
    total = SignedLogComplex.from_parts(sign_re, log_re, sign_im, log_im)
    if total.log_modulus == -math.inf:
        return total, math.inf
    digits = (float(special.logsumexp(log_terms.real)) - total.log_modulus) / math.log(10)
    return total, digits


# ==============================
# Complex error function
# ==============================

def _erf_series(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    z2 = z * z
    term = z.copy()
    total = z.copy()
    for k in range(1, ERF_SERIES_TERMS):
        term = term * (-z2) / k
        total = total + term / (2 * k + 1)
    return 2.0 / math.sqrt(math.pi) * total


def _erf_faddeeva(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    flip = z.real < 0
    zz = np.where(flip, -z, z)
    with np.errstate(over="ignore", invalid="ignore"):
        val = 1.0 - np.exp(-zz * zz) * special.wofz(1j * zz)
    return np.where(flip, -val, val)


def erf_complex(z):
    """Complex error function.

    Maclaurin series for |z| < 2, otherwise erf(z) = 1 - exp(-z^2) w(iz) with
    the Faddeeva function evaluated in the upper half-plane (odd symmetry
    covers Re z < 0).
    """
    arr = np.asarray(z, dtype=complex)
    if np.any(np.abs(arr) > ERF_ENVELOPE):
        warnings.warn(f"erf_complex: |z| > {ERF_ENVELOPE}, accuracy not guaranteed", AccuracyWarning)
    out = np.empty_like(arr)
    small = np.abs(arr) < ERF_SERIES_RADIUS
    if np.any(small):
        out[small] = _erf_series(arr[small])
    if np.any(~small):
        out[~small] = _erf_faddeeva(arr[~small])
    if out.ndim == 0:
        return complex(out)
    return out


# ==============================
# Quadrature
# ==============================

def _tolerances(tol: Optional[float], abs_tol: Optional[float], rel_tol: Optional[float]):
    tol = default_quad_tol() if tol is None else tol
    return (tol if abs_tol is None else abs_tol), (tol if rel_tol is None else rel_tol)


def integrate_1d(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: Optional[float] = None,
    abs_tol: Optional[float] = None,
    rel_tol: Optional[float] = None,
    limit: int = 200,
) -> Tuple[float, float]:
    """Adaptive Gauss-Kronrod integral of a real function on [a, b].

    Returns (value, error estimate). Raises QuadratureFailure, carrying the
    best estimate, when the error estimate exceeds the request.
    """
    epsabs, epsrel = _tolerances(tol, abs_tol, rel_tol)
    result = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1)
    value, err = result[0], result[1]
    if err > max(epsabs, epsrel * abs(value)):
        message = result[3] if len(result) > 3 else "error estimate above tolerance"
        raise QuadratureFailure(f"integrate_1d on [{a}, {b}]: {message}", estimate=value, error=err)
    return float(value), float(err)


def _quad_vec_complex(g, epsabs, epsrel, limit, what):
    """quad_vec over t in [0, 1] of a complex array-valued g(t)."""

    def stacked(t):
        val = np.asarray(g(t), dtype=complex)
        return np.concatenate([val.real.ravel(), val.imag.ravel()])

    res, err, info = integrate.quad_vec(
        stacked, 0.0, 1.0, epsabs=epsabs, epsrel=epsrel, norm="max", limit=limit, full_output=True
    )
    half = res.size // 2
    value = res[:half] + 1j * res[half:]
    if not info.success:
        raise QuadratureFailure(f"{what}: {info.message}", estimate=value, error=float(err))
    return value, float(err)


def integrate_segment(
    f: Callable[[complex], complex],
    z0: complex,
    z1: complex,
    tol: Optional[float] = None,
    abs_tol: Optional[float] = None,
    rel_tol: Optional[float] = None,
    limit: int = 2000,
) -> Tuple[complex, float]:
    """Integral of an analytic f along the straight segment z0 -> z1."""
    epsabs, epsrel = _tolerances(tol, abs_tol, rel_tol)
    d = complex(z1) - complex(z0)
    value, err = _quad_vec_complex(
        lambda t: d * f(z0 + t * d), epsabs, epsrel, limit, f"integrate_segment {z0} -> {z1}"
    )
    return complex(value[0]), err


def disk_angles(m: int = DISK_ANGLES) -> np.ndarray:
    """Offset trapezoid nodes on (-pi, pi); the cut at theta = pi is never hit."""
    return 2 * np.pi * (np.arange(m) + 0.5) / m - np.pi


def integrate_disk(
    f: Callable[[np.ndarray], np.ndarray],
    tol: Optional[float] = None,
    abs_tol: Optional[float] = None,
    rel_tol: Optional[float] = None,
    n_angles: int = DISK_ANGLES,
    limit: int = 2000,
):
    """Integral of f over the unit disk, dA = r dr dtheta.

    f takes an array of shape (n_angles,) of points on a circle and returns
    an array whose leading axis is that angle axis; trailing axes are kept, so
    a whole matrix of integrals can be done in one pass. The angular rule is
    exact for trigonometric polynomials of degree below n_angles.
    Returns (value, error estimate); value is a scalar when f is scalar-valued.
    """
    epsabs, epsrel = _tolerances(tol, abs_tol, rel_tol)
    theta = disk_angles(n_angles)
    phase = np.exp(1j * theta)
    shape = []

    def radial(r):
        vals = np.asarray(f(r * phase), dtype=complex)
        if not shape:
            shape.append(vals.shape[1:])
        return r * (2 * np.pi / n_angles) * vals.sum(axis=0)

    value, err = _quad_vec_complex(radial, epsabs, epsrel, limit, "integrate_disk")
    value = value.reshape(shape[0])
    if value.ndim == 0:
        return complex(value), err
    return value, err


# ==============================
# Pfaffian
# ==============================

def check_skew(m: np.ndarray, tol: float = SKEW_TOL) -> float:
    """Relative skew-symmetry defect; raises NotSkewSymmetric above tol."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSkewSymmetric(f"expected a square matrix, got shape {m.shape}")
    if m.size == 0:
        return 0.0
    scale = max(1.0, float(np.max(np.abs(m))))
    defect = float(np.max(np.abs(m + m.T))) / scale
    if defect > tol:
        raise NotSkewSymmetric(f"matrix is not skew-symmetric (relative defect {defect:.3e})")
    return defect


def pfaffian(m: np.ndarray, tol: float = SKEW_TOL) -> complex:
    """Pfaffian by Parlett-Reid tridiagonalization with pivoting.

    The input is checked against tol, then its exactly skew part is used.
    Pf of the empty matrix is 1; odd dimension gives 0.
    """
    m = np.asarray(m, dtype=complex)
    check_skew(m, tol)
    n = m.shape[0]
    if n == 0:
        return 1.0 + 0j
    if n % 2:
        return 0j
    skew = 0.5 * (m - m.T)
    return complex(pfapack_pfaffian.pfaffian(skew, overwrite_a=True, method="P"))
