"""
Exact finite-N statistics of the real quaternion spherical ensemble.

Eigenvalues are taken one per conjugate pair in the upper half-plane and
mapped to the unit disk by w = (1 + i lambda)/(1 - i lambda). Everything
here is a closed form or a quadrature of one:

  * eigenvalue jpdfs in the half-plane and in the disk, and the matrix pdf
  * C_N and the skew norms h_j of the monomial skew-orthogonal basis
  * the correlation kernel (sum form, integral form, direct Pfaffian sums)
  * n-point correlations as Pfaffians, the density and its limits
  * the bulk scaled kernel and the generating function for radial weights

Branch convention for the half-integer powers: every point x carries its own
square root s(x) (principal by default). The kernel uses
(w conj(z))^(1/2) = s(w) conj(s(z)) and (w/z)^(1/2) = s(w)/s(z). Individual
kernel entries depend on these signs; Pfaffian correlations do not.
"""
import logging
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import special

import quaternion_core as qc
from errors import BranchError, BranchProximity, DomainError, QuadratureFailure
from moebius_transforms import check_disk
from numerics import (
    SignedLogComplex,
    integrate_1d,
    integrate_disk,
    integrate_segment,
    log_binomial,
    log_binomial_array,
    signed_log_sum_complex,
    erf_complex,
    pfaffian,
    check_skew,
)

logger = logging.getLogger(__name__)

PHASE_TOL = 1e-8
BRANCH_PROXIMITY = 1e-6
KERNEL_DISK_TOL = 1e-12
CONTOUR_GRID = 257
INTEGRAL_ERR_LIMIT = 1e-8
SKEW_TOL = 1e-10
H_REL_TOL = 1e-11


def _check_n(n: int) -> int:
    if int(n) != n or n < 1:
        raise DomainError(f"N must be a positive integer, got {n}")
    return int(n)


# ==============================
# Constants
# ==============================

def log_c_n(n: int) -> Tuple[int, float]:
    """(sign, log|C_N|) of the disk jpdf normalization."""
    n = _check_n(n)
    sign = -1 if (n * (n - 1) // 2) % 2 else 1
    j = np.arange(1, n + 1)
    log_abs = (
        -n * math.log(math.pi)
        - special.gammaln(n + 1)
        + n * special.gammaln(2 * n + 2)
        - 2 * float(np.sum(special.gammaln(2 * j)))
    )
    return sign, float(log_abs)


def _log_abs_h(n: int) -> Tuple[np.ndarray, np.ndarray]:
    j = np.arange(n)
    odd = 2 * n - 4 * j - 1
    log_abs = (
        math.log(math.pi)
        + np.log(np.abs(odd))
        - math.log(2 * n + 1)
        - math.log(2 * n)
        - log_binomial_array(2 * n - 1, 2 * j)
    )
    return np.sign(odd).astype(float), log_abs


def skew_norm_h(j: int, n: int) -> float:
    """h_j = pi (2N - 4j - 1) / ((2N + 1) 2N) / C(2N - 1, 2j); may be negative."""
    n = _check_n(n)
    if not 0 <= j < n:
        raise DomainError(f"skew_norm_h needs 0 <= j < N, got j={j}, N={n}")
    odd = 2 * n - 4 * j - 1
    return math.pi * odd / ((2 * n + 1) * (2 * n)) * math.exp(-log_binomial(2 * n - 1, 2 * j))


@dataclass(frozen=True)
class EnsembleConstants:
    n: int
    c_n: float
    sign_c_n: int
    log_abs_c_n: float
    h: np.ndarray
    sign_h: np.ndarray
    log_abs_h: np.ndarray

    @property
    def normalization(self) -> float:
        """Gamma(N+1) C_N prod h_j, which must equal 1."""
        sign = self.sign_c_n * float(np.prod(self.sign_h))
        log_val = special.gammaln(self.n + 1) + self.log_abs_c_n + float(np.sum(self.log_abs_h))
        return sign * math.exp(log_val)


@lru_cache(maxsize=64)
def ensemble_constants(n: int) -> EnsembleConstants:
    n = _check_n(n)
    sign_c, log_c = log_c_n(n)
    sign_h, log_h = _log_abs_h(n)
    with np.errstate(over="ignore"):
        c_n = sign_c * float(np.exp(log_c))
        h = sign_h * np.exp(log_h)
    for arr in (h, sign_h, log_h):
        arr.setflags(write=False)
    return EnsembleConstants(n, c_n, sign_c, log_c, h, sign_h, log_h)


# ==============================
# tau and the eigenvalue jpdfs
# ==============================

def log_tau(x, n: int):
    """Complex log of tau(x) = (1/x)^(N-1/2) (1/|x| - |x|)^(1/2) / (|x| + 1/|x|)^(N+1).

    Principal branches throughout; for |x| > 1 the square root of the
    negative middle factor is +i. x on the negative real axis is rejected.
    """
    n = _check_n(n)
    x = np.asarray(x, dtype=complex)
    r = np.abs(x)
    if np.any(r == 0):
        raise DomainError("tau is undefined at x = 0")
    if np.any((x.imag == 0) & (x.real < 0) & (r != 1)):
        raise BranchError("tau: x on the negative real axis, (1/x)^(N-1/2) is on its branch cut")
    with np.errstate(divide="ignore"):
        log_mod = np.log(r) + 0.5 * np.log(np.abs((1 - r) * (1 + r))) - (n + 1) * np.log1p(r * r)
    phase = (n - 0.5) * np.angle(1 / x) + np.where(r > 1, 0.5 * math.pi, 0.0)
    out = log_mod + 1j * phase
    return complex(out) if out.ndim == 0 else out


def tau(x, n: int):
    with np.errstate(under="ignore"):
        out = np.exp(np.asarray(log_tau(x, n)))
    return complex(out) if out.ndim == 0 else out


class LogDensity(NamedTuple):
    sign: int
    log_value: float

    @property
    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_value)


def _log_vandermonde_abs(x: np.ndarray) -> float:
    k, j = np.triu_indices(len(x), k=1)
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(np.abs(x[j] - x[k]))))


def jpdf_lambda(lambdas: Sequence[complex], n: int) -> LogDensity:
    """Eigenvalue jpdf in the upper half-plane (one eigenvalue per conjugate pair).

    Already includes the factor 2^N of the half-plane restriction; integrates
    to 1 over (upper half-plane)^N.
    """
    n = _check_n(n)
    lam = np.asarray(lambdas, dtype=complex).ravel()
    if lam.size != n:
        raise DomainError(f"jpdf_lambda needs {n} eigenvalues, got {lam.size}")
    if np.any(lam.imag <= 0):
        raise DomainError("jpdf_lambda: every eigenvalue must have Im > 0")
    sign_c, log_c = log_c_n(n)
    # same constant as |C_N|
    log_val = log_c
    log_val += float(np.sum(2 * np.log(2 * lam.imag) - (2 * n + 2) * np.log1p(np.abs(lam) ** 2)))
    log_val += 2 * _log_vandermonde_abs(lam)
    k, j = np.triu_indices(n, k=1)
    with np.errstate(divide="ignore"):
        log_val += 2 * float(np.sum(np.log(np.abs(lam[j] - lam[k].conj()))))
    if log_val == -math.inf:
        return LogDensity(0, -math.inf)
    return LogDensity(1, log_val)


def log_jpdf_w(ws: Sequence[complex], n: int) -> complex:
    """Complex log of the disk jpdf, phase tracked term by term."""
    n = _check_n(n)
    w = np.asarray(ws, dtype=complex).ravel()
    if w.size != n:
        raise DomainError(f"jpdf_w needs {n} points, got {w.size}")
    r = np.abs(w)
    if np.any((r <= 0) | (r >= 1)):
        raise DomainError("jpdf_w: every point needs 0 < |w| < 1")
    sign_c, log_c = log_c_n(n)
    total = complex(log_c, math.pi if sign_c < 0 else 0.0)
    reflected = 1 / w.conj()
    total += complex(np.sum(-2 * np.log(r) - 0.5j * math.pi + log_tau(w, n) + log_tau(reflected, n)))
    # Vandermonde of (w_1..w_N, 1/conj(w_1)..1/conj(w_N))
    x = np.concatenate([w, reflected])
    a, b = np.triu_indices(2 * n, k=1)
    with np.errstate(divide="ignore"):
        total += complex(np.sum(np.log(x[b] - x[a])))
    return total


def jpdf_w(ws: Sequence[complex], n: int) -> float:
    """Eigenvalue jpdf on the unit disk; real and nonnegative.

    Raises BranchError if the tracked phase does not cancel.
    """
    log_val = log_jpdf_w(ws, n)
    if log_val.real == -math.inf:
        return 0.0
    phase = math.remainder(log_val.imag, 2 * math.pi)
    if abs(phase) > PHASE_TOL:
        raise BranchError(f"jpdf_w: phase {phase:.3e} did not cancel")
    return math.exp(log_val.real)


def log_matrix_pdf(y: np.ndarray, beta: int, n: int) -> float:
    """log of the matrix pdf of Y = A^-1 B for beta in {1, 2, 4}.

    For beta = 4, Y is the 2N x 2N complex embedding and det(1 + Y Y^D) is the
    quaternion determinant of the self-dual matrix 1 + Y Y^D.
    """
    n = _check_n(n)
    if beta not in (1, 2, 4):
        raise DomainError(f"beta must be 1, 2 or 4, got {beta}")
    y = np.asarray(y)
    size = 2 * n if beta == 4 else n
    if y.shape != (size, size):
        raise DomainError(f"beta={beta}, N={n} needs a {size}x{size} matrix, got {y.shape}")
    gram = np.eye(size) + y @ y.conj().T
    if beta == 4:
        log_det = qc.log_qdet_selfdual(qc.extract(gram, tol=1e-10))
    else:
        sign, log_det = np.linalg.slogdet(gram)
        log_det = float(log_det)
    j = np.arange(n)
    log_const = -beta * n * n / 2 * math.log(math.pi) + float(
        np.sum(special.gammaln((n + 1 + j) * beta / 2) - special.gammaln((j + 1) * beta / 2))
    )
    return log_const - beta * n * log_det


# ==============================
# Skew inner products
# ==============================

def _monomial_powers(n: int) -> np.ndarray:
    """Exponents of q_0..q_{2N-1}: q_{2j} = w^{2j}, q_{2j+1} = w^{2N-1-2j}."""
    p = np.empty(2 * n, dtype=int)
    p[0::2] = 2 * np.arange(n)
    p[1::2] = 2 * n - 1 - 2 * np.arange(n)
    return p


@lru_cache(maxsize=16)
def gamma_matrix_numeric(n: int, tol: float = 1e-11) -> np.ndarray:
    """All gamma_{j,k}[1] by disk quadrature, 0-based 2N x 2N matrix.

    In the reordered monomial basis the matrix is block diagonal with blocks
    [[0, h_j], [-h_j, 0]].
    """
    n = _check_n(n)
    p = _monomial_powers(n)

    def integrand(w):
        r = np.abs(w)
        weight = -1j / (r * r) * tau(w, n) * tau(1 / w.conj(), n)
        qw = w[:, None] ** p
        qb = (1 / w.conj())[:, None] ** p
        g = qw[:, :, None] * qb[:, None, :] - qb[:, :, None] * qw[:, None, :]
        return weight[:, None, None] * g

    value, err = integrate_disk(integrand, abs_tol=tol, rel_tol=tol)
    logger.debug(f"gamma matrix N={n}: quadrature error {err:.2e}")
    value.setflags(write=False)
    return value


def gamma_jk_numeric(j: int, k: int, n: int) -> complex:
    """gamma_{j,k}[1] with 1-based indices 1 <= j, k <= 2N."""
    n = _check_n(n)
    if not (1 <= j <= 2 * n and 1 <= k <= 2 * n):
        raise DomainError(f"gamma_jk_numeric needs 1 <= j, k <= {2 * n}")
    return complex(gamma_matrix_numeric(n)[j - 1, k - 1])


def radial_norm_h(j: int, n: int, v: Optional[Callable[[float], float]] = None, lower: float = 0.0) -> float:
    """h_j[v] = 2 pi int_lower^1 v(r) (1-r^2)/(1+r^2)^(2N+2) (r^(4j+1) - r^(4N-4j-1)) dr.

    v = None is the constant 1, giving h_j itself when lower = 0.
    """
    n = _check_n(n)
    if not 0 <= j < n:
        raise DomainError(f"radial_norm_h needs 0 <= j < N, got j={j}, N={n}")

    def f(r):
        base = (1 - r * r) * math.exp(-(2 * n + 2) * math.log1p(r * r))
        val = 2 * math.pi * base * (r ** (4 * j + 1) - r ** (4 * n - 4 * j - 1))
        return val if v is None else val * v(r)

    value, _ = integrate_1d(f, lower, 1.0, abs_tol=0.0, rel_tol=H_REL_TOL)
    return value


def partition_function(v: Callable[[float], float], n: int) -> float:
    """Z_N[v] = E[prod_j v(|w_j|)] for a radial weight v."""
    consts = ensemble_constants(n)
    ratios = [radial_norm_h(j, n, v) / consts.h[j] for j in range(consts.n)]
    return float(np.prod(ratios))


def gap_probability(radius: float, n: int) -> float:
    """Probability that no eigenvalue lies in |w| < radius."""
    if not 0 <= radius <= 1:
        raise DomainError(f"gap radius must lie in [0, 1], got {radius}")
    consts = ensemble_constants(n)
    ratios = [radial_norm_h(j, n, lower=radius) / consts.h[j] for j in range(consts.n)]
    return float(np.prod(ratios))


# ==============================
# Correlation kernel
# ==============================

@lru_cache(maxsize=32)
def _sum_coefficients(n: int):
    j = np.arange(n)
    log_c = log_binomial_array(2 * n - 1, j) - np.log(2 * n - 2 * j - 1)
    low = (j - n).astype(float)
    gap = (2 * n - 1 - 2 * j).astype(float)
    for arr in (log_c, low, gap):
        arr.setflags(write=False)
    return log_c, low, gap


def _log_prefactor(n: int) -> float:
    return math.log((2 * n + 1) * 2 * n / math.pi)


def _log_sigma_sum(lv: complex, n: int) -> complex:
    """log sum_j C(2N-1, j) (v^(j-N) - v^(N-1-j)) / (2N-2j-1), given lv = log v with Re lv <= 0."""
    log_c, low, gap = _sum_coefficients(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = log_c + low * lv + np.log(-np.expm1(gap * lv))
    total, digits = signed_log_sum_complex(terms)
    logger.debug("kernel sum at |v| = exp(%.6g), N=%d: %.1f digits cancelled", lv.real, n, digits)
    return total.log()


def _log_f(lv: complex, log_root: complex, n: int) -> complex:
    """log of root (2N+1)2N/pi sigma-sum(v) from log v and log root; F(1/v, 1/root) = -F(v, root) covers |v| > 1."""
    if not math.isfinite(lv.real):
        raise DomainError("kernel argument product vanished")
    if lv.real > 0:
        return 1j * math.pi + _log_f(-lv, -log_root, n)
    return log_root + _log_prefactor(n) + _log_sigma_sum(lv, n)


def _log_g(r: float, n: int) -> complex:
    """log of r^(N-1/2) (1 - r^2)^(1/2) / (1 + r^2)^(N+1); +i root for r > 1, -inf at r = 1."""
    if r == 1:
        return complex(-math.inf, 0.0)
    half = 0.5 * np.log(complex((1 - r) * (1 + r)))
    return (n - 0.5) * math.log(r) + half - (n + 1) * math.log1p(r * r)


def _root(x: complex, s: Optional[complex]) -> complex:
    return complex(np.sqrt(complex(x))) if s is None else complex(s)


def _log_root(x: complex, s: Optional[complex]) -> complex:
    return 0.5 * complex(np.log(complex(x))) if s is None else complex(np.log(complex(s)))


def _check_point(x: complex, allow_outside: bool = False) -> float:
    r = abs(x)
    if r == 0:
        raise DomainError("kernel is undefined at w = 0")
    if not allow_outside:
        check_disk(x, KERNEL_DISK_TOL)
    return r


def _kernel_s(x: complex, y: complex, n: int, sx=None, sy=None, allow_outside=False) -> complex:
    rx, ry = _check_point(x, allow_outside), _check_point(y, allow_outside)
    log_a = _log_g(rx, n) + _log_g(ry, n)
    if log_a.real == -math.inf:
        return 0j
    lv = complex(np.log(x)) + complex(np.log(y)).conjugate()
    log_root = _log_root(x, sx) + _log_root(y, sy).conjugate()
    return SignedLogComplex.from_log(log_a + _log_f(lv, log_root, n)).to_complex()


def _kernel_d(x: complex, y: complex, n: int, sx=None, sy=None) -> complex:
    rx, ry = _check_point(x), _check_point(y)
    if x == y and sx == sy:
        return 0j
    log_a = _log_g(rx, n) + _log_g(ry, n)
    if log_a.real == -math.inf:
        return 0j
    lv = complex(np.log(x)) - complex(np.log(y))
    log_root = _log_root(x, sx) - _log_root(y, sy)
    return -1j * SignedLogComplex.from_log(log_a + _log_f(lv, log_root, n)).to_complex()


def _kernel_i(x: complex, y: complex, n: int, sx=None, sy=None) -> complex:
    rx, ry = _check_point(x), _check_point(y)
    if x == y and sx == sy:
        return 0j
    log_a = _log_g(rx, n) + _log_g(ry, n)
    if log_a.real == -math.inf:
        return 0j
    lv = (complex(np.log(y)) - complex(np.log(x))).conjugate()
    log_root = (_log_root(y, sy) - _log_root(x, sx)).conjugate()
    return 1j * SignedLogComplex.from_log(log_a + _log_f(lv, log_root, n)).to_complex()


def _map_pairs(fn, w, z, n):
    n = _check_n(n)
    wb, zb = np.broadcast_arrays(np.asarray(w, dtype=complex), np.asarray(z, dtype=complex))
    out = np.array([fn(complex(a), complex(b), n) for a, b in zip(wb.ravel(), zb.ravel())], dtype=complex)
    out = out.reshape(wb.shape)
    return complex(out) if out.ndim == 0 else out


def kernel_S_sum(w, z, n: int, sw: Optional[complex] = None, sz: Optional[complex] = None):
    """S(w, z) from the finite binomial sum, evaluated in log space.

    sw, sz override the per-point square roots (scalar calls only).
    """
    if sw is not None or sz is not None:
        return _kernel_s(complex(w), complex(z), _check_n(n), sw, sz)
    return _map_pairs(_kernel_s, w, z, n)


def kernel_S_extended(w: complex, z: complex, n: int, sw=None, sz=None) -> complex:
    """S(w, z) continued to points outside the disk, used by the I/D relations."""
    return _kernel_s(complex(w), complex(z), _check_n(n), sw, sz, allow_outside=True)


def kernel_D(w, z, n: int, sw: Optional[complex] = None, sz: Optional[complex] = None):
    """D(w, z) = -|z|^-2 S(w, 1/conj(z)); antisymmetric."""
    if sw is not None or sz is not None:
        return _kernel_d(complex(w), complex(z), _check_n(n), sw, sz)
    return _map_pairs(_kernel_d, w, z, n)


def kernel_I(w, z, n: int, sw: Optional[complex] = None, sz: Optional[complex] = None):
    """I(w, z) = |w|^-2 S(1/conj(w), z); antisymmetric."""
    if sw is not None or sz is not None:
        return _kernel_i(complex(w), complex(z), _check_n(n), sw, sz)
    return _map_pairs(_kernel_i, w, z, n)


def kernel_S_integral(
    w: complex,
    z: complex,
    n: int,
    sw: Optional[complex] = None,
    sz: Optional[complex] = None,
    tol: Optional[float] = None,
) -> complex:
    """S(w, z) from the integral of (1-g)^(-N-1/2) (1-g/2)^(2N-1) over g in [0, 1 - w conj(z)].

    With s = 1 - g = exp(zeta) the integral runs in the zeta plane from log u
    (u = w conj(z), principal log) straight to log|u|, then along the real
    axis to 0. In the s plane that is the arc |s| = |u| followed by the
    radial segment to 1, so the path keeps distance |u| from g = 1 and never
    crosses the cut. Each piece is scaled by the largest modulus of its
    integrand; a combined error estimate above INTEGRAL_ERR_LIMIT of that
    scale raises QuadratureFailure.
    """
    n = _check_n(n)
    w, z = complex(w), complex(z)
    rw, rz = _check_point(w), _check_point(z)
    log_a = _log_g(rw, n) + _log_g(rz, n)
    if log_a.real == -math.inf:
        return 0j
    log_u = complex(np.log(w)) + complex(np.log(z)).conjugate()
    log_u = complex(log_u.real, SignedLogComplex.from_log(log_u).reduced_phase())
    if log_u.real < math.log(BRANCH_PROXIMITY):
        warnings.warn(f"kernel_S_integral: contour passes within {BRANCH_PROXIMITY} of gamma = 1", BranchProximity)

    def log_integrand(zeta):
        # s^(-N-1/2) ((1+s)/2)^(2N-1) ds with ds = s dzeta
        return -(n - 0.5) * zeta + (2 * n - 1) * (np.log1p(np.exp(zeta)) - math.log(2))

    corner = complex(log_u.real, 0.0)
    grid = np.linspace(0.0, 1.0, CONTOUR_GRID)
    pieces = [(p, q) for p, q in ((log_u, corner), (corner, 0j)) if p != q]
    shift = max(float(np.max(log_integrand(p + grid * (q - p)).real)) for p, q in pieces)
    value, err = 0j, 0.0
    for p, q in pieces:
        part, part_err = integrate_segment(
            lambda zeta: np.exp(log_integrand(zeta) - shift),
            p,
            q,
            abs_tol=1e-13,
            rel_tol=1e-10 if tol is None else tol,
        )
        value += part
        err += part_err
    if err > INTEGRAL_ERR_LIMIT:
        raise QuadratureFailure(
            f"kernel_S_integral at w={w}, z={z}, N={n}: error {err:.3g} of the integrand scale",
            estimate=value,
            error=err,
        )
    if value == 0:
        return 0j
    log_pref = (2 * n - 1) * math.log(2) + math.log((2 * n + 1) * n / math.pi)
    branch = _root(w, sw) * _root(z, sz).conjugate() / complex(np.exp(0.5 * log_u))
    return complex(branch * np.exp(log_a + log_pref + shift + np.log(value)))


# ==============================
# Direct Pfaffian sums
# ==============================

def _ab_vectors(x: complex, n: int, s: Optional[complex]):
    """a_j(x) and b_j(x) for j = 0..2N-1 with the root s of x."""
    eps = 1.0 if s is None else complex(s) / complex(np.sqrt(x))
    p = _monomial_powers(n)
    r = abs(x)
    a = tau(x, n) * eps / r * x**p
    b = tau(1 / x.conjugate(), n) / eps.conjugate() / r * (1 / x.conjugate()) ** p
    return a, b


def kernel_direct(x: complex, y: complex, n: int, sx=None, sy=None) -> Tuple[complex, complex, complex]:
    """(D, S, I) at (x, y) from the a_j / b_j sums; plain arithmetic, moderate N only."""
    n = _check_n(n)
    x, y = complex(x), complex(y)
    _check_point(x)
    _check_point(y)
    inv_h = 1 / ensemble_constants(n).h
    ax, bx = _ab_vectors(x, n, sx)
    ay, by = _ab_vectors(y, n, sy)

    def pair_sum(u, v):
        return -1j * complex(np.sum(inv_h * (u[0::2] * v[1::2] - u[1::2] * v[0::2])))

    return pair_sum(ax, ay), pair_sum(ax, by), pair_sum(bx, by)


def kernel_D_direct(x: complex, y: complex, n: int, sx=None, sy=None) -> complex:
    return kernel_direct(x, y, n, sx, sy)[0]


def kernel_I_direct(x: complex, y: complex, n: int, sx=None, sy=None) -> complex:
    return kernel_direct(x, y, n, sx, sy)[2]


@dataclass(frozen=True)
class KernelBlock:
    """2x2 block [[D(x,y), S(x,y)], [-S(y,x), I(x,y)]]."""

    d: complex
    s: complex
    s_rev: complex
    i: complex

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.d, self.s], [-self.s_rev, self.i]], dtype=complex)


def kernel_block(x: complex, y: complex, n: int, sx=None, sy=None) -> KernelBlock:
    n = _check_n(n)
    x, y = complex(x), complex(y)
    return KernelBlock(
        d=_kernel_d(x, y, n, sx, sy),
        s=_kernel_s(x, y, n, sx, sy),
        s_rev=_kernel_s(y, x, n, sy, sx),
        i=_kernel_i(x, y, n, sx, sy),
    )


def kernel_matrix(points: Sequence[complex], n: int, roots: Optional[Sequence[complex]] = None) -> np.ndarray:
    """The 2k x 2k matrix of blocks K_N(w_l, w_m)."""
    pts = np.asarray(points, dtype=complex).ravel()
    k = pts.size
    rts = [None] * k if roots is None else [complex(s) for s in roots]
    out = np.empty((2 * k, 2 * k), dtype=complex)
    for l in range(k):
        for m in range(k):
            out[2 * l : 2 * l + 2, 2 * m : 2 * m + 2] = kernel_block(pts[l], pts[m], n, rts[l], rts[m]).as_matrix()
    return out


def rho_n_complex(points: Sequence[complex], n_dim: int, roots: Optional[Sequence[complex]] = None) -> complex:
    """Pf[K_N(w_l, w_m)] before discarding its (vanishing) imaginary part."""
    n_dim = _check_n(n_dim)
    pts = np.asarray(points, dtype=complex).ravel()
    if not 1 <= pts.size <= n_dim:
        raise DomainError(f"rho_n needs between 1 and N={n_dim} points, got {pts.size}")
    r = np.abs(pts)
    if np.any((r <= 0) | (r >= 1)):
        raise DomainError("rho_n: every point needs 0 < |w| < 1")
    k = kernel_matrix(pts, n_dim, roots)
    check_skew(k, SKEW_TOL)
    return pfaffian(k, SKEW_TOL)


def rho_n(points: Sequence[complex], n_dim: int, roots: Optional[Sequence[complex]] = None) -> float:
    """n-point correlation function rho_(n)(w_1, ..., w_n) = Pf[K_N(w_l, w_m)]."""
    return float(rho_n_complex(points, n_dim, roots).real)


def rho_2(w: complex, z: complex, n_dim: int) -> float:
    """rho_(2)(w, z) on the closed disk; 0 for N = 1 and when either point is on the unit circle."""
    n_dim = _check_n(n_dim)
    check_disk([w, z], KERNEL_DISK_TOL)
    if n_dim < 2 or abs(w) >= 1 or abs(z) >= 1:
        return 0.0
    return rho_n([w, z], n_dim)


# ==============================
# Density and limits
# ==============================

def _density_scalar(r: float, n: int) -> float:
    if r == 0:
        return 2 * n * (2 * n + 1) / (math.pi * (2 * n - 1))
    if r >= 1:
        return 0.0
    log_val = 2 * _log_g(r, n).real + math.log(r) + _log_prefactor(n) + _log_sigma_sum(complex(2 * math.log(r)), n).real
    return math.exp(log_val)


def density(w, n: int):
    """Eigenvalue density S(w, w); depends on r = |w| only."""
    n = _check_n(n)
    r = np.abs(np.asarray(w, dtype=complex))
    check_disk(r, KERNEL_DISK_TOL)
    out = np.array([_density_scalar(float(x), n) for x in r.ravel()]).reshape(r.shape)
    return float(out) if out.ndim == 0 else out


def density_limit(w, n: int):
    """Large-N form 2N / (pi (1 + r^2)^2)."""
    n = _check_n(n)
    r = np.abs(np.asarray(w, dtype=complex))
    out = 2 * n / (math.pi * (1 + r * r) ** 2)
    return float(out) if out.ndim == 0 else out


def scaled_S(W, Z):
    """Bulk limit (4 pi / i) (Y B)^(1/2) exp(-2 pi (Y^2 + B^2)) erf(sqrt(pi) (W - conj(Z)))."""
    W = np.asarray(W, dtype=complex)
    Z = np.asarray(Z, dtype=complex)
    if np.any(W.imag < 0) or np.any(Z.imag < 0):
        raise DomainError("scaled_S needs Im W >= 0 and Im Z >= 0")
    amp = np.sqrt(W.imag * Z.imag) * np.exp(-2 * math.pi * (W.imag**2 + Z.imag**2))
    out = -4j * math.pi * amp * erf_complex(math.sqrt(math.pi) * (W - Z.conj()))
    out = np.asarray(out)
    return complex(out) if out.ndim == 0 else out


def scaled_density(Y):
    """Scaled density 16 pi Y^2 exp(-4 pi Y^2) int_0^1 exp(4 pi Y^2 u^2) du, via Dawson's integral."""
    Y = np.asarray(Y, dtype=float)
    if np.any(Y < 0):
        raise DomainError("scaled_density needs Y >= 0")
    out = 8 * math.sqrt(math.pi) * Y * special.dawsn(2 * math.sqrt(math.pi) * Y)
    return float(out) if out.ndim == 0 else out


def zoom_point(W: complex, n: int) -> complex:
    """w = 1 + 2 i W sqrt(pi / N), the disk point near lambda = 0."""
    return 1 + 2j * complex(W) * math.sqrt(math.pi / n)


def finite_N_scaled_S(W, Z, n: int):
    """(4 pi / N) S(w, z) at the zoomed points w, z; tends to scaled_S(W, Z)."""
    n = _check_n(n)

    def one(a: complex, b: complex, n: int) -> complex:
        if a.imag < 0 or b.imag < 0:
            raise DomainError("finite_N_scaled_S needs Im W >= 0 and Im Z >= 0")
        if a.imag == 0 or b.imag == 0:
            return 0j
        w, z = zoom_point(a, n), zoom_point(b, n)
        if abs(w) >= 1 or abs(z) >= 1:
            raise DomainError(f"zoomed point leaves the disk at N={n}; increase N")
        return 4 * math.pi / n * _kernel_s(w, z, n)

    return _map_pairs(one, W, Z, n)
