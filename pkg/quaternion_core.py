"""
Real quaternions and real quaternion matrices.

A quaternion q0 + i q1 + j q2 + k q3 is represented by the 2x2 complex block
[[a, b], [-conj(b), conj(a)]] with a = q0 + i q1, b = q2 + i q3. A matrix of
quaternions is stored as an (N, N, 4) array of components; its 2N x 2N
complex embedding is what all linear algebra works on.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from config import default_selfdual_tol
from errors import DomainError, NegativeDeterminant, NotSelfDual

logger = logging.getLogger(__name__)

# component signs of the quaternion conjugate
_CONJ = np.array([1.0, -1.0, -1.0, -1.0])


@dataclass(frozen=True)
class RealQuaternion:
    q0: float
    q1: float = 0.0
    q2: float = 0.0
    q3: float = 0.0

    @property
    def components(self) -> np.ndarray:
        return np.array([self.q0, self.q1, self.q2, self.q3], dtype=float)

    def norm2(self) -> float:
        return float(self.q0**2 + self.q1**2 + self.q2**2 + self.q3**2)

    def to_matrix(self) -> np.ndarray:
        a = complex(self.q0, self.q1)
        b = complex(self.q2, self.q3)
        return np.array([[a, b], [-b.conjugate(), a.conjugate()]], dtype=complex)

    @classmethod
    def from_matrix(cls, block: np.ndarray, tol: float = 1e-12) -> "RealQuaternion":
        block = np.asarray(block, dtype=complex)
        if block.shape != (2, 2) or not is_quaternion_embedding(block, tol):
            raise DomainError("2x2 block does not have the real quaternion pattern")
        a, b = block[0, 0], block[0, 1]
        return cls(float(a.real), float(a.imag), float(b.real), float(b.imag))


def conjugate(q: RealQuaternion) -> RealQuaternion:
    return RealQuaternion(q.q0, -q.q1, -q.q2, -q.q3)


# ==============================
# Quaternion matrices
# ==============================

@dataclass(frozen=True)
class QuaternionMatrix:
    """N x N matrix of real quaternions, components[j, k] = (q0, q1, q2, q3)."""

    components: np.ndarray

    def __post_init__(self):
        comps = np.array(self.components, dtype=float)
        if comps.ndim != 3 or comps.shape[0] != comps.shape[1] or comps.shape[2] != 4:
            raise DomainError(f"quaternion matrix needs shape (N, N, 4), got {comps.shape}")
        comps.setflags(write=False)
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return self.components.shape[0]

    def entry(self, j: int, k: int) -> RealQuaternion:
        return RealQuaternion(*(float(c) for c in self.components[j, k]))

    def __add__(self, other: "QuaternionMatrix") -> "QuaternionMatrix":
        return QuaternionMatrix(self.components + other.components)

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuaternionMatrix):
            return NotImplemented
        return np.array_equal(self.components, other.components)

    @classmethod
    def from_entries(cls, rows: Sequence[Sequence[RealQuaternion]]) -> "QuaternionMatrix":
        return cls(np.array([[q.components for q in row] for row in rows], dtype=float))

    @classmethod
    def zeros(cls, n: int) -> "QuaternionMatrix":
        return cls(np.zeros((n, n, 4)))

    @classmethod
    def identity(cls, n: int) -> "QuaternionMatrix":
        comps = np.zeros((n, n, 4))
        comps[np.arange(n), np.arange(n), 0] = 1.0
        return cls(comps)


def embed(q: QuaternionMatrix) -> np.ndarray:
    """2N x 2N complex matrix made of the 2x2 blocks of each entry."""
    c = q.components
    n = q.dim
    a = c[..., 0] + 1j * c[..., 1]
    b = c[..., 2] + 1j * c[..., 3]
    out = np.empty((2 * n, 2 * n), dtype=complex)
    out[0::2, 0::2] = a
    out[0::2, 1::2] = b
    out[1::2, 0::2] = -b.conj()
    out[1::2, 1::2] = a.conj()
    return out


def is_quaternion_embedding(m: np.ndarray, tol: float = 1e-12) -> bool:
    """True if every 2x2 block of m has the [[a, b], [-conj(b), conj(a)]] pattern."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
        return False
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    a, b = m[0::2, 0::2], m[0::2, 1::2]
    defect = max(
        float(np.max(np.abs(m[1::2, 0::2] + b.conj()), initial=0.0)),
        float(np.max(np.abs(m[1::2, 1::2] - a.conj()), initial=0.0)),
    )
    return defect <= tol * scale


def extract(m: np.ndarray, tol: float = 1e-12) -> QuaternionMatrix:
    """Inverse of embed; raises DomainError if m is not a quaternion embedding."""
    m = np.asarray(m, dtype=complex)
    if not is_quaternion_embedding(m, tol):
        raise DomainError("matrix is not a valid real quaternion embedding")
    a, b = m[0::2, 0::2], m[0::2, 1::2]
    return QuaternionMatrix(np.stack([a.real, a.imag, b.real, b.imag], axis=-1))


def dual(q: QuaternionMatrix) -> QuaternionMatrix:
    """Quaternion dual: entry (j, k) is the conjugate of entry (k, j)."""
    return QuaternionMatrix(q.components.transpose(1, 0, 2) * _CONJ)


def qtrace(q: QuaternionMatrix) -> float:
    """Sum of the scalar parts of the diagonal entries."""
    return float(np.trace(q.components[..., 0]))


def selfdual_defect(q: QuaternionMatrix) -> float:
    e = embed(q)
    scale = max(1.0, float(np.linalg.norm(e, np.inf)))
    return float(np.linalg.norm(e - e.conj().T, np.inf)) / scale


def log_qdet_selfdual(q: QuaternionMatrix, tol: Optional[float] = None) -> float:
    """log of qdet for a self-dual matrix, i.e. half the log-determinant of its embedding.

    Returns -inf for a singular matrix.
    """
    tol = default_selfdual_tol() if tol is None else tol
    defect = selfdual_defect(q)
    if defect > tol:
        raise NotSelfDual(f"matrix is not self-dual (relative defect {defect:.3e} > {tol:.1e})")
    sign, logdet = np.linalg.slogdet(embed(q))
    if sign == 0:
        return -math.inf
    if sign.real < 0:
        # negative only through roundoff on a nearly singular matrix
        if logdet > math.log(tol):
            raise NegativeDeterminant(f"det of embedding is negative ({-math.exp(logdet):.3e})")
        return -math.inf
    return 0.5 * float(logdet)


def qdet_selfdual(q: QuaternionMatrix, tol: Optional[float] = None) -> float:
    """qdet of a self-dual quaternion matrix: the nonnegative root of det(embed(q))."""
    return math.exp(log_qdet_selfdual(q, tol))


def random_quaternion_matrix(n: int, rng: np.random.Generator) -> QuaternionMatrix:
    return QuaternionMatrix(rng.standard_normal((n, n, 4)))

