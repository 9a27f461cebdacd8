"""
Seeded draws from the spherical ensembles Y = A^-1 B and their spectra.

Every draw is fully determined by (master_seed, draw_index, attempt): the
three integers are fed to a numpy SeedSequence and the normals come from a
PCG64 generator, so a batch run reproduces bit for bit whatever the order
or parallelism of its draws.
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np
import scipy.linalg

import quaternion_core as qc
from config import EnsembleConfig
from errors import DomainError, EigensolverFailure, PairingFailure, SolveFailure
from moebius_transforms import DISK_TOL, check_disk, flt_lambda_to_w

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 8
SOLVE_RESIDUAL_TOL = 1e-9


# ==============================
# Random sources
# ==============================

def seed_sequence(master_seed: int, draw_index: int, attempt: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), int(draw_index), int(attempt)])


def make_rng(seed: Union[int, np.random.SeedSequence]) -> np.random.Generator:
    """PCG64 generator; normals use numpy's ziggurat method."""
    return np.random.Generator(np.random.PCG64(seed))


def seed_value(seq: np.random.SeedSequence) -> int:
    """64-bit digest of a seed sequence, reported as seed_used."""
    return int(seq.generate_state(1, np.uint64)[0])


def sample_gaussian_quaternion(n: int, seed: Union[int, np.random.Generator]) -> qc.QuaternionMatrix:
    """N x N matrix with 4N^2 iid standard normal components."""
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    return qc.random_quaternion_matrix(n, rng)


def _gaussian_matrix(beta: int, n: int, rng: np.random.Generator) -> np.ndarray:
    if beta == 1:
        return rng.standard_normal((n, n))
    if beta == 2:
        return (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    return qc.embed(sample_gaussian_quaternion(n, rng))


# ==============================
# Spherical matrices
# ==============================

@dataclass(frozen=True)
class SphericalDraw:
    y: np.ndarray
    seed_used: int
    attempt: int
    resample_count: int
    cond_estimate: float
    solve_residual: float


def sample_spherical(cfg: EnsembleConfig, draw_index: int, first_attempt: int = 0) -> SphericalDraw:
    """Draw A then B and solve A Y = B.

    Draws whose A has condition number above cfg.cond_limit are replaced by
    the next attempt's sub-seed.
    """
    for attempt in range(first_attempt, first_attempt + MAX_ATTEMPTS):
        seq = seed_sequence(cfg.master_seed, draw_index, attempt)
        rng = make_rng(seq)
        a = _gaussian_matrix(cfg.beta, cfg.n, rng)
        b = _gaussian_matrix(cfg.beta, cfg.n, rng)
        cond = float(np.linalg.cond(a))
        if not np.isfinite(cond) or cond > cfg.cond_limit:
            logger.warning(f"⚠️ draw {draw_index}: cond(A) = {cond:.3e} above limit, resampling")
            continue
        try:
            y = scipy.linalg.solve(a, b)
        except (scipy.linalg.LinAlgError, ValueError) as e:
            logger.warning(f"⚠️ draw {draw_index}: solve failed ({e}), resampling")
            continue
        b_norm = np.linalg.norm(b, np.inf)
        residual = float(np.linalg.norm(a @ y - b, np.inf) / b_norm)
        if residual > SOLVE_RESIDUAL_TOL:
            logger.warning(f"⚠️ draw {draw_index}: solve residual {residual:.3e}, resampling")
            continue
        return SphericalDraw(
            y=y,
            seed_used=seed_value(seq),
            attempt=attempt,
            resample_count=attempt - first_attempt,
            cond_estimate=cond,
            solve_residual=residual,
        )
    raise SolveFailure(f"draw {draw_index}: no well-conditioned A after {MAX_ATTEMPTS} attempts")


def eigenvalues(y: np.ndarray) -> np.ndarray:
    """All eigenvalues of a square matrix, unordered (LAPACK geev)."""
    y = np.asarray(y)
    if y.ndim != 2 or y.shape[0] != y.shape[1]:
        raise EigensolverFailure(f"eigenvalues needs a square matrix, got shape {y.shape}")
    try:
        vals = scipy.linalg.eigvals(y)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise EigensolverFailure(f"eigensolver failed: {e}") from e
    return np.asarray(vals, dtype=complex)


# ==============================
# Conjugate pairing
# ==============================

class PairingResult(NamedTuple):
    representatives: np.ndarray
    max_residual: float
    on_axis: int


def _sort_re_im(values: np.ndarray) -> np.ndarray:
    return values[np.lexsort((values.imag, values.real))]


def match_conjugate_pairs(eigs: Sequence[complex], pair_tol: float) -> PairingResult:
    """Greedy nearest-conjugate matching after sorting by real part.

    Each eigenvalue takes the unused eigenvalue closest to its conjugate
    among those whose real part lies within the tolerance window.
    """
    vals = np.asarray(eigs, dtype=complex).ravel()
    if vals.size % 2:
        raise PairingFailure(f"odd number of eigenvalues ({vals.size}) cannot pair")
    vals = vals[np.lexsort((np.abs(vals.imag), vals.real))]
    reals = vals.real
    used = np.zeros(vals.size, dtype=bool)
    reps = []
    max_residual = 0.0
    on_axis = 0
    for i in range(vals.size):
        if used[i]:
            continue
        used[i] = True
        target = vals[i].conjugate()
        window = pair_tol * max(1.0, abs(vals[i]))
        lo = np.searchsorted(reals, target.real - window, side="left")
        hi = np.searchsorted(reals, target.real + window, side="right")
        candidates = [k for k in range(lo, hi) if not used[k]]
        if not candidates:
            raise PairingFailure(f"no conjugate partner for eigenvalue {vals[i]:.6g}", residual=float("inf"))
        best = min(candidates, key=lambda k: abs(vals[k] - target))
        residual = float(abs(vals[best] - target))
        if residual > window:
            raise PairingFailure(
                f"pairing residual {residual:.3e} above {window:.3e} at eigenvalue {vals[i]:.6g}", residual=residual
            )
        used[best] = True
        max_residual = max(max_residual, residual)
        rep = vals[i] if vals[i].imag >= vals[best].imag else vals[best]
        if rep.imag <= 0:
            rep = complex(rep.real, abs(rep.imag))
            on_axis += 1
        reps.append(rep)
    return PairingResult(_sort_re_im(np.array(reps, dtype=complex)), max_residual, on_axis)


def pair_reduce(eigs: Sequence[complex], pair_tol: float) -> np.ndarray:
    """One upper half-plane representative per conjugate pair, sorted by (Re, Im)."""
    return match_conjugate_pairs(eigs, pair_tol).representatives


# ==============================
# One draw
# ==============================

@dataclass(frozen=True)
class SpectrumSample:
    n: int
    beta: int
    draw_index: int
    seed_used: int
    lambdas: np.ndarray
    ws: np.ndarray
    resample_count: int
    cond_estimate: float
    max_pair_residual: float = 0.0
    on_axis: int = 0

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "beta": self.beta,
            "draw_index": self.draw_index,
            "seed_used": self.seed_used,
            "lambdas": [[float(z.real), float(z.imag)] for z in self.lambdas],
            "ws": [[float(z.real), float(z.imag)] for z in self.ws],
            "resample_count": self.resample_count,
            "cond_estimate": self.cond_estimate,
            "max_pair_residual": self.max_pair_residual,
            "on_axis": self.on_axis,
        }


def run_draw(cfg: EnsembleConfig, draw_index: int) -> SpectrumSample:
    """Sample, eigensolve, pair (beta = 4) and map to the disk.

    For beta = 1, 2 all N eigenvalues are kept, sorted by (Re, Im).
    A pairing failure, or a beta = 4 disk image outside |w| <= 1 + tol,
    discards the draw and moves on to the next attempt.
    """
    attempt = 0
    resamples = 0
    last_error = None
    for _ in range(MAX_ATTEMPTS):
        draw = sample_spherical(cfg, draw_index, first_attempt=attempt)
        resamples += draw.resample_count
        eigs = eigenvalues(draw.y)
        if cfg.beta != 4:
            lambdas = _sort_re_im(eigs)
            pairing = PairingResult(lambdas, 0.0, 0)
        else:
            try:
                pairing = match_conjugate_pairs(eigs, cfg.pair_tol)
            except PairingFailure as e:
                logger.warning(f"⚠️ draw {draw_index}: {e}, resampling")
                last_error = e
                attempt = draw.attempt + 1
                resamples += 1
                continue
        ws = np.asarray(flt_lambda_to_w(pairing.representatives), dtype=complex).reshape(-1)
        if cfg.beta == 4:
            try:
                check_disk(ws, max(DISK_TOL, cfg.pair_tol))
            except DomainError as e:
                logger.warning(f"⚠️ draw {draw_index}: {e}, resampling")
                last_error = e
                attempt = draw.attempt + 1
                resamples += 1
                continue
        for arr in (pairing.representatives, ws):
            arr.setflags(write=False)
        logger.debug(f"draw {draw_index}: seed {draw.seed_used}, cond {draw.cond_estimate:.3e}")
        return SpectrumSample(
            n=cfg.n,
            beta=cfg.beta,
            draw_index=draw_index,
            seed_used=draw.seed_used,
            lambdas=pairing.representatives,
            ws=ws,
            resample_count=resamples,
            cond_estimate=draw.cond_estimate,
            max_pair_residual=pairing.max_residual,
            on_axis=pairing.on_axis,
        )
    raise PairingFailure(f"draw {draw_index}: pairing failed {MAX_ATTEMPTS} times", residual=getattr(last_error, "residual", None))
