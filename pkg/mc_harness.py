"""
Monte Carlo batches and theory-vs-simulation comparisons.

run_batch draws spectra in parallel, radial_histogram / compare_to_theory
bin |w| against the bin-averaged finite-N density, and the CHECKS registry
holds the acceptance checks behind `cli.py verify` and POST /verify.
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy import stats

import correlation_analytics as ca
import sampler
from config import EnsembleConfig, make_config, max_threads
from errors import BatchFailure, DomainError, EmptyHistogram, PairingFailure, QSphereError
from numerics import integrate_1d, integrate_disk, pfaffian

logger = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.01
MIN_BINS = 5
WITHIN_3SE_TARGET = 0.95
CHI2_PER_DOF_RANGE = (0.5, 1.7)
ANGULAR_MIN_P = 1e-3
REPORT_SCHEMA_VERSION = 1


# ==============================
# Batch runner
# ==============================

def run_batch(cfg: EnsembleConfig, threads: Optional[int] = None) -> List[sampler.SpectrumSample]:
    """cfg.count independent draws, merged by draw_index.

    Failed draws are logged and collected; more than 1% of them aborts the
    batch with BatchFailure.
    """
    workers = max(1, min(threads or max_threads(), cfg.count))
    logger.info(f"🚀 batch: beta={cfg.beta} n={cfg.n} count={cfg.count} seed={cfg.master_seed} workers={workers}")
    started = time.perf_counter()
    results: Dict[int, sampler.SpectrumSample] = {}
    failures = []
    step = max(1, cfg.count // 10)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(sampler.run_draw, cfg, k): k for k in range(cfg.count)}
        for done, future in enumerate(as_completed(futures), start=1):
            k = futures[future]
            try:
                results[k] = future.result()
            except QSphereError as e:
                logger.error(f"❌ draw {k} failed: {e}")
                failures.append({"draw_index": k, "error": type(e).__name__, "message": str(e)})
            if done % step == 0:
                logger.info(f"   {done}/{cfg.count} draws")

    if len(failures) > MAX_FAILURE_RATE * cfg.count:
        raise BatchFailure(f"{len(failures)} of {cfg.count} draws failed", failures=failures)
    resamples = sum(s.resample_count for s in results.values())
    logger.info(
        f"✅ batch done in {time.perf_counter() - started:.1f}s "
        f"({len(failures)} failed, {resamples} resamples)"
    )
    return [results[k] for k in sorted(results)]


# ==============================
# Radial histogram
# ==============================

@dataclass(frozen=True)
class RadialHistogram:
    edges: np.ndarray
    counts: np.ndarray
    total_eigs: int
    n: int
    draws: int

    @property
    def bins(self):
        return [(float(lo), float(hi), int(c)) for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts)]

    @property
    def area(self) -> np.ndarray:
        return math.pi * (self.edges[1:] ** 2 - self.edges[:-1] ** 2)

    @property
    def empirical_density(self) -> np.ndarray:
        """count / (draws * area); sums against area to N."""
        return self.counts / (self.draws * self.area)

    @property
    def empirical_density_over_n(self) -> np.ndarray:
        return self.empirical_density / self.n


def histogram_from_moduli(moduli: np.ndarray, n: int, draws: int, n_bins: int) -> RadialHistogram:
    if n_bins < MIN_BINS:
        raise DomainError(f"need at least {MIN_BINS} bins, got {n_bins}")
    moduli = np.clip(np.asarray(moduli, dtype=float).ravel(), 0.0, 1.0)
    if moduli.size == 0 or draws < 1:
        raise EmptyHistogram("no eigenvalues to histogram")
    counts, edges = np.histogram(moduli, bins=n_bins, range=(0.0, 1.0))
    return RadialHistogram(edges=edges, counts=counts, total_eigs=int(counts.sum()), n=n, draws=draws)


def radial_histogram(samples: Sequence[sampler.SpectrumSample], n_bins: int) -> RadialHistogram:
    """Equal-width bins of |w| on [0, 1]; boundary points up to pair_tol are clipped in."""
    if not samples:
        raise EmptyHistogram("no samples to histogram")
    n = samples[0].n
    moduli = np.concatenate([np.abs(s.ws) for s in samples])
    return histogram_from_moduli(moduli, n, len(samples), n_bins)


def angular_uniformity(samples: Sequence[sampler.SpectrumSample], n_bins: int = 16):
    """Pearson chi^2 of arg(w) over equal angle bins, with its degrees of freedom."""
    if not samples:
        raise EmptyHistogram("no samples for the angular test")
    angles = np.concatenate([np.angle(s.ws) for s in samples])
    counts, _ = np.histogram(angles, bins=n_bins, range=(-math.pi, math.pi))
    chi2 = stats.chisquare(counts).statistic
    return float(chi2), n_bins - 1


def angular_summary(samples: Sequence[sampler.SpectrumSample], n_bins: int = 16) -> dict:
    chi2, dof = angular_uniformity(samples, n_bins)
    p_value = float(stats.chi2.sf(chi2, dof))
    return {"chi2": chi2, "dof": dof, "p_value": p_value, "passed": p_value >= ANGULAR_MIN_P}


# ==============================
# Theory comparison
# ==============================

@dataclass(frozen=True)
class ComparisonReport:
    edges: np.ndarray
    empirical: np.ndarray
    theory: np.ndarray
    std_error: np.ndarray
    z_score: np.ndarray
    sup_z: float
    frac_within_3se: float
    chi2: float
    dof: int

    @property
    def chi2_per_dof(self) -> float:
        return self.chi2 / self.dof if self.dof else math.nan

    @property
    def passed(self) -> bool:
        lo, hi = CHI2_PER_DOF_RANGE
        return self.frac_within_3se >= WITHIN_3SE_TARGET and lo <= self.chi2_per_dof <= hi

    def summary(self) -> dict:
        return {
            "sup_z": self.sup_z,
            "frac_within_3se": self.frac_within_3se,
            "chi2": self.chi2,
            "dof": self.dof,
            "chi2_per_dof": self.chi2_per_dof,
            "passed": self.passed,
        }


def bin_mass(theory: Callable[[float, int], float], n: int, lo: float, hi: float) -> float:
    """Expected eigenvalues per draw with lo <= |w| < hi."""
    value, _ = integrate_1d(lambda r: 2 * math.pi * r * theory(r, n), lo, hi, abs_tol=1e-12, rel_tol=1e-10)
    return value


def compare_to_theory(
    hist: RadialHistogram, n: int, theory: Optional[Callable[[float, int], float]] = None
) -> ComparisonReport:
    """Bin-averaged theory density / N against the histogram, with Poisson errors."""
    if hist.n != n:
        raise DomainError(f"histogram was built for N={hist.n}, not N={n}")
    if hist.total_eigs == 0:
        raise EmptyHistogram("histogram has no counts")
    theory = theory or ca.density
    mass = np.array([bin_mass(theory, n, lo, hi) for lo, hi in zip(hist.edges[:-1], hist.edges[1:])])
    expected = hist.draws * mass
    scale = hist.draws * n * hist.area
    empirical = hist.counts / scale
    theory_over_n = mass / (n * hist.area)
    std_error = np.sqrt(expected) / scale
    live = expected > 0
    z = np.zeros_like(empirical)
    z[live] = (empirical[live] - theory_over_n[live]) / std_error[live]
    chi2 = float(np.sum((hist.counts[live] - expected[live]) ** 2 / expected[live]))
    return ComparisonReport(
        edges=hist.edges,
        empirical=empirical,
        theory=theory_over_n,
        std_error=std_error,
        z_score=z,
        sup_z=float(np.max(np.abs(z))),
        frac_within_3se=float(np.mean(np.abs(z[live]) <= 3)) if live.any() else 0.0,
        chi2=chi2,
        dof=int(live.sum()) - 1,
    )


# ==============================
# Analytic convergence sweep
# ==============================

@dataclass(frozen=True)
class SweepRow:
    n: int
    sup_deviation: float
    r_at_sup: float


def convergence_sweep(n_list: Iterable[int], r_max: float = 0.8, grid_points: int = 161) -> List[SweepRow]:
    """sup over r in [0, r_max] of |density/N - limit/N| for each N."""
    r = np.linspace(0.0, r_max, grid_points)
    rows = []
    for n in n_list:
        dev = np.abs(ca.density(r, n) / n - ca.density_limit(r, n) / n)
        k = int(np.argmax(dev))
        rows.append(SweepRow(int(n), float(dev[k]), float(r[k])))
    return rows


# ==============================
# Verification checks
# ==============================

@dataclass
class VerifyOptions:
    n: Optional[int] = None
    count: Optional[int] = None
    seed: int = 0
    bins: Optional[int] = None
    tol: Optional[float] = None
    threads: Optional[int] = None


@dataclass
class CheckResult:
    name: str
    target: str
    measured: Optional[float]
    passed: bool
    seconds: float = 0.0
    detail: str = ""

    def to_dict(self) -> dict:
        measured = self.measured
        if measured is not None and not math.isfinite(measured):
            measured = None
        return {
            "name": self.name,
            "target": self.target,
            "measured": measured,
            "passed": self.passed,
            "seconds": round(self.seconds, 3),
        }


@dataclass
class VerifyReport:
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> List[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "checks": [c.to_dict() for c in self.checks],
            "passed": self.passed,
        }


def _n_list(opts: VerifyOptions, default: Sequence[int]) -> List[int]:
    return [opts.n] if opts.n is not None else list(default)


def _rng(opts: VerifyOptions) -> np.random.Generator:
    return sampler.make_rng(opts.seed)


def _disk_points(rng: np.random.Generator, size: int, r_lo: float = 0.1, r_hi: float = 0.9) -> np.ndarray:
    r = rng.uniform(r_lo, r_hi, size)
    theta = rng.uniform(-math.pi, math.pi, size)
    return r * np.exp(1j * theta)


def check_normalization(opts: VerifyOptions) -> CheckResult:
    worst = 0.0
    notes = []
    n_list = _n_list(opts, range(1, 7))
    if 1 in n_list:
        total, _ = integrate_disk(
            lambda pts: np.array([ca.jpdf_w([p], 1) for p in pts]), abs_tol=1e-10, rel_tol=1e-10
        )
        worst = max(worst, abs(total.real - 1))
        notes.append(f"N=1 jpdf integral {total.real:.12f}")
    for n in n_list:
        sign, log_c = ca.log_c_n(n)
        gamma = ca.gamma_matrix_numeric(n)
        pf = pfaffian(gamma, tol=1e-8)
        value = sign * math.exp(math.lgamma(n + 1) + log_c) * pf.real
        worst = max(worst, abs(value - 1))
        notes.append(f"N={n}: {value:.12f}")
    return CheckResult("normalization", "|Z_N[1] - 1| <= 1e-6", worst, worst <= 1e-6, detail="; ".join(notes))


def check_skew_orthogonality(opts: VerifyOptions) -> CheckResult:
    worst = 0.0
    for n in _n_list(opts, range(1, 7)):
        gamma = ca.gamma_matrix_numeric(n)
        expected = np.zeros((2 * n, 2 * n))
        h = ca.ensemble_constants(n).h
        for j in range(n):
            expected[2 * j, 2 * j + 1] = h[j]
            expected[2 * j + 1, 2 * j] = -h[j]
        worst = max(worst, float(np.max(np.abs(gamma - expected))))
    for n in _n_list(opts, range(1, 11)):
        for j in range(n):
            closed = ca.skew_norm_h(j, n)
            worst = max(worst, abs(ca.radial_norm_h(j, n) - closed) / abs(closed))
    return CheckResult("skew_orthogonality", "gamma and h_j deviations <= 1e-8", worst, worst <= 1e-8)


def check_kernel_equivalence(opts: VerifyOptions) -> CheckResult:
    rng = _rng(opts)
    worst = 0.0
    for n in _n_list(opts, (1, 5, 20, 50)):
        w = _disk_points(rng, 50)
        z = _disk_points(rng, 50)
        for a, b in zip(w, z):
            scale = math.sqrt(ca.density(a, n) * ca.density(b, n))
            diff = abs(ca.kernel_S_sum(a, b, n) - ca.kernel_S_integral(a, b, n))
            worst = max(worst, diff / scale)
    return CheckResult("kernel_equivalence", "sum vs integral relative <= 1e-8", worst, worst <= 1e-8)


def check_density_normalization(opts: VerifyOptions) -> CheckResult:
    worst = 0.0
    for n in _n_list(opts, (1, 5, 25, 100, 500)):
        total = bin_mass(ca.density, n, 0.0, 1.0)
        worst = max(worst, abs(total - n) / n)
    return CheckResult("density_normalization", "|2 pi int r rho dr - N| / N <= 1e-8", worst, worst <= 1e-8)


def check_n1_closed_form(opts: VerifyOptions) -> CheckResult:
    r = np.linspace(0.0, 1.0, 401)[1:]
    exact = 6 / math.pi * (1 - r * r) ** 2 / (1 + r * r) ** 4
    worst = float(np.max(np.abs(ca.density(r, 1) - exact)))
    return CheckResult("n1_closed_form", "max |rho - closed form| <= 1e-12", worst, worst <= 1e-12)


def check_monte_carlo(opts: VerifyOptions) -> CheckResult:
    n = opts.n or 50
    count = opts.count or 2000
    bins = opts.bins or 40
    cfg = make_config(beta=4, n=n, count=count, master_seed=opts.seed)
    samples = run_batch(cfg, opts.threads)
    report = compare_to_theory(radial_histogram(samples, bins), n)
    angular = angular_summary(samples)
    control_cfg = make_config(beta=4, n=5, count=count, master_seed=opts.seed)
    control = compare_to_theory(
        radial_histogram(run_batch(control_cfg, opts.threads), bins), 5, theory=ca.density_limit
    )
    passed = report.passed and control.sup_z > 5 and angular["passed"]
    detail = (
        f"chi2/dof {report.chi2_per_dof:.3f}, control sup_z {control.sup_z:.1f}, "
        f"angular chi2 {angular['chi2']:.1f} on {angular['dof']} dof (p {angular['p_value']:.3g})"
    )
    return CheckResult(
        "monte_carlo",
        f">= 95% bins within 3 SE, chi2/dof in [0.5, 1.7], control sup_z > 5, angular p >= {ANGULAR_MIN_P}",
        report.frac_within_3se,
        passed,
        detail=detail,
    )


def check_pairing(opts: VerifyOptions) -> CheckResult:
    n = opts.n or 10
    count = opts.count or 1000
    cfg = make_config(beta=4, n=n, count=count, master_seed=opts.seed, pair_tol=opts.tol)
    failures = 0
    worst = 0.0
    for k in range(count):
        draw = sampler.sample_spherical(cfg, k)
        eigs = sampler.eigenvalues(draw.y)
        try:
            result = sampler.match_conjugate_pairs(eigs, cfg.pair_tol)
        except PairingFailure:
            failures += 1
            continue
        worst = max(worst, result.max_residual / float(np.max(np.abs(eigs))))
    passed = failures == 0 and worst <= 1e-8
    return CheckResult(
        "pairing", "zero failures, residual <= 1e-8 * scale", worst, passed, detail=f"{failures} failures"
    )


def check_pfaffian(opts: VerifyOptions) -> CheckResult:
    rng = _rng(opts)
    det_err = rho1_err = rho2_err = 0.0
    for size in range(2, 17, 2):
        a = rng.standard_normal((size, size))
        m = a - a.T
        pf = pfaffian(m)
        det = np.linalg.det(m)
        det_err = max(det_err, abs(pf * pf - det) / abs(det))
    n = opts.n or 10
    for w in _disk_points(rng, 10):
        rho = ca.density(w, n)
        rho1_err = max(rho1_err, abs(ca.rho_n([w], n) - rho) / rho)
        if n >= 2:
            rho2_err = max(rho2_err, abs(ca.rho_n_complex([w, w], n)) / rho**2)
    passed = det_err <= 1e-8 and rho1_err <= 1e-10 and rho2_err <= 1e-8
    detail = f"Pf^2 vs det {det_err:.2e}, rho_1 {rho1_err:.2e}, rho_2(w, w) {rho2_err:.2e}"
    return CheckResult(
        "pfaffian",
        "Pf^2 = det to 1e-8, rho_1 = density to 1e-10, rho_2(w, w) <= 1e-8",
        max(det_err, rho1_err, rho2_err),
        passed,
        detail=detail,
    )


def check_spherical_limit(opts: VerifyOptions) -> CheckResult:
    rows = convergence_sweep((25, 50, 100, 200))
    devs = [row.sup_deviation for row in rows]
    decreasing = all(b < a for a, b in zip(devs, devs[1:]))
    passed = decreasing and devs[-1] < 0.02
    return CheckResult("spherical_limit", "decreasing, < 0.02 at N=200", devs[-1], passed)


def _scaled_error(W: complex, Z: complex, n: int) -> float:
    exact = ca.scaled_S(W, Z)
    return abs(ca.finite_N_scaled_S(W, Z, n) - exact) / abs(exact)


def check_scaled_limit(opts: VerifyOptions) -> CheckResult:
    rng = _rng(opts)
    notes = []
    near = _scaled_error(0.3j, 0.3j, 2000)
    ok = near <= 0.08
    notes.append(f"N=2000 at 0.3i: {near:.4f}")
    W = rng.uniform(-0.3, 0.3, 20) + 1j * rng.uniform(0.2, 1.0, 20)
    Z = rng.uniform(-0.3, 0.3, 20) + 1j * rng.uniform(0.2, 1.0, 20)
    far = max(_scaled_error(a, b, 10**6) for a, b in zip(W, Z))
    ok = ok and far <= 0.05
    notes.append(f"N=1e6 worst: {far:.4f}")
    trend = [_scaled_error(0.3j, 0.3j, n) for n in (250, 1000, 4000)]
    ok = ok and all(b < a for a, b in zip(trend, trend[1:]))
    bulk = abs(ca.scaled_density(3.0) - 2) / 2
    ok = ok and bulk <= 0.01 and ca.scaled_density(0.0) == 0
    return CheckResult("scaled_limit", "relative error <= 5% at N=1e6, decreasing in N", far, ok, detail="; ".join(notes))


def check_branch_invariance(opts: VerifyOptions) -> CheckResult:
    rng = _rng(opts)
    n = opts.n or 10
    worst = 0.0
    for k in range(20):
        size = 2 + k % 2
        pts = _disk_points(rng, size)
        scale = float(np.prod([ca.density(p, n) for p in pts]))
        value = ca.rho_n_complex(pts, n)
        flips = np.where(rng.integers(0, 2, size) == 1, -1.0, 1.0)
        flips[0] = -1.0
        roots = flips * np.sqrt(pts)
        flipped = ca.rho_n_complex(pts, n, roots=roots)
        worst = max(worst, abs(value.imag) / scale, abs(flipped - value) / scale)
    return CheckResult("branch_invariance", "Im rho_n and branch change <= 1e-8 * scale", worst, worst <= 1e-8)


CHECKS: Dict[str, Callable[[VerifyOptions], CheckResult]] = {
    "normalization": check_normalization,
    "skew_orthogonality": check_skew_orthogonality,
    "kernel_equivalence": check_kernel_equivalence,
    "density_normalization": check_density_normalization,
    "n1_closed_form": check_n1_closed_form,
    "monte_carlo": check_monte_carlo,
    "pairing": check_pairing,
    "pfaffian": check_pfaffian,
    "spherical_limit": check_spherical_limit,
    "scaled_limit": check_scaled_limit,
    "branch_invariance": check_branch_invariance,
}


def run_checks(names: Optional[Sequence[str]] = None, opts: Optional[VerifyOptions] = None) -> VerifyReport:
    """Run the named checks (all by default); a raised QSphereError fails that check."""
    opts = opts or VerifyOptions()
    names = list(names) if names else list(CHECKS)
    unknown = [name for name in names if name not in CHECKS]
    if unknown:
        raise DomainError(f"unknown check(s): {', '.join(unknown)}; known: {', '.join(CHECKS)}")
    report = VerifyReport()
    for name in names:
        started = time.perf_counter()
        try:
            result = CHECKS[name](opts)
        except QSphereError as e:
            logger.error(f"❌ check {name} raised {type(e).__name__}: {e}")
            result = CheckResult(name, "no error", None, False, detail=str(e))
        result.seconds = time.perf_counter() - started
        mark = "✅" if result.passed else "❌"
        logger.info(f"{mark} {name}: measured={result.measured} target={result.target} ({result.seconds:.1f}s)")
        report.checks.append(result)
    return report
