"""
Command-line front end: sample, density, kernel, hist, verify.

Every command logs its resolved configuration (seed included) and writes
CSV files with a header row, fixed column order, 17 significant digits and
LF line endings. Failures are logged and turned into exit code 1.

    python cli.py sample --beta 4 --n 100 --count 120 --seed 7 --out runs/fig2
    python cli.py verify --check normalization --n 5
"""
import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path
from typing import Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

import correlation_analytics as ca
import mc_harness
from config import default_out_dir, log_level, make_config
from errors import ConfigError, DomainError, QSphereError
from moebius_transforms import stereographic

logger = logging.getLogger(__name__)

DENSITY_GRID = 400


class CliConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    subcommand: Literal["sample", "density", "kernel", "hist", "verify"]
    beta: Literal[1, 2, 4] = 4
    n: Optional[int] = Field(None, ge=1)
    count: Optional[int] = Field(None, ge=1)
    seed: Optional[int] = Field(None, ge=0, lt=2**64)
    bins: Optional[int] = Field(None, ge=mc_harness.MIN_BINS)
    tol: Optional[float] = Field(None, gt=0)
    out_path: str = Field(default_factory=default_out_dir)
    points: List[Tuple[float, float]] = Field(default_factory=list)
    checks: List[str] = Field(default_factory=list)
    format: Literal["csv"] = "csv"


# ==============================
# Output helpers
# ==============================

def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    written = 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
            written += 1
    logger.info(f"✅ wrote {written} rows to {path}")
    return written


def write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")
    logger.info(f"✅ wrote {path}")


def parse_points(text: Optional[str]) -> List[Tuple[float, float]]:
    """'re,im;re,im;...' -> list of (re, im)."""
    if not text:
        return []
    points = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 2:
            raise ConfigError(f"bad point {chunk!r}, expected 're,im'")
        try:
            points.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise ConfigError(f"bad point {chunk!r}, expected two numbers")
    return points


# ==============================
# Commands
# ==============================

SAMPLE_COLUMNS = [
    "draw_index", "eig_index", "re_lambda", "im_lambda", "re_w", "im_w", "sphere_x", "sphere_y", "sphere_z",
]


def cmd_sample(cfg: CliConfig) -> int:
    ens = make_config(beta=cfg.beta, n=cfg.n, count=cfg.count, master_seed=cfg.seed, pair_tol=cfg.tol)
    samples = mc_harness.run_batch(ens)

    def rows():
        for s in samples:
            sphere = stereographic(np.asarray(s.lambdas))
            for k, (lam, w) in enumerate(zip(s.lambdas, s.ws)):
                yield (
                    s.draw_index, k, lam.real, lam.imag, w.real, w.imag,
                    sphere.x[k], sphere.y[k], sphere.z[k],
                )

    write_csv(Path(cfg.out_path) / "samples.csv", SAMPLE_COLUMNS, rows())
    return 0


def cmd_density(cfg: CliConfig) -> int:
    n = cfg.n or 10
    r = np.linspace(0.0, 1.0, DENSITY_GRID + 1)[1:]
    rho = ca.density(r, n)
    limit = ca.density_limit(r, n)
    rows = zip(r, rho, rho / n, limit / n)
    write_csv(Path(cfg.out_path) / "density.csv", ["r", "rho", "rho_over_N", "rho_limit_over_N"], rows)
    return 0


KERNEL_COLUMNS = [
    "i", "j", "re_w1", "im_w1", "re_w2", "im_w2",
    "re_S", "im_S", "re_D", "im_D", "re_I", "im_I",
    "re_S_integral", "im_S_integral", "rho_2",
]


def cmd_kernel(cfg: CliConfig) -> int:
    n = cfg.n or 10
    if not cfg.points:
        raise DomainError("kernel needs --points 're,im;re,im;...'")
    pts = [complex(re, im) for re, im in cfg.points]
    rows = []
    for a in range(len(pts)):
        for b in range(a, len(pts)):
            w, z = pts[a], pts[b]
            block = ca.kernel_block(w, z, n)
            s_int = ca.kernel_S_integral(w, z, n, tol=cfg.tol)
            rho_2 = ca.rho_2(w, z, n)
            rows.append((
                a, b, w.real, w.imag, z.real, z.imag,
                block.s.real, block.s.imag, block.d.real, block.d.imag, block.i.real, block.i.imag,
                s_int.real, s_int.imag, rho_2,
            ))
    write_csv(Path(cfg.out_path) / "kernel.csv", KERNEL_COLUMNS, rows)
    return 0


HIST_COLUMNS = ["bin_lo", "bin_hi", "count", "empirical_density_over_N", "theory_density_over_N", "z_score"]


def cmd_hist(cfg: CliConfig) -> int:
    started = time.perf_counter()
    ens = make_config(beta=4, n=cfg.n or 50, count=cfg.count or 2000, master_seed=cfg.seed, pair_tol=cfg.tol)
    samples = mc_harness.run_batch(ens)
    hist = mc_harness.radial_histogram(samples, cfg.bins or 40)
    report = mc_harness.compare_to_theory(hist, ens.n)
    rows = zip(hist.edges[:-1], hist.edges[1:], hist.counts, report.empirical, report.theory, report.z_score)
    out = Path(cfg.out_path)
    write_csv(out / "hist.csv", HIST_COLUMNS, rows)
    check = mc_harness.CheckResult(
        "hist",
        ">= 95% bins within 3 SE, chi2/dof in [0.5, 1.7]",
        report.frac_within_3se,
        report.passed,
        time.perf_counter() - started,
    )
    doc = mc_harness.VerifyReport([check]).to_dict()
    doc["comparison"] = report.summary()
    doc["angular"] = mc_harness.angular_summary(samples)
    doc["config"] = {"n": ens.n, "count": ens.count, "seed": ens.master_seed, "bins": len(hist.counts)}
    write_json(out / "report.json", doc)
    return 0


def cmd_verify(cfg: CliConfig) -> int:
    opts = mc_harness.VerifyOptions(n=cfg.n, count=cfg.count, seed=cfg.seed or 0, bins=cfg.bins, tol=cfg.tol)
    report = mc_harness.run_checks(cfg.checks or None, opts)
    write_json(Path(cfg.out_path) / "report.json", report.to_dict())
    if report.passed:
        logger.info(f"✅ all {len(report.checks)} checks passed")
        return 0
    logger.error(f"❌ failed checks: {', '.join(report.failed)}")
    return 1


COMMANDS = {
    "sample": cmd_sample,
    "density": cmd_density,
    "kernel": cmd_kernel,
    "hist": cmd_hist,
    "verify": cmd_verify,
}


# ==============================
# Argument parsing
# ==============================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--beta", type=int, choices=(1, 2, 4), default=4, help="Dyson index")
    common.add_argument("--n", type=int, help="quaternion dimension N")
    common.add_argument("--count", type=int, help="number of draws")
    common.add_argument("--seed", type=int, help="master seed (CLI > env:QSPHERE_SEED > 0)")
    common.add_argument("--bins", type=int, help="radial histogram bins")
    common.add_argument("--tol", type=float, help="pairing / quadrature tolerance")
    common.add_argument("--out", help="output directory (CLI > env:QSPHERE_OUT > .)")
    common.add_argument("--points", help="points as 're,im;re,im;...'")
    common.add_argument("--check", action="append", default=[], help="verify only this check (repeatable)")

    parser = argparse.ArgumentParser(description="Real quaternion spherical ensemble toolkit")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("sample", parents=[common], help="sample spectra -> samples.csv")
    sub.add_parser("density", parents=[common], help="exact density -> density.csv")
    sub.add_parser("kernel", parents=[common], help="kernel S, D, I and rho_2 -> kernel.csv")
    sub.add_parser("hist", parents=[common], help="radial histogram vs theory -> hist.csv, report.json")
    sub.add_parser("verify", parents=[common], help="acceptance checks -> report.json")
    return parser


def resolve_config(args: argparse.Namespace) -> CliConfig:
    values = {
        "subcommand": args.subcommand,
        "beta": args.beta,
        "n": args.n,
        "count": args.count,
        "seed": args.seed,
        "bins": args.bins,
        "tol": args.tol,
        "out_path": args.out,
        "points": parse_points(args.points),
        "checks": args.check,
    }
    try:
        return CliConfig(**{k: v for k, v in values.items() if v is not None})
    except ValidationError as e:
        raise ConfigError(f"Invalid arguments: {e}") from e


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=log_level(), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if cfg.seed is None:
            cfg = cfg.model_copy(update={"seed": make_config().master_seed})
        logger.info(f"🚀 {cfg.subcommand}: {cfg.model_dump_json()}")
        return COMMANDS[cfg.subcommand](cfg)
    except (QSphereError, OSError) as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
