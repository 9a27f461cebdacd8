import logging
import os
from typing import List, Literal, Optional, Tuple

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

import correlation_analytics as ca
import mc_harness
from config import log_level, make_config
from errors import QSphereError

logger = logging.getLogger(__name__)

VERSION = "1.0.0"

# draws per /sample request; larger batches belong to the CLI
MAX_SERVICE_DRAWS = 50
MAX_SERVICE_N = 200

DEFAULT_SERVICE_CHECKS = ["n1_closed_form", "density_normalization", "spherical_limit"]

app = FastAPI(title="qsphere", version=VERSION)


def _http_error(e: QSphereError) -> HTTPException:
    print(f"❌ {type(e).__name__}: {e}")
    return HTTPException(status_code=e.status_code, detail=f"{type(e).__name__}: {e}")


def _pair(z: complex) -> List[float]:
    return [float(z.real), float(z.imag)]


@app.on_event("startup")
async def startup_event():
    logging.basicConfig(level=log_level())
    print(f"🚀 Starting qsphere service v{VERSION}...")


@app.get("/health")
async def health_check():
    return {"status": "ok", "service": "qsphere", "version": VERSION}


# ==============================
# Analytic endpoints
# ==============================

class DensityRequest(BaseModel):
    n: int = Field(..., ge=1)
    r: Optional[List[float]] = None
    grid: int = Field(400, ge=2, le=10_000)


@app.post("/density")
def density(data: DensityRequest):
    r = np.asarray(data.r, dtype=float) if data.r else np.linspace(0.0, 1.0, data.grid + 1)[1:]
    try:
        rho = ca.density(r, data.n)
    except QSphereError as e:
        raise _http_error(e)
    rho = np.atleast_1d(rho)
    limit = np.atleast_1d(ca.density_limit(r, data.n))
    return {
        "n": data.n,
        "r": r.tolist(),
        "rho": rho.tolist(),
        "rho_over_N": (rho / data.n).tolist(),
        "rho_limit_over_N": (limit / data.n).tolist(),
    }


class KernelRequest(BaseModel):
    n: int = Field(..., ge=1)
    points: List[Tuple[float, float]] = Field(..., min_length=1, max_length=50)
    integral: bool = True


@app.post("/kernel")
def kernel(data: KernelRequest):
    pts = [complex(re, im) for re, im in data.points]
    pairs = []
    try:
        for a in range(len(pts)):
            for b in range(a, len(pts)):
                block = ca.kernel_block(pts[a], pts[b], data.n)
                entry = {
                    "i": a,
                    "j": b,
                    "S": _pair(block.s),
                    "D": _pair(block.d),
                    "I": _pair(block.i),
                    "rho_2": ca.rho_2(pts[a], pts[b], data.n),
                }
                if data.integral:
                    entry["S_integral"] = _pair(ca.kernel_S_integral(pts[a], pts[b], data.n))
                pairs.append(entry)
    except QSphereError as e:
        raise _http_error(e)
    return {"n": data.n, "pairs": pairs}


# ==============================
# Sampling and verification
# ==============================

class SampleRequest(BaseModel):
    beta: Literal[1, 2, 4] = 4
    n: int = Field(10, ge=1, le=MAX_SERVICE_N)
    count: int = Field(1, ge=1, le=MAX_SERVICE_DRAWS)
    seed: Optional[int] = Field(None, ge=0, lt=2**64)


@app.post("/sample")
def sample(data: SampleRequest):
    try:
        cfg = make_config(beta=data.beta, n=data.n, count=data.count, master_seed=data.seed)
        samples = mc_harness.run_batch(cfg)
    except QSphereError as e:
        raise _http_error(e)
    return {"seed": cfg.master_seed, "samples": [s.to_dict() for s in samples]}


class VerifyRequest(BaseModel):
    checks: List[str] = Field(default_factory=lambda: list(DEFAULT_SERVICE_CHECKS))
    n: Optional[int] = Field(None, ge=1)
    seed: int = Field(0, ge=0)


@app.post("/verify")
def verify(data: VerifyRequest):
    opts = mc_harness.VerifyOptions(n=data.n, seed=data.seed)
    try:
        report = mc_harness.run_checks(data.checks, opts)
    except QSphereError as e:
        raise _http_error(e)
    return report.to_dict()


if __name__ == "__main__":
    import uvicorn

    port = int(os.environ.get("PORT", 10000))
    uvicorn.run(app, host="0.0.0.0", port=port)
