"""Experiment runners behind the command-line interface."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, TextIO

import numpy as np

from ..certificate import certificate_params
from ..instances import (InstanceSpec, build_instance, make_spec,
                         relative_error, save_instance)
from ..measurement import (circular_convolve, lift_deconvolution, make_deconvolution_instance,
                           unitary_idft)
from ..seeding import trial_seed
from ..solvers import solve
from .config import ExperimentConfig

logger = logging.getLogger(__name__)

SCHEMA_ID = "sparsedemix.phase.v1"
CSV_COLUMNS = ("schema_id", "q", "method", "trials", "successes", "mean_rel_err", "mean_iters",
               "delta", "beta", "theta", "rho", "wall_ms")


@dataclass
class CellResult:
    q: int
    method: str
    trials: int
    successes: int
    mean_rel_err: float
    mean_iters: float
    delta: float = float("nan")
    beta: float = float("nan")
    theta: float = float("nan")
    rho: float = float("nan")
    wall_ms: float = 0.0

    def __post_init__(self):
        if not 0 <= self.successes <= self.trials:
            raise ValueError("success count must lie in [0, trials]")

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials if self.trials else float("nan")

    def row(self) -> dict:
        return {"schema_id": SCHEMA_ID, "q": self.q, "method": self.method, "trials": self.trials,
                "successes": self.successes, "mean_rel_err": repr(float(self.mean_rel_err)),
                "mean_iters": repr(float(self.mean_iters)), "delta": repr(float(self.delta)),
                "beta": repr(float(self.beta)), "theta": repr(float(self.theta)),
                "rho": repr(float(self.rho)), "wall_ms": f"{self.wall_ms:.1f}"}


def trial_spec(cfg: ExperimentConfig, cell: int, trial: int) -> InstanceSpec:
    """Instance of ``trial`` in q-cell ``cell``; all methods see the same instance."""
    seed = trial_seed(cfg.seed, cell, trial)
    return make_spec(cfg.profile, cfg.q_grid[cell], cfg.sparsity, seed, frame_kind=cfg.frame_kind,
                     convention=cfg.convention, signal_kind=cfg.signal_kind, sigma=cfg.sigma)


def _run_trial(args) -> dict:
    cfg, cell, trial = args
    inst = build_instance(trial_spec(cfg, cell, trial))
    out = {"methods": {}}
    if cfg.certify:
        rep = certificate_params(inst.ensemble, inst.support, inst.Z0)
        out["cert"] = (rep.delta, rep.beta, rep.theta, rep.rho)
    for m in cfg.methods:
        rep = solve(inst.ensemble, inst.y, m, cfg.sigma, cfg.solver)
        out["methods"][m] = (relative_error(rep.solution, inst.Z0), rep.iterations,
                             rep.extras.get("wall_s", 0.0))
    return out


def _nanmean(values) -> float:
    vals = [v for v in values if not math.isnan(v)]
    return float(np.mean(vals)) if vals else float("nan")


def run_phase(cfg: ExperimentConfig, threads: int = 1) -> Iterator[CellResult]:
    """Yield one :class:`CellResult` per ``(q, method)`` in grid order."""
    pool = ProcessPoolExecutor(threads) if threads > 1 else None
    try:
        for cell, q in enumerate(cfg.q_grid):
            jobs = [(cfg, cell, t) for t in range(cfg.trials)]
            results = list(pool.map(_run_trial, jobs)) if pool else [_run_trial(j) for j in jobs]
            certs = [r["cert"] for r in results if "cert" in r]
            cert_means = [_nanmean(c[idx] for c in certs) for idx in range(4)]
            for m in cfg.methods:
                errs = [r["methods"][m][0] for r in results]
                iters = [r["methods"][m][1] for r in results]
                wall = sum(r["methods"][m][2] for r in results) * 1e3
                succ = sum(e <= cfg.success_threshold for e in errs)
                yield CellResult(q, m, len(results), succ, float(np.mean(errs)), float(np.mean(iters)),
                                 *cert_means, wall_ms=wall)
    finally:
        if pool:
            pool.shutdown(cancel_futures=True)


def write_phase_csv(cells: Iterable[CellResult], fh: TextIO) -> list[CellResult]:
    """Stream rows to ``fh``, flushing after each so interrupted runs keep partial data."""
    writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    done = []
    for c in cells:
        writer.writerow(c.row())
        fh.flush()
        done.append(c)
    return done


def read_phase_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def generate_instances(cfg: ExperimentConfig, out_dir: str | Path, embed: bool = False) -> list[Path]:
    """Write one instance file per (q, trial); names encode the cell and trial."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for cell, q in enumerate(cfg.q_grid):
        for t in range(cfg.trials):
            inst = build_instance(trial_spec(cfg, cell, t))
            p = out_dir / f"instance_q{q}_t{t:04d}.json"
            save_instance(inst, p, embed=embed)
            paths.append(p)
    return paths


# --------------------------------------------------------------------------- deconvolution demo

def _leading_pair(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """``Z ~ f g^T`` with ``||f|| = 1`` and the largest-modulus entry of ``f`` real positive."""
    U, s, Vh = np.linalg.svd(Z)
    f, g = U[:, 0], s[0] * Vh[0]
    phase = np.exp(-1j * np.angle(f[np.argmax(np.abs(f))]))
    ratio = s[1] / s[0] if s.size > 1 and s[0] > 0 else 0.0
    return f * phase, g / phase, float(ratio)


def _fit_scalar(x: np.ndarray, ref: np.ndarray) -> float:
    """Relative error of ``x`` against ``ref`` after the best complex rescaling."""
    c = np.vdot(x, ref) / max(np.vdot(x, x).real, np.finfo(float).tiny)
    return float(np.linalg.norm(c * x - ref) / max(np.linalg.norm(ref), np.finfo(float).tiny))


def deconv_demo(q: int, ks, ns, ss, seed: int = 0, frame_kind: str = "dft", impulse: bool = False,
                solver_opts=None, rank_tol: float = 1e-3) -> dict:
    """Blind deconvolution / demixing end to end: convolve, lift, solve, re-synthesize."""
    inst = make_deconvolution_instance(q, ks, ns, ss, frame_kind=frame_kind, seed=seed, impulse=impulse)
    lifted = lift_deconvolution(inst)
    rep = solve(lifted.ensemble, lifted.v_hat, "l12", 0.0, solver_opts)
    comps, v_rec = [], np.zeros(q, dtype=np.complex128)
    rank_ok = True
    for i, Zi in enumerate(rep.solution.blocks):
        f, g, ratio = _leading_pair(Zi)
        rank_ok &= ratio <= rank_tol
        w = unitary_idft(inst.B[i] @ f)
        z = unitary_idft(inst.A[i] @ g) / math.sqrt(q)
        wz = circular_convolve(w, z)
        ref = circular_convolve(inst.w[i], inst.z[i])
        v_rec = v_rec + wz
        comps.append({"component": i, "sv_ratio": ratio,
                      "w_err": _fit_scalar(w, inst.w[i]), "z_err": _fit_scalar(z, inst.z[i]),
                      "demix_err": float(np.linalg.norm(wz - ref) / max(np.linalg.norm(ref), 1e-300)),
                      "f": {"re": f.real.tolist(), "im": f.imag.tolist()}})
    return {"q": q, "ks": list(ks), "ns": list(ns), "ss": list(ss), "seed": seed, "impulse": impulse,
            "lift_residual": lifted.residual,
            "rel_err_Z": relative_error(rep.solution, lifted.Z0),
            "rel_err_v": float(np.linalg.norm(v_rec - inst.v) / np.linalg.norm(inst.v)),
            "rank_one_ok": bool(rank_ok), "solver_iterations": rep.iterations,
            "solver_converged": rep.converged, "components": comps}
