"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from conftest import random_tuple
from sparsedemix.certificate import (certificate_params, error_bound, error_constants, estimate_beta,
                                     estimate_delta)
from sparsedemix.harness import ExperimentConfig, run_phase, trial_spec
from sparsedemix.instances import build_instance, make_spec, relative_error
from sparsedemix.measurement import (FrameFamily, adjoint, forward, lift_deconvolution,
                                     make_deconvolution_instance, make_frames, make_random_frame,
                                     sample_ensemble)
from sparsedemix.oracle import dense_beta, dense_delta, exhaustive_min_l12, mc_gauss_moments
from sparsedemix.solvers import NoiseModel, solve_l12_eq, solve_l12_noisy
from sparsedemix.tuples import block_soft_threshold, inner, norm_l12, subdiff_check

MASTER = 20240601
SQ5 = math.sqrt(5)


@pytest.fixture
def verdict(capsys):
    def _emit(number: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\nCRITERION {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return _emit


# --------------------------------------------------------------------------- 1

def test_criterion_01_adjoint_identity(verdict):
    t0 = time.perf_counter()
    profile = ((4, 32), (3, 24))
    worst = 0.0
    for seed in range(5):
        kind = "dft" if seed % 2 == 0 else "random"
        E = sample_ensemble(profile, make_frames(kind, 96, [4, 3], seed), "complex", seed)
        rng = np.random.default_rng(seed + 100)
        for _ in range(100):
            X = random_tuple(rng, profile)
            p = rng.standard_normal(E.q) + 1j * rng.standard_normal(E.q)
            gap = abs(np.vdot(forward(E, X), p) - inner(X, adjoint(E, p)))
            worst = max(worst, gap / (X.norm_fro() * np.linalg.norm(p)))
    dt = time.perf_counter() - t0
    verdict(1, worst <= 1e-12 and dt < 5, f"max relative gap {worst:.2e} (<= 1e-12), {dt:.2f}s")


# --------------------------------------------------------------------------- 2

def test_criterion_02_frames(verdict):
    t0 = time.perf_counter()
    dims = [(1, 1), (8, 3), (64, 4), (128, 4), (192, 4), (192, 3), (384, 4)]
    dft_res, exact = 0.0, True
    for q, k in dims:
        F = make_frames("dft", q, [k])
        dft_res = max(dft_res, F.parseval_residuals()[0])
        exact &= F.mu_minus == 1.0 and F.mu_plus == 1.0
    rnd_res = max(FrameFamily([make_random_frame(q, k, seed)]).parseval_residuals()[0]
                  for q, k in dims for seed in range(3))
    dt = time.perf_counter() - t0
    ok = dft_res <= 1e-12 and exact and rnd_res <= 1e-10 and dt < 2
    verdict(2, ok, f"DFT residual {dft_res:.1e}, mu exactly 1: {exact}, random residual {rnd_res:.1e}, {dt:.2f}s")


# --------------------------------------------------------------------------- 3

def test_criterion_03_lifting(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for t in range(20):
        rng = np.random.default_rng(t)
        r = 1 + t % 2
        q = int(rng.choice([16, 32, 48, 64]))
        ks = list(rng.integers(1, 5, size=r))
        ns = list(rng.integers(4, 17, size=r))
        ss = [int(rng.integers(1, n + 1)) for n in ns]
        inst = make_deconvolution_instance(q, ks, ns, ss, frame_kind="random" if t % 4 == 0 else "dft", seed=t)
        worst = max(worst, lift_deconvolution(inst).residual)
    dt = time.perf_counter() - t0
    verdict(3, worst <= 1e-8 and dt < 10, f"max lifting residual {worst:.2e} (<= 1e-8), {dt:.2f}s")


# --------------------------------------------------------------------------- 4

def test_criterion_04_constants(verdict):
    rep = error_constants(0.25, 1.25, 0.0, 0.5, 2 * SQ5 / 3)
    errs = {"rho": abs(rep.rho - 0.5), "C1": abs(rep.c1 - 32 / 3),
            "C2": abs(rep.c2 - 4 * SQ5 / 3), "C3": abs(rep.c3 - 64 * SQ5 / 9)}
    ok = max(errs.values()) <= 1e-12 and rep.guarantee_holds
    verdict(4, ok, "rho={:.15g} C1={:.15g} C2={:.15g} C3={:.15g}; max err {:.1e}".format(
        rep.rho, rep.c1, rep.c2, rep.c3, max(errs.values())))


# --------------------------------------------------------------------------- 5

@pytest.mark.slow
def test_criterion_05_moments(verdict):
    t0 = time.perf_counter()
    parts, ok = [], True
    for conv in ("real", "complex"):
        for sp in ((3,), (2, 4)):
            rep = mc_gauss_moments(sp, conv, 10 ** 6, seed=MASTER)
            ok &= rep.passes(5.0)
            parts.append(f"{conv}{list(sp)} z={rep.max_z:.2f}")
    dt = time.perf_counter() - t0
    verdict(5, ok and dt < 60, "max z-scores " + ", ".join(parts) + f" (<= 5), {dt:.1f}s")


# --------------------------------------------------------------------------- 6-8

CONC_PROFILE = ((4, 32), (3, 24))
CONC_SPARSITY = (2, 1)


def _concentration(q):
    cfg = ExperimentConfig(profile=CONC_PROFILE, sparsity=CONC_SPARSITY, q_grid=(q,), trials=20, seed=MASTER)
    out = []
    for t in range(cfg.trials):
        inst = build_instance(trial_spec(cfg, 0, t))
        out.append((inst, certificate_params(inst.ensemble, inst.support, inst.Z0)))
    return out


def _bars(trials):
    n = len(trials)
    tau_max = 2 * SQ5 / 3 * (1 + 1e-6)
    fd = sum(r.delta <= 0.25 for _, r in trials) / n
    fb = sum(r.beta <= 1.25 for _, r in trials) / n
    fc = sum(r.theta <= 0.5 and r.eta <= 1e-8 and r.tau <= tau_max for _, r in trials) / n
    return fd, fb, fc


@pytest.fixture(scope="module")
def concentration():
    t0 = time.perf_counter()
    history = []
    q = 192
    trials = _concentration(q)
    history.append((q, _bars(trials)))
    if min(history[-1][1]) < 0.9:
        q *= 2
        trials = _concentration(q)
        history.append((q, _bars(trials)))
    return {"q": q, "trials": trials, "history": history, "seconds": time.perf_counter() - t0}


def test_criterion_06_concentration(verdict, concentration):
    hist = concentration["history"]
    fd, fb, fc = hist[-1][1]
    ok = min(fd, fb, fc) >= 0.9 and concentration["seconds"] < 300
    detail = "; ".join(f"q={q}: delta<=1/4 {a:.0%}, beta<=5/4 {b:.0%}, theta/eta/tau {c:.0%}"
                       for q, (a, b, c) in hist)
    deltas = sorted(r.delta for _, r in concentration["trials"])
    verdict(6, ok, f"{detail}; median delta at q={concentration['q']} is {deltas[len(deltas) // 2]:.3f}, "
                   f"{concentration['seconds']:.0f}s")


def test_criterion_07_exact_recovery(verdict, concentration):
    t0 = time.perf_counter()
    held = [(inst, r) for inst, r in concentration["trials"] if r.guarantee_holds]
    errs = [relative_error(solve_l12_eq(inst.ensemble, inst.y).solution, inst.Z0) for inst, _ in held]
    dt = time.perf_counter() - t0
    ok = bool(held) and max(errs) <= 1e-4 and dt < 300
    verdict(7, ok, f"{len(held)} guarantee-holding trials at q={concentration['q']}, "
                   f"max rel err {max(errs, default=float('nan')):.1e} (<= 1e-4), {dt:.1f}s")


def test_criterion_08_noisy_bound(verdict, concentration):
    t0 = time.perf_counter()
    held = [(inst, r) for inst, r in concentration["trials"] if r.guarantee_holds]
    ratios = []
    for idx, (inst, rep) in enumerate(held):
        clean = forward(inst.ensemble, inst.Z0)
        sigma = 1e-2 * np.linalg.norm(clean)
        y = clean + NoiseModel(sigma).sample(inst.ensemble.q, np.random.default_rng(MASTER + idx))
        X = solve_l12_noisy(inst.ensemble, y, sigma).solution
        err = (X - inst.Z0).norm_fro()
        ratios.append(err / error_bound(rep, 0.0, sigma, inst.support.s))
    dt = time.perf_counter() - t0
    ok = bool(held) and max(ratios) <= 1.0 and dt < 300
    verdict(8, ok, f"{len(held)} trials, max error/bound ratio {max(ratios, default=float('nan')):.3f} "
                   f"(<= 1), {dt:.1f}s")


# --------------------------------------------------------------------------- 9

TINY_PROFILES = [((2, 4),), ((1, 4), (2, 3)), ((1, 4),), ((2, 3),), ((1, 3), (1, 4))]


def test_criterion_09_oracle_agreement(verdict):
    t0 = time.perf_counter()
    spec_gap = 0.0
    for seed in range(10):
        q = (64, 96, 128)[seed % 3]
        inst = build_instance(make_spec(CONC_PROFILE, q, CONC_SPARSITY, MASTER + seed))
        E, S = inst.ensemble, inst.support
        spec_gap = max(spec_gap, abs(estimate_delta(E, S) - dense_delta(E, S)),
                       abs(estimate_beta(E, S) - dense_beta(E, S)))
    sol_gap = 0.0
    for t in range(20):
        prof = TINY_PROFILES[t % len(TINY_PROFILES)]
        sp = (1,) + (0,) * (len(prof) - 1)
        inst = build_instance(make_spec(prof, 6, sp, MASTER + 1000 + t))
        ref = exhaustive_min_l12(inst.ensemble, inst.y, 3)
        X = solve_l12_eq(inst.ensemble, inst.y).solution
        sol_gap = max(sol_gap, (X - ref).norm_fro() / ref.norm_fro())
    dt = time.perf_counter() - t0
    ok = spec_gap <= 1e-6 and sol_gap <= 1e-5 and dt < 120
    verdict(9, ok, f"power vs dense max gap {spec_gap:.1e} (<= 1e-6), solver vs exhaustive "
                   f"max rel gap {sol_gap:.1e} (<= 1e-5), {dt:.1f}s")


# --------------------------------------------------------------------------- 10

@pytest.mark.slow
def test_criterion_10_method_ordering(verdict):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(profile=((5, 64),), sparsity=(2,), q_grid=(16, 20, 25, 30, 35, 40, 50, 60),
                           methods=("l12", "l1", "nuclear"), trials=50, seed=MASTER)
    rates = {}
    for cell in run_phase(cfg):
        rates[cell.q, cell.method] = 100.0 * cell.success_rate
    dt = time.perf_counter() - t0
    qs = cfg.q_grid
    ordered = all(rates[q, "l12"] >= rates[q, "l1"] - 5 for q in qs)
    gap = max(rates[q, "l12"] - rates[q, "nuclear"] for q in qs)
    table = " ".join(f"q{q}:{rates[q, 'l12']:.0f}/{rates[q, 'l1']:.0f}/{rates[q, 'nuclear']:.0f}" for q in qs)
    ok = ordered and gap >= 20 and dt < 1200
    verdict(10, ok, f"success % l12/l1/nuclear {table}; l12>=l1-5 everywhere: {ordered}; "
                    f"max l12-nuclear gap {gap:.0f} pts (>= 20), {dt:.0f}s")


# --------------------------------------------------------------------------- 11

def _prox_objective(blocks, X, lam):
    """Batched ``lam ||U||_{1,2} + 0.5 ||U - X||_F^2`` for ``U`` stacked on axis 0."""
    total = 0.0
    for U, Xb in zip(blocks, X.blocks):
        total = total + lam * np.linalg.norm(U, axis=1).sum(axis=1) \
            + 0.5 * (np.abs(U - Xb[None]) ** 2).sum(axis=(1, 2))
    return total


def test_criterion_11_prox(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(MASTER)
    subdiff_ok = beat_ok = 0
    for _ in range(1000):
        r = int(rng.integers(1, 3))
        profile = tuple((int(rng.integers(1, 5)), int(rng.integers(1, 6))) for _ in range(r))
        X = random_tuple(rng, profile) * float(rng.uniform(0.1, 3))
        lam = float(10 ** rng.uniform(-2, 0.7))
        out = block_soft_threshold(X, lam)
        subdiff_ok += subdiff_check(out, (X - out) * (1 / lam))
        base = lam * norm_l12(out) + 0.5 * (out - X).norm_fro() ** 2
        scales = 10 ** rng.uniform(-4, 0, size=1000)
        perturbed = []
        for b in out.blocks:
            H = rng.standard_normal((1000,) + b.shape) + 1j * rng.standard_normal((1000,) + b.shape)
            perturbed.append(b[None] + scales[:, None, None] * H)
        beat_ok += bool(np.all(_prox_objective(perturbed, X, lam) > base))
    dt = time.perf_counter() - t0
    ok = subdiff_ok == 1000 and beat_ok == 1000 and dt < 30
    verdict(11, ok, f"subdifferential membership {subdiff_ok}/1000, beats all perturbations "
                    f"{beat_ok}/1000, {dt:.1f}s")
