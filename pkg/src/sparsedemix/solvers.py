"""First-order solvers for the column-sparse recovery programs.

All programs share the form::

    minimize  R(X)   subject to  ||A(X) - y||_2 <= sigma

with ``R`` one of the mixed norm ``||.||_{1,2}`` (column sparsity), the
entrywise ``||.||_1`` or the nuclear norm ``sum_i ||Z_i||_*``.  ``sigma = 0``
gives the equality-constrained program.

The solver is ADMM on the splitting ``Z = X``, ``w = A X``: the ``X`` step is
the regularized least-squares problem ``(I + A^* A) X = rhs``, solved through
a one-off eigendecomposition of the ``q x q`` Gram matrix ``A A^*``; the ``Z``
step is the proximal map of ``R``; the ``w`` step projects onto the noise
ball around ``y``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidInputError, ShapeMismatchError
from .measurement import DENSE_CAP, MeasurementEnsemble, materialize_dense
from .tuples import MatrixTuple, to_json

logger = logging.getLogger(__name__)

METHODS = ("l12", "l1", "nuclear")


@dataclass
class SolveOptions:
    """Iteration controls shared by every solver.

    ``abs_tol``/``rel_tol`` enter the usual ADMM stopping thresholds on the
    primal and dual residuals; ``penalty`` is the initial augmented-Lagrangian
    parameter; ``over_relaxation`` in ``[1, 1.9]``.
    """

    max_iters: int = 5000
    abs_tol: float = 1e-8
    rel_tol: float = 1e-6
    penalty: float = 1.0
    over_relaxation: float = 1.0
    adaptive_penalty: bool = True
    polish: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be >= 1")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise InvalidInputError("tolerances must be positive")
        if not self.penalty > 0:
            raise InvalidInputError("penalty must be positive")
        if not 1.0 <= self.over_relaxation <= 1.9:
            raise InvalidInputError("over_relaxation must lie in [1, 1.9]")


@dataclass
class SolveReport:
    solution: MatrixTuple
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float
    feasibility_gap: float
    converged: bool
    method: str = "l12"
    sigma: float = 0.0
    penalty: float = 1.0
    polished: bool = False
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = asdict(self)
        d["solution"] = to_json(self.solution)
        return d


@dataclass(frozen=True)
class NoiseModel:
    """Additive noise ``nu`` with ``||nu||_2 <= sigma``."""

    sigma: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise InvalidInputError("sigma must be nonnegative")

    def sample(self, q: int, rng: np.random.Generator) -> np.ndarray:
        """Uniformly oriented complex noise vector of norm exactly ``sigma``."""
        nu = rng.standard_normal(q) + 1j * rng.standard_normal(q)
        return self.sigma * nu / np.linalg.norm(nu)

    def observe(self, clean: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return clean + self.sample(clean.shape[0], rng)


class _FlatMap:
    """Measurement map on column-major flattened tuples."""

    def __init__(self, E: MeasurementEnsemble):
        self.E = E
        self.profile = E.profile
        sizes = [k * n for k, n in self.profile]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self.dense = materialize_dense(E) if E.dim <= DENSE_CAP else None
        if self.dense is not None:
            self.dense_h = self.dense.conj().T

    def blocks(self, x: np.ndarray) -> list[np.ndarray]:
        return [x[a:b].reshape((k, n), order="F")
                for a, b, (k, n) in zip(self.offsets[:-1], self.offsets[1:], self.profile)]

    def flatten(self, blocks) -> np.ndarray:
        return np.concatenate([b.reshape(-1, order="F") for b in blocks])

    def matvec(self, x):
        if self.dense is not None:
            return self.dense @ x
        return self.E.apply(self.blocks(x))

    def rmatvec(self, p):
        if self.dense is not None:
            return self.dense_h @ p
        return self.flatten(self.E.apply_adjoint(p))


# Penalties: value and proximal map on flattened tuples.

def _l12_value(fm, x):
    return float(sum(np.linalg.norm(b, axis=0).sum() for b in fm.blocks(x)))


def _l12_prox(fm, x, t):
    out = []
    for b in fm.blocks(x):
        nrm = np.linalg.norm(b, axis=0)
        out.append(b * np.maximum(0.0, 1.0 - t / np.maximum(nrm, 1e-300))[None, :])
    return fm.flatten(out)


def _l1_value(fm, x):
    return float(np.abs(x).sum())


def _l1_prox(fm, x, t):
    mag = np.abs(x)
    return x * np.maximum(0.0, 1.0 - t / np.maximum(mag, 1e-300))


def _nuc_value(fm, x):
    return float(sum(np.linalg.svd(b, compute_uv=False).sum() for b in fm.blocks(x)))


def _nuc_prox(fm, x, t):
    out = []
    for b in fm.blocks(x):
        u, s, vh = np.linalg.svd(b, full_matrices=False)
        out.append((u * np.maximum(s - t, 0.0)) @ vh)
    return fm.flatten(out)


def _l12_mask(fm, x):
    return fm.flatten([np.broadcast_to(np.linalg.norm(b, axis=0) > 0, b.shape)
                       for b in fm.blocks(x)]).astype(bool)


def _l1_mask(fm, x):
    return x != 0


def _full_mask(fm, x):
    return np.ones(x.shape, dtype=bool)


_PENALTIES: dict[str, tuple[Callable, Callable, Callable]] = {
    "l12": (_l12_value, _l12_prox, _l12_mask),
    "l1": (_l1_value, _l1_prox, _l1_mask),
    "nuclear": (_nuc_value, _nuc_prox, _full_mask),
}


def _project_ball(u, y, sigma):
    d = u - y
    nd = np.linalg.norm(d)
    if nd <= sigma:
        return u
    return y + d * (sigma / nd)


def _polish(fm, x, y, sigma, mask):
    """Minimal correction of ``x`` on its own support towards the noise ball.

    Moves along the least-squares correction ``d = A_T^+ (y - A x)`` just far
    enough to reach ``||A x - y|| <= sigma`` (all the way when ``sigma = 0``).
    """
    if fm.dense is None or not mask.any():
        return None
    res = y - fm.dense @ x
    if np.linalg.norm(res) <= sigma:
        return None
    At = fm.dense[:, mask]
    d, *_ = np.linalg.lstsq(At, res, rcond=None)
    fitted = At @ d  # projection of res onto range(A_T)
    a = np.vdot(fitted, fitted).real
    b = np.vdot(res - fitted, res - fitted).real
    if a <= 0:
        return None
    t = 1.0 if sigma ** 2 <= b else 1.0 - np.sqrt((sigma ** 2 - b) / a)
    out = x.copy()
    out[mask] += t * d
    return out


def _real(M: np.ndarray) -> np.ndarray:
    """Real ``2m x 2n`` form of a complex-linear map acting on ``[Re x; Im x]``."""
    return np.block([[M.real, -M.imag], [M.imag, M.real]])


def _refine_l12_noisy(fm, x, y, sigma, mask, max_newton: int = 50):
    """Newton refinement of the support-restricted KKT system of the sigma-program.

    With the active columns fixed, an optimal point satisfies
    ``x_j / ||x_j|| = c A_j^* (y - A x)`` for each active column ``j`` and
    ``||y - A x|| = sigma`` for some ``c > 0``.  ADMM only pins small columns down to
    its residual tolerance; a few Newton steps make the directions exact.
    Returns ``None`` unless the KKT residual strictly decreases.
    """
    if fm.dense is None or sigma <= 0 or not mask.any():
        return None
    A = fm.dense[:, mask]
    d = A.shape[1]
    cols = [np.flatnonzero(m) for m in _active_groups(fm, mask)]
    AhA = A.conj().T @ A

    def unpack(xi):
        return xi[:d] + 1j * xi[d:]

    def residual(xi, c):
        xt = unpack(xi)
        r = y - A @ xt
        u = np.empty(d, dtype=np.complex128)
        for g in cols:
            u[g] = xt[g] / np.linalg.norm(xt[g])
        f1 = u - c * (A.conj().T @ r)
        return np.concatenate([f1.real, f1.imag, [(np.vdot(r, r).real - sigma ** 2) / 2]]), r

    xi = np.concatenate([x[mask].real, x[mask].imag])
    if min(np.linalg.norm(unpack(xi)[g]) for g in cols) == 0:
        return None
    r = y - A @ unpack(xi)
    h = A.conj().T @ r
    u0 = np.concatenate([unpack(xi)[g] / np.linalg.norm(unpack(xi)[g]) for g in cols])
    order = np.concatenate(cols)
    c = float(np.real(np.vdot(h[order], u0)) / max(np.vdot(h, h).real, 1e-300))
    if c <= 0:
        return None
    F, r = residual(xi, c)
    start = best = np.linalg.norm(F)
    for _ in range(max_newton):
        if best <= 1e-13:
            break
        xt = unpack(xi)
        J = np.zeros((2 * d + 1, 2 * d + 1))
        for g in cols:
            idx = np.concatenate([g, d + g])
            v = xi[idx]
            nv = np.linalg.norm(v)
            w = v / nv
            J[np.ix_(idx, idx)] = (np.eye(idx.size) - np.outer(w, w)) / nv
        J[:2 * d, :2 * d] += c * _real(AhA)
        h = A.conj().T @ r
        J[:2 * d, -1] = -np.concatenate([h.real, h.imag])
        J[-1, :2 * d] = -np.concatenate([h.real, h.imag])
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        while t > 1e-6:
            xi_new, c_new = xi + t * step[:-1], c + t * step[-1]
            if c_new > 0 and min(np.linalg.norm(unpack(xi_new)[g]) for g in cols) > 0:
                F_new, r_new = residual(xi_new, c_new)
                if np.linalg.norm(F_new) < best:
                    break
            t /= 2
        else:
            break
        xi, c, F, r = xi_new, c_new, F_new, r_new
        best = np.linalg.norm(F)
    if not best < start:
        return None
    out = np.zeros_like(x)
    out[mask] = unpack(xi)
    return _project_to_ball(fm, out, y, sigma)


def _active_groups(fm, mask):
    """Per active column, a boolean selector into the masked coordinates."""
    groups, pos = [], 0
    for b in fm.blocks(mask):
        for j in range(b.shape[1]):
            col = b[:, j]
            if col.any():
                sel = np.zeros(int(mask.sum()), dtype=bool)
                sel[pos:pos + col.size] = True
                groups.append(sel)
                pos += col.size
    return groups


def _project_to_ball(fm, x, y, sigma):
    """Shrink ``x`` towards the exact constraint boundary after rounding drift."""
    nr = np.linalg.norm(fm.matvec(x) - y)
    if nr <= sigma:
        return x
    return _polish(fm, x, y, sigma, x != 0)


def _solve(E: MeasurementEnsemble, y, sigma: float, opts: SolveOptions | None, method: str) -> SolveReport:
    opts = opts or SolveOptions()
    if method not in _PENALTIES:
        raise InvalidInputError(f"unknown method {method!r}")
    value, prox, mask_fn = _PENALTIES[method]
    y = np.asarray(y, dtype=np.complex128)
    if y.shape != (E.q,):
        raise ShapeMismatchError(f"expected {E.q} measurements, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("measurements contain non-finite entries")
    if not sigma >= 0:
        raise InvalidInputError("sigma must be nonnegative")

    ny = float(np.linalg.norm(y))
    if ny <= sigma:
        return SolveReport(MatrixTuple.zeros(E.profile), 1, 0.0, 0.0, 0.0, 0.0, True,
                           method, sigma, opts.penalty)

    t0 = time.perf_counter()
    fm = _FlatMap(E)
    N, q = E.dim, E.q
    lam, V = np.linalg.eigh(E.gram)
    inv_diag = 1.0 / (1.0 + np.maximum(lam, 0.0))
    Vh = V.conj().T

    def xsolve(v1, v2):
        rhs = v1 + fm.rmatvec(v2)
        return rhs - fm.rmatvec(V @ (inv_diag * (Vh @ fm.matvec(rhs))))

    rho = opts.penalty
    alpha = opts.over_relaxation
    x = np.zeros(N, dtype=np.complex128)
    z = np.zeros(N, dtype=np.complex128)
    w = _project_ball(np.zeros(q, dtype=np.complex128), y, sigma)
    u1 = np.zeros(N, dtype=np.complex128)
    u2 = np.zeros(q, dtype=np.complex128)
    sqrt_pri = np.sqrt(N + q)
    sqrt_dual = np.sqrt(N)
    converged = False
    r_norm = s_norm = np.inf

    it = 0
    for it in range(1, opts.max_iters + 1):
        x = xsolve(z - u1, w - u2)
        ax = fm.matvec(x)
        xh = alpha * x + (1 - alpha) * z
        axh = alpha * ax + (1 - alpha) * w
        z_old, w_old = z, w
        z = prox(fm, xh + u1, 1.0 / rho)
        w = _project_ball(axh + u2, y, sigma)
        u1 = u1 + xh - z
        u2 = u2 + axh - w

        r_norm = np.sqrt(np.linalg.norm(x - z) ** 2 + np.linalg.norm(ax - w) ** 2)
        s_norm = rho * np.linalg.norm((z - z_old) + fm.rmatvec(w - w_old))
        eps_pri = sqrt_pri * opts.abs_tol + opts.rel_tol * max(
            np.sqrt(np.linalg.norm(x) ** 2 + np.linalg.norm(ax) ** 2),
            np.sqrt(np.linalg.norm(z) ** 2 + np.linalg.norm(w) ** 2))
        eps_dual = sqrt_dual * opts.abs_tol + opts.rel_tol * rho * np.linalg.norm(u1 + fm.rmatvec(u2))
        if r_norm <= eps_pri and s_norm <= eps_dual:
            converged = True
            break
        if opts.adaptive_penalty and it % 10 == 0:
            if r_norm > 10 * s_norm:
                rho *= 2.0
                u1, u2 = u1 / 2.0, u2 / 2.0
            elif s_norm > 10 * r_norm:
                rho /= 2.0
                u1, u2 = u1 * 2.0, u2 * 2.0

    sol = z
    polished = False
    if opts.polish:
        candidate = _polish(fm, z, y, sigma, mask_fn(fm, z))
        if candidate is not None:
            sol, polished = candidate, True
        if method == "l12" and sigma > 0:
            refined = _refine_l12_noisy(fm, sol, y, sigma, mask_fn(fm, sol))
            if refined is not None:
                sol, polished = refined, True

    gap = max(0.0, float(np.linalg.norm(fm.matvec(sol) - y)) - sigma)
    if not converged:
        logger.info("%s solve stopped after %d iterations (r=%.2e, s=%.2e)", method, it, r_norm, s_norm)
    return SolveReport(MatrixTuple(fm.blocks(sol)), it, float(r_norm), float(s_norm), value(fm, sol),
                       gap, converged, method, sigma, rho, polished,
                       {"wall_s": time.perf_counter() - t0})


def solve_l12_eq(E: MeasurementEnsemble, y, opts: SolveOptions | None = None) -> SolveReport:
    """``min ||X||_{1,2}`` subject to ``A(X) = y``."""
    return _solve(E, y, 0.0, opts, "l12")


def solve_l12_noisy(E: MeasurementEnsemble, y, sigma: float, opts: SolveOptions | None = None) -> SolveReport:
    """``min ||X||_{1,2}`` subject to ``||A(X) - y||_2 <= sigma``."""
    return _solve(E, y, sigma, opts, "l12")


def solve_l1_eq(E: MeasurementEnsemble, y, opts: SolveOptions | None = None) -> SolveReport:
    """``min ||X||_1`` (sum of entry moduli) subject to ``A(X) = y``."""
    return _solve(E, y, 0.0, opts, "l1")


def solve_l1_noisy(E: MeasurementEnsemble, y, sigma: float, opts: SolveOptions | None = None) -> SolveReport:
    return _solve(E, y, sigma, opts, "l1")


def solve_nuclear_eq(E: MeasurementEnsemble, y, opts: SolveOptions | None = None) -> SolveReport:
    """``min sum_i ||Z_i||_*`` subject to ``A(X) = y``."""
    return _solve(E, y, 0.0, opts, "nuclear")


def solve_nuclear_noisy(E: MeasurementEnsemble, y, sigma: float, opts: SolveOptions | None = None) -> SolveReport:
    return _solve(E, y, sigma, opts, "nuclear")


def solve(E: MeasurementEnsemble, y, method: str = "l12", sigma: float = 0.0,
          opts: SolveOptions | None = None) -> SolveReport:
    """Dispatch on ``method`` in :data:`METHODS`."""
    return _solve(E, y, sigma, opts, method)
