"""Brute-force ground truth for the fast paths.

Dense spectral norms from the materialized measurement matrix, a Monte-Carlo
check of the Gaussian fourth-moment identities, a KKT verifier for solver
outputs and an exhaustive support search for tiny instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceededError, InvalidInputError
from .measurement import (DENSE_CAP, Convention, MeasurementEnsemble, adjoint,
                          forward, materialize_dense)
from .seeding import child_seeds
from .tuples import (MatrixTuple, SupportPattern, norm_l12, norm_linf2,
                     normalize_columns, project_support)

MOMENT_Z = 5.0
ENUM_BUDGET = 10 ** 5


# --------------------------------------------------------------------------- dense spectra

def _dense_columns(E: MeasurementEnsemble, S: SupportPattern) -> list[int]:
    """Column indices of ``S`` in the dense matrix (block offset + j*k + kappa)."""
    idx, offset = [], 0
    for (k, n), cols in zip(E.profile, S.sets):
        for j in cols:
            idx.extend(offset + j * k + kap for kap in range(k))
        offset += k * n
    return idx


def dense_delta(E: MeasurementEnsemble, S: SupportPattern, cap: int = DENSE_CAP) -> float:
    E.check_support(S)
    if S.dim == 0:
        return 0.0
    M = materialize_dense(E, cap)[:, _dense_columns(E, S)]
    sv = np.linalg.svd(M, compute_uv=False)
    lo = sv[-1] ** 2 if M.shape[1] <= M.shape[0] else 0.0
    return float(max(sv[0] ** 2 - 1.0, 1.0 - lo, 0.0))


def dense_beta(E: MeasurementEnsemble, S: SupportPattern, cap: int = DENSE_CAP) -> float:
    E.check_support(S)
    if S.dim == 0:
        return 0.0
    D = materialize_dense(E, cap)
    AsH = D[:, _dense_columns(E, S)].conj().T
    best, offset = 0.0, 0
    for i, ((k, n), cols) in enumerate(zip(E.profile, S.sets)):
        for j in sorted(set(range(n)) - set(cols)):
            M = AsH @ D[:, offset + j * k: offset + (j + 1) * k]
            best = max(best, float(np.linalg.norm(M, 2)))
        offset += k * n
    return best


def spectral_comparison(E: MeasurementEnsemble, S: SupportPattern, opts=None) -> list[dict]:
    """Rows ``(quantity, fast_value, oracle_value, abs_diff)`` for delta and beta."""
    from .certificate import estimate_beta, estimate_delta
    rows = []
    for name, fast, slow in (("delta", estimate_delta, dense_delta), ("beta", estimate_beta, dense_beta)):
        f, o = fast(E, S, opts), slow(E, S)
        rows.append({"quantity": name, "fast_value": f, "oracle_value": o, "abs_diff": abs(f - o)})
    return rows


# --------------------------------------------------------------------------- moments

@dataclass
class MomentEntry:
    kappa: int
    j: int
    i: int
    empirical: np.ndarray
    expected: np.ndarray
    max_abs_dev: float
    max_z: float

    def to_json(self) -> dict:
        return {"kappa": self.kappa, "j": self.j, "i": self.i,
                "empirical": {"re": self.empirical.real.tolist(), "im": self.empirical.imag.tolist()},
                "expected": self.expected.real.tolist(),
                "max_abs_dev": self.max_abs_dev, "max_z": self.max_z}


@dataclass
class MomentReport:
    sparsities: tuple[int, ...]
    convention: str
    N: int
    seed: int | None
    entries: list[MomentEntry] = field(default_factory=list)

    @property
    def max_abs_dev(self) -> float:
        return max((e.max_abs_dev for e in self.entries), default=0.0)

    @property
    def max_z(self) -> float:
        return max((e.max_z for e in self.entries), default=0.0)

    def passes(self, z: float = MOMENT_Z) -> bool:
        return self.max_z <= z

    def entry(self, kappa: int, j: int, i: int) -> MomentEntry:
        for e in self.entries:
            if (e.kappa, e.j, e.i) == (kappa, j, i):
                return e
        raise KeyError((kappa, j, i))

    def to_json(self) -> dict:
        return {"sparsities": list(self.sparsities), "convention": self.convention, "N": self.N,
                "seed": self.seed, "max_abs_dev": self.max_abs_dev, "max_z": self.max_z,
                "entries": [e.to_json() for e in self.entries]}


def expected_moment(sparsities, convention, kappa: int, j: int, i: int) -> np.ndarray:
    """Closed form of ``E[alpha^kappa ||alpha^j||^2 (alpha^i)^*]``."""
    s = sparsities
    if i != kappa:
        return np.zeros((s[kappa], s[i]))
    if i == j:
        extra = 2 if Convention(convention) is Convention.REAL else 1
        return (s[i] + extra) * np.eye(s[i])
    return s[j] * np.eye(s[i])


def _draw(rng, shape, convention):
    if convention is Convention.REAL:
        return rng.standard_normal(shape).astype(np.complex128)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def mc_gauss_moments(sparsities, convention="complex", N: int = 10 ** 6, seed: int | None = 0,
                     batch: int = 10 ** 5) -> MomentReport:
    """Monte-Carlo estimate of every ``(kappa, j, i)`` moment block.

    Deviations are scored against per-entry standard errors from the sample
    variance; ``max_z`` is the largest ``|empirical - expected| / se``.
    """
    sparsities = tuple(int(s) for s in sparsities)
    if N < 10 ** 4:
        raise InvalidInputError("N must be at least 10^4")
    if not sparsities or min(sparsities) < 0:
        raise InvalidInputError("sparsities must be a nonempty list of nonnegative counts")
    conv = Convention(convention)
    r = len(sparsities)
    triples = [(kap, j, i) for kap in range(r) for j in range(r) for i in range(r)
               if sparsities[kap] and sparsities[i]]
    s1 = {t: 0.0 for t in triples}
    s2 = {t: 0.0 for t in triples}
    sizes = [min(batch, N - b) for b in range(0, N, batch)]
    for m, bseed in zip(sizes, child_seeds(seed, len(sizes))):
        rng = np.random.default_rng(bseed)
        alpha = [_draw(rng, (m, s), conv) for s in sparsities]
        energy = [np.sum(np.abs(a) ** 2, axis=1) for a in alpha]
        for kap, j, i in triples:
            x = alpha[kap][:, :, None] * energy[j][:, None, None] * alpha[i].conj()[:, None, :]
            s1[kap, j, i] = s1[kap, j, i] + x.sum(axis=0)
            s2[kap, j, i] = s2[kap, j, i] + (np.abs(x) ** 2).sum(axis=0)
    report = MomentReport(sparsities, conv.value, N, seed)
    for t in triples:
        mean = s1[t] / N
        var = np.maximum(s2[t] / N - np.abs(mean) ** 2, 0.0) * N / (N - 1)
        se = np.sqrt(var / N)
        exp = expected_moment(sparsities, conv, *t)
        dev = np.abs(mean - exp)
        z = dev / np.maximum(se, np.finfo(float).tiny)
        report.entries.append(MomentEntry(*t, mean, exp, float(dev.max()), float(z.max())))
    return report


# --------------------------------------------------------------------------- optimality

def _dual_fit_ok(E, p, T, G, tol):
    Y = adjoint(E, p)
    on = np.linalg.norm(T.pack(Y) - T.pack(G))
    Tc = T.complement()
    off = norm_linf2(project_support(Y, Tc)) if Tc.s else 0.0
    return on, off


def _socp_dual(E, T, G, tol):
    """Smallest achievable off-support column norm among near-exact dual vectors."""
    import cvxpy as cp
    from .measurement import column_matrix, support_matrix
    AT = support_matrix(E, T)
    p = cp.Variable(E.q, complex=True)
    t = cp.Variable()
    cons = [cp.norm(AT.conj().T @ p - T.pack(G), 2) <= tol / 2]
    for i, j in T.complement().pairs():
        cons.append(cp.norm(column_matrix(E, i, j).conj().T @ p, 2) <= t)
    prob = cp.Problem(cp.Minimize(t), cons)
    try:
        prob.solve()
    except cp.error.SolverError:
        return None
    if p.value is None:
        return None
    return np.asarray(p.value)


def verify_optimality(E: MeasurementEnsemble, y, X: MatrixTuple, tol: float = 1e-5,
                      sigma: float = 0.0, support_atol: float | None = None) -> bool:
    """KKT check that ``X`` minimizes ``||.||_{1,2}`` subject to ``||A Z - y|| <= sigma``.

    On ``T = supp(X)`` a dual image ``A^* p`` must reproduce the unit-column tuple
    ``normalize_columns(X)``, and off ``T`` its columns must have norm at most one.
    The minimum-norm least-squares ``p`` is tried first; if it violates the
    off-support bound, the remaining freedom in ``p`` is optimized by a small
    second-order cone program.  With ``sigma > 0`` and an active constraint the
    dual vector is restricted to nonnegative multiples of ``y - A X``.
    """
    from .measurement import support_matrix
    y = np.asarray(y, dtype=np.complex128)
    E.check_tuple(X)
    resid = np.linalg.norm(forward(E, X) - y)
    scale = max(1.0, float(np.linalg.norm(y)))
    if resid > max(sigma, 0.0) + tol * scale:
        return False
    norms = X.column_norms()
    top = max((float(c.max()) for c in norms if c.size), default=0.0)
    atol = support_atol if support_atol is not None else 1e-9 * top
    T = SupportPattern.of(X, atol) if top > 0 else SupportPattern.empty(X.profile)
    if T.s == 0:
        return bool(np.linalg.norm(y) <= sigma + tol * scale)
    G = normalize_columns(project_support(X, T))
    AT = support_matrix(E, T)
    g = T.pack(G)
    if sigma > 0 and resid >= sigma - tol * scale:
        d = y - forward(E, X)
        h = AT.conj().T @ d
        c = float(np.real(np.vdot(h, g)) / max(np.vdot(h, h).real, np.finfo(float).tiny))
        if c < -tol:
            return False
        on, off = _dual_fit_ok(E, c * d, T, G, tol)
        return bool(on <= tol and off <= 1 + tol)
    if sigma > 0:
        return False  # inactive constraint with nonzero X cannot be optimal
    try:
        p, *_ = np.linalg.lstsq(AT.conj().T, g, rcond=None)
    except np.linalg.LinAlgError as exc:
        raise InvalidInputError(f"least-squares breakdown: {exc}") from exc
    on, off = _dual_fit_ok(E, p, T, G, tol)
    if on > tol:
        return False
    if off <= 1 + tol:
        return True
    p = _socp_dual(E, T, G, tol)
    if p is None:
        return False
    on, off = _dual_fit_ok(E, p, T, G, tol)
    return bool(on <= tol and off <= 1 + tol)


# --------------------------------------------------------------------------- exhaustive search

def exhaustive_min_l12(E: MeasurementEnsemble, y, max_sparsity: int, budget: int = ENUM_BUDGET,
                       feas_tol: float = 1e-9) -> MatrixTuple:
    """Smallest-``||.||_{1,2}`` feasible tuple among least-squares fits on small supports.

    Every support pattern with at most ``max_sparsity`` columns in total is
    visited.  Supports whose restricted matrix has full column rank give a
    unique candidate; the best feasible one is returned.  This is a restricted
    oracle: it is exact only when some minimizer lives on such a support.
    """
    y = np.asarray(y, dtype=np.complex128)
    if np.linalg.norm(y) == 0:
        return MatrixTuple.zeros(E.profile)
    from .measurement import support_matrix
    pairs = [(i, j) for i, (_, n) in enumerate(E.profile) for j in range(n)]
    total = sum(math.comb(len(pairs), m) for m in range(1, max_sparsity + 1))
    if total > budget:
        raise BudgetExceededError(f"{total} candidate supports exceed the budget {budget}")
    scale = max(1.0, float(np.linalg.norm(y)))
    best, best_val = None, math.inf
    for m in range(1, max_sparsity + 1):
        for combo in itertools.combinations(pairs, m):
            sets = [[j for i2, j in combo if i2 == i] for i in range(E.r)]
            T = SupportPattern(sets, E.profile)
            if T.dim > E.q:
                continue
            AT = support_matrix(E, T)
            x, _, rank, _ = np.linalg.lstsq(AT, y, rcond=None)
            if rank < T.dim or np.linalg.norm(AT @ x - y) > feas_tol * scale:
                continue
            Z = T.unpack(x)
            val = norm_l12(Z)
            if val < best_val:
                best, best_val = Z, val
    if best is None:
        raise InvalidInputError("no support within the sparsity bound admits a feasible point")
    return best
