"""Quantities of the deterministic recovery condition and the resulting error bound.

For a support ``S`` the condition asks for

* ``delta``: ``||P_S A^* A P_S - P_S|| <= delta < 1`` (restricted isometry),
* ``beta``: ``max_{(i,j) not in S} ||P_S A^* A_j^i||_{2->F} <= beta``,
* a dual certificate ``Y = A^* upsilon`` with ``||P_S(Y - Zhat)||_F <= eta``,
  ``||P_{S^c} Y||_{inf,2} <= theta`` and ``||upsilon||_2 <= tau sqrt(s)``,

and, with ``rho = theta + eta beta / (1 - delta) < 1``, guarantees

    ||Z* - Z0||_F <= C1 ||P_{S^c} Z0||_{1,2} + (C2 + C3 sqrt(s)) sigma

for every solution ``Z*`` of the noise-constrained mixed-norm program.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .errors import ConvergenceError, InvalidInputError, NoGuaranteeError
from .measurement import (MeasurementEnsemble, adjoint, column_matrix, forward,
                          support_matrix)
from .tuples import (MatrixTuple, SupportPattern, norm_linf2, normalize_columns,
                     project_support)

CSV_FIELDS = ("delta", "beta", "eta", "theta", "tau", "rho", "mu", "c1", "c2", "c3",
              "guarantee_holds", "upsilon_norm", "s")


@dataclass
class SpectralOptions:
    """Controls for the matrix-free spectral estimates and the certificate solve.

    Power iteration stops once the eigen-residual ``||N v - lam v||`` drops below
    ``tol * lam``; a run that exhausts ``max_iters`` is restarted from a fresh
    random vector up to ``restarts`` times.
    """

    tol: float = 1e-6
    max_iters: int = 20000
    restarts: int = 3
    seed: int = 0
    cg_tol: float = 1e-10
    cg_maxiter_factor: int = 10


def power_iteration(matvec: Callable[[np.ndarray], np.ndarray], dim: int,
                    opts: SpectralOptions | None = None) -> tuple[float, int]:
    """Largest eigenvalue of a Hermitian positive semidefinite operator.

    Returns ``(eigenvalue, iterations)``.
    """
    opts = opts or SpectralOptions()
    if dim == 0:
        return 0.0, 0
    rng = np.random.default_rng(opts.seed)
    total = 0
    for _ in range(opts.restarts):
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        v /= np.linalg.norm(v)
        for _ in range(opts.max_iters):
            total += 1
            w = matvec(v)
            lam = np.vdot(v, w).real
            nw = np.linalg.norm(w)
            if nw == 0.0:
                return 0.0, total
            if np.linalg.norm(w - lam * v) <= opts.tol * abs(lam):
                return float(lam), total
            v = w / nw
    raise ConvergenceError(f"power iteration did not converge after {opts.restarts} restarts")


def _restricted_normal(E: MeasurementEnsemble, S: SupportPattern):
    As = support_matrix(E, S)
    Ash = As.conj().T
    return As, (lambda v: Ash @ (As @ v))


def estimate_delta(E: MeasurementEnsemble, S: SupportPattern, opts: SpectralOptions | None = None,
                   *, return_iters: bool = False):
    """``||P_S A^* A P_S - P_S||`` on the support subspace by shifted power iteration.

    The top eigenvalue ``lmax`` of the restricted normal operator ``N`` comes from
    plain power iteration; the bottom one from power iteration on ``lmax I - N``.
    """
    E.check_support(S)
    if S.dim == 0:
        return (0.0, 0) if return_iters else 0.0
    _, N = _restricted_normal(E, S)
    lmax, it1 = power_iteration(N, S.dim, opts)
    shifted, it2 = power_iteration(lambda v: lmax * v - N(v), S.dim, opts)
    lmin = lmax - shifted
    delta = max(lmax - 1.0, 1.0 - lmin, 0.0)
    return (delta, it1 + it2) if return_iters else delta


def estimate_beta(E: MeasurementEnsemble, S: SupportPattern, opts: SpectralOptions | None = None,
                  *, return_iters: bool = False):
    """``max_{(i,j) not in S} ||nu -> P_S A^*(A_j^i nu)||``; zero for an empty complement."""
    E.check_support(S)
    Sc = S.complement()
    if Sc.s == 0 or S.dim == 0:
        return (0.0, 0) if return_iters else 0.0
    Ash = support_matrix(E, S).conj().T
    best, iters = 0.0, 0
    for i, j in Sc.pairs():
        M = Ash @ column_matrix(E, i, j)
        gram = M.conj().T @ M
        lam, it = power_iteration(lambda v: gram @ v, gram.shape[0], opts)
        iters += it
        best = max(best, math.sqrt(max(lam, 0.0)))
    return (best, iters) if return_iters else best


def build_certificate(E: MeasurementEnsemble, S: SupportPattern, Z0hat: MatrixTuple,
                      opts: SpectralOptions | None = None, *, return_iters: bool = False):
    """Exact dual certificate ``upsilon = A_S (A_S^* A_S)^{-1} Zhat``, ``Y = A^* upsilon``.

    The inverse is applied by conjugate gradients on the restricted normal
    operator; failure to reach the tolerance signals numerical rank deficiency.
    """
    opts = opts or SpectralOptions()
    E.check_support(S)
    E.check_tuple(Z0hat)
    if S.dim == 0:
        ups = np.zeros(E.q, dtype=np.complex128)
        return (ups, MatrixTuple.zeros(E.profile), 0) if return_iters else (ups, MatrixTuple.zeros(E.profile))
    As, N = _restricted_normal(E, S)
    rhs = S.pack(Z0hat)
    op = LinearOperator((S.dim, S.dim), matvec=N, dtype=np.complex128)
    count = [0]

    def _cb(_):
        count[0] += 1

    sol, info = cg(op, rhs, rtol=opts.cg_tol, atol=0.0,
                   maxiter=opts.cg_maxiter_factor * S.dim, callback=_cb)
    resid = np.linalg.norm(N(sol) - rhs)
    if info != 0 or resid > 10 * opts.cg_tol * max(np.linalg.norm(rhs), 1.0):
        raise ConvergenceError(f"CG stagnated (info={info}, residual={resid:.2e}); "
                               "restricted normal operator is numerically singular")
    ups = As @ sol
    Y = adjoint(E, ups)
    return (ups, Y, count[0]) if return_iters else (ups, Y)


@dataclass
class CertificateReport:
    delta: float
    beta: float
    eta: float
    theta: float
    tau: float
    rho: float
    mu: float
    c1: float
    c2: float
    c3: float
    guarantee_holds: bool
    upsilon_norm: float = float("nan")
    s: int = 0
    constants_defined: bool = True
    iters_used: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = asdict(self)
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}

    def csv_row(self) -> dict:
        return {k: getattr(self, k) for k in CSV_FIELDS}


def guarantee_check(delta: float, rho: float) -> bool:
    return bool(delta < 1.0 and rho < 1.0)


def error_constants(delta: float, beta: float, eta: float, theta: float, tau: float,
                    **extra) -> CertificateReport:
    """Assemble ``rho``, ``mu`` and ``C1..C3`` from the five measured parameters."""
    nan = float("nan")
    if not delta < 1.0:
        return CertificateReport(delta, beta, eta, theta, tau, nan, nan, nan, nan, nan,
                                 False, constants_defined=False, **extra)
    rho = theta + eta * beta / (1.0 - delta)
    mu = math.sqrt(1.0 + delta) / (1.0 - delta)
    if not rho < 1.0:
        return CertificateReport(delta, beta, eta, theta, tau, rho, mu, nan, nan, nan,
                                 False, constants_defined=False, **extra)
    a = 1.0 / (1.0 - rho)
    b = beta / ((1.0 - rho) * (1.0 - delta))
    c1 = 2 * a + 2 * b
    c2 = 2 * mu * eta * a + 2 * mu * eta * b + 2 * mu
    c3 = 2 * tau * a + 2 * tau * b
    return CertificateReport(delta, beta, eta, theta, tau, rho, mu, c1, c2, c3, True, **extra)


def certificate_params(E: MeasurementEnsemble, S: SupportPattern, Z0: MatrixTuple,
                       opts: SpectralOptions | None = None) -> CertificateReport:
    """Measure every parameter of the recovery condition for support ``S`` and signal ``Z0``."""
    E.check_support(S)
    delta, it_d = estimate_delta(E, S, opts, return_iters=True)
    beta, it_b = estimate_beta(E, S, opts, return_iters=True)
    s = S.s
    iters = {"delta": it_d, "beta": it_b}
    nan = float("nan")
    if not delta < 1.0:
        return error_constants(delta, beta, nan, nan, nan, s=s, iters_used=iters)
    Zhat = normalize_columns(project_support(Z0, S))
    try:
        ups, Y, it_cg = build_certificate(E, S, Zhat, opts, return_iters=True)
    except ConvergenceError:
        return error_constants(1.0, beta, nan, nan, nan, s=s, iters_used=iters)
    iters["cg"] = it_cg
    eta = project_support(Y - Zhat, S).norm_fro()
    Sc = S.complement()
    theta = norm_linf2(project_support(Y, Sc)) if Sc.s else 0.0
    un = float(np.linalg.norm(ups))
    tau = un / math.sqrt(s) if s > 0 else 0.0
    return error_constants(delta, beta, eta, theta, tau, upsilon_norm=un, s=s, iters_used=iters)


def error_bound(report: CertificateReport, offsupport_l12: float, sigma: float, s: int) -> float:
    """``C1 * offsupport_l12 + (C2 + C3 sqrt(s)) * sigma``."""
    if not report.guarantee_holds:
        raise NoGuaranteeError("the recovery condition does not hold for this report")
    return report.c1 * offsupport_l12 + (report.c2 + report.c3 * math.sqrt(s)) * sigma


@dataclass
class BudgetQuery:
    """Inputs of the measurement-count expression.

    ``profile`` lists ``(k_i, n_i, s_i)`` triples.
    """

    profile: Sequence[tuple[int, int, int]]
    mu_minus: float = 1.0
    mu_plus: float = 1.0
    epsilon: float = 0.01
    leading_constant: float = 1.0

    def __post_init__(self):
        self.profile = tuple((int(k), int(n), int(s)) for k, n, s in self.profile)
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidInputError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.profile:
            raise InvalidInputError("profile must not be empty")
        for k, n, s in self.profile:
            if k < 1 or n < 1 or s < 0:
                raise InvalidInputError(f"invalid block (k={k}, n={n}, s={s})")
        if not (self.mu_minus > 0 and self.mu_plus > 0 and self.leading_constant > 0):
            raise InvalidInputError("mu bounds and leading constant must be positive")


def measurement_budget(bq: BudgetQuery) -> int:
    """``ceil(c mu+^2 k* s log(1 + mu+^4 k* sum s_i k_i / (mu-^2 k_*)) log(n k* / eps))``."""
    ks = [k for k, _, _ in bq.profile]
    k_hi, k_lo = max(ks), min(ks)
    s = sum(s for _, _, s in bq.profile)
    if s == 0:
        return 0
    n = sum(n for _, n, _ in bq.profile)
    sk = sum(k * s for k, _, s in bq.profile)
    value = (bq.leading_constant * bq.mu_plus ** 2 * k_hi * s
             * math.log(1.0 + bq.mu_plus ** 4 * k_hi * sk / (bq.mu_minus ** 2 * k_lo))
             * math.log(n * k_hi / bq.epsilon))
    return int(math.ceil(value))
