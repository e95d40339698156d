"""Frames, Gaussian sketches and the lifted measurement map.

The measurement map sends a matrix tuple ``Z = (Z_i)`` to the vector

    A(Z)_l = sum_i <b_l^i, Z_i a_l^i>,     l = 0..q-1,

where the ``b_l^i`` form a Parseval frame of ``C^{k_i}`` and the ``a_l^i`` are
Gaussian vectors in ``C^{n_i}``.  Frames are stored as ``q x k_i`` arrays whose
rows are the ``b_l^i``; sketches as ``q x n_i`` arrays whose rows are the
``a_l^i``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .errors import BudgetExceededError, InvalidInputError, ShapeMismatchError
from .seeding import child_seeds
from .tuples import MatrixTuple, Profile, SupportPattern, project_support

#: Maximum number of columns :func:`materialize_dense` will build.
DENSE_CAP = 20000
PARSEVAL_TOL = 1e-10
LIFT_TOL = 1e-8
EQUAL_NORM_TOL = 1e-12
GENERATOR = "numpy.PCG64"


class Convention(str, enum.Enum):
    """Gaussian law of the sketch entries."""

    COMPLEX = "complex"  # circular, E|g|^2 = 1 (re/im variance 1/2 each)
    REAL = "real"        # standard real normals


def unitary_dft(x, axis: int = -1) -> np.ndarray:
    return np.fft.fft(x, axis=axis, norm="ortho")


def unitary_idft(x, axis: int = -1) -> np.ndarray:
    return np.fft.ifft(x, axis=axis, norm="ortho")


def circular_convolve(w, z) -> np.ndarray:
    """Length-q circular convolution by direct summation (no FFT)."""
    w, z = np.asarray(w), np.asarray(z)
    if w.shape != z.shape or w.ndim != 1:
        raise ShapeMismatchError(f"cannot convolve shapes {w.shape} and {z.shape}")
    q = w.size
    idx = (np.arange(q)[:, None] - np.arange(q)[None, :]) % q
    return (w[idx] * z[None, :]).sum(axis=1)


def _parseval_residual(vectors: np.ndarray) -> float:
    k = vectors.shape[1]
    gram = vectors.T @ vectors.conj()  # sum_l b_l b_l^*
    return float(np.linalg.norm(gram - np.eye(k), 2))


@dataclass(frozen=True, eq=False)
class FrameFamily:
    """Per-component frames ``(b_l^i)`` with measured conditioning bounds.

    ``mu_minus``/``mu_plus`` are the tightest values with
    ``(q/k_i) * ||b_l^i||^2`` in ``[mu_minus^2, mu_plus^2]``.
    """

    vectors: tuple[np.ndarray, ...]
    kind: str = "custom"
    seed: int | None = None
    mu_minus: float = field(init=False)
    mu_plus: float = field(init=False)

    def __init__(self, vectors: Sequence, kind: str = "custom", seed: int | None = None,
                 validate: bool = True):
        vecs = []
        for v in vectors:
            v = np.array(v, dtype=np.complex128, copy=True)
            if v.ndim != 2:
                raise InvalidInputError(f"frame arrays must be q x k, got {v.shape}")
            v.flags.writeable = False
            vecs.append(v)
        if not vecs:
            raise InvalidInputError("a frame family needs at least one component")
        q = vecs[0].shape[0]
        if any(v.shape[0] != q for v in vecs):
            raise ShapeMismatchError("all frames must have the same number q of vectors")
        scaled = np.concatenate([q / v.shape[1] * np.sum(np.abs(v) ** 2, axis=1) for v in vecs])
        object.__setattr__(self, "vectors", tuple(vecs))
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "seed", seed)
        lo, hi = float(np.sqrt(scaled.min())), float(np.sqrt(scaled.max()))
        if kind == "dft":
            # equal-norm rows: the bounds are exactly one, rounding aside
            if np.max(np.abs(scaled - 1.0)) > EQUAL_NORM_TOL:
                raise InvalidInputError("frame labelled 'dft' does not have equal-norm rows")
            lo = hi = 1.0
        object.__setattr__(self, "mu_minus", lo)
        object.__setattr__(self, "mu_plus", hi)
        if validate:
            self.validate()

    @property
    def q(self) -> int:
        return self.vectors[0].shape[0]

    @property
    def ks(self) -> tuple[int, ...]:
        return tuple(v.shape[1] for v in self.vectors)

    def parseval_residuals(self) -> list[float]:
        return [_parseval_residual(v) for v in self.vectors]

    def validate(self, tol: float = PARSEVAL_TOL):
        res = self.parseval_residuals()
        if max(res) > tol:
            raise InvalidInputError(f"frames are not Parseval: residuals {res}")
        if not self.mu_minus <= self.mu_plus:
            raise InvalidInputError("inconsistent conditioning bounds")


def make_dft_frame(q: int, k: int) -> np.ndarray:
    """Rows of the first ``k`` columns of the unitary ``q x q`` DFT matrix."""
    if not 1 <= k <= q:
        raise InvalidInputError(f"need 1 <= k <= q, got k={k}, q={q}")
    ell = np.arange(q)[:, None]
    kappa = np.arange(k)[None, :]
    return np.exp(-2j * np.pi * ell * kappa / q) / np.sqrt(q)


def make_random_frame(q: int, k: int, seed=None) -> np.ndarray:
    """Rows of a Haar-random ``q x k`` matrix with orthonormal columns."""
    if not 1 <= k <= q:
        raise InvalidInputError(f"need 1 <= k <= q, got k={k}, q={q}")
    rng = np.random.default_rng(seed)
    g = (rng.standard_normal((q, k)) + 1j * rng.standard_normal((q, k))) / np.sqrt(2)
    Q, R = np.linalg.qr(g)
    d = np.diag(R)
    return Q * (d / np.abs(d))[None, :]


def make_frames(kind: str, q: int, ks: Sequence[int], seed=None) -> FrameFamily:
    """Frame family of the given kind (``"dft"`` or ``"random"``) for every ``k_i``."""
    if kind == "dft":
        return FrameFamily([make_dft_frame(q, k) for k in ks], kind="dft")
    if kind == "random":
        seeds = child_seeds(seed, len(ks))
        return FrameFamily([make_random_frame(q, k, s) for k, s in zip(ks, seeds)],
                           kind="random", seed=seed)
    raise InvalidInputError(f"unknown frame kind {kind!r}")


@dataclass(frozen=True, eq=False)
class MeasurementEnsemble:
    """Frames plus sketches ``a_l^i``; realizes the measurement map."""

    frames: FrameFamily
    sketches: tuple[np.ndarray, ...]
    convention: Convention = Convention.COMPLEX
    seed: int | None = None
    generator: str = GENERATOR

    def __post_init__(self):
        sk = []
        for a in self.sketches:
            a = np.array(a, dtype=np.complex128, copy=True)
            a.flags.writeable = False
            sk.append(a)
        object.__setattr__(self, "sketches", tuple(sk))
        object.__setattr__(self, "convention", Convention(self.convention))
        if len(sk) != len(self.frames.vectors):
            raise ShapeMismatchError("one sketch array per frame component is required")
        for a in sk:
            if a.ndim != 2 or a.shape[0] != self.q:
                raise ShapeMismatchError(f"sketch array of shape {a.shape} does not match q={self.q}")

    @property
    def q(self) -> int:
        return self.frames.q

    @property
    def r(self) -> int:
        return len(self.sketches)

    @property
    def profile(self) -> Profile:
        return tuple((b.shape[1], a.shape[1]) for b, a in zip(self.frames.vectors, self.sketches))

    @property
    def dim(self) -> int:
        return sum(k * n for k, n in self.profile)

    @cached_property
    def _conj_frames(self) -> tuple[np.ndarray, ...]:
        return tuple(b.conj() for b in self.frames.vectors)

    @cached_property
    def _conj_sketches(self) -> tuple[np.ndarray, ...]:
        return tuple(a.conj() for a in self.sketches)

    @cached_property
    def gram(self) -> np.ndarray:
        """``A A^*`` as a dense ``q x q`` matrix."""
        out = np.zeros((self.q, self.q), dtype=np.complex128)
        for bc, b, a in zip(self._conj_frames, self.frames.vectors, self.sketches):
            out += (bc @ b.T) * (a @ a.conj().T)
        return out

    # Block-level kernels on raw arrays; solvers call these in their inner loops.
    def apply(self, blocks: Sequence[np.ndarray]) -> np.ndarray:
        out = np.zeros(self.q, dtype=np.complex128)
        for bc, a, x in zip(self._conj_frames, self.sketches, blocks):
            out += np.einsum("lk,kn,ln->l", bc, x, a, optimize=True)
        return out

    def apply_adjoint(self, p: np.ndarray) -> list[np.ndarray]:
        return [b.T @ (p[:, None] * ac) for b, ac in zip(self.frames.vectors, self._conj_sketches)]

    def check_tuple(self, X: MatrixTuple):
        if X.profile != self.profile:
            raise ShapeMismatchError(f"tuple profile {X.profile} does not match ensemble {self.profile}")

    def check_support(self, S: SupportPattern):
        if S.profile != self.profile:
            raise ShapeMismatchError(f"support profile {S.profile} does not match ensemble {self.profile}")


def sample_ensemble(profile: Sequence[tuple[int, int]], frames: FrameFamily,
                    convention: Convention | str = Convention.COMPLEX, seed=None) -> MeasurementEnsemble:
    """Draw independent Gaussian sketches for every component.

    Draws are taken in ``(i, l)`` lexicographic order from ``numpy.random.default_rng(seed)``;
    each complex entry consumes two normals (real part first).
    """
    convention = Convention(convention)
    profile = tuple((int(k), int(n)) for k, n in profile)
    if tuple(k for k, _ in profile) != frames.ks:
        raise ShapeMismatchError(f"frames with k={frames.ks} do not match profile {profile}")
    rng = np.random.default_rng(seed)
    sketches = []
    for _, n in profile:
        if convention is Convention.COMPLEX:
            g = rng.standard_normal((frames.q, n, 2))
            sketches.append((g[..., 0] + 1j * g[..., 1]) / np.sqrt(2))
        else:
            sketches.append(rng.standard_normal((frames.q, n)).astype(np.complex128))
    return MeasurementEnsemble(frames, tuple(sketches), convention, seed)


def forward(E: MeasurementEnsemble, X: MatrixTuple) -> np.ndarray:
    """Apply the measurement map."""
    E.check_tuple(X)
    return E.apply(X.blocks)


def adjoint(E: MeasurementEnsemble, p) -> MatrixTuple:
    """Adjoint map: block ``i`` is ``sum_l p_l b_l^i (a_l^i)^*``."""
    p = np.asarray(p, dtype=np.complex128)
    if p.shape != (E.q,):
        raise ShapeMismatchError(f"expected a vector of length {E.q}, got shape {p.shape}")
    return MatrixTuple(E.apply_adjoint(p))


def column_op(E: MeasurementEnsemble, i: int, j: int, nu) -> np.ndarray:
    """``A_j^i nu``: measurements of the tuple holding ``nu e_j^*`` in block ``i``."""
    if not 0 <= i < E.r:
        raise InvalidInputError(f"block index {i} out of range")
    k, n = E.profile[i]
    if not 0 <= j < n:
        raise InvalidInputError(f"column index {j} out of range for n={n}")
    nu = np.asarray(nu, dtype=np.complex128)
    if nu.shape != (k,):
        raise ShapeMismatchError(f"expected a vector of length {k}, got {nu.shape}")
    return (E.frames.vectors[i].conj() @ nu) * E.sketches[i][:, j]


def column_matrix(E: MeasurementEnsemble, i: int, j: int) -> np.ndarray:
    """The ``q x k_i`` matrix of :func:`column_op` for fixed ``(i, j)``."""
    return E.frames.vectors[i].conj() * E.sketches[i][:, j][:, None]


def support_matrix(E: MeasurementEnsemble, S: SupportPattern) -> np.ndarray:
    """``A P_S`` as a ``q x dim(S)`` matrix in the coordinates of :meth:`SupportPattern.pack`."""
    E.check_support(S)
    cols = [column_matrix(E, i, j) for i, j in S.pairs()]
    if not cols:
        return np.zeros((E.q, 0), dtype=np.complex128)
    return np.concatenate(cols, axis=1)


def forward_support(E: MeasurementEnsemble, S: SupportPattern, coords) -> np.ndarray:
    """Measurements of the tuple with support coordinates ``coords``."""
    coords = np.asarray(coords, dtype=np.complex128)
    out = np.zeros(E.q, dtype=np.complex128)
    pos = 0
    for i, s in enumerate(S.sets):
        if not s:
            continue
        k = E.profile[i][0]
        x = coords[pos:pos + k * len(s)].reshape((k, len(s)), order="F")
        pos += k * len(s)
        out += np.einsum("lk,kj,lj->l", E._conj_frames[i], x, E.sketches[i][:, list(s)])
    return out


def adjoint_support(E: MeasurementEnsemble, S: SupportPattern, p) -> np.ndarray:
    """Support coordinates of ``P_S A^* p``."""
    parts = []
    for i, s in enumerate(S.sets):
        if s:
            blk = E.frames.vectors[i].T @ (p[:, None] * E._conj_sketches[i][:, list(s)])
            parts.append(blk.reshape(-1, order="F"))
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.complex128)


def normal_op_restricted(E: MeasurementEnsemble, S: SupportPattern, X: MatrixTuple) -> MatrixTuple:
    """``P_S A^* A P_S X``."""
    E.check_support(S)
    Xs = project_support(X, S)
    return project_support(adjoint(E, forward(E, Xs)), S)


def materialize_dense(E: MeasurementEnsemble, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense ``q x dim`` matrix of the measurement map.

    Column ``(i, j, kappa)`` (ordered as in :meth:`MatrixTuple.to_vector`) holds
    ``conj(b_l^i(kappa)) * a_l^i(j)``, i.e. the measurements of ``e_kappa e_j^*``
    placed in block ``i``.
    """
    if E.dim > cap:
        raise BudgetExceededError(f"dense materialization needs {E.dim} columns, cap is {cap}")
    cols = []
    for b, a in zip(E.frames.vectors, E.sketches):
        q, k = b.shape
        n = a.shape[1]
        cols.append((a[:, :, None] * b.conj()[:, None, :]).reshape(q, n * k))
    return np.concatenate(cols, axis=1)


@dataclass(frozen=True, eq=False)
class DeconvolutionInstance:
    """Planted blind deconvolution / demixing data.

    Conventions: the unitary DFT ``F`` is used throughout.  Filter spectra are
    ``F w_i = B^i f^i``; signal spectra are ``sqrt(q) F z_i = A^i g^i``, so that
    the convolution theorem ``F(w * z) = sqrt(q) (F w) . (F z)`` makes
    ``v_hat = F v = sum_i (B^i f^i) . (A^i g^i)`` with no stray constants.
    """

    w: tuple[np.ndarray, ...]
    z: tuple[np.ndarray, ...]
    B: tuple[np.ndarray, ...]
    A: tuple[np.ndarray, ...]
    f: tuple[np.ndarray, ...]
    g: tuple[np.ndarray, ...]
    v: np.ndarray
    v_hat: np.ndarray
    convention: Convention = Convention.COMPLEX
    seed: int | None = None

    @property
    def q(self) -> int:
        return self.v.shape[0]

    @property
    def r(self) -> int:
        return len(self.w)

    @property
    def profile(self) -> Profile:
        return tuple((b.shape[1], a.shape[1]) for b, a in zip(self.B, self.A))

    def support(self) -> SupportPattern:
        return SupportPattern([np.flatnonzero(gi) for gi in self.g], self.profile)


def make_deconvolution_instance(q: int, ks: Sequence[int], ns: Sequence[int], ss: Sequence[int],
                                frame_kind: str = "dft", seed=None,
                                convention: Convention | str = Convention.COMPLEX,
                                impulse: bool = False) -> DeconvolutionInstance:
    """Sample filters, sparse signals and their mixed convolution.

    The filter subspaces come from the chosen frame family, the signal subspaces
    from a Gaussian ensemble, and each ``g^i`` is ``s_i``-sparse with Gaussian
    nonzeros.  With ``impulse=True`` every ``f^i`` is the first basis vector.
    """
    if not len(ks) == len(ns) == len(ss):
        raise InvalidInputError("ks, ns and ss must have equal length")
    ss_seq, fr_seq, sk_seq = child_seeds(seed, 3)
    profile = tuple(zip(ks, ns))
    frames = make_frames(frame_kind, q, ks, fr_seq)
    E = sample_ensemble(profile, frames, convention, sk_seq)
    rng = np.random.default_rng(ss_seq)
    B = tuple(b.conj() for b in frames.vectors)
    A = E.sketches
    fs, gs, ws, zs = [], [], [], []
    for (k, n), s, Bi, Ai in zip(profile, ss, B, A):
        if not 0 <= s <= n:
            raise InvalidInputError(f"sparsity {s} out of range for n={n}")
        if impulse:
            f = np.zeros(k, dtype=np.complex128)
            f[0] = 1.0
        else:
            f = (rng.standard_normal(k) + 1j * rng.standard_normal(k)) / np.sqrt(2)
        g = np.zeros(n, dtype=np.complex128)
        supp = rng.choice(n, size=s, replace=False)
        g[supp] = (rng.standard_normal(s) + 1j * rng.standard_normal(s)) / np.sqrt(2)
        fs.append(f)
        gs.append(g)
        ws.append(unitary_idft(Bi @ f))
        zs.append(unitary_idft(Ai @ g) / np.sqrt(q))
    v = sum(circular_convolve(w, z) for w, z in zip(ws, zs))
    return DeconvolutionInstance(tuple(ws), tuple(zs), B, A, tuple(fs), tuple(gs),
                                 v, unitary_dft(v), Convention(convention), seed)


class LiftedProblem(NamedTuple):
    ensemble: MeasurementEnsemble
    Z0: MatrixTuple
    v_hat: np.ndarray
    residual: float


def _rel(a, b) -> float:
    scale = max(np.linalg.norm(b), np.finfo(float).tiny)
    return float(np.linalg.norm(a - b) / scale)


def lift_deconvolution(inst: DeconvolutionInstance, tol: float = LIFT_TOL) -> LiftedProblem:
    """Rewrite the bilinear convolution data as linear measurements of ``Z_i = f^i (g^i)^T``.

    Sets ``b_l^i(kappa) = conj(B_kappa^i(l))`` and ``a_l^i(j) = A_j^i(l)`` and checks
    that the lifted measurements reproduce the DFT of the observed mixture.
    """
    q = inst.q
    for i in range(inst.r):
        if _rel(unitary_dft(inst.w[i]), inst.B[i] @ inst.f[i]) > tol:
            raise InvalidInputError(f"filter {i} is inconsistent with its basis coefficients")
        if _rel(np.sqrt(q) * unitary_dft(inst.z[i]), inst.A[i] @ inst.g[i]) > tol:
            raise InvalidInputError(f"signal {i} is inconsistent with its basis coefficients")
    frames = FrameFamily([b.conj() for b in inst.B], validate=False)
    E = MeasurementEnsemble(frames, inst.A, inst.convention, inst.seed)
    Z0 = MatrixTuple(np.outer(f, g) for f, g in zip(inst.f, inst.g))
    v_hat = unitary_dft(inst.v)
    res = _rel(forward(E, Z0), v_hat)
    if res > tol:
        raise InvalidInputError(f"lifted measurements deviate from DFT(v) by {res:.3e}")
    return LiftedProblem(E, Z0, v_hat, res)
