"""Complex matrix tuples and the column-wise mixed norms on them.

A :class:`MatrixTuple` is an ordered list ``(Z_1, ..., Z_r)`` of complex
matrices with shapes ``k_i x n_i``.  Columns are the unit of sparsity: a
:class:`SupportPattern` selects, per block, the set of columns allowed to be
nonzero.

Inner products are conjugate-linear in the first argument::

    <X, Y> = sum_i trace(X_i^* Y_i)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError, ShapeMismatchError

Profile = tuple[tuple[int, int], ...]

#: Default absolute tolerance on column norms used by :func:`subdiff_check`.
SUBDIFF_TOL = 1e-8


def _as_block(block) -> np.ndarray:
    arr = np.array(block, dtype=np.complex128, copy=True)
    if arr.ndim != 2:
        raise InvalidInputError(f"blocks must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"blocks must have k, n >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("matrix tuple contains non-finite entries")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class MatrixTuple:
    """Immutable tuple of complex ``k_i x n_i`` matrices."""

    blocks: tuple[np.ndarray, ...]

    def __init__(self, blocks: Iterable):
        blocks = tuple(_as_block(b) for b in blocks)
        if not blocks:
            raise InvalidInputError("a matrix tuple needs at least one block")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def zeros(cls, profile: Sequence[tuple[int, int]]) -> "MatrixTuple":
        return cls(np.zeros((k, n), dtype=np.complex128) for k, n in profile)

    @classmethod
    def from_vector(cls, vec, profile: Sequence[tuple[int, int]]) -> "MatrixTuple":
        """Inverse of :meth:`to_vector`."""
        vec = np.asarray(vec, dtype=np.complex128)
        sizes = [k * n for k, n in profile]
        if vec.shape != (sum(sizes),):
            raise ShapeMismatchError(
                f"vector of length {vec.shape} does not fit profile {tuple(profile)}")
        parts = np.split(vec, np.cumsum(sizes)[:-1])
        return cls(p.reshape((k, n), order="F") for p, (k, n) in zip(parts, profile))

    @property
    def profile(self) -> Profile:
        return tuple((b.shape[0], b.shape[1]) for b in self.blocks)

    @property
    def r(self) -> int:
        return len(self.blocks)

    @property
    def dim(self) -> int:
        return sum(b.size for b in self.blocks)

    def to_vector(self) -> np.ndarray:
        """Stack blocks column-major; entry ``(i, j, kappa)`` follows the order i, j, kappa."""
        return np.concatenate([b.reshape(-1, order="F") for b in self.blocks])

    def column_norms(self) -> list[np.ndarray]:
        return [np.linalg.norm(b, axis=0) for b in self.blocks]

    def norm_fro(self) -> float:
        return float(np.sqrt(sum(np.vdot(b, b).real for b in self.blocks)))

    def _check_same(self, other: "MatrixTuple"):
        if not isinstance(other, MatrixTuple):
            raise InvalidInputError(f"expected MatrixTuple, got {type(other).__name__}")
        if self.profile != other.profile:
            raise ShapeMismatchError(f"profiles differ: {self.profile} vs {other.profile}")

    def __add__(self, other: "MatrixTuple") -> "MatrixTuple":
        self._check_same(other)
        return MatrixTuple(a + b for a, b in zip(self.blocks, other.blocks))

    def __sub__(self, other: "MatrixTuple") -> "MatrixTuple":
        self._check_same(other)
        return MatrixTuple(a - b for a, b in zip(self.blocks, other.blocks))

    def __neg__(self) -> "MatrixTuple":
        return MatrixTuple(-b for b in self.blocks)

    def __mul__(self, scalar) -> "MatrixTuple":
        return MatrixTuple(scalar * b for b in self.blocks)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"MatrixTuple(profile={self.profile})"


def inner(X: MatrixTuple, Y: MatrixTuple) -> complex:
    """Frobenius inner product, conjugate-linear in ``X``."""
    X._check_same(Y)
    return complex(sum(np.vdot(a, b) for a, b in zip(X.blocks, Y.blocks)))


def norm_l12(X: MatrixTuple) -> float:
    """Sum of the Euclidean norms of all columns of all blocks."""
    return float(sum(c.sum() for c in X.column_norms()))


def norm_linf2(X: MatrixTuple) -> float:
    """Largest column Euclidean norm; the dual norm of :func:`norm_l12`."""
    return float(max(c.max() for c in X.column_norms()))


@dataclass(frozen=True)
class SupportPattern:
    """Per-block sorted column index sets, 0-based.

    ``profile`` records the ``(k_i, n_i)`` dimensions the pattern belongs to.
    """

    sets: tuple[tuple[int, ...], ...]
    profile: Profile

    def __init__(self, sets: Iterable[Iterable[int]], profile: Sequence[tuple[int, int]]):
        profile = tuple((int(k), int(n)) for k, n in profile)
        sets = tuple(tuple(sorted(int(j) for j in s)) for s in sets)
        if len(sets) != len(profile):
            raise ShapeMismatchError(
                f"{len(sets)} index sets given for a profile with {len(profile)} blocks")
        for s, (_, n) in zip(sets, profile):
            if len(set(s)) != len(s):
                raise InvalidInputError(f"duplicate column indices in {s}")
            if s and (s[0] < 0 or s[-1] >= n):
                raise InvalidInputError(f"column indices {s} out of range for n={n}")
        object.__setattr__(self, "sets", sets)
        object.__setattr__(self, "profile", profile)

    @classmethod
    def full(cls, profile) -> "SupportPattern":
        return cls([range(n) for _, n in profile], profile)

    @classmethod
    def empty(cls, profile) -> "SupportPattern":
        return cls([() for _ in profile], profile)

    @classmethod
    def of(cls, X: MatrixTuple, atol: float = 0.0) -> "SupportPattern":
        """Columns of ``X`` whose norm exceeds ``atol``."""
        return cls([np.flatnonzero(c > atol) for c in X.column_norms()], X.profile)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.sets)

    @property
    def s(self) -> int:
        return sum(self.sizes)

    @property
    def dim(self) -> int:
        """Dimension of the subspace of tuples supported on this pattern."""
        return sum(len(s) * k for s, (k, _) in zip(self.sets, self.profile))

    def complement(self) -> "SupportPattern":
        return SupportPattern(
            [sorted(set(range(n)) - set(s)) for s, (_, n) in zip(self.sets, self.profile)],
            self.profile)

    def pairs(self) -> list[tuple[int, int]]:
        """All ``(i, j)`` block/column pairs in the pattern."""
        return [(i, j) for i, s in enumerate(self.sets) for j in s]

    def masks(self) -> list[np.ndarray]:
        out = []
        for s, (_, n) in zip(self.sets, self.profile):
            m = np.zeros(n, dtype=bool)
            m[list(s)] = True
            out.append(m)
        return out

    def check(self, X: MatrixTuple):
        if X.profile != self.profile:
            raise ShapeMismatchError(
                f"support profile {self.profile} does not match tuple profile {X.profile}")

    def pack(self, X: MatrixTuple) -> np.ndarray:
        """Coordinates of ``P_S X`` in the support subspace (length :attr:`dim`)."""
        self.check(X)
        parts = [b[:, list(s)].reshape(-1, order="F") for b, s in zip(X.blocks, self.sets)]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.complex128)

    def unpack(self, vec) -> MatrixTuple:
        """Embed support-subspace coordinates back into a full tuple."""
        vec = np.asarray(vec, dtype=np.complex128)
        if vec.shape != (self.dim,):
            raise ShapeMismatchError(f"expected {self.dim} coordinates, got {vec.shape}")
        blocks, pos = [], 0
        for s, (k, n) in zip(self.sets, self.profile):
            b = np.zeros((k, n), dtype=np.complex128)
            m = len(s) * k
            b[:, list(s)] = vec[pos:pos + m].reshape((k, len(s)), order="F")
            pos += m
            blocks.append(b)
        return MatrixTuple(blocks)


def project_support(X: MatrixTuple, S: SupportPattern) -> MatrixTuple:
    """Zero every column of ``X`` outside ``S``."""
    S.check(X)
    return MatrixTuple(b * m[None, :] for b, m in zip(X.blocks, S.masks()))


def normalize_columns(X: MatrixTuple) -> MatrixTuple:
    """Scale every nonzero column to unit norm; zero columns stay zero."""
    out = []
    for b, c in zip(X.blocks, X.column_norms()):
        scale = np.divide(1.0, c, out=np.zeros_like(c), where=c > 0)
        out.append(b * scale[None, :])
    return MatrixTuple(out)


def _shrink_factors(norms: np.ndarray, lam: float) -> np.ndarray:
    return np.maximum(0.0, 1.0 - np.divide(lam, norms, out=np.full_like(norms, np.inf),
                                           where=norms > 0))


def block_soft_threshold(X: MatrixTuple, lam: float) -> MatrixTuple:
    """Proximal map of ``lam * ||.||_{1,2}``: shrink every column by ``lam`` in norm."""
    if not lam > 0:
        raise InvalidInputError(f"threshold must be positive, got {lam}")
    return MatrixTuple(b * _shrink_factors(c, lam)[None, :]
                       for b, c in zip(X.blocks, X.column_norms()))


def subdiff_check(Z: MatrixTuple, V: MatrixTuple, tol: float = SUBDIFF_TOL) -> bool:
    """Whether ``V`` lies in the subdifferential of ``||.||_{1,2}`` at ``Z``.

    Nonzero columns of ``Z`` must be matched by their normalized versions in
    ``V``; every other column of ``V`` must have norm at most one.
    """
    Z._check_same(V)
    if tol < 0:
        raise InvalidInputError("tol must be nonnegative")
    for z, v in zip(Z.blocks, V.blocks):
        zn = np.linalg.norm(z, axis=0)
        on = zn > 0
        if np.any(on):
            target = z[:, on] / zn[on]
            if np.max(np.linalg.norm(v[:, on] - target, axis=0)) > tol:
                return False
        if np.any(~on) and np.max(np.linalg.norm(v[:, ~on], axis=0)) > 1.0 + tol:
            return False
    return True


def to_json(X: MatrixTuple, S: SupportPattern | None = None) -> dict:
    """JSON container: row-major real/imaginary parts plus optional 0-based supports."""
    out = {"blocks": [{"k": b.shape[0], "n": b.shape[1],
                       "re": b.real.ravel().tolist(), "im": b.imag.ravel().tolist()}
                      for b in X.blocks]}
    if S is not None:
        S.check(X)
        out["supports"] = [list(s) for s in S.sets]
    return out


def from_json(data: dict) -> tuple[MatrixTuple, SupportPattern | None]:
    try:
        blocks = []
        for item in data["blocks"]:
            k, n = int(item["k"]), int(item["n"])
            re = np.asarray(item["re"], dtype=float).reshape(k, n)
            im = np.asarray(item.get("im", np.zeros(k * n)), dtype=float).reshape(k, n)
            blocks.append(re + 1j * im)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed matrix tuple container: {exc}") from exc
    X = MatrixTuple(blocks)
    S = SupportPattern(data["supports"], X.profile) if "supports" in data else None
    return X, S
