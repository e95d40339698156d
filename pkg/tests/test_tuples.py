import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_tuple
from sparsedemix.errors import InvalidInputError, ShapeMismatchError
from sparsedemix.tuples import (MatrixTuple, SupportPattern, block_soft_threshold, from_json, inner,
                                norm_l12, norm_linf2, normalize_columns, project_support,
                                subdiff_check, to_json)

PROFILE = ((3, 5), (2, 4))


def test_norm_examples():
    X = MatrixTuple([np.array([[3.0, 0], [4, 0]])])
    assert norm_l12(X) == 5
    assert norm_linf2(X) == 5
    assert norm_l12(MatrixTuple([np.eye(2)])) == 2
    assert norm_l12(MatrixTuple([np.eye(2), np.eye(2)])) == 4
    assert norm_linf2(MatrixTuple.zeros(PROFILE)) == 0


def test_rejects_non_finite_and_bad_shapes():
    with pytest.raises(InvalidInputError):
        MatrixTuple([np.array([[np.nan]])])
    with pytest.raises(InvalidInputError):
        MatrixTuple([np.ones(3)])
    with pytest.raises(InvalidInputError):
        MatrixTuple([])
    with pytest.raises(ShapeMismatchError):
        MatrixTuple.zeros(PROFILE) + MatrixTuple.zeros(((3, 5),))


def test_blocks_are_read_only():
    X = MatrixTuple([np.ones((2, 2))])
    with pytest.raises(ValueError):
        X.blocks[0][0, 0] = 5


def test_vector_roundtrip(rng):
    X = random_tuple(rng, PROFILE)
    Y = MatrixTuple.from_vector(X.to_vector(), PROFILE)
    assert (X - Y).norm_fro() == 0
    # kappa runs fastest inside each column
    assert X.to_vector()[1] == X.blocks[0][1, 0]


def test_duality_and_norm_axioms(rng):
    for _ in range(100):
        X, Y = random_tuple(rng, PROFILE), random_tuple(rng, PROFILE)
        assert abs(inner(X, Y)) <= norm_linf2(X) * norm_l12(Y) + 1e-12
        assert norm_l12(X + Y) <= norm_l12(X) + norm_l12(Y) + 1e-12
        assert norm_linf2(X + Y) <= norm_linf2(X) + norm_linf2(Y) + 1e-12
        c = complex(rng.standard_normal(), rng.standard_normal())
        assert np.isclose(norm_l12(X * c), abs(c) * norm_l12(X))
        assert np.isclose(norm_linf2(X * c), abs(c) * norm_linf2(X))


def test_inner_is_conjugate_linear_in_first_argument(rng):
    X, Y = random_tuple(rng, PROFILE), random_tuple(rng, PROFILE)
    assert np.isclose(inner(X * 1j, Y), -1j * inner(X, Y))
    assert np.isclose(inner(X, X).real, X.norm_fro() ** 2)


def test_project_support(rng):
    X, Y = random_tuple(rng, PROFILE), random_tuple(rng, PROFILE)
    assert (project_support(X, SupportPattern.full(PROFILE)) - X).norm_fro() == 0
    assert project_support(X, SupportPattern.empty(PROFILE)).norm_fro() == 0
    S = SupportPattern([[0, 3], [1]], PROFILE)
    PX = project_support(X, S)
    assert (project_support(PX, S) - PX).norm_fro() == 0
    assert abs(inner(PX, Y) - inner(X, project_support(Y, S))) <= 1e-12 * X.norm_fro() * Y.norm_fro()
    total = PX + project_support(X, S.complement())
    assert (total - X).norm_fro() == 0


def test_support_pattern_validation():
    with pytest.raises(InvalidInputError):
        SupportPattern([[0, 0], []], PROFILE)
    with pytest.raises(InvalidInputError):
        SupportPattern([[5], []], PROFILE)
    with pytest.raises(ShapeMismatchError):
        SupportPattern([[0]], PROFILE)
    S = SupportPattern([[4, 1], [0]], PROFILE)
    assert S.sets == ((1, 4), (0,))
    assert S.s == 3 and S.dim == 2 * 3 + 2
    assert S.pairs() == [(0, 1), (0, 4), (1, 0)]


def test_pack_unpack(rng):
    S = SupportPattern([[1, 2], [3]], PROFILE)
    X = project_support(random_tuple(rng, PROFILE), S)
    assert (S.unpack(S.pack(X)) - X).norm_fro() == 0
    assert SupportPattern.of(X) == S


def test_normalize_columns():
    X = MatrixTuple([np.array([[3.0, 0], [4, 0]])])
    out = normalize_columns(X).blocks[0]
    assert np.allclose(out[:, 0], [0.6, 0.8]) and np.all(out[:, 1] == 0)
    assert normalize_columns(MatrixTuple.zeros(PROFILE)).norm_fro() == 0


def test_normalize_columns_frobenius_is_sqrt_s(rng):
    X = random_tuple(rng, PROFILE, sparsity=(2, 3))
    assert np.isclose(normalize_columns(X).norm_fro(), np.sqrt(5))


def test_soft_threshold_examples():
    X = MatrixTuple([np.array([[3.0], [4.0]])])
    assert block_soft_threshold(X, 5.0).norm_fro() == 0
    assert np.allclose(block_soft_threshold(X, 2.5).blocks[0][:, 0], [1.5, 2.0])
    for bad in (0.0, -1.0):
        with pytest.raises(InvalidInputError):
            block_soft_threshold(X, bad)


def test_soft_threshold_satisfies_prox_condition(rng):
    X = random_tuple(rng, PROFILE)
    out = block_soft_threshold(X, 0.3)
    assert subdiff_check(out, (X - out) * (1 / 0.3))


def test_subdiff_check_examples(rng):
    Z = normalize_columns(random_tuple(rng, PROFILE, sparsity=(2, 1)))
    assert subdiff_check(Z, normalize_columns(Z))
    V = random_tuple(rng, PROFILE)
    V = V * (1 / norm_linf2(V))
    assert subdiff_check(MatrixTuple.zeros(PROFILE), V)
    W = MatrixTuple([np.array([[1.5, 0.0]]).T @ np.ones((1, 1))])
    assert not subdiff_check(MatrixTuple([np.zeros((2, 1))]), W)


def test_subgradient_inequality(rng):
    Z = random_tuple(rng, PROFILE, sparsity=(2, 1))
    V = normalize_columns(Z)
    comp = project_support(random_tuple(rng, PROFILE), SupportPattern.of(Z).complement())
    V = V + comp * (0.9 / norm_linf2(comp))
    assert subdiff_check(Z, V)
    for _ in range(200):
        H = random_tuple(rng, PROFILE) * rng.uniform(0.01, 3)
        assert norm_l12(Z + H) >= norm_l12(Z) + inner(H, V).real - 1e-10


def test_json_roundtrip(rng):
    X = random_tuple(rng, PROFILE)
    S = SupportPattern([[0], [1, 2]], PROFILE)
    d = json.loads(json.dumps(to_json(X, S)))
    assert d["blocks"][0]["re"][:PROFILE[0][1]] == X.blocks[0].real[0].tolist()  # row-major
    Y, S2 = from_json(d)
    assert (X - Y).norm_fro() == 0 and S2 == S
    with pytest.raises(InvalidInputError):
        from_json({"blocks": [{"k": 2}]})


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 5), st.floats(0.01, 10), st.integers(0, 2 ** 32 - 1))
def test_prox_is_shrinkage(k, n, lam, seed):
    rng = np.random.default_rng(seed)
    X = random_tuple(rng, ((k, n),))
    out = block_soft_threshold(X, lam)
    for c_in, c_out in zip(X.column_norms()[0], out.column_norms()[0]):
        assert np.isclose(c_out, max(0.0, c_in - lam), atol=1e-12)
