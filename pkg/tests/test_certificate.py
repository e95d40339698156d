import json
import math

import numpy as np
import pytest

from sparsedemix.certificate import (BudgetQuery, build_certificate, certificate_params,
                                     error_bound, error_constants, estimate_beta, estimate_delta,
                                     guarantee_check, measurement_budget)
from sparsedemix.errors import InvalidInputError, NoGuaranteeError
from sparsedemix.instances import build_instance, make_spec
from sparsedemix.measurement import FrameFamily, MeasurementEnsemble, forward
from sparsedemix.oracle import dense_beta, dense_delta
from sparsedemix.tuples import MatrixTuple, SupportPattern, normalize_columns, project_support

SQ5 = math.sqrt(5)


@pytest.fixture(scope="module")
def desk():
    return build_instance(make_spec(((4, 32), (3, 24)), 192, (2, 1), 4))


def test_empty_support_and_full_support(desk):
    E = desk.ensemble
    assert estimate_delta(E, SupportPattern.empty(E.profile)) == 0
    assert estimate_beta(E, SupportPattern.full(E.profile)) == 0


def test_scalar_delta():
    g = 1.7 - 0.4j
    E = MeasurementEnsemble(FrameFamily([np.array([[1.0]])]), (np.array([[g]]),))
    S = SupportPattern.full(E.profile)
    assert np.isclose(estimate_delta(E, S), abs(abs(g) ** 2 - 1))
    assert np.isclose(dense_delta(E, S), abs(abs(g) ** 2 - 1))


def test_matches_dense_oracle(desk):
    E, S = desk.ensemble, desk.support
    assert abs(estimate_delta(E, S) - dense_delta(E, S)) <= 1e-6
    assert abs(estimate_beta(E, S) - dense_beta(E, S)) <= 1e-6


def test_exact_certificate(desk):
    E, S = desk.ensemble, desk.support
    Zhat = normalize_columns(desk.Z0)
    ups, Y = build_certificate(E, S, Zhat)
    assert project_support(Y - Zhat, S).norm_fro() <= 1e-8
    assert np.allclose(forward(E, MatrixTuple.zeros(E.profile)), 0)


def test_orthonormal_restriction_gives_identity_inverse():
    # q = 2, one block with k = 1, n = 2; DFT frame and orthonormal sketches:
    # A restricted to the full support is unitary, so delta = 0.
    b = np.array([[1.0], [1.0]]) / np.sqrt(2)
    a = np.sqrt(2) * np.eye(2)
    E = MeasurementEnsemble(FrameFamily([b]), (a,))
    S = SupportPattern.full(E.profile)
    assert estimate_delta(E, S) <= 1e-12
    Zhat = MatrixTuple([np.array([[1.0, -1.0]])])
    ups, Y = build_certificate(E, S, Zhat)
    assert np.allclose(ups, forward(E, Zhat))
    assert np.allclose(Y.blocks[0], Zhat.blocks[0])


def test_report_invariants(desk):
    rep = certificate_params(desk.ensemble, desk.support, desk.Z0)
    assert rep.guarantee_holds == guarantee_check(rep.delta, rep.rho)
    assert np.isclose(rep.rho, rep.theta + rep.eta * rep.beta / (1 - rep.delta))
    assert np.isclose(rep.mu, math.sqrt(1 + rep.delta) / (1 - rep.delta))
    assert rep.eta <= 1e-9
    assert np.isclose(rep.tau, rep.upsilon_norm / math.sqrt(3))
    d = json.loads(json.dumps(rep.to_json()))
    assert d["s"] == 3 and "iters_used" in d
    assert set(rep.csv_row()) >= {"delta", "beta", "theta", "rho"}


def test_scenario_constants():
    rep = error_constants(0.25, 1.25, 0.0, 0.5, 2 * SQ5 / 3)
    assert abs(rep.rho - 0.5) <= 1e-12
    assert abs(rep.mu - 2 * SQ5 / 3) <= 1e-12
    assert abs(rep.c1 - 32 / 3) <= 1e-12
    assert abs(rep.c2 - 4 * SQ5 / 3) <= 1e-12
    assert abs(rep.c3 - 64 * SQ5 / 9) <= 1e-12
    assert rep.guarantee_holds


def test_constants_undefined_when_delta_too_large():
    rep = error_constants(1.0, 0.5, 0.0, 0.1, 1.0)
    assert not rep.guarantee_holds and not rep.constants_defined and math.isnan(rep.c1)
    assert json.loads(json.dumps(rep.to_json()))["c1"] is None
    rep = error_constants(0.5, 1.0, 1.0, 0.6, 1.0)  # rho = 2.6
    assert not rep.guarantee_holds


def test_error_bound():
    rep = error_constants(0.25, 1.25, 0.0, 0.5, 2 * SQ5 / 3)
    assert error_bound(rep, 0.0, 0.0, 3) == 0
    assert np.isclose(error_bound(rep, 0.7, 1.0, 1), 32 / 3 * 0.7 + 4 * SQ5 / 3 + 64 * SQ5 / 9)
    assert np.isclose(error_bound(rep, 0.0, 2.0, 4), 2 * error_bound(rep, 0.0, 1.0, 4))
    with pytest.raises(NoGuaranteeError):
        error_bound(error_constants(1.5, 0, 0, 0, 0), 0, 1, 1)


def test_under_sampled_has_no_guarantee():
    inst = build_instance(make_spec(((4, 32),), 6, (2,), 1))  # q < s k
    rep = certificate_params(inst.ensemble, inst.support, inst.Z0)
    assert rep.delta >= 1 and not rep.guarantee_holds


def test_measurement_budget():
    assert measurement_budget(BudgetQuery([(4, 32, 0)])) == 0
    value = 8 * math.log(9) * math.log(32 * 4 / 0.01)
    assert measurement_budget(BudgetQuery([(4, 32, 2)])) == math.ceil(value) == 167
    base = measurement_budget(BudgetQuery([(4, 32, 2)]))
    assert measurement_budget(BudgetQuery([(4, 32, 3)])) >= base
    assert measurement_budget(BudgetQuery([(5, 32, 2)])) >= base
    assert measurement_budget(BudgetQuery([(4, 32, 2)], epsilon=0.001)) >= base
    for bad in (0.0, 1.0):
        with pytest.raises(InvalidInputError):
            BudgetQuery([(4, 32, 2)], epsilon=bad)
