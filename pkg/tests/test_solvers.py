import json
import math

import numpy as np
import pytest
from scipy.optimize import least_squares

from nlframe import certify, maps, solvers
from nlframe.errors import CertificateError, DivergenceError, InvalidInputError


def test_config_validation():
    with pytest.raises(InvalidInputError):
        solvers.SolverConfig(mu=0)
    with pytest.raises(InvalidInputError):
        solvers.SolverConfig(tol=0)
    with pytest.raises(InvalidInputError):
        solvers.SolverConfig(max_iter=0)
    assert solvers.SolverConfig(norm="linf").norm.p == math.inf


def test_left_inverse_rectangular_matches_least_squares():
    T = maps.seeded_operator((5, 3), 1)
    F = maps.perturbed_linear(T, 0.05, "sin")
    x_true = np.array([0.3, -0.2, 0.5])
    z = F(x_true)
    lo, hi = certify.derivative_ratio_bounds(F, T, solvers.default_plan(F, z, T))
    rep = solvers.left_inverse_iteration(F, T, z, solvers.SolverConfig(mu=1 / hi), x_true=x_true)
    assert rep.converged
    oracle = least_squares(lambda x: F(x) - z, np.zeros(3), xtol=1e-15, ftol=1e-15, gtol=1e-15).x
    assert np.allclose(rep.x, oracle, atol=1e-10)
    assert max(rep.ratios) <= rep.r0_predicted + 1e-9


def test_left_inverse_refuses_large_step_unless_forced():
    F = maps.perturbed_linear(np.eye(1), 0.1, "sin")
    z = F([1.0])
    with pytest.raises(CertificateError) as info:
        solvers.left_inverse_iteration(F, np.eye(1), z, solvers.SolverConfig(mu=1.5))
    assert info.value.margin < 0
    rep = solvers.left_inverse_iteration(F, np.eye(1), z, solvers.SolverConfig(mu=1.5, force=True))
    assert any(s == "unverified" for _, s, _ in rep.verdicts)


def test_left_inverse_rejects_wrong_tdag():
    F = maps.linear_map(np.eye(2))
    with pytest.raises(InvalidInputError):
        solvers.left_inverse_iteration(F, np.eye(2), np.ones(2), solvers.SolverConfig(), Tdag=2 * np.eye(2))


def test_van_cittert_identity_ratio():
    F = maps.linear_map(np.eye(3))
    z = np.array([1.0, -2.0, 0.5])
    rep = solvers.van_cittert_iteration(F, np.eye(3), z, solvers.SolverConfig(mu=0.5))
    assert rep.converged and np.allclose(rep.x, z, atol=1e-11)
    assert np.allclose(rep.ratios, 0.5)
    assert rep.r0_predicted == pytest.approx(0.5)


def test_van_cittert_refuses_e2():
    F, T = maps.e_map(2, 0.0), maps.t1_operator()
    with pytest.raises(CertificateError) as info:
        solvers.van_cittert_iteration(F, T, np.array([1.0, 0.0]), solvers.SolverConfig(mu=0.01))
    assert info.value.margin <= 1e-12


def test_van_cittert_refuses_mu_outside_window():
    T = maps.seeded_operator((4, 4), 7, "graded")
    F = maps.perturbed_linear(T, 0.05, "sin")
    z = F(np.ones(4))
    w = solvers.van_cittert_window(F, T, solvers.default_plan(F, z, T))["window"]
    with pytest.raises(CertificateError):
        solvers.van_cittert_iteration(F, T, z, solvers.SolverConfig(mu=1.01 * w))


def test_divergence_detected():
    F = maps.linear_map(np.eye(2))
    with pytest.raises(DivergenceError):
        solvers.van_cittert_iteration(F, np.eye(2), np.ones(2), solvers.SolverConfig(mu=3.0, force=True))


def test_trace_rows_shape():
    F = maps.linear_map(np.eye(2))
    rep = solvers.van_cittert_iteration(F, np.eye(2), np.ones(2), solvers.SolverConfig(mu=0.5),
                                        x_true=np.ones(2))
    rows = rep.trace_rows()
    assert [r[0] for r in rows] == list(range(1, len(rows) + 1))
    assert rows[0][2] is None and rows[1][2] == pytest.approx(0.5)
    assert rows[-1][3] == pytest.approx(rep.error_l2)


def test_fit_decay_geometric():
    b = 3.0 * 0.5 ** np.arange(1, 12)
    C, r = solvers.fit_decay(b)
    assert r == pytest.approx(0.5) and C == pytest.approx(3.0)


def test_averaged_jacobian_scalar():
    G = maps.DifferentiableMap(eval=lambda x: 0.5 * np.sin(x), jacobian=lambda x: np.diag(0.5 * np.cos(x)),
                               in_dim=1, out_dim=1)
    a, b = np.array([0.2]), np.array([1.3])
    J = solvers.averaged_jacobian(G, a, b)
    assert J[0, 0] == pytest.approx(0.5 * (math.sin(1.3) - math.sin(0.2)) / 1.1, rel=1e-12)


def test_fixed_point_refuses_noncontraction():
    G = solvers.affine_map(1.2 * np.eye(2), np.zeros(2))
    with pytest.raises(CertificateError):
        solvers.fixed_point_iteration(G, solvers.SolverConfig(norm="linf"))


def test_fixed_point_requires_square_map():
    G = maps.linear_map(np.ones((2, 3)))
    with pytest.raises(InvalidInputError):
        solvers.fixed_point_iteration(G, solvers.SolverConfig())


def test_localized_error_within_fitted_bound():
    T = maps.seeded_operator((8, 8), 2, "banded")
    F = maps.perturbed_linear(T, 0.05, "sin")
    rng = np.random.default_rng(4)
    x_true = rng.uniform(-1, 1, 8)
    e = rng.uniform(-0.01, 0.01, 8)
    z = F(x_true) + e
    plan = solvers.default_plan(F, z, T)
    w = solvers.van_cittert_window(F, T, plan)["window"]
    rep = solvers.localized_iteration(F, T, z, solvers.SolverConfig(mu=0.8 * w), plan=plan, x_true=x_true)
    assert rep.converged
    assert rep.error_linf <= rep.bound
    assert rep.extras["C_provenance"] == certify.FITTED


def test_subalgebra_fit():
    pairs = [(np.eye(3), np.eye(3))]
    out = solvers.subalgebra_fit(pairs)
    assert out[1.0][0] == pytest.approx(0.5) and out[0.5][0] == pytest.approx(0.5)
    fit = solvers.subalgebra_fit(solvers.seeded_matrix_pairs(6, 20, 0))
    assert all(D > 0 and 0 <= i < 20 for D, i in fit.values())
    with pytest.raises(InvalidInputError):
        solvers.subalgebra_fit([])


def test_report_serializes():
    F = maps.linear_map(np.eye(2))
    rep = solvers.van_cittert_iteration(F, np.eye(2), np.ones(2), solvers.SolverConfig(mu=0.5))
    json.dumps(rep.to_dict(), allow_nan=False)
