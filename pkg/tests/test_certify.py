import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlframe import certify, maps
from nlframe.errors import CertificateError, InvalidInputError
from nlframe.spaces import L2, SubspaceUnion

SQ2 = math.sqrt(2.0)
WIDE = certify.SamplingPlan(box_radius=2 * math.pi, n_pts=512, n_dir=8, seed=0)


def test_plan_validation_and_round_trip():
    p = certify.SamplingPlan(box_radius=2.0, n_pts=10, seed=3)
    assert certify.SamplingPlan.from_dict(p.to_dict()) == p
    with pytest.raises(InvalidInputError):
        certify.SamplingPlan.from_dict({"radius": 1})
    with pytest.raises(InvalidInputError):
        certify.SamplingPlan(box_radius=0)
    with pytest.raises(InvalidInputError):
        certify.SamplingPlan(n_pts=0)


def test_base_points_nested_and_inside_box():
    small = certify.base_points(certify.SamplingPlan(box_radius=3, n_pts=20, seed=4), 2)
    big = certify.base_points(certify.SamplingPlan(box_radius=3, n_pts=50, seed=4), 2)
    assert np.array_equal(small, big[:20])
    assert np.all(big[0] == 0) and np.max(np.abs(big)) <= 3


def test_scalar_perturbation_constants():
    # F(x) = x + 0.1 sin x against T = 1: directions agree, deviation peaks at x = 0
    F = maps.perturbed_linear(np.eye(1), 0.1, "sin")
    pool = certify.DirectionPool(F, np.eye(1), WIDE)
    assert pool.beta().estimate == 0.0
    assert pool.delta().estimate == pytest.approx(0.1, abs=1e-15)
    assert pool.theta().estimate == 0.0


def test_e_inf_beta_is_one():
    F = maps.e_map(math.inf, 0.0)
    rep = certify.beta_FT(F, maps.t1_operator(), WIDE)
    assert rep.estimate == pytest.approx(1.0, abs=1e-9)


def test_e2_alpha_is_sqrt2():
    # the arc and the two rays give directions (1,0), (0,1), (0,-1); the smallest
    # enclosing ball centred on the unit circle has radius sqrt(2)
    F = maps.e_map(2, 0.0)
    rep = certify.alpha_F(F, WIDE, T=maps.t1_operator())
    assert rep.estimate == pytest.approx(SQ2, abs=1e-6)
    assert rep.provenance == certify.SAMPLED_LOWER


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 50), st.integers(5, 60))
def test_lower_bound_grows_with_samples(seed, n):
    F = maps.e_map(2, math.pi / 6)
    T = maps.t1_operator()
    a = certify.beta_FT(F, T, certify.SamplingPlan(box_radius=4, n_pts=n, refine_rounds=0, seed=seed))
    b = certify.beta_FT(F, T, certify.SamplingPlan(box_radius=4, n_pts=2 * n, refine_rounds=0, seed=seed))
    assert b.estimate >= a.estimate
    assert 0.0 <= a.estimate <= 2.0


def test_pool_rejects_bad_inputs():
    F = maps.e_map(1, 0.0)
    with pytest.raises(InvalidInputError):
        certify.DirectionPool(F, np.eye(2), WIDE)
    pool = certify.DirectionPool(F, maps.t1_operator(), WIDE)
    with pytest.raises(InvalidInputError):
        pool.theta()
    with pytest.raises(InvalidInputError):
        certify.delta_FT(maps.linear_map(np.eye(2)), np.array([[1.0, 0.0], [0.0, 0.0]]), WIDE)


def test_uniform_stability_linear_is_svd(rng):
    M = rng.standard_normal((5, 3))
    s = np.linalg.svd(M, compute_uv=False)
    A, B = certify.uniform_stability(maps.linear_map(M), certify.SamplingPlan(n_pts=16)).estimate
    assert A == pytest.approx(s[-1], rel=1e-12) and B == pytest.approx(s[0], rel=1e-12)


def test_uniform_stability_e_maps_inside_envelope():
    for p in (1, 2, math.inf):
        F = maps.e_map(p, math.pi / 6)
        A, B = certify.uniform_stability(F, WIDE).estimate
        assert SQ2 / 2 - 1e-9 <= A <= B <= 2 + 1e-9


def test_uniform_stability_flags_degenerate_derivative():
    F = maps.DifferentiableMap(eval=lambda x: x**2, jacobian=lambda x: np.diag(2 * x), in_dim=1, out_dim=1)
    rep = certify.uniform_stability(F, WIDE)
    assert rep.estimate[0] == 0.0
    assert rep.verdicts[0][1] is False


def test_derivative_ratio_bounds():
    T = maps.seeded_operator((4, 3), 2)
    assert certify.derivative_ratio_bounds(maps.linear_map(T), T, WIDE) == pytest.approx((1.0, 1.0))
    F = maps.perturbed_linear(np.eye(1), 0.1, "sin")
    lo, hi = certify.derivative_ratio_bounds(F, np.eye(1), WIDE)
    assert 0.9 <= lo <= 0.9 + 1e-4 and hi == pytest.approx(1.1, abs=1e-12)
    with pytest.raises(InvalidInputError):
        certify.derivative_ratio_bounds(F, np.zeros((1, 1)), WIDE)


def test_gamma_linear_is_zero_and_perturbed_is_bounded():
    T = maps.seeded_operator((6, 6), 1, "orthogonal")
    union = SubspaceUnion.sparse(6, 1)
    plan = certify.SamplingPlan(n_pts=16, n_dir=8)
    assert certify.gamma_kA(maps.linear_map(T), T, union, 2, plan).estimate <= 1e-12
    eta = 0.05
    F = maps.perturbed_linear(T, eta, "tanh")
    g1 = certify.gamma_kA(F, T, union, 1, plan).estimate
    g2 = certify.gamma_kA(F, T, union, 2, plan).estimate
    # tanh is 1-Lipschitz and T is an isometry, so the gap is at most eta
    assert 0 < g1 <= g2 <= eta + 1e-12


def test_rip_delta_orthogonal_and_brute(rng):
    Q = maps.seeded_operator((5, 5), 0, "orthogonal")
    assert certify.rip_delta(Q, SubspaceUnion.sparse(5, 1), 3).estimate <= 1e-12
    M = rng.standard_normal((3, 6)) / math.sqrt(3)
    rep = certify.rip_delta(M, SubspaceUnion.sparse(6, 1), 2)
    brute = 0.0
    for S in SubspaceUnion.sparse(6, 2).supports:
        w = np.linalg.eigvalsh(M[:, list(S)].T @ M[:, list(S)])
        brute = max(brute, w[-1] - 1, 1 - w[0])
    assert rep.estimate == pytest.approx(brute, abs=1e-12)
    assert rep.provenance == certify.EXACT


def test_sparse_riesz_constants():
    D, beta = certify.sparse_riesz_constants(0.04, 0.1)
    c = 0.2 + 0.1
    assert D == pytest.approx(1 / (1 - SQ2 * c)) and beta == pytest.approx(D * c)
    with pytest.raises(CertificateError):
        certify.sparse_riesz_constants(0.5, 0.1)


def test_closed_form_constants():
    assert certify.almost_linear_constants(0.1, 0.2) == pytest.approx((0.4, 0.6))
    assert certify.recovery_condition(1.0, 0.0, 0.0, 0.0, 0.5, 2.0) == 1.0
    g3 = certify.recovery_condition(2.0, 0.1, 0.05, 0.1, 0.5, 2.0)
    assert g3 == pytest.approx(1 - 0.2 - (0.1 + 0.2 + 0.1))
    assert certify.composed_hypothesis(0, 0, 0, 0, 0.5, 2.0) == 0.0
    assert certify.composed_hypothesis(0.04, 0.16, 0, 0, 1, 1) == pytest.approx(SQ2 * 0.2 + 0.2 + 1.6)
    with pytest.raises(InvalidInputError):
        certify.recovery_condition(0.0, 0, 0, 0, 1, 1)


def test_certify_map_identity_passes_all():
    T = maps.seeded_operator((4, 2), 3)
    reps, verdicts = certify.certify_map(maps.linear_map(T), T, certify.SamplingPlan(n_pts=32, n_dir=4))
    assert all(ok for _, ok, _ in verdicts)
    assert set(reps) == {"beta_FT", "delta_FT", "theta_FT", "alpha_F", "uniform_stability"}
    json.dumps({k: r.to_dict() for k, r in reps.items()})


def test_certify_map_e2_fails_hilbert_condition():
    reps, verdicts = certify.certify_map(maps.e_map(2, 0.0), maps.t1_operator(), WIDE, L2)
    d = {c: ok for c, ok, _ in verdicts}
    assert d["beta_FT < sqrt(2) (Hilbert) => bi-Lipschitz"] is False
