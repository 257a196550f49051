import math

import numpy as np
import pytest

from nlframe import maps
from nlframe.errors import InvalidInputError


@pytest.mark.parametrize("eps", [0.0, math.pi / 6])
def test_e_map_continuity_and_jacobian(eps):
    F = maps.e_map(2, eps)
    edge = math.pi / 2 + eps
    for t0 in (-edge, edge):
        a, b = F([t0 - 1e-9]), F([t0 + 1e-9])
        assert np.allclose(a, b, atol=1e-8)
    for t in np.linspace(-7, 7, 41):
        if abs(abs(t) - edge) < 1e-3:
            continue
        assert np.allclose(F.derivative([t]), maps.fd_jacobian(F, np.array([t])), atol=1e-7)


def test_e_map_arc_values():
    F = maps.e_map(2, 0.0)
    assert np.allclose(F([0.0]), [0.0, -1.0])
    assert np.allclose(F([math.pi / 2]), [1.0, 0.0])
    # past the arc the curve follows the vertical tangent ray
    assert np.allclose(F([math.pi / 2 + 2.0]), [1.0, 2.0])
    assert np.allclose(F([-math.pi / 2 - 2.0]), [-1.0, 2.0])


def test_e_map_rejects_eps():
    with pytest.raises(InvalidInputError):
        maps.e_map(2, math.pi / 4)


def test_perturbed_linear_jacobian(rng):
    T = rng.standard_normal((5, 3))
    for g in ("sin", "tanh"):
        F = maps.perturbed_linear(T, 0.2, g)
        x = rng.standard_normal(3)
        assert np.allclose(F.derivative(x), maps.fd_jacobian(F, x), atol=1e-7)
        assert np.allclose(F(np.zeros(3)), 0.0)
    F = maps.perturbed_linear(np.eye(1), 0.1, "sin")
    assert F([2.0])[0] == pytest.approx(2.0 + 0.1 * math.sin(2.0))


def test_perturbed_linear_validation():
    with pytest.raises(InvalidInputError):
        maps.perturbed_linear(np.eye(2), -0.1)
    with pytest.raises(InvalidInputError):
        maps.perturbed_linear(np.eye(2), 0.1, "exp")


def test_batch_matches_scalar(rng):
    F = maps.perturbed_linear(rng.standard_normal((4, 4)), 0.3, "tanh")
    X = rng.standard_normal((7, 4))
    assert np.allclose(F.evaluate_many(X), np.array([F(x) for x in X]))
    assert np.allclose(F.derivatives_many(X), np.array([F.derivative(x) for x in X]))


def test_companding_surrogate_identity(rng):
    Phi = rng.standard_normal((3, 12))
    Psi = rng.standard_normal((5, 12))
    F, T = maps.companding_map(Phi, Psi, "cubic", 0.1)
    # T^T (Psi Phi^T) = Phi Phi^T
    assert np.allclose(T.matrix.T @ (Psi @ Phi.T), Phi @ Phi.T, atol=1e-9)
    x = rng.standard_normal(3)
    assert np.allclose(F.derivative(x), maps.fd_jacobian(F, x), atol=1e-6)
    Fi, _ = maps.companding_map(Phi, Psi, "identity")
    assert np.allclose(Fi(x), Psi @ (Phi.T @ x))


def test_companding_rejects_singular_gram(rng):
    Phi = rng.standard_normal((2, 3))
    Psi = np.ones((2, 3))
    with pytest.raises(InvalidInputError):
        maps.companding_map(Phi, Psi)


def test_zero_normalized_flag_is_checked():
    with pytest.raises(InvalidInputError):
        maps.DifferentiableMap(eval=lambda x: x + 1, jacobian=None, in_dim=2, out_dim=2, zero_normalized=True)


def test_fd_fallback_when_no_jacobian():
    F = maps.DifferentiableMap(eval=lambda x: np.array([x[0] ** 2, x[0] * x[1]]), jacobian=None,
                               in_dim=2, out_dim=2)
    assert np.allclose(F.derivative([1.0, 2.0]), [[2.0, 0.0], [2.0, 1.0]], atol=1e-6)


@pytest.mark.parametrize("dist", ["gaussian", "orthogonal", "graded", "banded"])
def test_seeded_operator_is_deterministic(dist):
    a = maps.seeded_operator((4, 4), 3, dist).matrix
    b = maps.seeded_operator((4, 4), 3, dist).matrix
    assert np.array_equal(a, b)


def test_seeded_operator_properties():
    Q = maps.seeded_operator((5, 5), 1, "orthogonal").matrix
    assert np.allclose(Q.T @ Q, np.eye(5))
    G = maps.seeded_operator((4, 4), 1, "graded")
    assert G.sigma_min == pytest.approx(1.0) and G.sigma_max == pytest.approx(2.0)
    with pytest.raises(InvalidInputError):
        maps.seeded_operator((3, 4), 1, "graded")


def test_map_from_spec():
    F, T = maps.map_from_spec({"kind": "e_map", "p": "inf", "eps": 0})
    assert math.isinf(F.out_norm.p) and T.shape == (2, 1)
    with pytest.raises(InvalidInputError):
        maps.map_from_spec({"kind": "linear"})
    with pytest.raises(InvalidInputError):
        maps.map_from_spec({"kind": "nope"})
    F, T = maps.map_from_spec({"kind": "companding", "n": 2, "m": 4, "L": 8, "f": "tanh"})
    assert F.in_dim == 2 and T.shape == (4, 2)


def test_catalog_instances_build():
    names = set()
    for entry in maps.catalog():
        F, T = entry.instance()
        assert T.shape == (F.out_dim, F.in_dim)
        names.add(entry.name)
        for value, prov in entry.constants.values():
            assert prov in ("stated", "derived", "exact") and value >= 0
    assert len(names) == len(maps.catalog())
