from __future__ import annotations

import math

import numpy as np
import pytest

from twistlab.almost_maps import extend_projective, linear_map, perturbed_symmetry
from twistlab.spaces import haar_unitary, lp, schatten
from twistlab.twisted import TwistedSumSpace, TwistedVector, envelope_lower, envelope_upper, quasi_norm, sandwich_check


@pytest.fixture(scope="module")
def projective_z():
    f = perturbed_symmetry(haar_unitary(2, 1), 0.05, 7)
    F = extend_projective(f)
    return TwistedSumSpace(F.codomain, F.domain, F, 2 * math.sqrt(f.epsilon_certificate))


@pytest.fixture(scope="module")
def linear_z():
    X, Y = schatten(2, 1), schatten(2, 2)
    M = np.random.default_rng(0).standard_normal((4, 4))
    return TwistedSumSpace(Y, X, linear_map(M, X, Y), 0.5)


def test_delta_must_be_positive():
    X = lp(2, 2)
    with pytest.raises(ValueError, match="quasi_norm"):
        TwistedSumSpace(X, X, linear_map(np.eye(2), X, X), 0.0)


def test_quasi_norm_zero_map():
    X, Y = lp(2, 1), lp(3, 2)
    Z = TwistedSumSpace(Y, X, linear_map(np.zeros((3, 2)), X, Y), 0.25)
    rng = np.random.default_rng(0)
    for _ in range(10):
        y, x = rng.standard_normal(3), rng.standard_normal(2)
        assert quasi_norm(Z, Z.join(y, x)) == pytest.approx(np.linalg.norm(y) / 0.25 + np.abs(x).sum())
        assert Z.quasi_norm(TwistedVector(y, x)) == pytest.approx(quasi_norm(Z, Z.join(y, x)))


def test_quasi_norm_graph_and_symmetry(projective_z):
    Z = projective_z
    rng = np.random.default_rng(1)
    a = rng.standard_normal((50, Z.X.dim))
    np.testing.assert_allclose(Z.quasi_norm(Z.graph_point(a)), Z.X.norm(a), rtol=1e-12)
    z = rng.standard_normal((50, Z.dim))
    np.testing.assert_allclose(Z.quasi_norm(-z), Z.quasi_norm(z), rtol=1e-12)


def test_quasi_triangle_constant_two(projective_z):
    Z = projective_z
    rng = np.random.default_rng(2)
    z1, z2 = rng.standard_normal((500, Z.dim)), rng.standard_normal((500, Z.dim))
    assert np.all(Z.quasi_norm(z1 + z2) <= 2 * (Z.quasi_norm(z1) + Z.quasi_norm(z2)) + 1e-9)


def test_linear_upper_equals_quasi(linear_z):
    Z = linear_z
    rng = np.random.default_rng(3)
    for z in rng.standard_normal((10, Z.dim)):
        up = envelope_upper(Z, z, restarts=1, refine=2)
        assert up.value == pytest.approx(Z.quasi_norm(z), rel=1e-6)
        low = envelope_lower(Z, z)
        assert low.value >= Z.quasi_norm(z) - 1e-6
        assert low.certified


def test_graph_point_envelope_between_half_and_one(projective_z):
    Z = projective_z
    rng = np.random.default_rng(4)
    a = rng.standard_normal((5, Z.X.dim))
    a /= Z.X.norm(a)[:, None]
    for z in Z.graph_point(a):
        up = Z.envelope_upper(z, restarts=1, refine=3)
        assert 0.5 - 1e-9 <= up.value <= 1 + 1e-9


def test_witness_reevaluates_and_is_gauge_consistent(projective_z):
    Z = projective_z
    z = np.random.default_rng(5).standard_normal(Z.dim)
    up = Z.envelope_upper(z, restarts=2, refine=4)
    parts = np.array(up.witness)
    np.testing.assert_allclose(parts.sum(axis=0), z, atol=1e-9)
    assert Z.decomposition_cost(parts) == pytest.approx(up.value, abs=1e-9)
    atoms = Z.normalized_atoms(parts)
    assert np.all(Z.quasi_norm(atoms) <= 1 + 1e-9)


def test_envelope_upper_is_a_norm(projective_z):
    Z = projective_z
    rng = np.random.default_rng(6)
    for _ in range(20):
        z1, z2 = rng.standard_normal((2, Z.dim))
        u1 = Z.envelope_upper(z1, restarts=1, refine=2)
        u2 = Z.envelope_upper(z2, restarts=1, refine=2)
        hint = np.vstack([Z.witness_atoms(u1.witness), Z.witness_atoms(u2.witness)])
        u12 = Z.envelope_upper(z1 + z2, restarts=1, refine=2, hint=hint)
        assert u12.value <= u1.value + u2.value + 2e-9 * (1 + u1.value + u2.value)
        lam = rng.uniform(-5, 5)
        ul = Z.envelope_upper(lam * z1, restarts=1, refine=2, hint=Z.witness_atoms(u1.witness))
        assert ul.value <= abs(lam) * u1.value * (1 + 1e-8) + 1e-8


def test_lower_bound_examples(projective_z):
    Z = projective_z
    rng = np.random.default_rng(7)
    for _ in range(5):
        z = rng.standard_normal(Z.dim)
        up = Z.envelope_upper(z, restarts=1, refine=2)
        low = Z.envelope_lower(z, extra_atoms=Z.normalized_atoms(up.witness))
        assert low.value <= up.value + 1e-6
        assert low.certified
    y = rng.standard_normal(Z.Y.dim)
    low = Z.envelope_lower(Z.join(y, np.zeros(Z.X.dim)))
    assert low.value >= Z.Y.norm(y) / Z.delta - 1e-6


def test_dual_norm_linear_is_exact(linear_z):
    Z = linear_z
    xi = np.random.default_rng(8).standard_normal(Z.dim)
    # sup over the quasi-ball never exceeds the exact dual norm and nearly attains it on graph atoms
    exact = Z.dual_norm(xi)
    atoms = Z.certification_atoms()
    assert np.max(np.abs(atoms @ xi)) <= exact + 1e-9
    assert Z.last_dual_samples == 0


def test_sandwich_linear(linear_z):
    rep = sandwich_check(linear_z, samples=100, seed=0)
    assert rep.ok
    assert rep.worst_margin >= -1e-9


def test_sandwich_projective(projective_z):
    rep = sandwich_check(projective_z, samples=30, seed=1)
    assert rep.ok and not rep.failures
    assert rep.uncertified == 0


def test_huge_delta_graph_points():
    f = perturbed_symmetry(haar_unitary(2, 1), 0.05, 7)
    F = extend_projective(f)
    Z = TwistedSumSpace(F.codomain, F.domain, F, 1e6)
    a = np.random.default_rng(9).standard_normal((5, 4))
    for z in Z.graph_point(a):
        up = Z.envelope_upper(z, restarts=1, refine=2)
        low = Z.envelope_lower(z, extra_atoms=Z.normalized_atoms(up.witness))
        q = Z.quasi_norm(z)
        assert low.value <= up.value + 1e-6 * q
        assert up.value == pytest.approx(q, rel=1e-3)
