from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twistlab.spaces import (
    HermitianElement,
    RankOneProjection,
    canonical_phase,
    dual_norm,
    haar_unitary,
    herm_to_vec,
    lp,
    norm,
    reconstruct,
    sample_unit,
    schatten,
    spectral_decompose,
    vec_to_herm,
)

INF = math.inf


def random_hermitian(d, rng):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (a + a.conj().T) / 2


# -- coordinates -------------------------------------------------------------

def test_coordinates_round_trip_and_isometry():
    rng = np.random.default_rng(0)
    for d in (1, 2, 3, 5):
        x, y = random_hermitian(d, rng), random_hermitian(d, rng)
        vx, vy = herm_to_vec(x), herm_to_vec(y)
        assert vx.shape == (d * d,)
        np.testing.assert_allclose(vec_to_herm(vx), x, atol=1e-13)
        # coordinates are HS-orthonormal: dot product is Tr(xy)
        assert abs(vx @ vy - np.trace(x @ y).real) < 1e-12


def test_hermitian_element_rejects_non_hermitian():
    with pytest.raises(ValueError):
        HermitianElement(np.array([[0, 1], [0, 0]], dtype=complex))
    e = HermitianElement(np.diag([1.0, -2.0]))
    assert e.dim == 2
    assert e.inner(e) == pytest.approx(5.0)


# -- norms -------------------------------------------------------------------

def test_norm_examples():
    assert norm(lp(3, 2), [3, 4, 0]) == pytest.approx(5.0, abs=1e-12)
    assert norm(schatten(2, 1), np.diag([1.0, -1.0])) == pytest.approx(2.0, abs=1e-12)
    assert norm(schatten(2, INF), np.diag([1.0, -1.0])) == pytest.approx(1.0, abs=1e-12)


def test_dual_norm_examples():
    assert dual_norm(lp(2, 1), [1, -2]) == pytest.approx(2.0)
    assert dual_norm(schatten(2, 1), np.diag([1.0, -1.0])) == pytest.approx(1.0)
    assert dual_norm(lp(2, 2), [3, 4]) == pytest.approx(5.0)


def test_norm_errors():
    with pytest.raises(ValueError):
        norm(lp(3, 2), [1.0, 2.0])
    with pytest.raises(ValueError):
        norm(schatten(2, 2), np.array([[1, 1j], [1j, 0]]))


@pytest.mark.parametrize("space", [lp(4, 1), lp(4, 2), lp(4, INF), lp(3, 3.5),
                                   schatten(3, 1), schatten(3, 2), schatten(3, INF), schatten(2, 1.5)])
def test_norm_axioms_sampled(space):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((1000, space.dim))
    y = rng.standard_normal((1000, space.dim))
    lam = rng.uniform(-10, 10, (1000, 1))
    nx, ny = space.norm(x), space.norm(y)
    assert np.all(nx > 0)
    assert np.all(np.abs(space.norm(lam * x) - np.abs(lam[:, 0]) * nx) <= 1e-10 * (1 + np.abs(lam[:, 0]) * nx))
    assert np.all(space.norm(x + y) <= nx + ny + 1e-10 * (nx + ny))
    assert space.norm(np.zeros(space.dim)) == 0


@pytest.mark.parametrize("d", [2, 3, 6])
def test_schatten_ordering_and_hs(d):
    rng = np.random.default_rng(d)
    x = rng.standard_normal((1000, d * d))
    n1, n2, ninf = schatten(d, 1).norm(x), schatten(d, 2).norm(x), schatten(d, INF).norm(x)
    assert np.all(ninf <= n2 + 1e-10)
    assert np.all(n2 <= n1 + 1e-10)
    np.testing.assert_allclose(n2 ** 2, np.sum(x * x, axis=1), rtol=1e-10)


@pytest.mark.parametrize("space", [lp(5, 1), lp(5, 3), lp(5, INF), schatten(3, 1), schatten(3, 4), schatten(3, INF)])
def test_holder_and_subgradient(space):
    rng = np.random.default_rng(7)
    x = rng.standard_normal((300, space.dim))
    y = rng.standard_normal((300, space.dim))
    assert np.all(np.abs(np.sum(x * y, axis=1)) <= space.norm(x) * space.dual_norm(y) * (1 + 1e-10) + 1e-12)
    for v in x[:30]:
        g = space.norm_subgradient(v)
        assert space.dual_norm(g) == pytest.approx(1.0, abs=1e-10)
        assert g @ v == pytest.approx(space.norm(v), rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=9, max_size=9), st.floats(-100, 100))
def test_schatten_homogeneity_property(v, lam):
    v = np.array(v)
    for r in (1, 2, INF):
        s = schatten(3, r)
        assert abs(s.norm(lam * v) - abs(lam) * s.norm(v)) <= 1e-10 * (1 + abs(lam) * s.norm(v))


# -- sampling and unitaries ---------------------------------------------------

def test_sample_unit():
    u = sample_unit(lp(2, 2), 0)
    assert np.linalg.norm(u) == pytest.approx(1.0, abs=1e-10)
    h = sample_unit(schatten(3, 1), 1)
    assert schatten(3, 1).norm(h) == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_array_equal(sample_unit(schatten(3, 1), 1), h)
    batch = sample_unit(lp(4, 1), 3, size=5)
    np.testing.assert_allclose(lp(4, 1).norm(batch), 1.0, atol=1e-12)


@pytest.mark.parametrize("d", [1, 2, 5, 8])
def test_haar_unitary(d):
    u = haar_unitary(d, 3)
    assert np.linalg.norm(u.conj().T @ u - np.eye(d), 2) <= 1e-10
    assert haar_unitary(d, 3).tobytes() == u.tobytes()
    if d == 1:
        assert abs(abs(u[0, 0]) - 1) < 1e-12


def test_haar_unitary_is_haar_distributed():
    # E|U_11|^2 = 1/d and E|U_11|^4 = 2/(d(d+1)) for Haar unitaries
    d, n = 3, 4000
    vals = np.array([abs(haar_unitary(d, s)[0, 0]) ** 2 for s in range(n)])
    assert abs(vals.mean() - 1 / d) < 4 * vals.std() / math.sqrt(n)
    m4 = (vals ** 2).mean()
    assert abs(m4 - 2 / (d * (d + 1))) < 4 * (vals ** 2).std() / math.sqrt(n)


# -- projections and spectral decomposition -----------------------------------

def test_rank_one_projection_invariants():
    rng = np.random.default_rng(4)
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    p = RankOneProjection(v)
    assert np.linalg.norm(p.matrix @ p.matrix - p.matrix) <= 1e-10
    assert abs(np.trace(p.matrix) - 1) <= 1e-10
    assert p.vector[0].imag == 0 and p.vector[0].real > 0
    # phase-independent
    assert RankOneProjection(np.exp(0.7j) * v) == p
    assert RankOneProjection.from_matrix(p.matrix) == p


def test_canonical_phase_skips_small_leading_entries():
    v = np.array([1e-12, 1j, 0])
    c = canonical_phase(v)
    assert c[1].real > 0 and abs(c[1].imag) < 1e-15


def test_spectral_examples():
    dec = spectral_decompose(np.diag([2.0, -1.0]))
    assert [lam for lam, _ in dec] == [2.0, -1.0]
    np.testing.assert_allclose(dec[0][1].matrix, np.diag([1, 0]), atol=1e-14)
    np.testing.assert_allclose(dec[1][1].matrix, np.diag([0, 1]), atol=1e-14)
    eye = spectral_decompose(np.eye(2))
    assert [lam for lam, _ in eye] == pytest.approx([1.0, 1.0])
    np.testing.assert_allclose(eye[0][1].matrix, np.diag([1, 0]), atol=1e-12)
    np.testing.assert_allclose(eye[1][1].matrix, np.diag([0, 1]), atol=1e-12)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_spectral_reconstruction_and_idempotence(d):
    rng = np.random.default_rng(d)
    for _ in range(20):
        x = random_hermitian(d, rng)
        dec = spectral_decompose(x)
        lams = [lam for lam, _ in dec]
        assert lams == sorted(lams, reverse=True)
        assert np.linalg.norm(reconstruct(dec) - x) <= 1e-10
        again = spectral_decompose(reconstruct(dec))
        assert [p for _, p in again] == [p for _, p in dec] or \
            all(np.linalg.norm(p.matrix - q.matrix) < 1e-9 for (_, p), (_, q) in zip(again, dec))


def test_spectral_degenerate_is_deterministic():
    rng = np.random.default_rng(5)
    u = haar_unitary(4, 11)
    x = u @ np.diag([3.0, 1.0, 1.0, -2.0]) @ u.conj().T
    a = spectral_decompose(x)
    b = spectral_decompose(x.copy())
    assert [p for _, p in a] == [p for _, p in b]
    assert np.linalg.norm(reconstruct(a) - x) <= 1e-10
    vecs = np.array([p.vector for _, p in a])
    np.testing.assert_allclose(vecs.conj() @ vecs.T, np.eye(4), atol=1e-10)
