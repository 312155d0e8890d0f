"""Almost-symmetries, their homogeneous extensions, and estimators of eps and delta.

Projective maps act on unit vectors of C^d and must be phase covariant,
``f(c v) = c f(v)`` for |c| = 1, so that they are honest functions of the
projection ``v v^*``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import SphericalVoronoi

from .config import TOL
from .spaces import (
    NormedSpace,
    RankOneProjection,
    SchattenSpace,
    as_rng,
    haar_unitary,
    herm_to_vec,
    projector_vecs,
    random_unit_vectors,
    seed_seq,
    spectral_decompose,
    vec_to_herm,
)

CHUNK = 256


def check_unitary(u: np.ndarray, tol: float = TOL.unitary) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError("unitary must be a square matrix")
    dev = np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]))
    if dev > tol:
        raise ValueError(f"matrix is not unitary (||U*U - I||_2 = {dev:.3e})")
    return u


@dataclass
class AlmostSymmetry:
    """A map on rank-one projections given by a phase-covariant vector map.

    ``pair_lipschitz`` bounds the Lipschitz constant of
    ``(x, y) -> <f(x), f(y)> - <x, y>`` in each argument with respect to the
    trace distance; the Bloch-sphere certifier needs it.
    """

    d: int
    vector_map: Callable[[np.ndarray], np.ndarray]
    epsilon_certificate: float | None = None
    note: str = ""
    pair_lipschitz: float | None = None
    params: dict = field(default_factory=dict)

    def apply_vectors(self, vectors: np.ndarray) -> np.ndarray:
        v = np.asarray(vectors, dtype=complex)
        single = v.ndim == 1
        w = self.vector_map(np.atleast_2d(v))
        w = w / np.linalg.norm(w, axis=-1, keepdims=True)
        return w[0] if single else w

    def __call__(self, p: RankOneProjection) -> RankOneProjection:
        return RankOneProjection(self.apply_vectors(p.vector))

    def on_matrix(self, p: np.ndarray) -> np.ndarray:
        return self(RankOneProjection.from_matrix(p)).matrix


def wigner_symmetry(u: np.ndarray, antiunitary: bool = False) -> AlmostSymmetry:
    """x -> U x U^*, or x -> U conj(x) U^* in the antiunitary case."""
    u = check_unitary(u)
    if antiunitary:
        vmap = lambda v: np.conj(v) @ u.T
    else:
        vmap = lambda v: v @ u.T
    return AlmostSymmetry(u.shape[0], vmap, 0.0, "exact symmetry", 0.0,
                          {"U": u, "antiunitary": antiunitary, "eta": 0.0})


def perturbed_symmetry(u: np.ndarray, eta: float, seed) -> AlmostSymmetry:
    """v -> normalize(U v + eta * W v) with W a Haar unitary drawn from ``seed``.

    With |u_x - w_x| <= 2 eta for the normalised images, transition amplitudes
    move by at most 4 eta and probabilities by at most 8 eta; the certificate
    8 eta + 8 eta^2 dominates that.  The projective map v -> M v / |M v| has
    Fubini-Study sine distortion at most cond(M) <= (1 + eta) / (1 - eta),
    which gives the pair Lipschitz constant (cond(M) + 1) / 2.
    """
    if eta < 0 or eta > 0.5:
        raise ValueError("eta must lie in [0, 1/2]")
    u = check_unitary(u)
    if eta == 0:
        return wigner_symmetry(u)
    d = u.shape[0]
    w = haar_unitary(d, seed)
    m = u + eta * w
    kappa = (1 + eta) / (1 - eta)
    return AlmostSymmetry(
        d,
        lambda v: v @ m.T,
        8 * eta + 8 * eta**2,
        "|<w_x,w_y>| - |<u_x,u_y>| <= 4 eta; squares differ by <= 8 eta <= 8 eta + 8 eta^2",
        (kappa + 1) / 2,
        {"U": u, "W": w, "eta": eta, "seed": seed},
    )


def constant_symmetry(d: int, index: int = 0) -> AlmostSymmetry:
    """x -> e_k e_k^*; far from any symmetry, useful as a negative control."""
    e = np.zeros(d, dtype=complex)
    e[index] = 1

    def vmap(v):
        # phase covariant: carry the phase of <e, v> (or 1 when it vanishes)
        c = v[:, index]
        ph = np.where(np.abs(c) > TOL.zero, c / np.maximum(np.abs(c), TOL.zero), 1.0)
        return ph[:, None] * e[None, :]

    return AlmostSymmetry(d, vmap, 1.0, "trivially eps <= 1", None, {"constant": index})


# ---------------------------------------------------------------------------
# eps estimation
# ---------------------------------------------------------------------------

def pair_residuals(f: AlmostSymmetry, vx: np.ndarray, vy: np.ndarray) -> np.ndarray:
    """|<f(x), f(y)> - <x, y>| for rows of unit vectors."""
    wx, wy = f.apply_vectors(vx), f.apply_vectors(vy)
    a = np.abs(np.sum(wx.conj() * wy, axis=-1)) ** 2
    b = np.abs(np.sum(vx.conj() * vy, axis=-1)) ** 2
    return np.abs(a - b)


def _climb_pair(f: AlmostSymmetry, vx, vy, rng, steps: int) -> float:
    d = f.d
    cur = float(pair_residuals(f, vx[None], vy[None])[0])
    sigma = 0.3
    for _ in range(steps):
        step = sigma * (rng.standard_normal((2, d)) + 1j * rng.standard_normal((2, d)))
        cx = vx + step[0]
        cy = vy + step[1]
        cx /= np.linalg.norm(cx)
        cy /= np.linalg.norm(cy)
        val = float(pair_residuals(f, cx[None], cy[None])[0])
        if val > cur:
            vx, vy, cur = cx, cy, val
            sigma = min(sigma * 1.3, 1.0)
        else:
            sigma = max(sigma * 0.9, 1e-5)
    return cur


def epsilon_estimate(f: AlmostSymmetry, pairs: int = 2048, seed=0, climb_steps: int = 120) -> float:
    """Lower bound on eps: best sampled pair residual, refined by hill climbing.

    Work is split into fixed chunks with their own sub-seeds, so a larger
    budget only adds chunks and never lowers the result.
    """
    d = f.d
    eye = np.eye(d, dtype=complex)
    ix, iy = np.triu_indices(d, 1)
    best = 0.0
    if ix.size:
        best = float(np.max(pair_residuals(f, eye[ix], eye[iy])))
    for k in range(max(1, pairs // CHUNK)):
        rng = np.random.default_rng(seed_seq(seed, k))
        vx = random_unit_vectors(d, CHUNK, rng)
        vy = random_unit_vectors(d, CHUNK, rng)
        res = pair_residuals(f, vx, vy)
        j = int(np.argmax(res))
        best = max(best, float(res[j]))
        if climb_steps:
            best = max(best, _climb_pair(f, vx[j], vy[j], rng, climb_steps))
    return best


def fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    phi = np.pi * (1 + 5**0.5) * i
    rho = np.sqrt(1 - z * z)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def covering_radius(points: np.ndarray) -> float:
    """Exact chordal covering radius of a point set on S^2 (via Voronoi vertices)."""
    sv = SphericalVoronoi(points, radius=1.0, threshold=1e-9)
    best = 0.0
    for k, region in enumerate(sv.regions):
        verts = sv.vertices[region]
        best = max(best, float(np.max(np.linalg.norm(verts - points[k], axis=1))))
    return best


def bloch_vectors_to_states(r: np.ndarray) -> np.ndarray:
    theta = np.arccos(np.clip(r[:, 2], -1, 1))
    phi = np.arctan2(r[:, 1], r[:, 0])
    return np.stack([np.cos(theta / 2) + 0j, np.exp(1j * phi) * np.sin(theta / 2)], axis=1)


@dataclass
class EpsilonInterval:
    lower: float
    upper: float
    grid_points: int
    covering_radius: float
    lipschitz: float


def epsilon_oracle_bloch(f: AlmostSymmetry, resolution: int = 200) -> EpsilonInterval:
    """Certified interval for eps at d = 2 from a pair grid on the Bloch sphere.

    Trace distance between pure qubit states equals the chordal distance of
    their Bloch vectors, so every pair lies within ``h`` of a grid pair in each
    argument and the residual moves by at most ``2 * L * h``.
    """
    if f.d != 2:
        raise ValueError("the Bloch-sphere oracle needs d = 2")
    if f.pair_lipschitz is None:
        raise ValueError("no continuity bound available for this map")
    pts = fibonacci_sphere(resolution)
    h = covering_radius(pts)
    v = bloch_vectors_to_states(pts)
    w = f.apply_vectors(v)
    gram_v = np.abs(v.conj() @ v.T) ** 2
    best = 0.0
    for s in range(0, resolution, 512):
        gw = np.abs(w[s:s + 512].conj() @ w.T) ** 2
        best = max(best, float(np.max(np.abs(gw - gram_v[s:s + 512]))))
    upper = best + 2 * f.pair_lipschitz * h
    return EpsilonInterval(best, upper, resolution, h, f.pair_lipschitz)


# ---------------------------------------------------------------------------
# Homogeneous maps and the two extension procedures
# ---------------------------------------------------------------------------

@dataclass
class HomogeneousMap:
    """Real-homogeneous map between coordinate spaces; rows are batched."""

    domain: NormedSpace
    codomain: NormedSpace
    func: Callable[[np.ndarray], np.ndarray]
    matrix: np.ndarray | None = None
    delta_estimate: float | None = None
    source: object = None

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.domain.dim:
            raise ValueError(f"expected vectors of length {self.domain.dim}")
        single = x.ndim == 1
        out = self.func(np.atleast_2d(x))
        return out[0] if single else out

    @property
    def is_linear(self) -> bool:
        return self.matrix is not None


def linear_map(matrix: np.ndarray, domain: NormedSpace, codomain: NormedSpace) -> HomogeneousMap:
    a = np.asarray(matrix, dtype=float)
    if a.shape != (codomain.dim, domain.dim):
        raise ValueError(f"matrix shape {a.shape} does not match spaces")
    return HomogeneousMap(domain, codomain, lambda x: x @ a.T, matrix=a, delta_estimate=0.0)


def conjugation_matrix(u: np.ndarray, antiunitary: bool = False) -> np.ndarray:
    """Real d^2 x d^2 matrix of x -> U x U^* (or U conj(x) U^*) in Hermitian coordinates."""
    d = u.shape[0]
    basis = vec_to_herm(np.eye(d * d), d)
    if antiunitary:
        basis = np.conj(basis)
    return herm_to_vec(u @ basis @ u.conj().T).T


def _antipodal_sign(x: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(x), axis=1, keepdims=True)
    mask = np.abs(x) > TOL.zero * np.maximum(scale, 1e-300)
    first = np.argmax(mask, axis=1)
    s = np.sign(x[np.arange(x.shape[0]), first])
    s[s == 0] = 1.0
    return s


def extend_projective(f: AlmostSymmetry) -> HomogeneousMap:
    """Homogeneous extension S_1^d -> S_2^d via a fixed spectral decomposition.

    For x on the trace-norm sphere we take the representative s*x (s the sign
    of its first nonzero coordinate), write it as sum(lam_j P_j) and map it to
    sum(lam_j f(P_j)); the rest of the space follows by homogeneity.
    """
    d = f.d
    X, Y = SchattenSpace(d, 1), SchattenSpace(d, 2)

    def func(x: np.ndarray) -> np.ndarray:
        out = np.zeros((x.shape[0], d * d))
        nz = np.any(x != 0, axis=1)
        if not np.any(nz):
            return out
        xs = x[nz]
        s = _antipodal_sign(xs)
        rep = vec_to_herm(xs * s[:, None], d)
        w, v = np.linalg.eigh(rep)
        w, v = w[:, ::-1], v[:, :, ::-1]
        scale = np.maximum(1.0, np.max(np.abs(w), axis=1))
        degenerate = np.any(-np.diff(w, axis=1) <= TOL.eig_group * scale[:, None], axis=1) if d > 1 \
            else np.zeros(len(w), bool)
        imgs = f.apply_vectors(np.swapaxes(v, 1, 2).reshape(-1, d)).reshape(-1, d, d)
        res = np.einsum("nj,nja,njb->nab", w, imgs, imgs.conj())
        for k in np.flatnonzero(degenerate):
            dec = spectral_decompose(rep[k])
            res[k] = sum(lam * f(p).matrix for lam, p in dec)
        out[nz] = herm_to_vec(res) * s[:, None]
        return out

    return HomogeneousMap(X, Y, func, source=f)


@dataclass
class GlobalAlmostSymmetry:
    """A map on the closed unit ball of S_2^d given in Hermitian coordinates."""

    d: int
    func: Callable[[np.ndarray], np.ndarray]
    epsilon_certificate: float | None = None
    note: str = ""
    params: dict = field(default_factory=dict)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        out = self.func(np.atleast_2d(x))
        return out[0] if single else out


def global_symmetry(u: np.ndarray) -> GlobalAlmostSymmetry:
    c = conjugation_matrix(check_unitary(u))
    return GlobalAlmostSymmetry(u.shape[0], lambda x: x @ c.T, 0.0, "linear isometry",
                                {"U": u, "eta": 0.0, "C": c})


def perturbed_global(u: np.ndarray, eta: float, seed) -> GlobalAlmostSymmetry:
    """x -> C x + eta * g(x), C the conjugation by U and |g| <= 1 a smooth bump.

    For x, y in the ball |<f(x), f(y)> - <x, y>| <= 2 eta + eta^2.
    """
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    u = check_unitary(u)
    if eta == 0:
        return global_symmetry(u)
    d = u.shape[0]
    dim = d * d
    c = conjugation_matrix(u)
    rng = as_rng(seed)
    a = rng.standard_normal((dim, dim)) * (3.0 / math.sqrt(dim))
    b = rng.uniform(0, 2 * np.pi, dim)

    def func(x):
        return x @ c.T + eta * np.sin(x @ a.T + b) / math.sqrt(dim)

    return GlobalAlmostSymmetry(d, func, 2 * eta + eta**2, "cross terms <= 2 eta, quadratic term <= eta^2",
                                {"U": u, "eta": eta, "seed": seed, "C": c})


def extend_global(f: GlobalAlmostSymmetry, d: int | None = None) -> HomogeneousMap:
    """F(x) = |x|_2 (f(x / 2|x|_2) - f(-x / 2|x|_2)), F(0) = 0."""
    d = f.d if d is None else d
    space = SchattenSpace(d, 2)

    def func(x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x)
        nrm = np.linalg.norm(x, axis=1)
        nz = nrm > 0
        if np.any(nz):
            u = x[nz] / (2 * nrm[nz, None])
            out[nz] = nrm[nz, None] * (f(u) - f(-u))
        return out

    return HomogeneousMap(space, space, func, source=f)


# ---------------------------------------------------------------------------
# delta estimation and extension residuals
# ---------------------------------------------------------------------------

def _domain_samples(space: NormedSpace, n: int, rng) -> np.ndarray:
    x = rng.standard_normal((n, space.dim))
    if isinstance(space, SchattenSpace) and space.r == 1:
        # half the draws are signed rank-one projections, the extreme points of the ball
        k = n // 2
        pv = projector_vecs(random_unit_vectors(space.d, k, rng))
        x[:k] = pv * rng.choice((-1.0, 1.0), size=(k, 1))
    return x


def _family_ratio(F: HomogeneousMap, fam: np.ndarray) -> np.ndarray:
    """||sum F(x_i) - F(sum x_i)||_Y / sum ||x_i||_X for families fam[c, i, :]."""
    c, m, dim = fam.shape
    images = F(fam.reshape(-1, dim)).reshape(c, m, -1)
    total = F(fam.sum(axis=1))
    num = F.codomain.norm(images.sum(axis=1) - total)
    den = F.domain.norm(fam.reshape(-1, dim)).reshape(c, m).sum(axis=1)
    return num / np.where(den > 0, den, np.inf)


def delta_estimate(F: HomogeneousMap, families: int = 1024, max_family: int = 4, seed=0,
                   climb_steps: int = 80) -> float:
    """Lower bound on the almost-linearity constant of ``F``.

    Coefficients are absorbed into the vectors (F is homogeneous), so a family
    is just x_1..x_m.  Sizes cycle through 2..max_family chunk by chunk.
    """
    if max_family < 2:
        raise ValueError("family size must be at least 2")
    best = 0.0
    for k in range(max(1, families // CHUNK)):
        rng = np.random.default_rng(seed_seq(seed, k))
        m = 2 + k % (max_family - 1)
        fam = _domain_samples(F.domain, CHUNK * m, rng).reshape(CHUNK, m, -1)
        fam *= rng.exponential(1.0, size=(CHUNK, m, 1))
        r = _family_ratio(F, fam)
        j = int(np.argmax(r))
        best = max(best, float(r[j]))
        cur, cur_val = fam[j].copy(), float(r[j])
        sigma = 0.3
        for _ in range(climb_steps):
            i = int(rng.integers(m))
            cand = cur.copy()
            cand[i] += sigma * np.linalg.norm(cur[i]) * rng.standard_normal(cur.shape[1])
            val = float(_family_ratio(F, cand[None])[0])
            if val > cur_val:
                cur, cur_val = cand, val
                sigma = min(sigma * 1.3, 2.0)
            else:
                sigma = max(sigma * 0.9, 1e-5)
        best = max(best, cur_val)
    return best


def wquasi_residual(F: HomogeneousMap, pairs: int = 1000, seed=0) -> float:
    """max |<F(x), F(y)> - <x, y>| / (|x|_2 |y|_2) over sampled pairs."""
    rng = as_rng(seed)
    x = rng.standard_normal((pairs, F.domain.dim))
    y = rng.standard_normal((pairs, F.domain.dim))
    lhs = np.sum(F(x) * F(y), axis=1) - np.sum(x * y, axis=1)
    return float(np.max(np.abs(lhs) / (np.linalg.norm(x, axis=1) * np.linalg.norm(y, axis=1))))


def sample_ball(dim: int, n: int, rng) -> np.ndarray:
    """Uniform points of the Euclidean unit ball; the first tenth lie on the sphere."""
    rng = as_rng(rng)
    g = rng.standard_normal((n, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    rad = rng.uniform(0, 1, n) ** (1.0 / dim)
    rad[: max(1, n // 10)] = 1.0
    return g * rad[:, None]


def global_pair_residuals(f: GlobalAlmostSymmetry, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """|<f(x), f(y)> - <x, y>| for rows of ball points."""
    return np.abs(np.sum(f(x) * f(y), axis=-1) - np.sum(x * y, axis=-1))


def global_epsilon_estimate(f: GlobalAlmostSymmetry, pairs: int = 2048, seed=0, climb_steps: int = 120) -> float:
    """Lower bound on eps for a map on the unit ball of S_2^d (chunked like epsilon_estimate)."""
    dim = f.d * f.d
    best = 0.0
    for k in range(max(1, pairs // CHUNK)):
        rng = np.random.default_rng(seed_seq(seed, k))
        x, y = sample_ball(dim, CHUNK, rng), sample_ball(dim, CHUNK, rng)
        res = global_pair_residuals(f, x, y)
        j = int(np.argmax(res))
        cur, cx, cy = float(res[j]), x[j], y[j]
        sigma = 0.3
        for _ in range(climb_steps):
            px = cx + sigma * rng.standard_normal(dim)
            py = cy + sigma * rng.standard_normal(dim)
            px /= max(1.0, float(np.linalg.norm(px)))
            py /= max(1.0, float(np.linalg.norm(py)))
            val = float(global_pair_residuals(f, px[None], py[None])[0])
            if val > cur:
                cx, cy, cur = px, py, val
                sigma = min(sigma * 1.3, 1.0)
            else:
                sigma = max(sigma * 0.9, 1e-5)
        best = max(best, cur)
    return best


def extension_gap(f: GlobalAlmostSymmetry, F: HomogeneousMap, samples: int = 1000, seed=0) -> float:
    """sup over sampled ball points of ||f(x) - F(x)||_2."""
    x = sample_ball(F.domain.dim, samples, seed)
    return float(np.max(np.linalg.norm(f(x) - F(x), axis=1)))
