"""Norm oracles on real coordinate spaces and Hermitian-matrix primitives.

Hermitian d x d matrices are handled through an orthonormal (Hilbert-Schmidt)
real coordinate system of length d**2: the diagonal entries, then
``sqrt(2) * Re x_ij`` and ``sqrt(2) * Im x_ij`` for i < j.  With this choice the
Euclidean dot product of two coordinate vectors equals ``Tr(xy)`` and the
Euclidean norm equals the Schatten 2-norm, so every space in the package can
work with plain real vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import TOL

SQRT2 = np.sqrt(2.0)


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def conjugate_exponent(r: float) -> float:
    if r == 1:
        return np.inf
    if np.isinf(r):
        return 1.0
    return r / (r - 1.0)


# ---------------------------------------------------------------------------
# Hermitian coordinates
# ---------------------------------------------------------------------------

def herm_to_vec(m: np.ndarray) -> np.ndarray:
    """Real HS-orthonormal coordinates of a (batch of) Hermitian matrices."""
    m = np.asarray(m)
    d = m.shape[-1]
    iu = np.triu_indices(d, 1)
    diag = np.real(np.diagonal(m, axis1=-2, axis2=-1))
    upper = m[..., iu[0], iu[1]]
    return np.concatenate([diag, SQRT2 * upper.real, SQRT2 * upper.imag], axis=-1)


def vec_to_herm(v: np.ndarray, d: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if d is None:
        d = int(round(np.sqrt(v.shape[-1])))
    if v.shape[-1] != d * d:
        raise ValueError(f"coordinate length {v.shape[-1]} is not d**2 for d={d}")
    k = d * (d - 1) // 2
    iu = np.triu_indices(d, 1)
    m = np.zeros(v.shape[:-1] + (d, d), dtype=complex)
    idx = np.arange(d)
    m[..., idx, idx] = v[..., :d]
    upper = (v[..., d:d + k] + 1j * v[..., d + k:]) / SQRT2
    m[..., iu[0], iu[1]] = upper
    m[..., iu[1], iu[0]] = np.conj(upper)
    return m


def check_hermitian(m: np.ndarray, tol: float = TOL.hermitian) -> None:
    dev = np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2)))) if m.size else 0.0
    if dev > tol:
        raise ValueError(f"matrix is not Hermitian (max |x - x^*| = {dev:.3e})")


def hs_inner(x: np.ndarray, y: np.ndarray) -> float:
    """Hilbert-Schmidt pairing Tr(xy) of two Hermitian matrices."""
    return float(np.real(np.trace(np.asarray(x) @ np.asarray(y))))


@dataclass(frozen=True)
class HermitianElement:
    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("HermitianElement needs a square matrix")
        check_hermitian(m)
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_vec(cls, v: np.ndarray) -> "HermitianElement":
        return cls(vec_to_herm(v))

    def vec(self) -> np.ndarray:
        return herm_to_vec(self.entries)

    def inner(self, other: "HermitianElement") -> float:
        return hs_inner(self.entries, other.entries)


# ---------------------------------------------------------------------------
# Normed spaces
# ---------------------------------------------------------------------------

class NormedSpace:
    """A norm on R^dim.  Elements are real vectors; leading axes are batches."""

    kind: str = "abstract"
    dim: int

    def norm(self, x):
        raise NotImplementedError

    def dual_norm(self, xi):
        raise NotImplementedError

    def _coords(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"{self!r}: expected last axis {self.dim}, got {x.shape[-1]}")
        return x

    def sample_gaussian(self, rng, size=None) -> np.ndarray:
        shape = (self.dim,) if size is None else (size, self.dim)
        return as_rng(rng).standard_normal(shape)


class LpSpace(NormedSpace):
    kind = "lp"

    def __init__(self, d: int, r: float):
        if d < 1:
            raise ValueError("dimension must be positive")
        if not (r >= 1):
            raise ValueError("r must lie in [1, inf]")
        self.d = int(d)
        self.r = float(r)
        self.dim = self.d

    def __repr__(self):
        return f"LpSpace(d={self.d}, r={self.r:g})"

    def __eq__(self, other):
        return isinstance(other, LpSpace) and (self.d, self.r) == (other.d, other.r)

    def __hash__(self):
        return hash(("lp", self.d, self.r))

    def norm(self, x):
        x = self._coords(x)
        out = np.linalg.norm(x, ord=self.r, axis=-1) if x.ndim > 1 else np.linalg.norm(x, ord=self.r)
        return out if np.ndim(out) else float(out)

    def dual(self) -> "LpSpace":
        return LpSpace(self.d, conjugate_exponent(self.r))

    def dual_norm(self, xi):
        return self.dual().norm(xi)

    def norm_subgradient(self, x: np.ndarray) -> np.ndarray:
        """g with dual_norm(g) = 1 and <g, x> = norm(x) (zero for x = 0)."""
        x = self._coords(x)
        return _lp_peak(x, self.r)


def _lp_peak(x: np.ndarray, r: float) -> np.ndarray:
    nx = np.linalg.norm(x, ord=r)
    if nx == 0:
        return np.zeros_like(x)
    if r == 1:
        return np.sign(x)
    if np.isinf(r):
        g = np.zeros_like(x)
        k = int(np.argmax(np.abs(x)))
        g[k] = np.sign(x[k])
        return g
    return np.sign(x) * (np.abs(x) / nx) ** (r - 1)


class SchattenSpace(NormedSpace):
    """Hermitian part of the r-Schatten class, dimension d**2 over the reals."""

    kind = "schatten"

    def __init__(self, d: int, r: float):
        if d < 1:
            raise ValueError("dimension must be positive")
        if not (r >= 1):
            raise ValueError("r must lie in [1, inf]")
        self.d = int(d)
        self.r = float(r)
        self.dim = self.d * self.d

    def __repr__(self):
        return f"SchattenSpace(d={self.d}, r={self.r:g})"

    def __eq__(self, other):
        return isinstance(other, SchattenSpace) and (self.d, self.r) == (other.d, other.r)

    def __hash__(self):
        return hash(("schatten", self.d, self.r))

    def _is_matrix(self, x: np.ndarray) -> bool:
        return self.d > 1 and x.ndim >= 2 and x.shape[-2:] == (self.d, self.d)

    def eigenvalues(self, x) -> np.ndarray:
        x = np.asarray(x)
        if self._is_matrix(x):
            check_hermitian(x)
            m = x
        else:
            m = vec_to_herm(self._coords(x), self.d)
        return np.linalg.eigvalsh(m)

    def norm(self, x):
        ev = np.abs(self.eigenvalues(x))
        out = np.linalg.norm(ev, ord=self.r, axis=-1)
        return out if np.ndim(out) else float(out)

    def dual(self) -> "SchattenSpace":
        return SchattenSpace(self.d, conjugate_exponent(self.r))

    def dual_norm(self, xi):
        return self.dual().norm(xi)

    def norm_subgradient(self, x: np.ndarray) -> np.ndarray:
        x = self._coords(x)
        w, v = np.linalg.eigh(vec_to_herm(x, self.d))
        g = _lp_peak(w, self.r)
        return herm_to_vec((v * g) @ v.conj().T)

    def to_matrix(self, x) -> np.ndarray:
        return vec_to_herm(self._coords(x), self.d)


def lp(d: int, r: float) -> LpSpace:
    return LpSpace(d, r)


def schatten(d: int, r: float) -> SchattenSpace:
    return SchattenSpace(d, r)


def norm(space: NormedSpace, x):
    return space.norm(x)


def dual_norm(space: NormedSpace, xi):
    return space.dual_norm(xi)


def sample_unit(space: NormedSpace, seed, size: int | None = None) -> np.ndarray:
    """Gaussian direction normalised to the unit sphere of ``space``."""
    g = space.sample_gaussian(as_rng(seed), size)
    n = space.norm(g)
    return g / (n[:, None] if size is not None else n)


# ---------------------------------------------------------------------------
# Rank-one projections and spectral decomposition
# ---------------------------------------------------------------------------

def canonical_phase(v: np.ndarray, tol: float = TOL.zero) -> np.ndarray:
    """Normalise ``v`` and rotate its phase so the first nonzero entry is real positive."""
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    nz = np.flatnonzero(np.abs(v) > tol)
    if nz.size == 0:
        raise ValueError("zero vector has no canonical phase")
    c = v[nz[0]]
    out = v * (np.conj(c) / abs(c))
    out[nz[0]] = abs(c)  # exactly real, not real up to rounding
    return out


@dataclass(frozen=True)
class RankOneProjection:
    vector: np.ndarray
    matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = canonical_phase(self.vector)
        v.setflags(write=False)
        m = np.outer(v, v.conj())
        m.setflags(write=False)
        object.__setattr__(self, "vector", v)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_matrix(cls, p: np.ndarray) -> "RankOneProjection":
        p = np.asarray(p, dtype=complex)
        check_hermitian(p, 1e-9)
        w, v = np.linalg.eigh(p)
        return cls(v[:, -1])

    @property
    def dim(self) -> int:
        return self.vector.shape[0]

    def vec(self) -> np.ndarray:
        return herm_to_vec(self.matrix)

    def __eq__(self, other):
        # canonical vectors agree up to rounding when the projections agree
        return (isinstance(other, RankOneProjection) and self.dim == other.dim
                and bool(np.max(np.abs(self.vector - other.vector)) <= TOL.projection))

    def __hash__(self):
        # coarse on purpose: equality is tolerance based
        return hash(self.dim)


def spectral_decompose(x, tol: float = TOL.eig_group) -> list[tuple[float, RankOneProjection]]:
    """Deterministic eigen-decomposition ``x = sum(lam_j * P_j)``.

    Eigenvalues are returned in descending order.  Inside a degenerate
    eigenspace the basis comes from Gram-Schmidt on the projections of
    e_1, e_2, ... onto that eigenspace, in index order.
    """
    if isinstance(x, HermitianElement):
        m = x.entries
    else:
        m = np.asarray(x)
        if m.ndim == 1:
            m = vec_to_herm(m)
        check_hermitian(m)
    d = m.shape[0]
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    w, v = w[::-1], v[:, ::-1]
    scale = max(1.0, float(np.max(np.abs(w))))
    out: list[tuple[float, RankOneProjection]] = []
    start = 0
    while start < d:
        stop = start + 1
        while stop < d and w[stop - 1] - w[stop] <= tol * scale:
            stop += 1
        if stop - start == 1:
            out.append((float(w[start]), RankOneProjection(v[:, start])))
        else:
            for lam, vec in zip(w[start:stop], _canonical_eigenbasis(v[:, start:stop])):
                out.append((float(lam), RankOneProjection(vec)))
        start = stop
    return out


def _canonical_eigenbasis(basis: np.ndarray) -> list[np.ndarray]:
    d, k = basis.shape
    proj = basis @ basis.conj().T
    chosen: list[np.ndarray] = []
    for i in range(d):
        r = proj[:, i].copy()
        for q in chosen:
            r -= q * (q.conj() @ r)
        nr = np.linalg.norm(r)
        if nr <= TOL.orth_residual:
            continue
        chosen.append(r / nr)
        if len(chosen) == k:
            break
    return chosen


def reconstruct(decomposition: Sequence[tuple[float, RankOneProjection]]) -> np.ndarray:
    return sum(lam * p.matrix for lam, p in decomposition)


def haar_unitary(d: int, seed) -> np.ndarray:
    """Haar-distributed unitary: QR of a complex Ginibre matrix with phase fix."""
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = as_rng(seed)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / SQRT2
    q, r = np.linalg.qr(z)
    ph = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * ph


def random_unit_vectors(d: int, n: int, seed) -> np.ndarray:
    """n Haar-random unit vectors in C^d, shape (n, d)."""
    rng = as_rng(seed)
    z = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def projector_vecs(vectors: np.ndarray) -> np.ndarray:
    """Coordinates of v v^* for each row v."""
    vectors = np.asarray(vectors)
    return herm_to_vec(vectors[..., :, None] * vectors.conj()[..., None, :])


def seed_seq(seed, *extra) -> list[int]:
    """Flatten an int / tuple seed plus extra counters into a SeedSequence entropy list."""
    out: list[int] = []
    for s in (seed, *extra):
        if isinstance(s, (tuple, list)):
            out.extend(seed_seq(*s))
        else:
            out.append(int(s))
    return out
