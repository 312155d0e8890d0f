"""Twisted sums Y (+)_F X: quasi-norm and a two-sided bracket on the Banach envelope.

Elements are concatenated coordinate vectors ``[y, x]``.  The convex hull of
the quasi-norm unit ball is generated by two families of atoms: the Y-disk
``{(w, 0): |w|_Y <= delta}`` and the graph points ``(F(a), a)`` with
``|a|_X = 1``.  Upper bounds come from explicit decompositions into such
atoms, lower bounds from linear functionals bounded by 1 on them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .almost_maps import HomogeneousMap
from .config import TOL
from .spaces import (
    LpSpace,
    NormedSpace,
    SchattenSpace,
    as_rng,
    projector_vecs,
    random_unit_vectors,
    seed_seq,
    vec_to_herm,
)


def cvx_norm(space: NormedSpace, expr):
    """cvxpy expression for ``space.norm`` of an affine vector expression."""
    if isinstance(space, LpSpace):
        return cp.norm(expr, "inf" if np.isinf(space.r) else space.r)
    if isinstance(space, SchattenSpace):
        if space.r == 2:
            return cp.norm(expr, 2)
        d = space.d
        basis = vec_to_herm(np.eye(d * d), d).reshape(d * d, -1).T
        m = cp.reshape(basis @ expr, (d, d), order="C")
        if space.r == 1:
            return cp.normNuc(m)
        if np.isinf(space.r):
            return cp.sigma_max(m)
    raise NotImplementedError(f"no conic form for {space!r}")



def _solve(prob: cp.Problem) -> None:
    # every solution is re-checked against the atoms, so "inaccurate" is harmless
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        prob.solve(solver=cp.CLARABEL)


@dataclass(frozen=True)
class TwistedVector:
    y: np.ndarray
    x: np.ndarray

    @property
    def vec(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.y, float), np.asarray(self.x, float)])


@dataclass
class EnvelopeBound:
    value: float
    witness: object = field(repr=False)
    certified: bool = True
    samples: int = 0
    violation: float = 0.0


class TwistedSumSpace(NormedSpace):
    kind = "twisted"

    def __init__(self, Y: NormedSpace, X: NormedSpace, F: HomogeneousMap, delta: float,
                 pool_size: int = 3000, cert_size: int = 20000, seed=0):
        if not delta > 0:
            raise ValueError(f"quasi_norm divides by delta; delta={delta!r} must be positive")
        if F.domain.dim != X.dim or F.codomain.dim != Y.dim:
            raise ValueError("F does not map X into Y")
        self.Y, self.X, self.F = Y, X, F
        self.delta = float(delta)
        self.dim = Y.dim + X.dim
        self.pool_size = pool_size
        self.cert_size = cert_size
        self.seed = seed
        self._pool = None
        self._cert = None
        self._lower_problem = None
        self._linearization = None
        self._upper_problems: dict[int, tuple] = {}

    def __repr__(self):
        return f"TwistedSumSpace({self.Y!r} (+)_F {self.X!r}, delta={self.delta:g})"

    # -- elements --------------------------------------------------------
    def split(self, z) -> tuple[np.ndarray, np.ndarray]:
        if isinstance(z, TwistedVector):
            z = z.vec
        z = self._coords(z)
        return z[..., : self.Y.dim], z[..., self.Y.dim:]

    def join(self, y, x) -> np.ndarray:
        return np.concatenate([np.asarray(y, float), np.asarray(x, float)], axis=-1)

    def graph_point(self, a) -> np.ndarray:
        a = np.asarray(a, float)
        return self.join(self.F(a), a)

    # -- norms -------------------------------------------------------------
    def quasi_norm(self, z):
        y, x = self.split(z)
        out = self.Y.norm(y - self.F(x)) / self.delta + self.X.norm(x)
        return out if np.ndim(out) else float(out)

    norm = quasi_norm

    def atom_values(self, xi: np.ndarray, atoms: np.ndarray) -> np.ndarray:
        return np.abs(atoms @ xi)

    def dual_norm(self, xi) -> float:
        """sup of |xi| over the envelope unit ball, exact for linear F, sampled otherwise.

        The number of graph samples used is left in ``last_dual_samples``.
        """
        xi = self._coords(xi)
        eta, mu = xi[: self.Y.dim], xi[self.Y.dim:]
        disk = self.delta * self.Y.dual_norm(eta)
        if self.F.is_linear:
            self.last_dual_samples = 0
            return float(max(disk, self.X.dual_norm(self.F.matrix.T @ eta + mu)))
        cert = self.certification_atoms()
        self.last_dual_samples = cert.shape[0]
        return float(max(disk, np.max(np.abs(cert @ xi))))

    # -- atom pools -------------------------------------------------------
    def _sphere_points(self, n: int, rng) -> np.ndarray:
        X = self.X
        g = rng.standard_normal((n, X.dim))
        if isinstance(X, SchattenSpace) and X.r == 1:
            k = n // 3
            g[:k] = projector_vecs(random_unit_vectors(X.d, k, rng))
        eye = np.eye(X.dim)
        g = np.vstack([eye, g])
        return g / X.norm(g)[:, None]

    def graph_pool(self) -> np.ndarray:
        if self._pool is None:
            a = self._sphere_points(self.pool_size, np.random.default_rng(seed_seq(self.seed, 11)))
            self._pool = self.graph_point(a)
        return self._pool

    def certification_atoms(self) -> np.ndarray:
        if self._cert is None:
            a = self._sphere_points(self.cert_size, np.random.default_rng(seed_seq(self.seed, 29)))
            self._cert = np.vstack([self.graph_pool(), self.graph_point(a)])
        return self._cert

    @property
    def dense_certification(self) -> bool:
        return self.F.is_linear or self.X.dim <= 9

    # -- upper bound ------------------------------------------------------
    def _upper_problem(self, k: int):
        if k not in self._upper_problems:
            c = cp.Variable(k)
            G = cp.Parameter((self.Y.dim, k))
            A = cp.Parameter((self.X.dim, k))
            y = cp.Parameter(self.Y.dim)
            x = cp.Parameter(self.X.dim)
            obj = cp.norm1(c) + cvx_norm(self.Y, y - G @ c) / self.delta
            prob = cp.Problem(cp.Minimize(obj), [A @ c == x])
            self._upper_problems[k] = (prob, c, G, A, y, x)
        return self._upper_problems[k]

    def _decompose(self, y, x, atoms) -> tuple[float, list[np.ndarray]] | None:
        prob, c, G, A, yp, xp = self._upper_problem(atoms.shape[0])
        images = self.F(atoms)
        G.value, A.value, yp.value, xp.value = images.T, atoms.T, y, x
        try:
            _solve(prob)
        except cp.SolverError:
            return None
        if c.value is None:
            return None
        coef = np.asarray(c.value, float)
        coef = coef + np.linalg.lstsq(atoms.T, x - atoms.T @ coef, rcond=None)[0]
        parts = [self.join(cj * fa, cj * a) for cj, fa, a in zip(coef, images, atoms) if cj != 0.0]
        rest = y - sum((p[: self.Y.dim] for p in parts), np.zeros(self.Y.dim))
        parts.append(self.join(rest, np.zeros(self.X.dim)))
        return self.decomposition_cost(parts), parts

    def decomposition_cost(self, parts) -> float:
        return float(sum(self.quasi_norm(p) for p in parts))

    def envelope_upper(self, z, atoms: int | None = None, restarts: int = 2, refine: int = 6,
                       seed=0, hint=None) -> EnvelopeBound:
        """Best decomposition z = sum z_j found; sum |||z_j||| bounds the envelope norm above.

        ``atoms`` graph atoms are used (default dim Z + 1); the witness is the
        list of parts, the last one lying in Y_0.  ``hint`` is an optional
        array of X-points whose graph atoms get one extra attempt, e.g. the
        atoms of known witnesses (see :meth:`witness_atoms`).
        """
        zv = z.vec if isinstance(z, TwistedVector) else self._coords(z)
        y, x = self.split(zv)
        k = atoms or self.dim + 1
        best_val, best_parts = self.quasi_norm(zv), [zv.copy()]
        nx = self.X.norm(x)
        if nx == 0:
            return EnvelopeBound(best_val, best_parts)
        if hint is not None and len(hint):
            h = np.atleast_2d(np.asarray(hint, float))
            h = h[self.X.norm(h) > 0]
            res = self._decompose(y, x, np.vstack([x / nx, h / self.X.norm(h)[:, None]]))
            if res is not None and res[0] < best_val:
                best_val, best_parts = res
        rng = np.random.default_rng(seed_seq(seed, 3))
        for r in range(restarts):
            pts = self._sphere_points(k, rng)[-k:] if k > 0 else np.zeros((0, self.X.dim))
            pts[0] = x / nx
            res = self._decompose(y, x, pts)
            if res is None:
                continue
            cur_val, cur_parts = res
            for _ in range(refine):
                cand = pts.copy()
                j = 1 + int(rng.integers(k - 1)) if k > 1 else 0
                cand[j] = cand[j] + 0.5 * rng.standard_normal(self.X.dim)
                cand[j] /= self.X.norm(cand[j])
                res = self._decompose(y, x, cand)
                if res is not None and res[0] < cur_val:
                    pts, (cur_val, cur_parts) = cand, res
            if cur_val < best_val:
                best_val, best_parts = cur_val, cur_parts
        return EnvelopeBound(best_val, best_parts)

    # -- lower bound ------------------------------------------------------
    def _conic_lower(self):
        """Dual problem of Y (+)_H X for a linear H (exact when H = F)."""
        if self._lower_problem is None:
            xi = cp.Variable(self.dim)
            eta, mu = xi[: self.Y.dim], xi[self.Y.dim:]
            zp = cp.Parameter(self.dim)
            hp = cp.Parameter((self.Y.dim, self.X.dim))
            cons = [self.delta * cvx_norm(self.Y.dual(), eta) <= 1,
                    cvx_norm(self.X.dual(), hp.T @ eta + mu) <= 1]
            self._lower_problem = (cp.Problem(cp.Maximize(zp @ xi), cons), xi, zp, hp)
        return self._lower_problem

    def linearization(self) -> np.ndarray:
        """F.matrix if F is linear, else the least-squares linear fit on the graph pool."""
        if self.F.is_linear:
            return np.asarray(self.F.matrix, float)
        if self._linearization is None:
            pool = self.graph_pool()
            sol = np.linalg.lstsq(pool[:, self.Y.dim:], pool[:, : self.Y.dim], rcond=None)[0]
            self._linearization = sol.T
        return self._linearization

    def _separate(self, xi: np.ndarray, rng, starts: int = 3, steps: int = 40) -> np.ndarray:
        """Local search on the X-sphere for graph atoms where |xi| is largest."""
        pool = self.certification_atoms()
        vals = np.abs(pool @ xi)
        found = []
        for j in np.argsort(vals)[::-1][:starts]:
            a = pool[j, self.Y.dim:].copy()
            cur = vals[j]
            sigma = 0.2
            for _ in range(steps):
                cand = a[None, :] + sigma * rng.standard_normal((16, self.X.dim))
                cand /= self.X.norm(cand)[:, None]
                v = np.abs(self.graph_point(cand) @ xi)
                i = int(np.argmax(v))
                if v[i] > cur:
                    a, cur = cand[i], v[i]
                    sigma = min(sigma * 1.5, 1.0)
                else:
                    sigma *= 0.6
            found.append(self.graph_point(a))
        return np.array(found)

    def envelope_lower(self, z, seed=0, extra_atoms=None) -> EnvelopeBound:
        """Lower bound from a functional xi with |xi| <= 1 on every checked atom.

        xi solves the exact dual problem for the linear fit H of F (H = F when
        F is linear, in which case the bound is exact up to solver accuracy).
        For nonlinear F it is then divided by its largest value on the Y-disk,
        the certification sample, ``extra_atoms`` (e.g. the normalised parts
        of an upper-bound witness) and atoms found by local search.
        ``certified`` means the sample is dense for this dimension and a second
        local search finds nothing above 1 + 1e-6 after rescaling.
        """
        zv = z.vec if isinstance(z, TwistedVector) else self._coords(z)
        extra = None if extra_atoms is None or not len(extra_atoms) else np.asarray(extra_atoms, float)
        prob, xi, zp, hp = self._conic_lower()
        zp.value = zv
        hp.value = self.linearization()
        _solve(prob)
        if xi.value is None:
            return EnvelopeBound(0.0, np.zeros(self.dim), False, 0, np.inf)
        sol = np.asarray(xi.value, float)
        scale = self.dual_norm(sol)
        samples = self.last_dual_samples
        if extra is not None:
            scale = max(scale, float(np.max(np.abs(extra @ sol))))
        violation = 0.0
        if not self.F.is_linear:
            rng = np.random.default_rng(seed_seq(seed, 5))
            for _ in range(8):
                probe = self._separate(sol / scale, rng, steps=60)
                violation = float(np.max(np.abs(probe @ sol))) / scale - 1.0
                if violation <= TOL.duality:
                    break
                scale *= 1.0 + violation
        xi_ok = sol / scale
        certified = self.dense_certification and violation <= TOL.duality
        return EnvelopeBound(float(zv @ xi_ok), xi_ok, certified, samples, violation)

    def witness_atoms(self, parts) -> np.ndarray:
        """X-components of the graph parts of a decomposition, normalised to the X-sphere."""
        xs = np.array([self.split(p)[1] for p in parts]).reshape(-1, self.X.dim)
        xs = xs[self.X.norm(xs) > 0]
        return xs / self.X.norm(xs)[:, None] if len(xs) else xs

    def normalized_atoms(self, parts) -> np.ndarray:
        """Parts of a decomposition scaled to quasi-norm one (points of the ball)."""
        out = []
        for p in parts:
            q = self.quasi_norm(p)
            if q > 0:
                out.append(p / q)
        return np.array(out) if out else np.zeros((0, self.dim))

    def sample_unit(self, seed, size: int | None = None) -> np.ndarray:
        g = self.sample_gaussian(as_rng(seed), size)
        q = self.quasi_norm(g)
        return g / (q[:, None] if size is not None else q)


def quasi_norm(Z: TwistedSumSpace, z):
    return Z.quasi_norm(z)


def envelope_upper(Z: TwistedSumSpace, z, atoms: int | None = None, restarts: int = 2, seed=0,
                   refine: int = 6, hint=None) -> EnvelopeBound:
    return Z.envelope_upper(z, atoms=atoms, restarts=restarts, refine=refine, seed=seed, hint=hint)


def envelope_lower(Z: TwistedSumSpace, z, seed=0, extra_atoms=None) -> EnvelopeBound:
    return Z.envelope_lower(z, seed=seed, extra_atoms=extra_atoms)


@dataclass
class SandwichReport:
    samples: int
    worst_upper_vs_quasi: float      # min over z of quasi - upper (>= -tol expected)
    worst_quasi_vs_2upper: float     # min of 2*upper - quasi
    worst_lower_vs_upper: float      # min of upper - lower
    worst_ratio_quasi_lower: float   # max of quasi / lower (informational)
    uncertified: int
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def worst_margin(self) -> float:
        return min(self.worst_upper_vs_quasi, self.worst_quasi_vs_2upper, self.worst_lower_vs_upper)


def sandwich_check(Z: TwistedSumSpace, samples: int = 100, seed=0, tol: float = TOL.sandwich_rel,
                   restarts: int = 1, refine: int = 4, vectors=None) -> SandwichReport:
    """Check lower <= upper <= quasi <= 2 upper on sampled points of Z.

    Margins are relative to max(1, quasi).  Sample points mix Gaussian
    vectors, graph points and perturbed graph points (where the envelope and
    the quasi-norm differ most).
    """
    rng = np.random.default_rng(seed_seq(seed, 17))
    if vectors is None:
        g = rng.standard_normal((samples, Z.dim))
        a = Z._sphere_points(samples, rng)[-samples:]
        graph = Z.graph_point(a)
        kind = rng.integers(3, size=samples)
        noise = rng.standard_normal((samples, Z.Y.dim)) * Z.delta * rng.uniform(0, 2, (samples, 1))
        vectors = np.where((kind == 0)[:, None], g, graph)
        vectors[kind == 2, : Z.Y.dim] += noise[kind == 2]
    rep = SandwichReport(len(vectors), np.inf, np.inf, np.inf, 0.0, 0)
    for i, z in enumerate(vectors):
        q = Z.quasi_norm(z)
        up = Z.envelope_upper(z, restarts=restarts, refine=refine, seed=seed_seq(seed, i))
        low = Z.envelope_lower(z, seed=seed_seq(seed, i), extra_atoms=Z.normalized_atoms(up.witness))
        s = max(1.0, q)
        m1 = (q - up.value) / s
        m2 = (2 * up.value - q) / s
        m3 = (up.value - low.value) / s
        rep.worst_upper_vs_quasi = min(rep.worst_upper_vs_quasi, m1)
        rep.worst_quasi_vs_2upper = min(rep.worst_quasi_vs_2upper, m2)
        rep.worst_lower_vs_upper = min(rep.worst_lower_vs_upper, m3)
        if low.value > 0:
            rep.worst_ratio_quasi_lower = max(rep.worst_ratio_quasi_lower, q / low.value)
        rep.uncertified += not low.certified
        if min(m1, m2, m3) < -tol:
            rep.failures.append({"index": i, "z": z, "quasi": q, "upper": up.value, "lower": low.value})
    return rep
