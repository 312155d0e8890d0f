"""Best linear approximations of almost-linear maps and per-instance checks.

The infimum over linear H of sup_x ||F(x) - H x||_Y / ||x||_X is attacked
directly: a least-squares warm start, subgradient minimax over sampled sphere
points, then adversarial rounds that add the worst points found by hill
climbing.  Every reported sup is a sampled one, hence a lower bound on the
true value, which is the conservative side when checking upper bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds
from .almost_maps import (
    AlmostSymmetry,
    GlobalAlmostSymmetry,
    HomogeneousMap,
    extend_global,
    extend_projective,
    perturbed_global,
    perturbed_symmetry,
    sample_ball,
)
from .config import TOL
from .spaces import NormedSpace, SchattenSpace, haar_unitary, projector_vecs, random_unit_vectors, seed_seq

ROUTES = ("wigner", "global")


@dataclass
class LinearMapMatrix:
    """Linear map X -> Y stored as a (dim Y) x (dim X) matrix on coordinates."""

    matrix: np.ndarray
    domain: NormedSpace | None = None
    codomain: NormedSpace | None = None

    def __post_init__(self):
        self.matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if self.domain is not None and self.matrix.shape[1] != self.domain.dim:
            raise ValueError("matrix columns do not match the domain dimension")
        if self.codomain is not None and self.matrix.shape[0] != self.codomain.dim:
            raise ValueError("matrix rows do not match the codomain dimension")

    def __call__(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.matrix.T


@dataclass
class MinimaxFit:
    """Result of :func:`best_linear_map`; unpacks as ``(H, residual)``."""

    H: LinearMapMatrix
    residual: float                 # sampled sup at H, adversarial points included
    sampled_value: float            # minimax value on the final sample set
    converged: bool
    rounds: int
    history: list = field(default_factory=list)   # (sampled_value, adversarial_sup) per round

    def __iter__(self):
        yield self.H
        yield self.residual


def _as_matrix(H, F: HomogeneousMap) -> np.ndarray:
    if H is None:
        return np.zeros((F.codomain.dim, F.domain.dim))
    if isinstance(H, LinearMapMatrix):
        return H.matrix
    if isinstance(H, HomogeneousMap):
        if not H.is_linear:
            raise ValueError("H must be linear")
        return H.matrix
    return np.atleast_2d(np.asarray(H, dtype=float))


def sphere_samples(X: NormedSpace, n: int, rng) -> np.ndarray:
    """Unit-sphere points of X; for S_1 half are signed rank-one projections."""
    g = rng.standard_normal((n, X.dim))
    if isinstance(X, SchattenSpace) and X.r == 1:
        k = n // 2
        g[:k] = projector_vecs(random_unit_vectors(X.d, k, rng)) * rng.choice((-1.0, 1.0), (k, 1))
    return g / X.norm(g)[:, None]


def _ratios(F: HomogeneousMap, A: np.ndarray, x: np.ndarray) -> np.ndarray:
    num = F.codomain.norm(F(x) - x @ A.T)
    den = F.domain.norm(x)
    return num / np.where(den > 0, den, np.inf)


def _subgradient_minimax(targets: np.ndarray, xs: np.ndarray, Y: NormedSpace, A0: np.ndarray,
                         tol: float, max_iter: int) -> tuple[np.ndarray, float]:
    """min_A max_s ||targets_s - A xs_s||_Y by annealed normalized subgradient steps."""
    def objective(A):
        r = targets - xs @ A.T
        n = Y.norm(r)
        return n, r

    A = A0.copy()
    n, r = objective(A)
    best_A, best = A.copy(), float(np.max(n))
    step = 0.25 * max(best, tol)
    stall = 0
    for _ in range(max_iter):
        if step < tol or best <= tol * 1e-2:
            break
        j = np.flatnonzero(n >= np.max(n) * (1 - 1e-3))
        # average over the nearly active samples: a cheap bundle direction
        G = np.zeros_like(A)
        for i in j:
            G -= np.outer(Y.norm_subgradient(r[i]), xs[i])
        gn = np.linalg.norm(G)
        if gn == 0:
            break
        A = A - step * G / gn
        n, r = objective(A)
        val = float(np.max(n))
        if val < best * (1 - 1e-9):
            best, best_A = val, A.copy()
            stall = 0
        else:
            stall += 1
            if stall >= 8:
                step *= 0.5
                A = best_A.copy()
                n, r = objective(A)
                stall = 0
    return best_A, best


def _climb(ratio, x0: np.ndarray, rng, steps: int, normalize) -> tuple[np.ndarray, float]:
    """Hill climbing on a scale-invariant ratio from a batch of starting points."""
    best_x, best_v = x0.copy(), ratio(x0)
    sigma = np.full(len(x0), 0.2)
    for _ in range(steps):
        cand = normalize(best_x + sigma[:, None] * rng.standard_normal(best_x.shape))
        v = ratio(cand)
        up = v > best_v
        best_x[up], best_v[up] = cand[up], v[up]
        sigma = np.where(up, np.minimum(sigma * 1.5, 1.0), np.maximum(sigma * 0.7, 1e-6))
    return best_x, best_v


def best_linear_map(F: HomogeneousMap, samples: int | None = None, tol: float = TOL.solver, seed=0,
                    max_rounds: int = 10, max_iter: int = 400, climb_starts: int = 32,
                    climb_steps: int = 60) -> MinimaxFit:
    """Minimax linear fit of F on the unit sphere of its domain.

    Converged means the adversarial sup and the sampled minimax value agree
    within 1%; otherwise the best iterate is returned with ``converged=False``.
    """
    X, Y = F.domain, F.codomain
    if samples is None:
        samples = max(4 * X.dim * Y.dim, 512)
    rng = np.random.default_rng(seed_seq(seed, 101))
    xs = sphere_samples(X, samples, rng)
    xs = np.vstack([np.eye(X.dim) / X.norm(np.eye(X.dim))[:, None], xs])
    targets = F(xs)
    A = np.linalg.lstsq(xs, targets, rcond=None)[0].T
    if F.is_linear:
        A = np.asarray(F.matrix, float).copy()
    normalize = lambda x: x / X.norm(x)[:, None]

    history = []
    converged = False
    value = adv = 0.0
    for _ in range(max_rounds):
        A, value = _subgradient_minimax(targets, xs, Y, A, tol, max_iter)
        r = _ratios(F, A, xs)
        top = np.argsort(r)[::-1][: climb_starts // 2]
        starts = np.vstack([xs[top], sphere_samples(X, climb_starts - len(top), rng)])
        found, vals = _climb(lambda x: _ratios(F, A, x), starts, rng, climb_steps, normalize)
        adv = max(value, float(np.max(vals)))
        history.append((value, adv))
        if adv <= value * 1.01 + tol:
            converged = True
            break
        new = found[vals > value]
        xs = np.vstack([xs, new])
        targets = np.vstack([targets, F(new)])
    H = LinearMapMatrix(A, X, Y)
    residual = max(adv, float(np.max(_ratios(F, A, xs))))
    return MinimaxFit(H, residual, value, converged, len(history), history)


def approx_error(F: HomogeneousMap, H=None, samples: int = 2000, seed=0, projective: bool = False,
                 climb_starts: int = 16, climb_steps: int = 80) -> float:
    """Sampled-and-refined sup of ||F(x) - H x||_Y / ||x||_X.

    With ``projective=True`` the sup runs over rank-one projections (F must
    be defined on an S_1^d domain); ``H=None`` means the zero map.
    """
    A = _as_matrix(H, F)
    rng = np.random.default_rng(seed_seq(seed, 103))
    if projective:
        X = F.domain
        if not isinstance(X, SchattenSpace):
            raise ValueError("projective sup needs a Schatten-class domain")
        d = X.d

        def ratio(v):
            p = projector_vecs(v)
            return _ratios(F, A, p)

        def normalize(v):
            return v / np.linalg.norm(v, axis=1, keepdims=True)

        vs = random_unit_vectors(d, samples, rng)
        r = ratio(vs)
        top = vs[np.argsort(r)[::-1][:climb_starts]]
        # complex perturbations: real and imaginary parts are climbed together
        as_real = lambda v: np.concatenate([v.real, v.imag], axis=1)
        as_cplx = lambda w: w[:, :d] + 1j * w[:, d:]
        _, vals = _climb(lambda w: ratio(as_cplx(w)), as_real(top), rng, climb_steps,
                         lambda w: as_real(normalize(as_cplx(w))))
        return float(max(np.max(r), np.max(vals)))
    xs = sphere_samples(F.domain, samples, rng)
    r = _ratios(F, A, xs)
    top = xs[np.argsort(r)[::-1][:climb_starts]]
    _, vals = _climb(lambda x: _ratios(F, A, x), top, rng, climb_steps,
                     lambda x: x / F.domain.norm(x)[:, None])
    return float(max(np.max(r), np.max(vals)))


def ball_error(f: GlobalAlmostSymmetry, H, samples: int = 2000, seed=0, climb_starts: int = 16,
               climb_steps: int = 80) -> float:
    """Sampled-and-refined sup over the unit ball of S_2^d of ||f(x) - H x||_2."""
    A = np.asarray(H.matrix if isinstance(H, LinearMapMatrix) else H, dtype=float)
    rng = np.random.default_rng(seed_seq(seed, 107))
    dim = A.shape[1]

    def err(x):
        return np.linalg.norm(f(x) - x @ A.T, axis=1)

    def clip(x):
        n = np.linalg.norm(x, axis=1, keepdims=True)
        return x / np.maximum(n, 1.0)

    xs = sample_ball(dim, samples, rng)
    e = err(xs)
    top = xs[np.argsort(e)[::-1][:climb_starts]]
    _, vals = _climb(err, top, rng, climb_steps, clip)
    return float(max(np.max(e), np.max(vals)))


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------

@dataclass
class StabilityInstance:
    route: str
    d: int
    eta: float
    seed: int
    f: AlmostSymmetry | GlobalAlmostSymmetry = field(repr=False)
    F: HomogeneousMap = field(repr=False)
    epsilon_cert: float
    delta: float
    delta_floored: bool
    fit: MinimaxFit = field(repr=False)
    lhs_estimate: float             # sup over the unit sphere of X of |F - H|
    rhs: bounds.BoundReport = field(repr=False)
    closed_form_name: str
    closed_form_bound: float
    closed_form_lhs: float          # projective sup (wigner) or ball sup of |f - H| (global)
    tol: float = TOL.solver

    @property
    def rhs_value(self) -> float:
        return self.rhs.value

    @property
    def H(self) -> LinearMapMatrix:
        return self.fit.H

    @property
    def pass_theorem1(self) -> bool:
        return self.lhs_estimate <= self.rhs.value + self.tol

    @property
    def pass_closed_form(self) -> bool:
        return self.closed_form_lhs <= self.closed_form_bound + self.tol

    @property
    def ok(self) -> bool:
        return self.pass_theorem1 and self.pass_closed_form

    def report(self) -> str:
        lines = [f"{self.route} d={self.d} eta={self.eta:g} seed={self.seed}",
                 f"  eps_cert={self.epsilon_cert:.6g} delta={self.delta:.6g}"
                 + (" (floored)" if self.delta_floored else ""),
                 f"  lhs={self.lhs_estimate:.6g} thm1_rhs={self.rhs.value:.6g} pass={self.pass_theorem1}",
                 f"  {self.closed_form_name}: lhs={self.closed_form_lhs:.6g} "
                 f"bound={self.closed_form_bound:.6g} pass={self.pass_closed_form}",
                 f"  minimax converged={self.fit.converged} rounds={self.fit.rounds}"]
        return "\n".join(lines)


def make_generator(route: str, d: int, eta: float, seed):
    """The almost-symmetry of an instance and its homogeneous extension."""
    u = haar_unitary(d, seed_seq(seed, d, 1))
    if route == "wigner":
        f = perturbed_symmetry(u, eta, seed_seq(seed, d, 2))
        return f, extend_projective(f)
    if route == "global":
        f = perturbed_global(u, eta, seed_seq(seed, d, 2))
        return f, extend_global(f)
    raise ValueError(f"unknown route {route!r}; expected one of {ROUTES}")


def instance_delta(route: str, eps: float, floor: float = TOL.delta_floor) -> tuple[float, bool]:
    """2 sqrt(eps) on the projective route, 4 sqrt(eps) on the global one, floored."""
    delta = (2.0 if route == "wigner" else 4.0) * math.sqrt(eps)
    if delta < floor:
        return floor, True
    return delta, False


def verify_instance(route: str, d: int, eta: float, seed=0, samples: int | None = None,
                    error_samples: int = 2000, max_rounds: int = 10, tol: float = TOL.solver,
                    delta_floor: float = TOL.delta_floor, strict: bool = False) -> StabilityInstance:
    """Build one instance, fit H and compare against the closed-form right-hand sides.

    With ``strict=True`` a violated inequality raises AssertionError carrying
    the full report; otherwise the pass flags record it.
    """
    f, F = make_generator(route, d, eta, seed)
    eps = float(f.epsilon_certificate)
    delta, floored = instance_delta(route, eps, delta_floor)
    fit = best_linear_map(F, samples=samples, tol=tol, seed=seed_seq(seed, d, 3), max_rounds=max_rounds)
    lhs = max(fit.residual, approx_error(F, fit.H, error_samples, seed_seq(seed, d, 4)))
    if route == "wigner":
        rhs = bounds.wigner_route_rhs(d, delta)
        name = "wigner_bound"
        closed = bounds.wigner_bound(d, eps) if eps > 0 else 0.0
        closed_lhs = approx_error(F, fit.H, error_samples, seed_seq(seed, d, 5), projective=True)
    else:
        rhs = bounds.global_route_rhs(d, delta)
        name = "global_bound"
        closed = bounds.global_bound(d, eps) if eps > 0 else 0.0
        closed_lhs = ball_error(f, fit.H, error_samples, seed_seq(seed, d, 5))
    inst = StabilityInstance(route, d, float(eta), seed, f, F, eps, delta, floored, fit, lhs, rhs,
                             name, closed, closed_lhs, tol)
    if strict and not inst.ok:
        raise AssertionError("stability inequality violated\n" + inst.report())
    return inst
