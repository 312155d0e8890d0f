"""Type-2 and cotype-2 constants: empirical lower bounds and closed-form caps.

Lower bounds come from explicit witness families found by multi-start
hill climbing; upper bounds come from the closed forms in :func:`table1_upper`.
Nothing here claims to compute a constant exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .config import TOL
from .spaces import LpSpace, NormedSpace, SchattenSpace, as_rng

# The caption says Gaussian and Rademacher constants agree "up to a factor of
# sqrt(2/pi)" without fixing a direction.  The conversions below are the
# rigorous ones from the contraction principle: Gaussian type <= Rademacher
# type, Gaussian cotype <= sqrt(pi/2) * Rademacher cotype.
CAPTION_FACTOR = math.sqrt(2.0 / math.pi)
GAUSSIAN_CONVERSION = {"type2": 1.0, "cotype2": 1.0 / CAPTION_FACTOR}


@dataclass(frozen=True)
class SignEnsemble:
    kind: str = "rademacher"
    exact: bool = True
    samples: int = TOL.gaussian_samples
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("rademacher", "gaussian"):
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if self.kind == "gaussian" and self.exact:
            object.__setattr__(self, "exact", False)
        if self.samples < 2:
            raise ValueError("need at least two monte-carlo samples")


RADEMACHER = SignEnsemble("rademacher", exact=True)
GAUSSIAN = SignEnsemble("gaussian", exact=False)


@dataclass
class TypeEstimate:
    constant: str               # "type2" or "cotype2"
    n: int
    value: float
    bound: str = "lower"        # lower: witness family; upper: closed form
    witness: np.ndarray | None = field(default=None, repr=False)
    stderr: float = 0.0
    ensemble: SignEnsemble = RADEMACHER


@lru_cache(maxsize=32)
def rademacher_signs(n: int) -> np.ndarray:
    """All sign patterns with the first sign fixed to +1 (norm is even)."""
    if n > TOL.exact_enum_max_n:
        raise ValueError(f"exact enumeration limited to n <= {TOL.exact_enum_max_n}")
    rest = np.array(list(itertools.product((1.0, -1.0), repeat=n - 1)), dtype=float)
    rest = rest.reshape(2 ** (n - 1), n - 1)
    signs = np.hstack([np.ones((rest.shape[0], 1)), rest])
    signs.setflags(write=False)
    return signs


def _coefficients(n: int, ensemble: SignEnsemble) -> np.ndarray:
    if ensemble.kind == "rademacher" and ensemble.exact:
        return rademacher_signs(n)
    rng = np.random.default_rng([ensemble.seed, n])
    if ensemble.kind == "gaussian":
        return rng.standard_normal((ensemble.samples, n))
    return rng.choice((-1.0, 1.0), size=(ensemble.samples, n))


def _family(space: NormedSpace, family) -> np.ndarray:
    fam = np.atleast_2d(np.asarray(family, dtype=float))
    if fam.shape[-1] != space.dim:
        raise ValueError(f"family vectors have length {fam.shape[-1]}, space dimension is {space.dim}")
    if fam.shape[0] == 0:
        raise ValueError("empty family")
    return fam


def second_moment_stats(space: NormedSpace, family, ensemble: SignEnsemble = RADEMACHER,
                        coeffs: np.ndarray | None = None) -> tuple[float, float]:
    """(E||sum g_j x_j||^2)^(1/2) and its monte-carlo standard error (0 when exact)."""
    fam = _family(space, family)
    if coeffs is None:
        coeffs = _coefficients(fam.shape[0], ensemble)
    sq = space.norm(coeffs @ fam) ** 2
    mean = float(np.mean(sq))
    value = math.sqrt(mean)
    if ensemble.kind == "rademacher" and ensemble.exact:
        return value, 0.0
    se_mean = float(np.std(sq, ddof=1)) / math.sqrt(sq.shape[0])
    return value, (se_mean / (2.0 * value) if value > 0 else se_mean)


def ensemble_second_moment(space: NormedSpace, family, ensemble: SignEnsemble = RADEMACHER) -> float:
    return second_moment_stats(space, family, ensemble)[0]


def _l2_of_norms(space: NormedSpace, fam: np.ndarray) -> float:
    return float(np.sqrt(np.sum(space.norm(fam) ** 2)))


def type2_ratio(space: NormedSpace, family, ensemble: SignEnsemble = RADEMACHER) -> float:
    fam = _family(space, family)
    denom = _l2_of_norms(space, fam)
    if denom == 0:
        raise ValueError("type ratio undefined for an all-zero family")
    return ensemble_second_moment(space, fam, ensemble) / denom


def cotype2_ratio(space: NormedSpace, family, ensemble: SignEnsemble = RADEMACHER) -> float:
    fam = _family(space, family)
    num = _l2_of_norms(space, fam)
    if num == 0:
        raise ValueError("cotype ratio undefined for an all-zero family")
    moment = ensemble_second_moment(space, fam, ensemble)
    if moment == 0:
        raise ValueError("zero second moment")
    return num / moment


def _default_ensemble(n: int, seed: int) -> SignEnsemble:
    if n <= TOL.exact_enum_max_n:
        return RADEMACHER
    return SignEnsemble("rademacher", exact=False, seed=seed)


def _estimate(space: NormedSpace, n: int, constant: str, restarts: int, steps: int,
              seed, ensemble: SignEnsemble | None, init) -> TypeEstimate:
    if n < 1:
        raise ValueError("family size must be >= 1")
    ensemble = ensemble or _default_ensemble(n, int(seed) if np.isscalar(seed) else 0)
    coeffs = _coefficients(n, ensemble)
    dim = space.dim

    def score(fam: np.ndarray) -> float:
        s = np.sqrt(np.sum(space.norm(fam) ** 2))
        if s == 0:
            return -np.inf
        m = math.sqrt(float(np.mean(space.norm(coeffs @ fam) ** 2)))
        if constant == "type2":
            return m / s
        return s / m if m > 0 else -np.inf

    starts: list[np.ndarray] = []
    if init is not None:
        w = np.atleast_2d(np.asarray(init, dtype=float))
        pad = np.zeros((n, dim))
        pad[: min(n, w.shape[0])] = w[:n]
        starts.append(pad)
    eye = np.eye(dim)
    starts.append(np.array([eye[j % dim] for j in range(n)]))
    rng = as_rng(seed)
    while len(starts) < restarts + (init is not None):
        starts.append(rng.standard_normal((n, dim)))

    best_val, best_fam = -np.inf, None
    for k, fam in enumerate(starts):
        sub = np.random.default_rng([int(rng.integers(2**31)), k])
        cur = fam.copy()
        cur_val = score(cur)
        sigma = 0.3
        for _ in range(steps):
            j = int(sub.integers(n))
            cand = cur.copy()
            scale = max(float(np.linalg.norm(cur[j])), 1e-3)
            if sub.random() < 0.5:
                cand[j] += sigma * scale * sub.standard_normal(dim)
            else:
                c = int(sub.integers(dim))
                cand[j, c] += sigma * scale * sub.standard_normal()
            val = score(cand)
            if val > cur_val:
                cur, cur_val = cand, val
                sigma = min(sigma * 1.3, 2.0)
            else:
                sigma = max(sigma * 0.93, 1e-4)
        if cur_val > best_val:
            best_val, best_fam = cur_val, cur

    stderr = 0.0
    if not (ensemble.kind == "rademacher" and ensemble.exact):
        m, se = second_moment_stats(space, best_fam, ensemble, coeffs)
        rel = se / m if m > 0 else 0.0
        stderr = best_val * rel
    return TypeEstimate(constant, n, float(best_val), "lower", best_fam, stderr, ensemble)


def estimate_type2(space: NormedSpace, n: int, restarts: int = 6, steps: int = 250, seed=0,
                   ensemble: SignEnsemble | None = None, init=None) -> TypeEstimate:
    """Lower bound on T_{2,n}(space) from the best family found."""
    return _estimate(space, n, "type2", restarts, steps, seed, ensemble, init)


def estimate_cotype2(space: NormedSpace, n: int, restarts: int = 6, steps: int = 250, seed=0,
                     ensemble: SignEnsemble | None = None, init=None) -> TypeEstimate:
    """Lower bound on C_{2,n}(space) from the best family found."""
    return _estimate(space, n, "cotype2", restarts, steps, seed, ensemble, init)


def estimate_profile(space: NormedSpace, n_max: int, constant: str = "type2", **kw) -> list[TypeEstimate]:
    """Estimates for n = 1..n_max, each seeded with the previous witness.

    Padding a witness with a zero vector keeps its ratio, so the sequence is
    nondecreasing in n.
    """
    est = estimate_type2 if constant == "type2" else estimate_cotype2
    out: list[TypeEstimate] = []
    prev = None
    for n in range(1, n_max + 1):
        e = est(space, n, init=prev, **kw)
        out.append(e)
        prev = e.witness
    return out


# ---------------------------------------------------------------------------
# Closed-form caps
# ---------------------------------------------------------------------------

TABLE1_KINDS = ("l1", "hilbert", "linf", "s1", "sinf")


def _log(d: int, base: float | None) -> float:
    if d < 2:
        raise ValueError("logarithmic rows need d >= 2")
    return math.log(d) if base is None else math.log(d, base)


def table1_upper(kind: str, constant: str, exponent: float = 2.0, d: int | None = None,
                 gaussian: bool = False, log_base: float | None = 2.0) -> float:
    """Closed-form type-p / cotype-q caps for l1, Hilbert, linf, S1 and S_inf.

    ``log_base=None`` selects the natural logarithm.  The linf type row is
    printed without a constant ("~"), so its value is an order of growth
    rather than a guaranteed cap.
    """
    if kind not in TABLE1_KINDS:
        raise ValueError(f"unknown space kind {kind!r}")
    if constant == "type2":
        p = exponent
        if not 1 <= p <= 2:
            raise ValueError("type exponent must lie in [1, 2]")
    elif constant == "cotype2":
        q = exponent
        if not 2 <= q < math.inf:
            raise ValueError("cotype exponent must lie in [2, inf)")
    else:
        raise ValueError(f"unknown constant {constant!r}")
    if kind != "hilbert" and (d is None or d < 1):
        raise ValueError("dimension d required")

    if kind == "hilbert":
        value = 1.0
    elif constant == "type2":
        if kind in ("l1", "s1"):
            value = d ** (1 - 1 / p)
        elif kind == "linf":
            value = _log(d, log_base) ** (1 - 1 / p)
        else:
            value = (4 * _log(d, log_base)) ** (1 - 1 / p)
    else:
        if kind == "l1":
            value = math.sqrt(2.0)
        elif kind == "s1":
            value = math.sqrt(math.e)
        else:
            value = d ** (1 / q)
    if gaussian:
        value *= GAUSSIAN_CONVERSION[constant]
    return float(value)


def table1_kind(space: NormedSpace) -> tuple[str, int] | None:
    """Map a concrete space to its Table-1 row, or None if it has no row."""
    if isinstance(space, (LpSpace, SchattenSpace)):
        prefix = "l" if isinstance(space, LpSpace) else "s"
        if space.r == 2:
            return "hilbert", space.d
        if space.d == 1:
            return "hilbert", 1
        if space.r == 1:
            return prefix + "1", space.d
        if math.isinf(space.r):
            return prefix + "inf", space.d
    return None
