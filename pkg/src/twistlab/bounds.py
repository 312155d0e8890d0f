"""Closed-form bound calculus for twisted-sum type constants and the stability theorems."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

SQRT2 = math.sqrt(2.0)


@dataclass
class BoundReport:
    name: str
    value: float
    inputs: dict
    trace: list[tuple[str, float]] = field(default_factory=list)
    recompute: Callable[[], float] | None = field(default=None, repr=False, compare=False)

    def reevaluate(self) -> float:
        if self.recompute is None:
            return self.value
        return self.recompute()

    def step(self, label: str) -> float:
        for name, v in self.trace:
            if name == label:
                return v
        raise KeyError(label)


def ts_type_step(t_y: float, t_x: float, t_z: float) -> float:
    """Upper bound on T_{2,n^2}(Z) from the level-n constants of Y, X and Z."""
    for name, t in (("t_y", t_y), ("t_x", t_x), ("t_z", t_z)):
        if not t >= 1 - 1e-12:
            raise ValueError(f"{name}={t!r}: type constants are >= 1")
    return t_y * t_z + t_y * t_x + t_z * t_x


def caratheodory_cap(dim: int) -> int:
    """Family size beyond which T_{2,n} stops growing for a dim-dimensional space."""
    if dim < 1:
        raise ValueError("dimension must be positive")
    return dim * (dim + 1) // 2


def _iterate(target_n: int, base: float, step: Callable[[float], float]) -> list[tuple[int, float]]:
    n, t = 2, base
    grid = [(n, t)]
    while n < target_n:
        n, t = n * n, step(t)
        grid.append((n, t))
    return grid


def type2_twisted_bound(target_n: int, t_y: float = 1.0, t_x: float = 1.0, base: float = SQRT2,
                        factor: float | None = None) -> BoundReport:
    """Iterate the twisted-sum type recursion on the grid n = 2^(2^k).

    The step is the full three-term recursion with component constants
    ``t_y`` and ``t_x``, or, when ``factor`` is given, the multiplicative
    simplification ``T -> factor * T``.  The first grid point with
    n >= target_n is used; no interpolation.
    """
    if base < 1:
        raise ValueError("base must be >= 1")
    if target_n < 1:
        raise ValueError("target_n must be positive")
    if factor is None:
        step = lambda t: ts_type_step(t_y, t_x, t)
    else:
        step = lambda t: factor * t
    grid = _iterate(target_n, base, step)
    inputs = {"target_n": target_n, "t_y": t_y, "t_x": t_x, "base": base, "factor": factor}
    trace = [(f"T_2,{n}", t) for n, t in grid]
    return BoundReport("type2_twisted", grid[-1][1], inputs, trace,
                       lambda: _iterate(target_n, base, step)[-1][1])


# ---------------------------------------------------------------------------
# The two published chains
# ---------------------------------------------------------------------------

def hilbert_envelope(n: float) -> float:
    """2(1+sqrt 2) log2 n, the closed form dominating T_{2,n} of a Hilbert twisted sum."""
    return 2 * (1 + SQRT2) * math.log2(n)


def hilbert_chain(d: int, cap: str = "printed") -> BoundReport:
    """Type-2 bound of S_2^d (+)_F S_2^d.

    ``cap="printed"`` stops the family size at n = 4 d^2, which turns the
    envelope into 4(1+sqrt 2) log2(2d).  ``cap="lemma"`` uses D(D+1)/2 with
    D = 2 d^2, the real dimension of the twisted sum.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    n = 4 * d * d if cap == "printed" else caratheodory_cap(2 * d * d)
    it = type2_twisted_bound(n)
    value = hilbert_envelope(n)
    trace = it.trace + [("iterated", it.value), ("n", float(n)), ("envelope", value)]
    if cap == "printed":
        trace.append(("closed_form", 4 * (1 + SQRT2) * math.log2(2 * d)))
    return BoundReport(f"hilbert_chain[{cap}]", value, {"d": d, "n": n, "cap": cap}, trace,
                       lambda: hilbert_envelope(n))


def sinf_step_factor(d: int) -> float:
    return 2 * math.sqrt(8 * math.log2(d))


def sinf_interpolated(n: float, d: int) -> float:
    """sqrt2 log2(n) (8 log2 d)^(log2 log2 n / 2), valid for n >= 2."""
    return SQRT2 * math.log2(n) * (8 * math.log2(d)) ** (math.log2(math.log2(n)) / 2)


def sinf_final(d: int) -> float:
    return 2 * (8 * math.log2(d)) ** (2 + math.log2(math.log2(2 * d)) / 2)


def sinf_chain(d: int, cap: str = "printed") -> BoundReport:
    """Type-2 bound of the dual twisted sum S_inf^d (+) S_2^d.

    The reported value is the final closed form of the argument (with
    ``cap="printed"``, family size 2 d^4).  The trace also carries the grid
    values s^k sqrt2 of the multiplicative recursion, the interpolated
    bound at the capped n and the sharper three-term iteration, so callers
    can compare each link.  ``cap="lemma"`` substitutes d^2 (2 d^2 + 1) into
    the interpolated form and reports that instead.
    """
    if d < 2:
        raise ValueError("the S_inf chain needs d >= 2")
    n = 2 * d**4 if cap == "printed" else caratheodory_cap(2 * d * d)
    s = sinf_step_factor(d)
    mult = type2_twisted_bound(n, factor=s)
    full = type2_twisted_bound(n, t_y=math.sqrt(4 * math.log2(d)), t_x=1.0)
    interp = sinf_interpolated(n, d)
    final = sinf_final(d)
    trace = [("step_factor", s)] + mult.trace + [
        ("iterated_three_term", full.value),
        ("n", float(n)),
        ("interpolated", interp),
        ("closed_form", final),
    ]
    if cap == "printed":
        return BoundReport("sinf_chain[printed]", final, {"d": d, "n": n, "cap": cap}, trace,
                           lambda: sinf_final(d))
    return BoundReport("sinf_chain[lemma]", interp, {"d": d, "n": n, "cap": cap}, trace,
                       lambda: sinf_interpolated(n, d))


# ---------------------------------------------------------------------------
# Theorem-level bounds
# ---------------------------------------------------------------------------

def theorem1_rhs(delta: float, t2_z: float | None = None, c2_x: float | None = None,
                 t2_zdual: float | None = None, c2_ydual: float | None = None) -> float:
    """2 delta min{T2(Z) C2(X), 1 + T2(Z*) C2(Y*)}; a branch with a missing input is skipped."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    branches = []
    if t2_z is not None and c2_x is not None:
        branches.append(t2_z * c2_x)
    if t2_zdual is not None and c2_ydual is not None:
        branches.append(1 + t2_zdual * c2_ydual)
    if not branches:
        raise ValueError("both branches of the bound are unavailable")
    return 2 * delta * min(branches)


def wigner_beta(d: int) -> float:
    return 2 + 0.5 * math.log2(math.log2(2 * d))


def wigner_bound(d: int, eps: float) -> float:
    """4 (8 log2 d)^(2 + log2 log2(2d) / 2) sqrt(d eps)."""
    if d < 2:
        raise ValueError("the projective bound is stated for d >= 2")
    if eps <= 0:
        raise ValueError("eps must be positive")
    return 4 * (8 * math.log2(d)) ** wigner_beta(d) * math.sqrt(d * eps)


def wigner_statement_bound(d: int, eps: float, c: float = 8.0) -> float:
    """(C log2 d)^beta sqrt(d eps); equals wigner_bound / 4 when C = 8."""
    if d < 2:
        raise ValueError("the projective bound is stated for d >= 2")
    return (c * math.log2(d)) ** wigner_beta(d) * math.sqrt(d * eps)


def global_bound(d: int, eps: float) -> float:
    """79 sqrt(eps) (1 + log2 d)."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    return 79 * math.sqrt(eps) * (1 + math.log2(d))


def global_intermediate(d: int, eps: float) -> float:
    """32 (1 + sqrt2) log2(2d) sqrt(eps): distance from the extension to its linear fit."""
    return 32 * (1 + SQRT2) * math.log2(2 * d) * math.sqrt(eps)


# ---------------------------------------------------------------------------
# Right-hand sides for the two instance routes, from closed-form constants only
# ---------------------------------------------------------------------------

def wigner_route_rhs(d: int, delta: float) -> BoundReport:
    """Bound for Z = S_2^d (+)_F S_1^d with lemma-consistent family caps.

    Primal branch: T2(Z) from the recursion with T2(S_2) = 1, T2(S_1) = sqrt d,
    and C2(S_1) <= sqrt e.  Dual branch: T2(Z*) from the recursion with
    T2(S_inf) <= sqrt(4 log2 d) and the cotype factor C2(S_inf) <= sqrt d used
    in the projective argument.
    """
    n = caratheodory_cap(2 * d * d)
    primal = type2_twisted_bound(n, t_y=1.0, t_x=math.sqrt(d))
    c2_x = math.sqrt(math.e)
    t_inf = max(1.0, math.sqrt(4 * math.log2(d))) if d >= 2 else 1.0
    dual = type2_twisted_bound(n, t_y=t_inf, t_x=1.0)
    c2_ydual = math.sqrt(d)
    value = theorem1_rhs(delta, primal.value, c2_x, dual.value, c2_ydual)
    trace = [("T2(Z)", primal.value), ("C2(X)", c2_x), ("T2(Z*)", dual.value), ("C2(Y*)", c2_ydual),
             ("primal", 2 * delta * primal.value * c2_x), ("dual", 2 * delta * (1 + dual.value * c2_ydual))]
    return BoundReport("theorem1[wigner]", value, {"d": d, "delta": delta, "n": n}, trace,
                       lambda: theorem1_rhs(delta, primal.reevaluate(), c2_x, dual.reevaluate(), c2_ydual))


def global_route_rhs(d: int, delta: float) -> BoundReport:
    """Bound for Z = S_2^d (+)_F S_2^d: all component constants equal 1."""
    n = caratheodory_cap(2 * d * d)
    it = type2_twisted_bound(n)
    value = theorem1_rhs(delta, it.value, 1.0, it.value, 1.0)
    trace = [("T2(Z)", it.value), ("C2(X)", 1.0), ("T2(Z*)", it.value), ("C2(Y*)", 1.0)]
    return BoundReport("theorem1[global]", value, {"d": d, "delta": delta, "n": n}, trace,
                       lambda: theorem1_rhs(delta, it.reevaluate(), 1.0, it.reevaluate(), 1.0))
