"""Numerical tolerances shared by every module.

Acceptance tests import :data:`TOL` directly so that thresholds live in one place.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-12          # entrywise |x - x^*|
    zero: float = 1e-10               # "nonzero" coordinate / phase threshold
    eig_group: float = 1e-12          # relative gap under which eigenvalues are one eigenspace
    orth_residual: float = 1e-8       # Gram-Schmidt skip threshold inside eigenspaces
    norm_axiom: float = 1e-10
    homogeneity: float = 1e-9
    unitary: float = 1e-10
    projection: float = 1e-10
    witness: float = 1e-9             # decomposition witness re-evaluation
    sandwich_rel: float = 1e-6
    duality: float = 1e-6
    solver: float = 1e-6
    delta_floor: float = 1e-9
    exact_enum_max_n: int = 14
    gaussian_samples: int = 20000


TOL = Tolerances()
