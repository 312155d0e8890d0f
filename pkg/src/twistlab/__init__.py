"""Numerical toolkit for stability of almost-symmetries via twisted sums.

Submodules: ``spaces`` (finite-dimensional normed spaces), ``type_cotype``,
``almost_maps`` (generators, extensions, eps/delta estimators), ``twisted``
(twisted sums and their Banach envelope), ``bounds`` (closed-form constants),
``approx`` (best linear approximations and instance checks) and ``cli``.
"""

from .config import TOL, Tolerances
from .spaces import (
    HermitianElement,
    LpSpace,
    NormedSpace,
    RankOneProjection,
    SchattenSpace,
    dual_norm,
    haar_unitary,
    lp,
    norm,
    sample_unit,
    schatten,
    spectral_decompose,
)
from .type_cotype import estimate_cotype2, estimate_type2, table1_upper
from .almost_maps import (
    AlmostSymmetry,
    HomogeneousMap,
    delta_estimate,
    epsilon_estimate,
    epsilon_oracle_bloch,
    extend_global,
    extend_projective,
    perturbed_global,
    perturbed_symmetry,
    wigner_symmetry,
    wquasi_residual,
)
from .twisted import TwistedSumSpace, envelope_lower, envelope_upper, quasi_norm, sandwich_check
from .bounds import (
    global_bound,
    theorem1_rhs,
    type2_twisted_bound,
    wigner_bound,
)
from .approx import LinearMapMatrix, StabilityInstance, approx_error, best_linear_map, verify_instance

__version__ = "0.1.0"
