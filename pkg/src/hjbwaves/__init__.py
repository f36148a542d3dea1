"""Traveling waves of the risk-aversion equation for optimal portfolio problems.

Build far-field data and profiles with :mod:`hjbwaves.waves`, check them
against the evolution equation with :mod:`hjbwaves.pde`, recover value
functions with :mod:`hjbwaves.riccati` and compare policies by simulation with
:mod:`hjbwaves.montecarlo`.
"""

from .errors import (
    ConsistencyError,
    DomainError,
    HJBWaveError,
    InvalidLimitsError,
    NoWaveError,
    PreconditionError,
    SchemeError,
)
from .model import (
    ModelParams,
    Variant,
    eval_A,
    eval_A_prime,
    eval_B,
    eval_B_prime,
    eval_F,
    eval_G,
    invert_A,
    theta_of_phi,
)
from .montecarlo import (
    CARAUtility,
    PolicyField,
    SDEConfig,
    SimResult,
    cara_constant_oracle,
    drift_vol,
    policy_from_wave,
    simulate,
)
from .pde import FieldEvolution, SpatialGrid, check_bounds, estimate_speed, evolve, residual_constant, run_wave
from .riccati import UtilitySpec, ValueCurve, check_value_assumptions, marginal_from_phi, synth_terminal_utility
from .waves import (
    WaveProfile,
    WaveSpec,
    compute_wave_spec,
    find_phi_roots,
    integrate_profile,
    secant_threshold,
    validate_connection,
)

__version__ = "0.1.0"
