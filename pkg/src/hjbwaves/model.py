"""Closures of the conservation-form equation for the risk-aversion field.

Three model variants are supported:

``SIMPLE``
    dX = omega*theta dt + theta dW, control bounded by 1.
``QUADRATIC_DRIFT``
    dX = (omega*theta - theta**2/2) dt + theta dW.
``GENERAL``
    dX = (beta + omega*theta) dt + sigma dW with
    sigma**2 = 2*(alpha**2 + theta**m / m).

For each variant the transformed field phi solves

    d_t phi + d_xx A(phi) + d_x B(phi) = 0,

with piecewise closures A and B that switch at phi = 1, the level where the
control constraint theta <= 1 becomes active.  All functions in this module
accept scalars or numpy arrays and return the same kind.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import DomainError

THETA_BOUND = 1.0


class Variant(str, enum.Enum):
    SIMPLE = "simple"
    QUADRATIC_DRIFT = "quadratic"
    GENERAL = "general"


class ClosureBranch(str, enum.Enum):
    """Which piece of a closure is active; phi == 1 uses the lower piece."""

    AT_OR_BELOW_ONE = "at_or_below_one"
    ABOVE_ONE = "above_one"

    @classmethod
    def of(cls, phi: float) -> "ClosureBranch":
        return cls.AT_OR_BELOW_ONE if phi <= 1.0 else cls.ABOVE_ONE


@dataclass(frozen=True)
class ModelParams:
    """Model variant together with its parameters.

    ``alpha``, ``beta`` and ``m`` only enter the ``GENERAL`` variant; the other
    two variants are evaluated as ``GENERAL`` with ``alpha = beta = 0`` and
    ``m = 2`` for the diffusion closure.
    """

    variant: Variant
    omega: float
    alpha: float = 0.0
    beta: float = 0.0
    m: float = 2.0
    theta_bound: float = THETA_BOUND

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not np.isfinite(self.omega) or self.omega <= 0:
            raise DomainError(f"omega must be positive, got {self.omega}")
        if self.variant is Variant.GENERAL:
            if not self.m > 1:
                raise DomainError(f"m must exceed 1, got {self.m}")
        elif (self.alpha, self.beta, self.m) != (0.0, 0.0, 2.0):
            raise DomainError(f"alpha, beta, m are fixed for the {self.variant.value} variant")
        if self.theta_bound != THETA_BOUND:
            raise DomainError("theta_bound is fixed at 1")

    @classmethod
    def simple(cls, omega: float) -> "ModelParams":
        return cls(Variant.SIMPLE, omega)

    @classmethod
    def quadratic_drift(cls, omega: float) -> "ModelParams":
        return cls(Variant.QUADRATIC_DRIFT, omega)

    @classmethod
    def general(cls, omega: float, m: float, alpha: float = 0.0, beta: float = 0.0) -> "ModelParams":
        return cls(Variant.GENERAL, omega, alpha=alpha, beta=beta, m=m)

    @property
    def a_at_one(self) -> float:
        """A(1), the image of the switching level."""
        return self.alpha**2 + 1.0 / self.m

    @property
    def a_range(self) -> tuple[float, float]:
        """Open interval of values taken by A on (0, inf)."""
        return (0.0, np.inf) if self.alpha != 0 else (0.0, 1.0)

    def as_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "omega": self.omega,
            "alpha": self.alpha,
            "beta": self.beta,
            "m": self.m,
        }


def _positive(phi, name="phi"):
    if isinstance(phi, (float, int)):
        if not (math.isfinite(phi) and phi > 0):
            raise DomainError(f"{name} must be finite and positive, got {phi}")
        return float(phi)
    arr = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} must be finite and positive")
    return float(arr) if arr.ndim == 0 else arr


def _piecewise(phi, lower, upper, split=1.0):
    """Apply ``lower`` where phi <= split and ``upper`` elsewhere."""
    if isinstance(phi, float):
        return lower(phi) if phi <= split else upper(phi)
    out = np.empty_like(phi)
    lo = phi <= split
    out[lo] = lower(phi[lo])
    out[~lo] = upper(phi[~lo])
    return out


class _Pieces(NamedTuple):
    a_lo: Callable
    a_hi: Callable
    da_lo: Callable
    da_hi: Callable
    b_lo: Callable
    b_hi: Callable
    db_lo: Callable
    db_hi: Callable


@functools.lru_cache(maxsize=256)
def _pieces(p: ModelParams) -> _Pieces:
    if p.variant is Variant.GENERAL:
        w, al2, be, m = p.omega, p.alpha**2, p.beta, p.m
        a1, k = p.a_at_one, (m - 1.0) / m
        return _Pieces(
            a_lo=lambda x: a1 * x,
            a_hi=lambda x: 1.0 - k * x ** (-1.0 / (m - 1.0)) + al2 * x,
            da_lo=lambda x: a1 + 0.0 * x,
            da_hi=lambda x: x ** (-m / (m - 1.0)) / m + al2,
            b_lo=lambda x: (be + w) * x - w * a1 * x**2 - w * k,
            b_hi=lambda x: be * x - w * al2 * x**2 + k * w * (x ** ((m - 2.0) / (m - 1.0)) - 1.0),
            db_lo=lambda x: be + w - 2.0 * w * a1 * x,
            db_hi=lambda x: be - 2.0 * w * al2 * x + (m - 2.0) / m * w * x ** (-1.0 / (m - 1.0)),
        )
    w = p.omega
    if p.variant is Variant.SIMPLE:
        return _Pieces(
            a_lo=lambda x: 0.5 * x,
            a_hi=lambda x: 1.0 - 0.5 / x,
            da_lo=lambda x: 0.5 + 0.0 * x,
            da_hi=lambda x: 0.5 / x**2,
            b_lo=lambda x: -0.5 * w * (1.0 - x) ** 2,
            b_hi=lambda x: 0.0 * x,
            db_lo=lambda x: w * (1.0 - x),
            db_hi=lambda x: 0.0 * x,
        )
    # shifted flux B + A of the simple model
    return _Pieces(
        a_lo=lambda x: 0.5 * x,
        a_hi=lambda x: 1.0 - 0.5 / x,
        da_lo=lambda x: 0.5 + 0.0 * x,
        da_hi=lambda x: 0.5 / x**2,
        b_lo=lambda x: -0.5 * w * (1.0 - x) ** 2 + 0.5 * x,
        b_hi=lambda x: 1.0 - 0.5 / x,
        db_lo=lambda x: w * (1.0 - x) + 0.5,
        db_hi=lambda x: 0.5 / x**2,
    )


def eval_A(params: ModelParams, phi):
    """Diffusion closure A(phi); continuous and strictly increasing."""
    pc = _pieces(params)
    return _piecewise(_positive(phi), pc.a_lo, pc.a_hi)


def eval_A_prime(params: ModelParams, phi):
    pc = _pieces(params)
    return _piecewise(_positive(phi), pc.da_lo, pc.da_hi)


def eval_B(params: ModelParams, phi):
    """Flux closure B(phi).

    For ``QUADRATIC_DRIFT`` this is the shifted flux B + A of the simple model.
    """
    pc = _pieces(params)
    return _piecewise(_positive(phi), pc.b_lo, pc.b_hi)


def eval_B_prime(params: ModelParams, phi):
    pc = _pieces(params)
    return _piecewise(_positive(phi), pc.db_lo, pc.db_hi)


def _newton_bisect(f, fprime, target, lo, hi, rtol=1e-15, maxiter=200):
    """Vectorised safeguarded Newton iteration for increasing ``f``.

    Solves ``f(x) = target`` given brackets with ``f(lo) <= target <= f(hi)``.
    A Newton step that leaves the current bracket is replaced by bisection.
    """
    lo, hi = lo.copy(), hi.copy()
    x = 0.5 * (lo + hi)
    for _ in range(maxiter):
        r = f(x) - target
        below = r < 0
        lo = np.where(below, x, lo)
        hi = np.where(below, hi, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = x - r / fprime(x)
        inside = (step > lo) & (step < hi)
        x_new = np.where(r == 0, x, np.where(inside, step, 0.5 * (lo + hi)))
        done = np.abs(x_new - x) <= rtol * np.abs(x_new)
        x = x_new
        if np.all(done):
            break
    return x


def _invert_upper(params: ModelParams, z):
    """A^{-1} on the phi > 1 branch."""
    if params.variant is not Variant.GENERAL:
        return 0.5 / (1.0 - z)
    m = params.m
    if params.alpha == 0:
        return (m * (1.0 - z) / (m - 1.0)) ** (-(m - 1.0))
    pc = _pieces(params)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    lo = np.ones_like(z)
    hi = 2.0 * np.ones_like(z)
    while True:
        short = pc.a_hi(hi) < z
        if not np.any(short):
            break
        hi = np.where(short, 2.0 * hi, hi)
    return _newton_bisect(pc.a_hi, pc.da_hi, z, lo, hi)


def invert_A(params: ModelParams, z):
    """Return the unique phi > 0 with A(phi) = z."""
    lo_r, hi_r = params.a_range
    if isinstance(z, (float, int)):
        z = float(z)
        if not (math.isfinite(z) and lo_r < z < hi_r):
            raise DomainError(f"z must lie in the open range ({lo_r}, {hi_r}) of A, got {z}")
    else:
        z = np.asarray(z, dtype=float)
        if not np.all(np.isfinite(z)) or np.any(z <= lo_r) or np.any(z >= hi_r):
            raise DomainError(f"z must lie in the open range ({lo_r}, {hi_r}) of A")
        if z.ndim == 0:
            z = float(z)
    z1 = params.a_at_one
    if isinstance(z, float):
        return z / z1 if z <= z1 else float(np.squeeze(_invert_upper(params, z)))
    return _piecewise(z, lambda s: s / z1, lambda s: _invert_upper(params, s), split=z1)


def eval_G(params: ModelParams, c: float, K0: float, v):
    """G(v) = K0 + c v - B(v); its roots are the admissible far-field limits."""
    return K0 + c * _positive(v, "v") - eval_B(params, v)


def eval_G_prime(params: ModelParams, c: float, K0: float, v):
    return c - eval_B_prime(params, _positive(v, "v"))


def eval_F(params: ModelParams, c: float, K0: float, z):
    """Right-hand side of the profile ODE z' = F(z), F = G o A^{-1}."""
    return eval_G(params, c, K0, invert_A(params, z))


def eval_F_prime(params: ModelParams, c: float, K0: float, z):
    v = invert_A(params, z)
    return eval_G_prime(params, c, K0, v) / eval_A_prime(params, v)


def theta_of_phi(params: ModelParams, phi):
    """Optimal response for a given risk-aversion level, clamped at 1."""
    phi = _positive(phi)
    power = 1.0 / (params.m - 1.0) if params.variant is Variant.GENERAL else 1.0
    return _piecewise(phi, lambda x: 1.0 + 0.0 * x, lambda x: x**-power)
