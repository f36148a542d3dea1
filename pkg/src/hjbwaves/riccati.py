"""Value-function curves recovered from the risk-aversion field.

At a fixed time the field phi = -(1/omega) V_xx / V_x determines V_x up to a
positive factor,

    V_x(x) = exp(-omega * int_{x0}^{x} phi(s) ds),

and V by one more quadrature.  For the quadratic-drift model the transformed
field is phi~ = -(1/omega) (V_xx - V_x) / V_x, so the exponent integrand is
1 - omega phi~ instead.  We fix V_x(x0) = 1 and V(x0) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicHermiteSpline

from .errors import DomainError, PreconditionError
from .model import Variant
from .waves import WaveProfile


def _as_variant(variant) -> Variant:
    return variant if isinstance(variant, Variant) else Variant(variant)


def _integral_from(x: np.ndarray, g: np.ndarray, x0: float) -> np.ndarray:
    """Trapezoid cumulative integral of ``g`` on ``x``, zero at ``x0``.

    Sums run outward from ``x0`` so no large offset is subtracted later;
    ``x0`` may fall between nodes, where ``g`` is taken linear.
    """
    j = int(np.clip(np.searchsorted(x, x0, side="right") - 1, 0, len(x) - 2))
    g0 = g[j] + (g[j + 1] - g[j]) * (x0 - x[j]) / (x[j + 1] - x[j])
    out = np.empty_like(g)
    # right part: x0 -> x[j+1] -> ...
    right = cumulative_trapezoid(g[j + 1 :], x[j + 1 :], initial=0.0)
    out[j + 1 :] = 0.5 * (x[j + 1] - x0) * (g0 + g[j + 1]) + right
    # left part: x0 -> x[j] -> ... run on the reversed arrays
    left = cumulative_trapezoid(g[j::-1], x[j::-1], initial=0.0)
    out[j::-1] = 0.5 * (x[j] - x0) * (g0 + g[j]) + left
    return out


def first_second_differences(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Three-point first and second differences at interior nodes.

    Valid on non-uniform grids; second-order for the first difference and
    first-order (second-order when uniform) for the second.
    """
    h1 = x[1:-1] - x[:-2]
    h2 = x[2:] - x[1:-1]
    ym, y0, yp = y[:-2], y[1:-1], y[2:]
    d1 = (-h2 / (h1 * (h1 + h2))) * ym + ((h2 - h1) / (h1 * h2)) * y0 + (h1 / (h2 * (h1 + h2))) * yp
    d2 = 2.0 * (ym / (h1 * (h1 + h2)) - y0 / (h1 * h2) + yp / (h2 * (h1 + h2)))
    return d1, d2


@dataclass(frozen=True, eq=False)
class ValueCurve:
    """Marginal value and value levels at one time slice."""

    x: np.ndarray
    Vx: np.ndarray
    V: np.ndarray
    x0: float
    omega: float
    variant: Variant = Variant.SIMPLE

    def recovered_phi(self) -> tuple[np.ndarray, np.ndarray]:
        """Recompute the field from differences of V at interior nodes.

        Returns ``(x_interior, phi)``.
        """
        d1, d2 = first_second_differences(self.x, self.V)
        ratio = d2 / d1
        if self.variant is Variant.QUADRATIC_DRIFT:
            return self.x[1:-1], (1.0 - ratio) / self.omega
        return self.x[1:-1], -ratio / self.omega

    def arrow_pratt(self) -> tuple[np.ndarray, np.ndarray]:
        """-V_xx / V_x from differences of V at interior nodes."""
        d1, d2 = first_second_differences(self.x, self.V)
        return self.x[1:-1], -d2 / d1


@dataclass(frozen=True, eq=False)
class UtilitySpec:
    """Terminal utility on a grid with constant-risk-aversion tails.

    Inside the grid u is the cubic Hermite interpolant of (u, u').  Beyond
    either end u continues with the constant absolute risk aversion it has at
    that end, so it stays increasing and smooth on the whole line.
    """

    x: np.ndarray
    u: np.ndarray
    u_prime: np.ndarray
    lambda_lo: float
    lambda_hi: float
    tail_left: float
    tail_right: float
    _spline: CubicHermiteSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if np.any(self.u_prime <= 0):
            raise DomainError("u' must be positive")
        if not 0 < self.lambda_lo <= self.lambda_hi:
            raise PreconditionError("need 0 < lambda_lo <= lambda_hi")
        object.__setattr__(self, "_spline", CubicHermiteSpline(self.x, self.u, self.u_prime))

    def _tail(self, x, x_end, u_end, du_end, rate):
        if rate == 0:
            return u_end + du_end * (x - x_end)
        return u_end + du_end * (-np.expm1(-rate * (x - x_end))) / rate

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        left, right = x < self.x[0], x > self.x[-1]
        mid = ~(left | right)
        out[mid] = self._spline(x[mid])
        out[left] = self._tail(x[left], self.x[0], self.u[0], self.u_prime[0], self.tail_left)
        out[right] = self._tail(x[right], self.x[-1], self.u[-1], self.u_prime[-1], self.tail_right)
        return out if out.ndim else float(out)

    def arrow_pratt(self) -> tuple[np.ndarray, np.ndarray]:
        """-u''/u' from differences of u' at interior nodes."""
        d1, _ = first_second_differences(self.x, self.u_prime)
        return self.x[1:-1], -d1 / self.u_prime[1:-1]


def marginal_from_phi(x, phi, omega: float, x0: float = 0.0, variant=Variant.SIMPLE) -> ValueCurve:
    """Invert the Riccati transformation on a grid.

    Parameters
    ----------
    x : array_like
        Strictly increasing grid.
    phi : array_like
        Positive field samples on ``x`` (phi~ for the quadratic-drift model).
    omega : float
        Positive model constant.
    x0 : float
        Normalization point inside the grid: V_x(x0) = 1 and V(x0) = 0.
        V is stored in float64, so where V_x has decayed by many orders of
        magnitude relative to |V| its differences lose precision; placing
        ``x0`` toward the decaying side keeps |V| small there.

    Raises
    ------
    DomainError
        If some sample of ``phi`` is not positive.
    """
    x = np.asarray(x, dtype=float)
    phi = np.asarray(phi, dtype=float)
    variant = _as_variant(variant)
    if x.ndim != 1 or x.shape != phi.shape or len(x) < 3:
        raise PreconditionError("x and phi must be 1-d arrays of equal length >= 3")
    if np.any(np.diff(x) <= 0):
        raise PreconditionError("x must be strictly increasing")
    if not omega > 0:
        raise PreconditionError("omega must be positive")
    if not x[0] <= x0 <= x[-1]:
        raise PreconditionError("x0 must lie inside the grid")
    if not np.all(np.isfinite(phi)) or np.any(phi <= 0):
        raise DomainError("phi must be positive")

    if variant is Variant.QUADRATIC_DRIFT:
        integrand = 1.0 - omega * phi
    else:
        integrand = -omega * phi
    vx = np.exp(_integral_from(x, integrand, x0))
    v = _integral_from(x, vx, x0)
    return ValueCurve(x=x, Vx=vx, V=v, x0=float(x0), omega=float(omega), variant=variant)


def synth_terminal_utility(profile: WaveProfile, omega: float | None = None, x0: float = 0.0) -> UtilitySpec:
    """Terminal utility whose risk-aversion field is the wave profile.

    Uses the profile samples as the grid, so phi(x, T) = v(x).  The bounds are
    lambda^- = omega min v and lambda^+ = omega max v over the profile limits.
    """
    params = profile.spec.params
    omega = params.omega if omega is None else omega
    x0 = float(np.clip(x0, profile.xi[0], profile.xi[-1]))
    curve = marginal_from_phi(profile.xi, profile.v, omega, x0, params.variant)
    lo, hi = sorted((profile.spec.v_left, profile.spec.v_right))
    shift = 1.0 if params.variant is Variant.QUADRATIC_DRIFT else 0.0
    return UtilitySpec(
        x=curve.x,
        u=curve.V,
        u_prime=curve.Vx,
        lambda_lo=omega * lo,
        lambda_hi=omega * hi,
        tail_left=omega * profile.v[0] - shift,
        tail_right=omega * profile.v[-1] - shift,
    )


@dataclass
class ValueReport:
    passed: bool
    increasing: bool
    concave: bool
    min_Vx: float
    max_second_difference: float


def check_value_assumptions(curve: ValueCurve) -> ValueReport:
    """Check V_x > 0 and strict discrete concavity of V."""
    _, d2 = first_second_differences(curve.x, curve.V)
    min_vx = float(curve.Vx.min())
    max_d2 = float(d2.max())
    inc, conc = min_vx > 0, max_d2 < 0
    return ValueReport(inc and conc, inc, conc, min_vx, max_d2)
