"""Traveling-wave construction.

A traveling wave phi(x, t) = v(x + c (T - t)) of the conservation-form
equation satisfies the first-order identity

    -c v + d/dxi A(v) + B(v) = K0.

With z = A(v) this becomes the scalar autonomous ODE z' = F(z), F = G o A^{-1},
G(v) = K0 + c v - B(v).  A wave is a heteroclinic orbit of this ODE between
two roots of G lying on opposite sides of the switching level v = 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq, minimize_scalar

from .errors import ConsistencyError, InvalidLimitsError, NoWaveError, PreconditionError
from .model import (
    ModelParams,
    Variant,
    eval_A,
    eval_A_prime,
    eval_B,
    eval_B_prime,
    eval_F,
    eval_F_prime,
    eval_G,
    eval_G_prime,
    invert_A,
    theta_of_phi,
)

ROOT_SCAN_BRACKETS = 4096
VALIDATION_SAMPLES = 10_001
TANGENCY_TOL = 1e-12


class Direction(str, enum.Enum):
    DECREASING = "decreasing"
    INCREASING = "increasing"


class Root(NamedTuple):
    """Root of G with the sign of G' there (0 marks a tangential root)."""

    v: float
    g_prime_sign: int

    @property
    def degenerate(self) -> bool:
        return self.g_prime_sign == 0


@dataclass(frozen=True)
class WaveSpec:
    """Far-field data of a candidate wave.

    ``v_left`` is the limit as xi -> -inf and ``v_right`` the limit as
    xi -> +inf.  ``fprime_left`` / ``fprime_right`` are F' at the z-images;
    a heteroclinic orbit needs them positive / negative respectively.
    """

    params: ModelParams
    v_left: float
    v_right: float
    c: float
    K0: float
    z_left: float
    z_right: float
    fprime_left: float
    fprime_right: float
    direction: Direction

    @property
    def stability(self) -> tuple[int, int]:
        return int(np.sign(self.fprime_left)), int(np.sign(self.fprime_right))

    def G(self, v):
        return eval_G(self.params, self.c, self.K0, v)

    def F(self, z):
        return eval_F(self.params, self.c, self.K0, z)


@dataclass
class ValidationReport:
    valid: bool
    interior_roots: list[float]
    interior_sign: int
    expected_sign: int
    fprime_left: float
    fprime_right: float
    failures: list[str] = field(default_factory=list)


@dataclass
class StepControl:
    """Settings of the adaptive Runge-Kutta integration of z' = F(z).

    ``max_step`` also bounds the sample spacing of the emitted profile.
    """

    rtol: float = 1e-10
    atol: float = 1e-13
    max_step: float = 0.005
    method: str = "RK45"


@dataclass
class WaveProfile:
    """Sampled heteroclinic profile ordered by ascending ``xi``."""

    xi: np.ndarray
    z: np.ndarray
    v: np.ndarray
    theta: np.ndarray
    eps_trunc: float
    xi_max: float
    spec: WaveSpec
    truncated: bool = False

    def __len__(self):
        return len(self.xi)

    def v_linear(self, xi):
        """Linear interpolation of v, constant beyond the sampled range."""
        return np.interp(xi, self.xi, self.v, left=self.spec.v_left, right=self.spec.v_right)

    def v_smooth(self, xi):
        """Cubic interpolation through z, mapped back with A^{-1}.

        z is C^2 while v is only C^1 at v = 1, so interpolating z is the
        accurate route.  Values beyond the sampled range use the limits.
        """
        spline = CubicSpline(self.xi, self.z)
        xi = np.asarray(xi, dtype=float)
        inside = (xi >= self.xi[0]) & (xi <= self.xi[-1])
        z = spline(np.clip(xi, self.xi[0], self.xi[-1]))
        out = np.asarray(invert_A(self.spec.params, z))
        out = np.where(inside, out, np.where(xi < self.xi[0], self.spec.v_left, self.spec.v_right))
        return out

    def crossing(self, z_level: float) -> float:
        """xi at which z crosses ``z_level`` (linear interpolation)."""
        order = np.argsort(self.z)
        return float(np.interp(z_level, self.z[order], self.xi[order]))

    def transition_width(self, lo: float = 0.1, hi: float = 0.9) -> float:
        """Distance over which v covers the [lo, hi] fraction of its jump."""
        s = self.spec
        frac = (self.v - s.v_left) / (s.v_right - s.v_left)
        return float(np.interp(hi, frac, self.xi) - np.interp(lo, frac, self.xi))


def _check_limits(v_left: float, v_right: float):
    if not (v_left > 0 and v_right > 0 and np.isfinite(v_left) and np.isfinite(v_right)):
        raise InvalidLimitsError("limits must be finite and positive")
    lo, hi = min(v_left, v_right), max(v_left, v_right)
    if not (lo <= 1.0 < hi):
        raise InvalidLimitsError(
            f"limits ({v_left}, {v_right}) must straddle the switching level: need one <= 1 < other"
        )


def compute_wave_spec(params: ModelParams, v_left: float, v_right: float, validate: bool = True) -> WaveSpec:
    """Speed and intercept of the wave joining ``v_left`` to ``v_right``.

    The chord of B through both limits gives the speed; both limits are then
    roots of G by construction.

    Raises
    ------
    InvalidLimitsError
        If the limits are not on opposite sides of 1.
    NoWaveError
        If ``validate`` and no heteroclinic connection exists.
    """
    v_left, v_right = float(v_left), float(v_right)
    _check_limits(v_left, v_right)
    b_l, b_r = eval_B(params, v_left), eval_B(params, v_right)
    c = (b_r - b_l) / (v_right - v_left)
    K0 = b_l - c * v_left
    z_l, z_r = eval_A(params, v_left), eval_A(params, v_right)
    fp_l = eval_G_prime(params, c, K0, v_left) / eval_A_prime(params, v_left)
    fp_r = eval_G_prime(params, c, K0, v_right) / eval_A_prime(params, v_right)
    spec = WaveSpec(
        params=params,
        v_left=v_left,
        v_right=v_right,
        c=c,
        K0=K0,
        z_left=z_l,
        z_right=z_r,
        fprime_left=fp_l,
        fprime_right=fp_r,
        direction=Direction.DECREASING if v_left > v_right else Direction.INCREASING,
    )
    if validate:
        validate_connection(spec)
    return spec


def analytic_z_roots_simple(omega: float, c: float, K0: float) -> tuple[float, float]:
    """Closed-form roots ``(z_plus, z_minus)`` of F for the simple model.

    Valid for c > 0 and K0 + c < 0, where 0 < z_plus < 1/2 < z_minus < 1.
    """
    if not (c > 0 and K0 + c < 0):
        raise NoWaveError(f"closed-form roots need c > 0 and K0 + c < 0 (c={c}, K0={K0})")
    disc = c**2 / omega**2 - 2.0 * (c + K0) / omega
    if disc < 0:
        raise NoWaveError("negative discriminant")
    z_minus = 1.0 + c / (2.0 * K0)
    z_plus = 0.5 - c / (2.0 * omega) - 0.5 * math.sqrt(disc)
    if not (0 < z_plus < 0.5 < z_minus < 1):
        raise NoWaveError(f"root ordering violated: z+={z_plus}, z-={z_minus}")
    return z_plus, z_minus


def _scan_segment(g, a: float, b: float, n: int, atol: float) -> list[tuple[float, bool]]:
    """Roots of ``g`` on [a, b] as (location, degenerate) pairs."""
    x = np.linspace(a, b, n + 1)
    y = g(x)
    s = np.where(np.abs(y) <= atol, 0, np.sign(y)).astype(int)
    if not s.any():
        raise NoWaveError(f"G vanishes identically on [{a:g}, {b:g}]; its roots are not isolated")
    found = []
    for i in range(n):
        if s[i] * s[i + 1] < 0:
            found.append((brentq(g, x[i], x[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps), False))
    for i in range(n + 1):
        if s[i] != 0:
            continue
        left = s[i - 1] if i > 0 else 0
        right = s[i + 1] if i < n else 0
        if left * right < 0:
            found.append((brentq(g, x[i - 1], x[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps), False))
        elif left * right > 0:
            found.append((float(x[i]), True))
        else:
            found.append((float(x[i]), False))
    # near-tangencies between nodes: |g| dips without a sign change
    ay = np.abs(y)
    for i in range(1, n):
        if s[i - 1] == s[i] == s[i + 1] != 0 and ay[i] <= ay[i - 1] and ay[i] <= ay[i + 1]:
            sgn = s[i]
            res = minimize_scalar(
                lambda t: sgn * g(t), bounds=(x[i - 1], x[i + 1]), method="bounded", options={"xatol": 1e-13}
            )
            gmin = g(res.x)
            if sgn * gmin < 0:
                found.append((brentq(g, x[i - 1], res.x, xtol=1e-14), False))
                found.append((brentq(g, res.x, x[i + 1], xtol=1e-14), False))
            elif abs(gmin) <= 1e-10:
                found.append((float(res.x), True))
    return found


def find_phi_roots(
    params: ModelParams,
    c: float,
    K0: float,
    search_interval: tuple[float, float],
    n_brackets: int = ROOT_SCAN_BRACKETS,
) -> list[Root]:
    """All roots of G on ``search_interval`` with the sign of G' at each.

    The interval is split at v = 1 so that every scanned segment lies on a
    single smooth branch of the closures.
    """
    lo, hi = map(float, search_interval)
    if not (0 < lo < hi):
        raise PreconditionError(f"search interval must satisfy 0 < lo < hi, got {search_interval}")

    def g(v):
        return eval_G(params, c, K0, v)

    segments = [(lo, hi)] if (hi <= 1 or lo >= 1) else [(lo, 1.0), (1.0, hi)]
    scale = 1.0 + abs(K0) + abs(c) * hi + abs(eval_B(params, hi)) + abs(eval_B(params, lo))
    atol = 64 * np.finfo(float).eps * scale
    raw = []
    for a, b in segments:
        raw.extend(_scan_segment(g, a, b, n_brackets, atol))
    raw.sort()
    roots: list[Root] = []
    for v, degenerate in raw:
        if roots and abs(v - roots[-1].v) <= 1e-9 * max(1.0, v):
            if degenerate and not roots[-1].degenerate:
                roots[-1] = Root(roots[-1].v, 0)
            continue
        gp = eval_G_prime(params, c, K0, v)
        sign = 0 if degenerate or abs(gp) <= TANGENCY_TOL else int(np.sign(gp))
        roots.append(Root(float(v), sign))
    return roots


def secant_threshold(params: ModelParams, v_minus: float) -> float:
    """Smallest admissible right limit for an increasing wave from ``v_minus``.

    Returns the root > 1 of B(w) - B(v_minus) = B'(v_minus) (w - v_minus),
    i.e. where the tangent to B at ``v_minus`` meets B again.
    """
    if params.variant is not Variant.GENERAL or params.alpha != 0 or params.beta != 0:
        raise PreconditionError("secant threshold needs the general variant with alpha = beta = 0")
    if not 1 < params.m < 2:
        raise PreconditionError(f"secant threshold needs 1 < m < 2, got m={params.m}")
    if not params.m / 2 < v_minus < 1:
        raise PreconditionError(f"v_minus must lie strictly in ({params.m / 2}, 1), got {v_minus}")
    b0, slope = eval_B(params, v_minus), eval_B_prime(params, v_minus)

    def h(w):
        return eval_B(params, w) - b0 - slope * (w - v_minus)

    hi = 2.0
    while h(hi) <= 0:
        hi *= 2.0
    return brentq(h, 1.0, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)


def validate_connection(spec: WaveSpec, raise_on_failure: bool = True) -> ValidationReport:
    """Check that ``spec`` admits a heteroclinic orbit of z' = F(z).

    Three conditions are checked: no root of F strictly between the two
    z-images, the correct sign of F there (the sign of z_right - z_left), and
    F' > 0 at the left image, F' < 0 at the right image.
    """
    p = spec.params
    lo, hi = sorted((spec.v_left, spec.v_right))
    failures = []

    roots = find_phi_roots(p, spec.c, spec.K0, (lo / 10.0, 10.0 * hi))
    interior = [
        r.v for r in roots
        if lo * (1 + 1e-8) < r.v < hi * (1 - 1e-8)
    ]
    if interior:
        failures.append(f"F has interior roots at v = {interior}")

    expected = 1 if spec.z_right > spec.z_left else -1
    t = np.arange(1, VALIDATION_SAMPLES + 1) / (VALIDATION_SAMPLES + 1)
    zs = spec.z_left + t * (spec.z_right - spec.z_left)
    fs = np.asarray(eval_F(p, spec.c, spec.K0, zs))
    signs = np.unique(np.sign(fs))
    interior_sign = int(signs[0]) if len(signs) == 1 else 0
    if interior_sign != expected:
        word = "positive" if expected > 0 else "negative"
        failures.append(f"F must be {word} between the limits")

    if abs(spec.fprime_left) <= TANGENCY_TOL or abs(spec.fprime_right) <= TANGENCY_TOL:
        failures.append("tangential endpoint (F' = 0)")
    else:
        if spec.fprime_left <= 0:
            failures.append("F'(z_left) must be positive")
        if spec.fprime_right >= 0:
            failures.append("F'(z_right) must be negative")

    report = ValidationReport(
        valid=not failures,
        interior_roots=interior,
        interior_sign=interior_sign,
        expected_sign=expected,
        fprime_left=spec.fprime_left,
        fprime_right=spec.fprime_right,
        failures=failures,
    )
    if failures and raise_on_failure:
        raise NoWaveError("; ".join(failures))
    return report


def _leg(spec: WaveSpec, z0: float, target: float, sign: float, eps_z: float, xi_max: float, ctl: StepControl):
    p = spec.params
    lo_r, hi_r = p.a_range
    pad = 1e-14

    def rhs(_, y):
        z = np.clip(y[0], lo_r + pad, hi_r - pad)
        return [sign * eval_F(p, spec.c, spec.K0, z)]

    def near_end(_, y):
        return abs(y[0] - target) - eps_z

    near_end.terminal = True
    sol = solve_ivp(
        rhs, (0.0, xi_max), [z0], method=ctl.method, rtol=ctl.rtol, atol=ctl.atol,
        max_step=ctl.max_step, events=near_end,
    )
    if sol.status == -1 and sol.t.size < 2:
        raise ConsistencyError(f"profile integration failed: {sol.message}")
    truncated = sol.status != 1
    # the solver can emit a final sample one ulp past the previous one
    keep = np.concatenate([[True], (np.diff(sol.t) > 1e-12) & (np.diff(sol.y[0]) != 0)])
    return sign * sol.t[keep], sol.y[0][keep], truncated


def integrate_profile(
    spec: WaveSpec,
    eps_trunc: float = 1e-8,
    xi_max: float = 200.0,
    step_control: StepControl | None = None,
    z_start: float | None = None,
) -> WaveProfile:
    """Integrate z' = F(z) outward from a point between the two z-images.

    By default the orbit is pinned by z(0) = (z_left + z_right) / 2.  Each
    half is integrated until z and v are both within ``eps_trunc`` of their
    limit or until |xi| reaches ``xi_max`` (``truncated`` is then set).
    Samples are the accepted steps of the adaptive solver.
    """
    ctl = step_control or StepControl()
    if z_start is None:
        z_start = 0.5 * (spec.z_left + spec.z_right)
    zl, zr = spec.z_left, spec.z_right
    if not min(zl, zr) < z_start < max(zl, zr):
        raise PreconditionError("z_start must lie strictly between the endpoint images")
    p = spec.params
    # tighten the z threshold so that v = A^{-1}(z) also meets eps_trunc
    eps_r = eps_trunc * min(1.0, eval_A_prime(p, spec.v_right))
    eps_l = eps_trunc * min(1.0, eval_A_prime(p, spec.v_left))
    xi_f, z_f, tr_f = _leg(spec, z_start, zr, 1.0, eps_r, xi_max, ctl)
    xi_b, z_b, tr_b = _leg(spec, z_start, zl, -1.0, eps_l, xi_max, ctl)
    xi = np.concatenate([xi_b[::-1], xi_f[1:]]) + 0.0  # + 0.0 turns -0.0 into 0.0
    z = np.concatenate([z_b[::-1], z_f[1:]])

    dz = np.diff(z)
    want = 1.0 if zr > zl else -1.0
    if np.any(dz * want <= 0):
        raise ConsistencyError("integrated profile is not strictly monotone")
    v = np.asarray(invert_A(p, z))
    lo, hi = sorted((spec.v_left, spec.v_right))
    if np.any(v <= lo) or np.any(v >= hi):
        raise ConsistencyError("profile left the interval between its limits")
    return WaveProfile(
        xi=xi,
        z=z,
        v=v,
        theta=np.asarray(theta_of_phi(p, v)),
        eps_trunc=eps_trunc,
        xi_max=xi_max,
        spec=spec,
        truncated=tr_f or tr_b,
    )


def identity_residual(profile: WaveProfile) -> np.ndarray:
    """-c v + F(z) + B(v) - K0 along the profile, with z' taken as F(z)."""
    s = profile.spec
    p = s.params
    return -s.c * profile.v + np.asarray(eval_F(p, s.c, s.K0, profile.z)) + np.asarray(eval_B(p, profile.v)) - s.K0


def stability_endpoints(spec: WaveSpec) -> tuple[float, float]:
    """F' at the left and right z-images (recomputed from z)."""
    p = spec.params
    return (
        eval_F_prime(p, spec.c, spec.K0, spec.z_left),
        eval_F_prime(p, spec.c, spec.K0, spec.z_right),
    )
