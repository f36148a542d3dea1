"""Monte Carlo evaluation of investment policies.

The state follows dX = mu(theta) dt + sigma(theta) dW with theta = theta(X, t)
chosen by a policy, and the quantity of interest is E[u(X_T)].  Paths are
simulated with Euler-Maruyama in fixed-size blocks.  Each block draws from its
own stream seeded by (seed, block index), so the result does not depend on
how many threads process the blocks.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, PreconditionError
from .model import ModelParams, Variant
from .waves import WaveProfile, WaveSpec

THETA_FLOOR = 1e-6
BLOCK_SIZE = 4096


class Provenance(str, enum.Enum):
    CONSTANT = "constant"
    WAVE_OPTIMAL = "wave_optimal"


def _drift_vol(params: ModelParams, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    om = params.omega
    if params.variant is Variant.SIMPLE:
        return om * theta, theta
    if params.variant is Variant.QUADRATIC_DRIFT:
        return om * theta - 0.5 * theta * theta, theta
    m, a2 = params.m, params.alpha**2
    return params.beta + om * theta, np.sqrt(2.0 * (a2 + theta**m / m))


def drift_vol(params: ModelParams, theta):
    """Drift and volatility of the state for investment fraction ``theta``.

    Raises
    ------
    DomainError
        If ``theta`` is outside (0, 1].
    """
    th = np.asarray(theta, dtype=float)
    if np.any(~(th > 0)) or np.any(th > 1):
        raise DomainError("theta must lie in (0, 1]")
    mu, sigma = _drift_vol(params, th)
    if th.ndim == 0:
        return float(mu), float(sigma)
    return mu, sigma


@dataclass(frozen=True)
class SDEConfig:
    params: ModelParams
    x0: float
    T: float
    n_paths: int
    t0: float = 0.0
    n_steps: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not self.T > self.t0:
            raise PreconditionError("T must exceed t0")
        if self.n_steps < 100:
            raise PreconditionError("n_steps must be at least 100")
        if self.n_paths < 1000:
            raise PreconditionError("n_paths must be at least 1000")
        if not 0 <= self.seed < 2**64:
            raise PreconditionError("seed must be a 64-bit unsigned integer")
        if not math.isfinite(self.x0):
            raise PreconditionError("x0 must be finite")


@dataclass(frozen=True, eq=False)
class PolicyField:
    """Investment fraction as a function of (x, t), clamped to [1e-6, 1]."""

    fn: Callable[[np.ndarray, float], np.ndarray]
    provenance: Provenance
    tag: str

    def __call__(self, x, t: float) -> np.ndarray:
        th = np.asarray(self.fn(np.asarray(x, dtype=float), t), dtype=float)
        return np.clip(th, THETA_FLOOR, 1.0)

    @classmethod
    def constant(cls, theta: float) -> "PolicyField":
        if not 0 < theta <= 1:
            raise DomainError("theta must lie in (0, 1]")
        return cls(lambda x, t: np.full(np.shape(x), theta), Provenance.CONSTANT, f"constant({theta:g})")


class _GridLookup:
    """Linear interpolation on a sorted, non-uniform grid, held constant outside.

    Matches ``np.interp`` up to rounding but locates cells through a uniform
    bucket table, which is faster for large unsorted queries.
    """

    def __init__(self, xp: np.ndarray, fp: np.ndarray, left: float, right: float):
        self.xp, self.fp, self.left, self.right = xp, fp, left, right
        n_buckets = 4 * len(xp)
        self.h = (xp[-1] - xp[0]) / n_buckets
        edges = xp[0] + self.h * np.arange(n_buckets + 1)
        self.start = np.clip(np.searchsorted(xp, edges, side="right") - 1, 0, len(xp) - 2)

    def __call__(self, q: np.ndarray) -> np.ndarray:
        xp = self.xp
        b = np.clip(((q - xp[0]) / self.h).astype(np.int64), 0, len(self.start) - 1)
        i = self.start[b]
        while True:
            adv = (q >= xp[i + 1]) & (i < len(xp) - 2)
            if not adv.any():
                break
            i = i + adv
        w = (q - xp[i]) / (xp[i + 1] - xp[i])
        out = self.fp[i] + w * (self.fp[i + 1] - self.fp[i])
        out = np.where(q < xp[0], self.left, out)
        return np.where(q > xp[-1], self.right, out)


def policy_from_wave(spec: WaveSpec, profile: WaveProfile, T: float) -> PolicyField:
    """theta*(x, t) = theta_of_phi(v(x + c (T - t))).

    v is the linear interpolant of the profile, held at its limits outside
    the sampled range.
    """
    params, c = spec.params, spec.c
    lookup = _GridLookup(profile.xi, profile.v, spec.v_left, spec.v_right)
    power = 1.0 / (params.m - 1.0) if params.variant is Variant.GENERAL else 1.0

    def fn(x, t):
        v = lookup(x + c * (T - t))
        # theta_of_phi without the per-call validation; v > 0 by construction
        return np.minimum(1.0, 1.0 / v if power == 1.0 else v**-power)

    return PolicyField(fn, Provenance.WAVE_OPTIMAL, "wave_optimal")


@dataclass(frozen=True)
class CARAUtility:
    """u(x) = -exp(-lam x)."""

    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise PreconditionError("lam must be positive")

    def __call__(self, x):
        return -np.exp(-self.lam * np.asarray(x, dtype=float))


def cara_constant_oracle(params: ModelParams, theta: float, lam: float, x0: float, horizon: float) -> float:
    """Closed-form E[-exp(-lam X_T)] for a constant policy (X_T is Gaussian)."""
    mu, sigma = drift_vol(params, theta)
    return -math.exp(-lam * (x0 + mu * horizon) + 0.5 * lam**2 * sigma**2 * horizon)


@dataclass(frozen=True)
class SimResult:
    mean_utility: float
    std_error: float
    n_paths: int
    policy: str
    flagged_paths: int = 0
    mean_terminal: float = float("nan")
    var_terminal: float = float("nan")
    theta_floor: float = THETA_FLOOR
    metadata: dict = field(default_factory=dict)


def _run_block(config: SDEConfig, policy: PolicyField, start: int, stop: int, block: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(block,)))
    dt = (config.T - config.t0) / config.n_steps
    sq = math.sqrt(dt)
    x = np.full(stop - start, float(config.x0))
    for k in range(config.n_steps):
        theta = policy(x, config.t0 + k * dt)
        mu, sigma = _drift_vol(config.params, theta)
        x += mu * dt + sigma * sq * rng.standard_normal(x.size)
    return x


def simulate_terminal(config: SDEConfig, policy: PolicyField, threads: int = 1) -> np.ndarray:
    """Terminal states of all paths, in path order."""
    if threads < 1:
        raise PreconditionError("threads must be positive")
    bounds = [
        (b, s, min(s + BLOCK_SIZE, config.n_paths)) for b, s in enumerate(range(0, config.n_paths, BLOCK_SIZE))
    ]
    out = np.empty(config.n_paths)
    if threads == 1:
        for b, s, e in bounds:
            out[s:e] = _run_block(config, policy, s, e, b)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [(s, e, pool.submit(_run_block, config, policy, s, e, b)) for b, s, e in bounds]
            for s, e, fut in futures:
                out[s:e] = fut.result()
    return out


def simulate(config: SDEConfig, policy: PolicyField, utility, threads: int = 1) -> SimResult:
    """Estimate E[u(X_T)] with its standard error.

    Paths whose terminal state or utility is not finite are excluded and
    counted in ``flagged_paths``.
    """
    xt = simulate_terminal(config, policy, threads)
    u = np.asarray(utility(xt), dtype=float)
    ok = np.isfinite(u) & np.isfinite(xt)
    flagged = int(np.count_nonzero(~ok))
    good = u[ok]
    if good.size < 2:
        raise PreconditionError("fewer than two paths with finite utility")
    return SimResult(
        mean_utility=float(good.mean()),
        std_error=float(good.std(ddof=1) / math.sqrt(good.size)),
        n_paths=config.n_paths,
        policy=policy.tag,
        flagged_paths=flagged,
        mean_terminal=float(xt[ok].mean()),
        var_terminal=float(xt[ok].var(ddof=1)),
        metadata={"seed": config.seed, "n_steps": config.n_steps, "block_size": BLOCK_SIZE},
    )
