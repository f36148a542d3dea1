"""Compare the wave-optimal investment policy with constant fractions.

The terminal utility is synthesized from the Simple wave profile, so the
wave policy is optimal for it.  All policies share the same Brownian
increments; the z-scores still use the conservative combined standard error
sqrt(se1^2 + se2^2).
"""

from __future__ import annotations

import math

from hjbwaves import (
    ModelParams,
    PolicyField,
    SDEConfig,
    compute_wave_spec,
    integrate_profile,
    policy_from_wave,
    simulate,
    synth_terminal_utility,
)

spec = compute_wave_spec(ModelParams.simple(1.0), 2.0, 0.5)
profile = integrate_profile(spec)
utility = synth_terminal_utility(profile)
config = SDEConfig(spec.params, x0=0.0, T=1.0, n_paths=20_000, n_steps=200, seed=1)

best = simulate(config, policy_from_wave(spec, profile, config.T), utility, threads=4)
print(f"{best.policy:>15s}  E[u] = {best.mean_utility:.5f} +- {best.std_error:.5f}")
for theta in (0.25, 0.5, 0.75, 1.0):
    res = simulate(config, PolicyField.constant(theta), utility, threads=4)
    z = (best.mean_utility - res.mean_utility) / math.hypot(best.std_error, res.std_error)
    print(f"{res.policy:>15s}  E[u] = {res.mean_utility:.5f} +- {res.std_error:.5f}  wave lead z = {z:+.2f}")
