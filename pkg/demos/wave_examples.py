"""Construct the two worked traveling waves and inspect their structure.

Run with ``python3 demos/wave_examples.py``.  Prints the far-field data,
the roots of G with the sign of G' at each, and a few profile samples.
"""

from __future__ import annotations

import numpy as np

from hjbwaves import ModelParams, compute_wave_spec, find_phi_roots, integrate_profile, residual_constant


def describe(name: str, params: ModelParams, v_left: float, v_right: float) -> None:
    spec = compute_wave_spec(params, v_left, v_right)
    profile = integrate_profile(spec)
    print(f"== {name}")
    print(f"   speed c = {spec.c:.6g}, K0 = {spec.K0:.6g}, {spec.direction.value} profile")
    lo, hi = sorted((v_left, v_right))
    roots = find_phi_roots(params, spec.c, spec.K0, (lo / 10, 10 * hi))
    print("   roots of G:", ", ".join(f"{r.v:.6g} (G' {'+' if r.g_prime_sign > 0 else '-'})" for r in roots))
    print(f"   transition width (10%-90%) = {profile.transition_width():.3f}")
    print(f"   max |A(v)' - (K0 + c v - B(v))| = {residual_constant(profile, spec):.2e}")
    for xi in (-20.0, -5.0, 0.0, 5.0, 20.0):
        v = float(profile.v_linear(xi))
        print(f"   xi = {xi:6.1f}  v = {v:.6f}")


describe("Simple model, omega = 1", ModelParams.simple(1.0), 2.0, 0.5)
describe("General model, m = 3/2", ModelParams.general(1.0, 1.5), 1.0, 10.0 / 3.0)

# With c = -0.08 the same model has three roots; the wave joins the two outer
# ones that straddle 1 and the extra root below 1 is left alone.
params = ModelParams.general(1.0, 1.5)
roots = find_phi_roots(params, -0.08, 0.1, (0.1, 20.0))
print("== General model, c = -0.08, K0 = 0.1: roots", np.round([r.v for r in roots], 4))
