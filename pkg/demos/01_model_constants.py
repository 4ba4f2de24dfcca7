"""Universal constants of the half-space and Montgomery model operators.

Run: python3 demos/01_model_constants.py
"""
import math

import numpy as np

from hc3kit.model_operators import compute_model_constants, de_gennes_mu, sigma

c = compute_model_constants()
print(f"theta0  = {c.theta0:.10f}   (minimum of the de Gennes band mu(s), at s0 = {c.s0:.6f})")
print(f"s0^2    = {c.s0 ** 2:.10f}   (equals theta0)")
print(f"delta0  = {c.delta0:.6f}       (half the curvature of mu at s0)")
print(f"nu0_hat = {c.nu0_hat:.6f}       (Montgomery ground energy, xi = {c.xi_min:.5f})")

print("\nmu(s) near its minimum:")
for s in np.linspace(c.s0 - 0.4, c.s0 + 0.4, 5):
    print(f"  s = {s:+.3f}   mu = {de_gennes_mu(s).value:.8f}")

print("\nsigma(theta) rises from theta0 to 1:")
for th in (0.0, math.pi / 8, math.pi / 4, 3 * math.pi / 8, math.pi / 2):
    print(f"  theta = {th:.4f}   sigma = {sigma(th):.6f}")
