"""lambda1(B) of the unit disc-cylinder: angular reduction against the 3D lattice.

Run: python3 demos/04_disc_cylinder.py
"""
import numpy as np

from hc3kit.magnetic_eigensolver import (DiscreteDomain, build_operator,
                                         disc_cylinder_ground_state, localization_report,
                                         lowest_eigenpair)
from hc3kit.model_operators import compute_model_constants

theta0 = compute_model_constants().theta0
print(f"theta0 = {theta0:.6f}")
print("    B     lambda1/B    m    M1 * sqrt(B)")
for B in (100, 200, 400, 600, 800, 1000):
    gs = disc_cylinder_ground_state(1.0, 1.0, B, radial_n=4000)
    rep = localization_report(gs)
    print(f"{B:6d}   {gs.eigenvalue / B:.6f}   {gs.m:4d}   {rep.scaled_moments[1]:.4f}")

B = 20.0
radial = disc_cylinder_ground_state(1.0, 1.0, B, radial_n=32).eigenvalue
# nphi = 32 is coarser than the magnetic length and triggers the operator warning
print("\nB = 20, radial (nr = 32) vs polar lattice (32 x nphi x 8):")
for nphi in (32, 64, 128):
    dom = DiscreteDomain.disc_cylinder(1.0, 1.0, 32, nphi, 8)
    lam = lowest_eigenpair(build_operator(dom, B)).eigenvalue
    print(f"  nphi = {nphi:3d}: {lam:.6f}   gap {abs(lam - radial):.2e}")
print(f"  radial: {radial:.6f}")
