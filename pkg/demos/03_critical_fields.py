"""Local critical fields from three lambda1 models.

The lower and upper local fields coincide when lambda1 is increasing; a
wiggling model separates them.

Run: python3 demos/03_critical_fields.py
"""
from hc3kit.asymptotics import (hc3_two_term, linear_model, local_fields, two_term_model,
                                wiggle_model)
from hc3kit.model_operators import compute_model_constants

c = compute_model_constants()
g = 2 ** (-2 / 3) * c.nu0_hat * c.delta0 ** (2 / 3)   # unit sphere, any direction

print("kappa    two-term root     closed form     kappa/theta0")
for kappa in (10, 100, 1000):
    r = local_fields(two_term_model(c, g), kappa, (0.5 * kappa, 2 * kappa / c.theta0))
    print(f"{kappa:<8} {r.underline_loc:<17.8f} {hc3_two_term(kappa, c, g):<15.8f} "
          f"{kappa / c.theta0:.8f}")

r = local_fields(linear_model(c.theta0), 10.0, (1.0, 40.0))
print(f"\nlinear model, kappa = 10: {r.underline_loc:.12f} = {r.overline_loc:.12f}")

r = local_fields(wiggle_model(c.theta0), 8.0, (11.0, 16.0))
print(f"wiggle model, kappa = 8: {len(r.crossing_list)} crossings, "
      f"underline {r.underline_loc:.6f} < overline {r.overline_loc:.6f}")
