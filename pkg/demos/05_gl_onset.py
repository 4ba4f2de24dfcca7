"""Onset of surface superconductivity in the discrete Ginzburg-Landau model.

Bisects on "a descent from the trial state finds negative energy" and
compares with the field where lambda1(kappa H) crosses kappa^2.  Takes
a few minutes.

Run: python3 demos/05_gl_onset.py
"""
import numpy as np

from hc3kit.gl_probe import (default_gl_domain, estimate_hc3_mod, minimize,
                             minimizer_inequality_check, spectral_root)

kappa = 2.0
dom = default_gl_domain()
print(f"disc-cylinder R=2, L=1.6, {dom.lattice.n_cells} cells, kappa = {kappa}")

for H in (2.0, 3.5, 4.0):
    r = minimize(kappa, H, "trial", dom)
    ok = minimizer_inequality_check(r.state).all_pass
    print(f"H = {H}: energy {r.energy.total:+.6f}, max|psi| {np.abs(r.state.psi).max():.3e}, "
          f"{r.iterations} iterations, bounds hold: {ok}")

root = spectral_root(kappa, (3.4, 4.2), dom)
est = estimate_hc3_mod(kappa, (3.4, 4.2), 12, dom)
print(f"\nspectral root    {root:.6f}")
print(f"descent estimate {est.H_estimate:.6f} in [{est.bracket[0]:.6f}, {est.bracket[1]:.6f}]")
print(f"relative gap     {abs(est.H_estimate - root) / root:.1e}")
