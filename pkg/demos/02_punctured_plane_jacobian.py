"""The reduction Jacobian on the punctured plane, and the Ito identity behind it.

Rotations act on the plane without the origin; the orbit space is the ray
r > 0.  Everything is flat, yet reducing the path integral produces an extra
potential-like integrand Jtilde = -1/r^2, coming purely from the orbit
volume gamma = r^2 changing along the base.

The Girsanov weight of the reduced diffusion can be written two ways: as a
stochastic integral of d ln(gamma), or (by Ito's formula) as a boundary term
plus a time integral of Jtilde.  On shared Brownian paths the two forms
converge to each other as dt -> 0.

    python3 demos/02_punctured_plane_jacobian.py
"""
from bundlereduce import SDEConfig, decomposition_report, make_scenario
from bundlereduce.stochastic import ito_identity_gaps

sc = make_scenario("polar_plane_u1")
print("r      Jtilde(coords)   Jtilde(geometric)   -1/r^2    |j|^2")
for r in (0.5, 1.0, 2.0, 3.0):
    Q = sc.surface_point([r])
    rep = decomposition_report(sc.bundle, Q)
    print(f"{r:<5}  {rep.Jtilde_coords: .10f}    {rep.Jtilde_geom: .10f}      {-1 / r**2: .6f}  {rep.jsq:.6f}")

print("\nR_P, HR, R_G and F all vanish here, so the decomposition reads 0 = -(Jtilde + |j|^2).")

cfg = SDEConfig(dt=6.25e-4, n_steps=800, n_paths=100, rng_seed=0)
print("\npathwise gap |stochastic - Ito| of the log Girsanov weight, 100 shared paths from r = 2, t = 0.5:")
rows = ito_identity_gaps(sc.bundle, cfg, sc.surface_point([2.0]), factors=(16, 4, 1))
prev = None
for dt, gap, alive in rows:
    ratio = "" if prev is None else f"   (x{prev / gap:.2f} smaller)"
    print(f"  dt = {dt:<9g} median gap {gap:.5f}  [{alive} paths]{ratio}")
    prev = gap
print("\nthe gap shrinks roughly like sqrt(dt): both forms converge to the same weight.")
print("note -Jtilde/8 = 1/(8 r^2) is the critical Hardy potential: exp(int of it) has heavy tails,")
print("so estimators use the Girsanov form, which is bounded near the puncture.")
