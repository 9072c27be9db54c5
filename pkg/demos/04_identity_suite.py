"""Every intermediate identity of the reduction, checked numerically.

The geometric derivation of the reduction runs through a chain of
identities: projector algebra, Killing relations, two expansions whose
leftover terms cancel, three equal forms of the Ito integrand, and the
scalar-curvature decomposition.  On simple scenarios many ingredients are
identically zero, which would make a check vacuous; the helical gauge on
R^3 (gauge surface twisting with height and radius) keeps them all alive.

    python3 demos/04_identity_suite.py
"""
import numpy as np

from bundlereduce import make_scenario
from bundlereduce.identities import run_suite

sc = make_scenario("euclidean_r3_u1", "helical")
Qs = np.asarray(sc.sample(np.random.default_rng(0), 20))
print(f"{sc.name}[{sc.variant}] at {len(Qs)} random on-surface points\n")
print(f"{'identity':26s} {'group':10s} {'worst residual':>15s} {'tolerance':>10s}  verdict")
for r in run_suite(sc.bundle, Qs):
    print(f"{r.name:26s} {r.group:10s} {r.max_residual:15.3e} {r.tolerance:10.0e}  {'ok' if r.passed else 'FAIL'}")

print("\nwith the wrong sign in the decomposition, the Hopf fibration exposes it:")
hopf = make_scenario("hopf_s3")
H = np.asarray(hopf.sample(np.random.default_rng(1), 5))
for r in run_suite(hopf.bundle, H, names=["jtilde_routes", "decomposition"], eps_F=+1.0):
    print(f"  eps_F = +1  {r.name:14s} residual {r.max_residual:.3f} -> {'ok' if r.passed else 'FAIL'}")
