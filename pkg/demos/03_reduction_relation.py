"""Path integrals on the bundle versus path integrals on the orbit space.

Averaging the original diffusion over the starting fibre must reproduce the
reduced diffusion on the gauge surface, weighted by its Girsanov factor.
This demo estimates both sides by Monte Carlo (independent random streams)
and compares them with closed forms: a wrapped Gaussian on the flat torus,
the circle-averaged planar Gaussian (Bessel-I0 kernel) on the punctured plane,
and the first spherical harmonic on the Hopf base.

    python3 demos/03_reduction_relation.py            # 20 000 paths each (about 40 s)
"""
import sys

from bundlereduce import SDEConfig, make_scenario, verify_reduction_relation
from bundlereduce.scenarios.experiments import experiment_for

n_paths = int(sys.argv[1]) if len(sys.argv) > 1 else 20_000

print(f"{'scenario':16s} {'f':10s} {'reduced':>10s} {'averaged':>10s} {'closed form':>11s}"
      f" {'z(rel)':>7s} {'z(red)':>7s} {'z(avg)':>7s}")
for name in ("flat_torus_u1", "polar_plane_u1", "hopf_s3"):
    sc, ex = make_scenario(name), experiment_for(name)
    cfg = SDEConfig(mu2kappa=ex.mu2kappa, dt=1e-2, n_steps=50, n_paths=n_paths, rng_seed=0)
    oracle = ex.oracle_value("reduced_sigma", ex.default_test, ex.start, cfg.mu2kappa * cfg.t_final)
    chk = verify_reduction_relation(sc.bundle, cfg, sc.surface_point(ex.start),
                                    ex.test_functions[ex.default_test], oracle=oracle)
    print(f"{name:16s} {ex.default_test:10s} {chk.reduced.value:10.5f} {chk.group_averaged.value:10.5f}"
          f" {oracle:11.5f} {chk.z:7.2f} {chk.z_oracle('reduced'):7.2f} {chk.z_oracle('group_averaged'):7.2f}")

print("\nz-scores are in units of the Monte Carlo standard error; |z| <= 3 is agreement.")
