"""Diffusions, weights and pairings."""
import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bundlereduce import (
    SDEConfig,
    SmoothField,
    apply_generator,
    estimate_green,
    girsanov_log_factor,
    make_scenario,
    simulate_original,
    simulate_reduced,
    verify_reduction_relation,
)
from bundlereduce.errors import ConfigError, UnsupportedOperationError
from bundlereduce.scenarios.experiments import experiment_for
from bundlereduce.stochastic import (
    coarsen_increments,
    radial_heat_kernel_pairing,
    reduced_coefficients,
    wiener_increments,
    wrapped_gaussian_pairing,
)

ONE = lambda Q: np.ones(np.asarray(Q).shape[:-1])


@pytest.fixture(scope="module")
def polar():
    return make_scenario("polar_plane_u1")


@pytest.fixture(scope="module")
def torus():
    return make_scenario("flat_torus_u1")


# -- noise -----------------------------------------------------------------------


def test_increment_variance():
    cfg = SDEConfig(dt=1e-2, n_steps=50, n_paths=2000)
    dW = wiener_increments(cfg, 2)
    assert dW.size >= 1e5
    assert np.var(dW) == pytest.approx(cfg.dt, rel=0.01)
    assert abs(np.mean(dW)) < 4 * np.sqrt(cfg.dt / dW.size)


@settings(max_examples=20)
@given(st.integers(0, 3000), st.integers(1, 500))
def test_increments_are_block_addressable(start, length):
    """Any slice of paths is reproduced exactly, independent of batching."""
    cfg = SDEConfig(n_steps=3, n_paths=4000, block_size=256)
    stop = min(cfg.n_paths, start + length)
    full = wiener_increments(cfg, 2)
    assert np.array_equal(wiener_increments(cfg, 2, start, stop), full[start:stop])


def test_streams_are_independent():
    cfg = SDEConfig(n_steps=5, n_paths=100)
    assert not np.array_equal(wiener_increments(cfg, 1, stream=0), wiener_increments(cfg, 1, stream=1))


def test_coarsening_preserves_sums():
    dW = np.random.default_rng(0).normal(size=(3, 8, 2))
    c = coarsen_increments(dW, 4)
    assert c.shape == (3, 2, 2) and np.allclose(c.sum(axis=1), dW.sum(axis=1))
    with pytest.raises(ValueError):
        coarsen_increments(dW, 3)


@pytest.mark.parametrize("bad", [dict(dt=0.0), dict(n_paths=0), dict(mu2kappa=-1.0), dict(rng_seed=-1),
                                 dict(n_steps=1.5)])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        SDEConfig(**bad)


# -- paths -----------------------------------------------------------------------


def test_zero_noise_flat_paths_are_constant(torus):
    cfg = SDEConfig(n_steps=20, n_paths=3)
    p = simulate_original(torus.bundle, cfg, [0.3, 0.1], noise=False)
    assert np.allclose(p.states, [0.3, 0.1])
    r = simulate_reduced(torus.bundle, cfg, [0.3, 0.0], noise=False)
    assert np.allclose(r.states, [0.3, 0.0])
    assert np.allclose(girsanov_log_factor(r, "stochastic"), 0.0)
    assert np.allclose(girsanov_log_factor(r, "ito"), 0.0)


@pytest.mark.parametrize("name,variant", [("polar_plane_u1", "spiral"), ("hopf_s3", "tilted"),
                                          ("euclidean_r3_u1", "helical")])
def test_reduced_paths_stay_on_surface(name, variant):
    sc = make_scenario(name, variant)
    ex = experiment_for(name)
    cfg = SDEConfig(dt=1e-2, n_steps=30, n_paths=200)
    p = simulate_reduced(sc.bundle, cfg, sc.surface_point(ex.start))
    chi = np.abs(sc.bundle.gauge(p.states[p.alive].reshape(-1, sc.bundle.n_p)))
    assert np.max(chi) <= 1e-8 and p.max_chi <= 1e-8


def test_deterministic_replay(polar):
    cfg = SDEConfig(dt=1e-2, n_steps=20, n_paths=300, rng_seed=11)
    a = simulate_reduced(polar.bundle, cfg, [2.0, 0.0])
    b = simulate_reduced(polar.bundle, cfg, [2.0, 0.0])
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(girsanov_log_factor(a), girsanov_log_factor(b))
    c = simulate_reduced(polar.bundle, dataclasses.replace(cfg, rng_seed=12), [2.0, 0.0])
    assert not np.array_equal(a.states, c.states)


def test_girsanov_form_validation(polar, torus):
    cfg = SDEConfig(n_steps=2, n_paths=2)
    with pytest.raises(UnsupportedOperationError):
        girsanov_log_factor(simulate_original(torus.bundle, cfg, [0.0, 0.0]))
    r = simulate_reduced(polar.bundle, cfg, [1.0, 0.0], with_jtilde=False)
    with pytest.raises(ValueError):
        girsanov_log_factor(r, "ito")
    with pytest.raises(ValueError):
        girsanov_log_factor(r, "other")


def test_truncation_is_reported(polar):
    """Paths started next to the puncture leave the chart and are flagged, not dropped silently."""
    cfg = SDEConfig(dt=5e-2, n_steps=20, n_paths=400)
    p = simulate_original(polar.bundle, cfg, [0.05, 0.0])
    assert p.n_truncated > 0
    assert np.all(p.exit_step[~p.alive] >= 0) and np.all(p.exit_step[p.alive] == -1)


# -- drifts ------------------------------------------------------------------------


@given(st.floats(0.3, 5.0))
def test_polar_projected_drift_is_bessel(r):
    """The projected reduced diffusion on the punctured plane is a 2D Bessel process: drift 1/(2r)."""
    b = make_scenario("polar_plane_u1").bundle
    c = reduced_coefficients(b, np.array([[r, 0.0]]))
    drift = c.drift_sigma(1.0) + c.j_II()
    assert drift[0, 0] == pytest.approx(0.5 / r, rel=1e-6)
    assert drift[0, 1] == pytest.approx(0.0, abs=1e-9)


# -- pairings ----------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["original", "reduced_sigma", "reduced_M"])
def test_unit_test_function_normalisation(torus, kind):
    cfg = SDEConfig(dt=1e-2, n_steps=20, n_paths=2000)
    g = estimate_green(torus.bundle, cfg, kind, [0.3, 0.0], ONE)
    assert g.value == pytest.approx(1.0, abs=1e-12)
    assert g.n_truncated == 0 and g.n_excluded == 0


def test_wrapped_gaussian_against_torus_pairing(torus):
    ex = experiment_for("flat_torus_u1")
    cfg = SDEConfig(dt=1e-2, n_steps=50, n_paths=20000, rng_seed=5)
    g = estimate_green(torus.bundle, cfg, "reduced_sigma", torus.surface_point(ex.start), ex.test_functions["cos"])
    oracle = ex.oracle_value("reduced_sigma", "cos", ex.start, cfg.t_final)
    assert oracle == pytest.approx(np.cos(1.0) * np.exp(-0.25), abs=1e-12)
    assert abs(g.z_score(oracle)) <= 4


def test_closed_form_pairings():
    assert wrapped_gaussian_pairing(np.cos, 0.3, 0.7) == pytest.approx(np.cos(0.3) * np.exp(-0.35), abs=1e-12)
    assert wrapped_gaussian_pairing(np.ones_like, 0.3, 50.0) == pytest.approx(1.0, abs=1e-10)
    # planar radius: E[r^2] = r0^2 + 2 s
    assert radial_heat_kernel_pairing(lambda r: r * r, 1.5, 0.4) == pytest.approx(1.5**2 + 0.8, rel=1e-9)
    assert radial_heat_kernel_pairing(np.ones_like, 1.5, 0.4) == pytest.approx(1.0, rel=1e-10)


def test_generator_examples(torus, polar):
    one = SmoothField(ONE, 2)
    assert apply_generator(torus.bundle, one, [0.3, 0.0]) == pytest.approx(0.0, abs=1e-12)
    x2 = SmoothField(lambda q: q[..., 0] ** 2, 2)
    assert apply_generator(torus.bundle, x2, [0.3, 0.0], cfg=SDEConfig(mu2kappa=1.7)) == pytest.approx(1.7,
                                                                                                          abs=1e-6)
    # planar radius squared: (1/2)(d_rr + d_r / r) r^2 = 2
    assert apply_generator(polar.bundle, x2, [1.3, 0.0]) == pytest.approx(2.0, abs=1e-6)
    # op3 drops the orbit mean-curvature drift (d_r r^2 / (2 r) = 1) and adds -Jtilde/8 psi = psi / (8 r^2)
    assert apply_generator(polar.bundle, x2, [2.0, 0.0], "op3") == pytest.approx(1.0 + 0.125, abs=1e-6)
    with pytest.raises(ValueError):
        apply_generator(polar.bundle, x2, [2.0, 0.0], "op9")


def test_reduction_relation_hopf_coarse():
    sc = make_scenario("hopf_s3")
    ex = experiment_for("hopf_s3")
    cfg = SDEConfig(mu2kappa=ex.mu2kappa, dt=1e-2, n_steps=50, n_paths=10_000, rng_seed=2)
    oracle = ex.oracle_value("reduced_sigma", "cos_theta", ex.start, cfg.mu2kappa * cfg.t_final)
    chk = verify_reduction_relation(sc.bundle, cfg, sc.surface_point(ex.start), ex.test_functions["cos_theta"],
                                    n_nodes=8, oracle=oracle)
    assert abs(chk.z) <= 3 and abs(chk.z_oracle()) <= 3


def test_reduction_relation_needs_action(torus):
    bare = dataclasses.replace(torus.bundle, group_chart=None)
    with pytest.raises(UnsupportedOperationError):
        verify_reduction_relation(bare, SDEConfig(n_paths=10), [0.3, 0.0], ONE)
