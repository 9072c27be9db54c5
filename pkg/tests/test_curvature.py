"""Curvature quantities against the scenario oracle tables and hand values."""
import re

import numpy as np
import pytest

from bundlereduce import (
    DEFAULT_EPS_F,
    christoffel_coordinate,
    christoffel_horizontal,
    decomposition_report,
    f_squared,
    horizontal_scalar,
    jacobian_integrand,
    make_scenario,
    mean_curvature_base,
    mean_curvature_orbit,
    nonholonomic_christoffels,
    orbit_metric,
    orbit_scalar,
    projectors,
    ricci_horizontal_block,
    ricci_vertical_block,
    scalar_curvature_bundle,
    scalar_curvature_direct,
    second_fundamental_form,
)
from bundlereduce.bundle import BundleSpec
from bundlereduce.curvature import base_scalar_curvature, group_ricci, orbit_scalar_printed
from bundlereduce.tensor_core import SmoothField

from conftest import ALL_VARIANTS

_INDEXED = re.compile(r"^(\w+)\[([\d,]+)\]$")


def _evaluate(sc, quantity, x):
    """Package value of an oracle-table quantity at base point ``x``."""
    b = sc.bundle
    Q = sc.surface_point(x)
    m = _INDEXED.match(quantity)
    name, idx = (m.group(1), tuple(int(i) for i in m.group(2).split(","))) if m else (quantity, ())
    if name == "gamma":
        return orbit_metric(b, Q)[0][0, 0]
    if name == "Gamma":
        return christoffel_coordinate(b, Q)[idx]
    if name == "Ric_G":
        return group_ricci(b.structure_constants, orbit_metric(b, Q)[0])[idx]
    if name == "j_II":
        return mean_curvature_orbit(b, Q)[idx]
    if name == "j_I":
        return mean_curvature_base(b, Q)[idx]
    r = decomposition_report(b, Q, sc.eps_F)
    key = {"R_P": "R_P_direct", "Jtilde": "Jtilde_coords"}.get(name, name)
    return getattr(r, key)


def _table_cases():
    for name, variant in ALL_VARIANTS:
        sc = make_scenario(name, variant)
        for e in sc.oracles:
            yield pytest.param(name, variant, e, id=f"{name}[{variant}]-{e.quantity}@{list(e.point)}")


@pytest.mark.parametrize("name,variant,entry", list(_table_cases()))
def test_oracle_table(name, variant, entry, scenario_cache):
    sc = scenario_cache(name, variant)
    value = _evaluate(sc, entry.quantity, entry.point)
    assert abs(value - entry.value) <= entry.tolerance, entry.provenance


def test_every_entry_has_provenance():
    for name, variant in ALL_VARIANTS:
        for e in make_scenario(name, variant).oracles:
            assert e.provenance.strip()


# -- hand examples ----------------------------------------------------------------


def test_flat_torus_everything_zero():
    sc = make_scenario("flat_torus_u1")
    r = decomposition_report(sc.bundle, [0.3, 0.0])
    for k in r.SCALARS:
        assert abs(getattr(r, k)) <= 1e-8, k
    assert np.allclose(christoffel_coordinate(sc.bundle, [0.3, 0.0]), 0.0)
    assert np.allclose(christoffel_horizontal(sc.bundle, [0.3, 0.0]), 0.0)
    assert ricci_horizontal_block(sc.bundle, [0.3, 0.0]) == pytest.approx(0.0, abs=1e-9)
    assert ricci_vertical_block(sc.bundle, [0.3, 0.0]) == pytest.approx(0.0, abs=1e-9)


def test_polar_christoffels():
    b = make_scenario("polar_plane_u1").bundle
    Q = np.array([2.0, 0.0])
    G = christoffel_coordinate(b, Q)
    assert G[0, 1, 1] == pytest.approx(-2.0, abs=1e-6)  # Gamma^r_{phi phi} = -r
    assert G[1, 0, 1] == pytest.approx(0.5, abs=1e-6)  # Gamma^phi_{r phi} = 1/r
    assert np.allclose(christoffel_horizontal(b, Q), 0.0, atol=1e-9)
    table = nonholonomic_christoffels(b, Q)
    assert table.hor_grp_grp[0, 0, 0] == pytest.approx(-2.0, abs=1e-6)
    assert np.allclose(table.grp_grp_grp, 0.0)


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_polar_jtilde_closed_form(r):
    b = make_scenario("polar_plane_u1").bundle
    Q = np.array([r, 0.0])
    for route in ("coords", "geometric"):
        assert jacobian_integrand(b, Q, route) == pytest.approx(-1.0 / r**2, rel=1e-6)
    _, jsq = second_fundamental_form(b, Q)
    assert jsq == pytest.approx(1.0 / r**2, rel=1e-6)
    assert scalar_curvature_bundle(b, Q) == pytest.approx(0.0, abs=1e-6)
    assert np.allclose(mean_curvature_base(b, Q), 0.0, atol=1e-8)


def test_jacobian_route_validation():
    b = make_scenario("polar_plane_u1").bundle
    with pytest.raises(ValueError):
        jacobian_integrand(b, [1.0, 0.0], route="bogus")


def test_hopf_values():
    sc = make_scenario("hopf_s3")
    Q = sc.surface_point(sc.points[0])
    assert scalar_curvature_direct(sc.bundle, Q) == pytest.approx(6.0, abs=1e-5)
    assert scalar_curvature_bundle(sc.bundle, Q) == pytest.approx(6.0, abs=1e-5)
    assert horizontal_scalar(sc.bundle, Q) == pytest.approx(8.0, abs=1e-5)
    assert f_squared(sc.bundle, Q) == pytest.approx(8.0, abs=1e-6)
    assert np.allclose(second_fundamental_form(sc.bundle, Q)[0], 0.0, atol=1e-8)
    assert np.allclose(mean_curvature_orbit(sc.bundle, Q), 0.0, atol=1e-8)


def test_hopf_base_cross_check():
    """The base S^2(1/2), reached through the surface parametrisation, has scalar curvature 8."""
    sc = make_scenario("hopf_s3")
    value = base_scalar_curvature(sc.bundle, sc.surface_param, np.asarray(sc.points[0]))
    assert value == pytest.approx(8.0, abs=1e-5)


def test_hopf_eps_sign_is_unique():
    sc = make_scenario("hopf_s3")
    Q = sc.surface_point(sc.points[0])
    res = {eps: abs(decomposition_report(sc.bundle, Q, eps).residual_decomposition) for eps in (1.0, -1.0)}
    assert res[DEFAULT_EPS_F] <= 1e-5
    assert res[-DEFAULT_EPS_F] > 1.0
    assert sc.eps_F == DEFAULT_EPS_F


def test_horizontal_scalar_is_gauge_independent():
    """Contractions of the horizontal connection do not depend on the gauge surface."""
    a, b = make_scenario("hopf_s3", "fiber"), make_scenario("hopf_s3", "tilted")
    for x in a.points:
        assert horizontal_scalar(a.bundle, a.surface_point(x)) == pytest.approx(
            horizontal_scalar(b.bundle, b.surface_point(x)), abs=1e-5)


def test_su2_orbit_scalar():
    sc = make_scenario("su2_self")
    Q = sc.surface_point(np.zeros(0))
    c = sc.bundle.structure_constants
    # brute-force contraction over every index combination, standard sign
    brute = 0.25 * sum(c[k, i, j] ** 2 for i in range(3) for j in range(3) for k in range(3))
    assert orbit_scalar(sc.bundle, Q) == pytest.approx(brute, abs=1e-10)
    assert np.trace(group_ricci(c, np.eye(3))) == pytest.approx(brute, abs=1e-12)
    assert ricci_horizontal_block(sc.bundle, Q) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("lam", [4.0, 0.5])
def test_orbit_scalar_homogeneity(lam):
    c = make_scenario("su2_self").bundle.structure_constants
    g = np.diag([1.0, 2.0, 0.7])
    assert orbit_scalar_printed(c, lam * g) == pytest.approx(orbit_scalar_printed(c, g) / lam, rel=1e-12)


def test_abelian_orbit_scalar_zero():
    b = make_scenario("polar_plane_u1").bundle
    assert orbit_scalar(b, [1.3, 0.0]) == 0.0


def test_metric_scaling_homogeneity():
    """G -> 4 G divides every scalar curvature and Jtilde by 4."""
    sc = make_scenario("polar_plane_u1", "spiral")
    b = sc.bundle
    scaled = BundleSpec(n_p=b.n_p, n_g=b.n_g, metric=SmoothField(lambda Q: 4.0 * b.metric(Q), 2, (2, 2)),
                        killing=b.killing, gauge=b.gauge, structure_constants=b.structure_constants,
                        group_chart=b.group_chart, domain=b.domain)
    Q = sc.surface_point([1.7])
    assert jacobian_integrand(scaled, Q) == pytest.approx(jacobian_integrand(b, Q) / 4.0, rel=1e-6)


def test_batched_report_quantities_match_pointwise():
    sc = make_scenario("euclidean_r3_u1", "helical")
    Qs = np.stack([sc.surface_point(x) for x in sc.points])
    batched = jacobian_integrand(sc.bundle, Qs)
    single = [jacobian_integrand(sc.bundle, q) for q in Qs]
    assert np.allclose(batched, single, atol=1e-12)
    assert projectors(sc.bundle, Qs).N.shape == (len(Qs), 3, 3)
