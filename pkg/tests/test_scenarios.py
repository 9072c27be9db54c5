"""Scenario construction, oracle tables and Monte Carlo set-ups."""
import doctest
import json

import numpy as np
import pytest

import bundlereduce.scenarios as scenarios
from bundlereduce.scenarios import (
    REFERENCE_SCENARIOS,
    SCENARIO_NAMES,
    UnknownScenarioError,
    load_oracles,
    make_scenario,
    parse_oracles,
)
from bundlereduce.scenarios.experiments import experiment_for

from conftest import ALL_VARIANTS, on_surface


def test_module_doctest():
    assert doctest.testmod(scenarios).failed == 0


def test_reference_scenarios_present():
    assert set(REFERENCE_SCENARIOS) <= set(SCENARIO_NAMES)


def test_unknown_name_lists_valid_names():
    with pytest.raises(UnknownScenarioError) as exc:
        make_scenario("klein_bottle")
    assert all(n in str(exc.value) for n in SCENARIO_NAMES)
    with pytest.raises(UnknownScenarioError):
        make_scenario("polar_plane_u1", "twisted")


@pytest.mark.parametrize("name,variant", ALL_VARIANTS)
def test_samples_lie_on_surface(name, variant):
    sc = make_scenario(name, variant)
    Qs = on_surface(sc, 10)
    assert np.max(np.abs(sc.bundle.gauge(Qs))) <= 1e-10
    assert np.all(sc.bundle.in_chart(Qs))
    for x in sc.points:
        assert np.max(np.abs(sc.bundle.gauge(sc.surface_point(x)))) <= 1e-10


def test_documented_examples():
    from bundlereduce import decomposition_report, jacobian_integrand, scalar_curvature_direct

    torus = make_scenario("flat_torus_u1")
    r = decomposition_report(torus.bundle, [0.3, 0.0])
    assert max(abs(getattr(r, k)) for k in r.SCALARS) <= 1e-8
    polar = make_scenario("polar_plane_u1")
    assert jacobian_integrand(polar.bundle, polar.surface_point([2.0])) == pytest.approx(-0.25, abs=1e-6)
    hopf = make_scenario("hopf_s3")
    for Q in on_surface(hopf, 4):
        assert scalar_curvature_direct(hopf.bundle, Q) == pytest.approx(6.0, abs=1e-5)


def test_hopf_sign_recorded():
    assert make_scenario("hopf_s3").eps_F == -1.0
    assert json.loads((scenarios.resources.files(scenarios.__name__) / "data" / "hopf_s3.json").read_text())[
        "eps_F"] == -1.0


def test_parse_oracles_validation():
    good = {"variants": {"v": {"entries": [{"quantity": "R_P", "point": [1.0], "value": 0.0, "tolerance": 1e-6,
                                            "provenance": "hand"}], "points": [[1.0]]}}}
    entries, points, eps = parse_oracles(good, "v")
    assert entries[0].quantity == "R_P" and points == ((1.0,),) and eps == -1.0
    with pytest.raises(ValueError):
        parse_oracles({"nope": 1}, "v")
    with pytest.raises(ValueError):
        parse_oracles(good, "w")
    bad = json.loads(json.dumps(good))
    bad["variants"]["v"]["entries"][0]["provenance"] = ""
    with pytest.raises(ValueError):
        parse_oracles(bad, "v")


def test_oracle_lookup():
    sc = make_scenario("polar_plane_u1")
    assert sc.oracle_value("Jtilde", [1.0]) == pytest.approx(-1.0)
    assert sc.oracle("Jtilde", [1.2345]) is None
    assert "Jtilde" in sc.quantities()
    entries, _, _ = load_oracles("polar_plane_u1", "spiral")
    assert entries


@pytest.mark.parametrize("name", SCENARIO_NAMES)
def test_experiment_setups(name):
    ex = experiment_for(name)
    sc = make_scenario(name)
    assert ex.default_test in ex.test_functions
    Q = sc.surface_point(ex.start) if ex.start else sc.surface_point(np.zeros(0))
    for f in ex.test_functions.values():
        assert np.isfinite(f(Q[None])).all()
    one = ex.oracle_value("reduced_sigma", "one", ex.start, 0.3) if "one" in ex.test_functions else 1.0
    assert one == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(KeyError):
        experiment_for("nowhere")
