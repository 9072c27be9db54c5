"""Ready-made bundles with ground-truth oracle tables.

>>> sc = make_scenario("polar_plane_u1")
>>> sc.oracle_value("Jtilde", [2.0])
-0.25
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional

import numpy as np

from ..bundle import BundleSpec
from ..curvature import DEFAULT_EPS_F
from . import library

#: scenario name -> (builder, allowed variants, default variant)
_BUILDERS = {
    "flat_torus_u1": (library.flat_torus_u1, ("straight", "tilted", "scaled"), "straight"),
    "polar_plane_u1": (library.polar_plane_u1, ("radial", "spiral"), "radial"),
    "hopf_s3": (library.hopf_s3, ("fiber", "tilted"), "fiber"),
    "su2_self": (library.su2_self, ("exp",), "exp"),
    "sphere_s2_u1": (library.sphere_s2_u1, ("polar",), "polar"),
    "euclidean_r3_u1": (library.euclidean_r3_u1, ("cartesian", "helical"), "cartesian"),
}
#: the four reference scenarios; the others are extra warped examples
REFERENCE_SCENARIOS = ("flat_torus_u1", "polar_plane_u1", "hopf_s3", "su2_self")
SCENARIO_NAMES = tuple(_BUILDERS)

_ORACLE_KEYS = ("quantity", "point", "value", "tolerance", "provenance")


class UnknownScenarioError(KeyError):
    def __str__(self):
        return self.args[0]


@dataclass(frozen=True)
class OracleEntry:
    """One ground-truth value: ``quantity`` at the base point ``point``."""

    quantity: str
    point: tuple
    value: float
    tolerance: float
    provenance: str


@dataclass(frozen=True)
class Scenario:
    """A bundle plus everything needed to check it.

    ``surface_param`` maps invariant base coordinates ``x`` to surface points
    ``Q*(x)``; ``sample(rng, n)`` draws on-surface points away from chart
    edges; ``points`` are the recommended base points of the oracle table.
    """

    name: str
    variant: str
    bundle: BundleSpec
    surface_param: Callable
    sample: Callable
    oracles: tuple
    points: tuple
    eps_F: float = DEFAULT_EPS_F
    notes: str = ""

    def surface_point(self, x):
        return self.surface_param(np.asarray(x, dtype=float))

    def oracle(self, quantity: str, x) -> Optional[OracleEntry]:
        """Oracle entry for ``quantity`` at base point ``x`` (None if absent)."""
        x = tuple(float(v) for v in np.atleast_1d(x))
        for e in self.oracles:
            if e.quantity == quantity and len(e.point) == len(x) and np.allclose(e.point, x, atol=1e-12):
                return e
        return None

    def oracle_value(self, quantity: str, x):
        e = self.oracle(quantity, x)
        return None if e is None else e.value

    def quantities(self):
        return sorted({e.quantity for e in self.oracles})


def load_oracles(name: str, variant: str):
    """Read the JSON oracle table of a scenario variant."""
    text = resources.files(__package__).joinpath("data", f"{name}.json").read_text()
    return parse_oracles(json.loads(text), variant, source=f"{name}.json")


def parse_oracles(doc, variant: str, source: str = "<table>"):
    """Validate a decoded oracle document and return ``(entries, points, eps_F)``."""
    if not isinstance(doc, dict) or "variants" not in doc:
        raise ValueError(f"{source}: expected an object with a 'variants' member")
    table = doc["variants"].get(variant)
    if table is None:
        raise ValueError(f"{source}: no oracle table for variant {variant!r}")
    entries = []
    for i, row in enumerate(table.get("entries", [])):
        if set(row) != set(_ORACLE_KEYS):
            raise ValueError(f"{source}: entry {i} must have exactly the keys {_ORACLE_KEYS}")
        if not row["provenance"]:
            raise ValueError(f"{source}: entry {i} has no provenance")
        entries.append(OracleEntry(str(row["quantity"]), tuple(float(v) for v in row["point"]),
                                   float(row["value"]), float(row["tolerance"]), str(row["provenance"])))
    points = tuple(tuple(float(v) for v in p) for p in table.get("points", []))
    return tuple(entries), points, float(doc.get("eps_F", DEFAULT_EPS_F))


def make_scenario(name: str, variant: Optional[str] = None) -> Scenario:
    """Build a named scenario; ``variant`` selects the gauge (or chart) choice."""
    if name not in _BUILDERS:
        raise UnknownScenarioError(f"unknown scenario {name!r}; valid names: {', '.join(SCENARIO_NAMES)}")
    builder, variants, default = _BUILDERS[name]
    variant = default if variant is None else variant
    if variant not in variants:
        raise UnknownScenarioError(f"unknown variant {variant!r} of {name}; valid: {', '.join(variants)}")
    bundle, surface, sample = builder(variant) if len(variants) > 1 else builder()
    entries, points, eps_F = load_oracles(name, variant)
    return Scenario(name, variant, bundle, surface, sample, entries, points, eps_F,
                    notes=(builder.__doc__ or "").strip())


__all__ = ["Scenario", "OracleEntry", "make_scenario", "load_oracles", "parse_oracles",
           "SCENARIO_NAMES", "REFERENCE_SCENARIOS", "UnknownScenarioError"]
