"""Monte Carlo set-ups for the reference scenarios.

Each :class:`Experiment` names a default starting base point, a few
group-invariant test functions ``f(Q)`` and, where one exists, the
closed-form value of the weak pairing ``E[f(xi_t)]`` for a diffusion with
generator ``mu^2 kappa / 2`` times the Laplace-Beltrami operator:

* flat torus: the base coordinate is a Brownian motion on a circle
  (wrapped Gaussian);
* punctured plane and R^3: the circle average of the planar Gaussian kernel
  (Bessel-I0 kernel), times an independent Gaussian in ``z`` for R^3;
* Hopf fibration and round S^2: ``cos(theta)`` is a first spherical
  harmonic of the base, so ``E[cos theta_t] = cos(theta_0) exp(-lambda_1 t mu^2 kappa / 2)``
  with ``lambda_1 = 8`` on ``S^2(1/2)`` and ``2`` on the unit ``S^2``.

On the two spheres the default diffusion scale ``mu2kappa`` is reduced so
that paths stay several standard deviations away from the poles, where the
angular charts end.

The ``reduced_M`` pairing carries the extra factor ``(det gamma_0 /
det gamma_t)^{1/4}``; for the punctured plane (``gamma = r^2``) that is
``(r_0/r)^{1/2}`` and the oracle uses the correspondingly weighted kernel.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..stochastic import radial_heat_kernel_pairing, wrapped_gaussian_pairing


def _named(name, fn):
    fn.__name__ = name
    return fn


def _rho(Q):
    Q = np.asarray(Q, dtype=float)
    return np.hypot(Q[..., 0], Q[..., 1])


@dataclass(frozen=True)
class Experiment:
    """Default Monte Carlo configuration of one scenario."""

    start: tuple
    test_functions: dict
    default_test: str
    oracle: Optional[Callable] = None  # oracle(kind, test, start, variance) -> float | None
    notes: str = ""
    mu2kappa: float = 1.0  # default diffusion scale: keeps paths clear of chart edges
    extra: dict = field(default_factory=dict)

    def oracle_value(self, kind: str, test: str, start, variance: float):
        if self.oracle is None:
            return None
        return self.oracle(kind, test, tuple(float(v) for v in np.atleast_1d(start)), float(variance))


def _torus():
    tests = {
        "cos": _named("cos", lambda Q: np.cos(np.asarray(Q)[..., 0])),
        "cos2": _named("cos2", lambda Q: np.cos(2 * np.asarray(Q)[..., 0]) + 0.5 * np.sin(np.asarray(Q)[..., 0])),
        "one": _named("one", lambda Q: np.ones(np.asarray(Q).shape[:-1])),
    }
    scalar = {"cos": np.cos, "cos2": lambda x: np.cos(2 * x) + 0.5 * np.sin(x), "one": np.ones_like}

    def oracle(kind, test, x0, var):
        # gamma is constant: every normalisation has the same law for the base coordinate
        return wrapped_gaussian_pairing(scalar[test], x0[0], var)

    return Experiment((1.0,), tests, "cos", oracle, "base coordinate is a Brownian motion on the circle")


def _polar():
    g = lambda r: np.exp(-((r - 2.0) ** 2))
    tests = {
        "gauss": _named("gauss", lambda Q: g(np.abs(np.asarray(Q)[..., 0]))),
        "decay": _named("decay", lambda Q: 1.0 / (1.0 + np.asarray(Q)[..., 0] ** 2)),
        "one": _named("one", lambda Q: np.ones(np.asarray(Q).shape[:-1])),
    }
    radial = {"gauss": g, "decay": lambda r: 1.0 / (1.0 + r * r), "one": np.ones_like}

    def oracle(kind, test, x0, var):
        power = 0.5 if kind == "reduced_M" else 0.0
        return radial_heat_kernel_pairing(radial[test], x0[0], var, power)

    return Experiment((2.0,), tests, "gauss", oracle, "radius of a planar Brownian motion (Bessel-I0 kernel)")


def _hopf():
    tests = {
        "cos_theta": _named("cos_theta", lambda Q: np.cos(np.asarray(Q)[..., 0])),
        "one": _named("one", lambda Q: np.ones(np.asarray(Q).shape[:-1])),
    }

    def oracle(kind, test, x0, var):
        return 1.0 if test == "one" else float(np.cos(x0[0]) * np.exp(-4.0 * var))

    # theta has variance ~ 4 mu^2 kappa t on S^2(1/2): a small scale keeps paths off the chart poles
    return Experiment((1.2, 0.5), tests, "cos_theta", oracle, "first eigenfunction on S^2(1/2): eigenvalue 8",
                      mu2kappa=0.05)


def _sphere():
    tests = {
        "cos_theta": _named("cos_theta", lambda Q: np.cos(np.asarray(Q)[..., 0])),
        "one": _named("one", lambda Q: np.ones(np.asarray(Q).shape[:-1])),
    }

    def oracle(kind, test, x0, var):
        if kind == "reduced_M":
            return None  # gamma = sin^2 theta: no closed form for the rescaled pairing
        return 1.0 if test == "one" else float(np.cos(x0[0]) * np.exp(-var))

    return Experiment((1.2,), tests, "cos_theta", oracle, "first eigenfunction on the unit S^2: eigenvalue 2",
                      mu2kappa=0.2)


def _r3():
    g = lambda r: np.exp(-((r - 1.5) ** 2))
    tests = {
        "gauss_cos": _named("gauss_cos", lambda Q: g(_rho(Q)) * np.cos(np.asarray(Q)[..., 2])),
        "one": _named("one", lambda Q: np.ones(np.asarray(Q).shape[:-1])),
    }

    def oracle(kind, test, x0, var):
        power = 0.5 if kind == "reduced_M" else 0.0
        if test == "one":
            return radial_heat_kernel_pairing(np.ones_like, x0[0], var, power)
        return radial_heat_kernel_pairing(g, x0[0], var, power) * np.exp(-var / 2) * np.cos(x0[1])

    return Experiment((1.5, 0.3), tests, "gauss_cos", oracle, "planar radius times an independent z")


def _su2():
    tests = {"one": _named("one", lambda Q: np.ones(np.asarray(Q).shape[:-1]))}
    return Experiment((), tests, "one", lambda kind, test, x0, var: 1.0, "the base is a single point")


_EXPERIMENTS = {
    "flat_torus_u1": _torus,
    "polar_plane_u1": _polar,
    "hopf_s3": _hopf,
    "sphere_s2_u1": _sphere,
    "euclidean_r3_u1": _r3,
    "su2_self": _su2,
}


def experiment_for(name: str) -> Experiment:
    """Monte Carlo set-up of the scenario ``name``."""
    if name not in _EXPERIMENTS:
        raise KeyError(f"no Monte Carlo set-up for scenario {name!r}")
    return _EXPERIMENTS[name]()


__all__ = ["Experiment", "experiment_for"]
