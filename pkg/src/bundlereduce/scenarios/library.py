"""Concrete bundles with closed-form ground truth.

Each builder returns a :class:`~bundlereduce.bundle.BundleSpec` together
with a parametrisation of its gauge surface and a sampler of on-surface
points.  Oracle values live in the JSON tables next to this module.
"""
from __future__ import annotations

import numpy as np

from ..bundle import BundleSpec, GroupChart, u1_chart
from ..tensor_core import CURVATURE_FD, SmoothField

U1 = np.zeros((1, 1, 1))
EPS3 = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    EPS3[_i, _j, _k], EPS3[_i, _k, _j] = 1.0, -1.0


def _const(shape, value, dim):
    value = np.asarray(value, dtype=float)

    def f(Q):
        Q = np.asarray(Q, dtype=float)
        return np.broadcast_to(value, Q.shape[:-1] + shape).copy()

    def df(Q):
        Q = np.asarray(Q, dtype=float)
        return np.zeros(Q.shape[:-1] + shape + (dim,))

    return SmoothField(f, dim, shape, jacobian=df)


def _linear_gauge(coeffs):
    """Scalar gauge ``chi = coeffs . Q`` with its exact gradient."""
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.size
    return SmoothField(lambda Q: (np.asarray(Q) @ coeffs)[..., None], n, (1,),
                       jacobian=lambda Q: np.broadcast_to(coeffs, np.asarray(Q).shape[:-1] + (1, n)).copy())


# ---------------------------------------------------------------------------
# flat torus T^2 with U(1) translating y
# ---------------------------------------------------------------------------

TORUS_TILT = 0.3


def flat_torus_u1(variant: str = "straight"):
    """``G = identity`` on ``(x, y)``, ``K = d/dy``.

    Variants: ``straight`` (chi = y), ``tilted`` (chi = y + 0.3 x),
    ``scaled`` (chi = 2 y, same surface as straight).
    """
    coeffs, slope = {"straight": ((0.0, 1.0), 0.0),
                     "tilted": ((TORUS_TILT, 1.0), -TORUS_TILT),
                     "scaled": ((0.0, 2.0), 0.0)}[variant]
    b = BundleSpec(
        n_p=2, n_g=1,
        metric=_const((2, 2), np.eye(2), 2),
        killing=_const((2, 1), [[0.0], [1.0]], 2),
        gauge=_linear_gauge(coeffs),
        structure_constants=U1,
        group_chart=u1_chart(2 * np.pi, 1, 2),
        name=f"flat_torus_u1[{variant}]",
    )

    def surface(x):
        x = np.asarray(x, dtype=float)
        return np.stack([x[..., 0], slope * x[..., 0]], axis=-1)

    def sample(rng, n):
        return surface(rng.uniform(0.0, 2 * np.pi, size=(n, 1)))

    return b, surface, sample


# ---------------------------------------------------------------------------
# punctured plane in polar coordinates with U(1) rotating phi
# ---------------------------------------------------------------------------

SPIRAL_PITCH = 0.4


def _polar_metric():
    def G(Q):
        r = np.asarray(Q)[..., 0]
        out = np.zeros(r.shape + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = r * r
        return out

    def dG(Q):
        r = np.asarray(Q)[..., 0]
        out = np.zeros(r.shape + (2, 2, 2))
        out[..., 1, 1, 0] = 2 * r
        return out

    return SmoothField(G, 2, (2, 2), jacobian=dG)


def polar_plane_u1(variant: str = "radial"):
    """Plane minus the origin in ``(r, phi)``, ``K = d/dphi``.

    Variants: ``radial`` (chi = phi), ``spiral`` (chi = phi - 0.4 r).
    The chart is the universal cover ``r > 0, phi`` real.
    """
    pitch = {"radial": 0.0, "spiral": SPIRAL_PITCH}[variant]
    b = BundleSpec(
        n_p=2, n_g=1,
        metric=_polar_metric(),
        killing=_const((2, 1), [[0.0], [1.0]], 2),
        gauge=_linear_gauge((-pitch, 1.0)),
        structure_constants=U1,
        group_chart=u1_chart(2 * np.pi, 1, 2),
        domain=lambda Q: np.asarray(Q)[..., 0] > 0,
        name=f"polar_plane_u1[{variant}]",
    )

    def surface(x):
        r = np.asarray(x, dtype=float)[..., 0]
        return np.stack([r, pitch * r], axis=-1)

    def sample(rng, n):
        return surface(rng.uniform(0.5, 3.0, size=(n, 1)))

    return b, surface, sample


# ---------------------------------------------------------------------------
# Hopf fibration S^3 -> S^2 in Euler angles
# ---------------------------------------------------------------------------

HOPF_TILT = 0.3


def _hopf_metric():
    # unit round S^3: (d theta^2 + d phi^2 + 2 cos(theta) d phi d psi + d psi^2) / 4
    def G(Q):
        th = np.asarray(Q)[..., 0]
        out = np.zeros(th.shape + (3, 3))
        out[..., 0, 0] = out[..., 1, 1] = out[..., 2, 2] = 0.25
        out[..., 1, 2] = out[..., 2, 1] = 0.25 * np.cos(th)
        return out

    def dG(Q):
        th = np.asarray(Q)[..., 0]
        out = np.zeros(th.shape + (3, 3, 3))
        out[..., 1, 2, 0] = out[..., 2, 1, 0] = -0.25 * np.sin(th)
        return out

    return SmoothField(G, 3, (3, 3), jacobian=dG)


def hopf_s3(variant: str = "fiber"):
    """Unit S^3 with U(1) shifting the fibre angle ``psi``.

    Variants: ``fiber`` (chi = psi) and ``tilted``
    (chi = psi - 0.3 sin(theta) cos(phi)).
    """
    tilt = {"fiber": 0.0, "tilted": HOPF_TILT}[variant]

    def chi(Q):
        Q = np.asarray(Q)
        return (Q[..., 2] - tilt * np.sin(Q[..., 0]) * np.cos(Q[..., 1]))[..., None]

    def dchi(Q):
        Q = np.asarray(Q)
        out = np.zeros(Q.shape[:-1] + (1, 3))
        out[..., 0, 0] = -tilt * np.cos(Q[..., 0]) * np.cos(Q[..., 1])
        out[..., 0, 1] = tilt * np.sin(Q[..., 0]) * np.sin(Q[..., 1])
        out[..., 0, 2] = 1.0
        return out

    b = BundleSpec(
        n_p=3, n_g=1,
        metric=_hopf_metric(),
        killing=_const((3, 1), [[0.0], [0.0], [1.0]], 3),
        gauge=SmoothField(chi, 3, (1,), jacobian=dchi),
        structure_constants=U1,
        group_chart=u1_chart(4 * np.pi, 2, 3),
        domain=lambda Q: (np.asarray(Q)[..., 0] > 0) & (np.asarray(Q)[..., 0] < np.pi),
        name=f"hopf_s3[{variant}]",
    )

    def surface(x):
        x = np.asarray(x, dtype=float)
        th, ph = x[..., 0], x[..., 1]
        return np.stack([th, ph, tilt * np.sin(th) * np.cos(ph)], axis=-1)

    def sample(rng, n):
        th = rng.uniform(0.3, np.pi - 0.3, size=n)
        ph = rng.uniform(0.0, 2 * np.pi, size=n)
        return surface(np.stack([th, ph], axis=-1))

    return b, surface, sample


# ---------------------------------------------------------------------------
# SU(2) acting on itself, exponential coordinates
# ---------------------------------------------------------------------------


def _cross(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1] + (3, 3))
    out[..., 0, 1], out[..., 0, 2] = -x[..., 2], x[..., 1]
    out[..., 1, 0], out[..., 1, 2] = x[..., 2], -x[..., 0]
    out[..., 2, 0], out[..., 2, 1] = -x[..., 1], x[..., 0]
    return out


def su2_jacobian(x):
    """Trivialised differential ``J(x)`` of ``exp`` with ``exp(x + d) = exp(x) exp(J(x) d)``.

    ``J = I - (1 - cos t)/t^2 [x] + (t - sin t)/t^3 [x]^2``, evaluated with
    series expansions near ``t = 0``.
    """
    x = np.asarray(x, dtype=float)
    t = np.linalg.norm(x, axis=-1)
    a = 0.5 * np.sinc(t / (2 * np.pi)) ** 2  # (1 - cos t) / t^2
    small = t < 0.1
    ts = np.where(small, 1.0, t)
    t2 = t * t
    b = np.where(small, 1 / 6 - t2 / 120 + t2 * t2 / 5040 - t2**3 / 362880,
                 (ts - np.sin(ts)) / ts**3)
    X = _cross(x)
    return np.eye(3) - a[..., None, None] * X + b[..., None, None] * (X @ X)


def su2_haar_density(x):
    t = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    return np.sinc(t / (2 * np.pi)) ** 2  # = 2 (1 - cos t) / t^2


def _qexp(x):
    x = np.asarray(x, dtype=float)
    t = np.linalg.norm(x, axis=-1)
    # sin(t/2)/t = sinc(t/2pi)/2
    return np.concatenate([np.cos(t / 2)[..., None], 0.5 * np.sinc(t / (2 * np.pi))[..., None] * x], axis=-1)


def _qmul(p, q):
    w1, v1 = p[..., :1], p[..., 1:]
    w2, v2 = q[..., :1], q[..., 1:]
    w = w1 * w2 - np.sum(v1 * v2, axis=-1, keepdims=True)
    return np.concatenate([w, w1 * v2 + w2 * v1 + np.cross(v1, v2)], axis=-1)


def _qlog(q):
    w, v = q[..., 0], q[..., 1:]
    s = np.linalg.norm(v, axis=-1)
    t = 2 * np.arctan2(s, w)
    # v * t / s, with t/s -> 2 as s -> 0
    ratio = np.where(s > 1e-300, t / np.where(s > 1e-300, s, 1.0), 2.0 / np.where(w != 0, w, 1.0))
    return v * ratio[..., None]


def su2_action(Q, a):
    """Right multiplication ``log(exp(Q) exp(a))``."""
    return _qlog(_qmul(_qexp(Q), _qexp(a)))


def _su2_quadrature(n):
    # angle t in (0, 2 pi) with weight sin^2(t/2); direction: Gauss in cos(theta) x trapezoid in phi
    gt, wt = np.polynomial.legendre.leggauss(n)
    t = np.pi * (gt + 1.0)
    wt = wt * np.sin(t / 2) ** 2
    gc, wc = np.polynomial.legendre.leggauss(n)
    ph = 2 * np.pi * np.arange(2 * n) / (2 * n)
    T, C, P = np.meshgrid(t, gc, ph, indexing="ij")
    W = wt[:, None, None] * wc[None, :, None] * np.ones_like(P)
    S = np.sqrt(1 - C**2)
    nodes = np.stack([T * S * np.cos(P), T * S * np.sin(P), T * C], axis=-1).reshape(-1, 3)
    w = W.reshape(-1)
    return nodes, w / w.sum()


SU2_CHART = GroupChart(
    dim=3,
    rho=lambda a: _rodrigues(a),
    u_bar=su2_jacobian,
    haar_density=lambda a: su2_haar_density(a),
    quadrature=_su2_quadrature,
    action=su2_action,
    name="SU(2), exponential coordinates",
)


def _rodrigues(a):
    """Adjoint representation ``exp([a])`` (a rotation matrix)."""
    a = np.asarray(a, dtype=float)
    t = np.linalg.norm(a, axis=-1)[..., None, None]
    X = _cross(a)
    s = np.sinc(t / np.pi)  # sin t / t
    c = 0.5 * np.sinc(t / (2 * np.pi)) ** 2  # (1 - cos t)/t^2
    return np.eye(3) + s * X + c * (X @ X)


def su2_self():
    """Bi-invariant SU(2) acting on itself; gauge fixes all three coordinates.

    ``G = J^T J`` in exponential coordinates, Killing fields ``K = J^{-1}``
    (left-invariant fields, generating right translations), ``gamma = I``.
    The gauge surface is the single point ``Q = 0``.
    """
    metric = SmoothField(lambda Q: np.swapaxes(su2_jacobian(Q), -1, -2) @ su2_jacobian(Q),
                         3, (3, 3), fd=CURVATURE_FD)
    killing = SmoothField(lambda Q: np.linalg.inv(su2_jacobian(Q)), 3, (3, 3), fd=CURVATURE_FD)
    gauge = SmoothField(lambda Q: np.asarray(Q, dtype=float).copy(), 3, (3,),
                        jacobian=lambda Q: np.broadcast_to(np.eye(3), np.asarray(Q).shape[:-1] + (3, 3)).copy())
    b = BundleSpec(
        n_p=3, n_g=3,
        metric=metric, killing=killing, gauge=gauge,
        structure_constants=EPS3,
        group_chart=SU2_CHART,
        domain=lambda Q: np.linalg.norm(np.asarray(Q), axis=-1) < 1.9 * np.pi,
        name="su2_self",
    )

    def surface(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (3,))

    def sample(rng, n):
        return np.zeros((n, 3))

    return b, surface, sample


# ---------------------------------------------------------------------------
# extra warped scenarios (non-constant orbit size with curvature)
# ---------------------------------------------------------------------------


def sphere_s2_u1():
    """Round unit S^2 in ``(theta, phi)`` with U(1) rotating ``phi``; chi = phi."""

    def G(Q):
        th = np.asarray(Q)[..., 0]
        out = np.zeros(th.shape + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = np.sin(th) ** 2
        return out

    def dG(Q):
        th = np.asarray(Q)[..., 0]
        out = np.zeros(th.shape + (2, 2, 2))
        out[..., 1, 1, 0] = 2 * np.sin(th) * np.cos(th)
        return out

    b = BundleSpec(
        n_p=2, n_g=1,
        metric=SmoothField(G, 2, (2, 2), jacobian=dG),
        killing=_const((2, 1), [[0.0], [1.0]], 2),
        gauge=_linear_gauge((0.0, 1.0)),
        structure_constants=U1,
        group_chart=u1_chart(2 * np.pi, 1, 2),
        domain=lambda Q: (np.asarray(Q)[..., 0] > 0) & (np.asarray(Q)[..., 0] < np.pi),
        name="sphere_s2_u1",
    )

    def surface(x):
        th = np.asarray(x, dtype=float)[..., 0]
        return np.stack([th, np.zeros_like(th)], axis=-1)

    def sample(rng, n):
        return surface(rng.uniform(0.4, np.pi - 0.4, size=(n, 1)))

    return b, surface, sample


def _rotation_action(Q, a):
    Q = np.array(Q, dtype=float)
    a = np.asarray(a, dtype=float)[..., 0]
    c, s = np.cos(a), np.sin(a)
    x, y = Q[..., 0].copy(), Q[..., 1].copy()
    Q[..., 0], Q[..., 1] = c * x - s * y, s * x + c * y
    return Q


#: helical gauge chi = phi - (HELIX_Z z + HELIX_RHO rho)
HELIX_Z, HELIX_RHO = 0.4, 0.3


def euclidean_r3_u1(variant: str = "cartesian"):
    """Flat R^3 in Cartesian coordinates, U(1) rotating about the z axis.

    ``cartesian``: the gauge is the polar angle ``chi = atan2(y, x)``, so
    Sigma is the half-plane ``y = 0, x > 0``.  ``helical``: ``chi = phi -
    (0.4 z + 0.3 rho)``, a curved surface meeting each orbit once on which
    ``N``, ``K`` and ``gamma`` all vary, so none of the derivative terms of
    the reduction vanish.  Base coordinates are ``(rho, z)``.
    """
    kz, kr = (HELIX_Z, HELIX_RHO) if variant == "helical" else (0.0, 0.0)

    def offset(rho, z):
        return kz * z + kr * rho

    def chi(Q):
        Q = np.asarray(Q, dtype=float)
        c = offset(np.hypot(Q[..., 0], Q[..., 1]), Q[..., 2])
        # angle of the point rotated back by c, i.e. (phi - c) wrapped to (-pi, pi]
        x, y = Q[..., 0], Q[..., 1]
        return np.arctan2(y * np.cos(c) - x * np.sin(c), x * np.cos(c) + y * np.sin(c))[..., None]

    def dchi(Q):
        Q = np.asarray(Q, dtype=float)
        r2 = Q[..., 0] ** 2 + Q[..., 1] ** 2
        r = np.sqrt(r2)
        out = np.zeros(Q.shape[:-1] + (1, 3))
        out[..., 0, 0] = -Q[..., 1] / r2 - kr * Q[..., 0] / r
        out[..., 0, 1] = Q[..., 0] / r2 - kr * Q[..., 1] / r
        out[..., 0, 2] = -kz
        return out

    def K(Q):
        Q = np.asarray(Q, dtype=float)
        out = np.zeros(Q.shape[:-1] + (3, 1))
        out[..., 0, 0], out[..., 1, 0] = -Q[..., 1], Q[..., 0]
        return out

    def dK(Q):
        Q = np.asarray(Q, dtype=float)
        out = np.zeros(Q.shape[:-1] + (3, 1, 3))
        out[..., 0, 0, 1], out[..., 1, 0, 0] = -1.0, 1.0
        return out

    chart = u1_chart(2 * np.pi, 1, 3)
    chart = GroupChart(dim=1, rho=chart.rho, u_bar=chart.u_bar, haar_density=chart.haar_density,
                       quadrature=chart.quadrature, action=_rotation_action, name="U(1) rotations")
    b = BundleSpec(
        n_p=3, n_g=1,
        metric=_const((3, 3), np.eye(3), 3),
        killing=SmoothField(K, 3, (3, 1), jacobian=dK),
        gauge=SmoothField(chi, 3, (1,), jacobian=dchi),
        structure_constants=U1,
        group_chart=chart,
        domain=lambda Q: np.asarray(Q)[..., 0] ** 2 + np.asarray(Q)[..., 1] ** 2 > 0,
        name=f"euclidean_r3_u1[{variant}]",
    )

    def surface(x):
        x = np.asarray(x, dtype=float)
        rho, z = x[..., 0], x[..., 1]
        c = offset(rho, z)
        return np.stack([rho * np.cos(c), rho * np.sin(c), z], axis=-1)

    def sample(rng, n):
        return surface(np.stack([rng.uniform(0.5, 3.0, n), rng.uniform(-1.0, 1.0, n)], axis=-1))

    return b, surface, sample
