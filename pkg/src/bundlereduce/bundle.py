"""Principal-bundle problem instances and their pointwise algebra.

A :class:`BundleSpec` bundles the data of a free isometric group action in
one coordinate chart: the metric ``G_AB(Q)``, the Killing fields
``K^A_mu(Q)``, the gauge functions ``chi^alpha(Q)`` whose zero set is the
gauge surface Sigma, and the structure constants ``c[gamma, alpha, beta]``
of the group.

Index conventions (all arrays carry leading batch axes ``...``):

=================  =====================  ==================================
object             shape                  meaning
=================  =====================  ==================================
``G``              ``(n, n)``             metric ``G_AB``
``K``              ``(n, g)``             ``K[A, mu] = K^A_mu``
``chi_Q``          ``(g, n)``             ``chi_Q[alpha, B] = d chi^alpha / dQ^B``
``gamma``          ``(g, g)``             orbit metric ``K^T G K``
``Phi``            ``(g, g)``             Faddeev-Popov ``Phi[beta, mu] = chi^beta_A K^A_mu``
``Lam``            ``(g, n)``             ``Phi^{-1} chi_Q``
``N``              ``(n, n)``             ``N[A, C] = N^A_C = delta - K Lam``
``Pperp``          ``(n, n)``             G-orthogonal projector onto ker chi_Q
``Pi``             ``(n, n)``             ``delta - K gamma^{-1} K^T G``
``GH``             ``(n, n)``             horizontal metric ``Pi^T G Pi``
``h``              ``(n, n)``             projected inverse ``N G^{-1} N^T``
``A``              ``(g, n)``             mechanical connection ``gamma^{-1} K^T G``
=================  =====================  ==================================

Everything here is algebraic in the fields and their first derivatives;
curvature lives in :mod:`bundlereduce.curvature`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    DegenerateOrbitError,
    GaugeError,
    ProjectionError,
    SingularMatrixError,
    UnsupportedOperationError,
    ChartExitError,
)
from .tensor_core import (
    DEFAULT_FD,
    FDConfig,
    SmoothField,
    curvature_fd,
    derivative,
    inverse_det,
)

ein = np.einsum

#: tolerance for "this point lies on the gauge surface"
SURFACE_TOL = 1e-10
#: Newton projection settings
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50


# ---------------------------------------------------------------------------
# problem definition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroupChart:
    """A chart on the structure group around the identity ``a = 0``.

    ``rho(a)`` is the adjoint representation, ``u_bar(a)`` the matrix whose
    determinant is the invariant density (``v_bar = inv(u_bar)``), and
    ``action(Q, a)`` realises the right action ``Q -> F(Q, a)`` in the
    bundle chart.  ``quadrature(n)`` returns nodes ``(m, g)`` and weights
    ``(m,)`` summing to one, i.e. a rule for the normalised Haar measure.
    """

    dim: int
    rho: Callable[[np.ndarray], np.ndarray]
    u_bar: Callable[[np.ndarray], np.ndarray]
    haar_density: Callable[[np.ndarray], np.ndarray]
    quadrature: Callable[[int], tuple]
    action: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    name: str = ""

    def v_bar(self, a):
        return np.linalg.inv(self.u_bar(a))


def u1_chart(period: float, killing_index: int, n_p: int) -> GroupChart:
    """U(1) acting by translation of coordinate ``killing_index``."""

    def rho(a):
        a = np.asarray(a, dtype=float)
        return np.ones(a.shape[:-1] + (1, 1))

    def action(Q, a):
        Q = np.array(Q, dtype=float)
        a = np.asarray(a, dtype=float)
        Q[..., killing_index] = Q[..., killing_index] + a[..., 0]
        return Q

    def quadrature(n):
        # trapezoid rule on a periodic integrand: equal weights, exponential accuracy
        nodes = (np.arange(n) * (period / n))[:, None]
        return nodes, np.full(n, 1.0 / n)

    return GroupChart(
        dim=1,
        rho=rho,
        u_bar=rho,
        haar_density=lambda a: np.ones(np.asarray(a).shape[:-1]),
        quadrature=quadrature,
        action=action,
        name=f"U(1), period {period:g}",
    )


def _check_structure_constants(c, tol=1e-12):
    c = np.asarray(c, dtype=float)
    g = c.shape[0]
    if c.shape != (g, g, g):
        raise ValueError(f"structure constants must have shape (g, g, g), got {c.shape}")
    if np.max(np.abs(c + np.swapaxes(c, 1, 2)), initial=0.0) > tol:
        raise ValueError("structure constants are not antisymmetric in the lower pair")
    if np.max(np.abs(ein("ssm->m", c)), initial=0.0) > tol:
        raise ValueError("structure constants are not trace-free (c^s_{s mu} != 0)")
    # Jacobi: c^e_{ab} c^f_{ec} + cyclic = 0
    cc = ein("eab,fec->fabc", c, c)
    jac = cc + np.transpose(cc, (0, 2, 3, 1)) + np.transpose(cc, (0, 3, 1, 2))
    if np.max(np.abs(jac), initial=0.0) > tol:
        raise ValueError("structure constants violate the Jacobi identity")
    return c


@dataclass(frozen=True)
class BundleSpec:
    """A principal-bundle problem in one chart.

    ``metric``, ``killing`` and ``gauge`` may be plain batched callables or
    :class:`SmoothField` objects carrying analytic Jacobians.  ``domain``,
    if given, maps points to a boolean mask of chart membership.
    """

    n_p: int
    n_g: int
    metric: SmoothField
    killing: SmoothField
    gauge: SmoothField
    structure_constants: np.ndarray
    group_chart: Optional[GroupChart] = None
    domain: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fd: FDConfig = field(default=DEFAULT_FD)
    name: str = "bundle"

    def __post_init__(self):
        n, g = self.n_p, self.n_g
        if not (0 < g <= n):
            raise ValueError("need 0 < n_g <= n_p")
        wrap = lambda f, shape: f if isinstance(f, SmoothField) else SmoothField(f, n, shape, fd=self.fd)
        object.__setattr__(self, "metric", wrap(self.metric, (n, n)))
        object.__setattr__(self, "killing", wrap(self.killing, (n, g)))
        object.__setattr__(self, "gauge", wrap(self.gauge, (g,)))
        c = _check_structure_constants(self.structure_constants)
        if c.shape[0] != g:
            raise ValueError("structure constants do not match the group dimension")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "structure_constants", c)
        if self.group_chart is not None and self.group_chart.dim != g:
            raise ValueError("group chart dimension does not match n_g")

    @property
    def is_abelian(self) -> bool:
        return not np.any(self.structure_constants)

    def in_chart(self, Q):
        Q = np.asarray(Q, dtype=float)
        if self.domain is None:
            return np.ones(Q.shape[:-1], dtype=bool)
        return np.asarray(self.domain(Q), dtype=bool)

    def require_chart(self, Q):
        if not np.all(self.in_chart(Q)):
            raise ChartExitError(f"point outside the chart of {self.name}")


# ---------------------------------------------------------------------------
# pointwise objects
# ---------------------------------------------------------------------------


def _inv(M, error_cls, what, Q):
    try:
        return inverse_det(M)
    except SingularMatrixError as exc:
        pt = np.asarray(Q).reshape(-1, np.asarray(Q).shape[-1])[0].tolist()
        raise error_cls(f"{what} is singular near {pt}; condition {exc.condition:.3e}") from exc


@dataclass(frozen=True)
class LocalFrame:
    """All algebraic objects of the bundle at a batch of points."""

    Q: np.ndarray
    G: np.ndarray
    Gi: np.ndarray
    detG: np.ndarray
    K: np.ndarray
    chi: np.ndarray
    chi_Q: np.ndarray
    gamma: np.ndarray
    gamma_inv: np.ndarray
    Phi: np.ndarray
    Phi_inv: np.ndarray
    Lam: np.ndarray
    N: np.ndarray
    Pperp: np.ndarray
    Pi: np.ndarray
    GH: np.ndarray
    h: np.ndarray
    A: np.ndarray


def local_frame(b: BundleSpec, Q) -> LocalFrame:
    """Evaluate every pointwise object at ``Q`` (batched, need not be on Sigma)."""
    Q = np.asarray(Q, dtype=float)
    n = b.n_p
    G = b.metric(Q)
    Gi, detG = _inv(G, SingularMatrixError, "metric", Q)
    K = b.killing(Q)
    chi = b.gauge(Q)
    chi_Q = b.gauge.derivative(Q)
    T = lambda M: np.swapaxes(M, -1, -2)
    KtG = T(K) @ G
    gamma = KtG @ K
    gamma_inv, _ = _inv(gamma, DegenerateOrbitError, "orbit metric (action not free)", Q)
    Phi = chi_Q @ K
    Phi_inv, _ = _inv(Phi, GaugeError, "Faddeev-Popov matrix (gauge surface not transverse)", Q)
    Lam = Phi_inv @ chi_Q
    eye = np.eye(n)
    N = eye - K @ Lam
    Gi_chiT = Gi @ T(chi_Q)
    Pperp = eye - Gi_chiT @ np.linalg.solve(chi_Q @ Gi_chiT, chi_Q)
    A = gamma_inv @ KtG
    Pi = eye - K @ A
    GH = G - T(KtG) @ A
    h = N @ Gi @ T(N)
    return LocalFrame(Q, G, Gi, detG, K, chi, chi_Q, gamma, gamma_inv, Phi, Phi_inv,
                      Lam, N, Pperp, Pi, GH, h, A)


def orbit_metric(b: BundleSpec, Q):
    """Orbit metric ``gamma = K^T G K`` and its inverse."""
    Q = np.asarray(Q, dtype=float)
    G, K = b.metric(Q), b.killing(Q)
    gamma = ein("...am,...ab,...bn->...mn", K, G, K)
    gamma_inv, _ = _inv(gamma, DegenerateOrbitError, "orbit metric (action not free)", Q)
    return gamma, gamma_inv


def faddeev_popov(b: BundleSpec, Q):
    """Faddeev-Popov matrix ``Phi^beta_mu = K^A_mu d_A chi^beta`` and its inverse."""
    Q = np.asarray(Q, dtype=float)
    Phi = ein("...ba,...am->...bm", b.gauge.derivative(Q), b.killing(Q))
    Phi_inv, _ = _inv(Phi, GaugeError, "Faddeev-Popov matrix (gauge surface not transverse)", Q)
    return Phi, Phi_inv


@dataclass(frozen=True)
class ProjectorSet:
    """Projectors and group-direction matrices at a gauge-surface point."""

    point: np.ndarray
    Phi: np.ndarray
    Phi_inv: np.ndarray
    Lam: np.ndarray
    Pperp: np.ndarray
    N: np.ndarray
    Pi: np.ndarray
    gamma: np.ndarray
    gamma_inv: np.ndarray


def check_on_surface(b: BundleSpec, Q, tol: float = SURFACE_TOL):
    chi = b.gauge(Q)
    err = float(np.max(np.abs(chi), initial=0.0))
    if err > tol:
        raise GaugeError(f"point {np.asarray(Q).tolist()} is off the gauge surface (|chi| = {err:.3e})")


def projectors(b: BundleSpec, Qs) -> ProjectorSet:
    """Projector set at an on-surface point ``Qs``."""
    Qs = np.asarray(Qs, dtype=float)
    check_on_surface(b, Qs)
    f = local_frame(b, Qs)
    return ProjectorSet(Qs, f.Phi, f.Phi_inv, f.Lam, f.Pperp, f.N, f.Pi, f.gamma, f.gamma_inv)


def mechanical_connection(b: BundleSpec, Q):
    """``A^nu_P = gamma^{nu mu} K^R_mu G_RP``, shape ``(..., g, n)``."""
    return local_frame(b, Q).A


def connection_curvature(b: BundleSpec, Q, fd: Optional[FDConfig] = None):
    """Curvature ``F^mu_EP = d_E A_P - d_P A_E + c^mu_{ns} A^n_E A^s_P`` at ``a = e``.

    Returned with shape ``(..., g, n, n)``, index order ``[mu, E, P]``.
    """
    Q = np.asarray(Q, dtype=float)
    A = mechanical_connection(b, Q)
    dA = derivative(lambda q: mechanical_connection(b, q), Q, fd or curvature_fd(), b.domain)  # [mu, P, E] = d_E A_P
    F = np.swapaxes(dA, -1, -2) - dA
    F = F + ein("mns,...ne,...sp->...mep", b.structure_constants, A, A)
    return F


def horizontal_metric(b: BundleSpec, Q):
    """Horizontal metric ``G^H = Pi^T G Pi`` (degenerate along the orbits)."""
    return local_frame(b, Q).GH


def killing_residual(b: BundleSpec, Q):
    """Lie derivative of ``G`` along each Killing field, shape ``(..., g, n, n)``.

    ``K^E d_E G_AB + G_EB d_A K^E + G_AE d_B K^E``; zero for an isometric action.
    """
    Q = np.asarray(Q, dtype=float)
    G, K = b.metric(Q), b.killing(Q)
    dG = b.metric.derivative(Q)  # [A, B, E]
    dK = b.killing.derivative(Q)  # [E, mu, A] = d_A K^E_mu
    t1 = ein("...em,...abe->...mab", K, dG)
    t2 = ein("...eb,...ema->...mab", G, dK)
    return t1 + t2 + np.swapaxes(t2, -1, -2)


# ---------------------------------------------------------------------------
# adapted coordinates (Q*, a)
# ---------------------------------------------------------------------------


def _need_chart(b: BundleSpec) -> GroupChart:
    if b.group_chart is None:
        raise UnsupportedOperationError(f"bundle {b.name!r} has no group chart")
    return b.group_chart


def _T(M):
    return np.swapaxes(M, -1, -2)


def _blocks(top, off, low):
    """Assemble the symmetric block matrix ``[[top, off], [off^T, low]]`` (batched)."""
    return np.concatenate([np.concatenate([top, off], axis=-1),
                           np.concatenate([_T(off), low], axis=-1)], axis=-2)


def adapted_metric(b: BundleSpec, Qs, a):
    """Metric in the adapted basis ``(d/dQ*, d/da)``, shape ``(n+g, n+g)``.

    Blocks: ``Pperp^T G Pperp``, ``Pperp^T G K u_bar`` and ``u_bar^T gamma u_bar``.
    """
    chart = _need_chart(b)
    P = projectors(b, Qs)
    G, K = b.metric(Qs), b.killing(Qs)
    u = np.broadcast_to(chart.u_bar(np.asarray(a, dtype=float)), P.gamma.shape)
    top = _T(P.Pperp) @ G @ P.Pperp
    off = _T(P.Pperp) @ G @ K @ u
    low = _T(u) @ P.gamma @ u
    return _blocks(top, off, low)


def adapted_pseudoinverse(b: BundleSpec, Qs, a):
    """Pseudoinverse of :func:`adapted_metric` built from ``N``, ``Lam`` and ``v_bar``.

    Its product with the adapted metric is ``diag(Pperp, identity)``.
    """
    chart = _need_chart(b)
    f = local_frame(b, Qs)
    check_on_surface(b, Qs)
    v = np.broadcast_to(chart.v_bar(np.asarray(a, dtype=float)), f.gamma.shape)
    top = f.h
    off = f.N @ f.Gi @ _T(f.Lam) @ _T(v)
    low = v @ f.Lam @ f.Gi @ _T(f.Lam) @ _T(v)
    return _blocks(top, off, low)


def surface_determinant(b: BundleSpec, Qs):
    """Determinant of ``Pperp^T G^H Pperp`` restricted to Sigma.

    The restriction is defined through the factorisation
    ``det G (det Phi)^2 / det gamma``, which is the density of the induced
    orbit-space volume with respect to ``delta(chi) dQ``.
    """
    f = local_frame(b, Qs)
    return f.detG * np.linalg.det(f.Phi) ** 2 / np.linalg.det(f.gamma)


def adapted_determinant(b: BundleSpec, Qs, a):
    """Factorised determinant ``det_Sigma(Pperp G^H Pperp) det(gamma) det(u_bar)^2``."""
    chart = _need_chart(b)
    check_on_surface(b, Qs)
    gamma, _ = orbit_metric(b, Qs)
    du = np.linalg.det(chart.u_bar(np.asarray(a, dtype=float)))
    return surface_determinant(b, Qs) * np.linalg.det(gamma) * du**2


# ---------------------------------------------------------------------------
# projection onto the gauge surface
# ---------------------------------------------------------------------------


def project_to_surface(b: BundleSpec, Q, tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER,
                       step: Optional[int] = None, along_orbit: bool = True):
    """Move ``Q`` along its orbit until ``chi(Q) = 0``.

    Newton iteration with increment ``delta = Phi^{-1} chi`` in the group
    coordinates.  With a group action available (and ``along_orbit``) the
    update is ``Q <- F(Q, -delta)``, which stays on the orbit exactly; otherwise
    the linearised step ``Q <- Q - K delta`` is used.  Raises
    :class:`ProjectionError` (carrying ``step`` if given) when any point fails
    to converge within ``max_iter`` iterations.
    """
    Q = np.array(Q, dtype=float)
    act = None
    if along_orbit and b.group_chart is not None:
        act = b.group_chart.action
    for _ in range(max_iter):
        chi = b.gauge(Q)
        if np.max(np.abs(chi), initial=0.0) <= tol:
            return Q
        K = b.killing(Q)
        Phi = ein("...ba,...am->...bm", b.gauge.derivative(Q), K)
        try:
            delta = np.linalg.solve(Phi, chi[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise ProjectionError("Faddeev-Popov matrix singular during projection", step) from exc
        Q = act(Q, -delta) if act is not None else Q - ein("...am,...m->...a", K, delta)
        if not np.all(np.isfinite(Q)):
            raise ProjectionError("projection produced non-finite coordinates", step)
    chi = b.gauge(Q)
    if np.max(np.abs(chi), initial=0.0) <= tol:
        return Q
    raise ProjectionError(f"Newton projection did not reach |chi| <= {tol:g} in {max_iter} iterations", step)


def bracket_residual(b: BundleSpec, Q):
    """``[K_a, K_b] - c^g_{ab} K_g`` for all pairs, shape ``(..., n, g, g)``.

    Fundamental fields of a right action close on the structure constants.
    """
    Q = np.asarray(Q, dtype=float)
    K, dK = b.killing(Q), b.killing.derivative(Q)  # dK[A, mu, E] = d_E K^A_mu
    lie = ein("...ea,...cbe->...cab", K, dK)
    return lie - np.swapaxes(lie, -1, -2) - ein("gab,...cg->...cab", b.structure_constants, K)
