"""Registry of numerical identities checked by ``bundlereduce verify``.

Every identity is a function ``check(b, Qs)`` of a bundle and a batch of
on-surface points ``(m, n_p)`` returning one non-negative residual per point.
:func:`run_suite` evaluates a selection of them on a scenario and reports
the worst residual against each identity's tolerance.

Groups
------
``bundle``     algebraic objects (projectors, connection, pseudoinverse, Killing)
``curvature``  Christoffel symbols, mean curvatures, second fundamental form
``lemma``      intermediate identities of the Jacobian / Ricci calculation
``scalar``     whole-report checks (decomposition, two J routes, fibre independence, ...)

Index conventions follow :mod:`bundlereduce.curvature`: ``dN[A, B, D] =
d_D N^A_B``, ``HG[C, A, B] = HGamma^C_AB``, ``dK[A, mu, E] = d_E K^A_mu``,
``s_A = gamma^{ab} d_A gamma_ab``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import curvature as cv
from .bundle import (
    BundleSpec,
    adapted_metric,
    adapted_pseudoinverse,
    bracket_residual,
    connection_curvature,
    killing_residual,
    local_frame,
)
from .curvature import DEFAULT_EPS_F
from .tensor_core import SmoothField, curvature_fd, derivative

ein = np.einsum


def _worst(x, m):
    """Max |x| over all non-batch axes, shape ``(m,)``."""
    x = np.abs(np.asarray(x, dtype=float)).reshape(m, -1)
    return x.max(axis=1) if x.shape[1] else np.zeros(m)


# ---------------------------------------------------------------------------
# bundle-level identities
# ---------------------------------------------------------------------------


def _projector_invariants(b, Qs):
    f = local_frame(b, Qs)
    m, eye_g = len(Qs), np.eye(b.n_g)
    parts = [
        f.chi,
        f.N @ f.N - f.N,
        f.N @ f.Pperp - f.Pperp,   # N fixes vectors tangent to Sigma
        f.Pperp @ f.N - f.N,       # the image of N is tangent to Sigma
        f.Pperp @ f.Pperp - f.Pperp,
        f.chi_Q @ f.Pperp,
        f.N @ f.K,
        f.Pi @ f.K,
        f.Pi @ f.Pi - f.Pi,
        f.Lam @ f.K - eye_g,
        f.Phi_inv @ f.Phi - eye_g,
        f.gamma - np.swapaxes(f.gamma, -1, -2),
    ]
    res = np.max([_worst(p, m) for p in parts], axis=0)
    pd = np.linalg.eigvalsh(f.gamma)[..., 0] > 0
    return np.where(pd, res, np.inf)


def _connection_reproducing(b, Qs):
    f = local_frame(b, Qs)
    return _worst(f.A @ f.K - np.eye(b.n_g), len(Qs))


def _curvature_antisymmetry(b, Qs):
    F = connection_curvature(b, Qs)
    return _worst(F + np.swapaxes(F, -1, -2), len(Qs))


def _horizontal_kernel(b, Qs):
    f = local_frame(b, Qs)
    sym = f.GH - np.swapaxes(f.GH, -1, -2)
    return np.maximum(_worst(f.GH @ f.K, len(Qs)), _worst(sym, len(Qs)))


def _horizontal_invariance(b, Qs):
    """Lie derivative of ``G^H`` along each ``K``; reduces to ``K^E d_E G^H_AB`` when ``K`` is constant."""
    f = local_frame(b, Qs)
    dGH = derivative(lambda q: local_frame(b, q).GH, Qs, curvature_fd(), b.domain)  # [A, B, E]
    dK = b.killing.derivative(Qs)  # [E, mu, A] = d_A K^E_mu
    t = ein("...eb,...ema->...mab", f.GH, dK)
    lie = ein("...abe,...em->...mab", dGH, f.K) + t + np.swapaxes(t, -1, -2)
    return _worst(lie, len(Qs))


def _killing(b, Qs):
    return _worst(killing_residual(b, Qs), len(Qs))


def _bracket(b, Qs):
    return _worst(bracket_residual(b, Qs), len(Qs))


def _pseudoinverse_product(b, Qs):
    if b.group_chart is None:
        return np.zeros(len(Qs))
    out = []
    a = np.zeros(b.n_g)
    for q in Qs:
        f = local_frame(b, q)
        prod = adapted_pseudoinverse(b, q, a) @ adapted_metric(b, q, a)
        target = np.zeros_like(prod)
        n = b.n_p
        target[:n, :n] = f.Pperp
        target[n:, n:] = np.eye(b.n_g)
        out.append(np.max(np.abs(prod - target)))
    return np.asarray(out)


def _gauge_covariance(b, Qs):
    """N and Lambda from chi and from chi' = 2 chi + chi^2/2 (same surface) agree."""
    g = b.gauge

    def chi2(q):
        c = g(q)
        return 2.0 * c + 0.5 * c * c

    def chi2_jac(q):
        c, dc = g(q), g.derivative(q)
        return (2.0 + c)[..., None] * dc

    b2 = dataclasses.replace(b, gauge=SmoothField(chi2, b.n_p, (b.n_g,), jacobian=chi2_jac))
    f1, f2 = local_frame(b, Qs), local_frame(b2, Qs)
    m = len(Qs)
    return np.maximum(_worst(f1.N - f2.N, m), _worst(f1.Lam - f2.Lam, m))


# ---------------------------------------------------------------------------
# Christoffel symbols, mean curvatures, second fundamental form
# ---------------------------------------------------------------------------


def _christoffel_symmetry(b, Qs):
    Gm = cv.christoffel_coordinate(b, Qs)
    return _worst(Gm - np.swapaxes(Gm, -1, -2), len(Qs))


def _metric_compatibility(b, Qs):
    G = b.metric(Qs)
    dG = b.metric.derivative(Qs)  # [A, B, C] = d_C G_AB
    low = ein("...ad,...dbc->...abc", G, cv.christoffel_coordinate(b, Qs))  # Gamma_{A B C}
    # d_C G_AB = Gamma_{A B C} + Gamma_{B A C}
    return _worst(dG - low - ein("...bac->...abc", low), len(Qs))


def _killing_relation(b, Qs):
    """``N^C_P (d_E K^P_a + K^F_a HGamma^P_FE) = 0``."""
    f = local_frame(b, Qs)
    dK = b.killing.derivative(Qs)
    HG = cv.christoffel_horizontal(b, Qs)
    inner = dK + ein("...fa,...pfe->...pae", f.K, HG)
    return _worst(ein("...cp,...pae->...cae", f.N, inner), len(Qs))


def _mean_curvature_forms(b, Qs):
    f1, f2, f3 = cv.mean_curvature_orbit_forms(b, Qs)
    m = len(Qs)
    return np.maximum(_worst(f1 - f2, m), _worst(f2 - f3, m))


def _gamma_identity(b, Qs):
    """``gamma^{sm} (nabla_{K_m} K_s)^E = -1/2 G^{PE} N^A_P s_A``."""
    f = local_frame(b, Qs)
    v = cv.mean_curvature_vector(b, Qs)
    s = cv.log_det_gradient(b, Qs)
    rhs = -0.5 * ein("...pe,...ap,...a->...e", f.Gi, f.N, s)
    return _worst(v - rhs, len(Qs))


def _second_fundamental_form(b, Qs):
    """``j^B_ab = 1/2 N^B_C ((nabla_{K_a} K_b)^C + (nabla_{K_b} K_a)^C)`` and ``|j|^2`` from ``j``."""
    f = local_frame(b, Qs)
    j, jsq = cv.second_fundamental_form(b, Qs)
    W = cv.killing_covariant(b, Qs)
    other = 0.5 * ein("...bc,...cxy->...bxy", f.N, W + np.swapaxes(W, -1, -2))
    # |j|^2 = G^H-norm of j with gamma^{-1} on the group indices
    jsq2 = ein("...bc,...bxy,...cuv,...xu,...yv->...", f.GH, j, j, f.gamma_inv, f.gamma_inv)
    m = len(Qs)
    return np.maximum(_worst(j - other, m), _worst(jsq - jsq2, m))


def _christoffel_table(b, Qs):
    """``Gamma^mu_AB`` antisymmetric part reproduces ``-1/2 F`` projected by ``N``."""
    out = []
    for q in Qs:
        t = cv.nonholonomic_christoffels(b, q)
        f = local_frame(b, q)
        F = connection_curvature(b, q)
        ref = -0.5 * ein("ea,fb,mef->mab", f.N, f.N, F)
        r1 = np.max(np.abs(t.grp_hor_hor - ref))
        r2 = np.max(np.abs(t.grp_hor_hor + np.swapaxes(t.grp_hor_hor, -1, -2)))
        out.append(max(r1, r2))
    return np.asarray(out)


# ---------------------------------------------------------------------------
# intermediate lemmas of the Jacobian and Ricci calculations
# ---------------------------------------------------------------------------


def _lemma_parts(b, Qs):
    f = local_frame(b, Qs)
    return f, cv.projector_derivative(b, Qs), cv.christoffel_horizontal(b, Qs), cv.log_det_gradient(b, Qs)


def _alf(b, Qs):
    """Expansion of ``h^{BD} d_D N^A_B`` through ``N = 1 - K Lambda``."""
    f, dN, _, _ = _lemma_parts(b, Qs)
    GiNt = ein("...bd,...ed->...be", f.Gi, f.N)  # G^{B~D~} N^D_D~ -> [B~, D]
    lhs = ein("...bd,...abd->...a", f.h, dN)
    rhs = (ein("...bd,...abd->...a", GiNt, dN)
           - ein("...xd,...bm,...mx,...abd->...a", GiNt, f.K, f.Lam, dN))
    return _worst(lhs - rhs, len(Qs))


def _bet(b, Qs):
    """Expansion of ``h^{BD} N^A_C HGamma^C_BD`` through ``N = 1 - K Lambda``."""
    f, _, HG, _ = _lemma_parts(b, Qs)
    NHG = ein("...ac,...cbd->...abd", f.N, HG)
    NGi = ein("...bx,...xd->...bd", f.N, f.Gi)  # N^B_B~ G^{B~ D}
    lhs = ein("...bd,...abd->...a", f.h, NHG)
    rhs = (ein("...bd,...abd->...a", NGi, NHG)
           - ein("...bx,...xy,...dm,...my,...abd->...a", f.N, f.Gi, f.K, f.Lam, NHG))
    return _worst(lhs - rhs, len(Qs))


def _alf_bet_cancel(b, Qs):
    """The Killing-direction remainders of the two expansions above are equal."""
    f, dN, HG, _ = _lemma_parts(b, Qs)
    t_alf = ein("...xy,...bm,...mx,...dy,...abd->...a", f.Gi, f.K, f.Lam, f.N, dN)
    t_bet = ein("...xy,...bx,...dm,...my,...ac,...cbd->...a", f.Gi, f.N, f.K, f.Lam, f.N, HG)
    return _worst(t_alf - t_bet, len(Qs))


def _integrand_forms(b, Qs):
    """Ito-identity integrand written with ``j_I`` equals the form with ``dN`` and ``HGamma``,
    and both equal the simplified form after the cancellation above."""
    f, dN, HG, s = _lemma_parts(b, Qs)
    ds = derivative(lambda q: cv.log_det_gradient(b, q), Qs, curvature_fd(), b.domain)  # [B, A]
    first = 0.25 * ein("...ab,...ba->...", f.h, ds)
    jI = cv.mean_curvature_base(b, Qs)
    i1 = first + 0.5 * ein("...a,...a->...", -0.5 * ein("...ps,...aps->...a", f.h, HG) + jI, s)
    i2 = first + 0.25 * ein("...a,...a->...",
                            ein("...bd,...abd->...a", f.h, dN) - ein("...bd,...ac,...cbd->...a", f.h, f.N, HG), s)
    GiNt = ein("...bd,...ed->...be", f.Gi, f.N)
    NGi = ein("...bx,...xd->...bd", f.N, f.Gi)
    i3 = first + 0.25 * ein("...a,...a->...",
                            ein("...bd,...abd->...a", GiNt, dN) - ein("...bd,...ac,...cbd->...a", NGi, f.N, HG), s)
    m = len(Qs)
    return np.maximum(_worst(i1 - i2, m), _worst(i2 - i3, m))


def _contribution_lemma(b, Qs):
    """Single-``s`` Ricci contribution equals the sum of its two partial contributions."""
    f, dN, HG, s = _lemma_parts(b, Qs)
    X = dN - ein("...ae,...ecp->...acp", f.N, HG)  # [A, C', P'] = N^A_{C'P'} - N^A_E HG^E_{C'P'}
    Xs = ein("...acp,...a->...cp", X, s)
    rac = 0.5 * ein("...pc,...cp->...", f.h, Xs)
    ralbet = 0.5 * ein("...lu,...eu,...le->...", f.Gi, f.N, Xs)
    total = ein("...xc,...px,...cp->...", f.Gi, f.N, Xs)
    return _worst(total - rac - ralbet, len(Qs))


# ---------------------------------------------------------------------------
# scalar (report-level) checks
# ---------------------------------------------------------------------------


def _reports(b, Qs, eps_F):
    return [cv.decomposition_report(b, q, eps_F) for q in Qs]


def _decomposition(b, Qs, eps_F=DEFAULT_EPS_F):
    return np.asarray([abs(r.residual_decomposition) for r in _reports(b, Qs, eps_F)])


def _jroutes(b, Qs, eps_F=DEFAULT_EPS_F):
    return np.asarray([r.residual_Jroutes for r in _reports(b, Qs, eps_F)])


def _nonholonomic(b, Qs, eps_F=DEFAULT_EPS_F):
    return np.abs(cv.scalar_curvature_bundle(b, Qs) - cv.scalar_curvature_direct(b, Qs))


def _homogeneity(b, Qs, lam=4.0):
    """``G -> lam G`` maps ``Jtilde -> Jtilde / lam``."""
    G = b.metric
    scaled = SmoothField(lambda q: lam * G(q), b.n_p, (b.n_p, b.n_p),
                         jacobian=lambda q: lam * G.derivative(q))
    b2 = dataclasses.replace(b, metric=scaled)
    j1 = cv.jacobian_integrand_coords(b, Qs)
    j2 = cv.jacobian_integrand_coords(b2, Qs)
    return np.abs(lam * j2 - j1)


def fiber_independence(b: BundleSpec, Qs, group_points) -> np.ndarray:
    """``|R_P_direct(F(Q*, a)) - R_P_nonholonomic(Q*)|`` for each group point ``a``."""
    ref = float(cv.scalar_curvature_bundle(b, Qs))
    return np.asarray([abs(float(cv.scalar_curvature_direct(b, Qs, a)) - ref) for a in group_points])


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Identity:
    name: str
    group: str
    check: Callable
    tolerance: float
    description: str
    uses_eps: bool = False


IDENTITIES = (
    Identity("projector_invariants", "bundle", _projector_invariants, 1e-10,
             "chi = 0, N^2 = N, N Pperp = Pperp, Pperp N = N, Pperp^2 = Pperp, chi_Q Pperp = 0, NK = PiK = 0, "
             "Lambda K = 1, gamma symmetric positive definite"),
    Identity("connection_reproducing", "bundle", _connection_reproducing, 1e-10, "A K = identity"),
    Identity("curvature_antisymmetry", "bundle", _curvature_antisymmetry, 1e-6, "F^m_EP = -F^m_PE"),
    Identity("horizontal_kernel", "bundle", _horizontal_kernel, 1e-10, "G^H symmetric and G^H K = 0"),
    Identity("horizontal_invariance", "bundle", _horizontal_invariance, 1e-5,
             "Lie derivative of G^H along K vanishes (K^E d_E G^H_AB = 0 for constant K)"),
    Identity("killing_property", "bundle", _killing, 1e-6, "Lie derivative of G along K vanishes"),
    Identity("killing_bracket", "bundle", _bracket, 1e-6, "[K_a, K_b] = c^g_ab K_g"),
    Identity("pseudoinverse_product", "bundle", _pseudoinverse_product, 1e-9,
             "adapted pseudoinverse times adapted metric = diag(Pperp, 1) at a = e"),
    Identity("gauge_covariance", "bundle", _gauge_covariance, 1e-8,
             "N and Lambda depend only on the gauge surface"),
    Identity("christoffel_symmetry", "curvature", _christoffel_symmetry, 1e-10, "Gamma^C_AB = Gamma^C_BA"),
    Identity("metric_compatibility", "curvature", _metric_compatibility, 1e-6,
             "d_C G_AB = Gamma_ABC + Gamma_BAC"),
    Identity("christoffel_table", "curvature", _christoffel_table, 1e-6,
             "Gamma^mu_AB = -1/2 N N F, antisymmetric"),
    Identity("killing_relation", "lemma", _killing_relation, 1e-6, "N^C_P (d_E K^P_a + K^F_a HGamma^P_FE) = 0"),
    Identity("mean_curvature_forms", "curvature", _mean_curvature_forms, 1e-8,
             "three expressions for j_II agree"),
    Identity("gamma_identity", "lemma", _gamma_identity, 1e-6,
             "gamma^{sm} nabla_{K_m} K_s = -1/2 G^{-1} N^T s"),
    Identity("second_fundamental_form", "curvature", _second_fundamental_form, 1e-6,
             "j = 1/2 N (W + W^T) and |j|^2 from j"),
    Identity("alf", "lemma", _alf, 1e-6, "expansion of h^{BD} d_D N^A_B"),
    Identity("bet", "lemma", _bet, 1e-6, "expansion of h^{BD} N^A_C HGamma^C_BD"),
    Identity("alf_bet_cancellation", "lemma", _alf_bet_cancel, 1e-6,
             "Killing-direction remainders of the two expansions are equal"),
    Identity("integrand_forms", "lemma", _integrand_forms, 1e-6,
             "Ito integrand with j_I = form with dN and HGamma = simplified form"),
    Identity("contribution_lemma", "lemma", _contribution_lemma, 1e-6,
             "single-s Ricci contribution = sum of horizontal and vertical parts"),
    Identity("homogeneity", "scalar", _homogeneity, 1e-6, "G -> 4G maps Jtilde -> Jtilde/4"),
    Identity("nonholonomic_vs_direct", "scalar", _nonholonomic, 1e-5,
             "R_P from the Ricci blocks equals brute-force R_P", uses_eps=True),
    Identity("jtilde_routes", "scalar", _jroutes, 1e-5, "|Jtilde_coords - Jtilde_geom|", uses_eps=True),
    Identity("decomposition", "scalar", _decomposition, 1e-5,
             "R_P - (HR + R_G + eps (F^2/4 + Jtilde + |j|^2))", uses_eps=True),
)

IDENTITY_NAMES = tuple(i.name for i in IDENTITIES)
LEMMA_NAMES = ("killing_relation", "gamma_identity", "alf", "bet", "alf_bet_cancellation",
               "integrand_forms", "contribution_lemma")


def get_identity(name: str) -> Identity:
    for i in IDENTITIES:
        if i.name == name:
            return i
    raise KeyError(f"unknown identity {name!r}; valid: {', '.join(IDENTITY_NAMES)}")


@dataclass
class IdentityResult:
    """Worst residual of one identity over the evaluated points."""

    name: str
    group: str
    max_residual: float
    tolerance: float
    passed: bool
    n_points: int
    worst_point: list

    def to_dict(self):
        return dataclasses.asdict(self)


def evaluate_identity(identity: Identity, b: BundleSpec, points, eps_F: float = DEFAULT_EPS_F,
                      tolerance: Optional[float] = None) -> IdentityResult:
    Qs = np.atleast_2d(np.asarray(points, dtype=float))
    if identity.uses_eps:
        res = np.asarray(identity.check(b, Qs, eps_F), dtype=float)
    else:
        res = np.asarray(identity.check(b, Qs), dtype=float)
    res = np.where(np.isfinite(res), res, np.inf)
    k = int(np.argmax(res))
    tol = identity.tolerance if tolerance is None else tolerance
    worst = float(res[k])
    return IdentityResult(identity.name, identity.group, worst, tol, bool(worst <= tol), len(Qs), Qs[k].tolist())


def run_suite(b: BundleSpec, points, names: Optional[Sequence[str]] = None, eps_F: float = DEFAULT_EPS_F,
              tolerance: Optional[float] = None):
    """Evaluate the selected identities (all by default) at ``points``."""
    chosen = IDENTITIES if names is None else tuple(get_identity(n) for n in names)
    return [evaluate_identity(i, b, points, eps_F, tolerance) for i in chosen]


__all__ = ["Identity", "IdentityResult", "IDENTITIES", "IDENTITY_NAMES", "LEMMA_NAMES",
           "get_identity", "evaluate_identity", "run_suite", "fiber_independence"]
