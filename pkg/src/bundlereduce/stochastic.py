"""Diffusions on the bundle and on the gauge surface, and Green's-function pairings.

Two processes are simulated with the Ito-Euler-Maruyama scheme:

* the *original* diffusion on the bundle chart, generator
  ``1/2 mu^2 kappa Laplace-Beltrami``::

      d eta = 1/2 mu^2 kappa (d_B G^{AB} + 1/2 G^{AB} d_B ln det G) dt + mu sqrt(kappa) X dw,

  with ``X X^T = G^{-1}``;
* the *reduced* diffusion on the gauge surface Sigma::

      d xi = 1/2 mu^2 kappa h^{BD} (d_D N^A_B - N^A_C HG^C_BD) dt + mu sqrt(kappa) N X dw,

  followed after every step by a Newton projection back onto Sigma.  This
  drift omits the orbit mean curvature; the Girsanov factor restores it.
  ``drift="projected"`` adds it directly (``+ mu^2 kappa j_II``), giving
  the law of the projection of the original process.

Path weights accumulated along reduced paths (Ito, left-point):

* Girsanov, stochastic form:
  ``-1/8 mu^2 kappa int G^H_AB v^A v^B dt - 1/2 mu sqrt(kappa) int G^H_AB v^A X^B dw``
  with ``v = -1/2 G^{-1} N^T d ln det gamma``;
* the same factor after the Ito identity:
  ``1/4 ln(det gamma_T / det gamma_0) - 1/8 mu^2 kappa int Jtilde dt``.

Random numbers: paths are grouped in fixed blocks of ``block_size``; block
``k`` of stream ``s`` draws from ``PCG64(SeedSequence(seed, spawn_key=(s, k)))``.
A path's increments therefore depend only on ``(seed, stream, path index)``,
never on how a run is batched.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .bundle import BundleSpec, local_frame, project_to_surface, check_on_surface
from .errors import ChartExitError, ConfigError, UnsupportedOperationError
from .tensor_core import DEFAULT_FD, FDConfig, SmoothField, curvature_fd, derivative

ein = np.einsum

#: largest tolerated fraction of paths leaving the chart
MAX_TRUNCATED_FRACTION = 0.01
#: residual of the gauge condition tolerated along reduced paths
PATH_CHI_TOL = 1e-8


@dataclass(frozen=True)
class SDEConfig:
    """Diffusion and Monte Carlo settings.

    ``mu2kappa`` is the diffusion scale ``mu^2 kappa`` (``mu^2 = hbar/m``).
    ``potential`` is an optional batched callable ``V(Q)``; it enters the
    Feynman-Kac weight as ``exp(int V dt / (mu^2 kappa m))``.
    """

    mu2kappa: float = 1.0
    dt: float = 1e-2
    n_steps: int = 50
    n_paths: int = 1000
    rng_seed: int = 0
    potential: Optional[Callable] = None
    mass: float = 1.0
    block_size: int = 1024
    batch_size: int = 8192
    fd: FDConfig = DEFAULT_FD

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigError("dt must be positive")
        if not (np.isfinite(self.mu2kappa) and self.mu2kappa > 0):
            raise ConfigError("mu2kappa must be positive")
        if not self.mass > 0:
            raise ConfigError("mass must be positive")
        for name in ("n_steps", "n_paths", "block_size", "batch_size"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if int(self.rng_seed) != self.rng_seed or self.rng_seed < 0:
            raise ConfigError("rng_seed must be a non-negative integer")

    @property
    def t_final(self) -> float:
        return self.n_steps * self.dt

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.mu2kappa))


# ---------------------------------------------------------------------------
# noise
# ---------------------------------------------------------------------------


def _block_normals(seed, stream, block, size, n_steps, dim):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.PCG64(ss)).standard_normal((size, n_steps, dim))


def wiener_increments(cfg: SDEConfig, dim: int, start: int = 0, stop: Optional[int] = None,
                      stream: int = 0):
    """Increments ``dw`` of paths ``start..stop-1``, shape ``(paths, n_steps, dim)``, variance ``dt``."""
    stop = cfg.n_paths if stop is None else stop
    B = cfg.block_size
    out = np.empty((stop - start, cfg.n_steps, dim))
    for k in range(start // B, (stop - 1) // B + 1):
        lo, hi = max(start, k * B), min(stop, (k + 1) * B)
        z = _block_normals(cfg.rng_seed, stream, k, B, cfg.n_steps, dim)
        out[lo - start:hi - start] = z[lo - k * B:hi - k * B]
    return out * np.sqrt(cfg.dt)


def coarsen_increments(dW, factor: int):
    """Sum consecutive groups of ``factor`` increments (shared-noise refinement)."""
    dW = np.asarray(dW)
    p, m, d = dW.shape
    if m % factor:
        raise ValueError("number of steps must be divisible by the coarsening factor")
    return dW.reshape(p, m // factor, factor, d).sum(axis=2)


# ---------------------------------------------------------------------------
# coefficients
# ---------------------------------------------------------------------------


def original_drift(b: BundleSpec, Q, mu2kappa: float = 1.0):
    """``1/2 mu^2 kappa (d_B G^{AB} + 1/2 G^{AB} d_B ln det G)`` (Laplace-Beltrami drift)."""
    Q = np.asarray(Q, dtype=float)
    G = b.metric(Q)
    Gi = np.linalg.inv(G)
    dG = b.metric.derivative(Q)  # [C, D, B]
    div = -ein("...ac,...cdb,...db->...a", Gi, dG, Gi)
    dlog = ein("...cd,...cdb->...b", Gi, dG)
    return 0.5 * mu2kappa * (div + 0.5 * ein("...ab,...b->...a", Gi, dlog))


def _gamma_log_gradient(b: BundleSpec, Q, f):
    """``d_E ln det gamma`` reusing an evaluated frame."""
    dG, dK = b.metric.derivative(Q), b.killing.derivative(Q)
    t = ein("...ame,...ab,...bn->...mne", dK, f.G, f.K)
    dgamma = t + np.swapaxes(t, -2, -3) + ein("...am,...abe,...bn->...mne", f.K, dG, f.K)
    return ein("...mn,...mne->...e", f.gamma_inv, dgamma)


@dataclass(frozen=True)
class ReducedCoefficients:
    """Everything the reduced dynamics needs at a batch of surface points."""

    frame: object
    X: np.ndarray        # Cholesky factor of G^{-1}
    s: np.ndarray        # d ln det gamma
    dN: np.ndarray       # [A, B, D] = d_D N^A_B
    HG: np.ndarray       # horizontal Christoffel representative [B, C, D]
    ds: Optional[np.ndarray] = None  # [B, A] = d_A s_B

    def drift_sigma(self, mu2kappa):
        f = self.frame
        return 0.5 * mu2kappa * (ein("...bd,...abd->...a", f.h, self.dN)
                                 - ein("...ac,...bd,...cbd->...a", f.N, f.h, self.HG))

    def j_II(self):
        return 0.25 * ein("...ab,...b->...a", self.frame.h, self.s)

    def v(self):
        f = self.frame
        return -0.5 * ein("...ab,...cb,...c->...a", f.Gi, f.N, self.s)

    def j_I(self):
        f = self.frame
        return 0.5 * (ein("...bd,...abd->...a", f.h, self.dN) + ein("...bd,...abd->...a", f.h, self.HG)
                      - ein("...bd,...ac,...cbd->...a", f.h, f.N, self.HG))

    def jtilde(self):
        if self.ds is None:
            raise ValueError("coefficients were computed without d s")
        f, s = self.frame, self.s
        ta = 0.25 * ein("...ae,...a,...e->...", f.h, s, s)
        tb = ein("...ab,...ba->...", f.h, self.ds)
        vec = (ein("...ca,...fa,...bcf->...b", f.Gi, f.N, self.dN)
               - ein("...ac,...ea,...bm,...mec->...b", f.Gi, f.N, f.N, self.HG))
        return ta + tb + ein("...b,...b->...", vec, s)


def reduced_coefficients(b: BundleSpec, Q, fd: FDConfig = DEFAULT_FD, with_ds: bool = True) -> ReducedCoefficients:
    """Reduced-SDE coefficients at a batch of points from one batched stencil.

    ``N``, ``G^H`` and ``s`` are packed into one array and differentiated
    together, so a step costs a single stencil evaluation of the frame.
    """
    Q = np.asarray(Q, dtype=float)
    n = b.n_p
    f = local_frame(b, Q)
    s = _gamma_log_gradient(b, Q, f)

    def pack(q):
        fq = local_frame(b, q)
        parts = [fq.N.reshape(q.shape[:-1] + (n * n,)), fq.GH.reshape(q.shape[:-1] + (n * n,))]
        if with_ds:
            parts.append(_gamma_log_gradient(b, q, fq))
        return np.concatenate(parts, axis=-1)

    D = derivative(pack, Q, fd, b.domain)  # [k, E]
    batch = Q.shape[:-1]
    dN = D[..., : n * n, :].reshape(batch + (n, n, n))
    dGH = D[..., n * n: 2 * n * n, :].reshape(batch + (n, n, n))  # [A, C, D] = d_D GH_AC
    ds = D[..., 2 * n * n:, :] if with_ds else None
    low = 0.5 * (dGH + np.swapaxes(dGH, -1, -2) - ein("...cda->...acd", dGH))
    HG = ein("...bs,...se,...ecd->...bcd", f.N, f.Gi, low)
    X = np.linalg.cholesky(f.Gi)
    return ReducedCoefficients(f, X, s, dN, HG, ds)


# ---------------------------------------------------------------------------
# path simulation
# ---------------------------------------------------------------------------


@dataclass
class PathSample:
    """A batch of discretised trajectories.

    ``states`` has shape ``(paths, recorded, n)`` (all steps when recorded,
    otherwise start and end).  ``dw`` holds the Wiener increments when
    recorded.  Log-weights are per path; reduced-only fields are ``None`` for
    original paths.  Truncated paths (chart exit) are frozen at their last
    in-chart state, flagged in ``alive`` and carry their exit step.
    """

    kind: str
    times: np.ndarray
    states: np.ndarray
    dw: Optional[np.ndarray]
    potential_integral: np.ndarray
    alive: np.ndarray
    exit_step: np.ndarray
    log_girsanov_stochastic: Optional[np.ndarray] = None
    jtilde_integral: Optional[np.ndarray] = None
    log_det_gamma: Optional[np.ndarray] = None  # (paths, 2): start and end
    max_chi: float = 0.0
    mu2kappa: float = 1.0

    @property
    def end(self):
        return self.states[:, -1]

    @property
    def start(self):
        return self.states[:, 0]

    @property
    def n_truncated(self) -> int:
        return int(np.count_nonzero(~self.alive))


def _prepare_start(start, n_paths, n):
    Q0 = np.asarray(start, dtype=float)
    if Q0.ndim == 1:
        Q0 = np.broadcast_to(Q0, (n_paths, n))
    if Q0.shape != (n_paths, n):
        raise ValueError(f"start must have shape ({n},) or ({n_paths}, {n})")
    return np.array(Q0)


def _potential(cfg, Q):
    if cfg.potential is None:
        return np.zeros(Q.shape[:-1])
    return np.asarray(cfg.potential(Q), dtype=float)


def _resolve_noise(b, cfg, dW, noise, n_paths, start_index, stream):
    if dW is not None:
        dW = np.asarray(dW, dtype=float)
        if dW.shape != (n_paths, cfg.n_steps, b.n_p):
            raise ValueError(f"dW must have shape {(n_paths, cfg.n_steps, b.n_p)}")
        return dW
    if not noise:
        return np.zeros((n_paths, cfg.n_steps, b.n_p))
    return wiener_increments(cfg, b.n_p, start_index, start_index + n_paths, stream)


def simulate_original(b: BundleSpec, cfg: SDEConfig, start, *, dW=None, noise: bool = True,
                      record: bool = True, stream: int = 0, path_offset: int = 0) -> PathSample:
    """Euler-Maruyama paths of the Laplace-Beltrami diffusion on the bundle chart.

    ``start`` is one point or one point per path.  ``dW`` overrides the
    generated increments (shape ``(paths, n_steps, n_p)``).
    """
    n = b.n_p
    n_paths = cfg.n_paths if np.asarray(start).ndim == 1 else np.asarray(start).shape[0]
    Q = _prepare_start(start, n_paths, n)
    b.require_chart(Q)
    dW = _resolve_noise(b, cfg, dW, noise, n_paths, path_offset, stream)
    alive = np.ones(n_paths, dtype=bool)
    exit_step = np.full(n_paths, -1)
    vint = np.zeros(n_paths)
    rec = [Q.copy()]
    sig = cfg.sigma
    for k in range(cfg.n_steps):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        q = Q[idx]
        vint[idx] += _potential(cfg, q) * cfg.dt
        X = np.linalg.cholesky(np.linalg.inv(b.metric(q)))
        qn = q + original_drift(b, q, cfg.mu2kappa) * cfg.dt + sig * ein("...ab,...b->...a", X, dW[idx, k])
        ok = b.in_chart(qn) & np.all(np.isfinite(qn), axis=-1)
        Q[idx[ok]] = qn[ok]
        alive[idx[~ok]] = False
        exit_step[idx[~ok]] = k
        if record:
            rec.append(Q.copy())
    if not record:
        rec.append(Q.copy())
    times = cfg.dt * np.arange(cfg.n_steps + 1) if record else np.array([0.0, cfg.t_final])
    return PathSample("original", times, np.stack(rec, axis=1), dW if record else None, vint, alive,
                      exit_step, mu2kappa=cfg.mu2kappa)


_DRIFTS = ("sigma", "projected", "none")


def simulate_reduced(b: BundleSpec, cfg: SDEConfig, start, *, dW=None, noise: bool = True,
                     drift: str = "sigma", record: bool = True, stream: int = 0,
                     path_offset: int = 0, with_jtilde: bool = True) -> PathSample:
    """Euler-Maruyama paths on the gauge surface with Newton re-projection.

    ``drift``: ``"sigma"`` (default, weights supplied by the Girsanov factor),
    ``"projected"`` (adds the orbit mean curvature, no reweighting needed) or
    ``"none"`` (diagnostic).  With ``noise=False`` and ``drift="none"`` the
    path is frozen and the log-weights reduce to their time integrals.
    """
    if drift not in _DRIFTS:
        raise ValueError(f"drift must be one of {_DRIFTS}")
    n = b.n_p
    n_paths = cfg.n_paths if np.asarray(start).ndim == 1 else np.asarray(start).shape[0]
    Q = _prepare_start(start, n_paths, n)
    b.require_chart(Q)
    check_on_surface(b, Q, PATH_CHI_TOL)
    dW = _resolve_noise(b, cfg, dW, noise, n_paths, path_offset, stream)
    alive = np.ones(n_paths, dtype=bool)
    exit_step = np.full(n_paths, -1)
    vint = np.zeros(n_paths)
    stoch = np.zeros(n_paths)
    jint = np.zeros(n_paths)
    ldg = np.zeros((n_paths, 2))
    ldg[:, 0] = np.log(np.linalg.det(local_frame(b, Q).gamma))
    rec = [Q.copy()]
    sig, m2k, dt = cfg.sigma, cfg.mu2kappa, cfg.dt
    max_chi = 0.0
    for k in range(cfg.n_steps):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        q = Q[idx]
        c = reduced_coefficients(b, q, cfg.fd, with_ds=with_jtilde)
        f = c.frame
        vint[idx] += _potential(cfg, q) * dt
        xdw = ein("...ab,...b->...a", c.X, dW[idx, k])
        v = c.v()
        Ghv = ein("...ab,...b->...a", f.GH, v)
        stoch[idx] += -0.125 * m2k * ein("...a,...a->...", Ghv, v) * dt - 0.5 * sig * ein("...a,...a->...", Ghv, xdw)
        if with_jtilde:
            jint[idx] += c.jtilde() * dt
        a = np.zeros_like(q)
        if drift != "none":
            a = c.drift_sigma(m2k)
            if drift == "projected":
                a = a + m2k * c.j_II()
        qn = q + a * dt + sig * ein("...ab,...b->...a", f.N, xdw)
        ok = b.in_chart(qn) & np.all(np.isfinite(qn), axis=-1)
        if np.any(ok):
            qp = project_to_surface(b, qn[ok], step=k)
            inside = b.in_chart(qp)
            sel = idx[ok][inside]
            Q[sel] = qp[inside]
            bad = np.concatenate([idx[~ok], idx[ok][~inside]])
            if sel.size:
                max_chi = max(max_chi, float(np.max(np.abs(b.gauge(Q[sel])))))
        else:
            bad = idx
        alive[bad] = False
        exit_step[bad] = k
        if record:
            rec.append(Q.copy())
    if not record:
        rec.append(Q.copy())
    ldg[:, 1] = np.log(np.linalg.det(local_frame(b, Q).gamma))
    times = cfg.dt * np.arange(cfg.n_steps + 1) if record else np.array([0.0, cfg.t_final])
    return PathSample("reduced", times, np.stack(rec, axis=1), dW if record else None, vint, alive,
                      exit_step, stoch, jint if with_jtilde else None, ldg, max_chi, m2k)


def girsanov_log_factor(path: PathSample, form: str = "stochastic"):
    """Per-path log Girsanov factor of a reduced path sample.

    ``"stochastic"``: the dw-integral form; ``"ito"``: the form obtained from
    the Ito identity, ``1/4 ln(det gamma_T / det gamma_0) - 1/8 mu^2 kappa int Jtilde dt``.
    """
    if path.kind != "reduced":
        raise UnsupportedOperationError("Girsanov factors exist only for reduced paths")
    if form == "stochastic":
        if path.log_girsanov_stochastic is None:
            raise ValueError("path sample carries no recorded Wiener increments")
        return path.log_girsanov_stochastic
    if form == "ito":
        if path.jtilde_integral is None:
            raise ValueError("path sample was simulated without the Jtilde integral")
        return 0.25 * (path.log_det_gamma[:, 1] - path.log_det_gamma[:, 0]) - 0.125 * path.mu2kappa * path.jtilde_integral
    raise ValueError("form must be 'stochastic' or 'ito'")


def ito_identity_gaps(b: BundleSpec, cfg: SDEConfig, start, factors=(16, 4, 1)):
    """Median pathwise gap ``|stochastic - ito|`` of the log Girsanov factor under refinement.

    ``cfg`` describes the finest grid; its increments are summed in groups of
    each ``factor`` so that every resolution sees the same Brownian paths.
    Returns ``[(dt, median_gap, n_alive), ...]`` in the order of ``factors``.
    """
    start = np.asarray(start, dtype=float)
    fine = wiener_increments(cfg, b.n_p)
    out = []
    for k in factors:
        if cfg.n_steps % k:
            raise ValueError(f"n_steps = {cfg.n_steps} is not divisible by {k}")
        sub = replace(cfg, dt=cfg.dt * k, n_steps=cfg.n_steps // k)
        p = simulate_reduced(b, sub, start, dW=coarsen_increments(fine, k), record=False, with_jtilde=True)
        gap = np.abs(girsanov_log_factor(p, "stochastic") - girsanov_log_factor(p, "ito"))[p.alive]
        out.append((sub.dt, float(np.median(gap)), int(p.alive.sum())))
    return out


# ---------------------------------------------------------------------------
# Green's-function pairings
# ---------------------------------------------------------------------------


@dataclass
class GreenEstimate:
    """Monte Carlo estimate of ``<f, G>`` with its standard error.

    ``variants`` holds alternative normalisations computed from the same
    paths (see :func:`estimate_green`).
    """

    value: float
    standard_error: float
    n_paths: int
    test_function: str
    kind: str
    n_truncated: int = 0
    n_excluded: int = 0
    variants: dict = field(default_factory=dict)
    seed: int = 0

    def z_score(self, reference: float) -> float:
        return (self.value - reference) / self.standard_error if self.standard_error > 0 else (
            0.0 if self.value == reference else np.inf)

    def to_dict(self):
        return {"kind": self.kind, "test_function": self.test_function, "value": self.value,
                "standard_error": self.standard_error, "n_paths": self.n_paths,
                "n_truncated": self.n_truncated, "n_excluded": self.n_excluded,
                "seed": self.seed, **{f"variant_{k}": v for k, v in self.variants.items()}}


_KINDS = ("original", "reduced_sigma", "reduced_M")


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        m = float(np.mean(x))
        se = float(np.std(x, ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
    return m, se


def _fn_name(f):
    return getattr(f, "name", None) or getattr(f, "__name__", None) or type(f).__name__


def path_contributions(b: BundleSpec, cfg: SDEConfig, kind: str, starts, f, *, stream: int = 0,
                       path_offset: int = 0):
    """Per-path contributions ``f(end) * weight`` for a batch of starts.

    Returns ``(primary, variants, alive)`` where ``variants`` maps a name to
    per-path contributions of an alternative normalisation computed on the
    same paths.  Truncated paths contribute zero.  For ``original`` the end
    point is first moved along its orbit onto Sigma.
    """
    starts = np.asarray(starts, dtype=float)
    if kind == "original":
        p = simulate_original(b, cfg, starts, record=False, stream=stream, path_offset=path_offset)
        alive = p.alive
        end = project_to_surface(b, p.end)
        val = np.asarray(f(end), dtype=float) * np.exp(p.potential_integral / (cfg.mu2kappa * cfg.mass))
        ratio = np.linalg.det(local_frame(b, starts).gamma) / np.linalg.det(local_frame(b, p.end).gamma)
        primary, variants = val, {"M_normalised": val * ratio**0.25}
    elif kind in ("reduced_sigma", "reduced_M"):
        literal = kind == "reduced_M"
        p = simulate_reduced(b, cfg, starts, record=False, stream=stream, path_offset=path_offset,
                             with_jtilde=literal)
        alive = p.alive
        fk = p.potential_integral / (cfg.mu2kappa * cfg.mass)
        val = np.asarray(f(p.end), dtype=float)
        girsanov = val * np.exp(fk + girsanov_log_factor(p, "stochastic"))
        if kind == "reduced_sigma":
            primary, variants = girsanov, {}
        else:
            dlog = p.log_det_gamma[:, 1] - p.log_det_gamma[:, 0]
            # exp(-1/8 mu^2 kappa int Jtilde) = exp(Girsanov) (gamma_0/gamma_T)^{1/4} by the Ito identity
            primary = girsanov * np.exp(-0.25 * dlog)
            with np.errstate(over="ignore"):
                lit = val * np.exp(fk - 0.125 * cfg.mu2kappa * p.jtilde_integral)
            variants = {"jtilde_literal": lit, "sigma_normalised": girsanov}
    else:
        raise ValueError(f"kind must be one of {_KINDS}")
    primary = np.where(alive, primary, 0.0)
    variants = {k: np.where(alive, v, 0.0) for k, v in variants.items()}
    return primary, variants, alive


def _run(b, cfg, kind, starts_fn, f, stream, weights_fn=None):
    prim, var, alive = [], {}, []
    for lo in range(0, cfg.n_paths, cfg.batch_size):
        hi = min(cfg.n_paths, lo + cfg.batch_size)
        sub = replace(cfg, n_paths=hi - lo)
        p_, v_, a_ = path_contributions(b, sub, kind, starts_fn(lo, hi), f, stream=stream, path_offset=lo)
        w = 1.0 if weights_fn is None else weights_fn(lo, hi)
        prim.append(p_ * w)
        for k, v in v_.items():
            var.setdefault(k, []).append(v * w)
        alive.append(a_)
    prim, alive = np.concatenate(prim), np.concatenate(alive)
    n_trunc = int(np.count_nonzero(~alive))
    if n_trunc > MAX_TRUNCATED_FRACTION * cfg.n_paths:
        raise ChartExitError(f"{n_trunc} of {cfg.n_paths} paths left the chart "
                             f"(limit {MAX_TRUNCATED_FRACTION:.0%})")
    finite = np.isfinite(prim)
    variants = {}
    for k, v in var.items():
        v = np.concatenate(v)
        ok = np.isfinite(v)
        m, se = _mean_se(v[ok]) if ok.any() else (float("nan"), float("nan"))
        variants[k] = m
        variants[k + "_se"] = se
        if not ok.all():
            variants[k + "_excluded"] = int(np.count_nonzero(~ok))
    return prim[finite], variants, n_trunc, int(np.count_nonzero(~finite))


def estimate_green(b: BundleSpec, cfg: SDEConfig, kind: str, start, f, *, stream: int = 0) -> GreenEstimate:
    """Weak pairing ``E[f(end) * weight]`` over ``cfg.n_paths`` paths from ``start``.

    kinds
      ``original``      bundle diffusion, end point moved onto Sigma, weight = Feynman-Kac;
      ``reduced_sigma`` reduced diffusion, weight = Feynman-Kac x Girsanov (stochastic form);
      ``reduced_M``     reduced diffusion, weight = Feynman-Kac x exp(-1/8 mu^2 kappa int Jtilde).

    The ``reduced_M`` weight is evaluated through the Ito identity as
    Girsanov x ``(det gamma_0 / det gamma_T)^{1/4}``: the literal time integral
    can have infinite variance (on the punctured plane ``-Jtilde/8 = 1/(8 r^2)``
    is the critical Hardy potential), while the Girsanov form is bounded near
    the orbit singularity.  ``variants`` records the other normalisations from
    the same paths: ``jtilde_literal`` and ``sigma_normalised`` for
    ``reduced_M``, ``M_normalised`` (with ``(det gamma_0/det gamma_T)^{1/4}``)
    for ``original``.  Truncated paths count as zero; non-finite weights are
    excluded and counted.
    """
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}")
    start = np.asarray(start, dtype=float)
    prim, variants, n_trunc, n_bad = _run(b, cfg, kind, lambda lo, hi: np.broadcast_to(start, (hi - lo, b.n_p)),
                                          f, stream)
    m, se = _mean_se(prim)
    return GreenEstimate(m, se, int(prim.size), _fn_name(f), kind, n_trunc, n_bad, variants, cfg.rng_seed)


@dataclass
class ReductionCheck:
    """Both sides of the reduction relation and their agreement."""

    reduced: GreenEstimate
    group_averaged: GreenEstimate
    residual: float
    sigma: float
    oracle: Optional[float] = None

    @property
    def z(self) -> float:
        return self.residual / self.sigma if self.sigma > 0 else 0.0

    def z_oracle(self, which: str = "reduced") -> float:
        if self.oracle is None:
            return float("nan")
        est = self.reduced if which == "reduced" else self.group_averaged
        return est.z_score(self.oracle)

    def to_dict(self):
        return {"reduced": self.reduced.to_dict(), "group_averaged": self.group_averaged.to_dict(),
                "residual": self.residual, "sigma": self.sigma, "z": self.z, "oracle": self.oracle,
                "z_oracle_reduced": self.z_oracle("reduced"),
                "z_oracle_group_averaged": self.z_oracle("group_averaged")}


def verify_reduction_relation(b: BundleSpec, cfg: SDEConfig, start, f, *, n_nodes: int = 16,
                              oracle: Optional[float] = None, kind: str = "reduced_sigma") -> ReductionCheck:
    """Compare the reduced pairing from ``start`` with the group average of original pairings.

    The original side starts from ``F(start, a_k)`` at the nodes ``a_k`` of the
    group chart's Haar quadrature; paths are assigned to nodes round-robin
    and reweighted by ``n_nodes_used * w_k``.  The reduced side uses an
    independent random stream.  With ``kind="reduced_M"`` the original side
    uses its ``M_normalised`` contributions.
    """
    if kind not in ("reduced_sigma", "reduced_M"):
        raise ValueError("kind must be 'reduced_sigma' or 'reduced_M'")
    chart = b.group_chart
    if chart is None or chart.action is None:
        raise UnsupportedOperationError("the reduction relation needs a group chart with an action")
    start = np.asarray(start, dtype=float)
    check_on_surface(b, start)
    nodes, weights = chart.quadrature(n_nodes)
    m = nodes.shape[0]
    node_starts = chart.action(np.broadcast_to(start, (m, b.n_p)), nodes)

    lhs = estimate_green(b, cfg, kind, start, f, stream=0)
    idx = lambda lo, hi: np.arange(lo, hi) % m
    wfn = lambda lo, hi: m * weights[idx(lo, hi)]
    prim, variants, n_trunc, n_bad = _run(b, cfg, "original", lambda lo, hi: node_starts[idx(lo, hi)], f, 1,
                                          weights_fn=wfn)
    if kind == "reduced_sigma":
        mval, se = _mean_se(prim)
    else:  # same paths, M-normalised contributions
        mval, se = variants["M_normalised"], variants["M_normalised_se"]
    rhs = GreenEstimate(mval, se, int(prim.size), _fn_name(f), "group_averaged_original", n_trunc, n_bad,
                        {}, cfg.rng_seed)
    residual = lhs.value - rhs.value
    sigma = float(np.hypot(lhs.standard_error, rhs.standard_error))
    return ReductionCheck(lhs, rhs, residual, sigma, oracle)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def _as_scalar_field(psi, n):
    if isinstance(psi, SmoothField):
        return psi
    return SmoothField(psi, n, ())


def _grad_hess(b, psi, Q):
    g = psi.derivative(Q)
    H = derivative(lambda q: psi.derivative(q), Q, curvature_fd(), b.domain)
    return g, 0.5 * (H + np.swapaxes(H, -1, -2))


def apply_generator(b: BundleSpec, psi, Qs, which: str = "op2", cfg: Optional[SDEConfig] = None):
    """Apply the reduced generator to ``psi`` at surface points ``Qs``.

    ``op2``: ``1/2 mu^2 kappa (h d^2 psi - h HG d psi + 2 (j_I + j_II) d psi) + V psi / (mu^2 kappa m)``
    (the generator of the projected diffusion);
    ``op3``: ``1/2 mu^2 kappa (h d^2 psi - h HG d psi + 2 j_I d psi) - 1/8 mu^2 kappa Jtilde psi + V psi / (mu^2 kappa m)``.
    """
    cfg = cfg or SDEConfig()
    if which not in ("op2", "op3"):
        raise ValueError("which must be 'op2' or 'op3'")
    Qs = np.asarray(Qs, dtype=float)
    check_on_surface(b, Qs)
    psi = _as_scalar_field(psi, b.n_p)
    c = reduced_coefficients(b, Qs, curvature_fd(), with_ds=(which == "op3"))
    f = c.frame
    g, H = _grad_hess(b, psi, Qs)
    val = psi(Qs)
    drift = -ein("...bd,...abd->...a", f.h, c.HG) + 2 * c.j_I()
    if which == "op2":
        drift = drift + 2 * c.j_II()
    out = 0.5 * cfg.mu2kappa * (ein("...ab,...ab->...", f.h, H) + ein("...a,...a->...", drift, g))
    if which == "op3":
        out = out - 0.125 * cfg.mu2kappa * c.jtilde() * val
    return out + _potential(cfg, Qs) * val / (cfg.mu2kappa * cfg.mass)


def semigroup_derivative(b: BundleSpec, cfg: SDEConfig, Qs, psi, which: str = "op2") -> GreenEstimate:
    """One-step estimate of ``(E[psi(xi_dt) w] - psi(Q*)) / dt``.

    ``op2`` uses the projected diffusion, ``op3`` the Sigma diffusion with
    weight ``exp(-1/8 mu^2 kappa Jtilde dt)``; both include the Feynman-Kac
    factor.  The martingale part ``d psi . noise`` (mean zero) is subtracted
    as a control variate, which leaves the mean unchanged.
    """
    Qs = np.asarray(Qs, dtype=float)
    psi = _as_scalar_field(psi, b.n_p)
    one = replace(cfg, n_steps=1)
    drift = "projected" if which == "op2" else "sigma"
    vals = []
    for lo in range(0, cfg.n_paths, cfg.batch_size):
        hi = min(cfg.n_paths, lo + cfg.batch_size)
        sub = replace(one, n_paths=hi - lo)
        p = simulate_reduced(b, sub, Qs, drift=drift, record=True, path_offset=lo,
                             with_jtilde=(which == "op3"))
        c = reduced_coefficients(b, Qs[None], cfg.fd, with_ds=False)
        noise = cfg.sigma * ein("ab,bc,pc->pa", c.frame.N[0], c.X[0], p.dw[:, 0])
        logw = p.potential_integral / (cfg.mu2kappa * cfg.mass)
        if which == "op3":
            logw = logw - 0.125 * cfg.mu2kappa * p.jtilde_integral
        psi0 = float(psi(Qs))
        g = psi.derivative(Qs)
        est = (psi(p.end) * np.exp(logw) - psi0 - noise @ g) / cfg.dt
        vals.append(np.where(p.alive, est, np.nan))
    vals = np.concatenate(vals)
    vals = vals[np.isfinite(vals)]
    m, se = _mean_se(vals)
    return GreenEstimate(m, se, int(vals.size), _fn_name(psi.func), f"semigroup_{which}", seed=cfg.rng_seed)


# ---------------------------------------------------------------------------
# closed-form references
# ---------------------------------------------------------------------------


def wrapped_gaussian_pairing(f, x0: float, variance: float, period: float = 2 * np.pi, n_quad: int = 256,
                             n_images: int = 8):
    """``int_0^period f(x) p(x) dx`` for the wrapped Gaussian started at ``x0``."""
    x = np.linspace(0.0, period, n_quad, endpoint=False)
    k = np.arange(-n_images, n_images + 1)[:, None]
    p = np.exp(-((x - x0 + k * period) ** 2) / (2 * variance)).sum(axis=0) / np.sqrt(2 * np.pi * variance)
    return float(np.sum(f(x) * p) * period / n_quad)


def radial_heat_kernel_pairing(f, r0: float, variance: float, power: float = 0.0):
    """``int_0^inf f(r) p(r | r0) (r0 / r)^power dr`` for the planar radial heat kernel.

    ``p(r | r0) = r / s exp(-(r^2 + r0^2) / (2 s)) I_0(r r0 / s)``, ``s = variance``;
    this is the circle average of the two-dimensional Gaussian kernel.
    ``power = 1/2`` gives the pairing with the gamma^{1/4}-rescaled kernel.
    """
    from scipy import integrate, special

    def integrand(r):
        z = r * r0 / variance
        # I_0(z) exp(-(r^2 + r0^2)/2s) = ive(0, z) exp(-(r - r0)^2 / 2s)
        p = r / variance * special.ive(0, z) * np.exp(-((r - r0) ** 2) / (2 * variance))
        return f(np.asarray(r)) * p * (r0 / r) ** power

    upper = r0 + 12 * np.sqrt(variance)
    val, _ = integrate.quad(integrand, 0.0, upper, limit=200, epsabs=1e-13, epsrel=1e-12)
    return float(val)
