"""Dense arrays, finite differences and the small linear-algebra kernel.

Every indexed object in the library is a plain ``numpy.ndarray``.  Fields
are evaluated on batches: a point array of shape ``(..., n)`` maps to an
output of shape ``(..., *codomain)``, so the same code serves single-point
geometry and vectorised Monte Carlo.

Derivatives are appended as a trailing axis: ``derivative(f, Q)[..., i]``
is ``df/dQ^i``.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    ChartExitError,
    NonFiniteFieldError,
    NotPositiveDefiniteError,
    SingularMatrixError,
)

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FDConfig:
    """Finite-difference settings.

    ``step`` is relative: the actual step along coordinate i is
    ``step * max(1, |Q^i|)``.  With ``richardson`` the central difference
    at h and h/2 is combined into a fourth-order estimate (same accuracy
    as the five-point stencil).
    """

    step: float = 1e-5
    richardson: bool = False

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("finite-difference step must be positive")


#: first derivatives of user fields
DEFAULT_FD = FDConfig()
#: derivatives of composite quantities that may themselves be finite differences
CURVATURE_FD = FDConfig(step=1e-3, richardson=True)

_CURVATURE_FD_STACK = [CURVATURE_FD]


def curvature_fd() -> FDConfig:
    """Finite-difference settings currently used for composite derivatives."""
    return _CURVATURE_FD_STACK[-1]


@contextmanager
def curvature_fd_override(cfg: FDConfig):
    """Temporarily replace :data:`CURVATURE_FD` (process-wide, not thread-local)."""
    _CURVATURE_FD_STACK.append(cfg)
    try:
        yield cfg
    finally:
        _CURVATURE_FD_STACK.pop()


def _check_finite(values, points):
    bad = ~np.isfinite(values)
    if bad.any():
        # locate the first offending stencil point
        lead = bad.reshape(bad.shape[: points.ndim - 1] + (-1,)).any(axis=-1)
        idx = np.argwhere(lead)[0]
        raise NonFiniteFieldError(points[tuple(idx)])


def derivative(f: ArrayFn, Q, cfg: FDConfig = DEFAULT_FD, domain: Optional[ArrayFn] = None):
    """Central-difference Jacobian of a batched field.

    Returns an array of shape ``f(Q).shape + (n,)``.  All stencil points
    are evaluated in one batched call of ``f``.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[-1]
    h = cfg.step * np.maximum(1.0, np.abs(Q))  # (..., n)
    scales = (1.0, 0.5) if cfg.richardson else (1.0,)
    eye = np.eye(n)
    offsets = []
    for s in scales:
        for sign in (1.0, -1.0):
            offsets.append(sign * s * h[..., None, :] * eye)  # (..., n_dir, n)
    offsets = np.stack(offsets, axis=0)  # (k, ..., n_dir, n)
    pts = Q[None, ..., None, :] + offsets
    if domain is not None and not np.all(domain(pts)):
        raise ChartExitError("finite-difference stencil leaves the chart near "
                             f"{Q.reshape(-1, n)[0].tolist()}")
    vals = np.asarray(f(pts), dtype=float)
    _check_finite(vals, pts)
    batch = Q.ndim - 1
    extra = vals.ndim - (batch + 2)
    hh = h.reshape(h.shape + (1,) * extra)  # (..., n_dir, 1, ...)
    diffs = []
    for j, s in enumerate(scales):
        plus, minus = vals[2 * j], vals[2 * j + 1]
        diffs.append((plus - minus) / (2.0 * s * hh))
    D = diffs[0] if len(diffs) == 1 else (4.0 * diffs[1] - diffs[0]) / 3.0
    # D has shape (..., n_dir, *out); move the direction axis last
    return np.moveaxis(D, batch, -1)


def fd_derivative(field: "SmoothField", point, direction: int, order: int = 1):
    """Derivative of ``field`` along one coordinate direction.

    ``order`` 1 gives d/dQ^i, order 2 gives d^2/dQ^i^2.  The three-point
    second difference uses a fixed relative step of 1e-4, where truncation
    and roundoff balance.
    """
    Q = np.asarray(point, dtype=float)
    if order == 1:
        return field.derivative(Q)[..., direction]
    if order != 2:
        raise ValueError("order must be 1 or 2")
    h = 1e-4 * max(1.0, float(np.max(np.abs(Q[..., direction]))))
    e = np.zeros(Q.shape[-1])
    e[direction] = h
    pts = np.stack([Q + e, Q, Q - e])
    vals = np.asarray(field(pts), dtype=float)
    _check_finite(vals, pts)
    return (vals[0] - 2 * vals[1] + vals[2]) / h**2


@dataclass(frozen=True)
class SmoothField:
    """A smooth map from chart points to arrays.

    ``func`` must accept a batch ``(..., dim)`` and return
    ``(..., *shape)``.  ``jacobian`` (optional) returns the exact
    derivative with the direction axis last; finite differences are the
    fallback.
    """

    func: ArrayFn
    dim: int
    shape: tuple = ()
    jacobian: Optional[ArrayFn] = None
    fd: FDConfig = field(default=DEFAULT_FD)

    def __call__(self, Q):
        return np.asarray(self.func(np.asarray(Q, dtype=float)), dtype=float)

    def derivative(self, Q):
        Q = np.asarray(Q, dtype=float)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(Q), dtype=float)
        return derivative(self.func, Q, self.fd)


def as_field(obj, dim, shape=()) -> SmoothField:
    """Wrap a plain callable into a ``SmoothField``."""
    if isinstance(obj, SmoothField):
        return obj
    return SmoothField(obj, dim, tuple(shape))


def sym_factor(M, symmetry_tol: float = 1e-12):
    """Lower-triangular X with X X^T = M for symmetric positive-definite M.

    Works on stacks of matrices.  Raises ``NotPositiveDefiniteError`` when a
    pivot is non-positive (the metric is not positive definite there).
    """
    M = np.asarray(M, dtype=float)
    scale = np.max(np.abs(M), axis=(-1, -2), keepdims=True)
    asym = np.max(np.abs(M - np.swapaxes(M, -1, -2)) / np.where(scale > 0, scale, 1.0))
    if asym > symmetry_tol:
        raise ValueError(f"matrix is not symmetric (relative asymmetry {asym:.2e})")
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("metric is not positive definite at this point") from exc


def inverse_det(M, rel_tol: float = 1e-14):
    """Return ``(inv(M), det(M))``; raise on numerically singular input.

    Singularity is judged by ``|det M| <= rel_tol * scale**n`` with ``scale``
    the largest absolute entry; the error carries the 2-norm condition number.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[-1]
    if n == 1:
        det = M[..., 0, 0]
    elif n == 2:  # closed form: much faster than LAPACK on large stacks of tiny matrices
        det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    else:
        det = np.linalg.det(M)
    scale = np.max(np.abs(M), axis=(-1, -2))
    if np.any(np.abs(det) <= rel_tol * np.maximum(scale, 1e-300) ** n):
        raise SingularMatrixError("matrix is singular", float(np.max(np.linalg.cond(M))))
    if n == 1:
        return 1.0 / M, det
    if n == 2:
        adj = np.empty_like(M)
        adj[..., 0, 0], adj[..., 1, 1] = M[..., 1, 1], M[..., 0, 0]
        adj[..., 0, 1], adj[..., 1, 0] = -M[..., 0, 1], -M[..., 1, 0]
        return adj / det[..., None, None], det
    return np.linalg.inv(M), det
