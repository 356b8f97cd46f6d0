"""Pure numpy batch evaluation of log|D| (fallback for the compiled kernel)."""

from __future__ import annotations

import numpy as np


def _spinors(points: np.ndarray, real: bool) -> np.ndarray:
    b, n, d = points.shape
    diff = points[:, None, :, :] - points[:, :, None, :]
    dist = np.linalg.norm(diff, axis=3)
    idx = np.arange(n)
    dist[:, idx, idx] = 1.0
    x = diff / dist[..., None]
    if real:
        x1, x2 = x[..., 0], x[..., 1]
        lower = x2 <= 0.0
        a = np.where(lower, 1.0, x1 / (1.0 + np.where(lower, 0.0, x2)))
        c = np.where(lower, x1 / (1.0 - np.where(lower, x2, 0.0)), 1.0)
        u = np.stack([a, c], axis=-1).astype(complex)
    else:
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        lower = x3 <= 0.0
        z = (x1 + 1j * x2) / (1.0 - np.where(lower, x3, 0.0))
        w = (x1 - 1j * x2) / (1.0 + np.where(lower, 0.0, x3))
        u = np.stack([np.where(lower, 1.0, w), np.where(lower, z, 1.0)], axis=-1)
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    return u, dist


def _line_matrices(u: np.ndarray) -> np.ndarray:
    b, n = u.shape[:2]
    # poly[b, i, m]: coefficient of X^(deg-m) Y^m of v_i
    poly = np.zeros((b, n, n), dtype=complex)
    poly[:, :, 0] = 1.0
    idx = np.arange(n)
    for j in range(n):
        u0 = u[:, :, j, 0][..., None]
        u1 = u[:, :, j, 1][..., None]
        nxt = u0 * poly
        nxt[:, :, 1:] += u1 * poly[:, :, :-1]
        keep = idx == j
        nxt[:, keep, :] = poly[:, keep, :]
        poly = nxt
    return np.transpose(poly, (0, 2, 1))


def batch_eval(points, real: bool = False, eps_sep: float = 1e-9):
    """Return ``(log_abs_D, arg_D, rcond)`` arrays for a batch of configurations.

    ``points`` has shape ``(B, n, d)``; ``d`` is 3 for the complex case and
    2 for the real case.  Configurations with a pair closer than
    ``eps_sep * diameter`` get NaN in all three outputs.
    """
    pts = np.ascontiguousarray(points, dtype=float)
    b, n, d = pts.shape
    if n < 2:
        raise ValueError("need at least two points")
    if d != (2 if real else 3):
        raise ValueError(f"points of dim {d} for the {'real' if real else 'complex'} kernel")
    u, dist = _spinors(pts, real)
    iu, ju = np.triu_indices(n, k=1)
    pd = dist[:, iu, ju]
    bad = pd.min(axis=1) < eps_sep * pd.max(axis=1)

    a = _line_matrices(u)
    sign, logabs = np.linalg.slogdet(a)
    pair = u[:, iu, ju, 0] * u[:, ju, iu, 1] - u[:, iu, ju, 1] * u[:, ju, iu, 0]
    log_abs = logabs - np.sum(np.log(np.abs(pair)), axis=1)
    arg = np.angle(sign) - np.sum(np.angle(pair), axis=1)
    arg = np.remainder(arg + np.pi, 2 * np.pi) - np.pi

    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.real(np.linalg.cond(a, 1))
    rcond = np.where(np.isfinite(cond), 1.0 / cond, 0.0)
    log_abs[bad] = arg[bad] = rcond[bad] = np.nan
    return log_abs, arg, rcond
