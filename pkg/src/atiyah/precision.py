"""Extended-precision re-evaluation used to confirm candidate violations.

Everything here runs in mpmath at ``dps`` decimal digits and is written
independently of the double-precision paths: directions, spinors, the
line products and the determinants are all recomputed from the input
coordinates.
"""

from __future__ import annotations

from typing import Sequence

import mpmath as mp
import numpy as np

DEFAULT_DPS = 40


def _spinor(x, real: bool):
    # chart-switched raw representative; D does not depend on its scale
    if real:
        x1, x2 = x
        if x2 <= 0:
            return (mp.mpf(1), x1 / (1 - x2))
        return (x1 / (1 + x2), mp.mpf(1))
    x1, x2, x3 = x
    if x3 <= 0:
        return (mp.mpc(1), mp.mpc(x1, x2) / (1 - x3))
    return (mp.mpc(x1, -x2) / (1 + x3), mp.mpc(1))


def _directions(points) -> list[list]:
    pts = [[mp.mpf(float(v)) for v in p] for p in np.asarray(points, dtype=float)]
    n = len(pts)
    out = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i != j:
                diff = [b - a for a, b in zip(pts[i], pts[j])]
                nrm = mp.sqrt(mp.fsum(d * d for d in diff))
                out[i][j] = [d / nrm for d in diff]
    return out


def _poly_mul_linear(c: list, u) -> list:
    out = [mp.mpf(0)] * (len(c) + 1)
    for m, cm in enumerate(c):
        out[m] += u[0] * cm
        out[m + 1] += u[1] * cm
    return out


def spinor_table(points, real: bool = False, dps: int = DEFAULT_DPS):
    with mp.workdps(dps):
        dirs = _directions(points)
        n = len(dirs)
        return [[None if i == j else _spinor(dirs[i][j], real) for j in range(n)] for i in range(n)]


def D(points, real: bool = False, dps: int = DEFAULT_DPS):
    """D itself, as an mpmath number, by the direct ratio phi / prod phi_I."""
    with mp.workdps(dps):
        u = spinor_table(points, real, dps)
        n = len(u)
        cols = []
        for i in range(n):
            c = [mp.mpf(1)]
            for j in range(n):
                if j != i:
                    c = _poly_mul_linear(c, u[i][j])
            cols.append(c)
        a = mp.matrix(n, n)
        for i in range(n):
            for m in range(n):
                a[m, i] = cols[i][m]
        num = mp.det(a)
        den = mp.mpf(1)
        for i in range(n):
            for j in range(i + 1, n):
                den *= u[i][j][0] * u[j][i][1] - u[i][j][1] * u[j][i][0]
        return num / den


def log_abs_D(points, real: bool = False, dps: int = DEFAULT_DPS) -> float:
    with mp.workdps(dps):
        return float(mp.log(abs(D(points, real, dps))))


def margin_of_rows(rows: Sequence[Sequence], dps: int = DEFAULT_DPS) -> float:
    """Smallest singular value of the row-normalized matrix, in extended precision.

    Rows are coefficient lists already padded to a common length.
    """
    with mp.workdps(dps):
        k = len(rows)
        a = mp.matrix(k, len(rows[0]))
        for r, row in enumerate(rows):
            vals = [mp.mpc(complex(v)) if not isinstance(v, (mp.mpf, mp.mpc)) else v for v in row]
            nrm = mp.sqrt(mp.fsum(abs(v) ** 2 for v in vals))
            for c, v in enumerate(vals):
                a[r, c] = v / nrm
        s = mp.svd_c(a, compute_uv=False)
        return float(min(abs(s[i]) for i in range(len(s))))


def atiyah_margin(points, real: bool = False, dps: int = DEFAULT_DPS) -> float:
    """Independence margin of the Atiyah lines, recomputed at ``dps`` digits."""
    with mp.workdps(dps):
        u = spinor_table(points, real, dps)
        n = len(u)
        rows = []
        for i in range(n):
            c = [mp.mpf(1)]
            for j in range(n):
                if j != i:
                    c = _poly_mul_linear(c, u[i][j])
            rows.append([mp.mpc(v) for v in c])
        return margin_of_rows(rows, dps)


def weighted_margin(directions, weights, state_labels, real: bool = False, dps: int = DEFAULT_DPS) -> float:
    """Margin of structure-map output labels, recomputed at ``dps`` digits.

    ``directions[i][j]`` is the (double) leaf direction between the
    top-level arity-n leaves, ``weights`` the block sizes and
    ``state_labels[i]`` the coefficient vectors of block i.
    """
    with mp.workdps(dps):
        n = len(weights)
        total = sum(weights)
        rows = []
        for i in range(n):
            f = [mp.mpf(1)]
            for j in range(n):
                if j == i:
                    continue
                x = [mp.mpf(float(v)) for v in directions[i][j]]
                s = _spinor(x, real)
                for _ in range(weights[j]):
                    f = _poly_mul_linear(f, s)
            for y in state_labels[i]:
                yv = [mp.mpc(complex(v)) for v in y]
                prod = [mp.mpc(0)] * (len(f) + len(yv) - 1)
                for a_, fa in enumerate(f):
                    for b_, yb in enumerate(yv):
                        prod[a_ + b_] += fa * yb
                prod = [mp.mpc(0)] * (total - len(prod)) + prod
                rows.append(prod)
        return margin_of_rows(rows, dps)
