"""Atiyah lines, the determinant phi and the normalized determinant D.

This is the reference (object-level) evaluation path.  It keeps every
intermediate quantity and produces a :class:`DeterminantReport`.  Batch
evaluation for campaigns lives in :mod:`atiyah.kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import DegreeMismatch, DimMismatch, InvalidArity
from .geometry import EPS_SEP, Configuration, direction_table
from .labels import Label, form_product, normalize_spinor, spinor_det, stereo_complex, stereo_real

#: Reports whose v-matrix has reciprocal condition number below this are flagged.
RCOND_CUTOFF = 1e-13
# log of the smallest normal double
_LOG_TINY = math.log(np.finfo(float).tiny)

LOW_CONFIDENCE = "LOW_CONFIDENCE"
UNDERFLOW = "UNDERFLOW"


@dataclass(frozen=True, eq=False)
class SpinorTable:
    """``entries[i, j]`` is the unit spinor of the direction from point i to j."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        e = np.array(self.entries)
        if e.ndim != 3 or e.shape[0] != e.shape[1] or e.shape[2] != 2:
            raise ValueError(f"spinor table must have shape (n, n, 2), got {e.shape}")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def is_real(self) -> bool:
        return self.entries.dtype.kind == "f"

    def __getitem__(self, ij) -> np.ndarray:
        return self.entries[ij]

    def rescaled(self, scalars: np.ndarray) -> SpinorTable:
        """Multiply entry (i, j) by ``scalars[i, j]``."""
        return SpinorTable(self.entries * np.asarray(scalars)[:, :, None])

    def pair_phi(self, i: int, j: int) -> complex:
        return spinor_det(self.entries[i, j], self.entries[j, i])


def _table(c: Configuration, stereo, eps_sep: float) -> SpinorTable:
    if c.n < 2:
        raise InvalidArity("the Atiyah construction needs at least two points")
    dirs = direction_table(c, eps_sep)
    n = c.n
    dtype = complex if stereo is stereo_complex else float
    e = np.zeros((n, n, 2), dtype=dtype)
    for i in range(n):
        for j in range(n):
            if i != j:
                e[i, j] = normalize_spinor(stereo(dirs[i, j]))
    return SpinorTable(e)


def spinor_table(c: Configuration, eps_sep: float = EPS_SEP) -> SpinorTable:
    """Complex spinor table of a configuration in R^3."""
    if c.dim != 3:
        raise DimMismatch("spinor_table expects a configuration in R^3 (see embed_planar)")
    return _table(c, stereo_complex, eps_sep)


def real_spinor_table(c: Configuration, eps_sep: float = EPS_SEP) -> SpinorTable:
    """Real spinor table of a configuration in R^2."""
    if c.dim != 2:
        raise DimMismatch("real_spinor_table expects a planar configuration")
    return _table(c, stereo_real, eps_sep)


def atiyah_lines(table: SpinorTable) -> list[Label]:
    """``v_i = prod_{j != i} u_{i,j}``, a label of degree n-1 for each point."""
    n = table.n
    if n < 2:
        raise InvalidArity("atiyah_lines needs n >= 2")
    return [form_product((table[i, j], 1) for j in range(n) if j != i) for i in range(n)]


def line_matrix(vs: Sequence[Label]) -> np.ndarray:
    """Matrix whose i-th column is the coefficient vector of ``vs[i]``."""
    n = len(vs)
    if any(v.degree != n - 1 for v in vs):
        raise DegreeMismatch(f"all {n} labels must have degree {n - 1}")
    return np.column_stack([v.coeffs for v in vs])


def slogphi(vs: Sequence[Label]) -> tuple[complex | float, float]:
    """Phase (or sign) and log-magnitude of ``phi``, by LU with partial pivoting."""
    sign, logabs = np.linalg.slogdet(line_matrix(vs))
    return sign, float(logabs)


def phi(vs: Sequence[Label]) -> complex | float:
    sign, logabs = slogphi(vs)
    return sign * math.exp(logabs) if logabs > -math.inf else sign * 0.0


def rcond1(a: np.ndarray) -> float:
    """Reciprocal 1-norm condition number; 0 for a singular matrix."""
    try:
        inv = np.linalg.inv(a)
    except np.linalg.LinAlgError:
        return 0.0
    return float(1.0 / (np.linalg.norm(a, 1) * np.linalg.norm(inv, 1)))


@dataclass(frozen=True)
class DeterminantReport:
    phi: complex | float | None
    pair_phis: dict[tuple[int, int], complex | float]
    D: complex | float | None
    log_abs_D: float
    arg_D: float
    condition_estimate: float
    flags: tuple[str, ...] = field(default_factory=tuple)

    @property
    def abs_D(self) -> float:
        return math.exp(self.log_abs_D)

    @property
    def low_confidence(self) -> bool:
        return LOW_CONFIDENCE in self.flags

    def to_json(self) -> dict[str, Any]:
        def cx(z):
            return None if z is None else [complex(z).real, complex(z).imag]

        return {
            "phi": cx(self.phi),
            "pair_phis": [
                {"pair": [i, j], "value": cx(v)} for (i, j), v in sorted(self.pair_phis.items())
            ],
            "D": cx(self.D),
            "log_abs_D": self.log_abs_D,
            "arg_D": self.arg_D,
            "cond": self.condition_estimate,
            "flags": list(self.flags),
        }


def determinant_report(table: SpinorTable) -> DeterminantReport:
    """Evaluate phi, the pair determinants and D from a spinor table."""
    n = table.n
    vs = atiyah_lines(table)
    a = line_matrix(vs)
    sign, logabs = np.linalg.slogdet(a)
    pairs = {(i, j): table.pair_phi(i, j) for i in range(n) for j in range(i + 1, n)}
    pv = np.array(list(pairs.values()))
    with np.errstate(divide="ignore", invalid="ignore"):
        # a zero pair determinant only arises from hand-built tables; log|D| is then NaN
        log_abs = float(logabs - np.sum(np.log(np.abs(pv))))
    arg = float(np.angle(sign) - np.sum(np.angle(pv)))
    arg = math.remainder(arg, 2 * math.pi)

    flags = []
    rc = rcond1(a)
    if rc < RCOND_CUTOFF:
        flags.append(LOW_CONFIDENCE)
    if logabs < _LOG_TINY:
        flags.append(UNDERFLOW)
        phi_val = d_val = None
    else:
        phi_val = sign * math.exp(logabs)
        d_val = phi_val / np.prod(pv)
    if table.is_real:
        if phi_val is not None:
            phi_val, d_val = float(np.real(phi_val)), float(np.real(d_val))
        pairs = {k: float(v) for k, v in pairs.items()}
        arg = 0.0 if abs(arg) < math.pi / 2 else math.pi
    else:
        if phi_val is not None:
            phi_val, d_val = complex(phi_val), complex(d_val)
        pairs = {k: complex(v) for k, v in pairs.items()}
    return DeterminantReport(phi_val, pairs, d_val, log_abs, arg, rc, tuple(flags))


def normalized_determinant(c: Configuration, eps_sep: float = EPS_SEP) -> DeterminantReport:
    """D of a configuration in R^3."""
    return determinant_report(spinor_table(c, eps_sep))


def normalized_determinant_real(c: Configuration, eps_sep: float = EPS_SEP) -> DeterminantReport:
    """Real D of a planar configuration."""
    return determinant_report(real_spinor_table(c, eps_sep))
