"""Spinor representatives of directions and the binary-form label algebra.

A spinor is a nonzero vector ``(u0, u1)`` in C^2 (or R^2) standing for a
point of CP^1.  The linear form attached to it is ``u0*X + u1*Y``, so the
north pole (0,0,1) is the form ``Y`` and the south pole is ``X``.

A :class:`Label` is a nonzero homogeneous binary form of degree ``k``,
stored as coefficients ``(c_0, ..., c_k)`` of ``sum c_m X^(k-m) Y^m``.
Setting ``Y = 1`` and ``t = X`` identifies labels with polynomials in ``t``
of degree at most ``k``; raising the degree by multiplying with ``Y``
leaves that polynomial unchanged, which is how labels of different degree
are compared inside a common projective space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import DegreeMismatch, NotUnit, OutOfRange

NORTH = np.array([0.0, 0.0, 1.0])
_UNIT_TOL = 1e-8


def _check_unit(x: np.ndarray, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise NotUnit(f"expected a vector of length {dim}, got shape {x.shape}")
    nrm = math.sqrt(float(x @ x))
    if abs(nrm - 1.0) > _UNIT_TOL:
        raise NotUnit(f"|x| = {nrm!r} is not 1")
    return x


def stereo_complex(x) -> np.ndarray:
    """Spinor of a direction in S^2, projecting from the north pole.

    With ``z = (x1 + i x2) / (1 - x3)`` the representative is ``(1, z)``.
    On the upper hemisphere the equivalent ``(w, 1)`` with
    ``w = 1/z = (x1 - i x2) / (1 + x3)`` is returned instead, so the north
    pole itself maps to ``(0, 1)``.
    """
    x1, x2, x3 = _check_unit(x, 3)
    if x3 <= 0.0:
        return np.array([1.0, complex(x1, x2) / (1.0 - x3)], dtype=complex)
    return np.array([complex(x1, -x2) / (1.0 + x3), 1.0], dtype=complex)


def stereo_real(x) -> np.ndarray:
    """Real spinor of a direction in S^1; ``z = x1 / (1 - x2)``."""
    x1, x2 = _check_unit(x, 2)
    if x2 <= 0.0:
        return np.array([1.0, x1 / (1.0 - x2)])
    return np.array([x1 / (1.0 + x2), 1.0])


def normalize_spinor(s) -> np.ndarray:
    s = np.asarray(s)
    return s / math.sqrt(float(np.vdot(s, s).real))


def spinor_det(a, b) -> complex:
    """``det [a, b]`` with ``a`` and ``b`` as columns."""
    return a[0] * b[1] - a[1] * b[0]


@dataclass(frozen=True, eq=False)
class Label:
    """Nonzero binary form; coefficient ``m`` multiplies ``X^(k-m) Y^m``."""

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.array(self.coeffs)
        if c.dtype.kind not in "fc":
            c = c.astype(float)
        if c.ndim != 1 or c.shape[0] < 1:
            raise ValueError("label coefficients must be a non-empty vector")
        if not np.any(c != 0):
            raise ValueError("label coefficients are all zero")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def is_real(self) -> bool:
        return self.coeffs.dtype.kind == "f"

    def __repr__(self) -> str:
        return f"Label({self.coeffs.tolist()!r})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Label):
            return NotImplemented
        return self.degree == other.degree and bool(np.all(self.coeffs == other.coeffs))

    def __hash__(self) -> int:
        return hash(self.coeffs.tobytes())

    def __mul__(self, other: Label) -> Label:
        return label_multiply(self, other)

    def raised(self, degree: int) -> Label:
        """Multiply by ``Y^(degree - self.degree)``."""
        if degree < self.degree:
            raise DegreeMismatch(f"cannot lower degree {self.degree} to {degree}")
        return Label(np.concatenate([np.zeros(degree - self.degree, self.coeffs.dtype), self.coeffs]))

    def normalized(self) -> Label:
        return Label(self.coeffs / np.linalg.norm(self.coeffs))

    def t_coefficients(self) -> np.ndarray:
        """Coefficients of the polynomial in ``t = X/Y``, ascending powers."""
        return self.coeffs[::-1].copy()

    @classmethod
    def from_t_coefficients(cls, ascending, degree: int | None = None) -> Label:
        asc = np.asarray(ascending)
        if degree is not None:
            if degree + 1 < asc.shape[0]:
                raise DegreeMismatch("polynomial does not fit in the requested degree")
            asc = np.concatenate([asc, np.zeros(degree + 1 - asc.shape[0], asc.dtype)])
        return cls(asc[::-1])

    def roots(self) -> np.ndarray:
        """Finite roots in ``t``; roots at infinity (factors of Y) are dropped."""
        return np.roots(self.coeffs)

    def has_real_roots(self, tol: float = 1e-8) -> bool:
        r = self.roots()
        return bool(np.all(np.abs(r.imag) < tol))

    def to_json(self) -> dict[str, Any]:
        c = np.asarray(self.coeffs, dtype=complex)
        return {"degree": self.degree, "coeffs": [[z.real, z.imag] for z in c.tolist()]}

    @classmethod
    def from_json(cls, obj: dict[str, Any], real: bool = False) -> Label:
        pairs = np.asarray(obj["coeffs"], dtype=float).reshape(-1, 2)
        if real:
            if np.any(pairs[:, 1] != 0):
                raise ValueError("real label has nonzero imaginary parts")
            coeffs = pairs[:, 0]
        else:
            coeffs = pairs[:, 0] + 1j * pairs[:, 1]
        label = cls(coeffs)
        if "degree" in obj and int(obj["degree"]) != label.degree:
            raise DegreeMismatch("declared degree does not match the coefficient count")
        return label


UNIT = Label(np.array([1.0]))


def form_product(factors: Iterable[tuple[Sequence, int]]) -> Label:
    """Coefficients of ``prod (u0_j X + u1_j Y)^(w_j)``; the empty product is ``1``."""
    factors = list(factors)
    complex_ = any(np.iscomplexobj(u) for u, _ in factors)
    c = np.ones(1, dtype=complex if complex_ else float)
    for u, w in factors:
        if w < 0:
            raise ValueError("multiplicities must be nonnegative")
        u0, u1 = u[0], u[1]
        for _ in range(int(w)):
            nxt = np.zeros(c.shape[0] + 1, dtype=c.dtype)
            nxt[:-1] += u0 * c
            nxt[1:] += u1 * c
            c = nxt
    return Label(c)


def label_multiply(a: Label, b: Label) -> Label:
    """Product of binary forms (the monoid structure on labels)."""
    return Label(np.convolve(a.coeffs, b.coeffs))


def label_projective_distance(a: Label, b: Label) -> float:
    """Fubini-Study chordal distance ``sqrt(1 - |<a,b>|^2 / (|a|^2 |b|^2))``.

    Evaluated as the norm of the component of ``a`` orthogonal to ``b``
    (both unit), which keeps full precision near zero.
    """
    if a.degree != b.degree:
        raise DegreeMismatch(f"degrees {a.degree} and {b.degree} differ")
    ua = a.coeffs / np.linalg.norm(a.coeffs)
    ub = b.coeffs / np.linalg.norm(b.coeffs)
    resid = ua - np.vdot(ub, ua) * ub
    return min(1.0, float(np.linalg.norm(resid)))


def deformed_direction(t: float, x) -> np.ndarray:
    """Normalized ``t*x + (1-t)*N`` for ``x`` on the equator, ``N`` the north pole."""
    if not 0.0 <= t <= 1.0:
        raise OutOfRange(f"t = {t!r} is outside [0, 1]")
    x = _check_unit(x, 3)
    if abs(x[2]) > _UNIT_TOL:
        raise NotUnit("deformed_direction expects a direction in the xy-plane")
    if t == 1.0:
        return x.copy()
    if t == 0.0:
        return NORTH.copy()
    v = t * x + (1.0 - t) * NORTH
    return v / np.linalg.norm(v)
