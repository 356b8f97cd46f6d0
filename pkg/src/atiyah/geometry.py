"""Point configurations in R^2 and R^3.

A :class:`Configuration` is an ordered tuple of pairwise distinct points.
All functions here are pure; configurations are immutable (their point
arrays are read-only).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Any

import numpy as np

from .errors import (
    DegenerateConfiguration,
    IndexOutOfRange,
    InvalidArity,
    InvalidTransform,
    SamplerExhausted,
)

#: Minimum pair separation, relative to the configuration diameter.
EPS_SEP = 1e-9
#: Rejection-sampling budget for :func:`sample_configuration`.
SAMPLER_RETRIES = 100

SAMPLER_KINDS = ("uniform-ball", "gaussian", "near-collinear", "near-coincident")


@dataclass(frozen=True, eq=False)
class Configuration:
    """Ordered list of ``n >= 1`` distinct points in R^dim, dim in {2, 3}."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise InvalidArity(f"expected an (n, dim) array with n >= 1, got shape {pts.shape}")
        if pts.shape[1] not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {pts.shape[1]}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("configuration has non-finite coordinates")
        dists = _pair_distances(pts) if pts.shape[0] > 1 else np.zeros(0)
        if dists.size and dists.min() == 0.0:
            raise DegenerateConfiguration("configuration has coincident points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_dists", dists)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(np.all(self.points == other.points))

    def __hash__(self) -> int:
        return hash((self.points.shape, self.points.tobytes()))

    def __repr__(self) -> str:
        return f"Configuration(dim={self.dim}, points={self.points.tolist()!r})"

    def diameter(self) -> float:
        if self.n < 2:
            return 0.0
        return float(self._dists.max())

    def min_separation(self) -> float:
        return float(self._dists.min()) if self.n > 1 else math.inf

    def permuted(self, perm) -> Configuration:
        return Configuration(self.points[np.asarray(perm)])

    def to_json(self) -> dict[str, Any]:
        return {"dim": self.dim, "points": self.points.tolist()}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> Configuration:
        c = cls(np.asarray(obj["points"], dtype=float))
        if "dim" in obj and int(obj["dim"]) != c.dim:
            raise ValueError(f"declared dim {obj['dim']} does not match points of dim {c.dim}")
        return c


@lru_cache(maxsize=64)
def _pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, k=1)


def _pair_distances(pts: np.ndarray) -> np.ndarray:
    i, j = _pairs(pts.shape[0])
    return np.linalg.norm(pts[j] - pts[i], axis=1)



def is_separated(c: Configuration, eps_sep: float = EPS_SEP) -> bool:
    """True if every pair is at least ``eps_sep * diameter`` apart."""
    if c.n < 2:
        return True
    return c.min_separation() >= eps_sep * c.diameter()


def direction(c: Configuration, i: int, j: int, eps_sep: float = EPS_SEP) -> np.ndarray:
    """Unit vector from point ``i`` toward point ``j`` (0-based indices)."""
    n = c.n
    if not (0 <= i < n and 0 <= j < n):
        raise IndexOutOfRange(f"indices ({i}, {j}) out of range for {n} points")
    if i == j:
        raise IndexOutOfRange("direction needs two distinct indices")
    diff = c.points[j] - c.points[i]
    dist = float(np.linalg.norm(diff))
    if dist < eps_sep * c.diameter():
        raise DegenerateConfiguration(f"points {i} and {j} are closer than eps_sep * diameter")
    return diff / dist


def direction_table(c: Configuration, eps_sep: float = EPS_SEP) -> np.ndarray:
    """All directions at once: ``out[i, j] = direction(c, i, j)``, zero diagonal."""
    pts = c.points
    diff = pts[None, :, :] - pts[:, None, :]
    dist = np.linalg.norm(diff, axis=2)
    np.fill_diagonal(dist, 1.0)
    if c.n > 1 and np.min(dist) < eps_sep * c.diameter():
        raise DegenerateConfiguration("configuration has a pair closer than eps_sep * diameter")
    out = diff / dist[:, :, None]
    return out


def standard_collinear(n: int) -> Configuration:
    """The points (0,0,0), (0,0,1), ..., (0,0,n-1)."""
    if n < 1:
        raise InvalidArity("standard_collinear needs n >= 1")
    pts = np.zeros((n, 3))
    pts[:, 2] = np.arange(n, dtype=float)
    return Configuration(pts)


def gauge_normalize(c: Configuration, *, with_flag: bool = False):
    """Translate to barycenter 0 and dilate to max point norm 1.

    A single point has no scale; it is returned centered and, if
    ``with_flag`` is set, the returned flag is ``True``.
    """
    pts = c.points - c.points.mean(axis=0)
    radius = float(np.max(np.linalg.norm(pts, axis=1)))
    unscaled = c.n == 1 or radius == 0.0
    if not unscaled:
        pts = pts / radius
    out = Configuration(pts)
    return (out, unscaled) if with_flag else out


def is_gauge_normalized(c: Configuration, tol: float = 1e-12) -> bool:
    if np.max(np.abs(c.points.mean(axis=0))) > tol:
        return False
    if c.n == 1:
        return True
    return abs(float(np.max(np.linalg.norm(c.points, axis=1))) - 1.0) <= tol


def embed_planar(c: Configuration) -> Configuration:
    """Include a planar configuration into R^3 as the z = 0 plane."""
    if c.dim != 2:
        raise ValueError("embed_planar expects a planar configuration")
    return Configuration(np.column_stack([c.points, np.zeros(c.n)]))


def apply_isometry(c: Configuration, g) -> Configuration:
    """Apply a rotation matrix, a translation vector or a positive scale.

    The kind of ``g`` is read from its shape: a scalar is a dilation, a
    vector of length ``dim`` a translation, a ``dim x dim`` matrix a
    rotation (orthogonal, determinant +1 within 1e-10).
    """
    g = np.asarray(g, dtype=float)
    if g.ndim == 0:
        if not g > 0:
            raise InvalidTransform(f"scale must be positive, got {float(g)}")
        return Configuration(c.points * float(g))
    if g.ndim == 1:
        if g.shape[0] != c.dim:
            raise InvalidTransform(f"translation of length {g.shape[0]} for dim {c.dim}")
        return Configuration(c.points + g)
    if g.shape != (c.dim, c.dim):
        raise InvalidTransform(f"rotation must be {c.dim}x{c.dim}, got {g.shape}")
    if np.max(np.abs(g @ g.T - np.eye(c.dim))) > 1e-10:
        raise InvalidTransform("matrix is not orthogonal")
    if abs(np.linalg.det(g) - 1.0) > 1e-10:
        raise InvalidTransform("matrix has determinant -1")
    return Configuration(c.points @ g.T)


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random element of SO(dim)."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


# --- samplers ---------------------------------------------------------------


@dataclass(frozen=True)
class Sampler:
    """Sampler kind with its optional scale parameter (sigma or delta)."""

    kind: str = "uniform-ball"
    param: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in SAMPLER_KINDS:
            raise ValueError(f"unknown sampler {self.kind!r}; choose from {SAMPLER_KINDS}")
        if self.kind in ("near-collinear", "near-coincident"):
            if self.param is None:
                object.__setattr__(self, "param", 1e-6 if self.kind == "near-collinear" else 1e-4)
            if not self.param > 0:
                raise ValueError(f"{self.kind} needs a positive parameter")

    def __str__(self) -> str:
        return self.kind if self.param is None else f"{self.kind}({self.param!r})"

    @classmethod
    def parse(cls, text: str) -> Sampler:
        """Parse ``"gaussian"`` or ``"near-collinear(1e-6)"``."""
        m = re.fullmatch(r"\s*([a-z\-]+)\s*(?:\(\s*([^)]*)\s*\))?\s*", text)
        if not m:
            raise ValueError(f"cannot parse sampler {text!r}")
        return cls(m.group(1), float(m.group(2)) if m.group(2) else None)


def _uniform_ball(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    v = rng.standard_normal((n, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = rng.random(n) ** (1.0 / dim)
    return v * r[:, None]


def _draw(rng: np.random.Generator, n: int, dim: int, sampler: Sampler) -> np.ndarray:
    if sampler.kind == "uniform-ball":
        return _uniform_ball(rng, n, dim)
    if sampler.kind == "gaussian":
        return rng.standard_normal((n, dim))
    if sampler.kind == "near-collinear":
        # positions along the last axis, perpendicular offsets in a disk of radius sigma
        pts = np.zeros((n, dim))
        pts[:, -1] = rng.uniform(-1.0, 1.0, n)
        pts[:, :-1] = _uniform_ball(rng, n, dim - 1) * sampler.param
        return pts
    # near-coincident: one random pair pushed to distance in [delta/2, delta]
    pts = _uniform_ball(rng, n, dim)
    a, b = rng.choice(n, size=2, replace=False)
    u = rng.standard_normal(dim)
    u /= np.linalg.norm(u)
    pts[b] = pts[a] + u * sampler.param * rng.uniform(0.5, 1.0)
    return pts


def sample_configuration(
    n: int,
    dim: int,
    dist: Sampler | str = "uniform-ball",
    seed: int = 0,
    *,
    eps_sep: float = EPS_SEP,
    retries: int = SAMPLER_RETRIES,
) -> Configuration:
    """Draw a random configuration, deterministic in ``(n, dim, dist, seed)``."""
    if n < 2:
        raise InvalidArity("sample_configuration needs n >= 2")
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    sampler = Sampler.parse(dist) if isinstance(dist, str) else dist
    rng = np.random.default_rng(seed)
    return sample_with_rng(rng, n, dim, sampler, eps_sep=eps_sep, retries=retries)


def sample_with_rng(
    rng: np.random.Generator,
    n: int,
    dim: int,
    sampler: Sampler,
    *,
    eps_sep: float = EPS_SEP,
    retries: int = SAMPLER_RETRIES,
) -> Configuration:
    for _ in range(retries):
        pts = _draw(rng, n, dim, sampler)
        d = _pair_distances(pts)
        if d.min() > 0 and d.min() >= eps_sep * d.max():
            return Configuration(pts)
    raise SamplerExhausted(f"no separated configuration after {retries} draws from {sampler}")


def parse_inline_points(text: str) -> Configuration:
    """Parse ``"x,y,z;x,y,z;..."`` into a configuration."""
    rows = [r for r in text.strip().split(";") if r.strip()]
    pts = [[float(v) for v in r.split(",")] for r in rows]
    if len({len(p) for p in pts}) != 1:
        raise ValueError("inline points have inconsistent dimensions")
    return Configuration(np.array(pts))
