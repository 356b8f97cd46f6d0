"""Cluster trees as finite models of Fulton-MacPherson operad elements.

A :class:`ClusterTree` of arity n is a rooted tree whose internal vertices
carry gauge-normalized configurations (one point per child) and whose
leaves carry the labels 1..n.  A child subtree stands for an infinitesimal
cluster sitting at its parent point.  The identity of the operad is the
tree whose root is the single leaf 1.

Labels of states are :class:`~atiyah.labels.Label` objects; the spatial
part of a labeled state is only the *shape* of its grouping, a nested
tuple of leaf labels (``1`` for a single leaf).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Sequence, Union

import numpy as np

from .errors import ArityMismatch, DegreeTooHigh, DimMismatch, IndexOutOfRange, InvalidArity, ScaleCollision
from .geometry import EPS_SEP, Configuration, direction_table, gauge_normalize, is_gauge_normalized, sample_with_rng
from .geometry import Sampler, standard_collinear
from .labels import UNIT, Label, form_product, label_multiply, normalize_spinor, stereo_complex, stereo_real


@dataclass(frozen=True)
class Vertex:
    config: Configuration
    children: tuple

    def __post_init__(self) -> None:
        if len(self.children) < 2:
            raise InvalidArity("an internal vertex needs at least two children")
        if self.config.n != len(self.children):
            raise ArityMismatch(f"{self.config.n} points for {len(self.children)} children")
        if not is_gauge_normalized(self.config, tol=1e-9):
            raise ValueError("vertex configuration is not gauge-normalized (use vertex())")

    @cached_property
    def directions(self) -> np.ndarray:
        return direction_table(self.config)


Node = Union[int, Vertex]


def vertex(config: Configuration | np.ndarray, children: Sequence[Node]) -> Vertex:
    """Build a vertex, gauge-normalizing its configuration.

    Configurations that are already normalized to 1e-12 are kept bit for
    bit, so serialization round trips are exact.
    """
    if not isinstance(config, Configuration):
        config = Configuration(config)
    if not is_gauge_normalized(config, tol=1e-12):
        config = gauge_normalize(config)
    return Vertex(config, tuple(children))


def _leaves(node: Node) -> list[int]:
    if isinstance(node, Vertex):
        return [leaf for c in node.children for leaf in _leaves(c)]
    return [node]


def _dim(node: Node) -> int | None:
    if isinstance(node, Vertex):
        return node.config.dim
    return None


@dataclass(frozen=True)
class ClusterTree:
    dim: int
    root: Node

    def __post_init__(self) -> None:
        if self.dim not in (2, 3):
            raise ValueError("cluster trees live in dimension 2 or 3")
        leaves = _leaves(self.root)
        if sorted(leaves) != list(range(1, len(leaves) + 1)):
            raise ValueError(f"leaf labels {leaves} are not a permutation of 1..{len(leaves)}")
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Vertex):
                if node.config.dim != self.dim:
                    raise DimMismatch(f"vertex of dim {node.config.dim} in a dim-{self.dim} tree")
                stack.extend(node.children)

    # --- constructors ---

    @classmethod
    def identity(cls, dim: int = 3) -> ClusterTree:
        return cls(dim, 1)

    @classmethod
    def corolla(cls, config: Configuration | np.ndarray) -> ClusterTree:
        """Single-vertex tree on ``config``; point k carries leaf k+1."""
        if not isinstance(config, Configuration):
            config = Configuration(config)
        if config.n == 1:
            return cls.identity(config.dim)
        return cls(config.dim, vertex(config, range(1, config.n + 1)))

    # --- structure ---

    @cached_property
    def arity(self) -> int:
        return len(_leaves(self.root))

    @cached_property
    def leaf_order(self) -> tuple[int, ...]:
        """Leaf labels in depth-first order."""
        return tuple(_leaves(self.root))

    @cached_property
    def _paths(self) -> dict[int, tuple[tuple[Vertex, int], ...]]:
        paths: dict[int, tuple] = {}

        def walk(node, prefix):
            if isinstance(node, Vertex):
                for k, c in enumerate(node.children):
                    walk(c, prefix + ((node, k),))
            else:
                paths[node] = prefix

        walk(self.root, ())
        return paths

    @property
    def shape(self):
        return shape_of(self.root)

    def depth(self) -> int:
        def d(node):
            return 1 + max(d(c) for c in node.children) if isinstance(node, Vertex) else 0

        return d(self.root)

    def vertices(self) -> list[Vertex]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Vertex):
                out.append(node)
                stack.extend(node.children)
        return out

    # --- serialization ---

    def to_json(self) -> Any:
        if not isinstance(self.root, Vertex):
            return {"config": {"dim": self.dim, "points": [[0.0] * self.dim]}, "children": [self.root]}
        return _node_to_json(self.root)

    @classmethod
    def from_json(cls, obj: Any, dim: int | None = None) -> ClusterTree:
        root = _node_from_json(obj)
        d = _dim(root) if isinstance(root, Vertex) else (dim or _json_dim(obj) or 3)
        return cls(d, root)


def _node_to_json(node: Node) -> Any:
    if isinstance(node, Vertex):
        return {"config": node.config.to_json(), "children": [_node_to_json(c) for c in node.children]}
    return int(node)


def _json_dim(obj: Any) -> int | None:
    if isinstance(obj, dict) and "config" in obj:
        return int(obj["config"].get("dim", len(obj["config"]["points"][0])))
    return None


def _node_from_json(obj: Any) -> Node:
    if isinstance(obj, int):
        return obj
    children = [_node_from_json(c) for c in obj["children"]]
    if len(children) == 1:
        # a one-point cluster is the operad identity
        return children[0]
    return vertex(Configuration.from_json(obj["config"]), children)


# --- shapes (grouping records) ----------------------------------------------


def shape_of(node: Node):
    if isinstance(node, Vertex):
        return tuple(shape_of(c) for c in node.children)
    return node


def flat_shape(k: int):
    if k < 1:
        raise InvalidArity("a grouping needs at least one leaf")
    return 1 if k == 1 else tuple(range(1, k + 1))


def shape_leaves(shape) -> list[int]:
    if isinstance(shape, tuple):
        return [leaf for c in shape for leaf in shape_leaves(c)]
    return [shape]


def _relabel_shape(shape, offset: int):
    if isinstance(shape, tuple):
        return tuple(_relabel_shape(c, offset) for c in shape)
    return shape + offset


def _graft_shape(shape, pieces: dict[int, Any]):
    if isinstance(shape, tuple):
        return tuple(_graft_shape(c, pieces) for c in shape)
    return pieces[shape]


def compose_shapes(shape, shapes: Sequence):
    """Operadic grafting of grouping shapes, leaves renumbered in block order."""
    n = len(shape_leaves(shape))
    if len(shapes) != n:
        raise ArityMismatch(f"{len(shapes)} inputs for arity {n}")
    pieces, offset = {}, 0
    for i, s in enumerate(shapes, start=1):
        pieces[i] = _relabel_shape(s, offset)
        offset += len(shape_leaves(s))
    return _graft_shape(shape, pieces)


def shape_to_json(shape) -> Any:
    if isinstance(shape, tuple):
        return {"children": [shape_to_json(c) for c in shape]}
    return int(shape)


def shape_from_json(obj: Any):
    if isinstance(obj, int):
        return obj
    children = [shape_from_json(c) for c in obj["children"]]
    return children[0] if len(children) == 1 else tuple(children)


# --- composition --------------------------------------------------------------


def _relabel(node: Node, offset: int) -> Node:
    if isinstance(node, Vertex):
        return Vertex(node.config, tuple(_relabel(c, offset) for c in node.children))
    return node + offset


def _graft(node: Node, pieces: dict[int, Node]) -> Node:
    if isinstance(node, Vertex):
        return Vertex(node.config, tuple(_graft(c, pieces) for c in node.children))
    return pieces[node]


def compose(p: ClusterTree, qs: Sequence[ClusterTree]) -> ClusterTree:
    """Graft ``qs[i-1]`` onto leaf ``i`` of ``p``.

    Leaves of the result are numbered block by block: the leaves of
    ``qs[0]`` first, then those of ``qs[1]``, and so on.
    """
    if len(qs) != p.arity:
        raise ArityMismatch(f"{len(qs)} trees grafted onto arity {p.arity}")
    for q in qs:
        if q.dim != p.dim:
            raise DimMismatch(f"cannot graft a dim-{q.dim} tree onto a dim-{p.dim} tree")
    pieces, offset = {}, 0
    for i, q in enumerate(qs, start=1):
        pieces[i] = _relabel(q.root, offset)
        offset += q.arity
    return ClusterTree(p.dim, _graft(p.root, pieces))


# --- directions and realizations ------------------------------------------------


def leaf_direction(t: ClusterTree, i: int, j: int) -> np.ndarray:
    """Direction from leaf ``i`` to leaf ``j`` (labels are 1-based).

    Evaluated at the lowest common ancestor, between the two children that
    contain ``i`` and ``j``.
    """
    paths = t._paths
    if i not in paths or j not in paths:
        raise IndexOutOfRange(f"leaves ({i}, {j}) out of range for arity {t.arity}")
    if i == j:
        raise IndexOutOfRange("leaf_direction needs two distinct leaves")
    for (v, a), (_, b) in zip(paths[i], paths[j]):
        if a != b:
            return v.directions[a, b]
    raise AssertionError("distinct leaves share a full path")  # pragma: no cover


def leaf_direction_table(t: ClusterTree) -> np.ndarray:
    """``out[i-1, j-1] = leaf_direction(t, i, j)``, zero on the diagonal."""
    n = t.arity
    out = np.zeros((n, n, t.dim))
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i != j:
                out[i - 1, j - 1] = leaf_direction(t, i, j)
    return out


def epsilon_realize(t: ClusterTree, eps: float) -> Configuration:
    """Honest configuration approximating ``t``: clusters shrunk by ``eps`` per level."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")

    def realize(node) -> tuple[dict[int, np.ndarray], float]:
        if not isinstance(node, Vertex):
            return {node: np.zeros(t.dim)}, 0.0
        pts = node.config.points
        out: dict[int, np.ndarray] = {}
        radii = np.zeros(len(node.children))
        for k, child in enumerate(node.children):
            sub, r = realize(child)
            radii[k] = eps * r
            for leaf, x in sub.items():
                out[leaf] = pts[k] + eps * x
        gaps = np.linalg.norm(pts[:, None] - pts[None], axis=2)
        need = radii[:, None] + radii[None, :]
        off = ~np.eye(len(radii), dtype=bool)
        if np.any(need[off] >= gaps[off]):
            raise ScaleCollision(f"child clusters overlap at eps = {eps!r}")
        radius = max(float(np.linalg.norm(x)) for x in out.values())
        return out, radius

    pos, _ = realize(t.root)
    c = Configuration(np.array([pos[k] for k in range(1, t.arity + 1)]))
    if c.n > 1 and c.min_separation() < EPS_SEP * c.diameter():
        raise ScaleCollision(f"realized points closer than the separation threshold at eps = {eps!r}")
    return c


# --- weighted Atiyah maps and structure maps ------------------------------------


DirectionMap = Callable[[np.ndarray], np.ndarray]


def _spinor_of(t: ClusterTree, x: np.ndarray, direction_map: DirectionMap | None) -> np.ndarray:
    if direction_map is not None:
        return normalize_spinor(stereo_complex(direction_map(x)))
    if t.dim == 3:
        return normalize_spinor(stereo_complex(x))
    return normalize_spinor(stereo_real(x))


def weighted_atiyah(
    t: ClusterTree, w: Sequence[int], direction_map: DirectionMap | None = None
) -> list[Label]:
    """Label i is ``prod_{j != i} u(leaf_direction(t, i, j))^(w_j)``.

    Planar trees give real labels.  ``direction_map`` (for planar trees)
    sends circle directions into S^2 first, e.g. a deformation step from
    :func:`atiyah.labels.deformed_direction`; the labels are then complex.
    """
    n = t.arity
    if len(w) != n:
        raise ArityMismatch(f"{len(w)} weights for arity {n}")
    if any(int(x) < 0 for x in w):
        raise ValueError("weights must be nonnegative")
    if direction_map is not None and t.dim != 2:
        raise DimMismatch("direction maps apply to planar trees")
    labels = []
    for i in range(1, n + 1):
        factors = [
            (_spinor_of(t, leaf_direction(t, i, j), direction_map), int(w[j - 1]))
            for j in range(1, n + 1)
            if j != i and w[j - 1] > 0
        ]
        labels.append(form_product(factors))
    return labels


@dataclass(frozen=True)
class LabeledState:
    """A point of the labeled configuration space: grouping shape plus K labels."""

    grouping: Any
    labels: tuple[Label, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(shape_leaves(self.grouping)) != len(self.labels):
            raise ArityMismatch("grouping and label count disagree")

    @property
    def arity(self) -> int:
        return len(self.labels)

    @classmethod
    def flat(cls, labels: Sequence[Label]) -> LabeledState:
        return cls(flat_shape(len(labels)), tuple(labels))

    @classmethod
    def unit(cls, k: int = 1) -> LabeledState:
        return cls.flat([UNIT] * k)

    def to_json(self) -> dict[str, Any]:
        return {"grouping": shape_to_json(self.grouping), "labels": [y.to_json() for y in self.labels]}

    @classmethod
    def from_json(cls, obj: dict[str, Any], real: bool = False) -> LabeledState:
        labels = tuple(Label.from_json(y, real=real) for y in obj["labels"])
        grouping = shape_from_json(obj["grouping"]) if "grouping" in obj else flat_shape(len(labels))
        return cls(grouping, labels)


def nu_compose(
    p: ClusterTree, states: Sequence[LabeledState], direction_map: DirectionMap | None = None
) -> LabeledState:
    """Structure map: multiply block i's labels by the i-th weighted Atiyah label.

    The weights are the state arities.  ``p`` must live in R^3, unless a
    ``direction_map`` from the circle into S^2 is given for a planar ``p``.
    """
    if p.dim != 3 and direction_map is None:
        raise DimMismatch("nu_compose needs a tree in R^3 (use nu_compose_real for planar trees)")
    return _nu(p, states, direction_map)


def nu_compose_real(p: ClusterTree, states: Sequence[LabeledState]) -> LabeledState:
    """Real structure map for planar trees and real labels."""
    if p.dim != 2:
        raise DimMismatch("nu_compose_real needs a planar tree")
    if any(not y.is_real for s in states for y in s.labels):
        raise ValueError("nu_compose_real needs real labels")
    return _nu(p, states, None)


def _nu(p, states, direction_map) -> LabeledState:
    if len(states) != p.arity:
        raise ArityMismatch(f"{len(states)} states for arity {p.arity}")
    ks = [s.arity for s in states]
    if min(ks) < 1:
        raise InvalidArity("every state needs at least one label")
    a = weighted_atiyah(p, ks, direction_map)
    labels = [label_multiply(a[i], y) for i, s in enumerate(states) for y in s.labels]
    grouping = compose_shapes(p.shape, [s.grouping for s in states])
    return LabeledState(grouping, tuple(labels))


def independence_margin(labels: Sequence[Label]) -> float:
    """Smallest singular value of the row-normalized K x K coefficient matrix.

    Labels of lower degree are raised to degree K-1 (multiplied by a power
    of Y) first.  The margin is 0 exactly for projectively dependent lists
    and 1 for orthonormal ones.
    """
    rows = label_matrix(labels)
    return float(np.linalg.svd(rows, compute_uv=False)[-1])


def label_matrix(labels: Sequence[Label]) -> np.ndarray:
    k = len(labels)
    if k == 0:
        raise InvalidArity("need at least one label")
    if any(y.degree >= k for y in labels):
        raise DegreeTooHigh(f"a label has degree >= {k}")
    rows = np.array([y.raised(k - 1).coeffs for y in labels], dtype=complex)
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


# --- samplers and fixtures -------------------------------------------------------


def collinear_tree(k: int) -> ClusterTree:
    """Corolla on the standard collinear configuration (identity for k = 1)."""
    return ClusterTree.corolla(standard_collinear(k))


def collinear_state(k: int) -> LabeledState:
    """The state obtained from the collinear k-point tree with unit labels."""
    return nu_compose(collinear_tree(k), [LabeledState.unit()] * k) if k > 1 else LabeledState.unit()


def sample_tree(
    n: int,
    dim: int,
    rng: np.random.Generator,
    *,
    max_cluster: int = 3,
    max_depth: int = 2,
    sampler: Sampler | None = None,
    shuffle: bool = True,
) -> ClusterTree:
    """Random cluster tree of arity ``n`` with at most ``max_depth`` levels."""
    sampler = sampler or Sampler()
    if n == 1:
        return ClusterTree.identity(dim)

    def build(labels: list[int], depth: int) -> Node:
        m = len(labels)
        if m == 1:
            return labels[0]
        if depth == 1 or m <= 2:
            sizes = [1] * m
        else:
            sizes = _random_blocks(m, max_cluster, rng)
        children, pos = [], 0
        for s in sizes:
            children.append(build(labels[pos : pos + s], depth - 1))
            pos += s
        return vertex(sample_with_rng(rng, len(children), dim, sampler), children)

    labels = list(range(1, n + 1))
    if shuffle:
        labels = [int(x) for x in rng.permutation(labels)]
    return ClusterTree(dim, build(labels, max_depth))


def _random_blocks(m: int, max_cluster: int, rng: np.random.Generator) -> list[int]:
    """Composition of m into at least two parts, each at most max_cluster."""
    while True:
        sizes, left = [], m
        while left > 0:
            s = int(rng.integers(1, min(max_cluster, left) + 1))
            sizes.append(s)
            left -= s
        if len(sizes) >= 2:
            return sizes
