"""Builders shared by the operad tests and the acceptance suite."""

from __future__ import annotations

import itertools

import numpy as np

from atiyah.geometry import Sampler, direction, sample_with_rng
from atiyah.harness import sample_independent_labels
from atiyah.labels import Label, label_multiply, label_projective_distance
from atiyah.operad import (
    ClusterTree,
    LabeledState,
    collinear_state,
    compose,
    epsilon_realize,
    leaf_direction,
    nu_compose,
    nu_compose_real,
    sample_tree,
    vertex,
    weighted_atiyah,
)


ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record(name: str, ok: bool, detail: str) -> None:
    """Register one acceptance line; printed by the terminal summary hook."""
    ACCEPTANCE_RESULTS.append((name, bool(ok), detail))
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


def random_corolla(n: int, dim: int, rng) -> ClusterTree:
    if n == 1:
        return ClusterTree.identity(dim)
    return ClusterTree.corolla(sample_with_rng(rng, n, dim, Sampler()))


def two_level_tree(rng, dim: int = 3, max_top: int = 4, max_cluster: int = 3):
    """A top vertex whose children are clusters of 1..max_cluster leaves, at least one nontrivial.

    Returns the tree, the top corolla and the list of cluster corollas.
    """
    m = int(rng.integers(2, max_top + 1))
    sizes = rng.integers(1, max_cluster + 1, size=m)
    if sizes.max() == 1:
        sizes[int(rng.integers(m))] = int(rng.integers(2, max_cluster + 1))
    top = random_corolla(m, dim, rng)
    clusters = [random_corolla(int(s), dim, rng) for s in sizes]
    return compose(top, clusters), top, clusters


def case_split_direction(top, clusters, i: int, j: int) -> np.ndarray:
    """Case split for a two-level tree: same cluster uses the inner configuration."""
    sizes = [q.arity for q in clusters]
    starts = np.concatenate([[0], np.cumsum(sizes)])

    def locate(leaf):
        b = int(np.searchsorted(starts, leaf - 1, side="right") - 1)
        return b, leaf - 1 - int(starts[b])

    (bi, li), (bj, lj) = locate(i), locate(j)
    if bi == bj:
        return clusters[bi].root.directions[li, lj]
    return top.root.directions[bi, bj]


def max_direction_error(tree: ClusterTree, eps: float) -> float:
    c = epsilon_realize(tree, eps)
    n = tree.arity
    return max(
        float(np.linalg.norm(direction(c, i - 1, j - 1) - leaf_direction(tree, i, j)))
        for i in range(1, n + 1)
        for j in range(1, n + 1)
        if i != j
    )


def random_state(k: int, rng, real: bool = False) -> LabeledState:
    return LabeledState.flat(sample_independent_labels(k, rng, real))


def square_sides(rng, dim: int = 3, max_n: int = 3, max_m: int = 2, max_l: int = 2):
    """Both evaluation orders of the structure map on a random nested input."""
    n = int(rng.integers(1, max_n + 1))
    p = random_corolla(n, dim, rng) if n > 1 else ClusterTree.identity(dim)
    ms = [int(rng.integers(1, max_m + 1)) for _ in range(n)]
    qs = [random_corolla(m, dim, rng) for m in ms]
    rs = [[random_state(int(rng.integers(1, max_l + 1)), rng, real=dim == 2) for _ in range(m)] for m in ms]
    nu = nu_compose_real if dim == 2 else nu_compose
    two_stage = nu(p, [nu(q, r) for q, r in zip(qs, rs)])
    one_stage = nu(compose(p, qs), [s for r in rs for s in r])
    return two_stage, one_stage


def max_label_distance(a, b) -> float:
    return max(label_projective_distance(x, y) for x, y in zip(a.labels, b.labels, strict=True))


def grafting_error(p: ClusterTree, ks) -> float:
    """Distance between nu_compose on collinear states and the f_i * t^j pattern."""
    real = p.dim == 2
    states = [collinear_state(k) for k in ks]
    if real:
        states = [LabeledState(s.grouping, tuple(Label(y.coeffs.real) for y in s.labels)) for s in states]
        out = nu_compose_real(p, states)
    else:
        out = nu_compose(p, states)
    f = weighted_atiyah(p, ks)
    expected = [
        label_multiply(f[i], Label.from_t_coefficients([0.0] * j + [1.0], k - 1))
        for i, k in enumerate(ks)
        for j in range(k)
    ]
    return max(label_projective_distance(y, e) for y, e in zip(out.labels, expected, strict=True))


def k_vectors(n: int, total: int):
    """All positive integer n-vectors with sum at most ``total``."""
    for ks in itertools.product(range(1, total + 1), repeat=n):
        if sum(ks) <= total:
            yield ks


def random_tree(rng, n: int, dim: int = 3) -> ClusterTree:
    return sample_tree(n, dim, rng)


__all__ = [
    "ACCEPTANCE_RESULTS",
    "record",
    "grafting_error",
    "k_vectors",
    "case_split_direction",
    "max_direction_error",
    "max_label_distance",
    "random_corolla",
    "random_state",
    "random_tree",
    "square_sides",
    "two_level_tree",
    "vertex",
]
