import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atiyah.determinant import atiyah_lines, normalized_determinant, spinor_table
from atiyah.errors import ArityMismatch, DegreeTooHigh, DimMismatch, IndexOutOfRange, InvalidArity, ScaleCollision
from atiyah.geometry import Configuration, embed_planar, gauge_normalize, standard_collinear
from atiyah.labels import UNIT, Label, deformed_direction, label_projective_distance
from atiyah.operad import (
    ClusterTree,
    LabeledState,
    collinear_state,
    collinear_tree,
    compose,
    compose_shapes,
    epsilon_realize,
    flat_shape,
    independence_margin,
    leaf_direction,
    leaf_direction_table,
    nu_compose,
    nu_compose_real,
    sample_tree,
    shape_from_json,
    shape_to_json,
    vertex,
    weighted_atiyah,
)

from helpers import (
    grafting_error,
    k_vectors,
    case_split_direction,
    max_direction_error,
    max_label_distance,
    random_corolla,
    random_state,
    square_sides,
    two_level_tree,
)

seeds = st.integers(0, 2**32 - 1)


def monomials(k):
    return [Label.from_t_coefficients([0.0] * m + [1.0], k - 1) for m in range(k)]


# --- trees and composition ---


def test_single_vertex_leaf_direction():
    t = collinear_tree(3)
    np.testing.assert_allclose(leaf_direction(t, 1, 3), [0, 0, 1], atol=1e-15)
    np.testing.assert_array_equal(leaf_direction(t, 3, 1), -leaf_direction(t, 1, 3))
    with pytest.raises(IndexOutOfRange):
        leaf_direction(t, 1, 4)
    with pytest.raises(IndexOutOfRange):
        leaf_direction(t, 2, 2)


def test_cluster_example():
    # leaves 1, 2 inside a cluster sitting at point 1 of p
    p = ClusterTree.corolla(np.array([[0.0, 0, 0], [1, 0, 0]]))
    q = ClusterTree.corolla(np.array([[0.0, 0, 0], [0, 1, 0]]))
    t = compose(p, [q, ClusterTree.identity()])
    np.testing.assert_array_equal(leaf_direction(t, 1, 2), [0, 1, 0])
    np.testing.assert_array_equal(leaf_direction(t, 1, 3), [1, 0, 0])
    np.testing.assert_array_equal(leaf_direction(t, 2, 3), [1, 0, 0])


def test_unit_law(rng):
    for _ in range(20):
        p = random_corolla(int(rng.integers(2, 5)), 3, rng)
        assert compose(p, [ClusterTree.identity()] * p.arity) == p
        assert compose(ClusterTree.identity(), [p]) == p


def test_associativity(rng):
    for _ in range(20):
        p = random_corolla(int(rng.integers(2, 4)), 3, rng)
        qs = [random_corolla(int(rng.integers(1, 4)), 3, rng) for _ in range(p.arity)]
        rs = [random_corolla(int(rng.integers(1, 3)), 3, rng) for _ in range(sum(q.arity for q in qs))]
        left = compose(compose(p, qs), rs)
        blocks, pos = [], 0
        for q in qs:
            blocks.append(compose(q, rs[pos : pos + q.arity]))
            pos += q.arity
        assert left == compose(p, blocks)


def test_compose_relabels_in_block_order():
    p = collinear_tree(2)
    t = compose(p, [collinear_tree(2), collinear_tree(3)])
    assert t.arity == 5
    assert t.leaf_order == (1, 2, 3, 4, 5)
    assert t.shape == ((1, 2), (3, 4, 5))


def test_compose_errors():
    with pytest.raises(ArityMismatch):
        compose(collinear_tree(2), [ClusterTree.identity()])
    with pytest.raises(DimMismatch):
        compose(collinear_tree(2), [ClusterTree.identity(2), ClusterTree.identity()])


def test_vertex_validation():
    with pytest.raises(InvalidArity):
        vertex(np.zeros((1, 3)), [1])
    with pytest.raises(ArityMismatch):
        vertex(standard_collinear(3), [1, 2])
    with pytest.raises(ValueError):
        ClusterTree(3, vertex(standard_collinear(2), [1, 1]))


def test_collinear_grafting_tree():
    # grafting collinear blocks onto a tree keeps each block collinear along the z axis
    p = ClusterTree.corolla(np.array([[0.0, 0, 0], [1, 0, 0]]))
    t = compose(p, [collinear_tree(2), collinear_tree(3)])
    for i, j in [(1, 2), (3, 4), (3, 5), (4, 5)]:
        np.testing.assert_allclose(leaf_direction(t, i, j), [0, 0, 1], atol=1e-15)
    for i in (1, 2):
        for j in (3, 4, 5):
            np.testing.assert_allclose(leaf_direction(t, i, j), [1, 0, 0], atol=1e-15)


def test_tree_json_round_trip(rng):
    for _ in range(10):
        t = sample_tree(int(rng.integers(1, 7)), 3, rng)
        assert ClusterTree.from_json(json.loads(json.dumps(t.to_json()))) == t
    ident = ClusterTree.identity(2)
    assert ClusterTree.from_json(ident.to_json()) == ident


# --- direction factorization and realizations ---


@settings(max_examples=60, deadline=None)
@given(seed=seeds)
def test_direction_case_split(seed):
    rng = np.random.default_rng(seed)
    t, top, clusters = two_level_tree(rng)
    n = t.arity
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i != j:
                assert np.array_equal(leaf_direction(t, i, j), case_split_direction(top, clusters, i, j))


def test_epsilon_realize_single_vertex():
    c = gauge_normalize(Configuration(np.array([[0.0, 0, 0], [1, 2, 0], [0, 1, 3]])))
    assert epsilon_realize(ClusterTree.corolla(c), 0.1) == c


def test_epsilon_realize_convergence(rng):
    for _ in range(20):
        t, _, _ = two_level_tree(rng)
        try:
            e3, e4 = max_direction_error(t, 1e-3), max_direction_error(t, 1e-4)
        except ScaleCollision:
            continue
        assert e3 < 1e-2 and e4 < 1e-3


def test_epsilon_realize_D_converges(rng):
    for _ in range(10):
        t, _, _ = two_level_tree(rng)
        from atiyah.determinant import SpinorTable, determinant_report
        from atiyah.labels import normalize_spinor, stereo_complex

        dirs = leaf_direction_table(t)
        n = t.arity
        u = np.zeros((n, n, 2), dtype=complex)
        for i in range(n):
            for j in range(n):
                if i != j:
                    u[i, j] = normalize_spinor(stereo_complex(dirs[i, j]))
        limit = determinant_report(SpinorTable(u)).D
        errs = [abs(normalized_determinant(epsilon_realize(t, e)).D - limit) for e in (1e-2, 1e-3, 1e-4)]
        assert errs[2] < 1e-2 * max(1.0, abs(limit))
        assert errs[2] <= errs[0]


def test_scale_collision():
    t = compose(collinear_tree(3), [collinear_tree(2)] * 3)
    with pytest.raises(ScaleCollision):
        epsilon_realize(t, 0.9)
    assert epsilon_realize(t, 0.1).n == 6


# --- weighted Atiyah map ---


def test_weighted_atiyah_pole_example():
    a = weighted_atiyah(collinear_tree(2), [2, 3])
    np.testing.assert_allclose(a[0].coeffs, [0, 0, 0, 1], atol=1e-15)
    np.testing.assert_allclose(a[1].coeffs, [1, 0, 0], atol=1e-15)


@pytest.mark.parametrize("n", range(2, 8))
def test_weighted_atiyah_collinear_monomials(n):
    labels = weighted_atiyah(collinear_tree(n), [1] * n)
    for y, m in zip(labels, monomials(n)):
        assert label_projective_distance(y, m) < 1e-12


def test_weighted_atiyah_unit_weights_match_atiyah_lines(rng):
    for _ in range(10):
        t = random_corolla(int(rng.integers(2, 6)), 3, rng)
        a = weighted_atiyah(t, [1] * t.arity)
        b = atiyah_lines(spinor_table(t.root.config))
        for x, y in zip(a, b):
            np.testing.assert_allclose(x.coeffs, y.coeffs, atol=1e-14)


def test_weighted_atiyah_degrees_and_errors(rng):
    t = random_corolla(3, 3, rng)
    a = weighted_atiyah(t, [2, 0, 1])
    assert [y.degree for y in a] == [1, 3, 2]
    with pytest.raises(ArityMismatch):
        weighted_atiyah(t, [1, 1])


def test_deformation_endpoints(rng):
    t = random_corolla(3, 2, rng)
    at_one = weighted_atiyah(t, [1, 1, 1], direction_map=lambda x: deformed_direction(1.0, np.append(x, 0.0)))
    embedded = weighted_atiyah(ClusterTree.corolla(embed_planar(t.root.config)), [1, 1, 1])
    # the planar x-y directions sit on the equator, so both routes give the same complex labels
    for x, y in zip(at_one, embedded):
        assert label_projective_distance(x, y) < 1e-12
    at_zero = weighted_atiyah(t, [1, 1, 1], direction_map=lambda x: deformed_direction(0.0, np.append(x, 0.0)))
    for y in at_zero:
        assert label_projective_distance(y, Label([0, 0, 1])) < 1e-15


def test_real_weighted_atiyah_is_real(rng):
    # simple roots only: a repeated root splits by about sqrt(eps) under rounding
    t = random_corolla(5, 2, rng)
    assert all(y.is_real and y.has_real_roots() for y in weighted_atiyah(t, [1] * 5))


# --- structure maps ---


def test_nu_unit_labels(rng):
    p = random_corolla(4, 3, rng)
    out = nu_compose(p, [LabeledState.unit()] * 4)
    for x, y in zip(out.labels, weighted_atiyah(p, [1] * 4)):
        np.testing.assert_array_equal(x.coeffs, y.coeffs)
    assert out.grouping == p.shape


def test_nu_identity_tree(rng):
    s = random_state(3, rng)
    out = nu_compose(ClusterTree.identity(), [s])
    assert out.labels == s.labels


def test_nu_degree_bookkeeping(rng):
    for _ in range(20):
        p = random_corolla(int(rng.integers(2, 5)), 3, rng)
        ks = [int(rng.integers(1, 4)) for _ in range(p.arity)]
        states = [random_state(k, rng) for k in ks]
        out = nu_compose(p, states)
        pos = 0
        for i, s in enumerate(states):
            extra = sum(ks) - ks[i]
            for y in s.labels:
                assert out.labels[pos].degree == y.degree + extra
                pos += 1


def test_nu_grouping_is_composed_shape():
    out = nu_compose(collinear_tree(2), [collinear_state(2), collinear_state(3)])
    assert out.grouping == ((1, 2), (3, 4, 5))
    assert out.grouping == compose_shapes((1, 2), [(1, 2), (1, 2, 3)])


def test_nu_errors(rng):
    with pytest.raises(ArityMismatch):
        nu_compose(collinear_tree(2), [LabeledState.unit()])
    with pytest.raises(DimMismatch):
        nu_compose(random_corolla(2, 2, rng), [LabeledState.unit()] * 2)
    with pytest.raises(DimMismatch):
        nu_compose_real(collinear_tree(2), [LabeledState.unit()] * 2)
    with pytest.raises(ValueError):
        nu_compose_real(random_corolla(2, 2, rng), [LabeledState.flat([Label([1j])])] * 2)


@settings(max_examples=60, deadline=None)
@given(seed=seeds, dim=st.sampled_from([2, 3]))
def test_operad_square(seed, dim):
    rng = np.random.default_rng(seed)
    assert max_label_distance(*square_sides(rng, dim=dim, max_n=4, max_m=3, max_l=3)) < 1e-10


def test_grafting_identity(rng):
    for dim in (2, 3):
        for n in (1, 2, 3):
            p = random_corolla(n, dim, rng)
            for ks in k_vectors(n, 5):
                assert grafting_error(p, ks) < 1e-10


def test_collinear_state_is_monomial_basis():
    for k in range(1, 7):
        for y, m in zip(collinear_state(k).labels, monomials(k)):
            assert label_projective_distance(y, m) < 1e-12


# --- independence margin ---


def test_margin_examples():
    for k in range(1, 8):
        assert abs(independence_margin(monomials(k)) - 1.0) < 1e-15
    y = Label([1, 2, 3])
    assert independence_margin([y, Label(2j * y.coeffs), Label([0, 0, 1])]) < 1e-12
    with pytest.raises(DegreeTooHigh):
        independence_margin([Label([1, 0, 0]), Label([1, 0])])


def test_margin_pads_by_powers_of_y():
    # degree-0 label 1 is raised to Y^(K-1): t^0 in the dehomogenized basis
    assert abs(independence_margin([Label([1.0]), Label([1.0, 0.0])]) - 1.0) < 1e-15
    assert independence_margin([Label([1.0]), Label([0.0, 1.0])]) < 1e-15


@settings(max_examples=60, deadline=None)
@given(seed=seeds, k=st.integers(1, 6))
def test_margin_invariances(seed, k):
    rng = np.random.default_rng(seed)
    labels = random_state(k, rng).labels
    m = independence_margin(labels)
    scaled = [Label(y.coeffs * complex(*rng.standard_normal(2)) * 10 ** rng.uniform(-3, 3)) for y in labels]
    assert abs(independence_margin(scaled) - m) < 1e-10
    q, _ = np.linalg.qr(rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k)))
    rotated = [Label(q @ y.raised(k - 1).coeffs) for y in labels]
    assert abs(independence_margin(rotated) - m) < 1e-10


def test_atiyah_lines_margin_positive(rng):
    for n in range(2, 7):
        t = random_corolla(n, 3, rng)
        assert independence_margin(weighted_atiyah(t, [1] * n)) > 1e-8


# --- states and shapes ---


def test_state_json_round_trip(rng):
    out = nu_compose(collinear_tree(2), [random_state(2, rng), collinear_state(2)])
    back = LabeledState.from_json(json.loads(json.dumps(out.to_json())))
    assert back.grouping == out.grouping and back.labels == out.labels
    flat = LabeledState.from_json({"labels": [UNIT.to_json()]})
    assert flat.grouping == flat_shape(1)


def test_shape_json_round_trip():
    shape = ((1, 2), 3, ((4, 5), 6))
    assert shape_from_json(json.loads(json.dumps(shape_to_json(shape)))) == shape


def test_state_arity_mismatch():
    with pytest.raises(ArityMismatch):
        LabeledState((1, 2), (UNIT,))
