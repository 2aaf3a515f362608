#!/usr/bin/env python3
"""
Test script for supcalc polyhedra
Tests double description conversions, relations and the set operations
"""

import sys
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from kernel import MINUS_INF, PLUS_INF, DomainError, InputError, ResourceError, Vector, feasible_point
from polyhedra import (
    Polyhedron, Relation, closed_conv_union, cone_generators, dual_cone_neg, eps_normal_set, intersect,
    is_subset, is_subspace, minkowski_sum, negate, normal_cone_at, orthogonal_subspace,
    polyhedron_from_json, recession_cone, relate, scale_set, split_scaled_recession, support_function,
    translate, union_sum_recession,
)


def interval(lo, hi) -> Polyhedron:
    return Polyhedron.from_inequalities(1, [[1], [-1]], [hi, -lo])


def halfline_from(lo) -> Polyhedron:
    return Polyhedron.from_inequalities(1, [[-1]], [-lo])


def simplex() -> Polyhedron:
    return Polyhedron.from_inequalities(2, [[-1, 0], [0, -1], [1, 1]], [0, 0, 1])


def same(P, Q) -> bool:
    return relate(P, Q).equal


def test_simplex_vertices():
    """H{x1 >= 0, x2 >= 0, x1 + x2 <= 1} has the three unit vertices and no rays"""
    v = simplex().vrep
    assert set(v.points) == {Vector([0, 0]), Vector([1, 0]), Vector([0, 1])}
    assert v.rays == ()


def test_half_plane_generators():
    P = Polyhedron.from_inequalities(2, [[-1, 0]], [0])
    v = P.vrep
    assert len(v.points) == 1
    assert P.contains(Vector([5, -100]))
    assert not P.contains(Vector([-1, 0]))
    expected = Polyhedron.from_vrep(2, [[0, 0]], [[1, 0], [0, 1], [0, -1]])
    assert same(P, expected)


def test_contradictory_bounds_are_empty():
    P = Polyhedron.from_inequalities(1, [[1], [-1]], [0, -1])
    assert P.is_empty()
    assert P.vrep.is_empty
    assert P.a_point() is None


def test_round_trip_representation_independence():
    V = Polyhedron.from_vrep(2, [[0, 0], [1, 0], [0, 1]])
    assert relate(V, simplex()).relation == Relation.EQUAL
    back = Polyhedron(2, hrep=V.hrep)
    assert same(back, V)


def test_relate_nested_intervals():
    result = relate(interval(0, 1), interval(0, 2))
    assert result.relation == Relation.P_SUBSET_Q
    assert result.witness_q_not_p is not None
    assert interval(0, 2).contains(result.witness_q_not_p)
    assert not interval(0, 1).contains(result.witness_q_not_p)
    assert is_subset(interval(0, 1), interval(0, 2))
    assert not is_subset(interval(0, 2), interval(0, 1))


def test_relate_disjoint_intervals():
    result = relate(interval(0, 1), interval(2, 3))
    assert result.relation == Relation.INCOMPARABLE
    assert not interval(2, 3).contains(result.witness_p_not_q)
    assert not interval(0, 1).contains(result.witness_q_not_p)


def test_relate_unbounded_witness():
    result = relate(halfline_from(0), interval(0, 5))
    assert result.relation == Relation.Q_SUBSET_P
    assert not interval(0, 5).contains(result.witness_p_not_q)


def test_relate_generator_sets_by_membership():
    ray = Polyhedron.from_vrep(1, [[0]], [[1]])
    segment = Polyhedron.from_vrep(1, [[0], [5]])
    result = relate(ray, segment)
    assert result.relation == Relation.Q_SUBSET_P
    assert not segment.contains(result.witness_p_not_q)
    assert not segment.has_hrep and not ray.has_hrep
    assert relate(segment, Polyhedron.from_vrep(1, [[5], [0], [1]])).equal


def test_intersect():
    assert same(intersect(interval(0, 2), interval(1, 3)), interval(1, 2))
    assert same(intersect(simplex(), Polyhedron.full_space(2)), simplex())
    assert intersect(interval(0, 1), interval(2, 3)).is_empty()


def test_minkowski_sum():
    assert same(minkowski_sum(interval(0, 1), interval(0, 1)), interval(0, 2))
    assert same(minkowski_sum(halfline_from(0), interval(-1, 0)), halfline_from(-1))
    assert minkowski_sum(interval(0, 1), Polyhedron.empty(1)).is_empty()
    assert minkowski_sum(Polyhedron.empty(1), interval(0, 1)).is_empty()


def test_closed_conv_union():
    assert same(closed_conv_union([Polyhedron.singleton([0]), halfline_from(1)]), halfline_from(0))
    strip = closed_conv_union([
        Polyhedron.singleton([0, 0]),
        Polyhedron.from_vrep(2, [[1, 0]], [[0, 1]]),
    ])
    expected = Polyhedron.from_inequalities(2, [[-1, 0], [1, 0], [0, -1]], [0, 1, 0])
    assert same(strip, expected)
    # the closure adds the ray over the origin
    assert strip.contains(Vector([0, 7]))
    assert same(closed_conv_union([simplex()]), simplex())
    assert closed_conv_union([Polyhedron.empty(2), Polyhedron.empty(2)]).is_empty()
    with pytest.raises(InputError):
        closed_conv_union([])


def test_recession_cone():
    assert same(recession_cone(simplex()), Polyhedron.origin(2))
    P = Polyhedron.from_inequalities(2, [[1, 1], [-1, 0]], [1, 0])
    expected = Polyhedron.from_inequalities(2, [[1, 1], [-1, 0]], [0, 0])
    assert same(recession_cone(P, 'h'), expected)
    assert same(recession_cone(P, 'v'), expected)
    shifted = Polyhedron.from_vrep(2, [[1, 0]], [[1, 1]])
    assert same(recession_cone(shifted), Polyhedron.from_vrep(2, [[0, 0]], [[1, 1]]))
    with pytest.raises(DomainError):
        recession_cone(Polyhedron.empty(2))


def test_dual_cone_and_bipolar():
    quadrant = Polyhedron.from_vrep(2, [[0, 0]], [[1, 0], [0, 1]])
    third = Polyhedron.from_inequalities(2, [[1, 0], [0, 1]], [0, 0])
    assert same(dual_cone_neg(quadrant), third)
    assert same(dual_cone_neg(dual_cone_neg(quadrant)), quadrant)


def test_subspaces():
    line = Polyhedron.from_vrep(2, [[0, 0]], [[1, 0], [-1, 0]])
    assert is_subspace(line)
    assert same(orthogonal_subspace(line), Polyhedron.from_vrep(2, [[0, 0]], [[0, 1], [0, -1]]))
    assert not is_subspace(simplex())
    with pytest.raises(DomainError):
        orthogonal_subspace(simplex())


def test_normal_cone_at():
    assert same(normal_cone_at(interval(0, 1), [1]), halfline_from(0))
    assert same(normal_cone_at(interval(0, 1), [Fraction(1, 2)]), Polyhedron.origin(1))
    assert normal_cone_at(interval(0, 1), [2]).is_empty()
    box = Polyhedron.from_inequalities(2, [[-1, 0], [0, -1], [1, 0], [0, 1]], [0, 0, 1, 1])
    corner = Polyhedron.from_vrep(2, [[0, 0]], [[-1, 0], [0, -1]])
    assert same(normal_cone_at(box, [0, 0]), corner)


def test_support_function():
    square = Polyhedron.from_inequalities(2, [[1, 0], [-1, 0], [0, 1], [0, -1]], [1, 1, 1, 1])
    assert support_function(square, [1, 1]) == 2
    ray = Polyhedron.from_vrep(2, [[0, 0]], [[1, 0]])
    assert support_function(ray, [1, 0]) == PLUS_INF
    assert support_function(ray, [-1, 0]) == 0
    assert support_function(Polyhedron.empty(2), [1, 0]) == MINUS_INF

def test_translate_negate_scale():
    assert same(translate(interval(0, 1), [2]), interval(2, 3))
    assert same(negate(interval(0, 1)), interval(-1, 0))
    assert same(scale_set(2, interval(0, 1)), interval(0, 2))
    assert same(scale_set(0, halfline_from(3)), Polyhedron.origin(1))
    assert scale_set(0, Polyhedron.empty(1)).is_empty()
    assert same(scale_set(-1, interval(1, 2)), interval(-2, -1))


def test_eps_normal_set():
    S = eps_normal_set(interval(0, 1), [0], 1)
    assert S.contains([-100]) and S.contains([1])
    assert not S.contains([2])
    assert eps_normal_set(interval(0, 1), [5], 1).is_empty()
    assert same(eps_normal_set(interval(0, 1), [1], 0), halfline_from(0))

def test_polyhedron_from_json():
    P = polyhedron_from_json({"A": [["1", "1"]], "b": ["1/2"]}, 2)
    assert P.contains([0, Fraction(1, 2)])
    Q = polyhedron_from_json({"points": [[0, 0]], "rays": [[1, 0]]}, 2)
    assert Q.contains([9, 0])
    with pytest.raises(InputError):
        polyhedron_from_json({"A": [[1]], "b": [1]}, 2, "queries[0].subspace")


def test_recession_of_unions_and_sums():
    A = interval(0, 1)
    others = [halfline_from(2), Polyhedron.from_inequalities(1, [[1]], [0])]
    union_cone, sum_cone = union_sum_recession(A, others)
    assert same(union_cone, sum_cone)
    first = [Polyhedron.from_vrep(2, [[0, 0]], [[1, 0]])]
    second = [Polyhedron.from_vrep(2, [[1, 1]], [[0, 1]]), Polyhedron.singleton([3, 3])]
    plain, mixed, pairwise = split_scaled_recession(first, second, Fraction(1, 3))
    assert same(plain, mixed)
    assert same(mixed, pairwise)
    with pytest.raises(DomainError):
        split_scaled_recession(first, second, 0)


def test_double_description_cap():
    """Homogenized unit square: four extreme rays exceed a cap of two"""
    rows = [Vector([1, 0, -1]), Vector([-1, 0, 0]), Vector([0, 1, -1]), Vector([0, -1, 0]), Vector([0, 0, -1])]
    with pytest.raises(ResourceError):
        cone_generators(rows, 3, cap=2)
    lineality, rays = cone_generators(rows, 3, cap=100)
    assert lineality == []
    assert len(rays) == 4


coords = st.integers(min_value=-3, max_value=3)
factors = st.sampled_from([Fraction(1, 2), Fraction(1), Fraction(3)])


@st.composite
def h_polyhedra(draw, dim=None, max_rows=10):
    n = dim if dim is not None else draw(st.integers(min_value=1, max_value=4))
    rows = draw(st.lists(st.lists(coords, min_size=n, max_size=n), min_size=1, max_size=max_rows))
    rhs = draw(st.lists(coords, min_size=len(rows), max_size=len(rows)))
    return Polyhedron.from_inequalities(n, rows, rhs)


@st.composite
def v_polyhedra(draw, dim, max_points=4, max_rays=2):
    vector = st.lists(coords, min_size=dim, max_size=dim)
    points = draw(st.lists(vector, min_size=1, max_size=max_points))
    rays = draw(st.lists(vector, max_size=max_rays))
    return Polyhedron.from_vrep(dim, points, rays)


@st.composite
def v_families(draw, count_min, count_max):
    n = draw(st.integers(min_value=1, max_value=4))
    return n, draw(st.lists(v_polyhedra(n, max_points=3, max_rays=2), min_size=count_min, max_size=count_max))


@settings(max_examples=120, deadline=None)
@given(h_polyhedra())
def test_hrep_round_trip(P):
    """H to V and back describe the same set"""
    V = Polyhedron(P.dim, vrep=P.vrep)
    assert same(V, P)
    H = Polyhedron(P.dim, hrep=V.hrep)
    assert relate(H, P).relation == Relation.EQUAL
    assert V.is_empty() == (feasible_point(P.hrep.A, P.hrep.b) is None)
    for p in V.vrep.points:
        assert P.contains(p)
    for r in V.vrep.rays:
        assert all(row.dot(r) <= 0 for row in P.hrep.A.rows)


@settings(max_examples=120, deadline=None)
@given(st.integers(min_value=1, max_value=4).flatmap(lambda n: v_polyhedra(n, max_points=5, max_rays=3)))
def test_vrep_round_trip(V):
    """V to H and back describe the same set"""
    H = Polyhedron(V.dim, hrep=V.hrep)
    assert same(Polyhedron(V.dim, vrep=H.vrep), V)
    for p in V.vrep.points:
        assert H.contains(p)


@settings(max_examples=120, deadline=None)
@given(st.integers(min_value=1, max_value=4).flatmap(
    lambda n: st.lists(st.lists(coords, min_size=n, max_size=n), min_size=1, max_size=5)))
def test_bipolar_is_the_conic_hull(generators):
    n = len(generators[0])
    A = Polyhedron.from_vrep(n, generators)
    hull = Polyhedron.from_vrep(n, [Vector.zero(n)], generators)
    assert same(dual_cone_neg(dual_cone_neg(A)), hull)


@settings(max_examples=100, deadline=None)
@given(v_families(3, 4))
def test_union_and_sum_have_one_recession_cone(family):
    _, sets = family
    union_cone, sum_cone = union_sum_recession(sets[0], sets[1:])
    assert same(union_cone, sum_cone)


@settings(max_examples=100, deadline=None)
@given(v_families(2, 4), factors)
def test_split_scaled_families_have_one_recession_cone(family, m):
    _, sets = family
    half = len(sets) // 2
    plain, mixed, pairwise = split_scaled_recession(sets[:half], sets[half:], m)
    assert same(plain, mixed)
    assert same(mixed, pairwise)
    assert same(plain, pairwise)


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=1, max_value=4).flatmap(lambda n: st.tuples(v_polyhedra(n), v_polyhedra(n))))
def test_support_function_decides_containment(pair):
    """P ⊆ Q exactly when σ_P(d) <= σ_Q(d) on every facet normal d of Q"""
    P, Q = pair
    by_support = all(support_function(P, d) <= support_function(Q, d) for d in Q.hrep.A.rows)
    assert by_support == is_subset(P, Q)


@settings(max_examples=100, deadline=None)
@given(h_polyhedra(max_rows=6), st.data())
def test_support_function_is_finite_on_the_dual_of_the_recession_cone(P, data):
    if P.is_empty():
        return
    d = Vector(data.draw(st.lists(coords, min_size=P.dim, max_size=P.dim)))
    barrier = dual_cone_neg(recession_cone(P))
    assert (support_function(P, d) < PLUS_INF) == barrier.contains(d)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
