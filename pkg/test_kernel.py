#!/usr/bin/env python3
"""
Test script for the supcalc arithmetic kernel
Tests rationals, vectors, Gaussian elimination and the exact simplex
"""

import sys
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from kernel import (
    EQ, INFEASIBLE, MINUS_INF, OPTIMAL, PLUS_INF, UNBOUNDED, InputError, LinearProgram, Matrix,
    Vector, feasible_point, format_scalar, is_finite, lp_solve, normalize_direction, parse_scalar,
    rank, solve_linear, to_scalar, verify_farkas,
)


def test_parse_scalar():
    """Rationals parse exactly and normalize"""
    assert parse_scalar("3/6") == Fraction(1, 2)
    assert parse_scalar("-4") == Fraction(-4)
    assert parse_scalar(" 7 / 2 ") == Fraction(7, 2)


@pytest.mark.parametrize("text", ["1.5", "1/0", "abc", "", "1/-2"])
def test_parse_scalar_rejects(text):
    with pytest.raises(InputError):
        parse_scalar(text, "test")


def test_error_location_in_message():
    with pytest.raises(InputError) as info:
        parse_scalar("1/0", "functions[0].pieces[1].b")
    assert "functions[0].pieces[1].b" in str(info.value)
    assert info.value.location == "functions[0].pieces[1].b"


def test_to_scalar_rejects_inexact():
    with pytest.raises(InputError):
        to_scalar(0.5)
    with pytest.raises(InputError):
        to_scalar(True)
    assert to_scalar(3) == 3
    assert to_scalar("2/4") == Fraction(1, 2)


def test_format_scalar():
    assert format_scalar(Fraction(1, 2)) == "1/2"
    assert format_scalar(4) == "4"
    assert format_scalar(PLUS_INF) == "+inf"
    assert format_scalar(MINUS_INF) == "-inf"


def test_extended_rationals():
    assert PLUS_INF > Fraction(10 ** 9)
    assert MINUS_INF < -10 ** 9
    assert -PLUS_INF == MINUS_INF
    assert not is_finite(PLUS_INF)
    assert is_finite(Fraction(0))


def test_vector_arithmetic():
    u = Vector([1, "1/2"])
    v = Vector([-1, 2])
    assert u + v == Vector([0, "5/2"])
    assert u - v == Vector([2, "-3/2"])
    assert u * 2 == Vector([2, 1])
    assert 2 * u == Vector([2, 1])
    assert u.dot(v) == 0
    assert isinstance(u[0:1], Vector)
    assert Vector.unit(3, 1) == Vector([0, 1, 0])
    assert Vector([3, -5]).max_norm() == 5
    assert u.to_json() == ["1", "1/2"]


def test_vector_dimension_mismatch():
    with pytest.raises(InputError):
        Vector([1, 2]) + Vector([1])
    with pytest.raises(InputError):
        Vector([1, 2]).dot(Vector([1, 2, 3]))


def test_normalize_direction():
    assert normalize_direction(Vector(["1/2", "-3/4"])) == Vector([2, -3])
    assert normalize_direction(Vector([0, 6, 9])) == Vector([0, 2, 3])
    assert normalize_direction(Vector([0, 0])) == Vector([0, 0])


def test_matrix_basics():
    A = Matrix([[1, 2], [3, 4]])
    assert A.shape == (2, 2)
    assert A.mul_vec(Vector([1, 1])) == Vector([3, 7])
    assert A.transpose().rows[0] == Vector([1, 3])
    assert Matrix((), 3).shape == (0, 3)
    with pytest.raises(InputError):
        Matrix([[1, 2], [3]])
    with pytest.raises(AttributeError):
        A.ncols = 5


def test_solve_linear_identity():
    solution = solve_linear(Matrix.identity(2), Vector([1, 2]))
    assert solution.consistent
    assert solution.point == Vector([1, 2])
    assert solution.basis == ()


def test_solve_linear_one_equation():
    solution = solve_linear(Matrix([[1, 1]]), Vector([0]))
    assert solution.consistent
    assert solution.point == Vector([0, 0])
    assert solution.basis == (Vector([-1, 1]),)


def test_solve_linear_inconsistent():
    assert not solve_linear(Matrix([[1], [1]]), Vector([0, 1])).consistent


def test_rank():
    assert rank([[1, 2], [2, 4]], 2) == 1
    assert rank([[1, 0], [0, 1], [1, 1]], 2) == 2
    assert rank([], 3) == 0


def test_lp_optimal():
    """max x s.t. x <= 3, x >= 0"""
    lp = LinearProgram(Matrix([[1], [-1]]), Vector([3, 0]), objective=Vector([1]))
    result = lp_solve(lp)
    assert result.status == OPTIMAL
    assert result.point == Vector([3])
    assert result.value == 3


def test_lp_infeasible_with_certificate():
    """{x <= 0, x >= 1} has a Farkas certificate"""
    lp = LinearProgram(Matrix([[1], [-1]]), Vector([0, -1]))
    result = lp_solve(lp)
    assert result.status == INFEASIBLE
    assert verify_farkas(lp, result.farkas)


def test_lp_unbounded():
    lp = LinearProgram(Matrix([[-1]]), Vector([0]), objective=Vector([1]))
    assert lp_solve(lp).status == UNBOUNDED


def test_lp_equalities_and_bounds():
    """min x + 2y s.t. x + y = 1, x, y >= 0"""
    lp = LinearProgram(Matrix([[1, 1]]), Vector([1]), senses=(EQ,), objective=Vector([1, 2]),
                       sense='min', nonneg=(True, True))
    result = lp_solve(lp)
    assert result.is_optimal
    assert result.point == Vector([1, 0])
    assert result.value == 1


def test_lp_validation():
    with pytest.raises(InputError):
        LinearProgram(Matrix([[1]]), Vector([1, 2]))
    with pytest.raises(InputError):
        LinearProgram(Matrix([[1]]), Vector([1]), senses=('>=',))
    with pytest.raises(InputError):
        LinearProgram(Matrix([[1]]), Vector([1]), objective=Vector([1, 1]))


def test_feasible_point():
    point = feasible_point(Matrix([[1, 1], [-1, 0], [0, -1]]), Vector([1, 0, 0]))
    assert point is not None
    assert point[0] + point[1] <= 1 and point[0] >= 0 and point[1] >= 0
    assert feasible_point(Matrix([[1], [-1]]), Vector([-1, -1])) is None


small = st.integers(min_value=-3, max_value=3)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(small, small, small), min_size=1, max_size=4),
       st.tuples(small, small))
def test_lp_results_check_out(raw_rows, objective):
    """Optimal points satisfy every row; infeasible results carry a valid certificate"""
    rows = [Vector([a, b]) for a, b, _ in raw_rows]
    rhs = [c for _, _, c in raw_rows]
    # box |x_j| <= 10 keeps every program bounded
    for j in range(2):
        rows.extend([Vector.unit(2, j), -Vector.unit(2, j)])
        rhs.extend([10, 10])
    lp = LinearProgram(Matrix(rows, 2), Vector(rhs), objective=Vector(objective))
    result = lp_solve(lp)
    assert result.status in (OPTIMAL, INFEASIBLE)
    if result.is_optimal:
        assert lp.satisfied_by(result.point)
        assert result.value == Vector(objective).dot(result.point)
    else:
        assert verify_farkas(lp, result.farkas)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(small, small, small), min_size=1, max_size=4))
def test_lp_optimum_dominates_feasible_points(raw_rows):
    """The optimum is at least the objective at any lattice point of the box that is feasible"""
    rows = [Vector([a, b]) for a, b, _ in raw_rows] + [Vector([1, 0]), Vector([-1, 0]),
                                                       Vector([0, 1]), Vector([0, -1])]
    rhs = [c for _, _, c in raw_rows] + [2, 2, 2, 2]
    lp = LinearProgram(Matrix(rows, 2), Vector(rhs), objective=Vector([1, 1]))
    result = lp_solve(lp)
    for x in range(-2, 3):
        for y in range(-2, 3):
            point = Vector([x, y])
            if lp.satisfied_by(point):
                assert result.is_optimal
                assert result.value >= x + y


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
