#!/usr/bin/env python3
"""
Exact Arithmetic Kernel for supcalc
Rational vectors and matrices, Gaussian elimination and an exact simplex
"""

import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Iterable, List, Optional, Sequence, Tuple

logger = logging.getLogger('Simplex')

Scalar = Fraction

_RATIONAL_PATTERN = re.compile(r'^\s*([+-]?\d+)(?:\s*/\s*(\d+))?\s*$')


class SupCalcError(Exception):
    """Base class for every error raised by supcalc"""

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{message} (at {location})"
        super().__init__(message)


class InputError(SupCalcError):
    """Malformed input: bad rational, dimension mismatch, schema violation"""


class DomainError(SupCalcError):
    """A mathematical precondition of an operation does not hold"""


class ResourceError(SupCalcError):
    """A configured computation cap was exceeded"""


def to_scalar(value, location=None) -> Fraction:
    """
    Convert a value to an exact rational

    Args:
        value: Fraction, int or a string "p" / "p/q"
        location: Where the value came from (used in error messages)

    Returns:
        Canonical Fraction
    """
    if type(value) is Fraction:
        return value
    if isinstance(value, bool):
        raise InputError(f"Boolean is not a rational: {value!r}", location)
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        return parse_scalar(value, location)
    raise InputError(f"Not an exact rational: {value!r}", location)


def parse_scalar(text: str, location=None) -> Fraction:
    """Parse "p" or "p/q" exactly; anything else (floats, q = 0) is rejected"""
    match = _RATIONAL_PATTERN.match(text)
    if not match:
        raise InputError(f"Invalid rational {text!r}", location)
    numerator = int(match.group(1))
    denominator = int(match.group(2)) if match.group(2) is not None else 1
    if denominator == 0:
        raise InputError(f"Zero denominator in rational {text!r}", location)
    return Fraction(numerator, denominator)


def format_scalar(value) -> str:
    """Serialize a rational as "p" or "p/q" (extended values as "+inf"/"-inf")"""
    if isinstance(value, Infinity):
        return repr(value)
    return str(to_scalar(value))


class Infinity:
    """Signed infinity of the extended rationals, comparable with Fractions"""

    __slots__ = ('sign',)

    def __init__(self, sign):
        self.sign = 1 if sign > 0 else -1

    def __neg__(self):
        return PLUS_INF if self.sign < 0 else MINUS_INF

    def __eq__(self, other):
        return isinstance(other, Infinity) and other.sign == self.sign

    def __hash__(self):
        return hash(('inf', self.sign))

    def __lt__(self, other):
        if isinstance(other, Infinity):
            return self.sign < other.sign
        return self.sign < 0

    def __le__(self, other):
        return self == other or self < other

    def __gt__(self, other):
        if isinstance(other, Infinity):
            return self.sign > other.sign
        return self.sign > 0

    def __ge__(self, other):
        return self == other or self > other

    def __reduce__(self):
        return (Infinity, (self.sign,))

    def __repr__(self):
        return '+inf' if self.sign > 0 else '-inf'


PLUS_INF = Infinity(1)
MINUS_INF = Infinity(-1)


def is_finite(value) -> bool:
    return not isinstance(value, Infinity)


class Vector(tuple):
    """Immutable vector of exact rationals with a fixed dimension"""

    def __new__(cls, entries=(), location=None):
        return tuple.__new__(cls, (to_scalar(e, location) for e in entries))

    @classmethod
    def _raw(cls, entries) -> 'Vector':
        # entries are already Fractions
        return tuple.__new__(cls, entries)

    @classmethod
    def zero(cls, n: int) -> 'Vector':
        return cls._raw((Fraction(0),) * n)

    @classmethod
    def unit(cls, n: int, i: int) -> 'Vector':
        return cls._raw(Fraction(1) if k == i else Fraction(0) for k in range(n))

    @property
    def dim(self) -> int:
        return len(self)

    def _check(self, other):
        if len(self) != len(other):
            raise InputError(f"Dimension mismatch: {len(self)} vs {len(other)}")

    def __add__(self, other):
        self._check(other)
        return Vector._raw(a + b for a, b in zip(self, other))

    def __sub__(self, other):
        self._check(other)
        return Vector._raw(a - b for a, b in zip(self, other))

    def __neg__(self):
        return Vector._raw(-a for a in self)

    def __mul__(self, scalar):
        if isinstance(scalar, (tuple, list)):
            raise InputError("Vector * sequence is not defined; use dot()")
        scalar = to_scalar(scalar)
        return Vector._raw(a * scalar for a in self)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        scalar = to_scalar(scalar)
        return Vector._raw(a / scalar for a in self)

    def dot(self, other) -> Fraction:
        self._check(other)
        return sum((a * b for a, b in zip(self, other)), Fraction(0))

    def is_zero(self) -> bool:
        return all(a == 0 for a in self)

    def concat(self, *others) -> 'Vector':
        entries = list(self)
        for other in others:
            entries.extend(to_scalar(e) for e in other)
        return Vector._raw(entries)

    def max_norm(self) -> Fraction:
        return max((abs(a) for a in self), default=Fraction(0))

    def __getitem__(self, item):
        result = tuple.__getitem__(self, item)
        if isinstance(item, slice):
            return Vector._raw(result)
        return result

    def __repr__(self):
        return 'Vector(' + ', '.join(str(a) for a in self) + ')'

    def to_json(self) -> List[str]:
        return [format_scalar(a) for a in self]


def vector_from_json(data, location='vector') -> Vector:
    if not isinstance(data, (list, tuple)):
        raise InputError("Expected a list of rationals", location)
    return Vector(to_scalar(v, f"{location}[{i}]") for i, v in enumerate(data))


def normalize_direction(v: Vector) -> Vector:
    """Scale a nonzero direction to its primitive integer representative"""
    denominator = 1
    for a in v:
        denominator = denominator * a.denominator // gcd(denominator, a.denominator)
    numerators = [int(a * denominator) for a in v]
    common = 0
    for a in numerators:
        common = gcd(common, a)
    if common == 0:
        return Vector._raw(Fraction(0) for _ in v)
    return Vector._raw(Fraction(a // common) for a in numerators)


class Matrix:
    """Immutable m x n matrix of exact rationals (n is recorded even when m = 0)"""

    __slots__ = ('rows', 'ncols')

    def __init__(self, rows: Iterable = (), ncols: Optional[int] = None):
        rows = tuple(r if isinstance(r, Vector) else Vector(r) for r in rows)
        if ncols is None:
            if not rows:
                raise InputError("Column count is required for a matrix without rows")
            ncols = len(rows[0])
        for i, row in enumerate(rows):
            if len(row) != ncols:
                raise InputError(f"Row {i} has {len(row)} entries, expected {ncols}")
        object.__setattr__(self, 'rows', rows)
        object.__setattr__(self, 'ncols', ncols)

    def __setattr__(self, key, value):
        raise AttributeError("Matrix is immutable")

    def __reduce__(self):
        return (Matrix, (self.rows, self.ncols))

    @classmethod
    def identity(cls, n: int) -> 'Matrix':
        return cls((Vector.unit(n, i) for i in range(n)), n)

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def shape(self) -> Tuple[int, int]:
        return (len(self.rows), self.ncols)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, i) -> Vector:
        return self.rows[i]

    def __eq__(self, other):
        return isinstance(other, Matrix) and self.shape == other.shape and self.rows == other.rows

    def __hash__(self):
        return hash((self.rows, self.ncols))

    def mul_vec(self, x: Vector) -> Vector:
        if len(x) != self.ncols:
            raise InputError(f"Matrix has {self.ncols} columns, vector has {len(x)} entries")
        return Vector._raw(row.dot(x) for row in self.rows)

    def column(self, j: int) -> Vector:
        return Vector._raw(row[j] for row in self.rows)

    def transpose(self) -> 'Matrix':
        return Matrix((self.column(j) for j in range(self.ncols)), self.nrows)

    def vstack(self, other: 'Matrix') -> 'Matrix':
        if other.ncols != self.ncols:
            raise InputError(f"Cannot stack {self.ncols} and {other.ncols} columns")
        return Matrix(self.rows + other.rows, self.ncols)

    def __repr__(self):
        return f"Matrix({self.nrows}x{self.ncols})"

    def to_json(self) -> List[List[str]]:
        return [row.to_json() for row in self.rows]


def matrix_from_json(data, ncols: int, location='matrix') -> Matrix:
    if not isinstance(data, (list, tuple)):
        raise InputError("Expected a list of rows", location)
    rows = [vector_from_json(row, f"{location}[{i}]") for i, row in enumerate(data)]
    for i, row in enumerate(rows):
        if len(row) != ncols:
            raise InputError(f"Row has {len(row)} entries, expected {ncols}", f"{location}[{i}]")
    return Matrix(rows, ncols)


# ---------------------------------------------------------------------------
# Gaussian elimination

def _rref(rows: List[List[Fraction]], limit: int):
    """Reduce rows in place to reduced row echelon form; pivots only in columns < limit"""
    pivots = []
    r = 0
    for c in range(limit):
        pivot = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        inv = 1 / rows[r][c]
        rows[r] = [v * inv for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                factor = rows[i][c]
                rows[i] = [a - factor * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows, pivots


@dataclass(frozen=True)
class LinearSolution:
    """Result of solve_linear: consistent flag, particular point and null-space basis"""
    consistent: bool
    point: Optional[Vector] = None
    basis: Tuple[Vector, ...] = ()


def solve_linear(A: Matrix, b: Vector) -> LinearSolution:
    """
    Solve Ax = b exactly

    Returns:
        LinearSolution with a particular solution (free variables at 0) and a
        basis of {x : Ax = 0}, or consistent=False
    """
    if len(b) != A.nrows:
        raise InputError(f"Right side has {len(b)} entries, matrix has {A.nrows} rows")
    n = A.ncols
    rows = [list(row) + [b_i] for row, b_i in zip(A.rows, b)]
    rows, pivots = _rref(rows, n)
    for row in rows[len(pivots):]:
        if row[n] != 0:
            return LinearSolution(False)
    point = [Fraction(0)] * n
    for r, c in enumerate(pivots):
        point[c] = rows[r][n]
    basis = []
    pivot_set = set(pivots)
    for free in range(n):
        if free in pivot_set:
            continue
        v = [Fraction(0)] * n
        v[free] = Fraction(1)
        for r, c in enumerate(pivots):
            v[c] = -rows[r][free]
        basis.append(Vector._raw(v))
    return LinearSolution(True, Vector._raw(point), tuple(basis))


def rank(vectors: Sequence[Sequence[Fraction]], ncols: int) -> int:
    if not vectors:
        return 0
    rows = [list(v) for v in vectors]
    _, pivots = _rref(rows, ncols)
    return len(pivots)


# ---------------------------------------------------------------------------
# Linear programming

OPTIMAL = 'optimal'
INFEASIBLE = 'infeasible'
UNBOUNDED = 'unbounded'

LE = '<='
EQ = '='


@dataclass(frozen=True)
class LinearProgram:
    """
    Linear program over exact rationals

    Rows are A[i]·x (sense) b[i] with sense '<=' or '='; objective None means
    feasibility only; nonneg[j] says whether x_j >= 0 (otherwise x_j is free).
    """
    A: Matrix
    b: Vector
    senses: Optional[Tuple[str, ...]] = None
    objective: Optional[Vector] = None
    sense: str = 'max'
    nonneg: Optional[Tuple[bool, ...]] = None

    def __post_init__(self):
        m, n = self.A.shape
        if not isinstance(self.b, Vector):
            object.__setattr__(self, 'b', Vector(self.b))
        if len(self.b) != m:
            raise InputError(f"Right side has {len(self.b)} entries, matrix has {m} rows")
        senses = tuple(self.senses) if self.senses is not None else (LE,) * m
        if len(senses) != m or any(s not in (LE, EQ) for s in senses):
            raise InputError("Row senses must be '<=' or '=' for every row")
        object.__setattr__(self, 'senses', senses)
        nonneg = tuple(self.nonneg) if self.nonneg is not None else (False,) * n
        if len(nonneg) != n:
            raise InputError(f"Expected {n} variable bounds, got {len(nonneg)}")
        object.__setattr__(self, 'nonneg', nonneg)
        if self.objective is not None:
            objective = self.objective if isinstance(self.objective, Vector) else Vector(self.objective)
            if len(objective) != n:
                raise InputError(f"Objective has {len(objective)} entries, expected {n}")
            object.__setattr__(self, 'objective', objective)
        if self.sense not in ('max', 'min'):
            raise InputError(f"Unknown objective sense {self.sense!r}")

    def satisfied_by(self, x: Vector) -> bool:
        """Exact check of every row and bound at x"""
        for row, b_i, sense in zip(self.A.rows, self.b, self.senses):
            value = row.dot(x)
            if (sense == LE and value > b_i) or (sense == EQ and value != b_i):
                return False
        return all(not nn or x_j >= 0 for x_j, nn in zip(x, self.nonneg))


@dataclass(frozen=True)
class LPResult:
    """Exactly one of optimal (point, value), infeasible (farkas) or unbounded"""
    status: str
    point: Optional[Vector] = None
    value: Optional[Fraction] = None
    farkas: Optional[Vector] = None

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL


def verify_farkas(lp: LinearProgram, y: Vector) -> bool:
    """
    Check an infeasibility certificate exactly: y_i >= 0 on '<=' rows,
    (yᵀA)_j = 0 on free variables, (yᵀA)_j >= 0 on nonnegative ones, yᵀb < 0
    """
    if len(y) != lp.A.nrows:
        return False
    if any(sense == LE and y_i < 0 for y_i, sense in zip(y, lp.senses)):
        return False
    for j in range(lp.A.ncols):
        combo = sum((y_i * row[j] for y_i, row in zip(y, lp.A.rows)), Fraction(0))
        if lp.nonneg[j] and combo < 0:
            return False
        if not lp.nonneg[j] and combo != 0:
            return False
    return y.dot(lp.b) < 0


class _Tableau:
    """Dense simplex tableau with Bland's rule; the objective row stores -z last"""

    def __init__(self, rows, basis, ncols):
        self.rows = rows
        self.basis = basis
        self.ncols = ncols
        self.obj = None
        self.pivots = 0

    def set_costs(self, costs):
        obj = list(costs) + [Fraction(0)]
        for row, var in zip(self.rows, self.basis):
            c = costs[var]
            if c != 0:
                obj = [a - c * b for a, b in zip(obj, row)]
        self.obj = obj

    def pivot(self, r, e):
        row = self.rows[r]
        inv = 1 / row[e]
        row = [v * inv for v in row]
        self.rows[r] = row
        for i, other in enumerate(self.rows):
            if i != r and other[e] != 0:
                factor = other[e]
                self.rows[i] = [a - factor * b for a, b in zip(other, row)]
        if self.obj[e] != 0:
            factor = self.obj[e]
            self.obj = [a - factor * b for a, b in zip(self.obj, row)]
        self.basis[r] = e
        self.pivots += 1

    def run(self, allowed):
        """Minimize; returns OPTIMAL or UNBOUNDED"""
        while True:
            entering = next((j for j in range(self.ncols) if allowed[j] and self.obj[j] < 0), None)
            if entering is None:
                return OPTIMAL
            best = None
            for i, row in enumerate(self.rows):
                if row[entering] > 0:
                    key = (row[-1] / row[entering], self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                return UNBOUNDED
            self.pivot(best[1], entering)


def lp_solve(lp: LinearProgram) -> LPResult:
    """
    Solve a linear program exactly with the two-phase simplex and Bland's rule

    Returns:
        LPResult(OPTIMAL, point, value) | LPResult(INFEASIBLE, farkas=y) | LPResult(UNBOUNDED)
    """
    m, n = lp.A.shape
    columns = []
    for j in range(n):
        columns.append((j, 1))
        if not lp.nonneg[j]:
            columns.append((j, -1))
    ns = len(columns)
    slack_of = {}
    for i, sense in enumerate(lp.senses):
        if sense == LE:
            slack_of[i] = ns + len(slack_of)
    nreal = ns + len(slack_of)
    total = nreal + m

    signs = [Fraction(-1) if b_i < 0 else Fraction(1) for b_i in lp.b]
    rows = []
    for i in range(m):
        s_i = signs[i]
        row = [s_i * sign * lp.A.rows[i][var] for var, sign in columns]
        row += [Fraction(0)] * (total - ns)
        if i in slack_of:
            row[slack_of[i]] = s_i
        row[nreal + i] = Fraction(1)
        row.append(s_i * lp.b[i])
        rows.append(row)

    tableau = _Tableau(rows, [nreal + i for i in range(m)], total)
    tableau.set_costs([Fraction(0)] * nreal + [Fraction(1)] * m)
    tableau.run([True] * total)
    infeasibility = -tableau.obj[-1]
    if infeasibility > 0:
        # duals of the phase-one problem: pi_i = 1 - reduced cost of artificial i
        pi = [1 - tableau.obj[nreal + i] for i in range(m)]
        farkas = Vector._raw(-pi_i * s_i for pi_i, s_i in zip(pi, signs))
        logger.debug(f"LP infeasible after {tableau.pivots} pivots")
        return LPResult(INFEASIBLE, farkas=farkas)

    # drive artificials out of the basis, dropping redundant rows
    r = 0
    while r < len(tableau.rows):
        if tableau.basis[r] >= nreal:
            entering = next((j for j in range(nreal) if tableau.rows[r][j] != 0), None)
            if entering is None:
                del tableau.rows[r]
                del tableau.basis[r]
                continue
            tableau.pivot(r, entering)
        r += 1
    tableau.rows = [row[:nreal] + [row[-1]] for row in tableau.rows]
    tableau.ncols = nreal

    def extract_point():
        values = [Fraction(0)] * nreal
        for row, var in zip(tableau.rows, tableau.basis):
            values[var] = row[-1]
        x = [Fraction(0)] * n
        for k, (var, sign) in enumerate(columns):
            x[var] += sign * values[k]
        return Vector._raw(x)

    if lp.objective is None:
        return LPResult(OPTIMAL, point=extract_point(), value=Fraction(0))

    direction = 1 if lp.sense == 'min' else -1
    costs = [direction * sign * lp.objective[var] for var, sign in columns]
    costs += [Fraction(0)] * (nreal - ns)
    tableau.set_costs(costs)
    status = tableau.run([True] * nreal)
    if status == UNBOUNDED:
        logger.debug(f"LP unbounded after {tableau.pivots} pivots")
        return LPResult(UNBOUNDED)
    point = extract_point()
    logger.debug(f"LP optimal after {tableau.pivots} pivots")
    return LPResult(OPTIMAL, point=point, value=lp.objective.dot(point))


def feasible_point(A: Matrix, b: Vector, senses=None) -> Optional[Vector]:
    """A point of {x : Ax (senses) b} with free variables, or None when empty"""
    result = lp_solve(LinearProgram(A, b, senses=senses))
    return result.point if result.is_optimal else None
