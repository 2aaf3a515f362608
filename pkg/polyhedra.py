#!/usr/bin/env python3
"""
Polyhedral Calculus for supcalc
H/V representations, double description conversion and set operations
"""

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

from kernel import (
    EQ, PLUS_INF, MINUS_INF, DomainError, InputError, LinearProgram, Matrix, ResourceError,
    Vector, lp_solve, matrix_from_json, normalize_direction, vector_from_json,
)

logger = logging.getLogger('DoubleDescription')


def _dd_cap() -> int:
    from config import config
    return config.get_dd_cap()


@dataclass(frozen=True)
class HRep:
    """{x in Q^n : Ax <= b}; zero rows means all of Q^n"""
    A: Matrix
    b: Vector

    def __post_init__(self):
        if self.A.nrows != len(self.b):
            raise InputError(f"H-representation has {self.A.nrows} rows but {len(self.b)} right sides")

    @property
    def dim(self) -> int:
        return self.A.ncols

    def to_json(self):
        return {"A": self.A.to_json(), "b": self.b.to_json()}


@dataclass(frozen=True)
class VRep:
    """conv(points) + cone(rays); empty iff there are no points"""
    dim: int
    points: Tuple[Vector, ...]
    rays: Tuple[Vector, ...]

    def __post_init__(self):
        for v in self.points + self.rays:
            if len(v) != self.dim:
                raise InputError(f"Generator {v!r} does not have dimension {self.dim}")
        if any(r.is_zero() for r in self.rays):
            raise InputError("Rays must be nonzero")

    @property
    def is_empty(self) -> bool:
        return not self.points

    def to_json(self):
        return {"points": [p.to_json() for p in self.points],
                "rays": [r.to_json() for r in self.rays]}


def _dedupe(vectors: Iterable[Vector]) -> Tuple[Vector, ...]:
    seen = {}
    for v in vectors:
        seen.setdefault(v, None)
    return tuple(seen)


# ---------------------------------------------------------------------------
# Double description

def cone_generators(rows: Sequence[Vector], dim: int, cap: Optional[int] = None):
    """
    Generators of the cone {y : r·y <= 0 for every row r}

    Args:
        rows: Constraint normals (zero rows are ignored)
        dim: Ambient dimension
        cap: Maximum number of intermediate extreme rays

    Returns:
        (lineality basis, extreme rays) with every vector primitive integral
    """
    cap = cap if cap is not None else _dd_cap()
    lineality = [Vector.unit(dim, i) for i in range(dim)]
    rays: List[Tuple[Vector, frozenset]] = []
    processed = set()

    for k, a in enumerate(rows):
        if a.is_zero():
            continue
        pivot = next((i for i, l in enumerate(lineality) if a.dot(l) != 0), None)
        if pivot is not None:
            l0 = lineality.pop(pivot)
            v0 = a.dot(l0)
            if v0 > 0:
                l0, v0 = -l0, -v0
            lineality = [normalize_direction(l - l0 * (a.dot(l) / v0)) for l in lineality]
            rays = [(normalize_direction(r - l0 * (a.dot(r) / v0)), zeros | {k}) for r, zeros in rays]
            rays.append((normalize_direction(l0), frozenset(processed)))
        else:
            positive, negative, kept = [], [], []
            for r, zeros in rays:
                value = a.dot(r)
                if value > 0:
                    positive.append((r, zeros, value))
                elif value < 0:
                    negative.append((r, zeros, value))
                    kept.append((r, zeros))
                else:
                    kept.append((r, zeros | {k}))
            threshold = dim - len(lineality) - 2
            created = {}
            for p, zp, vp in positive:
                for q, zq, vq in negative:
                    common = zp & zq
                    if len(common) < threshold:
                        continue
                    if any(common <= zo for r, zo in rays if r is not p and r is not q):
                        continue
                    w = normalize_direction(q * vp - p * vq)
                    if w not in created:
                        created[w] = common | {k}
            rays = kept + list(created.items())
            if len(rays) > cap:
                raise ResourceError(f"Double description exceeded {cap} intermediate rays")
        processed.add(k)
        logger.debug(f"row {k}: {len(lineality)} lineality, {len(rays)} rays")

    unique = {}
    for r, _ in rays:
        unique.setdefault(r, None)
    return lineality, list(unique)


def hrep_to_vrep(h: HRep) -> VRep:
    n = h.dim
    rows = [row.concat((-b_i,)) for row, b_i in zip(h.A.rows, h.b)]
    rows.append(Vector.zero(n).concat((-1,)))
    lineality, rays = cone_generators(rows, n + 1)
    points, directions = [], []
    for r in rays:
        s = r[n]
        if s > 0:
            points.append(r[:n] / s)
        else:
            directions.append(r[:n])
    for l in lineality:
        directions.extend((l[:n], -l[:n]))
    if not points:
        return VRep(n, (), ())
    return VRep(n, _dedupe(points), _dedupe(directions))


def vrep_to_hrep(v: VRep) -> HRep:
    n = v.dim
    if v.is_empty:
        return HRep(Matrix([Vector.zero(n)], n), Vector([-1]))
    rows = [p.concat((-1,)) for p in v.points] + [r.concat((0,)) for r in v.rays]
    lineality, rays = cone_generators(rows, n + 1)
    normals, rhs = [], []
    for r in rays:
        a = r[:n]
        if a.is_zero():
            continue
        normals.append(a)
        rhs.append(r[n])
    for l in lineality:
        a = l[:n]
        if a.is_zero():
            continue
        normals.extend((a, -a))
        rhs.extend((l[n], -l[n]))
    return HRep(Matrix(normals, n), Vector(rhs))


# ---------------------------------------------------------------------------
# Polyhedron

class Polyhedron:
    """
    Closed convex polyhedron in Q^n holding at least one representation

    The missing representation is computed on first access and cached.
    """

    def __init__(self, dim: int, hrep: Optional[HRep] = None, vrep: Optional[VRep] = None):
        if hrep is None and vrep is None:
            raise InputError("A polyhedron needs an H- or a V-representation")
        for rep in (hrep, vrep):
            if rep is not None and rep.dim != dim:
                raise InputError(f"Representation has dimension {rep.dim}, expected {dim}")
        self.dim = dim
        self._hrep = hrep
        self._vrep = vrep
        self._empty = None if vrep is None else vrep.is_empty

    @classmethod
    def from_hrep(cls, A: Matrix, b: Vector) -> 'Polyhedron':
        return cls(A.ncols, hrep=HRep(A, b if isinstance(b, Vector) else Vector(b)))

    @classmethod
    def from_inequalities(cls, dim: int, rows: Iterable, rhs: Iterable) -> 'Polyhedron':
        return cls.from_hrep(Matrix(rows, dim), Vector(rhs))

    @classmethod
    def from_vrep(cls, dim: int, points: Iterable = (), rays: Iterable = ()) -> 'Polyhedron':
        points = _dedupe(p if isinstance(p, Vector) else Vector(p) for p in points)
        rays = () if not points else _dedupe(
            r for r in (r if isinstance(r, Vector) else Vector(r) for r in rays) if not r.is_zero())
        return cls(dim, vrep=VRep(dim, points, rays))

    @classmethod
    def full_space(cls, dim: int) -> 'Polyhedron':
        return cls(dim, hrep=HRep(Matrix((), dim), Vector(())))

    @classmethod
    def empty(cls, dim: int) -> 'Polyhedron':
        return cls(dim, vrep=VRep(dim, (), ()))

    @classmethod
    def singleton(cls, point) -> 'Polyhedron':
        point = point if isinstance(point, Vector) else Vector(point)
        return cls(len(point), vrep=VRep(len(point), (point,), ()))

    @classmethod
    def origin(cls, dim: int) -> 'Polyhedron':
        return cls.singleton(Vector.zero(dim))

    @property
    def hrep(self) -> HRep:
        if self._hrep is None:
            self._hrep = vrep_to_hrep(self._vrep)
        return self._hrep

    @property
    def vrep(self) -> VRep:
        if self._vrep is None:
            self._vrep = hrep_to_vrep(self._hrep)
            self._empty = self._vrep.is_empty
        return self._vrep

    @property
    def has_hrep(self) -> bool:
        return self._hrep is not None

    @property
    def has_vrep(self) -> bool:
        return self._vrep is not None

    def is_empty(self) -> bool:
        if self._empty is None:
            h = self._hrep
            self._empty = not lp_solve(LinearProgram(h.A, h.b)).is_optimal
        return self._empty

    def contains(self, x) -> bool:
        x = x if isinstance(x, Vector) else Vector(x)
        if len(x) != self.dim:
            raise InputError(f"Point has dimension {len(x)}, polyhedron has {self.dim}")
        if self._hrep is not None:
            return all(row.dot(x) <= b_i for row, b_i in zip(self._hrep.A.rows, self._hrep.b))
        v = self._vrep
        if v.is_empty:
            return False
        # x = sum mu_j p_j + sum nu_k r_k, sum mu_j = 1, mu, nu >= 0
        gens = v.points + v.rays
        rows = [Vector(g[i] for g in gens) for i in range(self.dim)]
        rows.append(Vector([1] * len(v.points) + [0] * len(v.rays)))
        lp = LinearProgram(Matrix(rows, len(gens)), x.concat((1,)),
                           senses=(EQ,) * len(rows), nonneg=(True,) * len(gens))
        return lp_solve(lp).is_optimal

    def a_point(self) -> Optional[Vector]:
        v = self.vrep
        return v.points[0] if v.points else None

    def to_json(self):
        return self.vrep.to_json()

    def __repr__(self):
        if self._vrep is not None:
            return f"Polyhedron(dim={self.dim}, points={len(self._vrep.points)}, rays={len(self._vrep.rays)})"
        return f"Polyhedron(dim={self.dim}, rows={self._hrep.A.nrows})"


def polyhedron_from_json(data, dim: int, location='polyhedron') -> Polyhedron:
    """Accept {"A", "b"} or {"points", "rays"}"""
    if not isinstance(data, dict):
        raise InputError("Polyhedron must be an object", location)
    if "A" in data or "b" in data:
        A = matrix_from_json(data.get("A", []), dim, f"{location}.A")
        b = vector_from_json(data.get("b", []), f"{location}.b")
        if len(b) != A.nrows:
            raise InputError(f"{A.nrows} rows but {len(b)} right sides", location)
        return Polyhedron.from_hrep(A, b)
    points = [vector_from_json(p, f"{location}.points[{i}]") for i, p in enumerate(data.get("points", []))]
    rays = [vector_from_json(r, f"{location}.rays[{i}]") for i, r in enumerate(data.get("rays", []))]
    for v in points + rays:
        if len(v) != dim:
            raise InputError(f"Generator has dimension {len(v)}, expected {dim}", location)
    return Polyhedron.from_vrep(dim, points, rays)


def _check_dims(*sets: Polyhedron) -> int:
    dims = {P.dim for P in sets}
    if len(dims) != 1:
        raise InputError(f"Polyhedra of different dimensions: {sorted(dims)}")
    return dims.pop()


# ---------------------------------------------------------------------------
# Relations

class Relation(str, Enum):
    EQUAL = "Equal"
    P_SUBSET_Q = "PsubsetQ"
    Q_SUBSET_P = "QsubsetP"
    INCOMPARABLE = "Incomparable"


@dataclass(frozen=True)
class RelateResult:
    relation: Relation
    witness_p_not_q: Optional[Vector] = None
    witness_q_not_p: Optional[Vector] = None

    @property
    def equal(self) -> bool:
        return self.relation == Relation.EQUAL

    @property
    def p_within_q(self) -> bool:
        return self.relation in (Relation.EQUAL, Relation.P_SUBSET_Q)


def outside_witness(P: Polyhedron, Q: Polyhedron) -> Optional[Vector]:
    """
    A point of P that is not in Q, or None when P ⊆ Q

    Uses the H-representation of Q when it is known; a Q held only by
    generators is tested by LP membership instead of a conversion.
    """
    v = P.vrep
    if v.is_empty:
        return None
    if not Q.has_hrep:
        return _outside_by_membership(v, Q)
    h = Q.hrep
    for row, b_i in zip(h.A.rows, h.b):
        for p in v.points:
            if row.dot(p) > b_i:
                return p
    p0 = v.points[0]
    for row, b_i in zip(h.A.rows, h.b):
        for r in v.rays:
            slope = row.dot(r)
            if slope > 0:
                base = row.dot(p0)
                t = max(Fraction(0), (b_i - base) / slope) + 1
                return p0 + r * t
    return None


def _outside_by_membership(v: VRep, Q: Polyhedron) -> Optional[Vector]:
    for p in v.points:
        if not Q.contains(p):
            return p
    if not v.rays:
        return None
    if Q.is_empty():
        return v.points[0]
    recession = Polyhedron.from_vrep(Q.dim, [Vector.zero(Q.dim)], Q.vrep.rays)
    p0 = v.points[0]
    for r in v.rays:
        if recession.contains(r):
            continue
        # p0 + t r leaves Q for t large enough
        t = Fraction(1)
        while Q.contains(p0 + r * t):
            t *= 2
        return p0 + r * t
    return None


def relate(P: Polyhedron, Q: Polyhedron) -> RelateResult:
    _check_dims(P, Q)
    p_out = outside_witness(P, Q)
    q_out = outside_witness(Q, P)
    if p_out is None and q_out is None:
        relation = Relation.EQUAL
    elif p_out is None:
        relation = Relation.P_SUBSET_Q
    elif q_out is None:
        relation = Relation.Q_SUBSET_P
    else:
        relation = Relation.INCOMPARABLE
    return RelateResult(relation, p_out, q_out)


def is_subset(P: Polyhedron, Q: Polyhedron) -> bool:
    _check_dims(P, Q)
    return outside_witness(P, Q) is None


# ---------------------------------------------------------------------------
# Set operations

def intersect(P: Polyhedron, *others: Polyhedron) -> Polyhedron:
    n = _check_dims(P, *others)
    rows, rhs = [], []
    for S in (P,) + others:
        rows.extend(S.hrep.A.rows)
        rhs.extend(S.hrep.b)
    return Polyhedron.from_hrep(Matrix(rows, n), Vector(rhs))


def minkowski_sum(P: Polyhedron, *others: Polyhedron) -> Polyhedron:
    n = _check_dims(P, *others)
    points = list(P.vrep.points)
    rays = list(P.vrep.rays)
    for S in others:
        v = S.vrep
        if v.is_empty or not points:
            return Polyhedron.empty(n)
        points = list(_dedupe(p + q for p in points for q in v.points))
        rays.extend(v.rays)
    return Polyhedron.from_vrep(n, points, rays)


def closed_conv_union(sets: Sequence[Polyhedron]) -> Polyhedron:
    """Closed convex hull of a finite union: conv(all points) + cone(all rays)"""
    sets = list(sets)
    if not sets:
        raise InputError("Closed convex hull of an empty family is undefined")
    n = _check_dims(*sets)
    points, rays = [], []
    for S in sets:
        v = S.vrep
        if v.is_empty:
            continue
        points.extend(v.points)
        rays.extend(v.rays)
    if not points:
        return Polyhedron.empty(n)
    return Polyhedron.from_vrep(n, points, rays)


def recession_cone(P: Polyhedron, path: Optional[str] = None) -> Polyhedron:
    """
    Recession cone of a nonempty polyhedron

    Args:
        path: 'h' ({Ax <= 0}), 'v' (cone of the rays) or None for whichever
              representation is already available
    """
    if P.is_empty():
        raise DomainError("Recession cone of the empty set is undefined")
    if path is None:
        path = 'v' if P.has_vrep else 'h'
    if path == 'h':
        h = P.hrep
        return Polyhedron.from_hrep(h.A, Vector.zero(h.A.nrows))
    if path == 'v':
        return Polyhedron.from_vrep(P.dim, [Vector.zero(P.dim)], P.vrep.rays)
    raise InputError(f"Unknown recession path {path!r}")


def dual_cone_neg(P: Polyhedron) -> Polyhedron:
    """A^- = {y : <y, a> <= 0 for all a in A}; the dual of the empty set is Q^n"""
    v = P.vrep
    gens = v.points + v.rays
    return Polyhedron.from_hrep(Matrix(gens, P.dim), Vector.zero(len(gens)))


def is_subspace(L: Polyhedron) -> bool:
    if L.is_empty() or not L.contains(Vector.zero(L.dim)):
        return False
    if not relate(L, negate(L)).equal:
        return False
    return relate(L, recession_cone(L)).equal


def orthogonal_subspace(L: Polyhedron) -> Polyhedron:
    if not is_subspace(L):
        raise DomainError("Orthogonal complement requires a linear subspace")
    D = dual_cone_neg(L)
    return intersect(D, negate(D))


def normal_cone_at(P: Polyhedron, x) -> Polyhedron:
    """N_P(x) = (P - x)^- for x in P, empty otherwise"""
    x = x if isinstance(x, Vector) else Vector(x)
    if not P.contains(x):
        return Polyhedron.empty(P.dim)
    h = P.hrep
    active = [row for row, b_i in zip(h.A.rows, h.b) if not row.is_zero() and row.dot(x) == b_i]
    return Polyhedron.from_vrep(P.dim, [Vector.zero(P.dim)], active)


def support_function(P: Polyhedron, d):
    """sigma_P(d): a rational, PLUS_INF, or MINUS_INF exactly when P is empty"""
    d = d if isinstance(d, Vector) else Vector(d)
    v = P.vrep
    if v.is_empty:
        return MINUS_INF
    if any(d.dot(r) > 0 for r in v.rays):
        return PLUS_INF
    return max(d.dot(p) for p in v.points)


def translate(P: Polyhedron, shift) -> Polyhedron:
    shift = shift if isinstance(shift, Vector) else Vector(shift)
    hrep = vrep = None
    if P.has_hrep:
        h = P.hrep
        hrep = HRep(h.A, h.b + h.A.mul_vec(shift))
    if P.has_vrep:
        v = P.vrep
        vrep = VRep(P.dim, tuple(p + shift for p in v.points), v.rays)
    return Polyhedron(P.dim, hrep, vrep)


def negate(P: Polyhedron) -> Polyhedron:
    hrep = vrep = None
    if P.has_hrep:
        h = P.hrep
        hrep = HRep(Matrix((-row for row in h.A.rows), P.dim), h.b)
    if P.has_vrep:
        v = P.vrep
        vrep = VRep(P.dim, tuple(-p for p in v.points), tuple(-r for r in v.rays))
    return Polyhedron(P.dim, hrep, vrep)


def scale_set(factor, P: Polyhedron) -> Polyhedron:
    """factor·P with 0·P = {θ} for nonempty P and factor·∅ = ∅"""
    factor = Fraction(factor)
    if factor < 0:
        return scale_set(-factor, negate(P))
    if P.is_empty():
        return Polyhedron.empty(P.dim)
    if factor == 0:
        return Polyhedron.origin(P.dim)
    hrep = vrep = None
    if P.has_hrep:
        h = P.hrep
        hrep = HRep(h.A, h.b * factor)
    if P.has_vrep:
        v = P.vrep
        vrep = VRep(P.dim, tuple(p * factor for p in v.points), v.rays)
    return Polyhedron(P.dim, hrep, vrep)


def eps_normal_set(P: Polyhedron, x, eps) -> Polyhedron:
    """{y : sigma_P(y) <= <y, x> + eps}, empty when x is outside P or eps < 0"""
    x = x if isinstance(x, Vector) else Vector(x)
    eps = Fraction(eps)
    if eps < 0 or not P.contains(x):
        return Polyhedron.empty(P.dim)
    v = P.vrep
    rows = [p - x for p in v.points] + list(v.rays)
    rhs = [eps] * len(v.points) + [Fraction(0)] * len(v.rays)
    return Polyhedron.from_hrep(Matrix(rows, P.dim), Vector(rhs))


def union_sum_recession(base: Polyhedron, others: Sequence[Polyhedron]) -> Tuple[Polyhedron, Polyhedron]:
    """
    Recession cones of co-bar(A ∪ A_1 ∪ ... ∪ A_k) and co-bar(A ∪ (A_1 + ... + A_k));
    the two agree for nonempty sets
    """
    if len(others) < 2:
        raise InputError("At least two further sets are required")
    union = closed_conv_union([base] + list(others))
    summed = closed_conv_union([base, minkowski_sum(*others)])
    return recession_cone(union), recession_cone(summed)


def split_scaled_recession(first: Sequence[Polyhedron], second: Sequence[Polyhedron],
                           factor) -> Tuple[Polyhedron, Polyhedron, Polyhedron]:
    """
    For disjoint nonempty families and factor m > 0, the recession cones of
    co-bar(∪ A_t), co-bar(∪_{T1} A_t ∪ ∪_{T2} m·A_t) and co-bar(∪ (A_s + m·A_t))
    """
    factor = Fraction(factor)
    if factor <= 0:
        raise DomainError("The scaling factor must be positive")
    if not first or not second:
        raise InputError("Both families must be nonempty")
    scaled = [scale_set(factor, S) for S in second]
    plain = closed_conv_union(list(first) + list(second))
    mixed = closed_conv_union(list(first) + scaled)
    pairwise = closed_conv_union([minkowski_sum(A, B) for A in first for B in scaled])
    return recession_cone(plain), recession_cone(mixed), recession_cone(pairwise)
