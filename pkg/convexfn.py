#!/usr/bin/env python3
"""
Polyhedral Convex Functions for supcalc
Max-affine functions over polyhedral domains: conjugates and eps-subdifferentials
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Optional, Sequence, Tuple

from kernel import (
    PLUS_INF, DomainError, InputError, LinearProgram, Matrix, Vector, format_scalar, is_finite,
    lp_solve, matrix_from_json, to_scalar, vector_from_json,
)
from polyhedra import (
    Polyhedron, closed_conv_union, is_subset, scale_set, support_function,
)

logger = logging.getLogger('ConvexFn')

Piece = Tuple[Vector, Fraction]


class PolyConvexFn:
    """
    Proper polyhedral convex function f(x) = max_i (<a_i, x> + b_i) on {x : Cx <= d}

    Args:
        pieces: Nonempty sequence of (a, b) pairs
        domain: Nonempty polyhedron (H-representation is used for evaluation)
    """

    def __init__(self, pieces: Iterable[Tuple[Iterable, object]], domain: Polyhedron):
        pieces = tuple(self._piece(a, b) for a, b in pieces)
        if not pieces:
            raise InputError("A polyhedral function needs at least one affine piece")
        dims = {len(a) for a, _ in pieces}
        if len(dims) != 1 or dims.pop() != domain.dim:
            raise InputError(f"Pieces and domain must share dimension {domain.dim}")
        if domain.is_empty():
            raise InputError("Domain is empty; the function would not be proper")
        unique = {}
        for a, b in pieces:
            unique.setdefault((a, b), None)
        self.pieces: Tuple[Piece, ...] = tuple(unique)
        self.domain = domain
        self.dim = domain.dim
        self._conjugate: Optional['PolyConvexFn'] = None
        self._positive_part: Optional['PolyConvexFn'] = None
        self._scaled: Dict[Fraction, 'PolyConvexFn'] = {}
        self._eps_subdiffs: Dict[Tuple[Vector, Fraction], Polyhedron] = {}

    @staticmethod
    def _piece(a, b) -> Piece:
        a = a if isinstance(a, Vector) else Vector(a)
        return a, to_scalar(b)

    def __call__(self, x):
        return evaluate(self, x)

    def __repr__(self):
        return f"PolyConvexFn(dim={self.dim}, pieces={len(self.pieces)}, domain_rows={self.domain.hrep.A.nrows})"

    def to_json(self):
        h = self.domain.hrep
        return {
            "pieces": [{"a": a.to_json(), "b": format_scalar(b)} for a, b in self.pieces],
            "domain": {"C": h.A.to_json(), "d": h.b.to_json()},
        }


def affine(a, b) -> PolyConvexFn:
    a = a if isinstance(a, Vector) else Vector(a)
    return PolyConvexFn([(a, b)], Polyhedron.full_space(len(a)))


def indicator(P: Polyhedron) -> PolyConvexFn:
    return PolyConvexFn([(Vector.zero(P.dim), 0)], P)


def max_affine(pieces, domain: Optional[Polyhedron] = None) -> PolyConvexFn:
    pieces = [(a if isinstance(a, Vector) else Vector(a), b) for a, b in pieces]
    if not pieces:
        raise InputError("A polyhedral function needs at least one affine piece")
    if domain is None:
        domain = Polyhedron.full_space(len(pieces[0][0]))
    return PolyConvexFn(pieces, domain)


def function_from_json(data, dim: int, location='function') -> PolyConvexFn:
    if not isinstance(data, dict):
        raise InputError("Function must be an object", location)
    raw_pieces = data.get("pieces")
    if not isinstance(raw_pieces, list) or not raw_pieces:
        raise InputError("'pieces' must be a nonempty list", location)
    pieces = []
    for i, piece in enumerate(raw_pieces):
        where = f"{location}.pieces[{i}]"
        if not isinstance(piece, dict) or "a" not in piece:
            raise InputError("Piece needs 'a' and 'b'", where)
        a = vector_from_json(piece["a"], f"{where}.a")
        if len(a) != dim:
            raise InputError(f"Slope has dimension {len(a)}, expected {dim}", where)
        pieces.append((a, to_scalar(piece.get("b", "0"), f"{where}.b")))
    raw_domain = data.get("domain") or {}
    if not isinstance(raw_domain, dict):
        raise InputError("'domain' must be an object", f"{location}.domain")
    C = matrix_from_json(raw_domain.get("C", []), dim, f"{location}.domain.C")
    d = vector_from_json(raw_domain.get("d", []), f"{location}.domain.d")
    if len(d) != C.nrows:
        raise InputError(f"{C.nrows} domain rows but {len(d)} right sides", f"{location}.domain")
    domain = Polyhedron.from_hrep(C, d)
    if domain.is_empty():
        raise InputError("Domain is empty; the function would not be proper", f"{location}.domain")
    return PolyConvexFn(pieces, domain)


def evaluate(f: PolyConvexFn, x):
    """f(x), or PLUS_INF outside the domain"""
    x = x if isinstance(x, Vector) else Vector(x)
    if len(x) != f.dim:
        raise InputError(f"Point has dimension {len(x)}, function has {f.dim}")
    if not f.domain.contains(x):
        return PLUS_INF
    return max(a.dot(x) + b for a, b in f.pieces)


def domain(f: PolyConvexFn) -> Polyhedron:
    return f.domain


def epigraph(f: PolyConvexFn) -> Polyhedron:
    """{(x, t) : <a_i, x> + b_i <= t, Cx <= d} in dimension n + 1"""
    n = f.dim
    rows = [a.concat((-1,)) for a, _ in f.pieces]
    rhs = [-b for _, b in f.pieces]
    h = f.domain.hrep
    rows.extend(row.concat((0,)) for row in h.A.rows)
    rhs.extend(h.b)
    return Polyhedron.from_hrep(Matrix(rows, n + 1), Vector(rhs))


def conjugate(f: PolyConvexFn) -> PolyConvexFn:
    """
    Fenchel conjugate from the V-representation of the epigraph

    Every epigraph point (v, t) contributes the piece <v, .> - t, and every
    epigraph ray (r, rho) with r != 0 the domain row <., r> <= rho.
    """
    if f._conjugate is None:
        n = f.dim
        epi = epigraph(f).vrep
        pieces = [(p[:n], -p[n]) for p in epi.points]
        rows, rhs = [], []
        for r in epi.rays:
            direction = r[:n]
            if direction.is_zero():
                continue
            rows.append(direction)
            rhs.append(r[n])
        f._conjugate = PolyConvexFn(pieces, Polyhedron.from_hrep(Matrix(rows, n), Vector(rhs)))
        logger.debug(f"conjugate: {len(pieces)} pieces, {len(rows)} domain rows")
    return f._conjugate


def eps_subdiff(f: PolyConvexFn, x, eps) -> Polyhedron:
    """
    ∂_ε f(x) = {x* : f*(x*) <= <x*, x> - f(x) + ε}

    Empty when ε < 0 or x is outside dom f. Results are kept per (x, ε) on f,
    so repeated queries share one polyhedron and its converted representation.
    """
    x = x if isinstance(x, Vector) else Vector(x)
    eps = to_scalar(eps)
    cached = f._eps_subdiffs.get((x, eps))
    if cached is not None:
        return cached
    fx = evaluate(f, x)
    if eps < 0 or not is_finite(fx):
        return Polyhedron.empty(f.dim)
    g = conjugate(f)
    rows = [v - x for v, _ in g.pieces]
    rhs = [-c - fx + eps for _, c in g.pieces]
    h = g.domain.hrep
    rows.extend(h.A.rows)
    rhs.extend(h.b)
    result = Polyhedron.from_hrep(Matrix(rows, f.dim), Vector(rhs))
    f._eps_subdiffs[(x, eps)] = result
    return result


def subdiff(f: PolyConvexFn, x) -> Polyhedron:
    return eps_subdiff(f, x, 0)


def in_eps_subdiff_direct(f: PolyConvexFn, x, eps, xs) -> bool:
    """
    Membership of x* in ∂_ε f(x) straight from f(y) >= f(x) + <x*, y - x> - ε

    Solved as min over (y, s) of s - <x*, y> with s >= every piece on dom f.
    """
    x = x if isinstance(x, Vector) else Vector(x)
    xs = xs if isinstance(xs, Vector) else Vector(xs)
    eps = to_scalar(eps)
    fx = evaluate(f, x)
    if eps < 0 or not is_finite(fx):
        return False
    n = f.dim
    rows = [a.concat((-1,)) for a, _ in f.pieces]
    rhs = [-b for _, b in f.pieces]
    h = f.domain.hrep
    rows.extend(row.concat((0,)) for row in h.A.rows)
    rhs.extend(h.b)
    objective = (-xs).concat((1,))
    result = lp_solve(LinearProgram(Matrix(rows, n + 1), Vector(rhs), objective=objective, sense='min'))
    if not result.is_optimal:
        return False
    return result.value >= fx - xs.dot(x) - eps


def fenchel_young_gap(f: PolyConvexFn, x, xs):
    """f(x) + f*(x*) - <x*, x>, PLUS_INF outside either domain"""
    xs = xs if isinstance(xs, Vector) else Vector(xs)
    fx = evaluate(f, x)
    if not is_finite(fx):
        return PLUS_INF
    fs = evaluate(conjugate(f), xs)
    if not is_finite(fs):
        return PLUS_INF
    return fx + fs - xs.dot(x if isinstance(x, Vector) else Vector(x))


def scale(factor, f: PolyConvexFn) -> PolyConvexFn:
    """λf for λ > 0; 0·f is the indicator of dom f"""
    factor = to_scalar(factor)
    if factor < 0:
        raise DomainError(f"Negative scaling factor {factor}")
    if factor == 0:
        return indicator(f.domain)
    if factor == 1:
        return f
    if factor not in f._scaled:
        f._scaled[factor] = PolyConvexFn([(a * factor, b * factor) for a, b in f.pieces], f.domain)
    return f._scaled[factor]


def positive_part(f: PolyConvexFn) -> PolyConvexFn:
    if f._positive_part is None:
        f._positive_part = PolyConvexFn(list(f.pieces) + [(Vector.zero(f.dim), 0)], f.domain)
    return f._positive_part


@dataclass(frozen=True)
class PosPartLemmaResult:
    """Grid sets of the positive-part lemma and the per-vertex certification"""
    grid: Tuple[Fraction, ...]
    union_sets: Tuple[Polyhedron, ...]
    direct: Polyhedron
    vertex_lambdas: Tuple[Tuple[Vector, Optional[Fraction]], ...]

    @property
    def certified(self) -> bool:
        return all(lam is not None for _, lam in self.vertex_lambdas)

    @property
    def certifying_lambdas(self) -> Tuple[Fraction, ...]:
        return tuple(sorted({lam for _, lam in self.vertex_lambdas if lam is not None}))


def _shifted_eps(f: PolyConvexFn, x, eps, lam) -> Fraction:
    fx = evaluate(f, x)
    return eps + lam * fx - max(fx, Fraction(0))


def pos_part_lemma_set(f: PolyConvexFn, x, eps, lam) -> Polyhedron:
    """∂_{ε + λf(x) - f⁺(x)}(λf)(x), empty when the shifted ε is negative"""
    return eps_subdiff(scale(lam, f), x, _shifted_eps(f, x, to_scalar(eps), to_scalar(lam)))


def certifying_lambda(f: PolyConvexFn, x, eps, v) -> Optional[Fraction]:
    """
    A λ in [0, 1], the smallest one when attained, with v in ∂_{ε + λf(x) - f⁺(x)}(λf)(x), or None

    With f* = max_j(<., p_j> + c_j) on {<., r_k> <= ρ_k}, the membership reads
    c_j λ <= RHS - <v, p_j> and -ρ_k λ <= -<v, r_k>, with RHS = <v, x> + ε - f⁺(x).
    """
    x = x if isinstance(x, Vector) else Vector(x)
    v = v if isinstance(v, Vector) else Vector(v)
    eps = to_scalar(eps)
    fx = evaluate(f, x)
    if not is_finite(fx):
        return None
    fplus = max(fx, Fraction(0))
    rhs = v.dot(x) + eps - fplus
    g = conjugate(f)
    constraints = [(c, rhs - v.dot(p)) for p, c in g.pieces]
    h = g.domain.hrep
    constraints.extend((-rho, -v.dot(r)) for r, rho in zip(h.A.rows, h.b))
    constraints.append((-fx, eps - fplus))
    lo, hi = Fraction(0), Fraction(1)
    for coef, bound in constraints:
        if coef > 0:
            hi = min(hi, bound / coef)
        elif coef < 0:
            lo = max(lo, bound / coef)
        elif bound < 0:
            return None
    if lo > hi:
        return None
    if lo == 0 and support_function(f.domain, v) > rhs:
        # λ = 0 fails; every λ in (0, hi] works
        return hi if hi > 0 else None
    return lo


def eps_subdiff_pos_part_lemma(f: PolyConvexFn, x, eps, lambda_grid: Sequence) -> PosPartLemmaResult:
    """
    Positive-part lemma: ∂_ε f⁺(x) is the union over λ in [0,1] of the sets
    ∂_{ε + λf(x) - f⁺(x)}(λf)(x); grid sets are returned and every vertex of
    the directly computed ∂_ε f⁺(x) is certified by an exact λ
    """
    x = x if isinstance(x, Vector) else Vector(x)
    eps = to_scalar(eps)
    grid = tuple(to_scalar(lam) for lam in lambda_grid)
    if any(lam < 0 or lam > 1 for lam in grid) or 0 not in grid or 1 not in grid:
        raise InputError("lambda grid must lie in [0, 1] and contain 0 and 1")
    if eps < 0:
        raise DomainError(f"Negative epsilon {eps}")
    if not is_finite(evaluate(f, x)):
        raise DomainError("Point is outside the domain")
    union_sets = tuple(pos_part_lemma_set(f, x, eps, lam) for lam in grid)
    direct = eps_subdiff(positive_part(f), x, eps)
    vertex_lambdas = tuple((v, certifying_lambda(f, x, eps, v)) for v in direct.vrep.points)
    result = PosPartLemmaResult(grid, union_sets, direct, vertex_lambdas)
    if not result.certified:
        logger.warning(f"positive-part lemma left vertices uncertified at eps={eps}")
    return result


def eps_directional_derivative(f: PolyConvexFn, x, eps, d):
    eps = to_scalar(eps)
    if eps <= 0:
        raise DomainError("The eps-directional derivative needs eps > 0")
    return support_function(eps_subdiff(f, x, eps), d)


def lemvo_rhs(f: PolyConvexFn, x, eps, M, positive: bool = False) -> Polyhedron:
    """co-bar(∂_ε f(x) ∪ ε·∂_{ε+M} g(x)) with g = f or f⁺"""
    eps = to_scalar(eps)
    M = to_scalar(M)
    if M < 0:
        raise DomainError(f"Negative M {M}")
    g = positive_part(f) if positive else f
    return closed_conv_union([eps_subdiff(f, x, eps), scale_set(eps, eps_subdiff(g, x, eps + M))])


def grid_sets_within_direct(result: PosPartLemmaResult) -> bool:
    return all(is_subset(S, result.direct) for S in result.union_sets)
