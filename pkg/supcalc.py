#!/usr/bin/env python3
"""
Supremum Calculus for supcalc
Finite families of polyhedral functions: active sets, normal cones to the
domain of the supremum and normal-cone-free subdifferential formulas
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from multiprocessing import Pool
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from kernel import DomainError, InputError, ResourceError, Vector, format_scalar, is_finite, to_scalar
from polyhedra import (
    Polyhedron, closed_conv_union, intersect, is_subset, is_subspace, minkowski_sum,
    normal_cone_at, recession_cone, relate, scale_set, translate,
)
from convexfn import (
    PolyConvexFn, eps_subdiff, eps_subdiff_pos_part_lemma, evaluate, lemvo_rhs, pos_part_lemma_set,
    positive_part, scale, conjugate, epigraph,
)

logger = logging.getLogger('SupCalc')


class SupFamily:
    """Ordered finite family {f_t} of polyhedral functions sharing one dimension"""

    def __init__(self, functions):
        items = list(functions.items()) if isinstance(functions, dict) else list(functions)
        if not items:
            raise InputError("A supremum family needs at least one function")
        ids = [str(t) for t, _ in items]
        if len(set(ids)) != len(ids):
            raise InputError(f"Duplicate function ids in {ids}")
        dims = {f.dim for _, f in items}
        if len(dims) != 1:
            raise InputError(f"Functions of different dimensions: {sorted(dims)}")
        self.functions: Tuple[Tuple[str, PolyConvexFn], ...] = tuple((str(t), f) for t, f in items)
        self.dim = dims.pop()
        self._lookup = dict(self.functions)
        self._collapsed = None

    @property
    def ids(self) -> Tuple[str, ...]:
        return tuple(t for t, _ in self.functions)

    def __getitem__(self, t) -> PolyConvexFn:
        return self._lookup[str(t)]

    def __iter__(self):
        return iter(self.functions)

    def __len__(self):
        return len(self.functions)

    def values(self, x) -> Dict[str, object]:
        return {t: evaluate(f, x) for t, f in self.functions}

    def __repr__(self):
        return f"SupFamily(dim={self.dim}, ids={list(self.ids)})"


class Weights:
    """Multiplicative parameters in (0, 1] attached to the members of a family"""

    EPSILON = 'epsilon_weights'
    RHO = 'rho_weights'

    def __init__(self, values: Dict[str, object], role: str = EPSILON):
        if role not in (self.EPSILON, self.RHO):
            raise InputError(f"Unknown weight role {role!r}")
        checked = {}
        for t, w in values.items():
            w = to_scalar(w, f"weights.{t}")
            if not 0 < w <= 1:
                raise InputError(f"Weight {w} of {t!r} is outside (0, 1]", f"weights.{t}")
            checked[str(t)] = w
        self.values = checked
        self.role = role

    @classmethod
    def ones(cls, F: SupFamily, role: str = EPSILON) -> 'Weights':
        return cls({t: Fraction(1) for t in F.ids}, role)

    @classmethod
    def custom(cls, F: SupFamily, values: Dict[str, object], role: str = EPSILON) -> 'Weights':
        unknown = set(map(str, values)) - set(F.ids)
        if unknown:
            raise InputError(f"Weights given for unknown ids {sorted(unknown)}")
        full = {t: values.get(t, 1) for t in F.ids}
        return cls(full, role)

    def __getitem__(self, t) -> Fraction:
        return self.values.get(str(t), Fraction(1))

    def to_json(self):
        return {t: format_scalar(w) for t, w in self.values.items()}

    def __repr__(self):
        return f"Weights({self.role}, {self.to_json()})"


@dataclass(frozen=True)
class ActiveSets:
    value: Fraction
    active: Tuple[str, ...]
    eps_active: Tuple[str, ...]
    eps_plus_active: Tuple[str, ...]


def collapse(F: SupFamily) -> PolyConvexFn:
    """sup_t f_t as one normal-form function: union of pieces over the common domain"""
    if F._collapsed is None:
        dom = intersect(*[f.domain for _, f in F.functions])
        if dom.is_empty():
            raise DomainError("Common domain is empty; the supremum is improper")
        pieces = [piece for _, f in F.functions for piece in f.pieces]
        F._collapsed = PolyConvexFn(pieces, dom)
    return F._collapsed


def common_domain(F: SupFamily) -> Polyhedron:
    return intersect(*[f.domain for _, f in F.functions])


def _point(x) -> Vector:
    return x if isinstance(x, Vector) else Vector(x)


def _finite_values(F: SupFamily, x) -> Dict[str, Fraction]:
    values = F.values(x)
    outside = [t for t, v in values.items() if not is_finite(v)]
    if outside:
        raise DomainError(f"Point lies outside the domain of {outside}")
    return values


def active_sets(F: SupFamily, x, eps) -> ActiveSets:
    eps = to_scalar(eps)
    if eps < 0:
        raise DomainError(f"Negative epsilon {eps}")
    values = _finite_values(F, _point(x))
    fx = max(values.values())
    active = tuple(t for t in F.ids if values[t] == fx)
    eps_active = tuple(t for t in F.ids if values[t] >= fx - eps)
    eps_plus = tuple(t for t in F.ids if values[t] >= fx - eps or values[t] >= 0)
    return ActiveSets(fx, active, eps_active, eps_plus)


def weights_cp1(F: SupFamily, x, eps) -> Weights:
    """ε_t = 1 on T_ε(x), -ε/(2f_t(x) - 2f(x) + ε) elsewhere"""
    eps = to_scalar(eps)
    if eps <= 0:
        raise DomainError("These weights need eps > 0")
    values = _finite_values(F, _point(x))
    fx = max(values.values())
    weights = {}
    for t in F.ids:
        ft = values[t]
        weights[t] = Fraction(1) if ft >= fx - eps else -eps / (2 * ft - 2 * fx + eps)
    return Weights(weights, Weights.EPSILON)


def weights_ones(F: SupFamily, role: str = Weights.EPSILON) -> Weights:
    return Weights.ones(F, role)


def rho_corr(F: SupFamily, x, eps) -> Weights:
    """ρ_t = ε/(2f(x) - 2f_t(x) + ε) off T(x), 1 on T(x)"""
    eps = to_scalar(eps)
    if eps <= 0:
        raise DomainError("These weights need eps > 0")
    values = _finite_values(F, _point(x))
    fx = max(values.values())
    weights = {}
    for t in F.ids:
        ft = values[t]
        weights[t] = Fraction(1) if ft == fx else eps / (2 * fx - 2 * ft + eps)
    return Weights(weights, Weights.RHO)


def resolve_weights(F: SupFamily, x, eps, choice, role: str) -> Weights:
    """Turn a weight choice ('cp1', 'corr', 'ones', a mapping or Weights) into Weights"""
    if isinstance(choice, Weights):
        return choice
    if isinstance(choice, dict):
        return Weights.custom(F, choice, role)
    if choice in (None, 'ones'):
        return weights_ones(F, role)
    if choice == 'cp1':
        return weights_cp1(F, x, eps)
    if choice == 'corr':
        return rho_corr(F, x, eps)
    raise InputError(f"Unknown weight choice {choice!r}")


def _check_query(F: SupFamily, x, eps) -> Tuple[Vector, Fraction]:
    x = _point(x)
    eps = to_scalar(eps)
    if eps <= 0:
        raise DomainError("The formula needs eps > 0")
    _finite_values(F, x)
    return x, eps


# ---------------------------------------------------------------------------
# Normal cone to the domain

def normal_cone_thm_p1(F: SupFamily, x, eps, weights=None) -> Polyhedron:
    """[co-bar(∪_t ∂_ε(ε_t f_t)(x))]_∞ for weights ε_t in (0, 1]"""
    x, eps = _check_query(F, x, eps)
    w = resolve_weights(F, x, eps, weights if weights is not None else 'cp1', Weights.EPSILON)
    sets = [eps_subdiff(scale(w[t], f), x, eps) for t, f in F]
    return recession_cone(closed_conv_union(sets))


def normal_cone_lemconsum(F: SupFamily, x, deltas: Dict[str, object], weights=None) -> Polyhedron:
    """Same recession formula with a separate ε value δ_t per member"""
    x = _point(x)
    _finite_values(F, x)
    delta = {}
    for t in F.ids:
        if t not in deltas:
            raise InputError(f"No delta given for {t!r}")
        delta[t] = to_scalar(deltas[t], f"deltas.{t}")
        if delta[t] <= 0:
            raise DomainError(f"delta of {t!r} must be positive")
    w = resolve_weights(F, x, min(delta.values()), weights if weights is not None else 'ones', Weights.EPSILON)
    sets = [eps_subdiff(scale(w[t], f), x, delta[t]) for t, f in F]
    return recession_cone(closed_conv_union(sets))


def pospart_kh_terms(F: SupFamily, x, eps, lambda_grid: Sequence) -> Tuple[List[Polyhedron], bool]:
    """
    Terms of the λ-union variant: ∂_ε f_t(x) on T_ε⁺(x) and, elsewhere, the
    positive-part lemma sets at the grid λ and at every certifying λ
    """
    x, eps = _check_query(F, x, eps)
    sets = active_sets(F, x, eps)
    terms, certified = [], True
    for t, f in F:
        if t in sets.eps_plus_active:
            terms.append(eps_subdiff(f, x, eps))
            continue
        lemma = eps_subdiff_pos_part_lemma(f, x, eps, lambda_grid)
        certified = certified and lemma.certified
        extra = [pos_part_lemma_set(f, x, eps, lam) for lam in lemma.certifying_lambdas]
        terms.append(closed_conv_union(list(lemma.union_sets) + extra))
    return terms, certified


def normal_cone_pospart(F: SupFamily, x, eps, variant: str = 'mmain', lambda_grid: Sequence = None) -> Polyhedron:
    """Normal cone through positive parts of the members outside T_ε(x)"""
    x, eps = _check_query(F, x, eps)
    if variant == 'mmain':
        sets = active_sets(F, x, eps)
        terms = [eps_subdiff(f if t in sets.eps_active else positive_part(f), x, eps) for t, f in F]
    elif variant == 'kh':
        if lambda_grid is None:
            from config import config
            lambda_grid = config.get_scalars('lemmas.lambda_grid', ["0", "1/4", "1/2", "3/4", "1"])
        terms, certified = pospart_kh_terms(F, x, eps, lambda_grid)
        if not certified:
            logger.warning("λ-union terms are not fully certified")
    else:
        raise InputError(f"Unknown positive-part variant {variant!r}")
    return recession_cone(closed_conv_union(terms))


def normal_cone_direct(F: SupFamily, x) -> Polyhedron:
    x = _point(x)
    dom = common_domain(F)
    if not dom.contains(x):
        raise DomainError("Point lies outside the common domain")
    return normal_cone_at(dom, x)


def normal_cone_hlz_epi(F: SupFamily, x) -> Polyhedron:
    """{x* : (x*, <x*, x>) in [co-bar(∪_t epi f_t*)]_∞} as an H-representation slice"""
    x = _point(x)
    _finite_values(F, x)
    n = F.dim
    cone = recession_cone(closed_conv_union([epigraph(conjugate(f)) for _, f in F]))
    h = cone.hrep
    rows = [row[:n] + x * row[n] for row in h.A.rows]
    return Polyhedron.from_inequalities(n, rows, h.b)


# ---------------------------------------------------------------------------
# Subdifferential formulas

def subdiff_direct(F: SupFamily, x) -> Polyhedron:
    x = _point(x)
    _finite_values(F, x)
    return eps_subdiff(collapse(F), x, 0)


def is_minimizer(F: SupFamily, x) -> bool:
    return subdiff_direct(F, x).contains(Vector.zero(F.dim))


def _rho_terms(F: SupFamily, x, eps, rho, inactive) -> List[Polyhedron]:
    w = resolve_weights(F, x, eps, rho if rho is not None else 'corr', Weights.RHO)
    return [scale_set(eps, eps_subdiff(scale(w[t], F[t]), x, eps)) for t in inactive]


def _split(F: SupFamily, x) -> Tuple[List[str], List[str]]:
    sets = active_sets(F, x, 0)
    inactive = [t for t in F.ids if t not in sets.active]
    return list(sets.active), inactive


def subdiff_rhs_t1(F: SupFamily, x, eps, rho=None) -> Polyhedron:
    """co-bar(∪_{T(x)} ∂_ε f_t(x) ∪ ∪_{T∖T(x)} ε·∂_ε(ρ_t f_t)(x))"""
    x, eps = _check_query(F, x, eps)
    active, inactive = _split(F, x)
    sets = [eps_subdiff(F[t], x, eps) for t in active]
    sets.extend(_rho_terms(F, x, eps, rho, inactive))
    return closed_conv_union(sets)


def subdiff_rhs_t1bis(F: SupFamily, x, eps, rho=None, variant: str = 'pair') -> Polyhedron:
    """
    co-bar of (∪_{T(x)} ∂_ε f_t(x)) + (∪_{T∖T(x)} {0, ε}·∂_ε(ρ_t f_t)(x))

    variant 'pair' uses the two-point factor set {0, ε}, 'interval' the
    segment [0, ε] and 'literal' expands the pairwise Minkowski sums.
    """
    x, eps = _check_query(F, x, eps)
    active, inactive = _split(F, x)
    origin = Polyhedron.origin(F.dim)
    active_sets_ = [eps_subdiff(F[t], x, eps) for t in active]
    scaled = _rho_terms(F, x, eps, rho, inactive)
    if variant == 'pair':
        tail = closed_conv_union([origin] + scaled)
    elif variant == 'interval':
        tail = closed_conv_union([closed_conv_union([origin, S]) for S in scaled] or [origin])
    elif variant == 'literal':
        summands = [minkowski_sum(A, B) for A in active_sets_ for B in [origin] + scaled]
        return closed_conv_union(summands)
    else:
        raise InputError(f"Unknown variant {variant!r}")
    return minkowski_sum(closed_conv_union(active_sets_), tail)


def subdiff_rhs_hlz(F: SupFamily, x, eps, L: Optional[Polyhedron] = None, active: str = 'exact') -> Polyhedron:
    """
    co-bar(∪_t ∂_ε f_t(x) + N_{L ∩ dom f}(x)) over T(x) ('exact') or T_ε(x) ('eps')

    L is an affine flat through x (Q^n when omitted).
    """
    x, eps = _check_query(F, x, eps)
    n = F.dim
    if L is None:
        L = Polyhedron.full_space(n)
    if L.dim != n:
        raise InputError(f"Subspace has dimension {L.dim}, expected {n}")
    if not L.contains(x):
        raise DomainError("The subspace does not contain the point")
    if not is_subspace(translate(L, -x)):
        raise DomainError("L must be a linear subspace through the point")
    sets = active_sets(F, x, eps)
    if active == 'exact':
        members = sets.active
    elif active == 'eps':
        members = sets.eps_active
    else:
        raise InputError(f"Unknown active-set choice {active!r}")
    cone = normal_cone_at(intersect(L, common_domain(F)), x)
    return closed_conv_union([minkowski_sum(eps_subdiff(F[t], x, eps), cone) for t in members])


def subdiff_rhs_brondsted(F: SupFamily, x, eps) -> Polyhedron:
    """co-bar(∪_{T(x)} ∂_ε f_t(x)) for families where every member is active"""
    x, eps = _check_query(F, x, eps)
    active, inactive = _split(F, x)
    if inactive:
        raise DomainError(f"Members {inactive} are not active at the point")
    return closed_conv_union([eps_subdiff(F[t], x, eps) for t in active])


def subdiff_rhs_lemvo(F: SupFamily, x, eps, M=0, positive: bool = False) -> Polyhedron:
    x, eps = _check_query(F, x, eps)
    return lemvo_rhs(collapse(F), x, eps, M, positive)


def _formula_t1(F, x, eps, rho=None, **_):
    return subdiff_rhs_t1(F, x, eps, rho)


def _formula_t1bis(F, x, eps, rho=None, **_):
    return subdiff_rhs_t1bis(F, x, eps, rho, 'pair')


def _formula_t1bis_interval(F, x, eps, rho=None, **_):
    return subdiff_rhs_t1bis(F, x, eps, rho, 'interval')


def _formula_t1bis_literal(F, x, eps, rho=None, **_):
    return subdiff_rhs_t1bis(F, x, eps, rho, 'literal')


def _formula_hlz(F, x, eps, L=None, **_):
    return subdiff_rhs_hlz(F, x, eps, L, 'exact')


def _formula_hlz_eps(F, x, eps, L=None, **_):
    return subdiff_rhs_hlz(F, x, eps, L, 'eps')


def _formula_brondsted(F, x, eps, **_):
    return subdiff_rhs_brondsted(F, x, eps)


def _formula_lemvo(F, x, eps, M=0, positive=False, **_):
    return subdiff_rhs_lemvo(F, x, eps, M, positive)


SUBDIFF_FORMULAS: Dict[str, Callable] = {
    't1': _formula_t1,
    't1bis': _formula_t1bis,
    't1bis_interval': _formula_t1bis_interval,
    't1bis_literal': _formula_t1bis_literal,
    'hlz': _formula_hlz,
    'hlz_eps': _formula_hlz_eps,
    'brondsted': _formula_brondsted,
    'lemvo': _formula_lemvo,
}

# formulas whose intersection over ε equals ∂f(x) only at minimizers
MINIMIZER_ONLY = frozenset({'t1', 'lemvo'})


def _normal_p1(F, x, eps, weights=None, **_):
    return normal_cone_thm_p1(F, x, eps, weights if weights is not None else 'cp1')


def _normal_cp1(F, x, eps, **_):
    return normal_cone_thm_p1(F, x, eps, 'cp1')


def _normal_ccor(F, x, eps, **_):
    return normal_cone_thm_p1(F, x, eps, 'ones')


def _normal_lemconsum(F, x, eps, deltas=None, weights=None, **_):
    if deltas is None:
        deltas = {t: eps for t in F.ids}
    return normal_cone_lemconsum(F, x, deltas, weights)


def _normal_mmain(F, x, eps, **_):
    return normal_cone_pospart(F, x, eps, 'mmain')


def _normal_kh(F, x, eps, lambda_grid=None, **_):
    return normal_cone_pospart(F, x, eps, 'kh', lambda_grid)


def _normal_hlz_epi(F, x, eps=None, **_):
    return normal_cone_hlz_epi(F, x)


def _normal_direct(F, x, eps=None, **_):
    return normal_cone_direct(F, x)


NORMAL_CONE_FORMULAS: Dict[str, Callable] = {
    'p1': _normal_p1,
    'cp1': _normal_cp1,
    'ccor': _normal_ccor,
    'lemconsum': _normal_lemconsum,
    'normalnew': _normal_mmain,
    'normalnew_kh': _normal_kh,
    'hlz_epi': _normal_hlz_epi,
    'direct': _normal_direct,
}


# ---------------------------------------------------------------------------
# Intersection over a grid of ε values

VERIFIED = 'verified'
INCONCLUSIVE = 'inconclusive'
REFUTED = 'refuted'


@dataclass
class ProbeResult:
    point: Vector
    excluded_at: Optional[Fraction]
    user_supplied: bool = False

    def to_json(self):
        return {
            "point": self.point.to_json(),
            "excluded_at": format_scalar(self.excluded_at) if self.excluded_at is not None else None,
            "user_supplied": self.user_supplied,
        }


@dataclass
class EpsReport:
    """Outcome of one intersect_over_eps run"""
    formula: str
    point: Vector
    grid: List[Fraction]
    inclusions: List[Tuple[Fraction, bool, Optional[Vector]]] = field(default_factory=list)
    stabilized: bool = False
    final_equal: bool = False
    claims_equality: bool = True
    probes: List[ProbeResult] = field(default_factory=list)
    status: str = VERIFIED
    notes: List[str] = field(default_factory=list)
    sets: Dict[Fraction, Polyhedron] = field(default_factory=dict)
    subdifferential: Optional[Polyhedron] = None
    family: Optional[SupFamily] = field(default=None, repr=False)
    params: Dict[str, object] = field(default_factory=dict, repr=False)
    floor: Fraction = Fraction(1, 1048576)
    refine_factor: Fraction = Fraction(1, 4)

    @property
    def witness(self) -> Optional[Vector]:
        return next((w for _, holds, w in self.inclusions if not holds), None)

    def to_json(self, include_sets: bool = True):
        data = {
            "formula": self.formula,
            "point": self.point.to_json(),
            "grid": [format_scalar(e) for e in self.grid],
            "inclusions": [{"epsilon": format_scalar(e), "holds": holds,
                            "witness": w.to_json() if w is not None else None}
                           for e, holds, w in self.inclusions],
            "stabilized": self.stabilized,
            "final_equal": self.final_equal,
            "claims_equality": self.claims_equality,
            "probes": [p.to_json() for p in self.probes],
            "status": self.status,
            "notes": list(self.notes),
        }
        if include_sets:
            data["subdifferential"] = self.subdifferential.to_json() if self.subdifferential else None
            data["sets"] = {format_scalar(e): S.to_json() for e, S in sorted(self.sets.items(), reverse=True)}
        return data


def _evaluate_rhs(job):
    name, F, x, eps, params = job
    return SUBDIFF_FORMULAS[name](F, x, eps, **params)


def _check_grid(grid: Sequence) -> List[Fraction]:
    grid = [to_scalar(e, f"grid[{i}]") for i, e in enumerate(grid)]
    if not grid:
        raise InputError("Empty epsilon grid")
    if any(e <= 0 for e in grid) or any(a <= b for a, b in zip(grid, grid[1:])):
        raise InputError("Epsilon grid must be positive and strictly decreasing")
    return grid


def _record(report: EpsReport, eps: Fraction, rhs: Polyhedron):
    rel = relate(report.subdifferential, rhs)
    report.sets[eps] = rhs
    report.inclusions.append((eps, rel.p_within_q, rel.witness_p_not_q))
    if not rel.p_within_q:
        logger.warning(f"{report.formula}: inclusion fails at eps={eps}, witness {rel.witness_p_not_q}")


def rhs_at(report: EpsReport, eps) -> Polyhedron:
    """The formula's set at ε, evaluated and checked on first use"""
    eps = to_scalar(eps)
    if eps not in report.sets:
        _record(report, eps, _evaluate_rhs((report.formula, report.family, report.point, eps, report.params)))
        if eps not in report.grid:
            report.grid.append(eps)
    return report.sets[eps]


def exclusion_epsilon(report: EpsReport, p: Vector, floor: Fraction, factor: Fraction) -> Optional[Fraction]:
    """
    Largest evaluated ε whose set misses p, refining geometrically below the
    smallest evaluated ε down to the floor; None when p survives
    """
    for eps in sorted(report.sets, reverse=True):
        if not report.sets[eps].contains(p):
            return eps
    eps = min(report.sets) * factor
    while eps >= floor:
        try:
            if not rhs_at(report, eps).contains(p):
                return eps
        except ResourceError as e:
            report.notes.append(f"refinement stopped: {e}")
            return None
        eps *= factor
    return None


def _settle(report: EpsReport):
    """Stabilization and final equality over every evaluated ε"""
    evaluated = sorted(report.sets, reverse=True)
    report.stabilized = len(evaluated) >= 2 and relate(report.sets[evaluated[-2]],
                                                        report.sets[evaluated[-1]]).equal
    report.final_equal = relate(report.subdifferential, report.sets[evaluated[-1]]).equal


def intersect_over_eps(formula: str, F: SupFamily, x, grid: Sequence = None, probes: Iterable = (),
                       workers: int = 1, floor=None, refine_factor=None, **params) -> EpsReport:
    """
    Evaluate a subdifferential formula along a decreasing ε grid

    Args:
        formula: Name in SUBDIFF_FORMULAS
        grid: Strictly decreasing positive ε values (configuration default when None)
        probes: Extra points to separate from the formula's sets
        workers: Pool size for the per-ε evaluations
        floor, refine_factor: Geometric refinement bounds for unexcluded probes
        params: Forwarded to the formula (rho, L, M, positive)

    Returns:
        EpsReport; refuted only when ∂f(x) ⊄ RHS(ε) for some tested ε
    """
    from config import config
    if formula not in SUBDIFF_FORMULAS:
        raise InputError(f"Unknown subdifferential formula {formula!r}")
    x = _point(x)
    grid = _check_grid(grid if grid is not None else config.get_epsilon_grid())
    floor = to_scalar(floor if floor is not None else config.get_scalar('epsilon.floor', "1/1048576"))
    factor = to_scalar(refine_factor if refine_factor is not None else config.get_scalar('epsilon.refine_factor', "1/4"))
    if not 0 < factor < 1:
        raise InputError("Refinement factor must lie in (0, 1)")

    S = subdiff_direct(F, x)
    minimizer = S.contains(Vector.zero(F.dim))
    report = EpsReport(formula, x, list(grid), subdifferential=S, family=F, params=dict(params),
                       floor=floor, refine_factor=factor)
    report.claims_equality = formula not in MINIMIZER_ONLY or minimizer
    L = params.get("L")
    if L is not None and not L.is_empty() and not is_subset(Polyhedron.full_space(F.dim), L):
        # a single proper subspace only bounds ∂f(x) from above
        report.claims_equality = False

    jobs = [(formula, F, x, eps, params) for eps in grid]
    if workers > 1 and len(jobs) > 1:
        with Pool(min(workers, len(jobs))) as pool:
            results = pool.map(_evaluate_rhs, jobs)
    else:
        results = [_evaluate_rhs(job) for job in jobs]
    for eps, rhs in zip(grid, results):
        _record(report, eps, rhs)

    if report.witness is not None:
        report.status = REFUTED
        _settle(report)
        return report

    candidates = _probe_candidates(S, report.sets[grid[0]])
    user = [_point(p) for p in probes]
    for p in user:
        if S.contains(p):
            report.notes.append(f"probe {[format_scalar(c) for c in p]} lies in the subdifferential")
    probe_points = [(p, False) for p in candidates] + [(p, True) for p in user if not S.contains(p)]

    for p, supplied in probe_points:
        if report.claims_equality:
            excluded = exclusion_epsilon(report, p, floor, factor)
        else:
            # the run only claims an inclusion; the grid sets decide the note
            excluded = next((eps for eps in grid if not report.sets[eps].contains(p)), None)
        report.probes.append(ProbeResult(p, excluded, supplied))
    _settle(report)

    survivors = [pr for pr in report.probes if pr.excluded_at is None]
    if report.witness is not None:
        report.status = REFUTED
    elif survivors:
        if report.claims_equality:
            report.status = INCONCLUSIVE
            report.notes.append(f"{len(survivors)} probe(s) not excluded at grid floor {format_scalar(floor)}")
        else:
            shown = [format_scalar(c) for c in survivors[0].point]
            report.notes.append(f"strict inclusion witnessed: probe {shown} stays in every tested RHS "
                                f"but not in the subdifferential")
    logger.debug(f"{formula} at {x}: {report.status}")
    return report


def _probe_candidates(S: Polyhedron, R: Polyhedron) -> List[Vector]:
    v = R.vrep
    candidates = [p for p in v.points if not S.contains(p)]
    if v.points:
        base = v.points[0]
        candidates.extend(base + r for r in v.rays if not S.contains(base + r))
    unique = {}
    for p in candidates:
        unique.setdefault(p, None)
    return list(unique)


def grid_intersection(report: EpsReport) -> Polyhedron:
    """Intersection of the RHS sets over the evaluated grid"""
    return intersect(*report.sets.values())


@dataclass
class CrossCheck:
    """Comparison of the grid intersections of two runs at the same point"""
    relation: str
    status: str
    differences: List[Tuple[str, Vector, Optional[Fraction]]] = field(default_factory=list)

    def to_json(self):
        return {
            "grid_relation": self.relation,
            "differences": [{"formula": name, "point": p.to_json(),
                             "excluded_at": format_scalar(e) if e is not None else None}
                            for name, p, e in self.differences],
        }


def cross_check(first: EpsReport, second: EpsReport) -> CrossCheck:
    """
    Equal grid intersections verify; a point of the difference inside ∂f(x)
    refutes. A point outside ∂f(x) held by a run that claims equality must be
    excluded at a refined ε of that run, otherwise the comparison is
    inconclusive.
    """
    S = first.subdifferential
    rel = relate(grid_intersection(first), grid_intersection(second))
    check = CrossCheck(rel.relation.value, VERIFIED)
    if rel.equal:
        return check
    outcomes = []
    for owner, other, p in ((first, second, rel.witness_p_not_q), (second, first, rel.witness_q_not_p)):
        if p is None:
            continue
        if S.contains(p):
            # p is in ∂f(x) but outside the other run's intersection
            check.differences.append((other.formula, p, None))
            outcomes.append(REFUTED)
            continue
        if not owner.claims_equality:
            check.differences.append((owner.formula, p, None))
            outcomes.append(VERIFIED)
            continue
        excluded = exclusion_epsilon(owner, p, owner.floor, owner.refine_factor)
        check.differences.append((owner.formula, p, excluded))
        outcomes.append(VERIFIED if excluded is not None else INCONCLUSIVE)
    check.status = max(outcomes, key=[VERIFIED, INCONCLUSIVE, REFUTED].index)
    return check
