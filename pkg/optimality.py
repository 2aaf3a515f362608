#!/usr/bin/env python3
"""
Optimality Certificates for supcalc
Multiplier certificates for min g(x) subject to f_t(x) <= 0, Slater checks
and the probe for a positive objective multiplier
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from kernel import (
    EQ, LE, DomainError, InputError, LinearProgram, Matrix, Vector, format_scalar, is_finite,
    lp_solve, to_scalar,
)
from convexfn import PolyConvexFn, eps_subdiff, evaluate, fenchel_young_gap, scale
from supcalc import SupFamily, Weights, resolve_weights

logger = logging.getLogger('Optimality')

OBJECTIVE = 'objective'


class Program:
    """Convex program min g(x) subject to f_t(x) <= 0 for every member of the family"""

    def __init__(self, objective: PolyConvexFn, constraints: SupFamily):
        if objective.dim != constraints.dim:
            raise InputError(f"Objective has dimension {objective.dim}, constraints {constraints.dim}")
        if OBJECTIVE in constraints.ids:
            raise InputError(f"'{OBJECTIVE}' is reserved and cannot be a constraint id")
        self.objective = objective
        self.constraints = constraints
        self.dim = objective.dim

    def is_feasible(self, x) -> bool:
        x = x if isinstance(x, Vector) else Vector(x)
        if not is_finite(evaluate(self.objective, x)):
            return False
        for _, f in self.constraints:
            value = evaluate(f, x)
            if not is_finite(value) or value > 0:
                return False
        return True


@dataclass
class SlaterResult:
    witness: Optional[Vector]
    reason: str = ""
    value: Optional[Fraction] = None

    @property
    def holds(self) -> bool:
        return self.witness is not None


def slater_check(F: SupFamily) -> SlaterResult:
    """
    Find x0 with f_t(x0) < 0 for all t by minimizing s over {f_t-pieces <= s}
    on the common domain, with s >= -1 so the optimum is always attained
    """
    n = F.dim
    rows, rhs = [], []
    for _, f in F:
        for a, b in f.pieces:
            rows.append(a.concat((-1,)))
            rhs.append(-b)
        h = f.domain.hrep
        rows.extend(row.concat((0,)) for row in h.A.rows)
        rhs.extend(h.b)
    rows.append(Vector.zero(n).concat((-1,)))
    rhs.append(Fraction(1))
    lp = LinearProgram(Matrix(rows, n + 1), Vector(rhs), objective=Vector.unit(n + 1, n), sense='min')
    result = lp_solve(lp)
    if not result.is_optimal:
        return SlaterResult(None, "common domain is empty")
    if result.value < 0:
        return SlaterResult(result.point[:n], value=result.value)
    return SlaterResult(None, f"max_t f_t >= {format_scalar(result.value)} everywhere", result.value)


@dataclass
class OptimalityCheck:
    optimal: bool
    value: Optional[Fraction]
    point: Optional[Vector]
    reason: str = ""


def verify_optimal(program: Program, x) -> OptimalityCheck:
    """Exact LP on the collapsed program: min s with g-pieces <= s and every constraint piece <= 0"""
    x = x if isinstance(x, Vector) else Vector(x)
    if not program.is_feasible(x):
        return OptimalityCheck(False, None, None, "point is infeasible")
    n = program.dim
    rows, rhs = [], []
    g = program.objective
    for a, b in g.pieces:
        rows.append(a.concat((-1,)))
        rhs.append(-b)
    for row, d in zip(g.domain.hrep.A.rows, g.domain.hrep.b):
        rows.append(row.concat((0,)))
        rhs.append(d)
    for _, f in program.constraints:
        for a, b in f.pieces:
            rows.append(a.concat((0,)))
            rhs.append(-b)
        for row, d in zip(f.domain.hrep.A.rows, f.domain.hrep.b):
            rows.append(row.concat((0,)))
            rhs.append(d)
    lp = LinearProgram(Matrix(rows, n + 1), Vector(rhs), objective=Vector.unit(n + 1, n), sense='min')
    result = lp_solve(lp)
    gx = evaluate(g, x)
    if not result.is_optimal:
        return OptimalityCheck(False, None, None, "objective is unbounded below on the feasible set")
    optimal = result.value == gx
    reason = "" if optimal else f"optimal value {format_scalar(result.value)} < g(x) = {format_scalar(gx)}"
    return OptimalityCheck(optimal, result.value, result.point[:n], reason)


@dataclass
class Block:
    """One term of the multiplier inclusion"""
    label: str
    kind: str
    coefficient: Fraction
    function: PolyConvexFn
    points: Tuple[Vector, ...]
    rays: Tuple[Vector, ...]


@dataclass
class Certificate:
    """
    Exact certificate of θ ∈ λ0 ∂_ε g(x) + Σ_active λ_i ∂_ε f_i(x)
    + Σ_inactive ε λ_i ∂_ε(ρ_i f_i)(x) + U with U the box of radius u
    """
    epsilon: Fraction
    u: Fraction
    point: Vector
    active: Tuple[str, ...]
    inactive: Tuple[str, ...]
    multipliers: Dict[str, Fraction]
    points: Dict[str, Vector]
    slack: Vector
    rho: Dict[str, Fraction]

    def coefficient(self, label: str) -> Fraction:
        return self.epsilon if label in self.inactive else Fraction(1)

    def verify(self, program: Program) -> Tuple[bool, List[str]]:
        """Re-check every condition by substitution"""
        failures = []
        lambdas = self.multipliers
        if any(lam < 0 for lam in lambdas.values()):
            failures.append("negative multiplier")
        if sum(lambdas.values(), Fraction(0)) != 1:
            failures.append("multipliers do not sum to 1")
        total = Vector(self.slack)
        for label, lam in lambdas.items():
            fn = _block_function(program, label, self.point, self.rho)
            gap = fenchel_young_gap(fn, self.point, self.points[label])
            if not is_finite(gap) or gap > self.epsilon:
                failures.append(f"{label}: point is not in the eps-subdifferential")
            total = total + self.points[label] * (lam * self.coefficient(label))
        if not total.is_zero():
            failures.append("vector identity does not hold")
        if self.slack.max_norm() > self.u:
            failures.append("slack leaves the box")
        return not failures, failures

    @property
    def objective_multiplier(self) -> Fraction:
        return self.multipliers[OBJECTIVE]

    def to_json(self):
        return {
            "epsilon": format_scalar(self.epsilon),
            "u": format_scalar(self.u),
            "point": self.point.to_json(),
            "active": list(self.active),
            "inactive": list(self.inactive),
            "multipliers": {k: format_scalar(v) for k, v in self.multipliers.items()},
            "points": {k: v.to_json() for k, v in self.points.items()},
            "slack": self.slack.to_json(),
            "rho": {k: format_scalar(v) for k, v in self.rho.items()},
        }


@dataclass
class NoCertificate:
    reason: str
    farkas: Optional[Vector] = None

    def to_json(self):
        return {"reason": self.reason, "farkas": self.farkas.to_json() if self.farkas is not None else None}


def _block_function(program: Program, label: str, x: Vector, rho: Dict[str, Fraction]) -> PolyConvexFn:
    if label == OBJECTIVE:
        g = program.objective
        gx = evaluate(g, x)
        return PolyConvexFn([(a, b - gx) for a, b in g.pieces], g.domain)
    f = program.constraints[label]
    return scale(rho[label], f) if label in rho else f


def _rho_for(program: Program, x: Vector, eps: Fraction, rho) -> Weights:
    """Weights on the family {g - g(x), f_t}; at a feasible point f(x) = 0"""
    members = [(OBJECTIVE, _block_function(program, OBJECTIVE, x, {}))] + list(program.constraints)
    return resolve_weights(SupFamily(members), x, eps, rho, Weights.RHO)


def certify(program: Program, x, eps, u, rho='corr', force_lambda0_zero: bool = False):
    """
    Search multipliers for the optimality inclusion with one exact LP

    Every block contributes V-representation weights μ_ij >= 0 with
    Σ_j μ_ij = λ_i and ray weights ν_ik >= 0; the slack s is bounded by a
    variable τ <= u that is minimized.

    Returns:
        Certificate | NoCertificate
    """
    x = x if isinstance(x, Vector) else Vector(x)
    eps = to_scalar(eps)
    u = to_scalar(u)
    if eps <= 0 or u <= 0:
        raise DomainError("certify needs eps > 0 and u > 0")
    if not program.is_feasible(x):
        raise DomainError("The point is infeasible for the program")
    n = program.dim

    values = {t: evaluate(f, x) for t, f in program.constraints}
    active = tuple(t for t in program.constraints.ids if values[t] == 0)
    inactive = tuple(t for t in program.constraints.ids if values[t] < 0)
    weights = _rho_for(program, x, eps, rho)
    rho_values = {t: weights[t] for t in inactive}

    blocks = []
    for label, kind, coefficient in ([(OBJECTIVE, 'objective', Fraction(1))]
                                     + [(t, 'active', Fraction(1)) for t in active]
                                     + [(t, 'inactive', eps) for t in inactive]):
        fn = _block_function(program, label, x, rho_values)
        v = eps_subdiff(fn, x, eps).vrep
        blocks.append(Block(label, kind, coefficient, fn, v.points, v.rays))

    # variable layout: per block λ, μ..., ν...; then s (n, free); then τ
    offsets = []
    count = 0
    for block in blocks:
        offsets.append(count)
        count += 1 + len(block.points) + len(block.rays)
    s_start = count
    tau = s_start + n
    nvars = tau + 1
    nonneg = [True] * nvars
    for c in range(n):
        nonneg[s_start + c] = False

    rows, rhs, senses = [], [], []

    def add(coeffs, b, sense):
        row = [Fraction(0)] * nvars
        for j, value in coeffs:
            row[j] += value
        rows.append(row)
        rhs.append(Fraction(b))
        senses.append(sense)

    for block, off in zip(blocks, offsets):
        add([(off, -1)] + [(off + 1 + j, 1) for j in range(len(block.points))], 0, EQ)
    add([(off, 1) for off in offsets], 1, EQ)
    for c in range(n):
        coeffs = [(s_start + c, 1)]
        for block, off in zip(blocks, offsets):
            for j, p in enumerate(block.points):
                coeffs.append((off + 1 + j, block.coefficient * p[c]))
            for k, r in enumerate(block.rays):
                coeffs.append((off + 1 + len(block.points) + k, block.coefficient * r[c]))
        add(coeffs, 0, EQ)
    for c in range(n):
        add([(s_start + c, 1), (tau, -1)], 0, LE)
        add([(s_start + c, -1), (tau, -1)], 0, LE)
    add([(tau, 1)], u, LE)
    if force_lambda0_zero:
        add([(offsets[0], 1)], 0, EQ)

    objective = [Fraction(0)] * nvars
    objective[tau] = Fraction(1)
    lp = LinearProgram(Matrix(rows, nvars), Vector(rhs), senses=tuple(senses),
                       objective=Vector(objective), sense='min', nonneg=tuple(nonneg))
    result = lp_solve(lp)
    if not result.is_optimal:
        logger.debug(f"no certificate at eps={eps}, u={u}")
        return NoCertificate("multiplier LP is infeasible", result.farkas)

    sol = result.point
    slack = sol[s_start:s_start + n]
    box = sol[tau]
    lambdas, weighted = {}, {}
    for block, off in zip(blocks, offsets):
        lam = sol[off]
        mu = sol[off + 1:off + 1 + len(block.points)]
        nu = sol[off + 1 + len(block.points):off + 1 + len(block.points) + len(block.rays)]
        total = Vector.zero(n)
        for m, p in zip(mu, block.points):
            total = total + p * m
        for m, r in zip(nu, block.rays):
            total = total + r * m
        lambdas[block.label] = lam
        weighted[block.label] = (total, any(m != 0 for m in nu))

    # blocks with λ = 0 but nonzero ray weights: move a weight δ onto them
    limit_blocks = [b for b in blocks if lambdas[b.label] == 0 and weighted[b.label][1]]
    limit_labels = {b.label for b in limit_blocks}
    if limit_blocks:
        if box >= u:
            return NoCertificate("only limiting multipliers exist at this radius")
        if force_lambda0_zero and OBJECTIVE in limit_labels:
            return NoCertificate("the objective block is only reached in the limit")
        shift = Vector.zero(n)
        for b in limit_blocks:
            shift = shift + b.points[0] * b.coefficient
        K = shift.max_norm()
        delta = Fraction(1) if K == 0 else min(Fraction(1), (u - box) / K)
        norm = 1 + len(limit_blocks) * delta
        slack = (slack - shift * delta) / norm
        for b in blocks:
            total, _ = weighted[b.label]
            lam = lambdas[b.label]
            if b.label in limit_labels:
                total = total + b.points[0] * delta
                lam = lam + delta
            weighted[b.label] = (total / norm, False)
            lambdas[b.label] = lam / norm

    points = {}
    for b in blocks:
        lam = lambdas[b.label]
        total, _ = weighted[b.label]
        points[b.label] = total / lam if lam != 0 else b.points[0]

    certificate = Certificate(eps, u, x, active, inactive, lambdas, points, slack, rho_values)
    ok, failures = certificate.verify(program)
    if not ok:
        raise DomainError(f"Certificate failed re-verification: {failures}")
    return certificate


@dataclass
class ProbeReport:
    status: str
    reason: str = ""
    infeasible_pairs: List[Tuple[Fraction, Fraction]] = field(default_factory=list)
    feasible_pairs: List[Tuple[Fraction, Fraction]] = field(default_factory=list)
    limiting_pairs: List[Tuple[Fraction, Fraction]] = field(default_factory=list)
    farkas: Dict[Tuple[Fraction, Fraction], Vector] = field(default_factory=dict)
    slater_witness: Optional[Vector] = None

    def to_json(self):
        return {
            "status": self.status,
            "reason": self.reason,
            "slater_witness": self.slater_witness.to_json() if self.slater_witness is not None else None,
            "infeasible_pairs": [[format_scalar(e), format_scalar(u)] for e, u in self.infeasible_pairs],
            "feasible_pairs": [[format_scalar(e), format_scalar(u)] for e, u in self.feasible_pairs],
            "limiting_pairs": [[format_scalar(e), format_scalar(u)] for e, u in self.limiting_pairs],
            "farkas": [{"epsilon": format_scalar(e), "u": format_scalar(u), "y": y.to_json()}
                       for (e, u), y in self.farkas.items()],
        }


def slater_multiplier_probe(program: Program, x, pairs: Optional[Sequence[Tuple]] = None,
                            floor=None, rho='corr') -> ProbeReport:
    """
    Look for (ε, u) where no certificate with λ0 = 0 exists

    Pairs are tried in the given order, then halved from the last pair until
    the floor; skipped when the Slater condition fails or x is not optimal.
    """
    from config import config
    x = x if isinstance(x, Vector) else Vector(x)
    slater = slater_check(program.constraints)
    if not slater.holds:
        return ProbeReport('skipped', f"Slater condition fails: {slater.reason}")
    check = verify_optimal(program, x)
    if not check.optimal:
        return ProbeReport('skipped', f"point is not optimal: {check.reason}", slater_witness=slater.witness)
    if pairs is None:
        pairs = [(e, u) for e in config.get_scalars('optimality.epsilons', ["1/2", "1/8"])
                 for u in config.get_scalars('optimality.u_radii', ["1/2", "1/100"])]
    pairs = [(to_scalar(e), to_scalar(u)) for e, u in pairs]
    floor = to_scalar(floor if floor is not None else config.get_scalar('epsilon.floor', "1/1048576"))

    report = ProbeReport('inconclusive', slater_witness=slater.witness)

    def attempt(eps, u):
        outcome = certify(program, x, eps, u, rho, force_lambda0_zero=True)
        if isinstance(outcome, NoCertificate):
            if outcome.farkas is None:
                report.limiting_pairs.append((eps, u))
                return False
            report.infeasible_pairs.append((eps, u))
            report.farkas[(eps, u)] = outcome.farkas
            return True
        report.feasible_pairs.append((eps, u))
        return False

    for eps, u in pairs:
        attempt(eps, u)
    if not report.infeasible_pairs and pairs:
        eps, u = pairs[-1]
        while eps / 2 >= floor and u / 2 >= floor:
            eps, u = eps / 2, u / 2
            if attempt(eps, u):
                break
    if report.infeasible_pairs:
        report.status = 'supported'
        report.reason = "the λ0 = 0 branch is infeasible at some tested pair"
    else:
        report.reason = "the λ0 = 0 branch stayed feasible down to the floor"
    return report
