#!/usr/bin/env python3
"""
Instance Files for supcalc
Parses and serializes instance JSON and generates seeded random instances
"""

import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional

import numpy as np

from kernel import InputError, Matrix, Vector, format_scalar, is_finite, to_scalar, vector_from_json
from polyhedra import Polyhedron, polyhedron_from_json
from convexfn import PolyConvexFn, evaluate, function_from_json
from supcalc import NORMAL_CONE_FORMULAS, SUBDIFF_FORMULAS, SupFamily, common_domain
from optimality import Program

QUERY_KINDS = ('normal_cone', 'subdiff', 'verify', 'certify')
WEIGHT_CHOICES = ('cp1', 'ones', 'corr')


@dataclass
class Query:
    """One request against an instance"""
    index: int
    kind: str
    point: Vector
    formula: Optional[str] = None
    epsilons: Optional[List[Fraction]] = None
    weights: Any = None
    probes: List[Vector] = field(default_factory=list)
    deltas: Optional[Dict[str, Fraction]] = None
    u_radii: Optional[List[Fraction]] = None
    rho: Optional[str] = None
    probe_slater: bool = False
    expect: Optional[str] = None
    M: Optional[Fraction] = None
    positive: bool = False
    subspace: Optional[Polyhedron] = None

    def to_json(self) -> Dict[str, Any]:
        data = {"kind": self.kind, "point": self.point.to_json()}
        if self.formula is not None:
            data["formula"] = self.formula
        if self.epsilons is not None:
            data["epsilons"] = [format_scalar(e) for e in self.epsilons]
        if self.weights is not None:
            data["weights"] = ({t: format_scalar(w) for t, w in self.weights.items()}
                               if isinstance(self.weights, dict) else self.weights)
        if self.probes:
            data["probes"] = [p.to_json() for p in self.probes]
        if self.deltas is not None:
            data["deltas"] = {t: format_scalar(d) for t, d in self.deltas.items()}
        if self.u_radii is not None:
            data["u_radii"] = [format_scalar(u) for u in self.u_radii]
        if self.rho is not None:
            data["rho"] = self.rho
        if self.probe_slater:
            data["probe_slater"] = True
        if self.expect is not None:
            data["expect"] = self.expect
        if self.M is not None:
            data["M"] = format_scalar(self.M)
        if self.positive:
            data["positive"] = True
        if self.subspace is not None:
            data["subspace"] = self.subspace.hrep.to_json()
        return data


@dataclass
class Instance:
    """A supremum family, an optional objective and the queries to run"""
    name: str
    dimension: int
    family: SupFamily
    queries: List[Query]
    objective: Optional[PolyConvexFn] = None

    @property
    def program(self) -> Optional[Program]:
        if self.objective is None:
            return None
        return Program(self.objective, self.family)

    def to_json(self) -> Dict[str, Any]:
        data = {
            "name": self.name,
            "dimension": self.dimension,
            "functions": [dict(id=t, **f.to_json()) for t, f in self.family],
        }
        if self.objective is not None:
            data["objective"] = self.objective.to_json()
        data["queries"] = [q.to_json() for q in self.queries]
        return data


class InstanceParser:
    """Validate instance JSON and build exact objects, reporting JSON locations on errors"""

    def __init__(self, source: str = "<instance>"):
        """
        Args:
            source: Name used as the prefix of every error location
        """
        self.source = source

    def where(self, path: str) -> str:
        return f"{self.source}:{path}"

    def parse(self, data: Dict[str, Any]) -> Instance:
        if not isinstance(data, dict):
            raise InputError("Instance must be a JSON object", self.where("$"))
        dimension = data.get("dimension")
        if not isinstance(dimension, int) or isinstance(dimension, bool) or dimension < 1:
            raise InputError("'dimension' must be a positive integer", self.where("dimension"))

        raw_functions = data.get("functions")
        if not isinstance(raw_functions, list) or not raw_functions:
            raise InputError("'functions' must be a nonempty list", self.where("functions"))
        members = []
        for i, raw in enumerate(raw_functions):
            path = self.where(f"functions[{i}]")
            if not isinstance(raw, dict):
                raise InputError("Function entry must be an object", path)
            fid = str(raw.get("id", f"f{i + 1}"))
            members.append((fid, function_from_json(raw, dimension, path)))
        family = SupFamily(members)

        objective = None
        if data.get("objective") is not None:
            objective = function_from_json(data["objective"], dimension, self.where("objective"))

        dom = common_domain(family)
        if dom.is_empty():
            raise InputError("Common domain of the family is empty", self.where("functions"))

        raw_queries = data.get("queries", [])
        if not isinstance(raw_queries, list):
            raise InputError("'queries' must be a list", self.where("queries"))
        queries = [self.parse_query(q, i, dimension, family, objective) for i, q in enumerate(raw_queries)]
        name = str(data.get("name", os.path.splitext(os.path.basename(self.source))[0]))
        return Instance(name, dimension, family, queries, objective)

    def _scalars(self, raw, path) -> List[Fraction]:
        if not isinstance(raw, list):
            raise InputError("Expected a list of rationals", self.where(path))
        return [to_scalar(v, self.where(f"{path}[{i}]")) for i, v in enumerate(raw)]

    def parse_query(self, raw, index: int, dimension: int, family: SupFamily,
                    objective: Optional[PolyConvexFn]) -> Query:
        path = f"queries[{index}]"
        if not isinstance(raw, dict):
            raise InputError("Query must be an object", self.where(path))
        kind = raw.get("kind")
        if kind not in QUERY_KINDS:
            raise InputError(f"Unknown query kind {kind!r}", self.where(f"{path}.kind"))
        point = vector_from_json(raw.get("point"), self.where(f"{path}.point"))
        if len(point) != dimension:
            raise InputError(f"Point has dimension {len(point)}, expected {dimension}", self.where(f"{path}.point"))
        values = family.values(point)
        if not all(is_finite(v) for v in values.values()):
            raise InputError("Point lies outside dom f", self.where(f"{path}.point"))

        query = Query(index, kind, point)
        formula = raw.get("formula")
        if formula is not None:
            known = NORMAL_CONE_FORMULAS if kind == 'normal_cone' else SUBDIFF_FORMULAS
            if kind in ('normal_cone', 'subdiff') and formula not in known:
                raise InputError(f"Unknown formula {formula!r}", self.where(f"{path}.formula"))
            query.formula = formula
        elif kind in ('normal_cone', 'subdiff'):
            raise InputError("Query needs a 'formula'", self.where(path))

        if "epsilons" in raw:
            query.epsilons = self._scalars(raw["epsilons"], f"{path}.epsilons")
            if any(e <= 0 for e in query.epsilons):
                raise InputError("Epsilons must be positive", self.where(f"{path}.epsilons"))
        weights = raw.get("weights")
        if isinstance(weights, dict):
            unknown = set(weights) - set(family.ids)
            if unknown:
                raise InputError(f"Weights for unknown ids {sorted(unknown)}", self.where(f"{path}.weights"))
            query.weights = {t: to_scalar(w, self.where(f"{path}.weights.{t}")) for t, w in weights.items()}
        elif weights is not None:
            if weights not in WEIGHT_CHOICES:
                raise InputError(f"Unknown weight choice {weights!r}", self.where(f"{path}.weights"))
            query.weights = weights
        for i, probe in enumerate(raw.get("probes", [])):
            p = vector_from_json(probe, self.where(f"{path}.probes[{i}]"))
            if len(p) != dimension:
                raise InputError("Probe dimension mismatch", self.where(f"{path}.probes[{i}]"))
            query.probes.append(p)
        if "deltas" in raw:
            deltas = raw["deltas"]
            if not isinstance(deltas, dict) or set(deltas) != set(family.ids):
                raise InputError("'deltas' must give one value per function id", self.where(f"{path}.deltas"))
            query.deltas = {t: to_scalar(d, self.where(f"{path}.deltas.{t}")) for t, d in deltas.items()}
        if "u_radii" in raw:
            query.u_radii = self._scalars(raw["u_radii"], f"{path}.u_radii")
        if raw.get("rho") is not None:
            if raw["rho"] not in ('corr', 'ones'):
                raise InputError(f"Unknown rho choice {raw['rho']!r}", self.where(f"{path}.rho"))
            query.rho = raw["rho"]
        query.probe_slater = bool(raw.get("probe_slater", False))
        query.expect = raw.get("expect")
        if "M" in raw:
            query.M = to_scalar(raw["M"], self.where(f"{path}.M"))
        query.positive = bool(raw.get("positive", False))
        if raw.get("subspace") is not None:
            query.subspace = polyhedron_from_json(raw["subspace"], dimension, self.where(f"{path}.subspace"))

        if kind == 'certify':
            if objective is None:
                raise InputError("certify queries need an 'objective'", self.where(path))
            if not Program(objective, family).is_feasible(point):
                raise InputError("Point is infeasible for the program", self.where(f"{path}.point"))
        return query


def parse_instance(data: Dict[str, Any], source: str = "<instance>") -> Instance:
    return InstanceParser(source).parse(data)


def load_instance(path: str) -> Instance:
    if not os.path.exists(path):
        raise InputError("Instance file not found", path)
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise InputError(f"Invalid JSON: {e.msg} (line {e.lineno})", path)
    return parse_instance(data, path)


def save_instance(instance: Instance, path: str):
    with open(path, 'w') as f:
        json.dump(instance.to_json(), f, indent=2)


# ---------------------------------------------------------------------------
# Random instances

def _int_vector(values) -> Vector:
    return Vector(int(v) for v in values)


def _random_function(rng: np.random.Generator, n: int, x0: Vector, max_pieces: int, max_rows: int,
                     indicator_like: bool) -> PolyConvexFn:
    if indicator_like:
        pieces = [(Vector.zero(n), int(rng.integers(-2, 1)))]
        nrows = int(rng.integers(1, max_rows + 1))
    else:
        count = int(rng.integers(1, max_pieces + 1))
        pieces = [(_int_vector(rng.integers(-3, 4, size=n)), int(rng.integers(-3, 4))) for _ in range(count)]
        nrows = int(rng.integers(0, max_rows + 1))
    rows, rhs = [], []
    for _ in range(nrows):
        row = _int_vector(rng.integers(-2, 3, size=n))
        slack = 0 if indicator_like else int(rng.integers(0, 3))
        rows.append(row)
        rhs.append(row.dot(x0) + slack)
    return PolyConvexFn(pieces, Polyhedron.from_hrep(Matrix(rows, n), Vector(rhs)))


def gen_random(seed: int, dimension: Optional[int] = None, size: Optional[int] = None,
               max_pieces: int = 4, max_rows: int = 4, minimizer: bool = False) -> Instance:
    """
    Seeded random family with a known common domain point x0

    Domains are shifted so that x0 satisfies every row (slack 0 keeps x0 on
    the boundary); half of the families start with an indicator-like member.
    With minimizer=True a bowl max_k ±w(x_k - x0_k) + c is added and the other
    members are shifted so that x0 minimizes the supremum.
    """
    rng = np.random.default_rng(seed)
    n = dimension if dimension is not None else int(rng.integers(1, 5))
    count = size if size is not None else int(rng.integers(1, 7))
    if not 1 <= n <= 4 or not 1 <= count <= 6:
        raise InputError("Random instances need 1 <= dimension <= 4 and 1 <= size <= 6")
    x0 = _int_vector(rng.integers(-2, 3, size=n))
    indicator_first = bool(rng.random() < 0.5)

    functions = []
    for k in range(count):
        functions.append(_random_function(rng, n, x0, max_pieces, max_rows, indicator_first and k == 0))

    if minimizer:
        w = int(rng.integers(1, 4))
        c = int(rng.integers(-2, 3))
        bowl = []
        for i in range(n):
            e = Vector.unit(n, i)
            bowl.append((e * w, c - w * x0[i]))
            bowl.append((e * -w, c + w * x0[i]))
        shifted = []
        for f in functions[:max(count - 1, 0)]:
            drop = evaluate(f, x0) - c + int(rng.integers(0, 2))
            shifted.append(PolyConvexFn([(a, b - drop) for a, b in f.pieces], f.domain))
        functions = [PolyConvexFn(bowl, Polyhedron.full_space(n))] + shifted

    family = SupFamily([(f"f{i + 1}", f) for i, f in enumerate(functions)])
    query = Query(0, 'verify', x0, expect='minimizer' if minimizer else None)
    kind = 'minimizer' if minimizer else 'random'
    return Instance(f"{kind}-{seed}", n, family, [query])


def gen_program(seed: int, dimension: Optional[int] = None, size: Optional[int] = None) -> Instance:
    """
    Seeded random program with a known optimal point

    Constraints are max-affine and vanish at x̄; the linear objective is
    -Σ μ_t a_t over their first pieces, so x̄ is optimal. With every
    constraint active, a Slater point makes the λ0 = 0 branch of certify
    infeasible once ε and u are small enough.
    """
    rng = np.random.default_rng(seed)
    n = dimension if dimension is not None else int(rng.integers(1, 4))
    count = size if size is not None else int(rng.integers(1, 4))
    xbar = _int_vector(rng.integers(-2, 3, size=n))
    members, gradient = [], Vector.zero(n)
    for k in range(count):
        pieces = []
        for _ in range(int(rng.integers(1, 3))):
            a = _int_vector(rng.integers(-2, 3, size=n))
            if a.is_zero():
                a = Vector.unit(n, k % n)
            pieces.append((a, -a.dot(xbar)))
        gradient = gradient + pieces[0][0] * int(rng.integers(1, 3))
        members.append((f"c{k + 1}", PolyConvexFn(pieces, Polyhedron.full_space(n))))
    objective = PolyConvexFn([(-gradient, gradient.dot(xbar))], Polyhedron.full_space(n))
    family = SupFamily(members)
    query = Query(0, 'certify', xbar, probe_slater=True)
    return Instance(f"program-{seed}", n, family, [query], objective)
