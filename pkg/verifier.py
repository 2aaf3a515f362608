#!/usr/bin/env python3
"""
Verification Service for supcalc
Runs instance queries, assigns verified / inconclusive / refuted statuses and
assembles JSON reports, optionally on a pool of worker processes
"""

import json
import logging
import multiprocessing
import os
import time
from fractions import Fraction
from typing import Any, Dict, List, Optional

import numpy as np
import psutil

from config import config
from kernel import ResourceError, Vector, format_scalar
from polyhedra import (
    Polyhedron, eps_normal_set, normal_cone_at, recession_cone, relate, split_scaled_recession,
    union_sum_recession,
)
from convexfn import eps_subdiff, eps_subdiff_pos_part_lemma, grid_sets_within_direct, scale
from supcalc import (
    INCONCLUSIVE, NORMAL_CONE_FORMULAS, REFUTED, VERIFIED, SupFamily, Weights, active_sets, collapse,
    common_domain, cross_check, intersect_over_eps, is_minimizer, normal_cone_direct,
)
from optimality import Certificate, certify, slater_multiplier_probe, verify_optimal
from instance import Instance, Query, load_instance

STATUS_RANK = {VERIFIED: 0, INCONCLUSIVE: 1, REFUTED: 2}
EXIT_CODES = {VERIFIED: 0, REFUTED: 1, INCONCLUSIVE: 2}


def worst(statuses) -> str:
    return max(statuses, key=lambda s: STATUS_RANK[s], default=VERIFIED)


def _check(name: str, status: str, **detail) -> Dict[str, Any]:
    entry = {"name": name, "status": status}
    entry.update(detail)
    return entry


def _eps_json(eps) -> Optional[str]:
    return format_scalar(eps) if eps is not None else None


def _compare(name: str, computed: Polyhedron, oracle: Polyhedron, eps=None, **detail) -> Dict[str, Any]:
    """Equality check against an oracle set; a mismatch carries a point of the difference"""
    rel = relate(computed, oracle)
    if rel.equal:
        return _check(name, VERIFIED, epsilon=_eps_json(eps), **detail)
    witness = rel.witness_p_not_q if rel.witness_p_not_q is not None else rel.witness_q_not_p
    return _check(name, REFUTED, epsilon=_eps_json(eps), relation=rel.relation.value,
                  witness=witness.to_json(), **detail)


class QueryRunner:
    """Executes the queries of one instance"""

    def __init__(self, instance: Instance):
        self.instance = instance
        self.family: SupFamily = instance.family
        self.logger = logging.getLogger('QueryRunner')

    def epsilons(self, query: Query) -> List[Fraction]:
        return list(query.epsilons) if query.epsilons else config.get_epsilon_grid()

    def run(self, query: Query) -> Dict[str, Any]:
        started = time.time()
        result = {"index": query.index, "kind": query.kind, "point": query.point.to_json(),
                  "formula": query.formula, "checks": [], "notes": [], "sets": {}}
        try:
            handler = getattr(self, f"run_{query.kind}")
            handler(query, result)
        except ResourceError as e:
            self.logger.warning(f"Query {query.index}: {e}")
            result["notes"].append(f"resource limit: {e}")
            result["checks"].append(_check("resource", INCONCLUSIVE, detail=str(e)))
        result["status"] = worst(c["status"] for c in result["checks"])
        result["wall_time"] = round(time.time() - started, 3)
        return result

    # -- normal cones -------------------------------------------------------

    def run_normal_cone(self, query: Query, result: Dict[str, Any]):
        F, x = self.family, query.point
        direct = normal_cone_direct(F, x)
        result["sets"]["direct"] = direct.to_json()
        formula = NORMAL_CONE_FORMULAS[query.formula]
        grid = self.epsilons(query)
        if query.formula in ('hlz_epi', 'direct'):
            grid = grid[:1]
        per_eps = {}
        for eps in grid:
            deltas = query.deltas
            if query.formula == 'lemconsum' and deltas is None:
                deltas = {t: eps for t in F.ids}
            cone = formula(F, x, eps, weights=query.weights, deltas=deltas)
            per_eps[format_scalar(eps)] = cone.to_json()
            result["checks"].append(_compare(query.formula, cone, direct, eps))
        result["sets"]["formula"] = per_eps

    # -- subdifferentials ---------------------------------------------------

    def _eps_run(self, query: Query, formula: str, **params):
        grid = self.epsilons(query)
        rho = query.rho or (query.weights if query.weights not in (None, 'cp1') else 'corr')
        return intersect_over_eps(formula, self.family, query.point, grid, query.probes,
                                  rho=rho, L=query.subspace, **params)

    def _report_check(self, name: str, report) -> Dict[str, Any]:
        detail = {"stabilized": report.stabilized, "final_equal": report.final_equal,
                  "claims_equality": report.claims_equality, "notes": list(report.notes)}
        if report.witness is not None:
            detail["witness"] = report.witness.to_json()
        return _check(name, report.status, **detail)

    def run_subdiff(self, query: Query, result: Dict[str, Any]):
        params = {}
        if query.formula == 'lemvo':
            params = {"M": query.M if query.M is not None else Fraction(0), "positive": query.positive}
        report = self._eps_run(query, query.formula, **params)
        check = self._report_check(query.formula, report)
        result["checks"].append(check)
        result["notes"].extend(report.notes)
        if query.expect == 'strict_inclusion':
            witnessed = any(n.startswith("strict inclusion witnessed") for n in report.notes)
            result["checks"].append(_check("strict_inclusion", VERIFIED if witnessed else INCONCLUSIVE))
        result["sets"]["report"] = report.to_json()

    # -- full battery -------------------------------------------------------

    def run_verify(self, query: Query, result: Dict[str, Any]):
        F, x = self.family, query.point
        checks = result["checks"]
        grid = self.epsilons(query)
        rng = np.random.default_rng(query.index + 7919 * len(F))
        lambda_grid = config.get_scalars('lemmas.lambda_grid', ["0", "1/4", "1/2", "3/4", "1"])

        dom = common_domain(F)
        checks.append(_compare("domain", collapse(F).domain, dom))
        direct = normal_cone_direct(F, x)
        result["sets"]["normal_cone"] = direct.to_json()
        checks.append(_compare("normal_cone_collapsed", normal_cone_at(collapse(F).domain, x), direct))
        checks.append(_compare("hlz_epi", NORMAL_CONE_FORMULAS['hlz_epi'](F, x), direct))

        multipliers = [Fraction(1), Fraction(1, 4), Fraction(4)]
        for eps in grid:
            random_weights = Weights({t: Fraction(int(rng.integers(1, 9)), 8) for t in F.ids})
            for label, weights in (("p1_cp1", 'cp1'), ("ccor", 'ones'), ("p1_random", random_weights)):
                cone = NORMAL_CONE_FORMULAS['p1'](F, x, eps, weights=weights)
                checks.append(_compare(label, cone, direct, eps))
            deltas = query.deltas or {t: eps * multipliers[i % 3] for i, t in enumerate(F.ids)}
            checks.append(_compare("lemconsum", NORMAL_CONE_FORMULAS['lemconsum'](F, x, eps, deltas=deltas),
                                   direct, eps))
            checks.append(_compare("normalnew", NORMAL_CONE_FORMULAS['normalnew'](F, x, eps), direct, eps))
            checks.append(_compare("normalnew_kh", NORMAL_CONE_FORMULAS['normalnew_kh'](
                F, x, eps, lambda_grid=lambda_grid), direct, eps))
            for t, f in F:
                checks.append(_compare(f"recession[{t}]", recession_cone(eps_subdiff(f, x, eps)),
                                       normal_cone_at(f.domain, x), eps))
                lemma = eps_subdiff_pos_part_lemma(f, x, eps, lambda_grid)
                ok = lemma.certified and grid_sets_within_direct(lemma)
                checks.append(_check(f"positive_part[{t}]", VERIFIED if ok else REFUTED, epsilon=_eps_json(eps),
                                     certifying_lambdas=[format_scalar(v) for v in lemma.certifying_lambdas]))
            members = [eps_subdiff(f, x, eps) for _, f in F]
            if len(members) >= 3:
                union_cone, sum_cone = union_sum_recession(members[0], members[1:])
                checks.append(_compare("recession_union_sum", union_cone, sum_cone, eps))
            if len(members) >= 2:
                half = len(members) // 2
                for m in (Fraction(1, 2), Fraction(1), Fraction(3)):
                    plain, mixed, pairwise = split_scaled_recession(members[:half], members[half:], m)
                    checks.append(_compare("recession_split_scaled", plain, mixed, eps, factor=format_scalar(m)))
                    checks.append(_compare("recession_split_pairwise", mixed, pairwise, eps,
                                           factor=format_scalar(m)))
        for t, f in F:
            checks.append(_compare(f"zero_scaling[{t}]", eps_subdiff(scale(0, f), x, grid[0]),
                                   eps_normal_set(f.domain, x, grid[0]), grid[0]))

        minimizer = is_minimizer(F, x)
        result["minimizer"] = minimizer
        if query.expect == 'minimizer':
            checks.append(_check("minimizer", VERIFIED if minimizer else REFUTED,
                                 witness=None if minimizer else Vector.zero(F.dim).to_json()))

        reports = {}
        for formula in ('t1bis', 't1bis_interval', 't1', 'hlz'):
            reports[formula] = self._eps_run(query, formula)
            checks.append(self._report_check(formula, reports[formula]))
            result["notes"].extend(f"{formula}: {n}" for n in reports[formula].notes)
        for eps in grid:
            checks.append(_compare("t1bis_interval_variant", reports['t1bis'].sets[eps],
                                   reports['t1bis_interval'].sets[eps], eps))
        cross = cross_check(reports['hlz'], reports['t1bis'])
        checks.append(_check("cross_oracle", cross.status, **cross.to_json()))
        if query.expect == 'strict_inclusion':
            witnessed = any(n.startswith("strict inclusion witnessed") for n in reports['t1'].notes)
            checks.append(_check("strict_inclusion", VERIFIED if witnessed else INCONCLUSIVE))
        result["sets"]["subdifferential"] = reports['t1bis'].subdifferential.to_json()
        result["sets"]["t1bis"] = {format_scalar(e): reports['t1bis'].sets[e].to_json() for e in grid}

        if minimizer:
            for M in config.get_scalars('lemmas.lemvo_M', ["0", "1", "5"]):
                for positive in (False, True):
                    report = self._eps_run(query, 'lemvo', M=M, positive=positive)
                    name = f"lemvo[M={format_scalar(M)}{',positive' if positive else ''}]"
                    checks.append(self._report_check(name, report))
        if active_sets(F, x, 0).active == F.ids:
            report = self._eps_run(query, 'brondsted')
            checks.append(self._report_check("brondsted", report))

    # -- optimality ---------------------------------------------------------

    def run_certify(self, query: Query, result: Dict[str, Any]):
        program = self.instance.program
        x = query.point
        check = verify_optimal(program, x)
        result["optimal"] = check.optimal
        if not check.optimal:
            result["notes"].append(f"no existence claim: {check.reason}")
        epsilons = query.epsilons or config.get_scalars('optimality.epsilons', ["1/2", "1/8"])
        radii = query.u_radii or config.get_scalars('optimality.u_radii', ["1/2", "1/100"])
        rho = query.rho or config.get('optimality.rho', 'corr')
        certificates = []
        for eps in epsilons:
            for u in radii:
                outcome = certify(program, x, eps, u, rho)
                pair = {"epsilon": format_scalar(eps), "u": format_scalar(u)}
                if isinstance(outcome, Certificate):
                    ok, failures = outcome.verify(program)
                    result["checks"].append(_check("certificate", VERIFIED if ok else REFUTED,
                                                   failures=failures, **pair))
                    certificates.append(outcome.to_json())
                    continue
                if not check.optimal:
                    status = VERIFIED
                elif outcome.farkas is not None:
                    status = REFUTED
                else:
                    status = INCONCLUSIVE
                result["checks"].append(_check("certificate", status, **pair, **outcome.to_json()))
        result["sets"]["certificates"] = certificates
        if query.probe_slater:
            probe = slater_multiplier_probe(program, x, [(e, u) for e in epsilons for u in radii], rho=rho)
            status = {'supported': VERIFIED, 'inconclusive': INCONCLUSIVE}.get(probe.status, VERIFIED)
            result["checks"].append(_check("slater_probe", status, probe=probe.to_json()))


_worker_instance: Optional[Instance] = None


def _init_worker(settings: Dict[str, Any], instance: Instance):
    global _worker_instance
    config.config = settings
    _worker_instance = instance


def _run_query_job(index: int) -> Dict[str, Any]:
    runner = QueryRunner(_worker_instance)
    return runner.run(_worker_instance.queries[index])


class Verifier:
    """Runs instances and writes reports"""

    def __init__(self, workers: Optional[int] = None):
        """
        Args:
            workers: Worker processes per instance (configuration / SUPCALC_WORKERS when None)
        """
        self.setup_logging()
        self.workers = workers if workers is not None else config.get_workers()
        self.log_configuration()

    def setup_logging(self):
        """Setup logging for the verifier"""
        logging.basicConfig(
            level=getattr(logging, config.get('logging.level', 'INFO')),
            format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            handlers=[
                logging.FileHandler(config.get('logging.file', 'supcalc.log')),
                logging.StreamHandler()
            ]
        )
        self.logger = logging.getLogger('Verifier')

    def log_configuration(self):
        """Log the active configuration"""
        self.logger.info("=== Verifier Configuration ===")
        self.logger.info(f"Epsilon grid: {[format_scalar(e) for e in config.get_epsilon_grid()]}")
        self.logger.info(f"Epsilon floor: {config.get('epsilon.floor')}")
        self.logger.info(f"DD cap: {config.get_dd_cap()}")
        self.logger.info(f"Workers: {self.workers}")
        self.logger.info("==============================")

    def run_instance(self, source) -> Dict[str, Any]:
        """
        Run every query of an instance

        Args:
            source: Path to an instance file or an Instance

        Returns:
            Report dictionary with per-query statuses and an overall status
        """
        instance = load_instance(source) if isinstance(source, str) else source
        self.logger.info(f"Running instance {instance.name} ({len(instance.queries)} queries)")
        started = time.time()
        indices = range(len(instance.queries))
        if self.workers > 1 and len(instance.queries) > 1:
            with multiprocessing.Pool(min(self.workers, len(instance.queries)), initializer=_init_worker,
                                      initargs=(config.config, instance)) as pool:
                results = pool.map(_run_query_job, indices)
        else:
            runner = QueryRunner(instance)
            results = [runner.run(q) for q in instance.queries]

        for entry in results:
            level = logging.WARNING if entry["status"] == REFUTED else logging.INFO
            self.logger.log(level, f"{instance.name} query {entry['index']} ({entry['kind']}): {entry['status']}")

        status = worst(entry["status"] for entry in results)
        return {
            "instance": instance.name,
            "dimension": instance.dimension,
            "functions": list(instance.family.ids),
            "queries": results,
            "status": status,
            "wall_time": round(time.time() - started, 3),
            "memory_mb": round(psutil.Process(os.getpid()).memory_info().rss / 1024 / 1024, 1),
        }

    def run_many(self, sources) -> Dict[str, Any]:
        reports = [self.run_instance(source) for source in sources]
        return {"instances": reports, "status": worst(r["status"] for r in reports)}

    @staticmethod
    def exit_code(report: Dict[str, Any]) -> int:
        return EXIT_CODES[report["status"]]

    def write_report(self, report: Dict[str, Any], path: str):
        with open(path, 'w') as f:
            json.dump(report, f, indent=2)
        self.logger.info(f"Report written to {path}")


TIMING_FIELDS = ("wall_time", "memory_mb")


def strip_timing(report):
    """Copy of a report without timing fields (for determinism comparisons)"""
    if isinstance(report, dict):
        return {k: strip_timing(v) for k, v in report.items() if k not in TIMING_FIELDS}
    if isinstance(report, list):
        return [strip_timing(v) for v in report]
    return report
