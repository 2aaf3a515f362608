#!/usr/bin/env python3
"""
Command Line Interface for supcalc
Verbs: verify, normal-cone, subdiff, certify, gen, selftest
"""

import argparse
import glob
import json
import os
import sys
from typing import List, Optional

from config import config
from kernel import DomainError, InputError, Vector, parse_scalar
from instance import Query, gen_program, gen_random, load_instance, save_instance
from supcalc import NORMAL_CONE_FORMULAS, SUBDIFF_FORMULAS
from verifier import EXIT_CODES, Verifier, worst

EXIT_INPUT_ERROR = 3


def _scalar_list(text: str) -> List:
    return [parse_scalar(part, "command line") for part in text.split(',') if part.strip()]


def _point(text: str) -> Vector:
    return Vector(_scalar_list(text))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='supcalc', description=(
        "Exact normal cones and subdifferentials of finite suprema of polyhedral convex functions"))
    parser.add_argument('--eps-grid', help="comma separated decreasing epsilons, e.g. 1,1/2,1/8")
    parser.add_argument('--eps-floor', help="refinement floor for unexcluded probes")
    parser.add_argument('--workers', type=int, help="worker processes (overrides SUPCALC_WORKERS)")
    parser.add_argument('--dd-cap', type=int, help="double description intermediate ray cap")
    parser.add_argument('--json-out', help="write the report to this file")
    sub = parser.add_subparsers(dest='verb', required=True)

    verify = sub.add_parser('verify', help="run every query of an instance file")
    verify.add_argument('instance')

    normal = sub.add_parser('normal-cone', help="normal cone to dom f by one formula")
    normal.add_argument('instance')
    normal.add_argument('--point', required=True)
    normal.add_argument('--formula', default='p1', choices=sorted(NORMAL_CONE_FORMULAS))
    normal.add_argument('--weights', default='cp1', choices=['cp1', 'ones'])

    subdiff = sub.add_parser('subdiff', help="subdifferential formula over the epsilon grid")
    subdiff.add_argument('instance')
    subdiff.add_argument('--point', required=True)
    subdiff.add_argument('--formula', default='t1bis', choices=sorted(SUBDIFF_FORMULAS))
    subdiff.add_argument('--rho', default='corr', choices=['corr', 'ones'])
    subdiff.add_argument('--probe', action='append', default=[], help="extra probe point (repeatable)")

    cert = sub.add_parser('certify', help="multiplier certificate for the instance program")
    cert.add_argument('instance')
    cert.add_argument('--point', required=True)
    cert.add_argument('--epsilon', help="comma separated epsilons")
    cert.add_argument('--u-radius', help="comma separated box radii")
    cert.add_argument('--rho', default=None, choices=['corr', 'ones'])
    cert.add_argument('--probe-slater', action='store_true')

    gen = sub.add_parser('gen', help="write a seeded random instance")
    gen.add_argument('--seed', type=int, required=True)
    gen.add_argument('--dimension', type=int)
    gen.add_argument('--size', type=int)
    gen.add_argument('--minimizer', action='store_true')
    gen.add_argument('--program', action='store_true')

    selftest = sub.add_parser('selftest', help="bundled corpus plus seeded random instances")
    selftest.add_argument('--random', type=int, help="number of random instances")
    return parser


def apply_overrides(args):
    """Command line values override the configuration for this run only"""
    if args.eps_grid:
        config.set('epsilon.grid', [str(e) for e in _scalar_list(args.eps_grid)], persist=False)
    if args.eps_floor:
        config.set('epsilon.floor', str(parse_scalar(args.eps_floor, "--eps-floor")), persist=False)
    if args.dd_cap:
        config.set('polyhedra.dd_cap', args.dd_cap, persist=False)


def _single_query(args) -> Query:
    point = _point(args.point)
    if args.verb == 'normal-cone':
        return Query(0, 'normal_cone', point, formula=args.formula, weights=args.weights)
    if args.verb == 'subdiff':
        return Query(0, 'subdiff', point, formula=args.formula, rho=args.rho,
                     probes=[_point(p) for p in args.probe])
    return Query(0, 'certify', point,
                 epsilons=_scalar_list(args.epsilon) if args.epsilon else None,
                 u_radii=_scalar_list(args.u_radius) if args.u_radius else None,
                 rho=args.rho, probe_slater=args.probe_slater)


def _emit(report, path: Optional[str], verifier: Optional[Verifier] = None):
    if path:
        if verifier is not None:
            verifier.write_report(report, path)
        else:
            with open(path, 'w') as f:
                json.dump(report, f, indent=2)
    print(f"Status: {report['status']}")


def run_selftest(verifier: Verifier, count: Optional[int]) -> dict:
    corpus_dir = config.get('harness.corpus_dir', 'corpus')
    if not os.path.isabs(corpus_dir):
        corpus_dir = os.path.join(os.path.dirname(os.path.abspath(__file__)), corpus_dir)
    files = sorted(glob.glob(os.path.join(corpus_dir, '*.json')))
    count = count if count is not None else int(config.get('harness.random_instances', 100))
    reports = [verifier.run_instance(path) for path in files]
    for seed in range(1, count + 1):
        reports.append(verifier.run_instance(gen_random(seed, minimizer=seed % 2 == 0)))
    for seed in range(1, max(10, count // 10) + 1):
        reports.append(verifier.run_instance(gen_program(seed)))
    return {"instances": reports, "status": worst(r["status"] for r in reports)}


def main(argv=None) -> int:
    """Entry point; returns the process exit code"""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        apply_overrides(args)
        if args.verb == 'gen':
            if args.program:
                instance = gen_program(args.seed, args.dimension, args.size)
            else:
                instance = gen_random(args.seed, args.dimension, args.size, minimizer=args.minimizer)
            if args.json_out:
                save_instance(instance, args.json_out)
            else:
                print(json.dumps(instance.to_json(), indent=2))
            return 0

        verifier = Verifier(workers=args.workers)
        if args.verb == 'verify':
            report = verifier.run_instance(args.instance)
        elif args.verb == 'selftest':
            report = run_selftest(verifier, args.random)
        else:
            instance = load_instance(args.instance)
            query = _single_query(args)
            if query.kind == 'certify' and instance.objective is None:
                raise InputError("certify needs an instance with an 'objective'", args.instance)
            instance.queries = [query]
            report = verifier.run_instance(instance)
        _emit(report, args.json_out, verifier)
        return EXIT_CODES[report["status"]]
    except (InputError, DomainError) as e:
        print(f"❌ Input error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except KeyboardInterrupt:
        print("\nStopped by user")
        return 130


if __name__ == "__main__":
    sys.exit(main())
