#!/usr/bin/env python3
"""
Test script for the supcalc harness
Tests instance parsing, random generators, the verifier and the command line
"""

import glob
import json
import os
import sys

import pytest

from config import Config
from kernel import InputError
from instance import gen_program, gen_random, load_instance, parse_instance, save_instance
from supcalc import is_minimizer
from verifier import EXIT_CODES, QueryRunner, Verifier, strip_timing, worst
import cli

HERE = os.path.dirname(os.path.abspath(__file__))
CORPUS = sorted(glob.glob(os.path.join(HERE, 'corpus', '*.json')))


def abs_instance() -> dict:
    return {
        "name": "abs",
        "dimension": 1,
        "functions": [
            {"id": "up", "pieces": [{"a": [1], "b": 0}]},
            {"id": "down", "pieces": [{"a": [-1], "b": 0}]},
        ],
        "queries": [{"kind": "subdiff", "point": [0], "formula": "t1bis"}],
    }


@pytest.fixture
def verifier(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return Verifier(workers=1)


# -- instance files ----------------------------------------------------------

def test_parse_instance():
    instance = parse_instance(abs_instance(), "abs.json")
    assert instance.name == "abs"
    assert instance.family.ids == ("up", "down")
    assert instance.queries[0].formula == "t1bis"
    assert instance.program is None


@pytest.mark.parametrize("mutate, location", [
    (lambda d: d.pop("dimension"), "dimension"),
    (lambda d: d["functions"][1]["pieces"][0].update(b="1/0"), "functions[1]"),
    (lambda d: d["functions"][0]["pieces"][0].update(a=[1, 2]), "functions[0]"),
    (lambda d: d["queries"][0].update(kind="minimize"), "queries[0].kind"),
    (lambda d: d["queries"][0].update(formula="t7"), "queries[0].formula"),
    (lambda d: d["queries"][0].update(point=[0, 0]), "queries[0].point"),
    (lambda d: d["queries"][0].update(kind="certify"), "queries[0]"),
    (lambda d: d["queries"][0].update(epsilons=["1/2", "-1"]), "queries[0].epsilons"),
])
def test_parse_errors_carry_locations(mutate, location):
    data = abs_instance()
    mutate(data)
    with pytest.raises(InputError) as info:
        parse_instance(data, "abs.json")
    assert f"abs.json:{location}" in str(info.value)


def test_point_outside_domain_is_rejected():
    data = abs_instance()
    data["functions"][0]["domain"] = {"C": [[1]], "d": [-1]}
    with pytest.raises(InputError) as info:
        parse_instance(data, "abs.json")
    assert "queries[0].point" in str(info.value)


def test_infeasible_certify_point_is_rejected():
    data = abs_instance()
    data["objective"] = {"pieces": [{"a": [1], "b": 0}]}
    data["queries"] = [{"kind": "certify", "point": [1]}]
    with pytest.raises(InputError):
        parse_instance(data, "abs.json")


def test_load_instance_errors(tmp_path):
    with pytest.raises(InputError) as info:
        load_instance(str(tmp_path / "missing.json"))
    assert "missing.json" in str(info.value)
    broken = tmp_path / "broken.json"
    broken.write_text("{ not json")
    with pytest.raises(InputError):
        load_instance(str(broken))


def test_save_and_load_keep_the_family(tmp_path):
    path = str(tmp_path / "saved.json")
    instance = gen_random(11, minimizer=True)
    save_instance(instance, path)
    loaded = load_instance(path)
    assert loaded.family.ids == instance.family.ids
    for (_, f), (_, g) in zip(loaded.family, instance.family):
        assert set(f.pieces) == set(g.pieces)
    assert loaded.queries[0].expect == "minimizer"


# -- generators --------------------------------------------------------------

def test_generators_are_deterministic():
    assert gen_random(7).to_json() == gen_random(7).to_json()
    assert gen_program(7).to_json() == gen_program(7).to_json()


@pytest.mark.parametrize("seed", range(1, 11))
def test_minimizer_instances_have_a_minimizer(seed):
    instance = gen_random(seed, minimizer=True)
    assert is_minimizer(instance.family, instance.queries[0].point)


def test_gen_random_bounds():
    with pytest.raises(InputError):
        gen_random(1, dimension=5)
    with pytest.raises(InputError):
        gen_random(1, size=0)


# -- verifier ----------------------------------------------------------------

def test_worst_status():
    assert worst([]) == "verified"
    assert worst(["verified", "inconclusive"]) == "inconclusive"
    assert worst(["inconclusive", "refuted", "verified"]) == "refuted"
    assert EXIT_CODES == {"verified": 0, "refuted": 1, "inconclusive": 2}


@pytest.mark.parametrize("path", CORPUS, ids=[os.path.basename(p) for p in CORPUS])
def test_corpus_instances_verify(verifier, path):
    report = verifier.run_instance(path)
    failing = [(q["index"], c["name"]) for q in report["queries"] for c in q["checks"]
               if c["status"] != "verified"]
    assert report["status"] == "verified", failing
    assert Verifier.exit_code(report) == 0


def test_certify_query_records_the_slater_result():
    instance = load_instance(os.path.join(HERE, 'corpus', 'program_linear.json'))
    result = QueryRunner(instance).run(instance.queries[0])
    slater = next(c for c in result["checks"] if c["name"] == "slater_probe")
    assert slater["status"] == "verified"
    assert slater["probe"]["status"] == "supported"
    assert ["1/2", "1/2"] in slater["probe"]["infeasible_pairs"]
    assert result["status"] == "verified"


def test_cross_oracle_status_follows_the_grid_relation():
    data = {
        "name": "gap",
        "dimension": 1,
        "functions": [
            {"id": "up", "pieces": [{"a": [1], "b": 0}]},
            {"id": "low", "pieces": [{"a": [-1], "b": -1}]},
        ],
        "queries": [{"kind": "verify", "point": [0]}],
    }
    instance = parse_instance(data, "gap.json")
    result = QueryRunner(instance).run(instance.queries[0])
    cross = next(c for c in result["checks"] if c["name"] == "cross_oracle")
    assert cross["grid_relation"] == "PsubsetQ"
    assert cross["status"] == "verified"
    [difference] = cross["differences"]
    assert difference["formula"] == "t1bis"
    assert difference["point"] == ["8255/8256"]
    assert difference["excluded_at"] == "1/256"
    split = [c for c in result["checks"] if c["name"].startswith("recession_split")]
    assert len(split) == 2 * 3 * 4
    assert all(c["status"] == "verified" for c in split)


def test_reports_are_deterministic(verifier):
    instance = gen_random(3)
    first = strip_timing(verifier.run_instance(instance))
    second = strip_timing(verifier.run_instance(gen_random(3)))
    assert first == second
    assert "wall_time" not in first
    assert "wall_time" not in first["queries"][0]


def test_run_many_and_write_report(verifier, tmp_path):
    report = verifier.run_many([gen_random(2), gen_program(2)])
    assert len(report["instances"]) == 2
    path = str(tmp_path / "report.json")
    verifier.write_report(report, path)
    with open(path) as f:
        assert json.load(f)["status"] == report["status"]


def test_strict_inclusion_is_reported(verifier):
    report = verifier.run_instance(os.path.join(HERE, 'corpus', 'nonminimizer.json'))
    names = [c["name"] for q in report["queries"] for c in q["checks"]]
    assert "strict_inclusion" in names
    assert report["queries"][0]["minimizer"] is False


# -- configuration -----------------------------------------------------------

def test_config_defaults_and_overrides(tmp_path, monkeypatch):
    settings = Config(str(tmp_path / "config.json"))
    assert os.path.exists(tmp_path / "config.json")
    assert [str(e) for e in settings.get_epsilon_grid()] == ["1", "1/2", "1/8", "1/64"]
    settings.set('epsilon.grid', ["1", "1/3"], persist=False)
    assert Config(str(tmp_path / "config.json")).get('epsilon.grid') == ["1", "1/2", "1/8", "1/64"]
    settings.set('harness.workers', 3)
    assert Config(str(tmp_path / "config.json")).get('harness.workers') == 3
    monkeypatch.setenv('SUPCALC_WORKERS', '2')
    assert settings.get_workers() == 2
    assert settings.get('no.such.key', 'fallback') == 'fallback'


# -- command line ------------------------------------------------------------

def test_cli_gen_writes_instance(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli.main(['--json-out', 'random.json', 'gen', '--seed', '5']) == 0
    assert load_instance(str(tmp_path / 'random.json')).name == "random-5"
    assert cli.main(['--json-out', 'program.json', 'gen', '--seed', '5', '--program']) == 0
    assert load_instance(str(tmp_path / 'program.json')).objective is not None


def test_cli_missing_file_is_input_error(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli.main(['verify', str(tmp_path / 'missing.json')]) == 3


def test_cli_verify_and_single_queries(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    corpus = os.path.join(HERE, 'corpus')
    assert cli.main(['verify', os.path.join(corpus, 'nonminimizer.json')]) == 0
    assert cli.main(['--json-out', 'out.json', 'subdiff', os.path.join(corpus, 'abs.json'),
                     '--point', '0', '--formula', 't1bis', '--probe', '2']) == 0
    with open(tmp_path / 'out.json') as f:
        assert json.load(f)["status"] == "verified"
    assert cli.main(['normal-cone', os.path.join(corpus, 'indicator.json'), '--point', '0',
                     '--formula', 'ccor']) == 0
    assert cli.main(['certify', os.path.join(corpus, 'program_linear.json'), '--point', '0',
                     '--epsilon', '1/2', '--u-radius', '1/2', '--probe-slater']) == 0


def test_cli_certify_needs_objective(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    path = os.path.join(HERE, 'corpus', 'abs.json')
    assert cli.main(['certify', path, '--point', '0']) == 3


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
