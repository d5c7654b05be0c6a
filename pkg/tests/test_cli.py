import json

import numpy as np
import pytest

from qsheaf import cli, fixtures, translate
from qsheaf.cli import (EXIT_FAIL, EXIT_INVALID, EXIT_OK, EXIT_PARSE, EXIT_SIZE, Scenario,
                        ScenarioError, encode_matrix, export_dot, fixture_a_scenario, ks_check,
                        main, parse_matrix)
from qsheaf.presheaves import Sieve, TruthValue


def write(tmp_path, doc, name="s.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def run_main(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


def full_scenario():
    doc = fixture_a_scenario()
    doc["commands"] = [
        {"cmd": "poset"},
        {"cmd": "daseinize", "projection": "P0"},
        {"cmd": "assign", "projection": "P0", "state": "plus"},
        {"cmd": "translate", "projection": "P1", "state": "zero"},
        {"cmd": "verify", "theorem": "1"},
        {"cmd": "ks", "fixture": "cabello18"},
        {"cmd": "dot", "projection": "P0", "state": "zero"},
    ]
    return doc


class TestParsing:
    def test_matrix_round_trip(self):
        m = np.array([[1, 2j], [-2j, 0.5]])
        assert np.allclose(parse_matrix(encode_matrix(m), 2), m)

    @pytest.mark.parametrize("bad", [[[1, 0]], [[[1, 0], [0]], [[0, 0], [1, 0]]],
                                     "x", [[[1, 0], [0, 0]]]])
    def test_malformed_matrix(self, bad):
        with pytest.raises(ScenarioError):
            parse_matrix(bad, 2)

    def test_unknown_names(self):
        sc = Scenario(fixture_a_scenario(), {})
        with pytest.raises(ScenarioError):
            sc.projection("nope")
        with pytest.raises(ScenarioError):
            sc.state("nope")

    def test_options_override(self):
        doc = fixture_a_scenario()
        doc["options"] = {"seed": 3, "guard": 10}
        sc = Scenario(doc, {"seed": 9, "guard": None})
        assert sc.seed == 9 and sc.guard == 10


class TestExitCodes:
    def test_fixture_a_theorem1(self, tmp_path, capsys):
        doc = fixture_a_scenario()
        doc["commands"] = [{"cmd": "verify", "theorem": "1"}]
        code, out = run_main(capsys, ["run", write(tmp_path, doc)])
        assert code == EXIT_OK
        rep = json.loads(out)["results"][0]["reports"][0]
        assert rep["class_sizes"] == [1, 2, 2]

    def test_empty_commands(self, tmp_path, capsys):
        doc = fixture_a_scenario()
        doc["commands"] = []
        code, out = run_main(capsys, ["run", write(tmp_path, doc)])
        assert code == EXIT_OK
        rep = json.loads(out)
        assert rep["results"] == [] and rep["passed"]

    def test_parse_error(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        assert run_main(capsys, ["run", str(path)])[0] == EXIT_PARSE
        assert run_main(capsys, ["run", str(tmp_path / "missing.json")])[0] == EXIT_PARSE

    def test_malformed_matrix(self, tmp_path, capsys):
        doc = fixture_a_scenario()
        doc["observables"]["a"] = [[[1, 0], [0, 0]]]
        assert run_main(capsys, ["run", write(tmp_path, doc)])[0] == EXIT_INVALID

    @pytest.mark.parametrize("edit", [
        lambda d: d["projections"].update(Q=encode_matrix(np.array([[1, 1], [0, 0]]))),
        lambda d: d.update(r_values=[1.5]),
        lambda d: d.update(commands=[{"cmd": "assign", "projection": "nope", "state": "zero"}]),
        lambda d: d.update(commands=[{"cmd": "frobnicate"}]),
        lambda d: d.update(dimension=0),
    ])
    def test_validation_errors(self, tmp_path, capsys, edit):
        doc = fixture_a_scenario()
        edit(doc)
        assert run_main(capsys, ["run", write(tmp_path, doc)])[0] == EXIT_INVALID

    def test_size_limit(self, tmp_path, capsys):
        doc = fixture_a_scenario()
        doc["commands"] = [{"cmd": "verify", "theorem": "3"}]
        assert run_main(capsys, ["run", write(tmp_path, doc), "--guard", "5"])[0] == EXIT_SIZE

    def test_max_contexts(self, tmp_path, capsys):
        doc = fixture_a_scenario()
        doc["commands"] = [{"cmd": "poset"}]
        assert run_main(capsys, ["run", write(tmp_path, doc), "--max-contexts", "2"])[0] == EXIT_SIZE

    def test_verification_failure(self, tmp_path, capsys, monkeypatch):
        real = translate.verify_theorem

        def broken(*args, **kw):
            rep = real(*args, **kw)
            rep["passed"] = False
            return rep

        monkeypatch.setattr(translate, "verify_theorem", broken)
        code, out = run_main(capsys, ["verify", "1"])
        assert code == EXIT_FAIL and json.loads(out)["passed"] is False


class TestReports:
    def test_deterministic(self, tmp_path, capsys):
        path = write(tmp_path, full_scenario())
        a = run_main(capsys, ["run", path, "--seed", "4"])
        b = run_main(capsys, ["run", path, "--seed", "4"])
        assert a == b and a[0] == EXIT_OK

    def test_out_dir(self, tmp_path, capsys):
        out = tmp_path / "out"
        code, stdout = run_main(capsys, ["run", write(tmp_path, full_scenario()), "--out", str(out)])
        assert code == EXIT_OK and stdout == ""
        rep = json.loads((out / "report.json").read_text())
        assert rep["passed"]
        assert (out / "poset.dot").read_text().startswith("digraph")

    def test_sieves_reparse(self, tmp_path, capsys, fa):
        _, out = run_main(capsys, ["run", write(tmp_path, full_scenario())])
        results = json.loads(out)["results"]
        assign = next(r for r in results if r["cmd"] == "assign")
        count = 0
        for item in assign["values"]:
            for flavor in ("presheaf", "sheaf"):
                fam = item[flavor]
                sieves = [Sieve(fa.index(k), frozenset(fa.index(x) for x in v))
                          for k, v in fam.items()]
                assert all(s.is_valid(fa) for s in sieves)
                assert TruthValue(tuple(s.members for s in sorted(sieves, key=lambda s: s.at)))\
                    .is_compatible(fa)
                count += 1
        assert count == 6

    def test_poset_summary(self, tmp_path, capsys):
        doc = fixture_a_scenario()
        doc["commands"] = [{"cmd": "poset"}]
        _, out = run_main(capsys, ["run", write(tmp_path, doc)])
        summary = json.loads(out)["results"][0]
        assert [c["label"] for c in summary["contexts"]] == ["CI", "D", "Vx"]
        assert {c["label"]: c["flat"] for c in summary["contexts"]}["Vx"] == "CI"

    def test_translate_command(self, tmp_path, capsys):
        _, out = run_main(capsys, ["run", write(tmp_path, full_scenario())])
        res = next(r for r in json.loads(out)["results"] if r["cmd"] == "translate")
        assert res["passed"] and len(res["results"]) == 3


class TestDot:
    def test_fixture_a(self, fa):
        text = export_dot(fa)
        lines = text.splitlines()
        assert sum("[label=" in x for x in lines) == 3
        assert sum("->" in x and "dashed" not in x for x in lines) == 2
        dashed = [x for x in lines if "dashed" in x]
        assert dashed == ['  "Vx" -> "CI" [style=dashed, constraint=false];']

    def test_single_node(self):
        text = export_dot(fixtures.trivial_fixture())
        assert text.count("[label=") == 1 and "->" not in text

    def test_coloring(self, fa):
        text = export_dot(fa, TruthValue.top(fa))
        assert text.count("fillcolor") == 3
        assert "fillcolor" not in export_dot(fa, TruthValue.bottom(fa))

    def test_subcommand(self, capsys):
        code, out = run_main(capsys, ["dot"])
        assert code == EXIT_OK and out == export_dot(fixtures.fixture_a())


class TestKs:
    def test_cabello(self, capsys):
        code, out = run_main(capsys, ["ks", "cabello18"])
        rep = json.loads(out)
        assert code == EXIT_OK and rep["global_sections"] == 0
        assert rep["maximal_contexts"] == 9 and rep["dimension"] == 4

    def test_single_context(self):
        p = fixtures.single_context_fixture()
        rep = ks_check(p)
        assert rep["global_sections"] == p.contexts[p.maximal()[0]].size

    def test_custom_rays(self):
        rep = ks_check([[1, 0], [0, 1]])
        assert rep["global_sections"] == 2

    def test_rays_command(self, tmp_path, capsys):
        doc = fixture_a_scenario()
        doc["commands"] = [{"cmd": "ks", "rays": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]}]
        _, out = run_main(capsys, ["run", write(tmp_path, doc)])
        assert json.loads(out)["results"][0]["global_sections"] == 2

    def test_unknown_fixture(self):
        with pytest.raises(ScenarioError):
            ks_check("nope")

    def test_guard(self, capsys):
        assert run_main(capsys, ["ks", "cabello18", "--guard", "1"])[0] in (EXIT_OK, EXIT_SIZE)


def test_parser_choices():
    parser = cli.build_parser()
    with pytest.raises(SystemExit):
        parser.parse_args(["verify", "4"])
    args = parser.parse_args(["run", "x.json", "--seed", "7", "--epsilon", "1e-8"])
    assert args.seed == 7 and args.epsilon == 1e-8


def test_r_scalar_or_list(tmp_path, capsys):
    doc = fixture_a_scenario()
    doc["commands"] = [{"cmd": "assign", "projection": "P0", "state": "plus", "r": [0.2, 0.7]},
                       {"cmd": "assign", "projection": "P0", "state": "plus", "r": 0.7}]
    _, out = run_main(capsys, ["run", write(tmp_path, doc)])
    a, b = json.loads(out)["results"]
    assert [v["r"] for v in a["values"]] == [0.2, 0.7] and a["values"][1] == b["values"][0]
    doc["commands"] = [{"cmd": "assign", "projection": "P0", "state": "plus", "r": 2}]
    assert run_main(capsys, ["run", write(tmp_path, doc)])[0] == EXIT_INVALID
