import csv
import json
import math

import numpy as np
import pytest

from ctxent.cli import main, substream
from ctxent.io import matrix_from_json, matrix_to_json, read_json, write_json
from ctxent.matrixcore import trace_distance, validate_density


@pytest.fixture
def state(tmp_path):
    def make(m, name="s.json"):
        path = tmp_path / name
        write_json(path, matrix_to_json(np.asarray(m, dtype=complex)))
        return str(path)
    return make


class TestGen:
    def test_valid_state_and_manifest(self, tmp_path):
        out = tmp_path / "g.json"
        assert main(["gen", "--dim", "3", "--rank", "3", "--seed", "7", "--out", str(out)]) == 0
        validate_density(matrix_from_json(read_json(out)))
        man = read_json(str(out) + ".manifest.json")
        assert man["command"] == "gen" and man["seed"] == 7 and man["outputs"]["result"] == str(out)

    def test_pure(self, tmp_path):
        out = tmp_path / "p.json"
        main(["gen", "--dim", "2", "--rank", "1", "--seed", "1", "--out", str(out)])
        rho = matrix_from_json(read_json(out))
        np.testing.assert_allclose(rho @ rho, rho, atol=1e-10)

    def test_bad_rank(self, capsys):
        assert main(["gen", "--dim", "3", "--rank", "4"]) == 2
        assert "BadRank" in capsys.readouterr().err

    def test_seed_env_fallback(self, tmp_path, monkeypatch):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        monkeypatch.setenv("CTXENT_SEED", "11")
        main(["gen", "--dim", "3", "--out", str(a)])
        main(["gen", "--dim", "3", "--seed", "11", "--out", str(b)])
        assert read_json(a) == read_json(b)
        monkeypatch.setenv("CTXENT_SEED", "x")
        assert main(["gen", "--dim", "3"]) == 2


class TestEntropy:
    def test_values(self, state, capsys):
        assert main(["entropy", "--state", state(np.eye(3) / 3)]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(math.log(3), abs=1e-14)
        main(["entropy", "--state", state(np.diag([0.5, 0.3, 0.2])), "--kind", "renyi:2"])
        assert float(capsys.readouterr().out) == pytest.approx(0.9675840262617056, abs=1e-14)

    def test_pure_at_eigencontext(self, state, tmp_path, capsys):
        u = np.array([[1, 1], [1j, -1j]]) / np.sqrt(2)
        rho = np.outer(u[:, 0], u[:, 0].conj())
        upath = tmp_path / "u.json"
        write_json(upath, matrix_to_json(u))
        main(["entropy", "--state", state(rho), "--maximal-from-unitary", str(upath)])
        assert abs(float(capsys.readouterr().out)) <= 1e-12

    def test_bad_kind(self, state):
        assert main(["entropy", "--state", state(np.eye(2) / 2), "--kind", "tsallis"]) == 2

    def test_missing_file(self):
        assert main(["entropy", "--state", "/nonexistent.json"]) == 2


class TestVn:
    @pytest.mark.parametrize("m,expect", [(np.diag([0.5, 0.5, 0]), math.log(2)),
                                          (np.diag([1.0, 0, 0]), 0.0)])
    def test_values(self, state, capsys, m, expect):
        assert main(["vn", "--state", state(m), "--restarts", "3"]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(expect, abs=1e-6)

    def test_random_state_json(self, tmp_path, capsys):
        s = tmp_path / "s.json"
        main(["gen", "--dim", "4", "--seed", "3", "--out", str(s)])
        out = tmp_path / "vn.json"
        main(["vn", "--state", str(s), "--restarts", "3", "--out", str(out)])
        d = read_json(out)
        assert abs(d["best_value"] - d["eigendecomposition_value"]) <= 1e-6


class TestReconstruct:
    def test_round_trip(self, tmp_path):
        s, out = tmp_path / "s.json", tmp_path / "r.json"
        main(["gen", "--dim", "3", "--seed", "5", "--out", str(s)])
        assert main(["reconstruct", "--state", str(s), "--restarts", "4", "--out", str(out)]) == 0
        d = read_json(out)
        assert d["outcome"] == "unique" and d["trace_distance"] <= 1e-6
        assert trace_distance(matrix_from_json(d["rho"]), matrix_from_json(read_json(s))) <= 1e-6
        assert read_json(str(out) + ".manifest.json")["summary"]["exit_code"] == 0

    def test_qubit_ambiguous(self, capsys):
        assert main(["reconstruct", "--dim", "2", "--seed", "1", "--restarts", "3"]) == 3
        d = json.loads(capsys.readouterr().out)
        assert d["outcome"] == "ambiguous" and d["trace_distance"] <= 1e-6

    def test_record_replay_and_tamper(self, tmp_path, capsys):
        s, sec = tmp_path / "s.json", tmp_path / "sec.json"
        main(["gen", "--dim", "3", "--seed", "2", "--out", str(s)])
        assert main(["reconstruct", "--state", str(s), "--restarts", "3", "--record", str(sec)]) == 0
        first = json.loads(capsys.readouterr().out)
        assert main(["reconstruct", "--section", str(sec), "--restarts", "3"]) == 0
        assert json.loads(capsys.readouterr().out)["rho"] == first["rho"]

        data = read_json(sec)
        entry = next(e for e in data["entries"] if len(e["context"]["partition"]) == 2)
        entry["value"] = 0.9  # above ln 2 on a two-outcome context
        bad = tmp_path / "bad.json"
        write_json(bad, data)
        assert main(["reconstruct", "--section", str(bad), "--restarts", "3"]) == 4
        d = json.loads(capsys.readouterr().out)
        assert d["reason"] == "binary_context_above_ln2" and d["diagnostics"]["branch"] == "binary_contexts"

    def test_replay_with_other_seed_misses(self, tmp_path, capsys):
        s, sec = tmp_path / "s.json", tmp_path / "sec.json"
        main(["gen", "--dim", "3", "--seed", "2", "--out", str(s)])
        main(["reconstruct", "--state", str(s), "--restarts", "2", "--record", str(sec)])
        assert main(["reconstruct", "--section", str(sec), "--restarts", "2", "--seed", "9"]) == 2
        assert "OracleMiss" in capsys.readouterr().err

    def test_hartley_rejected(self):
        assert main(["reconstruct", "--dim", "3", "--kind", "hartley"]) == 2

    def test_needs_source(self):
        assert main(["reconstruct"]) == 2


class TestProps:
    def test_full_battery(self, tmp_path):
        out = tmp_path / "p.json"
        assert main(["props", "--dim", "3", "--seeds", "10", "--trials", "10", "--out", str(out)]) == 0
        d = read_json(out)
        assert d["all_passed"] and len(d["reports"]) >= 20

    def test_subadditivity_and_bell(self, capsys):
        assert main(["props", "--battery", "subadditivity", "--battery", "entangled_counterexample",
                     "--seeds", "2", "--trials", "20"]) == 0
        d = json.loads(capsys.readouterr().out)
        assert {r["check"] for r in d["reports"]} == {"split_subadditivity", "entangled_context_counterexample"}

    def test_unknown_battery(self):
        assert main(["props", "--battery", "nope"]) == 2


class TestCurves:
    def read(self, path):
        with open(path) as fh:
            return list(csv.reader(fh))

    def test_shannon(self, tmp_path):
        out = tmp_path / "c.csv"
        assert main(["curves", "--out", str(out)]) == 0
        rows = self.read(out)
        assert rows[0] == ["x", "value"] and len(rows) == 1002
        vals = np.array([float(r[1]) for r in rows[1:]])
        assert float(rows[501][0]) == 0.5 and vals[500] == max(vals) == pytest.approx(math.log(2), abs=1e-15)
        np.testing.assert_allclose(vals, vals[::-1], atol=1e-15)

    def test_renyi_and_hartley(self, tmp_path):
        out = tmp_path / "c.csv"
        main(["curves", "--kind", "hartley", "--kind", "renyi:0.5", "--kind", "renyi:3", "--out", str(out)])
        rows = self.read(out)[1:]
        by_q = {}
        for x, q, v in rows:
            by_q.setdefault(float(q), []).append(float(v))
        h = np.array(by_q[0.0])
        assert h[0] == h[-1] == 0 and np.all(h[1:-1] == math.log(2))
        assert np.all(np.array(by_q[3.0]) <= np.array(by_q[0.5]) + 1e-15)
        assert read_json(str(out) + ".manifest.json")["config"]["points"] == 1001


def test_substreams_differ():
    assert substream(1, "gen") != substream(1, "minimizer")
    assert substream(1, "gen") == substream(1, "gen")
