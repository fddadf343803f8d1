"""Command-line front end."""

import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from artifact import cli
from artifact.weight import FourierTable, WeightSpec, spec_to_dict

WEIGHTS = Path(__file__).resolve().parents[1] / "demos" / "weights"
LEBESGUE = str(WEIGHTS / "lebesgue.json")
TEST = str(WEIGHTS / "test_weight.json")
INVERSE_LINEAR = str(WEIGHTS / "inverse_linear.json")


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def cplx(pair):
    return complex(*pair)


class TestCompute:
    def test_lebesgue_determinants(self, capsys):
        code, out, _ = run(capsys, "compute", "--weight", LEBESGUE, "--nmax", "8")
        assert code == 0
        rows = json.loads(out)["summary"]
        assert [r["n"] for r in rows] == list(range(9))
        assert all(abs(cplx(r["I"]) - 1) < 1e-12 for r in rows)

    def test_inverse_linear_rbar(self, capsys):
        code, out, _ = run(capsys, "compute", "--weight", INVERSE_LINEAR, "--nmax", "3")
        assert code == 0
        assert cplx(json.loads(out)["summary"][1]["rbar"]) == pytest.approx(-0.5, abs=1e-13)

    def test_inline_weight(self, capsys):
        code, out, _ = run(capsys, "compute", "--weight", '{"factors": []}', "--nmax", "2")
        assert code == 0
        assert json.loads(out)["n_max"] == 2

    def test_csv(self, capsys):
        code, out, _ = run(capsys, "compute", "--weight", INVERSE_LINEAR, "--nmax", "3", "--format", "csv")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0
        assert len(rows) == 4
        assert float(rows[1]["rbar_re"]) == pytest.approx(-0.5)

    def test_out_file(self, capsys, tmp_path):
        target = tmp_path / "dump.json"
        code, out, _ = run(capsys, "compute", "--weight", LEBESGUE, "--nmax", "2", "--out", str(target))
        assert code == 0 and out == ""
        assert json.loads(target.read_text())["command"] == "compute"


class TestInputErrors:
    def test_malformed_json(self, capsys):
        code, _, err = run(capsys, "compute", "--weight", '{"factors": [')
        assert code == 2
        assert json.loads(err)["exit"] == 2

    def test_missing_file(self, capsys):
        assert run(capsys, "compute", "--weight", "/nonexistent/w.json")[0] == 2

    @pytest.mark.parametrize("flag,value", [("--nmax", "0"), ("--tol", "-1"), ("--fd-step", "1e-2"), ("--quad-max", "8")])
    def test_config_invariants(self, capsys, flag, value):
        assert run(capsys, "compute", "--weight", LEBESGUE, flag, value)[0] == 2

    def test_existence_failure(self, capsys):
        # w = z has w_0 = 0
        spec = WeightSpec(base_fourier=FourierTable(-4, 4, np.eye(9)[5]))
        code, _, err = run(capsys, "compute", "--weight", json.dumps(spec_to_dict(spec)), "--nmax", "2")
        assert code == 3
        assert json.loads(err)["exit"] == 3


class TestTransform:
    def test_alpha_on_lebesgue(self, capsys):
        code, out, _ = run(capsys, "transform", "--weight", LEBESGUE, "--nmax", "8", "--shift", '{"alphas": [2]}')
        rep = json.loads(out)
        assert code == 0
        assert rep["pass"]
        assert rep["max_diff"] < 1e-10
        assert {"formula", "rebuilt", "diff"} <= set(rep)

    def test_schlesinger_up(self, capsys):
        code, out, _ = run(capsys, "transform", "--weight", TEST, "--nmax", "6", "--schlesinger", '{"j": 2, "direction": 1}')
        assert code == 0
        assert json.loads(out)["pass"]

    def test_schlesinger_pair_list(self, capsys):
        req = '[{"j": 1, "direction": -1}, {"j": 2, "direction": 1}]'
        assert run(capsys, "transform", "--weight", TEST, "--nmax", "5", "--schlesinger", req)[0] == 0

    def test_origin_rejected(self, capsys):
        assert run(capsys, "transform", "--weight", TEST, "--schlesinger", '{"j": 0, "direction": 1}')[0] == 2

    def test_alpha_on_circle(self, capsys):
        assert run(capsys, "transform", "--weight", LEBESGUE, "--shift", '{"alphas": [[0, 1]]}')[0] == 2

    def test_needs_one_request(self, capsys):
        assert run(capsys, "transform", "--weight", LEBESGUE)[0] == 2

    def test_oracle_mismatch(self, capsys):
        code, out, err = run(capsys, "transform", "--weight", TEST, "--nmax", "6", "--shift", '{"alphas": [3]}', "--tol", "1e-30")
        assert code == 4
        assert json.loads(err)["error"] == "OracleMismatch"
        assert json.loads(out)["pass"] is False


class TestVerify:
    def test_core_on_lebesgue(self, capsys):
        code, out, _ = run(capsys, "verify", "--weight", LEBESGUE, "--suite", "core", "--nmax", "6")
        rep = json.loads(out)
        assert code == 0
        assert rep["failed"] == 0 and rep["total"] > 0

    def test_every_check_tagged(self, capsys):
        _, out, _ = run(capsys, "verify", "--weight", LEBESGUE, "--suite", "core", "--nmax", "4")
        checks = json.loads(out)["checks"]
        assert all(c["tag"] for c in checks)
        assert [c["id"] for c in checks] == sorted(c["id"] for c in checks)

    def test_hirota_needs_singularities(self, capsys):
        assert run(capsys, "verify", "--weight", LEBESGUE, "--suite", "hirota")[0] == 2

    def test_unknown_tolerance_tag(self, capsys):
        assert run(capsys, "verify", "--weight", LEBESGUE, "--suite", "core", "--tol-map", '{"nope": 1}')[0] == 2

    def test_residual_failure_names_check(self, capsys):
        code, out, err = run(capsys, "verify", "--weight", TEST, "--suite", "core", "--nmax", "4",
                             "--tol-map", '{"casoratian-a": 1e-30}')
        assert code == 5
        payload = json.loads(err)
        assert payload["error"] == "ResidualFailure"
        assert "casoratian-a" in json.dumps(payload)

    def test_csv_one_row_per_check(self, capsys):
        _, out, _ = run(capsys, "verify", "--weight", LEBESGUE, "--suite", "core", "--nmax", "4")
        total = json.loads(out)["total"]
        _, out, _ = run(capsys, "verify", "--weight", LEBESGUE, "--suite", "core", "--nmax", "4", "--format", "csv")
        assert len(list(csv.DictReader(io.StringIO(out)))) == total

    def test_deterministic(self, capsys):
        args = ("verify", "--weight", TEST, "--suite", "semiclassical", "--nmax", "4", "--seed", "3")
        assert run(capsys, *args)[1] == run(capsys, *args)[1]
