import json
import math

import jsonschema
import pytest

from multimp import report
from multimp.cli import run

ELASTIC = ["--problem", "elasticity", "--param", "a=2", "--param", "b=1", "--param", "c=1.5"]


def _run(tmp_path, *args):
    out = tmp_path / "report.json"
    code = run([*args, "--out", str(out)])
    doc = json.loads(out.read_text()) if out.exists() else None
    return code, doc


@pytest.fixture(scope="module")
def schema():
    return report.load_schema()


class TestCommands:
    def test_list_problems(self, tmp_path, schema):
        code, doc = _run(tmp_path, "list-problems")
        assert code == 0
        assert [p["name"] for p in doc["result"]["problems"]] == ["dirichlet", "elasticity", "cubic"]
        jsonschema.validate(doc, schema)

    def test_check_lh_elasticity(self, tmp_path, schema):
        code, doc = _run(tmp_path, "check-lh", *ELASTIC)
        assert code == 0
        res = doc["result"]
        assert res["min_value"] == pytest.approx(1.0)
        assert res["eigenvalues"] == pytest.approx([-0.5, 0.5, 2.5, 3.5], abs=1e-9)
        assert res["negative_eigenvalues"] == 1
        assert doc["claim_mismatches"] == []
        jsonschema.validate(doc, schema)

    def test_check_mp_cubic(self, tmp_path, schema):
        code, doc = _run(tmp_path, "check-mp", "--problem", "cubic", "--r-max", "10", "--point", "0,0", "--r-steps", "6")
        assert code == 1
        assert doc["result"]["verdict"] == "VIOLATED"
        assert doc["result"]["min_excess"] <= -700 + 1e-6
        assert doc["seed"] == 0 and doc["options"]["r_max"] == 10.0
        jsonschema.validate(doc, schema)

    def test_check_mp_dirichlet(self, tmp_path, schema):
        code, doc = _run(tmp_path, "check-mp", "--problem", "dirichlet", "--point", "0.5,0.5", "--r-steps", "6")
        assert code == 0
        assert doc["status"] == "SATISFIED"
        assert doc["result"]["min_excess"] >= 0
        jsonschema.validate(doc, schema)

    def test_euler_with_csv(self, tmp_path, schema):
        csv_path = tmp_path / "res.csv"
        code, doc = _run(tmp_path, "euler-residual", "--problem", "cubic", "--resolution", "16", "--csv", str(csv_path))
        assert code == 0 and doc["result"]["passed"]
        assert csv_path.read_text().startswith("t1,t2,residual_1,residual_2\n")
        jsonschema.validate(doc, schema)

    def test_needle_sweep(self, tmp_path, schema):
        code, doc = _run(tmp_path, "needle-sweep", "--problem", "dirichlet", "--tau", "0.5,0.5", "--xi", "0,1")
        assert code == 0
        res = doc["result"]
        assert res["status"] == "OK" and 1.4 <= res["p"] <= 1.6 and res["sign"] == 1
        jsonschema.validate(doc, schema)

    def test_landscape(self, tmp_path, schema):
        csv_path = tmp_path / "land.csv"
        code, doc = _run(tmp_path, "excess-landscape", "--problem", "cubic", "--r-values", "1",
                         "--resolution", "4", "--csv", str(csv_path))
        assert code == 0 and doc["result"]["rows"] == 16
        assert len(csv_path.read_text().splitlines()) == 17
        jsonschema.validate(doc, schema)

    def test_f_expr_and_problem_file(self, tmp_path, schema):
        spec = {"n": 2, "nu": 2, "f": "z_1_1^2 + z_2_2^2 - z_1_2^2",
                "candidate": ["t1", "t2"], "domain": {"kind": "box", "bounds": [[0, 1], [0, 1]]}}
        path = tmp_path / "p.json"
        path.write_text(json.dumps(spec))
        code, doc = _run(tmp_path, "check-lh", "--problem-file", str(path), "--resolution", "64")
        assert code == 1 and doc["result"]["classification"] == "indefinite"
        jsonschema.validate(doc, schema)
        code, doc = _run(tmp_path, "check-lh", "--problem", "cubic", "--f-expr", "z_1_1^2 + z_2_2^2 + z_1_2^2 + z_2_1^2")
        assert code == 0 and doc["problem"]["f_expr"].startswith("z_1_1")
        assert doc["result"]["min_value"] == pytest.approx(1.0)


class TestExitCodes:
    @pytest.mark.parametrize("argv", [
        ["nope"],
        ["check-mp"],
        ["check-mp", "--problem", "cubic", "--problem-file", "x.json"],
        ["check-mp", "--problem", "cubic", "--r-max", "-1"],
        ["check-lh", "--problem", "elasticity"],
        ["check-lh", "--problem", "cubic", "--f-expr", "z_1_1 +"],
        ["check-lh", "--problem", "cubic", "--point", "3,3"],
        ["needle-sweep", "--problem", "cubic", "--xi", "1,1"],
        ["needle-sweep", "--problem", "cubic", "--sigmas", "0.3,0.2,0.1,0.05"],
    ])
    def test_config_errors(self, tmp_path, argv):
        assert run([*argv, "--out", str(tmp_path / "r.json")]) == 2

    def test_numerical_failure(self, tmp_path):
        assert run(["euler-residual", "--problem", "cubic", "--f-expr", "log(t1)", "--resolution", "8"]) == 3


class TestSerialisation:
    def test_round_trip_floats(self):
        vals = [0.1, 1 / 3, math.pi * 1e-300, -2.5e17, 1e-8, 123456789.123456789]
        text = report.dumps({"v": vals, "k": 3, "b": True, "n": None, "bad": float("nan")})
        back = json.loads(text)
        assert back["v"] == vals
        assert back["bad"] is None and back["k"] == 3 and back["b"] is True

    def test_csv_text(self):
        text = report.csv_text(["a", "b"], [(0.1, 2), (1e-20, "x")])
        assert text == "a,b\n0.10000000000000001,2\n9.9999999999999995e-21,x\n"
