import json
import os
import subprocess
import sys

import pytest

from chiralkit import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_json_report_shape(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "lie", "--format", "json")
    assert code == 0
    report = json.loads(out)
    assert report["suite"] == "lie"
    assert report["config"]["rng"] == cli.RNG_ALGORITHM
    assert report["config"]["seed"] == 0
    for check in report["checks"]:
        assert set(check) == {"id", "paper_anchor", "status", "lhs", "rhs"}
        assert check["status"] == "pass"
    ids = [c["id"] for c in report["checks"]]
    assert ids == sorted(ids)


def test_text_summary(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "oper")
    assert code == 0
    assert out.splitlines()[-1].endswith("checks passed")


def test_same_seed_gives_identical_reports(capsys, tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    for path in (first, second):
        assert cli.main(["verify", "--suite", "formal", "--seed", "5", "--format", "json", "--output", str(path)]) == 0
    capsys.readouterr()
    assert first.read_bytes() == second.read_bytes()


def test_reports_do_not_depend_on_hash_seed(tmp_path):
    outputs = []
    for hashseed in ("0", "123"):
        env = dict(os.environ, PYTHONHASHSEED=hashseed)
        proc = subprocess.run(
            [sys.executable, "-m", "chiralkit", "verify", "--suite", "affine", "--seed", "3", "--format", "json"],
            capture_output=True, env=env, check=True,
        )
        outputs.append(proc.stdout)
    assert outputs[0] == outputs[1]


def test_failing_check_exits_with_one(capsys, monkeypatch):
    def broken(cfg, rng, out):
        out.equal("lie/broken", "deliberately unequal", "1", "2")

    monkeypatch.setitem(cli.SUITE_RUNNERS, "lie", broken)
    code, out, _ = run(capsys, "verify", "--suite", "lie")
    assert code == 1
    assert "FAIL  lie/broken" in out


@pytest.mark.parametrize(
    "argv",
    [
        ["verify"],
        ["verify", "--suite", "nope"],
        ["verify", "--suite", "lie", "--degree", "99"],
        ["verify", "--suite", "lie", "--points", "0"],
        ["verify", "--suite", "lie", "--level", "abc"],
        ["compute", "residue", "t^^2", "t"],
        ["compute", "bracket", "q[t]", "e[t]"],
        ["frobnicate"],
    ],
)
def test_usage_errors_exit_with_two(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err


def test_parse_errors_report_positions(capsys):
    code, _, err = run(capsys, "compute", "residue", "t^^2", "t")
    assert code == 2
    assert "position 2" in err


def test_compute_examples(capsys):
    assert run(capsys, "compute", "bracket", "e[t]", "f[t^-1]")[1] == "h[1] + 4k·1\n"
    assert run(capsys, "compute", "schwarzian", "s + s^2", "--var", "s", "--trunc", "2")[1] == "-6 + 24s - 72s^2 + O(s^3)\n"
    assert run(capsys, "compute", "residue", "t^-1", "t")[1] == "1\n"


def test_compute_json_payload(capsys):
    code, out, _ = run(capsys, "compute", "bracket", "e[t]", "f[t^-1]", "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["command"] == "bracket"
    assert payload["result"] == "h[1] + 4k·1"


def test_center_basis_command(capsys):
    code, out, _ = run(capsys, "compute", "center-basis", "--level", "-1/2", "--degree", "2")
    assert code == 0
    assert "h(-2)|0> - 2·e(-1)f(-1)|0>" in out
    code, _, err = run(capsys, "compute", "center-basis", "--degree", "2")
    assert code == 2 and "rational --level" in err


def test_nth_product_and_field(capsys):
    code, out, _ = run(capsys, "compute", "nth-product", "e(-1)|0>", "f(-1)|0>", "--n", "1")
    assert code == 0 and out == "4k·|0>\n"
    code, out, _ = run(capsys, "compute", "field", "e(-1)|0>", "--at", "t^2")
    assert code == 0 and out.strip() == "e[t^2]"


def test_oper_transform_command(capsys):
    omega = json.dumps({"coordinate": "t", "exponents": [1], "order": 5, "components": ["0"]})
    code, out, _ = run(capsys, "oper-transform", "--omega", omega, "--change", "s + s^2", "--var", "s")
    assert code == 0
    assert out.startswith("w1 = 3 - 12s + 36s^2")
    code, _, err = run(capsys, "oper-transform", "--omega", omega, "--change", "1 + s", "--var", "s")
    assert code == 2 and "origin" in err
    code, _, err = run(capsys, "oper-transform", "--omega", "{oops", "--change", "s", "--var", "s")
    assert code == 2 and "position" in err
