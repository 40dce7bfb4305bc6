import json
import subprocess
import sys

import pytest

from weakiso.cli import main
from weakiso.serialize import digest


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out)


@pytest.fixture(scope="module")
def bundle_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("bundle") / "g2.json"
    subprocess.run(
        [sys.executable, "-m", "weakiso", "gen-pairs", "--g", "2", "--depth", "3", "--out", str(path)],
        check=True,
        capture_output=True,
    )
    return path


def test_find_field(capsys):
    code, doc = run(capsys, "find-field", "--inert", "5")
    assert code == 0 and doc["result"] == {"d_K": -7}
    assert doc["manifest"]["command"] == "find-field"
    assert doc["manifest"]["output_digest"] == digest(doc["result"])
    code, doc = run(capsys, "find-field", "--split", "5", "--inert", "5")
    assert code == 1 and doc["error"] == "usage"


def test_find_primes(capsys):
    code, doc = run(capsys, "find-primes", "--d", "-7", "--g", "2", "--count", "3")
    assert code == 0
    assert doc["result"] == {"ell": 2, "alpha": [4, 1], "qs": [17, 31, 41]}
    code, doc = run(capsys, "find-primes", "--d", "-7", "--g", "3", "--alpha", "4,1", "--count", "2")
    assert doc["result"]["qs"] == [89, 101]
    code, _ = run(capsys, "find-primes", "--d", "-7", "--g", "2", "--alpha", "oops")
    assert code == 1


def test_search_failure_exit(capsys, monkeypatch):
    monkeypatch.setenv("WEAKISO_PRIME_BOUND", "20")
    code, doc = run(capsys, "gen-pairs", "--g", "2", "--depth", "2")
    assert code == 2 and doc["error"] == "search" and doc["stage"] == "find_q"
    monkeypatch.setenv("WEAKISO_PRIME_BOUND", "x")
    code, _ = run(capsys, "gen-pairs", "--g", "2", "--depth", "2")
    assert code == 1


def test_usage_errors(capsys):
    code, doc = run(capsys, "no-such-command")
    assert code == 1 and doc["error"] == "usage"
    code, _ = run(capsys, "snf", "/nonexistent/matrix.json")
    assert code == 1
    code, _ = run(capsys, "analytic-check", "--jobs", "0")
    assert code == 1


def test_gen_pairs_and_check(capsys, bundle_path):
    doc = json.loads(bundle_path.read_text())
    assert doc["family"]["partner_counts"] == [2, 4, 8]
    code, out = run(capsys, "check-weakiso", str(bundle_path))
    assert code == 0 and out["result"]["valid"]
    assert out["result"]["certificates"] == 14


def test_perturbed_factor_class_rejected(capsys, bundle_path, tmp_path):
    doc = json.loads(bundle_path.read_text())
    cert = doc["family"]["partners"]["2"][1]["certificate"]
    # swap in another factor's lattice: a different ideal class of the same order
    rows = cert["rhs"]
    other = doc["family"]["partners"]["2"][0]["certificate"]["rhs"][0]
    assert other["form"] != rows[0]["form"]
    rows[0] = other
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code, out = run(capsys, "check-weakiso", str(bad))
    assert code == 3 and not out["result"]["valid"]


def test_check_rejects_garbage(capsys, tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    code, _ = run(capsys, "check-weakiso", str(p))
    assert code == 3
    p.write_text("[1, 2]")
    code, _ = run(capsys, "check-weakiso", str(p))
    assert code == 3


def test_gen_pairs_reproducible(capsys):
    a = main(["gen-pairs", "--g", "2", "--depth", "2"])
    out_a = capsys.readouterr().out
    b = main(["gen-pairs", "--g", "2", "--depth", "2", "--jobs", "2"])
    out_b = capsys.readouterr().out
    assert a == b == 0
    ja, jb = json.loads(out_a), json.loads(out_b)
    assert ja["result"] == jb["result"]
    c = main(["gen-pairs", "--g", "2", "--depth", "2"])
    assert capsys.readouterr().out == out_a and c == 0


def test_snf(capsys, tmp_path):
    p = tmp_path / "A.json"
    p.write_text("[[2, 1], [1, 2]]")
    code, doc = run(capsys, "snf", str(p))
    assert code == 0 and doc["result"]["divisors"] == [1, 3]
    p.write_text("[[1, 2], [3, 4]]")
    code, _ = run(capsys, "snf", str(p))
    assert code == 1


def test_qexp_commands(capsys, tmp_path):
    f = tmp_path / "f.json"
    f.write_text(json.dumps([{"Q": [2, 0, 0, 2], "c": "1"}]))
    A = tmp_path / "A.json"
    A.write_text("[[2, 1], [1, 2]]")
    code, doc = run(capsys, "qexp-pullback", str(f), str(A))
    assert code == 0 and doc["result"]["terms"] == {"4": "1"}
    f.write_text(json.dumps([{"Q": [2, 0, 0, 0], "c": "1"}, {"Q": [0, 0, 0, 2], "c": "-1"}]))
    code, doc = run(capsys, "qexp-witness", str(f), "--ell", "3")
    assert code == 0
    res = doc["result"]
    assert res["c0"] in ("1", "-1")
    code, doc = run(capsys, "qexp-witness", str(f), "--ell", "3", "--modulus", "7")
    assert code == 0 and doc["result"]["c0"] in ("1", "6")
    f.write_text("[]")
    code, _ = run(capsys, "qexp-witness", str(f), "--ell", "3")
    assert code == 1


def test_analytic_check(capsys):
    code, doc = run(capsys, "analytic-check", "--trials", "10", "--g", "2")
    assert code == 0 and doc["result"]["pass"]
    assert doc["manifest"]["seed"] == 0


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "weakiso", "find-field", "--split", "2", "--inert", "5", "--pretty"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"] == {"d_K": -7}
