import io
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from debtswap.cli import fmt, main

FIX = Path(__file__).resolve().parent.parent / "fixtures"


def run(*argv):
    buf = io.StringIO()
    code = main([str(a) for a in argv], out=buf)
    return code, buf.getvalue()


def test_fmt():
    assert fmt(-0.0) == "0"
    assert fmt(2 / 3) == "0.666666667"
    assert fmt(1.9999999999997797) == "2"


def test_clear_fig1():
    code, out = run("clear", FIX / "fig1.json")
    assert code == 0
    rows = [line.split(",")[:2] for line in out.strip().splitlines()[1:]]
    assert rows == [["v1", "5"], ["v2", "4"], ["v3", "6"], ["v4", "2"], ["v5", "5"]]
    code, out = run("clear", FIX / "fig1.json", "--method", "picard")
    assert code == 0 and out.splitlines()[1].startswith("v1,5,")


def test_clear_beta_and_object():
    code, out = run("clear", FIX / "semipos.json", "--beta", "0.5")
    assert code == 0 and "v1,0.25," in out
    code, out = run("clear", FIX / "fig1.json", "--format", "object")
    assert json.loads(out)["assets"]["v3"] == pytest.approx(6)
    code, out = run("clear", FIX / "fig1.json", "--payments")
    assert "v2,v3,5,4" in out


def test_clear_empty_and_errors(tmp_path):
    empty = tmp_path / "e.json"
    empty.write_text('{"banks": [], "contracts": []}')
    assert run("clear", empty) == (0, "bank,assets,recovery,equity,default\n")
    assert run("clear", tmp_path / "missing.json")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"banks": [{"id": "a", "funds": -1}], "contracts": []}')
    assert run("clear", bad)[0] == 2


def test_shock_worst_set_golden():
    code, out = run("shock", FIX / "badforw.json", "--model", "worst-set", "--K", "2", "--target", "w")
    assert code == 0
    assert out == "k,value,witness\n0,4,\n1,2,s1\n2,0,s1;s2\n"


def test_shock_continuous():
    code, out = run("shock", FIX / "motive.json", "--model", "proportional", "--target", "v1")
    assert out == "x,value\n0,2\n0.5,2\n1,0\n"
    code, out = run("shock", FIX / "motive.json", "--model", "worst-sum", "--target", "v1")
    assert out == "x,value\n0,2\n2,2\n4,0\n8,0\n"
    code, out = run("shock", FIX / "motive.json", "--model", "proportional", "--target", "v1",
                    "--lambda-grid", "4")
    assert out.splitlines()[1:] == ["0,2", "0.25,2", "0.5,2", "0.75,1", "1,0"]
    code, out = run("shock", FIX / "motive.json", "--model", "worst-sum", "--target", "v1", "--rho", "3")
    assert out == "x,value\n3,1\n"


def test_shock_errors():
    assert run("shock", FIX / "treepos.json", "--model", "worst-set", "--K", "10", "--target", "v2",
               "--budget", "3")[0] == 4
    assert run("shock", FIX / "motive.json", "--model", "worst-set", "--target", "v1")[0] == 2
    assert run("shock", FIX / "motive.json", "--model", "worst-set", "--K", "1", "--target", "zz")[0] == 2


def test_swap_check():
    code, out = run("swap-check", FIX / "motive.json", "--spec", FIX / "motive.op.json",
                    "--model", "worst-set", "--K", "2")
    assert code == 0 and json.loads(out)["verdict"] == "Positive"
    code, out = run("swap-check", FIX / "semipos.json", "--swap", "u1,v1,u2,v2", "--model", "base")
    assert json.loads(out)["verdict"] == "SemiPositive"
    code, out = run("swap-check", FIX / "portfolio76.json", "--portfolio", "v1:v2:x2,x4:x5,x8",
                    "--model", "worst-set", "--K", "2", "--format", "csv")
    assert out.startswith("# verdict Positive")
    code, out = run("swap-check", FIX / "reorg3.json", "--reorg", "u12>v1,u22>v2,u32>v3", "--perm", "1,2,0",
                    "--model", "worst-set", "--K", "3")
    assert json.loads(out)["verdict"] == "Positive"
    assert run("swap-check", FIX / "semipos.json", "--swap", "u1,v1,u1,v2", "--model", "base")[0] == 2


def test_swap_search():
    code, out = run("swap-search", FIX / "motive.json", "--model", "worst-set", "--K", "2", "--format", "csv")
    lines = out.strip().splitlines()
    assert lines[1] == "u0,v1,u2,v2,Positive"
    code, out = run("swap-search", FIX / "reorg3.json", "--model", "worst-set", "--K", "3")
    assert all(h["verdict"] != "Positive" for h in json.loads(out)["hits"])


def test_tree_dp_cli():
    code, out = run("tree-dp", FIX / "treepos.json", "--target", "v1", "--K", "10")
    vals = [line.split(",")[1] for line in out.strip().splitlines()[1:]]
    assert vals == ["18", "18", "18", "15", "14", "13", "12", "11", "10", "9", "8"]
    assert run("tree-dp", FIX / "fig1.json", "--target", "v1", "--K", "2")[0] == 2


def test_gadget_build(tmp_path):
    out_file = tmp_path / "t.json"
    assert run("gadget", "build", "--name", "treepos", "--out", out_file)[0] == 0
    assert out_file.read_text() == (FIX / "treepos.json").read_text()
    code, out = run("gadget", "build", "--boolean", "3")
    assert json.loads(out)["contracts"][-1] == {"debtor": "g_w", "creditor": "t", "weight": 3.0}
    code, out = run("gadget", "build", "--densest", "a-b,b-c")
    assert len(json.loads(out)["banks"]) == 6


def test_verify_exit_codes():
    code, out = run("verify", "--theorem", "nopos-base", "--trials", "5", "--seed", "3")
    assert code == 0 and json.loads(out)["positives"] == 0


def test_output_is_byte_stable():
    a = run("swap-search", FIX / "motive.json", "--model", "worst-set", "--K", "2")
    b = run("swap-search", FIX / "motive.json", "--model", "worst-set", "--K", "2")
    assert a == b


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "debtswap.cli", "clear", str(FIX / "fig1.json")],
                         capture_output=True, text=True, env={**os.environ, "DEBTSWAP_DISABLE_NUMBA": "1"})
    assert res.returncode == 0 and res.stdout.splitlines()[1].startswith("v1,5,")
    res = subprocess.run([sys.executable, "-m", "debtswap.cli", "clear"], capture_output=True, text=True)
    assert res.returncode == 2
