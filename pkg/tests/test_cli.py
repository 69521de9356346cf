import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from helpers import shortest_paths_oracle
from wsumq.cli import RunConfig, build_parser, main
from wsumq.core import WeightedStructure, parse_weight
from wsumq.errors import ValidationError

FIX = Path(__file__).resolve().parent.parent / "fixtures"
GOLDEN = Path(__file__).resolve().parent / "golden"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_no_arguments_prints_usage(capsys):
    code, out, err = run(capsys)
    assert code == 2
    assert out == ""
    assert "usage: wsumq" in err


def test_usage_errors_are_one_line(capsys):
    code, out, err = run(capsys, "bogus")
    assert code == 2 and out == ""
    assert len(err.strip().splitlines()) == 1
    code, _, err = run(capsys, "run", FIX / "programs" / "acyclicity.wsq")
    assert code == 2 and len(err.strip().splitlines()) == 1


def test_runtime_errors_are_one_line(capsys):
    code, out, err = run(capsys, "run", "missing.wsq", FIX / "structures" / "dag.json")
    assert code == 1 and out == ""
    assert err.startswith("wsumq: error:") and len(err.strip().splitlines()) == 1
    code, _, err = run(capsys, "check", FIX / "structures" / "dag.json")
    assert code == 1 and len(err.strip().splitlines()) == 1


def test_run_floyd_warshall(capsys):
    code, out, _ = run(capsys, "run", FIX / "programs" / "floyd_warshall.wsq",
                       FIX / "structures" / "dist4.json", "--mode", "loose", "--answer", "D")
    assert code == 0
    rows = json.loads(out)
    s = WeightedStructure.loads((FIX / "structures" / "dist4.json").read_text())
    oracle = shortest_paths_oracle(s.universe, s.weight_table("W"))
    assert {tuple(r["tuple"]): parse_weight(r["value"]) for r in rows} == oracle


def test_global_flags_before_command(capsys):
    a = run(capsys, "--mode", "loose", "run", "builtin:floyd_warshall",
            FIX / "structures" / "dist4.json")
    b = run(capsys, "run", "builtin:floyd_warshall", FIX / "structures" / "dist4.json",
            "--mode", "loose")
    assert a == b and a[0] == 0


def test_run_trace(capsys):
    code, out, _ = run(capsys, "run", "builtin:acyclicity", FIX / "structures" / "dag.json",
                       "--trace")
    data = json.loads(out)
    assert code == 0 and data["value"] is True
    assert data["trace"][-1].startswith("stratum 1:")
    code, out, _ = run(capsys, "run", "builtin:acyclicity", FIX / "structures" / "cycle.json",
                       "--format", "text", "--trace")
    assert out.splitlines()[-1] == "false"
    assert out.splitlines()[0].startswith("stratum 0: round 1:")


def test_check_scalar(capsys):
    code, out, _ = run(capsys, "check", "--scalar", FIX / "programs" / "squaring.wsq")
    assert code == 1 and out == "$.body.then: mul-of-two-intensional\n"
    code, out, _ = run(capsys, "check", "--scalar", FIX / "programs" / "eval_recursive.wsq")
    assert code == 0 and out == "scalar\n"
    code, out, _ = run(capsys, "check", "--scalar", "--format", "json",
                       FIX / "programs" / "not_scalar.wsq")
    assert code == 1 and json.loads(out)["violations"][0]["reason"] == "mul-of-two-intensional"
    code, out, _ = run(capsys, "check", FIX / "programs" / "squaring.wsq")
    assert code == 0 and out == "ok\n"


def test_eval(capsys):
    code, out, _ = run(capsys, "eval", FIX / "programs" / "squaring.wsq",
                       FIX / "structures" / "path4.json", "--bind", "x=v2")
    assert code == 0 and json.loads(out) == {"kind": "weight", "value": "16"}
    code, _, err = run(capsys, "eval", "builtin:squaring", FIX / "structures" / "path4.json")
    assert code == 1 and "unbound" in err


def test_parse(capsys):
    code, out, _ = run(capsys, "parse", FIX / "programs" / "floyd_warshall.wsq", "--format", "text")
    assert code == 0 and "answer D;" in out
    code, out, _ = run(capsys, "parse", "builtin:eval_depth_bounded:0")
    assert json.loads(out) == {"kind": "term", "text": "if In(u, u) then val(u) else bot\n"}


def test_transform(capsys, tmp_path, caplog):
    target = tmp_path / "out.wsq"
    code, out, err = run(capsys, "transform", "--kind", "simind", "builtin:eval_recursive",
                         "-o", target)
    assert code == 0 and out == ""
    assert "at-least-2" in caplog.text
    net = tmp_path / "net.json"
    run(capsys, "fnn", "encode", FIX / "nets" / "parallel_reduced_a2.json", "--val", "3", "-o", net)
    code, out, _ = run(capsys, "eval", target, net, "--bind", "u=out", "--format", "text")
    assert code == 0 and out == "6\n"
    code, out, _ = run(capsys, "transform", "--kind", "loose2func", "--arity-cap", "2",
                       "builtin:floyd_warshall")
    assert code == 1


def test_fnn_commands(capsys, tmp_path):
    b5 = FIX / "nets" / "parallel_a5.json"
    assert run(capsys, "fnn", "forward", b5, "--input", "1/2") == (0, '[\n  "5/2"\n]\n', "")
    code, out, _ = run(capsys, "fnn", "reduce", b5)
    red = json.loads(out)
    assert len(red["nodes"]) == 3
    assert sorted(e["weight"] for e in red["edges"]) == ["1", "5"]
    assert run(capsys, "fnn", "order", b5)[1].splitlines()[1].count(" ") == 4
    assert run(capsys, "fnn", "bounded", b5, "--poly", "1,0")[0] == 0
    assert run(capsys, "fnn", "bounded", FIX / "nets" / "parallel_reduced_a5.json", "--poly", "1,0,0",
               "--format", "text")[:2] == (0, "bounded\n")
    code, out, _ = run(capsys, "fnn", "bounded", b5, "--poly", "1", "--reduced", "--format", "text")
    assert code == 1 and out.startswith("unbounded:")
    code, out, _ = run(capsys, "fnn", "split", FIX / "nets" / "wide_edge_a5.json")
    assert len(json.loads(out)["nodes"]) == 7
    gadget = tmp_path / "g.json"
    run(capsys, "fnn", "gadget-3sat", FIX / "cnf" / "sat_x1.cnf", "-o", gadget)
    assert run(capsys, "fnn", "forward", gadget, "--input", "1/2")[1] == '[\n  "1"\n]\n'
    split = tmp_path / "s.json"
    run(capsys, "fnn", "gadget-split", "--bits", "3", "-o", split)
    assert run(capsys, "fnn", "forward", split, "--input", "5/8", "--format", "text")[1] == "1 0 1\n"
    code, out, _ = run(capsys, "fnn", "encode", FIX / "nets" / "parallel_reduced_a1.json")
    assert "val" not in json.loads(out)["weights"]
    assert run(capsys, "fnn", "forward", b5, "--input", "1,2")[0] == 1
    assert run(capsys, "fnn", "gadget-split", "--bits", "0")[0] == 2


def test_parallel_paths_fixtures_match_generator(capsys):
    for a in (1, 2, 5):
        code, out, _ = run(capsys, "fnn", "parallel-paths", "--a", a)
        assert out == (FIX / "nets" / f"parallel_a{a}.json").read_text()


def test_output_is_deterministic():
    argv = [sys.executable, "-m", "wsumq.cli", "run", "builtin:floyd_warshall",
            str(FIX / "structures" / "dist4.json"), "--mode", "loose", "--trace"]
    env = dict(os.environ, PYTHONHASHSEED="random")
    outs = {subprocess.run(argv, capture_output=True, env=env, check=True).stdout
            for _ in range(3)}
    assert len(outs) == 1


def test_run_config_validation():
    with pytest.raises(ValidationError):
        RunConfig(arity_cap=0)


def test_every_command_is_in_help():
    text = build_parser().format_help()
    for cmd in ("parse", "check", "eval", "run", "transform", "fnn"):
        assert cmd in text
    fnn = build_parser()._subparsers._group_actions[0].choices["fnn"].format_help()
    for cmd in ("forward", "reduce", "encode", "order", "bounded", "split", "gadget-3sat",
                "gadget-split"):
        assert cmd in fnn


def _help_texts():
    parser = build_parser()
    texts = {"wsumq": parser.format_help()}
    for name, sub in parser._subparsers._group_actions[0].choices.items():
        texts[f"wsumq {name}"] = sub.format_help()
        if name == "fnn":
            for fname, fsub in sub._subparsers._group_actions[0].choices.items():
                texts[f"wsumq fnn {fname}"] = fsub.format_help()
    return texts


def test_help_golden():
    """Help output is compared to a recorded copy (argparse layout varies across Pythons)."""
    path = GOLDEN / "help.json"
    texts = _help_texts()
    version = "%d.%d" % sys.version_info[:2]
    if os.environ.get("WSUMQ_UPDATE_GOLDEN"):
        path.write_text(json.dumps({"python": version, "help": texts}, indent=2) + "\n")
    recorded = json.loads(path.read_text())
    if recorded["python"] != version:
        pytest.skip(f"golden help recorded with Python {recorded['python']}")
    assert texts == recorded["help"]
