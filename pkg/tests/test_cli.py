from __future__ import annotations

import io
import json
import subprocess
import sys

import pytest

from laddertx import certificate as C
from laddertx.cli import build_parser, demo_summary, main
from laddertx.uml2sql import source_text


def run(*argv: str) -> tuple[int, str]:
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name in ("uml2sql.mt", "m1.mt", "s1.mt", "partial.mt", "partial_src.mt"):
        p = tmp_path / name
        p.write_text(source_text(name), encoding="utf-8")
        paths[name] = str(p)
    return paths


def broken_s1(tmp_path) -> str:
    """s1 with Table#4 and its key column removed."""
    text = "\n".join(line for line in source_text("s1.mt").splitlines()
                     if not line.strip().startswith(("Column#4 ", "Table#4 ")))
    text = text.replace(", Table#4]", "]")
    p = tmp_path / "broken.mt"
    p.write_text(text, encoding="utf-8")
    return str(p)


def test_demo_prints_summary():
    assert run("demo") == (0, "3 tables, 7 columns, 3 keys\n")


def test_demo_json_report():
    code, text = run("demo", "--format", "json")
    report = json.loads(text)
    assert code == 0 and report["ok"] and report["matches_expected"] and report["replay"]
    assert report["certificate_nodes"] == 50
    assert report["coverage"] == {"unmapped_source_classes": []}


def test_demo_writes_target_and_certificate(tmp_path, data_dir):
    cert, out = tmp_path / "c.json", tmp_path / "t.mt"
    assert run("demo", "--cert", str(cert), "--out", str(out))[0] == 0
    assert cert.read_bytes() == (data_dir / "uml2sql.cert.json").read_bytes()
    assert "Column#8 { isKey = false }" in out.read_text()


def test_transform_then_replay(files, tmp_path):
    out, cert = str(tmp_path / "t.mt"), str(tmp_path / "c.json")
    code, text = run("transform", "--tx", files["uml2sql.mt"], "--src", files["m1.mt"],
                     "--out", out, "--cert", cert)
    assert code == 0 and "transform: HOLDS" in text
    assert run("verify", "--tx", files["uml2sql.mt"], "--src", files["m1.mt"], "--tgt", out)[0] == 0
    code, text = run("replay", "--tx", files["uml2sql.mt"], "--src", files["m1.mt"],
                     "--tgt", out, "--cert", cert)
    assert code == 0 and "replay: HOLDS" in text


def test_transform_without_out_prints_instance(files):
    code, text = run("transform", "--tx", files["uml2sql.mt"], "--src", files["m1.mt"])
    assert code == 0 and "instance " in text and "Table#2 { columns = [Column#2" in text


def test_verify_reports_missing_witness(files, tmp_path):
    code, text = run("verify", "--tx", files["uml2sql.mt"], "--src", files["m1.mt"],
                     "--tgt", broken_s1(tmp_path), "--format", "json")
    report = json.loads(text)
    assert code == 1 and not report["ok"]
    link = [f for f in report["failures"] if f["conjunct"] == "LINK"]
    assert link and link[0]["src_key"] == "Class#4" and link[0]["rung"] == "class2table"


def test_replay_against_other_target_fails(files, tmp_path):
    cert = str(tmp_path / "c.json")
    run("transform", "--tx", files["uml2sql.mt"], "--src", files["m1.mt"],
        "--out", str(tmp_path / "t.mt"), "--cert", cert)
    code, text = run("replay", "--tx", files["uml2sql.mt"], "--src", files["m1.mt"],
                     "--tgt", broken_s1(tmp_path), "--cert", cert, "--format", "json")
    assert code == 1 and json.loads(text)["path"] is not None


def test_replay_with_malformed_certificate_is_usage_error(files, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    code, _ = run("replay", "--tx", files["uml2sql.mt"], "--src", files["m1.mt"],
                  "--tgt", files["s1.mt"], "--cert", str(bad))
    assert code == 2 and "unsupported certificate" in capsys.readouterr().err


def test_partial_example_reports_coverage(files):
    code, text = run("transform", "--tx", files["partial.mt"], "--src", files["partial_src.mt"],
                     "--format", "json")
    report = json.loads(text)
    assert code == 0 and report["coverage"]["unmapped_source_classes"] == ["C", "I"]


def test_parse_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.mt"
    p.write_text("metamodel M {\n  root A\n}\n")
    code, _ = run("check", str(p))
    assert code == 2
    assert capsys.readouterr().err.startswith(f"{p}:3:1:")


def test_missing_file_is_usage_error(capsys):
    assert run("check", "/nonexistent/x.mt")[0] == 2
    assert "cannot read" in capsys.readouterr().err


def test_missing_arguments(capsys):
    assert run()[0] == 2
    assert run("verify", "--tx", "a.mt")[0] == 2
    assert "needs --src and --tgt" in capsys.readouterr().err
    assert run("check")[0] == 2


def test_help_exits_zero(capsys):
    assert run("--help")[0] == 0
    assert "transform" in capsys.readouterr().out


def test_check_files_and_generated_cases(files):
    code, text = run("check", files["uml2sql.mt"], files["partial.mt"], "--format", "json")
    report = json.loads(text)
    assert code == 0 and report["summary"].endswith("2 transformation(s)")
    code, text = run("check", "--seed", "3", "--cases", "10")
    assert code == 0 and "10 generated case(s) from seed 3" in text


def test_root_precondition_false_exits_one(files, tmp_path):
    tx = tmp_path / "closed.mt"
    tx.write_text(source_text("uml2sql.mt").replace(
        "rung model2schema : Model -> Schema {\n    pre: true;",
        "rung model2schema : Model -> Schema {\n    pre: false;"))
    code, text = run("transform", "--tx", str(tx), "--src", files["m1.mt"])
    assert code == 1 and "precondition" in text
    assert run("verify", "--tx", str(tx), "--src", files["m1.mt"], "--tgt", files["s1.mt"])[0] == 0


def test_color_follows_environment(monkeypatch, files):
    argv = ("verify", "--tx", files["uml2sql.mt"], "--src", files["m1.mt"], "--tgt", files["s1.mt"])
    monkeypatch.setenv("LADDERTX_COLOR", "1")
    assert "\033[32mHOLDS" in run(*argv)[1]
    monkeypatch.setenv("LADDERTX_COLOR", "0")
    assert "\033[" not in run(*argv)[1]


def test_parser_lists_commands():
    sub = build_parser()._subparsers._group_actions[0]
    assert set(sub.choices) == {"transform", "verify", "replay", "demo", "check"}


def test_demo_summary_counts(ex):
    assert demo_summary(ex.s1) == "3 tables, 7 columns, 3 keys"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "laddertx.cli", "demo"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0 and proc.stdout == "3 tables, 7 columns, 3 keys\n"


def test_certificate_from_cli_deserializes(files, tmp_path):
    cert = tmp_path / "c.json"
    run("verify", "--tx", files["uml2sql.mt"], "--src", files["m1.mt"], "--tgt", files["s1.mt"],
        "--cert", str(cert))
    assert C.deserialize(cert.read_bytes()).holds
