"""``laddertx`` command line: transform, verify, replay, demo, check.

Exit status is 0 when everything holds, 1 when a verification or replay
fails, and 2 for usage errors, unreadable files and parse diagnostics.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
import time
from collections import Counter
from pathlib import Path
from typing import Sequence

from . import certificate as C
from . import dsl, engine, generators, uml2sql
from .instance import InstanceError, ModelInstance
from .ladder import LadderError, OrderedTransformation, join

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# -- output -----------------------------------------------------------------------


def _use_color(stream) -> bool:
    env = os.environ.get("LADDERTX_COLOR")
    if env in ("0", "1"):
        return env == "1"
    return hasattr(stream, "isatty") and stream.isatty()


def _paint(text: str, ok: bool, color: bool) -> str:
    if not color:
        return text
    return f"\033[{32 if ok else 31}m{text}\033[0m"


def _failure_json(f: engine.Failure) -> dict:
    return {"rung": f.rung, "conjunct": f.conjunct, "src_key": f.src_key,
            "tgt_key": f.tgt_key, "message": f.message}


def _class_counts(model: ModelInstance) -> dict[str, int]:
    counts = Counter(n.class_name for n in model.objects.values())
    return {c: counts.get(c, 0) for c in model.metamodel.class_names}


def _emit_report(report: dict, fmt: str, out) -> None:
    if fmt == "json":
        out.write(json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n")
        return
    color = _use_color(out)
    status = "HOLDS" if report["ok"] else "FAILED"
    out.write(f"{report['command']}: {_paint(status, report['ok'], color)}\n")
    for key in ("transform", "source", "target", "summary", "message"):
        if report.get(key):
            out.write(f"  {key}: {report[key]}\n")
    if "certificate_nodes" in report:
        out.write(f"  certificate: {report['certificate_nodes']} nodes\n")
    if "path" in report and report["path"] is not None:
        out.write(f"  first divergence at node path {report['path']}\n")
    for f in report.get("failures", []):
        out.write(f"  [{f['conjunct']}] {f['rung']}: {f['message']}\n")
    cov = report.get("coverage")
    if cov is not None:
        unmapped = ", ".join(cov["unmapped_source_classes"]) or "none"
        out.write(f"  unmapped source classes: {unmapped}\n")


# -- loading inputs --------------------------------------------------------------------


def _read(path: str) -> tuple[str, str]:
    try:
        return path, Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def _load(paths: Sequence[str]) -> dsl.Loaded:
    sources, seen = [], set()
    for p in paths:
        if p and p not in seen:
            seen.add(p)
            sources.append(_read(p))
    return dsl.load(*sources)


def _one_transform(loaded: dsl.Loaded) -> OrderedTransformation:
    if len(loaded.transforms) != 1:
        found = ", ".join(loaded.transforms) or "none"
        raise UsageError(f"expected exactly one transformation in --tx, found {found}")
    return next(iter(loaded.transforms.values()))


def _instance_from(path: str, loaded: dsl.Loaded, mm_name: str, role: str) -> ModelInstance:
    names = [d.name for d in dsl.parse(_read(path)[1], path).instances]
    matches = [loaded.instances[n] for n in names
               if n in loaded.instances and loaded.instances[n].metamodel.name == mm_name]
    if len(matches) != 1:
        raise UsageError(f"{path}: expected exactly one {mm_name} instance as {role}, "
                         f"found {len(matches)}")
    return matches[0]


def _coverage(ot: OrderedTransformation) -> dict:
    return {"unmapped_source_classes": ot.unmapped_classes()}


def _verdict_report(command: str, ot: OrderedTransformation, src: ModelInstance,
                    tgt: ModelInstance, verdict: engine.Verdict) -> dict:
    return {
        "command": command,
        "ok": verdict.holds,
        "transform": ot.name,
        "source": src.root,
        "target": tgt.root,
        "summary": ", ".join(f"{c}: {n}" for c, n in _class_counts(tgt).items()),
        "certificate_nodes": verdict.trace.count(),
        "failures": [_failure_json(f) for f in verdict.failures],
        "coverage": _coverage(ot),
    }


def _write(path: str | None, data: bytes | str) -> None:
    if path is None:
        return
    try:
        if isinstance(data, str):
            Path(path).write_text(data, encoding="utf-8")
        else:
            Path(path).write_bytes(data)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror or exc}") from None


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [f"--{n}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"{args.command} needs {' and '.join(missing)}")


# -- commands ------------------------------------------------------------------------------


def cmd_transform(args: argparse.Namespace, out) -> int:
    _require(args, "tx", "src")
    loaded = _load([args.tx, args.src])
    ot = _one_transform(loaded)
    src = _instance_from(args.src, loaded, ot.src_mm.name, "source")
    try:
        run = engine.execute(ot, src)
    except engine.RootPreconditionError as exc:
        _emit_report({"command": "transform", "ok": False, "transform": ot.name,
                      "message": str(exc), "failures": [], "coverage": _coverage(ot)},
                     args.format, out)
        return EXIT_FAIL
    text = dsl.format_instance(run.target)
    if args.out:
        _write(args.out, text)
    _write(args.cert, C.serialize(run.certificate))
    report = _verdict_report("transform", ot, src, run.target, run.verdict)
    _emit_report(report, args.format, out)
    if not args.out and args.format == "text":
        out.write(text)
    return EXIT_OK if run.verdict.holds else EXIT_FAIL


def cmd_verify(args: argparse.Namespace, out) -> int:
    _require(args, "tx", "src", "tgt")
    loaded = _load([args.tx, args.src, args.tgt])
    ot = _one_transform(loaded)
    src = _instance_from(args.src, loaded, ot.src_mm.name, "source")
    tgt = _instance_from(args.tgt, loaded, ot.tgt_mm.name, "target")
    verdict = engine.verify(ot, src, tgt)
    _write(args.cert, C.serialize(verdict.trace))
    _emit_report(_verdict_report("verify", ot, src, tgt, verdict), args.format, out)
    return EXIT_OK if verdict.holds else EXIT_FAIL


def cmd_replay(args: argparse.Namespace, out) -> int:
    _require(args, "tx", "src", "tgt", "cert")
    loaded = _load([args.tx, args.src, args.tgt])
    ot = _one_transform(loaded)
    src = _instance_from(args.src, loaded, ot.src_mm.name, "source")
    tgt = _instance_from(args.tgt, loaded, ot.tgt_mm.name, "target")
    try:
        cert = C.deserialize(Path(args.cert).read_bytes())
    except OSError as exc:
        raise UsageError(f"cannot read {args.cert}: {exc.strerror or exc}") from None
    result = C.replay(cert, ot, src, tgt)
    report = {
        "command": "replay",
        "ok": result.ok,
        "transform": ot.name,
        "source": src.root,
        "target": tgt.root,
        "certificate_nodes": cert.count(),
        "path": list(result.path) if result.path is not None else None,
        "message": result.message,
        "coverage": _coverage(ot),
    }
    _emit_report(report, args.format, out)
    return EXIT_OK if result.ok else EXIT_FAIL


def demo_summary(model: ModelInstance) -> str:
    tables = sum(1 for n in model.objects.values() if n.class_name == "Table")
    columns = [n for n in model.objects.values() if n.class_name == "Column"]
    keys = sum(1 for n in columns if n.flags["isKey"])
    return f"{tables} tables, {len(columns)} columns, {keys} keys"


def cmd_demo(args: argparse.Namespace, out) -> int:
    start = time.perf_counter()
    loaded = dsl.load(*(("laddertx/data/" + n, uml2sql.source_text(n))
                        for n in ("uml2sql.mt", "m1.mt", "s1.mt")))
    ot, m1, s1 = loaded.transforms["uml2sql"], loaded.instances["m1"], loaded.instances["s1"]
    run = engine.execute(ot, m1)
    matches = run.target == s1
    replayed = C.replay(run.certificate, ot, m1, run.target)
    ok = run.verdict.holds and matches and replayed.ok
    if args.out:
        _write(args.out, dsl.format_instance(run.target))
    _write(args.cert, C.serialize(run.certificate))
    report = {
        "command": "demo",
        "ok": ok,
        "transform": ot.name,
        "source": m1.root,
        "target": run.target.root,
        "summary": demo_summary(run.target),
        "matches_expected": matches,
        "replay": replayed.ok,
        "certificate_nodes": run.certificate.count(),
        "seconds": round(time.perf_counter() - start, 4),
        "failures": [_failure_json(f) for f in run.verdict.failures],
        "coverage": _coverage(ot),
    }
    if args.format == "json":
        _emit_report(report, "json", out)
    else:
        out.write(demo_summary(run.target) + "\n")
        if not ok:
            _emit_report(report, "text", out)
    return EXIT_OK if ok else EXIT_FAIL


def _property_round(seed: int) -> list[str]:
    """One generated case run through every agreement property; returns problems."""
    rng = random.Random(seed)
    case = generators.random_case(rng)
    problems: list[str] = []
    run = engine.execute(case.ot, case.src)
    checked = engine.verify(case.ot, case.src, run.target)
    if not (run.verdict.holds and checked.holds):
        problems.append(f"seed {seed}: executed target does not verify")
    if C.serialize(run.certificate) != C.serialize(checked.trace):
        problems.append(f"seed {seed}: constructive and search traces differ")
    bad, desc = generators.mutate_target(rng, case.ot, run.target)
    if engine.verify(case.ot, case.src, bad).holds:
        problems.append(f"seed {seed}: mutation not rejected ({desc})")
    if case.ot.body is not None:
        t1, t2 = generators.join_pair(rng, case.ot)
        x, y = case.src.root, bad.root
        whole = engine.eval_spec(join(t1, t2), x, y, case.src, bad).holds
        parts = (engine.eval_spec(t1, x, y, case.src, bad).holds
                 and engine.eval_spec(t2, x, y, case.src, bad).holds)
        if whole != parts:
            problems.append(f"seed {seed}: join is not the conjunction of its branches")
    return problems


def cmd_check(args: argparse.Namespace, out) -> int:
    paths = [p for p in (args.tx, args.src, args.tgt, *args.files) if p]
    if not paths and args.seed is None:
        raise UsageError("check needs input files or --seed")
    report: dict = {"command": "check", "ok": True}
    if paths:
        loaded = _load(paths)
        report["summary"] = (f"{len(loaded.metamodels)} metamodel(s), "
                             f"{len(loaded.instances)} instance(s), "
                             f"{len(loaded.transforms)} transformation(s)")
        report["warnings"] = [str(w) for w in loaded.warnings]
        if loaded.transforms:
            unmapped = sorted({c for ot in loaded.transforms.values()
                               for c in ot.unmapped_classes()})
            report["coverage"] = {"unmapped_source_classes": unmapped}
    if args.seed is not None:
        problems = []
        for k in range(args.cases):
            problems += _property_round(args.seed + k)
        report["ok"] = not problems
        report["message"] = f"{args.cases} generated case(s) from seed {args.seed}"
        report["failures"] = [{"rung": "-", "conjunct": "PROPERTY", "src_key": None,
                               "tgt_key": None, "message": p} for p in problems]
    _emit_report(report, args.format, out)
    for w in report.get("warnings", []):
        sys.stderr.write(f"warning: {w}\n")
    return EXIT_OK if report["ok"] else EXIT_FAIL


# -- entry point ----------------------------------------------------------------------------


def _nat(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a natural number: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"not a natural number: {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="laddertx",
        description="Run, verify and replay ordered model transformations.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tx", help=".mt file with metamodels and the transformation")
    common.add_argument("--src", help=".mt file with the source instance")
    common.add_argument("--tgt", help=".mt file with the target instance")
    common.add_argument("--out", help="where to write the produced target (.mt)")
    common.add_argument("--cert", help="certificate file (written, or read by replay)")
    common.add_argument("--format", choices=("text", "json"), default="text")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sub.add_parser("transform", parents=[common], help="execute and certify")
    sub.add_parser("verify", parents=[common], help="check a source/target pair")
    sub.add_parser("replay", parents=[common], help="recheck a stored certificate")
    sub.add_parser("demo", parents=[common], help="run the UML to SQL example")
    check = sub.add_parser("check", parents=[common], help="parse and validate inputs")
    check.add_argument("files", nargs="*", help="more .mt files to check")
    check.add_argument("--seed", type=_nat, help="also run generated property cases")
    check.add_argument("--cases", type=_nat, default=50, help="generated cases (default 50)")
    return parser


COMMANDS = {
    "transform": cmd_transform,
    "verify": cmd_verify,
    "replay": cmd_replay,
    "demo": cmd_demo,
    "check": cmd_check,
}


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        sys.stderr.write(f"laddertx: {exc}\n")
    except dsl.DslError as exc:
        for d in exc.diagnostics:
            sys.stderr.write(f"{d}\n")
    except C.CertificateError as exc:
        sys.stderr.write(f"laddertx: {exc}\n")
    except (InstanceError, LadderError, engine.ExecutionError) as exc:
        sys.stderr.write(f"laddertx: {exc}\n")
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
