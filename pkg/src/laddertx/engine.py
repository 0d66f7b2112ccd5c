"""Execution and verification of ordered transformations.

``execute`` builds the target by a preorder traversal of the source along
the ladder.  ``eval_spec`` evaluates the nested quantified proposition over
finite instances and produces the proof trace.  It runs in two modes:

* ``"search"`` resolves each existential by scanning the target objects of
  the witness class, independently of how the target was produced;
* ``"constructive"`` takes the witness from an execution record.

Many-valued relationships pair positionally: the i-th mapped source child
(skipping children whose precondition is false) corresponds to the i-th
target child, after any objects the parent map emits first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import certificate as C
from .certificate import CertNode, Certificate
from .contracts import (
    ContractError,
    HoleEvidence,
    HoleVerdict,
    MapExpr,
    Rung,
    apply_map,
    check_hole,
    eval_pred,
    map_value,
)
from .instance import (
    InstanceError,
    ModelInstance,
    ObjectValue,
    navigate,
    navigate_path,
    objects_of,
    validate_instance,
)
from .ladder import Base, Join, Ladder, LadderError, OrderedTransformation, Step, well_formed

SEARCH = "search"
CONSTRUCTIVE = "constructive"

PRE, POST_DATA, LINK, COM = "PRE", "POST_DATA", "LINK", "COM"

RecordKey = tuple  # (ladder path, parent target key, source key)


class ExecutionError(RuntimeError):
    pass


class RootPreconditionError(ExecutionError):
    """The root precondition is false; the transformation owes nothing."""


@dataclass(frozen=True)
class ComEvidence:
    rung: str
    parent_key: str
    left: tuple[ObjectValue | None, ...]
    right: tuple[ObjectValue | None, ...]
    equal: bool
    diagnostic: str | None = None


@dataclass(frozen=True)
class Failure:
    rung: str
    conjunct: str
    src_key: str | None
    tgt_key: str | None
    message: str

    def __str__(self) -> str:
        return f"[{self.conjunct}] rung {self.rung}: {self.message}"


@dataclass
class Verdict:
    holds: bool
    trace: Certificate
    failures: list[Failure] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.holds


@dataclass
class Execution:
    target: ModelInstance
    certificate: Certificate
    record: dict[RecordKey, str]
    verdict: Verdict


# -- helpers ------------------------------------------------------------------


def _value_json(value: ObjectValue | None) -> dict | None:
    if value is None:
        return None
    cls, ident, flags = value
    return {"class": cls, "id": ident, "flags": dict(flags)}


def _as_list(val) -> list[str]:
    if isinstance(val, tuple):
        return list(val)
    return [] if val is None else [val]


def _hole_node(ev: HoleEvidence) -> CertNode:
    evidence = {"pre": ev.pre_value, "post": ev.post_value, "verdict": str(ev.verdict)}
    if ev.diagnostic:
        evidence["diagnostic"] = ev.diagnostic
    return CertNode(C.HOLE_LEAF, ev.rung, ev.src_key, ev.tgt_key, evidence)


def _slots(m: MapExpr, tgt: ModelInstance, y: str, rel: str) -> list[str]:
    """Target children under ``y.rel`` that belong to traversal, not to emits."""
    entries = _as_list(navigate(tgt, y, rel))
    first, last = m.emits_into(rel)
    return entries[len(first): max(len(first), len(entries) - len(last))]


class _Checker:
    def __init__(self, src: ModelInstance, tgt: ModelInstance, mode: str,
                 record: dict[RecordKey, str] | None):
        if mode not in (SEARCH, CONSTRUCTIVE):
            raise ValueError(f"unknown mode {mode!r}")
        if mode == CONSTRUCTIVE and record is None:
            raise ValueError("constructive mode needs an execution record")
        self.src = src
        self.tgt = tgt
        self.mode = mode
        self.record = record or {}
        self.failures: list[Failure] = []

    def fail(self, rung: str, conjunct: str, src_key, tgt_key, message: str) -> None:
        self.failures.append(Failure(rung, conjunct, src_key, tgt_key, message))

    # emitted objects -----------------------------------------------------

    def emit_nodes(self, rung_name: str, m: MapExpr, x: str, y: str) -> list[CertNode]:
        nodes: list[CertNode] = []
        rels: list[str] = []
        for e in m.emits:
            if e.rel not in rels:
                rels.append(e.rel)
        for rel in rels:
            entries = _as_list(navigate(self.tgt, y, rel))
            first, last = m.emits_into(rel)
            placed = [(i, e) for i, e in enumerate(first)]
            placed += [(len(entries) - len(last) + i, e) for i, e in enumerate(last)]
            for pos, clause in placed:
                slot = entries[pos] if 0 <= pos < len(entries) else None
                try:
                    expected = map_value(clause.map, self.src[x], self.tgt.metamodel)
                except ContractError as exc:
                    expected = None
                    self.fail(rung_name, POST_DATA, x, slot, f"emit into {rel}: {exc}")
                actual = self.tgt[slot].value if slot is not None else None
                ok = slot is not None and expected is not None and actual == expected
                nodes.append(CertNode(
                    C.LINK_LEAF, rung_name, x, slot,
                    {"rel": rel, "position": pos, "placement": str(clause.placement),
                     "expected": _value_json(expected), "ok": ok},
                ))
                if slot is None:
                    self.fail(rung_name, LINK, x, y,
                              f"emitted {clause.map.target_class} missing at {y}.{rel}[{pos}]")
                elif expected is not None and not ok:
                    self.fail(rung_name, POST_DATA, x, slot,
                              f"emitted object {slot} differs from what the map emits for {x}")
                if slot is not None:
                    nodes += self.emit_nodes(rung_name, clause.map, x, slot)
        return nodes

    # commutation ---------------------------------------------------------

    def com(self, edge: Base | Step, x: str, y: str) -> ComEvidence:
        child = edge.child
        diag = None
        left: list[ObjectValue | None] = []
        right: list[ObjectValue | None] = []
        try:
            for xc in navigate_path(self.src, x, edge.src_path):
                if eval_pred(child.pre, self.src[xc]):
                    left.append(map_value(child.map, self.src[xc], self.tgt.metamodel))
        except (ContractError, InstanceError, KeyError) as exc:
            diag = f"source path undefined: {exc}"
        try:
            for k in _slots(edge.index.map, self.tgt, y, edge.tgt_rel):
                right.append(self.tgt[k].value)
        except (InstanceError, KeyError) as exc:
            diag = f"target path undefined: {exc}"
        equal = diag is None and left == right
        return ComEvidence(child.name, x, tuple(left), tuple(right), equal, diag)

    # spec ----------------------------------------------------------------

    def spec(self, ladder: Ladder, x: str, y: str, path: tuple[str, ...]) -> CertNode:
        if isinstance(ladder, Join):
            return CertNode(C.JOIN, None, x, y, {}, (
                self.spec(ladder.left, x, y, path + ("L",)),
                self.spec(ladder.right, x, y, path + ("R",)),
            ))
        return self.edge(ladder, x, y, path)

    def edge(self, edge: Base | Step, x: str, y: str, path: tuple[str, ...]) -> CertNode:
        child = edge.child
        ev = self.com(edge, x, y)
        com_node = CertNode(C.COM_LEAF, child.name, x, y, {
            "left": [_value_json(v) for v in ev.left],
            "right": [_value_json(v) for v in ev.right],
            "equal": ev.equal,
            **({"diagnostic": ev.diagnostic} if ev.diagnostic else {}),
        })
        if not ev.equal:
            self.fail(child.name, COM, x, y,
                      ev.diagnostic or f"square does not commute at {x}: mapping {x}."
                      f"{'.'.join(edge.src_path)} gives {len(ev.left)} object(s) that differ "
                      f"from the {len(ev.right)} under {y}.{edge.tgt_rel}")
        children = [com_node]

        try:
            slots = _slots(edge.index.map, self.tgt, y, edge.tgt_rel)
            first, _ = edge.index.map.emits_into(edge.tgt_rel)
            offset = len(first)
        except (InstanceError, KeyError):
            slots, offset = [], 0
        try:
            sources = navigate_path(self.src, x, edge.src_path)
        except (InstanceError, KeyError):
            sources = []

        j = 0
        for xc in sources:
            children.append(self.quantified(edge, xc, y, j, slots, offset, path))
            try:
                if eval_pred(child.pre, self.src[xc]):
                    j += 1
            except ContractError:
                pass
        return CertNode(C.AND, child.name, x, y,
                        {"src_path": ".".join(edge.src_path), "tgt_rel": edge.tgt_rel},
                        tuple(children))

    def quantified(self, edge: Base | Step, xc: str, y: str, j: int, slots: list[str],
                   offset: int, path: tuple[str, ...]) -> CertNode:
        child = edge.child
        try:
            pre = eval_pred(child.pre, self.src[xc])
        except ContractError as exc:
            self.fail(child.name, PRE, xc, None, f"precondition undefined on {xc}: {exc}")
            hole = HoleEvidence(child.name, xc, None, False, False, HoleVerdict.FAILED, str(exc))
            impl = CertNode(C.IMPL_INTRO, child.name, xc, None, {"pre": False}, (_hole_node(hole),))
            return CertNode(C.FORALL_SRC, child.name, xc, None,
                            {"class": child.src_class}, (impl,))
        if not pre:
            body = (CertNode(C.VACUOUS, child.name, xc, None, {}),)
        else:
            body = (self.exists(edge, xc, y, j, slots, offset, path),)
        impl = CertNode(C.IMPL_INTRO, child.name, xc, None, {"pre": pre}, body)
        return CertNode(C.FORALL_SRC, child.name, xc, None, {"class": child.src_class}, (impl,))

    def exists(self, edge: Base | Step, xc: str, y: str, j: int, slots: list[str],
               offset: int, path: tuple[str, ...]) -> CertNode:
        child = edge.child
        slot = slots[j] if j < len(slots) else None
        if self.mode == SEARCH:
            candidate = None
            for k in objects_of(self.tgt, child.tgt_class):
                if k != slot:
                    continue
                if check_hole(child, xc, k, self.src, self.tgt).verdict is HoleVerdict.HOLDS:
                    candidate = k
                    break
            subject = candidate if candidate is not None else slot
            link_ok = slot is not None and self.tgt[slot].class_name == child.tgt_class
        else:
            recorded = self.record.get((path, y, xc))
            subject = recorded if recorded in self.tgt.objects else None
            link_ok = subject is not None and subject == slot
        hole = check_hole(child, xc, subject, self.src, self.tgt)
        found = link_ok and hole.verdict is HoleVerdict.HOLDS
        witness = subject if found else None

        link = CertNode(C.LINK_LEAF, child.name, xc, slot, {
            "rel": edge.tgt_rel, "position": offset + j, "ok": link_ok,
        })
        nodes = [_hole_node(hole), link]
        if not link_ok:
            if slot is None:
                self.fail(child.name, LINK, xc, None,
                          f"missing ∃-witness for {xc}: no {child.tgt_class} at "
                          f"{y}.{edge.tgt_rel}[{offset + j}]")
            else:
                self.fail(child.name, LINK, xc, subject,
                          f"∃-witness for {xc} is not linked at {y}.{edge.tgt_rel}[{offset + j}]")
        elif hole.verdict is not HoleVerdict.HOLDS:
            self.fail(child.name, POST_DATA, xc, subject,
                      f"postcondition fails on ({xc}, {subject})"
                      + (f": {hole.diagnostic}" if hole.diagnostic else ""))
        if found:
            nodes += self.emit_nodes(child.name, child.map, xc, witness)
            if isinstance(edge, Step):
                nodes.append(self.spec(edge.rest, xc, witness, path + ("S",)))
        return CertNode(C.EXISTS_WITNESS, child.name, xc, witness,
                        {"class": child.tgt_class, "found": found}, tuple(nodes))


def _require_valid(model: ModelInstance, role: str) -> None:
    report = validate_instance(model)
    if not report.ok:
        raise InstanceError(f"{role} instance is invalid: " + "; ".join(report.violations))


def _assemble(ot: OrderedTransformation, src: ModelInstance, tgt: ModelInstance,
              mode: str, record: dict | None) -> Verdict:
    checker = _Checker(src, tgt, mode, record)
    rr = ot.root_rung
    x = src.root
    try:
        pre = eval_pred(rr.pre, src[x])
        pre_error = None
    except ContractError as exc:
        pre, pre_error = False, str(exc)
    if pre_error is not None:
        checker.fail(rr.name, PRE, x, None, f"root precondition undefined: {pre_error}")
        hole = HoleEvidence(rr.name, x, None, False, False, HoleVerdict.FAILED, pre_error)
        body = (_hole_node(hole),)
    elif not pre:
        body = (CertNode(C.VACUOUS, rr.name, x, None, {}),)
    else:
        y = tgt.root
        hole = check_hole(rr, x, y, src, tgt)
        found = hole.verdict is HoleVerdict.HOLDS
        if mode == SEARCH:
            found = found and y in objects_of(tgt, rr.tgt_class)
        nodes = [_hole_node(hole)]
        if not found:
            checker.fail(rr.name, POST_DATA, x, y, f"root postcondition fails on ({x}, {y})"
                         + (f": {hole.diagnostic}" if hole.diagnostic else ""))
        else:
            nodes += checker.emit_nodes(rr.name, rr.map, x, y)
            if ot.body is not None:
                nodes.append(checker.spec(ot.body, x, y, ()))
        body = (CertNode(C.EXISTS_WITNESS, rr.name, x, y if found else None,
                         {"class": rr.tgt_class, "found": found}, tuple(nodes)),)
    impl = CertNode(C.IMPL_INTRO, rr.name, x, None, {"pre": pre}, body)
    root = CertNode(C.FORALL_SRC, rr.name, x, None, {"class": rr.src_class}, (impl,))
    cert = Certificate(ot.name, x, tgt.root, root)
    return Verdict(not checker.failures, cert, checker.failures)


# -- public operations -----------------------------------------------------------


def eval_spec(
    ladder: Ladder,
    x: str,
    y: str,
    src: ModelInstance,
    tgt: ModelInstance,
    *,
    mode: str = SEARCH,
    record: dict[RecordKey, str] | None = None,
    path: tuple[str, ...] = (),
) -> Verdict:
    """Evaluate the ladder's nested proposition at the pair ``(x, y)``."""
    index = ladder.index
    if x not in src.objects or y not in tgt.objects:
        raise LadderError(f"({x}, {y}) does not name objects of the given instances")
    if src[x].class_name != index.src_class or tgt[y].class_name != index.tgt_class:
        raise LadderError(
            f"({x}, {y}) is not typed by the ladder index {index.src_class}->{index.tgt_class}"
        )
    checker = _Checker(src, tgt, mode, record)
    node = checker.spec(ladder, x, y, path)
    cert = Certificate("", x, y, node)
    return Verdict(not checker.failures, cert, checker.failures)


def check_com(edge: Base | Step, x: str, y: str, src: ModelInstance,
              tgt: ModelInstance) -> ComEvidence:
    """Does mapping the R-children of ``x`` give exactly the S-children of ``y``?"""
    if x not in src.objects or y not in tgt.objects:
        return ComEvidence(edge.child.name, x, (), (), False, "undefined navigation (dangling)")
    return _Checker(src, tgt, SEARCH, None).com(edge, x, y)


def verify(ot: OrderedTransformation, src: ModelInstance, tgt: ModelInstance) -> Verdict:
    _require_valid(src, "source")
    _require_valid(tgt, "target")
    return _assemble(ot, src, tgt, SEARCH, None)


def execute(ot: OrderedTransformation, src: ModelInstance) -> Execution:
    report = well_formed(ot)
    if not report.ok:
        raise LadderError("transformation is not well formed: " + "; ".join(report.violations))
    _require_valid(src, "source")
    rr = ot.root_rung
    x = src.root
    try:
        pre = eval_pred(rr.pre, src[x])
    except ContractError as exc:
        raise ExecutionError(f"root precondition undefined: {exc}") from exc
    if not pre:
        raise RootPreconditionError(
            f"root precondition of {rr.name} is false on {x}; nothing to transform"
        )
    tgt = ModelInstance(ot.tgt_mm, f"{ot.name}({src.name})" if src.name else ot.name)
    record: dict[RecordKey, str] = {}
    try:
        y = apply_map(rr.map, src[x], tgt)
    except (ContractError, InstanceError) as exc:
        raise ExecutionError(f"rung {rr.name} on {x}: {exc}") from exc

    def build(ladder: Ladder, x: str, y: str, path: tuple[str, ...]) -> None:
        if isinstance(ladder, Join):
            build(ladder.left, x, y, path + ("L",))
            build(ladder.right, x, y, path + ("R",))
            return
        child = ladder.child
        for xc in navigate_path(src, x, ladder.src_path):
            node = src[xc]
            try:
                if not eval_pred(child.pre, node):
                    continue
                yc = apply_map(child.map, node, tgt)
                tgt.link(y, ladder.tgt_rel, yc)
            except (ContractError, InstanceError) as exc:
                raise ExecutionError(f"rung {child.name} on {xc}: {exc}") from exc
            record[(path, y, xc)] = yc
            if isinstance(ladder, Step):
                build(ladder.rest, xc, yc, path + ("S",))

    if ot.body is not None:
        build(ot.body, x, y, ())
    tgt.freeze(root=y)
    verdict = _assemble(ot, src, tgt, CONSTRUCTIVE, record)
    return Execution(tgt, verdict.trace, record, verdict)
