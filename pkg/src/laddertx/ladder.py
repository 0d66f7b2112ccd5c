"""The inductive transformation value: Base, Step and Join ladders.

A ladder node is indexed by its parent's (source class, target class, map).
The parent's own contract is not part of the node; the top-level
:class:`OrderedTransformation` supplies it as the root rung.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence, Union

from .contracts import MapExpr, Rung, validate_rung
from .metamodel import Metamodel, Multiplicity, ValidationReport, resolve_path, validate_metamodel


class LadderError(ValueError):
    pass


@dataclass(frozen=True)
class LadderIndex:
    src_class: str
    tgt_class: str
    map: MapExpr

    def __str__(self) -> str:
        return f"{self.src_class}->{self.tgt_class}"


def index_of(rung: Rung | LadderIndex) -> LadderIndex:
    if isinstance(rung, LadderIndex):
        return rung
    return LadderIndex(rung.src_class, rung.tgt_class, rung.map)


@dataclass(frozen=True)
class Base:
    index: LadderIndex
    child: Rung
    src_path: tuple[str, ...]
    tgt_rel: str


@dataclass(frozen=True)
class Step:
    index: LadderIndex
    child: Rung
    src_path: tuple[str, ...]
    tgt_rel: str
    rest: Ladder


@dataclass(frozen=True)
class Join:
    left: Ladder
    right: Ladder

    @property
    def index(self) -> LadderIndex:
        return self.left.index


Ladder = Union[Base, Step, Join]


def _as_path(path: str | Sequence[str]) -> tuple[str, ...]:
    if isinstance(path, str):
        return tuple(path.split("."))
    return tuple(path)


def edge_problems(
    index: LadderIndex,
    child: Rung,
    src_path: tuple[str, ...],
    tgt_rel: str,
    src_mm: Metamodel,
    tgt_mm: Metamodel,
) -> list[str]:
    """Side conditions of a Base/Step edge against both metamodels."""
    where = f"{child.name} via {'.'.join(src_path)}/{tgt_rel}: "
    problems: list[str] = []
    try:
        reached, r_mult = resolve_path(src_mm, index.src_class, src_path)
    except KeyError as exc:
        problems.append(where + str(exc.args[0]) + f" (source side, {src_mm.name})")
        reached = r_mult = None
    if reached is not None and reached != child.src_class:
        problems.append(where + f"source path reaches {reached}, rung expects {child.src_class}")
    tgt_schema = tgt_mm.get(index.tgt_class)
    s_decl = tgt_schema.relationship(tgt_rel) if tgt_schema else None
    if s_decl is None:
        problems.append(
            where + f"relationship {tgt_rel} is not declared on {index.tgt_class} "
            f"(target side, {tgt_mm.name})"
        )
    elif s_decl.target_class != child.tgt_class:
        problems.append(
            where + f"target relationship reaches {s_decl.target_class}, "
            f"rung expects {child.tgt_class}"
        )
    if r_mult is not None and s_decl is not None and r_mult is not s_decl.multiplicity:
        problems.append(
            where + f"multiplicity mismatch: source {r_mult}, target {s_decl.multiplicity}"
        )
    return problems


def _checked(problems: list[str]) -> None:
    if problems:
        raise LadderError("; ".join(problems))


def base(
    parent: Rung | LadderIndex,
    child: Rung,
    src_path: str | Sequence[str],
    tgt_rel: str,
    *,
    src_mm: Metamodel | None = None,
    tgt_mm: Metamodel | None = None,
) -> Base:
    index = index_of(parent)
    path = _as_path(src_path)
    if src_mm is not None and tgt_mm is not None:
        _checked(edge_problems(index, child, path, tgt_rel, src_mm, tgt_mm))
    return Base(index, child, path, tgt_rel)


def step(
    parent: Rung | LadderIndex,
    child: Rung,
    src_path: str | Sequence[str],
    tgt_rel: str,
    rest: Ladder,
    *,
    src_mm: Metamodel | None = None,
    tgt_mm: Metamodel | None = None,
) -> Step:
    index = index_of(parent)
    path = _as_path(src_path)
    if rest.index != index_of(child):
        raise LadderError(
            f"step {child.name}: rest is rooted at {rest.index}, "
            f"expected {child.src_class}->{child.tgt_class} with the child's map"
        )
    if src_mm is not None and tgt_mm is not None:
        _checked(edge_problems(index, child, path, tgt_rel, src_mm, tgt_mm))
    return Step(index, child, path, tgt_rel, rest)


def join(left: Ladder, right: Ladder) -> Join:
    if left.index != right.index:
        raise LadderError(f"join of ladders with different roots: {left.index} vs {right.index}")
    return Join(left, right)


def join_all(ladders: Sequence[Ladder]) -> Ladder:
    """Left-nested join: ``join(join(t1, t2), t3)``."""
    if not ladders:
        raise LadderError("nothing to join")
    out = ladders[0]
    for nxt in ladders[1:]:
        out = join(out, nxt)
    return out


def walk(ladder: Ladder) -> Iterator[Ladder]:
    """Preorder over ladder nodes."""
    yield ladder
    if isinstance(ladder, Join):
        yield from walk(ladder.left)
        yield from walk(ladder.right)
    elif isinstance(ladder, Step):
        yield from walk(ladder.rest)


def branches(ladder: Ladder) -> list[Base | Step]:
    """The Base/Step edges hanging directly off this ladder's index."""
    if isinstance(ladder, Join):
        return branches(ladder.left) + branches(ladder.right)
    return [ladder]


def to_sexpr(ladder: Ladder | None) -> str:
    match ladder:
        case None:
            return "()"
        case Join(l, r):
            return f"(JOIN {to_sexpr(l)} {to_sexpr(r)})"
        case Step(_, child, path, rel, rest):
            return f"(STEP {child.name} {'.'.join(path)} {rel} {to_sexpr(rest)})"
        case Base(_, child, path, rel):
            return f"(BASE {child.name} {'.'.join(path)} {rel})"
    raise LadderError(f"not a ladder: {ladder!r}")


@dataclass(frozen=True)
class OrderedTransformation:
    name: str
    src_mm: Metamodel
    tgt_mm: Metamodel
    root_rung: Rung
    body: Ladder | None = None

    def rungs(self) -> list[Rung]:
        out = [self.root_rung]
        if self.body is not None:
            out += [n.child for n in walk(self.body) if not isinstance(n, Join)]
        return out

    def unmapped_classes(self) -> list[str]:
        mapped = {r.src_class for r in self.rungs()}
        return [c for c in self.src_mm.class_names if c not in mapped]


def well_formed(ot: OrderedTransformation) -> ValidationReport:
    report = ValidationReport()
    report.extend(validate_metamodel(ot.src_mm), f"{ot.src_mm.name}: ")
    report.extend(validate_metamodel(ot.tgt_mm), f"{ot.tgt_mm.name}: ")
    if not report.ok:
        return report
    root = ot.root_rung
    if root.src_class != ot.src_mm.root_class:
        report.violations.append(
            f"root rung {root.name} starts at {root.src_class}, "
            f"source root is {ot.src_mm.root_class}"
        )
    if root.tgt_class != ot.tgt_mm.root_class:
        report.violations.append(
            f"root rung {root.name} ends at {root.tgt_class}, "
            f"target root is {ot.tgt_mm.root_class}"
        )

    by_name: dict[str, Rung] = {}
    for rung in ot.rungs():
        known = by_name.get(rung.name)
        if known is None:
            by_name[rung.name] = rung
            report.violations.extend(validate_rung(rung, ot.src_mm, ot.tgt_mm))
        elif known != rung:
            report.violations.append(f"two different rungs are named {rung.name}")

    if ot.body is None:
        return report
    if ot.body.index != index_of(root):
        report.violations.append(
            f"ladder is rooted at {ot.body.index}, root rung is {root.src_class}->{root.tgt_class}"
        )

    def check(node: Ladder) -> None:
        if isinstance(node, Join):
            if node.left.index != node.right.index:
                report.violations.append(
                    f"join of ladders with different roots: {node.left.index} vs {node.right.index}"
                )
            check(node.left)
            check(node.right)
            return
        if node.index.src_class not in ot.src_mm or node.index.tgt_class not in ot.tgt_mm:
            report.violations.append(f"ladder index {node.index} is not in the metamodels")
            return
        if node.child.src_class in ot.src_mm and node.child.tgt_class in ot.tgt_mm:
            report.violations.extend(
                edge_problems(node.index, node.child, node.src_path, node.tgt_rel,
                              ot.src_mm, ot.tgt_mm)
            )
        if isinstance(node, Step):
            if node.rest.index != index_of(node.child):
                report.violations.append(
                    f"step {node.child.name}: rest is rooted at {node.rest.index}"
                )
            check_group(node.rest)
            check(node.rest)

    def check_group(node: Ladder) -> None:
        seen: set[str] = set()
        for edge in branches(node):
            if edge.tgt_rel in seen:
                report.violations.append(
                    f"two branches under {edge.index} write target relationship {edge.tgt_rel}"
                )
            seen.add(edge.tgt_rel)

    check_group(ot.body)
    check(ot.body)
    return report


def multiplicity_of(ot: OrderedTransformation, edge: Base | Step) -> Multiplicity:
    return ot.tgt_mm[edge.index.tgt_class].relationship(edge.tgt_rel).multiplicity
