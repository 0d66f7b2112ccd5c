"""Executable pre/postconditions, mapping expressions and hole evidence.

Predicates are small expression trees over the two free variables ``src``
and ``tgt``.  Only the base attribute ``id`` and boolean flags are
observable; the only arithmetic is ``succ``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union

from .instance import ModelInstance, ObjectNode, ObjectValue
from .metamodel import BASE_ATTR, ClassSchema, Metamodel, Multiplicity


class ContractError(ValueError):
    pass


# -- expressions -------------------------------------------------------------


@dataclass(frozen=True)
class BoolConst:
    value: bool


@dataclass(frozen=True)
class NatConst:
    value: int


@dataclass(frozen=True)
class Attr:
    side: str  # "src" | "tgt"
    name: str


@dataclass(frozen=True)
class Succ:
    arg: Expr


@dataclass(frozen=True)
class Eq:
    left: Expr
    right: Expr


@dataclass(frozen=True)
class And:
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Or:
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Implies:
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Not:
    arg: Expr


Expr = Union[BoolConst, NatConst, Attr, Succ, Eq, And, Or, Implies, Not]

TRUE = BoolConst(True)
FALSE = BoolConst(False)
NAT, BOOL = "nat", "bool"


def src(name: str) -> Attr:
    return Attr("src", name)


def tgt(name: str) -> Attr:
    return Attr("tgt", name)


def conj(*parts: Expr) -> Expr:
    if not parts:
        return TRUE
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def free_sides(e: Expr) -> set[str]:
    match e:
        case Attr(side, _):
            return {side}
        case Succ(a) | Not(a):
            return free_sides(a)
        case Eq(l, r) | And(l, r) | Or(l, r) | Implies(l, r):
            return free_sides(l) | free_sides(r)
    return set()


def type_of(e: Expr, src_schema: ClassSchema | None, tgt_schema: ClassSchema | None) -> str:
    """Static type of ``e`` (``"nat"`` or ``"bool"``); raises on ill-typed input."""
    match e:
        case BoolConst(v):
            if not isinstance(v, bool):
                raise ContractError(f"boolean literal expected, got {v!r}")
            return BOOL
        case NatConst(v):
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ContractError(f"natural literal expected, got {v!r}")
            return NAT
        case Attr(side, name):
            schema = {"src": src_schema, "tgt": tgt_schema}.get(side)
            if side not in ("src", "tgt"):
                raise ContractError(f"unknown variable {side}")
            if schema is None:
                raise ContractError(f"{side}.{name}: {side} is not in scope")
            if name == BASE_ATTR:
                return NAT
            if schema.has_flag(name):
                return BOOL
            raise ContractError(f"{side}.{name}: {schema.name} has no attribute {name}")
        case Succ(a):
            if type_of(a, src_schema, tgt_schema) != NAT:
                raise ContractError(f"succ expects a natural: {format_expr(e)}")
            return NAT
        case Eq(l, r):
            lt = type_of(l, src_schema, tgt_schema)
            rt = type_of(r, src_schema, tgt_schema)
            if lt != rt:
                raise ContractError(f"type mismatch in {format_expr(e)}: {lt} vs {rt}")
            return BOOL
        case And(l, r) | Or(l, r) | Implies(l, r):
            for part in (l, r):
                if type_of(part, src_schema, tgt_schema) != BOOL:
                    raise ContractError(f"connective expects booleans: {format_expr(e)}")
            return BOOL
        case Not(a):
            if type_of(a, src_schema, tgt_schema) != BOOL:
                raise ContractError(f"not expects a boolean: {format_expr(e)}")
            return BOOL
    raise ContractError(f"not an expression: {e!r}")


def _is_bool(v: object) -> bool:
    return type(v) is bool


def _is_nat(v: object) -> bool:
    return type(v) is int


def eval_expr(e: Expr, src: ObjectNode | None, tgt: ObjectNode | None) -> int | bool:
    match e:
        case BoolConst(v):
            return v
        case NatConst(v):
            return v
        case Attr(side, name):
            node = src if side == "src" else tgt if side == "tgt" else None
            if node is None:
                raise ContractError(f"unresolved attribute {side}.{name}")
            if name == BASE_ATTR:
                return node.id
            if name not in node.flags:
                raise ContractError(
                    f"unresolved attribute {side}.{name} on {node.class_name}"
                )
            return node.flags[name]
        case Succ(a):
            v = eval_expr(a, src, tgt)
            if not _is_nat(v):
                raise ContractError(f"succ applied to non-natural in {format_expr(e)}")
            return v + 1
        case Eq(l, r):
            lv, rv = eval_expr(l, src, tgt), eval_expr(r, src, tgt)
            if type(lv) is not type(rv):
                raise ContractError(f"type mismatch in {format_expr(e)}")
            return lv == rv
        case Not(a):
            return not _as_bool(a, src, tgt)
        case And(l, r):
            lv = _as_bool(l, src, tgt)
            rv = _as_bool(r, src, tgt)
            return lv and rv
        case Or(l, r):
            lv = _as_bool(l, src, tgt)
            rv = _as_bool(r, src, tgt)
            return lv or rv
        case Implies(l, r):
            lv = _as_bool(l, src, tgt)
            rv = _as_bool(r, src, tgt)
            return (not lv) or rv
    raise ContractError(f"not an expression: {e!r}")


def _as_bool(e: Expr, src: ObjectNode | None, tgt: ObjectNode | None) -> bool:
    v = eval_expr(e, src, tgt)
    if not _is_bool(v):
        raise ContractError(f"boolean expected from {format_expr(e)}")
    return v


def eval_pred(p: Expr, src: ObjectNode | None, tgt: ObjectNode | None = None) -> bool:
    return _as_bool(p, src, tgt)


# -- concrete syntax for expressions ------------------------------------------

_PREC = {Implies: 1, Or: 2, And: 3, Eq: 4}


def _prec(e: Expr) -> int:
    return _PREC.get(type(e), 6)


def format_expr(e: Expr, min_prec: int = 0) -> str:
    match e:
        case BoolConst(v):
            text = "true" if v else "false"
        case NatConst(v):
            text = str(v)
        case Attr(side, name):
            text = f"{side}.{name}"
        case Succ(a):
            text = f"succ({format_expr(a)})"
        case Not(a):
            text = f"not ({format_expr(a)})"
        case Implies(l, r):
            text = f"{format_expr(l, 2)} -> {format_expr(r, 1)}"
        case Or(l, r):
            text = f"{format_expr(l, 2)} \\/ {format_expr(r, 3)}"
        case And(l, r):
            text = f"{format_expr(l, 3)} /\\ {format_expr(r, 4)}"
        case Eq(l, r):
            text = f"{format_expr(l, 5)} = {format_expr(r, 5)}"
        case _:
            raise ContractError(f"not an expression: {e!r}")
    if _prec(e) < min_prec:
        return f"({text})"
    return text


# -- maps and rungs ------------------------------------------------------------


class Placement(enum.Enum):
    FIRST = "first"
    LAST = "last"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class EmitClause:
    rel: str
    map: MapExpr
    placement: Placement = Placement.FIRST


@dataclass(frozen=True)
class MapExpr:
    target_class: str
    assignments: tuple[tuple[str, Expr], ...]
    emits: tuple[EmitClause, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "assignments", tuple(tuple(a) for a in self.assignments))
        object.__setattr__(self, "emits", tuple(self.emits))

    def emits_into(self, rel: str) -> tuple[list[EmitClause], list[EmitClause]]:
        first = [e for e in self.emits if e.rel == rel and e.placement is Placement.FIRST]
        last = [e for e in self.emits if e.rel == rel and e.placement is Placement.LAST]
        return first, last


def copy_id_map(target_class: str, **flags: bool) -> MapExpr:
    assigns: list[tuple[str, Expr]] = [(BASE_ATTR, src(BASE_ATTR))]
    assigns += [(name, BoolConst(v)) for name, v in flags.items()]
    return MapExpr(target_class, tuple(assigns))


@dataclass(frozen=True)
class Rung:
    name: str
    src_class: str
    tgt_class: str
    pre: Expr
    post: Expr
    map: MapExpr


class HoleVerdict(enum.Enum):
    HOLDS = "HOLDS"
    VACUOUS = "VACUOUS"
    FAILED = "FAILED"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class HoleEvidence:
    rung: str
    src_key: str
    tgt_key: str | None
    pre_value: bool
    post_value: bool
    verdict: HoleVerdict
    diagnostic: str | None = None


def validate_map(
    m: MapExpr, src_schema: ClassSchema, tgt_mm: Metamodel, where: str = ""
) -> list[str]:
    problems: list[str] = []
    schema = tgt_mm.get(m.target_class)
    if schema is None:
        return [f"{where}map targets undeclared class {m.target_class}"]
    ids = [a for a, _ in m.assignments if a == BASE_ATTR]
    if len(ids) != 1:
        problems.append(f"{where}map must assign {BASE_ATTR} exactly once")
    seen: set[str] = set()
    for attr, expr in m.assignments:
        if attr in seen:
            problems.append(f"{where}attribute {attr} assigned twice")
        seen.add(attr)
        if attr != BASE_ATTR and not schema.has_flag(attr):
            problems.append(f"{where}assignment to undeclared attribute {m.target_class}.{attr}")
            continue
        if free_sides(expr) - {"src"}:
            problems.append(f"{where}assignment to {attr} may only mention src")
            continue
        want = "nat" if attr == BASE_ATTR else "bool"
        try:
            got = type_of(expr, src_schema, None)
        except ContractError as exc:
            problems.append(f"{where}{exc}")
            continue
        if got != want:
            problems.append(f"{where}{attr} expects a {want}, got {got}")
    for emit in m.emits:
        rel = schema.relationship(emit.rel)
        if rel is None or rel.multiplicity is not Multiplicity.MANY:
            problems.append(
                f"{where}emit into {emit.rel}: not a many-valued relationship of {schema.name}"
            )
            continue
        if emit.map.target_class != rel.target_class:
            problems.append(
                f"{where}emit into {emit.rel} builds {emit.map.target_class}, "
                f"expected {rel.target_class}"
            )
            continue
        emitted = tgt_mm[emit.map.target_class]
        for r in emitted.relationships:
            if r.multiplicity is Multiplicity.ONE:
                problems.append(
                    f"{where}emitted {emitted.name} has one-valued relationship {r.name}"
                )
        problems += validate_map(emit.map, src_schema, tgt_mm, where)
    return problems


def validate_rung(rung: Rung, src_mm: Metamodel, tgt_mm: Metamodel) -> list[str]:
    where = f"rung {rung.name}: "
    problems: list[str] = []
    s_schema = src_mm.get(rung.src_class)
    t_schema = tgt_mm.get(rung.tgt_class)
    if s_schema is None:
        problems.append(f"{where}source class {rung.src_class} not in {src_mm.name}")
    if t_schema is None:
        problems.append(f"{where}target class {rung.tgt_class} not in {tgt_mm.name}")
    if problems:
        return problems
    if rung.map.target_class != rung.tgt_class:
        problems.append(f"{where}map builds {rung.map.target_class}, not {rung.tgt_class}")
    if free_sides(rung.pre) - {"src"}:
        problems.append(f"{where}precondition may only mention src")
    else:
        try:
            if type_of(rung.pre, s_schema, None) != BOOL:
                problems.append(f"{where}precondition is not boolean")
        except ContractError as exc:
            problems.append(f"{where}pre: {exc}")
    try:
        if type_of(rung.post, s_schema, t_schema) != BOOL:
            problems.append(f"{where}postcondition is not boolean")
    except ContractError as exc:
        problems.append(f"{where}post: {exc}")
    problems += validate_map(rung.map, s_schema, tgt_mm, where)
    return problems


def _assigned(m: MapExpr, src_node: ObjectNode, schema: ClassSchema) -> tuple[int, dict[str, bool]]:
    ident: int | None = None
    flags = dict.fromkeys(schema.flags, False)
    for attr, expr in m.assignments:
        val = eval_expr(expr, src_node, None)
        if attr == BASE_ATTR:
            if not _is_nat(val):
                raise ContractError(f"{m.target_class}.{attr} must be a natural")
            ident = val
        elif attr in flags:
            if not _is_bool(val):
                raise ContractError(f"{m.target_class}.{attr} must be boolean")
            flags[attr] = val
        else:
            raise ContractError(f"assignment to undeclared attribute {m.target_class}.{attr}")
    if ident is None:
        raise ContractError(f"map for {m.target_class} does not assign {BASE_ATTR}")
    return ident, flags


def map_value(m: MapExpr, src_node: ObjectNode, tgt_mm: Metamodel) -> ObjectValue:
    """The (class, id, flags) value ``m`` would build from ``src_node``, without building it."""
    ident, flags = _assigned(m, src_node, tgt_mm[m.target_class])
    return (m.target_class, ident, tuple(sorted(flags.items())))


def apply_map(m: MapExpr, src_node: ObjectNode, sink: ModelInstance) -> str:
    """Build the target object (and its emitted objects) inside ``sink``."""
    schema = sink.metamodel.get(m.target_class)
    if schema is None:
        raise ContractError(f"map targets undeclared class {m.target_class}")
    ident, flags = _assigned(m, src_node, schema)
    key = sink.build_object(m.target_class, ident, flags)
    for emit in m.emits:
        child = apply_map(emit.map, src_node, sink)
        sink.link(key, emit.rel, child, trailing=emit.placement is Placement.LAST)
    return key


def check_hole(
    rung: Rung,
    src_key: str,
    tgt_key: str | None,
    src_model: ModelInstance,
    tgt_model: ModelInstance,
) -> HoleEvidence:
    """Evidence that ``pre(src) -> post(src, tgt)`` holds on one mapped pair."""
    s = src_model.objects.get(src_key)
    t = tgt_model.objects.get(tgt_key) if tgt_key is not None else None
    try:
        pre = eval_pred(rung.pre, s, None)
    except ContractError as exc:
        return HoleEvidence(rung.name, src_key, tgt_key, False, False, HoleVerdict.FAILED, str(exc))
    if not pre:
        return HoleEvidence(rung.name, src_key, tgt_key, False, False, HoleVerdict.VACUOUS)
    if t is None:
        return HoleEvidence(
            rung.name, src_key, tgt_key, True, False, HoleVerdict.FAILED, "no target object"
        )
    try:
        post = eval_pred(rung.post, s, t)
    except ContractError as exc:
        return HoleEvidence(rung.name, src_key, tgt_key, True, False, HoleVerdict.FAILED, str(exc))
    return HoleEvidence(
        rung.name, src_key, tgt_key, True, post, HoleVerdict.HOLDS if post else HoleVerdict.FAILED
    )
