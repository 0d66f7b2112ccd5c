"""Text format (``.mt``) for metamodels, instances and transformations.

::

    metamodel UML {
      root Model;
      class Model { rel classes : Class many; }
      class Class { rel attrs : Attribute many; }
      class Attribute {}
    }

    instance m1 : UML {
      Model#1 { classes = [Class#2] }
      Class#2 { attrs = [] }
    }

    transform uml2sql : UML -> SQL {
      rung class2table : Class -> Table {
        pre: true;
        post: src.id = tgt.id;
        map { id <- src.id; emit first columns { id <- src.id; isKey <- true; }; }
      }
      root model2schema;
      let tc = base(attr2column via attrs / columns);
      ladder: step(class2table via classes / tables, tc);
    }

Keywords are contextual, so any identifier may name a class, flag,
relationship or rung.  ``parse`` produces a syntax tree; ``load`` turns
one or more documents into metamodels, frozen instances and checked
transformations.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Union

from . import contracts as K
from .contracts import ContractError, EmitClause, Expr, MapExpr, Placement, Rung, format_expr
from .instance import InstanceError, ModelInstance, object_key
from .ladder import (
    Base,
    Join,
    Ladder,
    LadderError,
    OrderedTransformation,
    Step,
    base,
    join,
    step,
    well_formed,
)
from .metamodel import (
    ClassSchema,
    Metamodel,
    Multiplicity,
    RelationshipDecl,
    validate_metamodel,
)


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str
    file: str | None = None

    def __str__(self) -> str:
        where = f"{self.file}:" if self.file else ""
        return f"{where}{self.line}:{self.col}: {self.message}"


class DslError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("\n".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


def _pos() -> tuple[int, int]:
    return field(default=(0, 0), compare=False, repr=False)


# -- syntax tree --------------------------------------------------------------


@dataclass(frozen=True)
class FlagDecl:
    name: str
    pos: tuple[int, int] = _pos()


@dataclass(frozen=True)
class RelDecl:
    name: str
    target: str
    multiplicity: str
    pos: tuple[int, int] = _pos()


@dataclass(frozen=True)
class ClassDecl:
    name: str
    members: tuple[FlagDecl | RelDecl, ...]
    pos: tuple[int, int] = _pos()


@dataclass(frozen=True)
class MetamodelDecl:
    name: str
    root: str
    classes: tuple[ClassDecl, ...]
    pos: tuple[int, int] = _pos()


@dataclass(frozen=True)
class ObjRef:
    class_name: str
    id: int
    pos: tuple[int, int] = _pos()

    def __str__(self) -> str:
        return object_key(self.class_name, self.id)


FieldValue = Union[bool, ObjRef, None, tuple]


@dataclass(frozen=True)
class FieldDecl:
    name: str
    value: FieldValue
    pos: tuple[int, int] = _pos()


@dataclass(frozen=True)
class ObjDecl:
    class_name: str
    id: int
    fields: tuple[FieldDecl, ...]
    pos: tuple[int, int] = _pos()


@dataclass(frozen=True)
class InstanceDecl:
    name: str
    metamodel: str
    objects: tuple[ObjDecl, ...]  # kept sorted by (class, id)
    pos: tuple[int, int] = _pos()


@dataclass(frozen=True)
class EmitDecl:
    placement: str
    rel: str
    map: MapDecl
    pos: tuple[int, int] = _pos()


@dataclass(frozen=True)
class MapDecl:
    assignments: tuple[tuple[str, Expr], ...]
    emits: tuple[EmitDecl, ...] = ()
    pos: tuple[int, int] = _pos()


@dataclass(frozen=True)
class RungDecl:
    name: str
    src_class: str
    tgt_class: str
    pre: Expr
    post: Expr
    map: MapDecl
    pos: tuple[int, int] = _pos()


@dataclass(frozen=True)
class BaseExpr:
    rung: str
    src_path: tuple[str, ...]
    tgt_rel: str
    pos: tuple[int, int] = _pos()


@dataclass(frozen=True)
class StepExpr:
    rung: str
    src_path: tuple[str, ...]
    tgt_rel: str
    rest: LadderExpr
    pos: tuple[int, int] = _pos()


@dataclass(frozen=True)
class JoinExpr:
    left: LadderExpr
    right: LadderExpr
    pos: tuple[int, int] = _pos()


@dataclass(frozen=True)
class LadderRef:
    name: str
    pos: tuple[int, int] = _pos()


LadderExpr = Union[BaseExpr, StepExpr, JoinExpr, LadderRef]


@dataclass(frozen=True)
class LetDecl:
    name: str
    ladder: LadderExpr
    pos: tuple[int, int] = _pos()


@dataclass(frozen=True)
class TransformDecl:
    name: str
    src_mm: str
    tgt_mm: str
    rungs: tuple[RungDecl, ...]
    root: str | None
    lets: tuple[LetDecl, ...] = ()
    ladder: LadderExpr | None = None
    pos: tuple[int, int] = _pos()


@dataclass(frozen=True)
class Document:
    metamodels: tuple[MetamodelDecl, ...] = ()
    instances: tuple[InstanceDecl, ...] = ()
    transforms: tuple[TransformDecl, ...] = ()
    file: str | None = field(default=None, compare=False)

    def merged(self, other: Document) -> Document:
        return Document(
            self.metamodels + other.metamodels,
            self.instances + other.instances,
            self.transforms + other.transforms,
        )


# -- lexer ----------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<nat>[0-9]+)
  | (?P<sym><-|->|/\\|\\/|[{}()\[\];:,.\#=/])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident | nat | sym | eof
    text: str
    line: int
    col: int


def tokenize(text: str, file: str | None = None) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if m is None:
            raise DslError([Diagnostic(line, i - line_start + 1,
                                       f"unexpected character {text[i]!r}", file)])
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), line, i - line_start + 1))
        chunk = m.group()
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = i + chunk.rindex("\n") + 1
        i = m.end()
    tokens.append(Token("eof", "", line, i - line_start + 1))
    return tokens


# -- parser ---------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str, file: str | None):
        self.file = file
        self.tokens = tokenize(text, file)
        self.i = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def error(self, message: str, tok: Token | None = None) -> DslError:
        tok = tok or self.tok
        return DslError([Diagnostic(tok.line, tok.col, message, self.file)])

    def describe(self, tok: Token) -> str:
        return "end of input" if tok.kind == "eof" else repr(tok.text)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("sym", "ident") and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}, found {self.describe(self.tok)}")
        tok = self.tok
        self.i += 1
        return tok

    def ident(self, what: str = "identifier") -> str:
        if self.tok.kind != "ident":
            raise self.error(f"expected {what}, found {self.describe(self.tok)}")
        self.i += 1
        return self.tokens[self.i - 1].text

    def nat(self) -> int:
        if self.tok.kind != "nat":
            raise self.error(f"expected a natural number, found {self.describe(self.tok)}")
        self.i += 1
        return int(self.tokens[self.i - 1].text)

    def here(self) -> tuple[int, int]:
        return (self.tok.line, self.tok.col)

    # sections
    def document(self) -> Document:
        mms, insts, txs = [], [], []
        while self.tok.kind != "eof":
            if self.at("metamodel"):
                mms.append(self.metamodel())
            elif self.at("instance"):
                insts.append(self.instance())
            elif self.at("transform"):
                txs.append(self.transform())
            else:
                raise self.error(
                    f"expected 'metamodel', 'instance' or 'transform', "
                    f"found {self.describe(self.tok)}"
                )
        return Document(tuple(mms), tuple(insts), tuple(txs), file=self.file)

    def metamodel(self) -> MetamodelDecl:
        pos = self.here()
        self.expect("metamodel")
        name = self.ident("metamodel name")
        self.expect("{")
        self.expect("root")
        root = self.ident("root class name")
        self.expect(";")
        classes = []
        while not self.at("}"):
            classes.append(self.class_decl())
        self.expect("}")
        return MetamodelDecl(name, root, tuple(classes), pos)

    def class_decl(self) -> ClassDecl:
        pos = self.here()
        self.expect("class")
        name = self.ident("class name")
        self.expect("{")
        members: list[FlagDecl | RelDecl] = []
        while not self.at("}"):
            mpos = self.here()
            if self.at("flag"):
                self.i += 1
                members.append(FlagDecl(self.ident("flag name"), mpos))
            elif self.at("rel"):
                self.i += 1
                rname = self.ident("relationship name")
                self.expect(":")
                target = self.ident("class name")
                if not (self.at("one") or self.at("many")):
                    raise self.error(f"expected 'one' or 'many', found {self.describe(self.tok)}")
                mult = self.tok.text
                self.i += 1
                members.append(RelDecl(rname, target, mult, mpos))
            else:
                raise self.error(f"expected 'flag' or 'rel', found {self.describe(self.tok)}")
            self.expect(";")
        self.expect("}")
        return ClassDecl(name, tuple(members), pos)

    def obj_ref(self) -> ObjRef:
        pos = self.here()
        cls = self.ident("class name")
        self.expect("#")
        return ObjRef(cls, self.nat(), pos)

    def instance(self) -> InstanceDecl:
        pos = self.here()
        self.expect("instance")
        name = self.ident("instance name")
        self.expect(":")
        mm = self.ident("metamodel name")
        self.expect("{")
        objects: list[ObjDecl] = []
        seen: set[tuple[str, int]] = set()
        while not self.at("}"):
            opos = self.here()
            ref = self.obj_ref()
            if (ref.class_name, ref.id) in seen:
                raise self.error(f"object {ref} declared twice", self.tokens[self.i - 3])
            seen.add((ref.class_name, ref.id))
            self.expect("{")
            fields: list[FieldDecl] = []
            while not self.at("}"):
                fpos = self.here()
                fname = self.ident("field name")
                self.expect("=")
                fields.append(FieldDecl(fname, self.field_value(), fpos))
                if not self.at("}"):
                    self.expect(",")
            self.expect("}")
            objects.append(ObjDecl(ref.class_name, ref.id, tuple(fields), opos))
        self.expect("}")
        objects.sort(key=lambda o: (o.class_name, o.id))
        return InstanceDecl(name, mm, tuple(objects), pos)

    def field_value(self) -> FieldValue:
        if self.at("["):
            self.i += 1
            refs = []
            while not self.at("]"):
                refs.append(self.obj_ref())
                if not self.at("]"):
                    self.expect(",")
            self.expect("]")
            return tuple(refs)
        if self.tok.kind == "ident" and not (self.peek().kind == "sym" and self.peek().text == "#"):
            word = self.tok.text
            if word in ("true", "false"):
                self.i += 1
                return word == "true"
            if word == "none":
                self.i += 1
                return None
        return self.obj_ref()

    def transform(self) -> TransformDecl:
        pos = self.here()
        self.expect("transform")
        name = self.ident("transformation name")
        self.expect(":")
        src_mm = self.ident("metamodel name")
        self.expect("->")
        tgt_mm = self.ident("metamodel name")
        self.expect("{")
        rungs, lets = [], []
        root: str | None = None
        ladder: LadderExpr | None = None
        have_ladder = False
        while not self.at("}"):
            if self.at("rung"):
                rungs.append(self.rung())
            elif self.at("root"):
                tok = self.tok
                self.i += 1
                if root is not None:
                    raise self.error("root rung given twice", tok)
                root = self.ident("rung name")
                self.expect(";")
            elif self.at("let"):
                lpos = self.here()
                self.i += 1
                lname = self.ident("ladder name")
                self.expect("=")
                lets.append(LetDecl(lname, self.ladder_expr(), lpos))
                self.expect(";")
            elif self.at("ladder"):
                tok = self.tok
                self.i += 1
                if have_ladder:
                    raise self.error("ladder given twice", tok)
                have_ladder = True
                self.expect(":")
                if self.at("none") and self.peek().text == ";":
                    self.i += 1
                else:
                    ladder = self.ladder_expr()
                self.expect(";")
            else:
                raise self.error(
                    f"expected 'rung', 'root', 'let' or 'ladder', found {self.describe(self.tok)}"
                )
        self.expect("}")
        return TransformDecl(name, src_mm, tgt_mm, tuple(rungs), root, tuple(lets), ladder, pos)

    def rung(self) -> RungDecl:
        pos = self.here()
        self.expect("rung")
        name = self.ident("rung name")
        self.expect(":")
        src_cls = self.ident("class name")
        self.expect("->")
        tgt_cls = self.ident("class name")
        self.expect("{")
        self.expect("pre")
        self.expect(":")
        pre = self.expr()
        self.expect(";")
        self.expect("post")
        self.expect(":")
        post = self.expr()
        self.expect(";")
        self.expect("map")
        mp = self.map_body()
        self.expect("}")
        return RungDecl(name, src_cls, tgt_cls, pre, post, mp, pos)

    def map_body(self) -> MapDecl:
        pos = self.here()
        self.expect("{")
        assigns: list[tuple[str, Expr]] = []
        emits: list[EmitDecl] = []
        while not self.at("}"):
            if self.at("emit") and self.peek().kind == "ident":
                epos = self.here()
                self.i += 1
                if not (self.at("first") or self.at("last")):
                    raise self.error(f"expected 'first' or 'last', found {self.describe(self.tok)}")
                placement = self.tok.text
                self.i += 1
                rel = self.ident("relationship name")
                emits.append(EmitDecl(placement, rel, self.map_body(), epos))
            else:
                attr = self.ident("attribute name")
                self.expect("<-")
                assigns.append((attr, self.expr()))
            self.expect(";")
        self.expect("}")
        return MapDecl(tuple(assigns), tuple(emits), pos)

    def path(self) -> tuple[str, ...]:
        parts = [self.ident("relationship name")]
        while self.at("."):
            self.i += 1
            parts.append(self.ident("relationship name"))
        return tuple(parts)

    def ladder_expr(self) -> LadderExpr:
        pos = self.here()
        if self.tok.kind != "ident":
            raise self.error(f"expected a ladder, found {self.describe(self.tok)}")
        word = self.tok.text
        is_call = self.peek().kind == "sym" and self.peek().text == "("
        if not is_call:
            self.i += 1
            return LadderRef(word, pos)
        if word == "join":
            self.i += 2
            left = self.ladder_expr()
            self.expect(",")
            right = self.ladder_expr()
            self.expect(")")
            return JoinExpr(left, right, pos)
        if word in ("base", "step"):
            self.i += 2
            rung = self.ident("rung name")
            self.expect("via")
            src_path = self.path()
            self.expect("/")
            tgt_rel = self.ident("relationship name")
            if word == "base":
                self.expect(")")
                return BaseExpr(rung, src_path, tgt_rel, pos)
            self.expect(",")
            rest = self.ladder_expr()
            self.expect(")")
            return StepExpr(rung, src_path, tgt_rel, rest, pos)
        raise self.error(f"expected 'base', 'step' or 'join', found {word!r}")

    # expressions
    def expr(self) -> Expr:
        left = self.disj()
        if self.at("->"):
            self.i += 1
            return K.Implies(left, self.expr())
        return left

    def disj(self) -> Expr:
        out = self.conj()
        while self.at("\\/"):
            self.i += 1
            out = K.Or(out, self.conj())
        return out

    def conj(self) -> Expr:
        out = self.equality()
        while self.at("/\\"):
            self.i += 1
            out = K.And(out, self.equality())
        return out

    def equality(self) -> Expr:
        left = self.unary()
        if self.at("="):
            self.i += 1
            right = self.unary()
            if self.at("="):
                raise self.error("'=' does not chain; add parentheses")
            return K.Eq(left, right)
        return left

    def unary(self) -> Expr:
        if self.at("not"):
            self.i += 1
            return K.Not(self.unary())
        return self.atom()

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "nat":
            self.i += 1
            return K.NatConst(int(tok.text))
        if self.at("("):
            self.i += 1
            inner = self.expr()
            self.expect(")")
            return inner
        if tok.kind == "ident":
            if tok.text in ("true", "false"):
                self.i += 1
                return K.BoolConst(tok.text == "true")
            if tok.text == "succ":
                self.i += 1
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return K.Succ(inner)
            if tok.text in ("src", "tgt"):
                self.i += 1
                self.expect(".")
                return K.Attr(tok.text, self.ident("attribute name"))
        raise self.error(f"expected an expression, found {self.describe(tok)}")


def parse(text: str, file: str | None = None) -> Document:
    """Parse one ``.mt`` document; raises :class:`DslError` with positioned diagnostics."""
    try:
        return _Parser(text, file).document()
    except RecursionError:
        raise DslError([Diagnostic(1, 1, "input nested too deeply", file)]) from None


# -- printer -----------------------------------------------------------------------


def _fmt_value(v: FieldValue) -> str:
    if v is True:
        return "true"
    if v is False:
        return "false"
    if v is None:
        return "none"
    if isinstance(v, tuple):
        return "[" + ", ".join(str(r) for r in v) + "]"
    return str(v)


def format_ladder(expr: LadderExpr) -> str:
    match expr:
        case LadderRef(name):
            return name
        case JoinExpr(l, r):
            return f"join({format_ladder(l)}, {format_ladder(r)})"
        case BaseExpr(rung, path, rel):
            return f"base({rung} via {'.'.join(path)} / {rel})"
        case StepExpr(rung, path, rel, rest):
            return f"step({rung} via {'.'.join(path)} / {rel}, {format_ladder(rest)})"
    raise TypeError(f"not a ladder expression: {expr!r}")


def _fmt_map(m: MapDecl, indent: str) -> list[str]:
    lines = []
    for attr, e in m.assignments:
        lines.append(f"{indent}  {attr} <- {format_expr(e)};")
    for emit in m.emits:
        lines.append(f"{indent}  emit {emit.placement} {emit.rel} {{")
        lines += _fmt_map(emit.map, indent + "  ")
        lines.append(f"{indent}  }};")
    return lines


def print_document(doc: Document) -> str:
    """Canonical text for a document; ``parse(print_document(d)) == d``."""
    out: list[str] = []
    for mm in doc.metamodels:
        out.append(f"metamodel {mm.name} {{")
        out.append(f"  root {mm.root};")
        for c in mm.classes:
            if not c.members:
                out.append(f"  class {c.name} {{}}")
                continue
            out.append(f"  class {c.name} {{")
            for m in c.members:
                if isinstance(m, FlagDecl):
                    out.append(f"    flag {m.name};")
                else:
                    out.append(f"    rel {m.name} : {m.target} {m.multiplicity};")
            out.append("  }")
        out.append("}")
        out.append("")
    for inst in doc.instances:
        out.append(f"instance {inst.name} : {inst.metamodel} {{")
        for o in sorted(inst.objects, key=lambda o: (o.class_name, o.id)):
            fields = ", ".join(f"{f.name} = {_fmt_value(f.value)}" for f in o.fields)
            body = f" {fields} " if fields else ""
            out.append(f"  {object_key(o.class_name, o.id)} {{{body}}}")
        out.append("}")
        out.append("")
    for tx in doc.transforms:
        out.append(f"transform {tx.name} : {tx.src_mm} -> {tx.tgt_mm} {{")
        for r in tx.rungs:
            out.append(f"  rung {r.name} : {r.src_class} -> {r.tgt_class} {{")
            out.append(f"    pre: {format_expr(r.pre)};")
            out.append(f"    post: {format_expr(r.post)};")
            out.append("    map {")
            out += _fmt_map(r.map, "    ")
            out.append("    }")
            out.append("  }")
        if tx.root is not None:
            out.append(f"  root {tx.root};")
        for let in tx.lets:
            out.append(f"  let {let.name} = {format_ladder(let.ladder)};")
        if tx.ladder is not None:
            out.append(f"  ladder: {format_ladder(tx.ladder)};")
        out.append("}")
        out.append("")
    return "\n".join(out)


# -- from semantic objects back to syntax --------------------------------------------


def metamodel_decl(mm: Metamodel) -> MetamodelDecl:
    classes = []
    for c in mm.classes:
        members: list[FlagDecl | RelDecl] = [FlagDecl(f) for f in c.flags]
        members += [RelDecl(r.name, r.target_class, r.multiplicity.value) for r in c.relationships]
        classes.append(ClassDecl(c.name, tuple(members)))
    return MetamodelDecl(mm.name, mm.root_class, tuple(classes))


def _ref(key: str) -> ObjRef:
    cls, _, ident = key.rpartition("#")
    return ObjRef(cls, int(ident))


def instance_decl(model: ModelInstance) -> InstanceDecl:
    objects = []
    for key in model.sorted_keys():
        node = model[key]
        schema = model.metamodel[node.class_name]
        fields = [FieldDecl(f, node.flags[f]) for f in schema.flags]
        for rel in schema.relationships:
            val = node.refs[rel.name]
            if isinstance(val, (list, tuple)):
                fields.append(FieldDecl(rel.name, tuple(_ref(k) for k in val)))
            else:
                fields.append(FieldDecl(rel.name, None if val is None else _ref(val)))
        objects.append(ObjDecl(node.class_name, node.id, tuple(fields)))
    name = re.sub(r"\W+", "_", model.name).strip("_") or "instance"
    if name[0].isdigit():
        name = "i_" + name
    return InstanceDecl(name, model.metamodel.name, tuple(objects))


def _map_decl(m: MapExpr) -> MapDecl:
    return MapDecl(
        tuple(m.assignments),
        tuple(EmitDecl(str(e.placement), e.rel, _map_decl(e.map)) for e in m.emits),
    )


def _ladder_expr(ladder: Ladder) -> LadderExpr:
    match ladder:
        case Join(l, r):
            return JoinExpr(_ladder_expr(l), _ladder_expr(r))
        case Step(_, child, path, rel, rest):
            return StepExpr(child.name, path, rel, _ladder_expr(rest))
        case Base(_, child, path, rel):
            return BaseExpr(child.name, path, rel)
    raise TypeError(f"not a ladder: {ladder!r}")


def transform_decl(ot: OrderedTransformation) -> TransformDecl:
    rungs: list[RungDecl] = []
    for r in ot.rungs():
        if any(d.name == r.name for d in rungs):
            continue
        rungs.append(RungDecl(r.name, r.src_class, r.tgt_class, r.pre, r.post, _map_decl(r.map)))
    ladder = _ladder_expr(ot.body) if ot.body is not None else None
    return TransformDecl(ot.name, ot.src_mm.name, ot.tgt_mm.name, tuple(rungs),
                         ot.root_rung.name, (), ladder)


def document_of(
    metamodels: Iterable[Metamodel] = (),
    instances: Iterable[ModelInstance] = (),
    transforms: Iterable[OrderedTransformation] = (),
) -> Document:
    return Document(
        tuple(metamodel_decl(m) for m in metamodels),
        tuple(instance_decl(i) for i in instances),
        tuple(transform_decl(t) for t in transforms),
    )


def format_instance(model: ModelInstance) -> str:
    return print_document(Document(instances=(instance_decl(model),)))


# -- elaboration -----------------------------------------------------------------------


@dataclass
class Loaded:
    metamodels: dict[str, Metamodel] = field(default_factory=dict)
    instances: dict[str, ModelInstance] = field(default_factory=dict)
    transforms: dict[str, OrderedTransformation] = field(default_factory=dict)
    warnings: list[Diagnostic] = field(default_factory=list)


class _Elaborator:
    def __init__(self) -> None:
        self.out = Loaded()
        self.diags: list[Diagnostic] = []
        self.file: str | None = None

    def diag(self, pos: tuple[int, int], message: str) -> None:
        self.diags.append(Diagnostic(pos[0], pos[1], message, self.file))

    def metamodel(self, d: MetamodelDecl) -> None:
        if d.name in self.out.metamodels:
            self.diag(d.pos, f"metamodel {d.name} declared twice")
            return
        declared = {c.name for c in d.classes}
        before = len(self.diags)
        classes = []
        for c in d.classes:
            flags = tuple(m.name for m in c.members if isinstance(m, FlagDecl))
            rels = []
            for m in c.members:
                if isinstance(m, RelDecl):
                    if m.target not in declared:
                        self.diag(m.pos, f"relationship {m.name} targets undeclared class {m.target}")
                    rels.append(RelationshipDecl(m.name, m.target, Multiplicity(m.multiplicity)))
            classes.append(ClassSchema(c.name, flags, tuple(rels)))
        mm = Metamodel(d.name, tuple(classes), d.root)
        if len(self.diags) > before:
            return
        report = validate_metamodel(mm)
        for v in report.violations:
            self.diag(d.pos, f"metamodel {d.name}: {v}")
        for w in report.warnings:
            self.out.warnings.append(Diagnostic(d.pos[0], d.pos[1], f"metamodel {d.name}: {w}", self.file))
        if report.ok:
            self.out.metamodels[d.name] = mm

    def instance(self, d: InstanceDecl) -> None:
        if d.name in self.out.instances:
            self.diag(d.pos, f"instance {d.name} declared twice")
            return
        mm = self.out.metamodels.get(d.metamodel)
        if mm is None:
            self.diag(d.pos, f"unknown metamodel {d.metamodel}")
            return
        model = ModelInstance(mm, d.name)
        decls = {(o.class_name, o.id): o for o in d.objects}
        state: dict[tuple[str, int], int] = {}
        ok = True

        def refs_of(o: ObjDecl) -> list[ObjRef]:
            out: list[ObjRef] = []
            for f in o.fields:
                if isinstance(f.value, ObjRef):
                    out.append(f.value)
                elif isinstance(f.value, tuple):
                    out.extend(f.value)
            return out

        def build(o: ObjDecl) -> bool:
            k = (o.class_name, o.id)
            if state.get(k) == 2:
                return True
            if state.get(k) == 1:
                self.diag(o.pos, f"containment cycle through {object_key(*k)}")
                return False
            state[k] = 1
            for r in refs_of(o):
                target = decls.get((r.class_name, r.id))
                if target is None:
                    self.diag(r.pos, f"reference to undeclared object {r}")
                    return False
                if not build(target):
                    return False
            flags, refs = {}, {}
            schema = mm.get(o.class_name)
            if schema is None:
                self.diag(o.pos, f"unknown class {o.class_name} in metamodel {mm.name}")
                return False
            for f in o.fields:
                if schema.has_flag(f.name):
                    if not isinstance(f.value, bool):
                        self.diag(f.pos, f"flag {f.name} needs true or false")
                        return False
                    flags[f.name] = f.value
                elif schema.relationship(f.name) is not None:
                    v = f.value
                    if isinstance(v, bool):
                        self.diag(f.pos, f"relationship {f.name} needs object references")
                        return False
                    refs[f.name] = (
                        [str(r) for r in v] if isinstance(v, tuple)
                        else None if v is None else str(v)
                    )
                else:
                    self.diag(f.pos, f"{o.class_name} has no attribute {f.name}")
                    return False
            try:
                model.build_object(o.class_name, o.id, flags, refs)
            except InstanceError as exc:
                self.diag(o.pos, str(exc))
                return False
            state[k] = 2
            return True

        for o in d.objects:
            if not build(o):
                ok = False
                break
        if not ok:
            return
        try:
            model.freeze()
        except InstanceError as exc:
            self.diag(d.pos, f"instance {d.name}: {exc}")
            return
        for w in model.warnings:
            self.out.warnings.append(Diagnostic(d.pos[0], d.pos[1], f"instance {d.name}: {w}", self.file))
        self.out.instances[d.name] = model

    def map_expr(self, m: MapDecl, target_class: str, tgt_mm: Metamodel) -> MapExpr:
        emits = []
        schema = tgt_mm.get(target_class)
        for e in m.emits:
            rel = schema.relationship(e.rel) if schema else None
            if rel is None:
                self.diag(e.pos, f"emit into undeclared relationship {target_class}.{e.rel}")
                continue
            emits.append(EmitClause(e.rel, self.map_expr(e.map, rel.target_class, tgt_mm),
                                    Placement(e.placement)))
        return MapExpr(target_class, m.assignments, tuple(emits))

    def transform(self, d: TransformDecl) -> None:
        if d.name in self.out.transforms:
            self.diag(d.pos, f"transformation {d.name} declared twice")
            return
        src_mm = self.out.metamodels.get(d.src_mm)
        tgt_mm = self.out.metamodels.get(d.tgt_mm)
        for name, mm in ((d.src_mm, src_mm), (d.tgt_mm, tgt_mm)):
            if mm is None:
                self.diag(d.pos, f"unknown metamodel {name}")
        if src_mm is None or tgt_mm is None:
            return
        before = len(self.diags)
        rungs: dict[str, Rung] = {}
        for r in d.rungs:
            if r.name in rungs:
                self.diag(r.pos, f"rung {r.name} declared twice")
                continue
            if r.tgt_class not in tgt_mm:
                self.diag(r.pos, f"rung {r.name}: target class {r.tgt_class} not in {tgt_mm.name}")
                continue
            rung = Rung(r.name, r.src_class, r.tgt_class, r.pre, r.post,
                        self.map_expr(r.map, r.tgt_class, tgt_mm))
            from .contracts import validate_rung

            for problem in validate_rung(rung, src_mm, tgt_mm):
                self.diag(r.pos, problem)
            rungs[r.name] = rung
        if d.root is None:
            self.diag(d.pos, f"transformation {d.name} has no root rung")
            return
        if d.root not in rungs:
            self.diag(d.pos, f"unknown root rung {d.root}")
            return
        if len(self.diags) > before:
            return

        lets: dict[str, LetDecl] = {}
        for let in d.lets:
            if let.name in lets:
                self.diag(let.pos, f"ladder {let.name} defined twice")
            lets[let.name] = let

        def ladder(expr: LadderExpr, parent: Rung, active: tuple[str, ...]) -> Ladder:
            match expr:
                case LadderRef(name, pos):
                    if name not in lets or name in active:
                        raise _Bad(pos, f"unknown ladder {name}" if name not in lets
                                   else f"ladder {name} refers to itself")
                    return ladder(lets[name].ladder, parent, active + (name,))
                case JoinExpr(l, r, pos):
                    left = ladder(l, parent, active)
                    right = ladder(r, parent, active)
                    try:
                        return join(left, right)
                    except LadderError as exc:
                        raise _Bad(pos, str(exc)) from None
                case BaseExpr(rname, path, rel, pos) | StepExpr(rname, path, rel, _, pos):
                    child = rungs.get(rname)
                    if child is None:
                        raise _Bad(pos, f"unknown rung {rname}")
                    try:
                        if isinstance(expr, BaseExpr):
                            return base(parent, child, path, rel, src_mm=src_mm, tgt_mm=tgt_mm)
                        rest = ladder(expr.rest, child, active)
                        return step(parent, child, path, rel, rest, src_mm=src_mm, tgt_mm=tgt_mm)
                    except LadderError as exc:
                        raise _Bad(pos, str(exc)) from None
            raise _Bad(d.pos, "malformed ladder")

        root = rungs[d.root]
        body = None
        if d.ladder is not None:
            try:
                body = ladder(d.ladder, root, ())
            except _Bad as bad:
                self.diag(bad.pos, bad.message)
                return
        ot = OrderedTransformation(d.name, src_mm, tgt_mm, root, body)
        report = well_formed(ot)
        for v in report.violations:
            self.diag(d.pos, f"transformation {d.name}: {v}")
        if report.ok:
            self.out.transforms[d.name] = ot


class _Bad(Exception):
    def __init__(self, pos: tuple[int, int], message: str):
        super().__init__(message)
        self.pos = pos
        self.message = message


def elaborate(*documents: Document) -> Loaded:
    """Check and build semantic objects from parsed documents, in dependency order."""
    el = _Elaborator()
    for doc in documents:
        el.file = doc.file
        for mm in doc.metamodels:
            el.metamodel(mm)
    for doc in documents:
        el.file = doc.file
        for inst in doc.instances:
            el.instance(inst)
    for doc in documents:
        el.file = doc.file
        for tx in doc.transforms:
            el.transform(tx)
    if el.diags:
        raise DslError(el.diags)
    return el.out


def load(*sources: str | tuple[str, str]) -> Loaded:
    """Parse and elaborate texts; a source is raw text or ``(filename, text)``."""
    docs = []
    diags: list[Diagnostic] = []
    for s in sources:
        file, text = (s if isinstance(s, tuple) else (None, s))
        try:
            docs.append(parse(text, file))
        except DslError as exc:
            diags += exc.diagnostics
    if diags:
        raise DslError(diags)
    return elaborate(*docs)


def dumps(
    metamodels: Iterable[Metamodel] = (),
    instances: Iterable[ModelInstance] = (),
    transforms: Iterable[OrderedTransformation] = (),
) -> str:
    return print_document(document_of(metamodels, instances, transforms))
