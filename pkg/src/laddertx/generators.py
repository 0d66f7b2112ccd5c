"""Random metamodels, instances, transformations and documents.

Used by the property tests and by ``laddertx check --seed``.  Every
generator takes a ``random.Random`` so runs are reproducible from a seed.

Generated source ids are even.  A map that assigns ``succ(src.id)`` thus
always lands on an unused id, which keeps injected faults from colliding
with real objects.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from . import contracts as K
from . import dsl
from .certificate import KINDS as CERT_KINDS, LEAF_KINDS, CertNode, Certificate
from .contracts import EmitClause, Expr, MapExpr, Placement, Rung
from .instance import ModelInstance, object_key
from .ladder import Base, Join, Ladder, OrderedTransformation, Step, base, join, join_all, step
from .metamodel import ClassSchema, Metamodel, Multiplicity, RelationshipDecl

ONE, MANY = Multiplicity.ONE, Multiplicity.MANY


@dataclass
class _ClassNode:
    n: int
    flags: tuple[str, ...]
    rel: str | None = None  # relationship from the parent
    multiplicity: Multiplicity = MANY
    children: list[_ClassNode] = field(default_factory=list)
    mapped: bool = True
    emits: tuple[Placement, ...] = ()

    @property
    def src_class(self) -> str:
        return f"S{self.n}"

    @property
    def tgt_class(self) -> str:
        return f"T{self.n}"

    @property
    def emit_class(self) -> str:
        return f"E{self.n}"

    @property
    def emit_rel(self) -> str:
        return f"e{self.n}"

    @property
    def rung_name(self) -> str:
        return f"s{self.n}_to_t{self.n}"


@dataclass
class Case:
    """A generated transformation together with a valid source for it."""

    ot: OrderedTransformation
    src: ModelInstance


def _class_tree(rng: random.Random, max_depth: int, max_branches: int) -> _ClassNode:
    counter = iter(range(1_000))

    def grow(depth: int) -> _ClassNode:
        n = next(counter)
        flags = tuple(f"f{i}" for i in range(rng.randint(0, 2)))
        node = _ClassNode(n, flags)
        if depth < max_depth:
            for k in range(rng.randint(0 if depth > 1 else 1, max_branches)):
                child = grow(depth + 1)
                child.rel = f"r{k}"
                child.multiplicity = rng.choice((ONE, MANY, MANY))
                node.children.append(child)
        return node

    return grow(1)


def _walk(node: _ClassNode):
    yield node
    for c in node.children:
        yield from _walk(c)


def _metamodels(root: _ClassNode) -> tuple[Metamodel, Metamodel]:
    src_classes, tgt_classes = [], []
    for node in _walk(root):
        src_classes.append(ClassSchema(
            node.src_class, node.flags,
            tuple(RelationshipDecl(c.rel, c.src_class, c.multiplicity) for c in node.children),
        ))
        rels = [RelationshipDecl(c.rel, c.tgt_class, c.multiplicity) for c in node.children]
        if node.emits:
            rels.append(RelationshipDecl(node.emit_rel, node.emit_class, MANY))
            tgt_classes.append(ClassSchema(node.emit_class))
        tgt_classes.append(ClassSchema(node.tgt_class, node.flags, tuple(rels)))
    return (
        Metamodel("Src", tuple(src_classes), root.src_class),
        Metamodel("Tgt", tuple(tgt_classes), root.tgt_class),
    )


def _rung(rng: random.Random, node: _ClassNode, guard_prob: float) -> Rung:
    pre: Expr = K.TRUE
    if node.flags and rng.random() < guard_prob:
        flag = K.src(rng.choice(node.flags))
        pre = flag if rng.random() < 0.5 else K.Not(flag)
    post = K.conj(K.Eq(K.src("id"), K.tgt("id")),
                  *(K.Eq(K.tgt(f), K.src(f)) for f in node.flags))
    emits = []
    for placement in node.emits:
        ident = K.src("id") if placement is Placement.FIRST else K.Succ(K.src("id"))
        emits.append(EmitClause(node.emit_rel, MapExpr(node.emit_class, (("id", ident),)),
                                placement))
    assigns = (("id", K.src("id")),) + tuple((f, K.src(f)) for f in node.flags)
    return Rung(node.rung_name, node.src_class, node.tgt_class, pre, post,
                MapExpr(node.tgt_class, assigns, tuple(emits)))


def _source(rng: random.Random, root: _ClassNode, mm: Metamodel, max_objects: int) -> ModelInstance:
    model = ModelInstance(mm, "src")
    pools = {node.src_class: rng.sample(range(2, 200, 2), max_objects) for node in _walk(root)}

    def make(node: _ClassNode) -> str | None:
        pool = pools[node.src_class]
        if not pool:
            return None
        ident = pool.pop()
        refs: dict[str, object] = {}
        for c in node.children:
            if c.multiplicity is ONE:
                refs[c.rel] = make(c) if rng.random() < 0.85 else None
            else:
                kids = [make(c) for _ in range(rng.randint(0, 3))]
                refs[c.rel] = [k for k in kids if k is not None]
        flags = {f: rng.random() < 0.5 for f in node.flags}
        return model.build_object(node.src_class, ident, flags, refs)

    return model.freeze(root=make(root))


def _ladder(node: _ClassNode, rungs: dict[int, Rung], mms: tuple[Metamodel, Metamodel]) -> Ladder | None:
    src_mm, tgt_mm = mms
    parts: list[Ladder] = []
    for c in node.children:
        if not c.mapped:
            continue
        rest = _ladder(c, rungs, mms)
        parent, child = rungs[node.n], rungs[c.n]
        if rest is None:
            parts.append(base(parent, child, c.rel, c.rel, src_mm=src_mm, tgt_mm=tgt_mm))
        else:
            parts.append(step(parent, child, c.rel, c.rel, rest, src_mm=src_mm, tgt_mm=tgt_mm))
    return join_all(parts) if parts else None


def random_case(
    rng: random.Random,
    *,
    max_depth: int = 4,
    max_branches: int = 3,
    max_objects: int = 5,
    guard_prob: float = 0.2,
    emit_prob: float = 0.25,
    omit_prob: float = 0.1,
) -> Case:
    """A mirrored source/target pair of metamodels with copy-id rungs.

    Flags are copied and checked by each post; some rungs are guarded by a
    flag, some emit extra objects and some subtrees are left unmapped.
    """
    root = _class_tree(rng, max_depth, max_branches)
    for node in _walk(root):
        if node is not root and rng.random() < omit_prob:
            node.mapped = False
        r = rng.random()
        if r < emit_prob:
            node.emits = rng.choice(((Placement.FIRST,), (Placement.LAST,),
                                     (Placement.FIRST, Placement.LAST)))
    mms = _metamodels(root)
    rungs = {node.n: _rung(rng, node, guard_prob if node is not root else 0.0)
             for node in _walk(root)}
    body = _ladder(root, rungs, mms)
    ot = OrderedTransformation("generated", mms[0], mms[1], rungs[root.n], body)
    return Case(ot, _source(rng, root, mms[0], max_objects))


# -- rewriting rungs ------------------------------------------------------------------


def replace_rungs(ot: OrderedTransformation, changed: dict[str, Rung]) -> OrderedTransformation:
    """Rebuild ``ot`` with some rungs swapped out by name; indices follow along."""

    def pick(r: Rung) -> Rung:
        return changed.get(r.name, r)

    def rebuild(ladder: Ladder, parent: Rung) -> Ladder:
        if isinstance(ladder, Join):
            return join(rebuild(ladder.left, parent), rebuild(ladder.right, parent))
        child = pick(ladder.child)
        kw = dict(src_mm=ot.src_mm, tgt_mm=ot.tgt_mm)
        if isinstance(ladder, Step):
            return step(parent, child, ladder.src_path, ladder.tgt_rel,
                        rebuild(ladder.rest, child), **kw)
        return base(parent, child, ladder.src_path, ladder.tgt_rel, **kw)

    root = pick(ot.root_rung)
    body = rebuild(ot.body, root) if ot.body is not None else None
    return OrderedTransformation(ot.name, ot.src_mm, ot.tgt_mm, root, body)


def with_succ_id(rung: Rung) -> Rung:
    """The same rung, but its map builds ``id <- succ(src.id)``."""
    assigns = tuple(
        (a, K.Succ(K.src("id")) if a == "id" else e) for a, e in rung.map.assignments
    )
    m = MapExpr(rung.map.target_class, assigns, rung.map.emits)
    return Rung(rung.name, rung.src_class, rung.tgt_class, rung.pre, rung.post, m)


def with_pre(rung: Rung, pre: Expr) -> Rung:
    return Rung(rung.name, rung.src_class, rung.tgt_class, pre, rung.post, rung.map)


def ladder_edges(ladder: Ladder | None) -> list[Base | Step]:
    """Every Base/Step edge in the ladder, outermost first."""
    out: list[Base | Step] = []

    def go(node: Ladder | None) -> None:
        if node is None:
            return
        if isinstance(node, Join):
            go(node.left)
            go(node.right)
            return
        out.append(node)
        if isinstance(node, Step):
            go(node.rest)

    go(ladder)
    return out


def applied_rungs(ot: OrderedTransformation, src: ModelInstance) -> list[str]:
    """Names of the non-root rungs whose pre holds on at least one reached object."""
    from .engine import execute

    record = execute(ot, src).record
    by_child = {}
    for edge in ladder_edges(ot.body):
        by_child.setdefault(edge.child.src_class, edge.child.name)
    names = {by_child[src[xc].class_name] for (_, _, xc) in record}
    return sorted(names)


# -- target mutations ---------------------------------------------------------------

MUTATIONS = ("id", "flag", "delete", "swap", "extra")


def _rebuild(mm: Metamodel, objs: dict[str, tuple[str, int, dict, dict]], root: str,
             name: str) -> ModelInstance:
    model = ModelInstance(mm, name)
    done: set[str] = set()

    def build(key: str) -> None:
        if key in done:
            return
        cls, ident, flags, refs = objs[key]
        for val in refs.values():
            for k in (val if isinstance(val, list) else [val] if val else []):
                build(k)
        model.build_object(cls, ident, flags, refs)
        done.add(key)

    for key in sorted(objs):
        build(key)
    return model.freeze(root=root)


def _subtree(objs: dict, key: str) -> set[str]:
    out = {key}
    for val in objs[key][3].values():
        for k in (val if isinstance(val, list) else [val] if val else []):
            out |= _subtree(objs, k)
    return out


def mutate_target(
    rng: random.Random, ot: OrderedTransformation, tgt: ModelInstance, kind: str | None = None
) -> tuple[ModelInstance, str]:
    """Apply one fault that verification must reject; returns (instance, description).

    Faults only touch places the proposition constrains: object values,
    list order, and the lists that serve as S for some ladder edge.
    """
    objs = {
        k: (n.class_name, n.id, dict(n.flags),
            {r: list(v) if isinstance(v, tuple) else v for r, v in n.refs.items()})
        for k, n in tgt.objects.items()
    }
    root = tgt.root
    s_rels = {(e.index.tgt_class, e.tgt_rel) for e in ladder_edges(ot.body)}

    def fresh_id(cls: str) -> int:
        return max([o[1] for o in objs.values() if o[0] == cls] + [0]) + 1

    options = []
    for k, (cls, ident, flags, refs) in objs.items():
        options.append(("id", k))
        if flags:
            options.append(("flag", k))
        if k != root:
            options.append(("delete", k))
        for rel, val in refs.items():
            if isinstance(val, list) and len(val) >= 2:
                options.append(("swap", (k, rel)))
            if (cls, rel) in s_rels and (isinstance(val, list) or val is None):
                options.append(("extra", (k, rel)))
    if kind is not None:
        options = [o for o in options if o[0] == kind] or options
    what, where = rng.choice(options)

    if what == "id":
        cls = objs[where][0]
        ident = fresh_id(cls)
        _, _, flags, refs = objs.pop(where)
        new = object_key(cls, ident)
        objs[new] = (cls, ident, flags, refs)
        for o in objs.values():
            for rel, val in o[3].items():
                if isinstance(val, list):
                    o[3][rel] = [new if x == where else x for x in val]
                elif val == where:
                    o[3][rel] = new
        if root == where:
            root = new
        desc = f"renumbered {where} to {new}"
    elif what == "flag":
        flag = rng.choice(sorted(objs[where][2]))
        objs[where][2][flag] = not objs[where][2][flag]
        desc = f"flipped {where}.{flag}"
    elif what == "delete":
        gone = _subtree(objs, where)
        for k in gone:
            del objs[k]
        for o in objs.values():
            for rel, val in o[3].items():
                if isinstance(val, list):
                    o[3][rel] = [x for x in val if x not in gone]
                elif val in gone:
                    o[3][rel] = None
        desc = f"deleted {where}"
    elif what == "swap":
        k, rel = where
        lst = objs[k][3][rel]
        i = rng.randrange(len(lst) - 1)
        lst[i], lst[i + 1] = lst[i + 1], lst[i]
        desc = f"swapped {k}.{rel}[{i}] and [{i + 1}]"
    else:
        k, rel = where
        target_cls = tgt.metamodel[objs[k][0]].relationship(rel).target_class
        schema = tgt.metamodel[target_cls]
        ident = fresh_id(target_cls)
        new = object_key(target_cls, ident)
        objs[new] = (target_cls, ident, {f: rng.random() < 0.5 for f in schema.flags},
                     {r.name: [] if r.multiplicity is MANY else None for r in schema.relationships})
        val = objs[k][3][rel]
        if isinstance(val, list):
            val.insert(rng.randint(0, len(val)), new)
        else:
            objs[k][3][rel] = new
        desc = f"added {new} under {k}.{rel}"
    return _rebuild(tgt.metamodel, objs, root, tgt.name), desc


def join_pair(rng: random.Random, ot: OrderedTransformation) -> tuple[Ladder, Ladder]:
    """Two ladders over the root index built from random subsets of its branches."""
    tops: list[Ladder] = []

    def split(node: Ladder) -> None:
        if isinstance(node, Join):
            split(node.left)
            split(node.right)
        else:
            tops.append(node)

    split(ot.body)

    def pick() -> Ladder:
        chosen = [t for t in tops if rng.random() < 0.6] or [rng.choice(tops)]
        rng.shuffle(chosen)
        return join_all(chosen)

    return pick(), pick()


# -- certificate tampering ------------------------------------------------------------


def _perturb(rng: random.Random, value):
    """A JSON value of the same shape that differs from ``value``."""
    if isinstance(value, bool):
        return not value
    if isinstance(value, int):
        return value + rng.randint(1, 3)
    if isinstance(value, str):
        return value + rng.choice(("'", "#0", "x"))
    if value is None:
        return rng.choice(("Nope#0", 0, True))
    if isinstance(value, list):
        if value and rng.random() < 0.5:
            i = rng.randrange(len(value))
            return value[:i] + [_perturb(rng, value[i])] + value[i + 1:]
        return value[:-1] if value else [0]
    if isinstance(value, dict):
        if value and rng.random() < 0.7:
            k = rng.choice(sorted(value))
            return {**value, k: _perturb(rng, value[k])}
        return {**value, "extra": True}
    raise TypeError(f"unexpected JSON value {value!r}")


def tamper_certificate(rng: random.Random, cert: Certificate) -> tuple[Certificate, str]:
    """Change exactly one field of one node (or of the header).

    The result still deserializes: kinds stay within the schema and leaves
    stay leaves.
    """
    nodes = list(cert.root.iter_nodes())
    if rng.random() < 0.1:
        name = rng.choice(("transform", "source_root", "target_root"))
        new = replace(cert, **{name: _perturb(rng, getattr(cert, name))
                               if getattr(cert, name) is not None else "Nope#0"})
        return new, f"header {name}"
    path, node = rng.choice(nodes)
    fields = ["kind", "rung", "src_key", "tgt_key"] + [f"evidence.{k}" for k in sorted(node.evidence)]
    name = rng.choice(fields)
    if name == "kind":
        pool = [k for k in CERT_KINDS if k != node.kind and (not node.children or k not in LEAF_KINDS)]
        changed = replace(node, kind=rng.choice(pool))
    elif name.startswith("evidence."):
        k = name.split(".", 1)[1]
        changed = replace(node, evidence={**node.evidence, k: _perturb(rng, node.evidence[k])})
    else:
        old = getattr(node, name)
        changed = replace(node, **{name: _perturb(rng, old) if old is not None else "Nope#0"})

    def rebuild(n: CertNode, at: tuple[int, ...]) -> CertNode:
        if at == path:
            return changed
        if path[:len(at)] != at:
            return n
        return replace(n, children=tuple(rebuild(c, at + (i,)) for i, c in enumerate(n.children)))

    return replace(cert, root=rebuild(cert.root, ())), f"{name} at {path}"


# -- random documents -----------------------------------------------------------------

# Names that double as keywords elsewhere, to exercise contextual keywords.
_NAMES = ("a", "b", "node", "Item", "root", "class", "flag", "rel", "map", "emit",
          "first", "via", "join", "step", "pre", "post", "rung", "let", "one", "many")


def random_expr(rng: random.Random, depth: int = 3) -> Expr:
    if depth <= 0 or rng.random() < 0.3:
        r = rng.random()
        if r < 0.2:
            return K.BoolConst(rng.random() < 0.5)
        if r < 0.4:
            return K.NatConst(rng.randint(0, 99))
        return K.Attr(rng.choice(("src", "tgt")), rng.choice(("id",) + _NAMES))
    ctor = rng.choice((K.Succ, K.Not, K.Eq, K.And, K.Or, K.Implies))
    if ctor in (K.Succ, K.Not):
        return ctor(random_expr(rng, depth - 1))
    return ctor(random_expr(rng, depth - 1), random_expr(rng, depth - 1))


def _random_map(rng: random.Random, depth: int) -> dsl.MapDecl:
    assigns = tuple((rng.choice(("id",) + _NAMES), random_expr(rng, 2))
                    for _ in range(rng.randint(0, 3)))
    emits = ()
    if depth > 0:
        emits = tuple(dsl.EmitDecl(rng.choice(("first", "last")), rng.choice(_NAMES),
                                   _random_map(rng, depth - 1))
                      for _ in range(rng.randint(0, 2)))
    return dsl.MapDecl(assigns, emits)


def _random_ladder(rng: random.Random, depth: int, lets: list[str]) -> dsl.LadderExpr:
    r = rng.random()
    if lets and r < 0.15:
        return dsl.LadderRef(rng.choice(lets))
    path = tuple(rng.choice(_NAMES) for _ in range(rng.randint(1, 3)))
    if depth <= 0 or r < 0.4:
        return dsl.BaseExpr(rng.choice(_NAMES), path, rng.choice(_NAMES))
    if r < 0.7:
        return dsl.StepExpr(rng.choice(_NAMES), path, rng.choice(_NAMES),
                            _random_ladder(rng, depth - 1, lets))
    return dsl.JoinExpr(_random_ladder(rng, depth - 1, lets), _random_ladder(rng, depth - 1, lets))


def random_document(rng: random.Random) -> dsl.Document:
    """A syntactically valid document; names and types need not resolve."""
    mms = []
    for _ in range(rng.randint(0, 2)):
        classes = []
        for _ in range(rng.randint(0, 3)):
            members = []
            for _ in range(rng.randint(0, 3)):
                if rng.random() < 0.4:
                    members.append(dsl.FlagDecl(rng.choice(_NAMES)))
                else:
                    members.append(dsl.RelDecl(rng.choice(_NAMES), rng.choice(_NAMES),
                                               rng.choice(("one", "many"))))
            classes.append(dsl.ClassDecl(rng.choice(_NAMES), tuple(members)))
        mms.append(dsl.MetamodelDecl(rng.choice(_NAMES), rng.choice(_NAMES), tuple(classes)))
    insts = []
    for _ in range(rng.randint(0, 2)):
        objs = {}
        for _ in range(rng.randint(0, 4)):
            fields = []
            for _ in range(rng.randint(0, 3)):
                r = rng.random()
                if r < 0.3:
                    value: dsl.FieldValue = rng.random() < 0.5
                elif r < 0.4:
                    value = None
                elif r < 0.6:
                    value = dsl.ObjRef(rng.choice(_NAMES), rng.randint(0, 50))
                else:
                    value = tuple(dsl.ObjRef(rng.choice(_NAMES), rng.randint(0, 50))
                                  for _ in range(rng.randint(0, 3)))
                fields.append(dsl.FieldDecl(rng.choice(_NAMES), value))
            key = (rng.choice(_NAMES), rng.randint(0, 50))
            objs[key] = dsl.ObjDecl(key[0], key[1], tuple(fields))
        ordered = tuple(objs[k] for k in sorted(objs))
        insts.append(dsl.InstanceDecl(rng.choice(_NAMES), rng.choice(_NAMES), ordered))
    txs = []
    for _ in range(rng.randint(0, 2)):
        rungs = tuple(
            dsl.RungDecl(rng.choice(_NAMES), rng.choice(_NAMES), rng.choice(_NAMES),
                         random_expr(rng), random_expr(rng), _random_map(rng, 2))
            for _ in range(rng.randint(0, 3))
        )
        lets: list[dsl.LetDecl] = []
        for i in range(rng.randint(0, 2)):
            lets.append(dsl.LetDecl(f"t{i}", _random_ladder(rng, 3, [l.name for l in lets])))
        ladder = _random_ladder(rng, 3, [l.name for l in lets]) if rng.random() < 0.8 else None
        root = rng.choice(_NAMES) if rng.random() < 0.9 else None
        txs.append(dsl.TransformDecl(rng.choice(_NAMES), rng.choice(_NAMES), rng.choice(_NAMES),
                                     rungs, root, tuple(lets), ladder))
    return dsl.Document(tuple(mms), tuple(insts), tuple(txs))
