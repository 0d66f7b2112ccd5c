"""The UML class model to SQL schema example, as ready-built fixtures.

Models map to schemas, classes to tables (plus a key column emitted first),
attributes to non-key columns.  Every precondition is ``true``.  "Same name"
is modelled as "same id", since the models carry no strings.

Where a source listing repeats the labels ``c1``/``t1`` for the second class
and table, they are read as ``c2``/``t2`` (ids 3), the only reading that
gives 3 classes and 4 attributes.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .certificate import Certificate, deserialize
from .contracts import (
    TRUE,
    BoolConst,
    EmitClause,
    Eq,
    MapExpr,
    Placement,
    Rung,
    conj,
    src,
    tgt,
)
from .instance import ModelInstance
from .ladder import OrderedTransformation, base, step
from .metamodel import ClassSchema, Metamodel, Multiplicity, RelationshipDecl

MANY = Multiplicity.MANY


def uml_metamodel() -> Metamodel:
    return Metamodel(
        "UML",
        (
            ClassSchema("Model", relationships=(RelationshipDecl("classes", "Class", MANY),)),
            ClassSchema("Class", relationships=(RelationshipDecl("attrs", "Attribute", MANY),)),
            ClassSchema("Attribute"),
        ),
        root_class="Model",
    )


def sql_metamodel() -> Metamodel:
    return Metamodel(
        "SQL",
        (
            ClassSchema("Schema", relationships=(RelationshipDecl("tables", "Table", MANY),)),
            ClassSchema("Table", relationships=(RelationshipDecl("columns", "Column", MANY),)),
            ClassSchema("Column", flags=("isKey",)),
        ),
        root_class="Schema",
    )


def _same_id() -> Eq:
    return Eq(src("id"), tgt("id"))


def rungs() -> tuple[Rung, Rung, Rung]:
    model2schema = Rung(
        "model2schema", "Model", "Schema", TRUE, _same_id(),
        MapExpr("Schema", (("id", src("id")),)),
    )
    key_column = MapExpr("Column", (("id", src("id")), ("isKey", BoolConst(True))))
    class2table = Rung(
        "class2table", "Class", "Table", TRUE, _same_id(),
        MapExpr("Table", (("id", src("id")),),
                (EmitClause("columns", key_column, Placement.FIRST),)),
    )
    attr2column = Rung(
        "attr2column", "Attribute", "Column", TRUE,
        conj(_same_id(), Eq(tgt("isKey"), BoolConst(False))),
        MapExpr("Column", (("id", src("id")), ("isKey", BoolConst(False)))),
    )
    return model2schema, class2table, attr2column


def transformation() -> OrderedTransformation:
    uml, sql = uml_metamodel(), sql_metamodel()
    model2schema, class2table, attr2column = rungs()
    t_ca = base(class2table, attr2column, "attrs", "columns", src_mm=uml, tgt_mm=sql)
    t_mc = step(model2schema, class2table, "classes", "tables", t_ca, src_mm=uml, tgt_mm=sql)
    return OrderedTransformation("uml2sql", uml, sql, model2schema, t_mc)


def m1() -> ModelInstance:
    m = ModelInstance(uml_metamodel(), "m1")
    a = [m.build_object("Attribute", i) for i in (5, 6, 7, 8)]
    c2 = m.build_object("Class", 2, refs={"attrs": a[:3]})
    c3 = m.build_object("Class", 3, refs={"attrs": a[3:]})
    c4 = m.build_object("Class", 4, refs={"attrs": []})
    m.build_object("Model", 1, refs={"classes": [c2, c3, c4]})
    return m.freeze()


def s1() -> ModelInstance:
    s = ModelInstance(sql_metamodel(), "s1")

    def col(i: int, key: bool) -> str:
        return s.build_object("Column", i, {"isKey": key})

    t2 = s.build_object("Table", 2, refs={
        "columns": [col(2, True), col(5, False), col(6, False), col(7, False)]})
    t3 = s.build_object("Table", 3, refs={"columns": [col(3, True), col(8, False)]})
    t4 = s.build_object("Table", 4, refs={"columns": [col(4, True)]})
    s.build_object("Schema", 1, refs={"tables": [t2, t3, t4]})
    return s.freeze()


def source_text(name: str) -> str:
    """Text of a shipped fixture file (``uml2sql.mt``, ``m1.mt``, ``s1.mt`` ...)."""
    return resources.files("laddertx.data").joinpath(name).read_text(encoding="utf-8")


def golden_certificate() -> Certificate:
    data = resources.files("laddertx.data").joinpath("uml2sql.cert.json").read_bytes()
    return deserialize(data)


@dataclass(frozen=True)
class ExampleBundle:
    uml: Metamodel
    sql: Metamodel
    m1: ModelInstance
    transformation: OrderedTransformation
    s1: ModelInstance
    certificate: Certificate | None


def bundle(with_certificate: bool = True) -> ExampleBundle:
    return ExampleBundle(
        uml=uml_metamodel(),
        sql=sql_metamodel(),
        m1=m1(),
        transformation=transformation(),
        s1=s1(),
        certificate=golden_certificate() if with_certificate else None,
    )
