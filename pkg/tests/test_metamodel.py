from __future__ import annotations

import pytest

from laddertx.metamodel import (
    ClassSchema,
    Metamodel,
    MetamodelError,
    Multiplicity,
    RelationshipDecl,
    containment_order,
    reachable_classes,
    require_valid,
    resolve_path,
    validate_metamodel,
)
from laddertx.uml2sql import sql_metamodel, uml_metamodel

MANY, ONE = Multiplicity.MANY, Multiplicity.ONE


def mm(*classes: ClassSchema, root: str = "A") -> Metamodel:
    return Metamodel("M", tuple(classes), root)


def rel(name: str, target: str, mult: Multiplicity = MANY) -> RelationshipDecl:
    return RelationshipDecl(name, target, mult)


def test_uml_and_sql_are_valid():
    for m in (uml_metamodel(), sql_metamodel()):
        report = validate_metamodel(m)
        assert report.ok and not report.warnings


def test_containment_order_of_uml():
    assert containment_order(uml_metamodel()) == [("Model", "Class"), ("Class", "Attribute")]


def test_containment_order_of_five_classes():
    # F contains A, B, C; C contains D; and D is the only leaf reached through C
    m = mm(
        ClassSchema("F", relationships=(rel("as", "A"), rel("bs", "B"), rel("cs", "C"))),
        ClassSchema("A"), ClassSchema("B"),
        ClassSchema("C", relationships=(rel("ds", "D"),)),
        ClassSchema("D"),
        root="F",
    )
    assert containment_order(m) == [("F", "A"), ("F", "B"), ("F", "C"), ("C", "D")]


def test_cycle_is_reported_at_closing_class():
    m = mm(
        ClassSchema("A", relationships=(rel("b", "B"),)),
        ClassSchema("B", relationships=(rel("a", "A"),)),
    )
    report = validate_metamodel(m)
    assert not report.ok
    assert any("containment cycle at A" in v for v in report.violations)
    with pytest.raises(MetamodelError):
        containment_order(m)


def test_cycle_outside_the_root_tree_is_still_rejected():
    m = mm(
        ClassSchema("A"),
        ClassSchema("X", relationships=(rel("y", "Y"),)),
        ClassSchema("Y", relationships=(rel("x", "X"),)),
    )
    assert any("containment cycle" in v for v in validate_metamodel(m).violations)


def test_self_containment_is_a_cycle():
    m = mm(ClassSchema("A", relationships=(rel("b", "B"),)),
           ClassSchema("B", relationships=(rel("me", "B"),)))
    assert "containment cycle at B" in validate_metamodel(m).violations


@pytest.mark.parametrize(
    "classes, fragment",
    [
        ((ClassSchema("A"), ClassSchema("A")), "duplicate class A"),
        ((ClassSchema("A", flags=("f", "f")),), "duplicate flag f"),
        ((ClassSchema("A", ("f",), (rel("f", "B"),)), ClassSchema("B")), "both a flag and a relationship"),
        ((ClassSchema("A", ("id",)),), "reserved"),
        ((ClassSchema("A", relationships=(rel("k", "Klass"),)),), "undeclared class Klass"),
        ((ClassSchema("A", relationships=(rel("r", "B"), rel("r", "B"))), ClassSchema("B")),
         "duplicate relationship r"),
        ((ClassSchema("A"), ClassSchema("B", relationships=(rel("a", "A"),))), "root class A is the target"),
    ],
)
def test_violations(classes, fragment):
    report = validate_metamodel(mm(*classes))
    assert not report.ok
    assert any(fragment in v for v in report.violations), report.violations


def test_undeclared_root():
    report = validate_metamodel(mm(ClassSchema("B"), root="A"))
    assert "root class A is not declared" in report.violations


def test_unreachable_class_is_a_warning_only():
    report = validate_metamodel(mm(ClassSchema("A"), ClassSchema("Lonely")))
    assert report.ok
    assert report.warnings == ["class Lonely is unreachable from root A"]


def test_two_relationships_to_the_same_class_are_allowed():
    m = mm(ClassSchema("A", relationships=(rel("x", "B"), rel("y", "B", ONE))), ClassSchema("B"))
    require_valid(m)
    assert containment_order(m) == [("A", "B")]


def test_reachable_classes_preorder():
    assert reachable_classes(sql_metamodel()) == ["Schema", "Table", "Column"]


def test_resolve_path():
    uml = uml_metamodel()
    assert resolve_path(uml, "Model", ("classes",)) == ("Class", MANY)
    assert resolve_path(uml, "Model", ("classes", "attrs")) == ("Attribute", MANY)
    m = mm(ClassSchema("A", relationships=(rel("b", "B", ONE),)), ClassSchema("B"))
    assert resolve_path(m, "A", ["b"]) == ("B", ONE)
    with pytest.raises(KeyError, match="nope"):
        resolve_path(uml, "Model", ("nope",))
    with pytest.raises(KeyError):
        resolve_path(uml, "Model", ())


def test_lookup_helpers():
    sql = sql_metamodel()
    assert "Table" in sql and "Class" not in sql
    assert sql["Column"].has_flag("isKey")
    assert sql["Table"].relationship("columns").target_class == "Column"
    assert sql["Table"].relationship("rows") is None
    assert sql.get("Nope") is None
    assert sql.class_names == ["Schema", "Table", "Column"]
    with pytest.raises(KeyError):
        sql["Nope"]
