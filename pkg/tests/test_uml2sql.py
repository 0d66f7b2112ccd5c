from __future__ import annotations

from laddertx import certificate as C
from laddertx import dsl
from laddertx.engine import execute
from laddertx.instance import navigate, objects_of
from laddertx.uml2sql import bundle, source_text


def test_bundle_invariants(ex):
    assert ex.m1.root == "Model#1"
    assert len(objects_of(ex.m1, "Class")) == 3
    assert len(objects_of(ex.m1, "Attribute")) == 4
    assert len(objects_of(ex.s1, "Table")) == 3
    cols = objects_of(ex.s1, "Column")
    assert len(cols) == 7
    assert [c for c in cols if ex.s1[c].flags["isKey"]] == ["Column#2", "Column#3", "Column#4"]
    assert len(navigate(ex.s1, "Table#2", "columns")) == 4


def test_all_rungs_are_unconditional(ex):
    from laddertx import contracts as K

    assert all(r.pre == K.TRUE for r in ex.transformation.rungs())


def test_bundle_without_certificate():
    assert bundle(with_certificate=False).certificate is None


def test_execute_reproduces_golden_target(ex):
    run = execute(ex.transformation, ex.m1)
    assert run.target == ex.s1
    shipped = dsl.print_document(dsl.parse(source_text("s1.mt")))
    # the produced instance is named after the run; everything below the header must match
    assert dsl.format_instance(run.target).split("\n", 1)[1] == shipped.split("\n", 1)[1]


def test_execute_reproduces_golden_certificate(ex, data_dir):
    run = execute(ex.transformation, ex.m1)
    assert run.certificate == ex.certificate
    assert C.serialize(run.certificate) == (data_dir / "uml2sql.cert.json").read_bytes()


def test_fixture_texts_match_builders(ex):
    loaded = dsl.load(*(source_text(n) for n in ("uml2sql.mt", "m1.mt", "s1.mt")))
    assert loaded.metamodels["UML"] == ex.uml
    assert loaded.metamodels["SQL"] == ex.sql
    assert loaded.instances["m1"] == ex.m1


def test_golden_certificate_replays(ex):
    assert C.replay(ex.certificate, ex.transformation, ex.m1, ex.s1).ok
