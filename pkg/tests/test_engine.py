from __future__ import annotations

import pytest

from laddertx import certificate as C
from laddertx import contracts as K
from laddertx import dsl
from laddertx.contracts import MapExpr, Rung
from laddertx.engine import (
    COM,
    CONSTRUCTIVE,
    LINK,
    POST_DATA,
    SEARCH,
    ExecutionError,
    RootPreconditionError,
    check_com,
    eval_spec,
    execute,
    verify,
)
from laddertx.generators import replace_rungs
from laddertx.instance import ModelInstance, navigate
from laddertx.ladder import LadderError, OrderedTransformation
from laddertx.uml2sql import m1, rungs, s1, source_text, transformation, uml_metamodel


def edited(model: ModelInstance, fn) -> ModelInstance:
    """Copy, apply ``fn`` to the unfrozen copy, refreeze."""
    c = model.copy()
    fn(c)
    return c.freeze(root=c.root)


def renumber(model: ModelInstance, old: str, new_id: int) -> ModelInstance:
    cls = model[old].class_name
    out = ModelInstance(model.metamodel, model.name)
    new_key = f"{cls}#{new_id}"

    def fix(v):
        if isinstance(v, tuple):
            return [new_key if x == old else x for x in v]
        return new_key if v == old else v

    done = set()

    def build(k):
        if k in done:
            return
        n = model[k]
        for v in n.refs.values():
            for x in (v if isinstance(v, tuple) else [v] if v else []):
                build(x)
        ident = new_id if k == old else n.id
        out.build_object(n.class_name, ident, dict(n.flags), {r: fix(v) for r, v in n.refs.items()})
        done.add(k)

    for k in model.sorted_keys():
        build(k)
    return out.freeze(root=fix(model.root))


def test_execute_reproduces_s1():
    run = execute(transformation(), m1())
    assert run.target == s1()
    assert run.verdict.holds and run.verdict.failures == []
    assert navigate(run.target, "Table#2", "columns") == (
        "Column#2", "Column#5", "Column#6", "Column#7")


def test_execute_root_only_model():
    m = ModelInstance(uml_metamodel())
    m.build_object("Model", 1)
    run = execute(transformation(), m.freeze())
    assert list(run.target.objects) == ["Schema#1"]
    assert navigate(run.target, "Schema#1", "tables") == ()
    assert run.verdict.holds


def test_execute_is_deterministic():
    a = C.serialize(execute(transformation(), m1()).certificate)
    b = C.serialize(execute(transformation(), m1()).certificate)
    assert a == b


def test_verify_example_holds_with_expected_witnesses():
    v = verify(transformation(), m1(), s1())
    assert v.holds
    witnesses = {n.tgt_key for _, n in v.trace.root.iter_nodes() if n.kind == C.EXISTS_WITNESS}
    assert {"Table#2", "Table#3", "Table#4"} <= witnesses
    assert {"Column#5", "Column#6", "Column#7", "Column#8"} <= witnesses


def test_eval_spec_on_body_holds():
    ot = transformation()
    v = eval_spec(ot.body, "Model#1", "Schema#1", m1(), s1())
    assert v.holds and v.trace.root.kind == C.AND


def test_eval_spec_type_mismatch():
    ot = transformation()
    with pytest.raises(LadderError, match="not typed"):
        eval_spec(ot.body, "Class#2", "Schema#1", m1(), s1())
    with pytest.raises(LadderError):
        eval_spec(ot.body, "Model#9", "Schema#1", m1(), s1())


def test_altered_non_key_column_is_post_data_at_attr2column():
    tgt = renumber(s1(), "Column#8", 9)
    v = verify(transformation(), m1(), tgt)
    assert not v.holds
    assert {f.rung for f in v.failures} == {"attr2column"}
    post = [f for f in v.failures if f.conjunct == POST_DATA]
    assert post and post[0].src_key == "Attribute#8" and post[0].tgt_key == "Column#9"


def test_deleted_table_is_a_missing_witness_for_class4():
    def drop(c):
        c.remove_object("Column#4")
        c.remove_object("Table#4")

    v = verify(transformation(), m1(), edited(s1(), drop))
    assert not v.holds
    link = [f for f in v.failures if f.conjunct == LINK]
    assert len(link) == 1
    assert link[0].src_key == "Class#4"
    assert "missing ∃-witness for Class#4" in link[0].message
    assert {f.rung for f in v.failures} == {"class2table"}


def test_swapped_tables_fail_com():
    def swap(c):
        t = c.objects["Schema#1"].refs["tables"]
        t[0], t[1] = t[1], t[0]

    v = verify(transformation(), m1(), edited(s1(), swap))
    assert not v.holds
    assert COM in {f.conjunct for f in v.failures}


def test_check_com_at_model():
    ot = transformation()
    ev = check_com(ot.body, "Model#1", "Schema#1", m1(), s1())
    assert ev.equal
    assert [v[1] for v in ev.left] == [2, 3, 4] == [v[1] for v in ev.right]
    dangling = check_com(ot.body, "Model#7", "Schema#1", m1(), s1())
    assert not dangling.equal and "dangling" in dangling.diagnostic


def test_identity_square_commutes():
    ot = transformation()
    ev = check_com(ot.body.rest, "Class#2", "Table#2", m1(), s1())
    assert ev.equal and len(ev.left) == 3


def test_succ_table_builder_fails_at_every_class_and_only_there():
    ot = transformation()
    model2schema, class2table, attr2column = rungs()
    bad = Rung(class2table.name, "Class", "Table", K.TRUE, class2table.post,
               MapExpr("Table", (("id", K.Succ(K.src("id"))),), class2table.map.emits))
    tgt = execute(replace_rungs(ot, {"class2table": bad}), m1()).target
    assert sorted(k for k in tgt.objects if k.startswith("Table")) == ["Table#3", "Table#4", "Table#5"]
    v = verify(ot, m1(), tgt)
    assert not v.holds
    assert {f.rung for f in v.failures} == {"class2table"}
    assert v.failures[0].conjunct == COM
    posts = [f.src_key for f in v.failures if f.conjunct == POST_DATA]
    assert posts == ["Class#2", "Class#3", "Class#4"]


def test_root_pre_false():
    ot = transformation()
    model2schema, *_ = rungs()
    closed = Rung(model2schema.name, "Model", "Schema", K.FALSE, model2schema.post, model2schema.map)
    ot2 = replace_rungs(ot, {"model2schema": closed})
    with pytest.raises(RootPreconditionError):
        execute(ot2, m1())
    v = verify(ot2, m1(), s1())
    assert v.holds
    impl = v.trace.root.children[0]
    assert impl.kind == C.IMPL_INTRO and impl.children[0].kind == C.VACUOUS


def test_root_post_failure():
    tgt = renumber(s1(), "Schema#1", 9)
    v = verify(transformation(), m1(), tgt)
    assert not v.holds
    assert [(f.rung, f.conjunct) for f in v.failures] == [("model2schema", POST_DATA)]


def test_deleted_key_column_is_blamed_on_the_emitting_rung():
    v = verify(transformation(), m1(), edited(s1(), lambda c: c.remove_object("Column#4")))
    assert not v.holds
    assert [(f.rung, f.conjunct) for f in v.failures] == [("class2table", LINK)]
    assert "emitted Column missing at Table#4.columns[0]" in v.failures[0].message


def test_flipped_key_flag_is_post_data_on_emit():
    def flip(c):
        c.objects["Column#3"].flags["isKey"] = False

    v = verify(transformation(), m1(), edited(s1(), flip))
    assert [(f.rung, f.conjunct) for f in v.failures] == [("class2table", POST_DATA)]


def test_constructive_and_search_agree_on_example():
    ot = transformation()
    run = execute(ot, m1())
    a = eval_spec(ot.body, "Model#1", "Schema#1", m1(), run.target, mode=SEARCH)
    b = eval_spec(ot.body, "Model#1", "Schema#1", m1(), run.target, mode=CONSTRUCTIVE,
                  record=run.record)
    assert a.holds and b.holds
    assert a.trace.root.to_json() == b.trace.root.to_json()


def test_constructive_mode_needs_record():
    ot = transformation()
    with pytest.raises(ValueError):
        eval_spec(ot.body, "Model#1", "Schema#1", m1(), s1(), mode=CONSTRUCTIVE)
    with pytest.raises(ValueError):
        eval_spec(ot.body, "Model#1", "Schema#1", m1(), s1(), mode="guess")


def test_constructive_mode_rejects_tampered_target():
    ot = transformation()
    run = execute(ot, m1())
    tgt = renumber(run.target, "Column#6", 61)
    v = eval_spec(ot.body, "Model#1", "Schema#1", m1(), tgt, mode=CONSTRUCTIVE, record=run.record)
    assert not v.holds and {f.rung for f in v.failures} == {"attr2column"}


def test_partial_order_example_with_vacuous_child():
    loaded = dsl.load(source_text("partial.mt"), source_text("partial_src.mt"))
    ot, src = loaded.transforms["letters"], loaded.instances["letters_src"]
    run = execute(ot, src)
    assert run.verdict.holds
    assert "U#10" in run.target and "U#11" not in run.target
    vac = [n for _, n in run.certificate.root.iter_nodes() if n.kind == C.VACUOUS]
    assert [n.src_key for n in vac] == ["G#11"]
    # C is unmapped, yet its D children are reached through cs.ds
    assert navigate(run.target, "Q#2", "rs") == ("R#5", "R#6")
    assert navigate(run.target, "T#9", "v") is None
    assert verify(ot, src, run.target).holds


def test_extra_object_under_vacuous_position_is_rejected():
    loaded = dsl.load(source_text("partial.mt"), source_text("partial_src.mt"))
    ot, src = loaded.transforms["letters"], loaded.instances["letters_src"]
    tgt = execute(ot, src).target

    def add(c):
        u = c.build_object("U", 11, {"hot": False})
        c.objects["T#8"].refs["us"].append(u)

    v = verify(ot, src, edited(tgt, add))
    assert not v.holds
    assert {(f.rung, f.conjunct) for f in v.failures} == {("g2u", COM)}


def test_map_error_surfaces_as_execution_error():
    ot = transformation()
    _, _, attr2column = rungs()
    const = Rung("attr2column", "Attribute", "Column", K.TRUE, K.TRUE,
                 MapExpr("Column", (("id", K.NatConst(0)),)))
    with pytest.raises(ExecutionError, match="duplicate object Column#0"):
        execute(replace_rungs(ot, {"attr2column": const}), m1())


def test_execute_refuses_ill_formed():
    model2schema, class2table, _ = rungs()
    from laddertx.uml2sql import sql_metamodel

    ot = OrderedTransformation("t", uml_metamodel(), sql_metamodel(), class2table)
    with pytest.raises(LadderError, match="not well formed"):
        execute(ot, m1())


def test_com_by_construction_on_example():
    run = execute(transformation(), m1())
    coms = [n for _, n in run.certificate.root.iter_nodes() if n.kind == C.COM_LEAF]
    assert len(coms) == 4 and all(n.evidence["equal"] for n in coms)
