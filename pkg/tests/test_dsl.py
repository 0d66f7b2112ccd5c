from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from laddertx import dsl
from laddertx.dsl import Document, DslError, JoinExpr, LadderRef, parse, print_document
from laddertx.generators import random_case, random_document
from laddertx.uml2sql import m1, s1, source_text, transformation

CORPUS = ("uml2sql.mt", "m1.mt", "s1.mt", "partial.mt", "partial_src.mt")
TINY = "metamodel M { root A; class A { flag on; rel kids : B many; } class B {} }\n"


def errors(*sources) -> list[str]:
    with pytest.raises(DslError) as info:
        dsl.load(*sources)
    return [str(d) for d in info.value.diagnostics]


def test_empty_input_is_an_empty_document():
    assert parse("") == Document()
    assert parse("  // only a comment\n") == Document()
    loaded = dsl.load("")
    assert not loaded.metamodels and not loaded.instances and not loaded.transforms


def test_undeclared_relationship_target_is_positioned():
    text = "metamodel UML {\n  root Model;\n  class Model { rel classes : Klass many; }\n}\n"
    [msg] = errors(("uml.mt", text))
    assert msg == "uml.mt:3:17: relationship classes targets undeclared class Klass"


def test_shipped_uml2sql_builds_the_example():
    loaded = dsl.load(*(source_text(n) for n in ("uml2sql.mt", "m1.mt", "s1.mt")))
    assert loaded.transforms["uml2sql"] == transformation()
    assert loaded.instances["m1"] == m1()
    assert loaded.instances["s1"] == s1()


@pytest.mark.parametrize("name", CORPUS)
def test_corpus_round_trip(name):
    first = parse(source_text(name), name)
    text = print_document(first)
    assert parse(text) == first
    assert print_document(parse(text)) == text


def test_printing_sorts_instance_objects():
    doc = parse(TINY + "instance i : M { B#10 {} B#9 {} A#1 { kids = [B#10, B#9] } }")
    text = print_document(doc)
    assert text.index("A#1") < text.index("B#9 {}") < text.index("B#10 {}")
    assert "kids = [B#10, B#9]" in text


def test_join_printing_keeps_nesting():
    t1, t2, t3 = LadderRef("t1"), LadderRef("t2"), LadderRef("t3")
    assert dsl.format_ladder(JoinExpr(JoinExpr(t1, t2), t3)) == "join(join(t1, t2), t3)"
    assert dsl.format_ladder(JoinExpr(t1, JoinExpr(t2, t3))) == "join(t1, join(t2, t3))"


def test_partial_example_ladder_text():
    doc = parse(source_text("partial.mt"))
    [tx] = doc.transforms
    lets = {let.name: dsl.format_ladder(let.ladder) for let in tx.lets}
    assert lets["t123"] == "join(join(t1, t2), t3)"
    assert lets["t5"] == "base(d2r via cs.ds / rs)"


def test_lexical_error_is_positioned():
    [msg] = errors(("f.mt", "metamodel M { root A; class A $ }"))
    assert msg == "f.mt:1:31: unexpected character '$'"


def test_syntax_error_is_positioned():
    with pytest.raises(DslError) as info:
        parse("metamodel M {\n  root A\n}", "f.mt")
    d = info.value.diagnostics[0]
    assert (d.file, d.line) == ("f.mt", 3) and "expected ';'" in d.message


def test_equality_does_not_chain():
    text = TINY + ("transform t : M -> M { rung r : A -> A { pre: true; "
                   "post: src.id = tgt.id = tgt.id; map { id <- src.id; } } root r; ladder: none; }")
    [msg] = errors(text)
    assert "does not chain" in msg


@pytest.mark.parametrize(
    "body, fragment",
    [
        ("instance i : M { A#1 {} A#1 {} }", "object A#1 declared twice"),
        ("instance i : N { }", "unknown metamodel N"),
        ("instance i : M { A#1 { kids = [C#2] } }", "C#2"),
        ("transform t : M -> M { root q; ladder: none; }", "unknown root rung q"),
        ("transform t : M -> M { rung r : A -> A { pre: true; post: true; map { id <- src.id; } }"
         " root r; let x = step(r via kids / kids, x); ladder: x; }", "refers to itself"),
        ("transform t : M -> M { rung r : A -> A { pre: true; post: true; map { id <- src.id; } }"
         " root r; ladder: base(nope via kids / kids); }", "nope"),
        ("transform t : M -> M { rung r : A -> A { pre: true; post: true; map { id <- src.id; } }"
         " root r; ladder: missing; }", "missing"),
    ],
)
def test_semantic_errors(body, fragment):
    msgs = errors(TINY + body)
    assert msgs and fragment in "\n".join(msgs)
    assert all(m.split(":")[0].isdigit() for m in msgs)


def test_keywords_are_contextual():
    text = """
metamodel map {
  root class;
  class class { flag root; rel emit : rung many; }
  class rung { flag pre; }
}
instance let : map { class#1 { root = true, emit = [rung#2] } rung#2 { pre = false } }
transform join : map -> map {
  rung base : class -> class { pre: src.root; post: tgt.root; map { id <- src.id; root <- true; } }
  rung step : rung -> rung { pre: not src.pre; post: src.id = tgt.id; map { id <- src.id; } }
  root base;
  ladder: base(step via emit / emit);
}
"""
    loaded = dsl.load(text)
    assert loaded.instances["let"]["class#1"].flags == {"root": True}
    doc = parse(text)
    assert parse(print_document(doc)) == doc


def test_multi_file_load_keeps_file_names():
    loaded = dsl.load(("mm.mt", TINY), ("i.mt", "instance i : M { A#1 { kids = [B#2] } B#2 {} }"))
    assert loaded.instances["i"].root == "A#1"
    msgs = errors(("mm.mt", TINY), ("bad.mt", "instance i : Q { }"))
    assert msgs[0].startswith("bad.mt:1:")


def test_parse_errors_from_several_files_are_collected():
    msgs = errors(("a.mt", "metamodel"), ("b.mt", "instance"))
    assert [m.split(":")[0] for m in msgs] == ["a.mt", "b.mt"]


def test_dumps_round_trips_semantic_objects():
    ot = transformation()
    text = dsl.dumps([ot.src_mm, ot.tgt_mm], [m1()], [ot])
    loaded = dsl.load(text)
    assert loaded.transforms["uml2sql"] == ot
    assert loaded.instances["m1"] == m1()


def test_format_instance_matches_shipped_s1():
    text = dsl.format_instance(s1())
    assert text.startswith("instance s1 : SQL {")
    assert dsl.load(source_text("uml2sql.mt"), text).instances["s1"] == s1()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_generated_cases_print_and_reload(seed):
    case = random_case(random.Random(seed))
    text = dsl.dumps([case.ot.src_mm, case.ot.tgt_mm], [case.src], [case.ot])
    loaded = dsl.load(text)
    assert loaded.transforms[case.ot.name] == case.ot
    assert loaded.instances[dsl.instance_decl(case.src).name] == case.src


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_generated_documents_round_trip(seed):
    doc = random_document(random.Random(seed))
    text = print_document(doc)
    assert parse(text) == doc
    again = parse(print_document(parse(text)))
    assert again == parse(text)


@given(st.text(alphabet=st.sampled_from(list("metamodel{};:#=<->/\\ \nAB01()[],.xyz")), max_size=80))
def test_diagnostics_are_total(text):
    try:
        parse(text, "g.mt")
    except DslError as exc:
        assert exc.diagnostics
        for d in exc.diagnostics:
            assert d.line >= 1 and d.col >= 1 and d.message


@given(st.text(max_size=60))
def test_arbitrary_text_never_crashes(text):
    try:
        dsl.load(text)
    except DslError as exc:
        assert exc.diagnostics
