"""Proof traces: a fixed skeleton of quantifier/connective nodes whose leaves
carry hole, commutation and link evidence.

Certificates serialize to a canonical JSON document and can be replayed
against the instances they talk about.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

SCHEMA = "laddertx-certificate"
VERSION = 1

FORALL_SRC = "FORALL_SRC"
IMPL_INTRO = "IMPL_INTRO"
EXISTS_WITNESS = "EXISTS_WITNESS"
AND = "AND"
HOLE_LEAF = "HOLE_LEAF"
COM_LEAF = "COM_LEAF"
LINK_LEAF = "LINK_LEAF"
VACUOUS = "VACUOUS"
JOIN = "JOIN"

KINDS = (FORALL_SRC, IMPL_INTRO, EXISTS_WITNESS, AND, HOLE_LEAF, COM_LEAF, LINK_LEAF, VACUOUS, JOIN)
LEAF_KINDS = (HOLE_LEAF, COM_LEAF, LINK_LEAF, VACUOUS)


class CertificateError(ValueError):
    pass


@dataclass(frozen=True)
class CertNode:
    kind: str
    rung: str | None = None
    src_key: str | None = None
    tgt_key: str | None = None
    evidence: dict[str, Any] = field(default_factory=dict)
    children: tuple[CertNode, ...] = ()

    def holds(self) -> bool:
        own = True
        if self.kind == HOLE_LEAF:
            own = self.evidence.get("verdict") in ("HOLDS", "VACUOUS")
        elif self.kind == COM_LEAF:
            own = self.evidence.get("equal") is True
        elif self.kind == LINK_LEAF:
            own = self.evidence.get("ok") is True
        elif self.kind == EXISTS_WITNESS:
            own = self.evidence.get("found") is True
        return own and all(c.holds() for c in self.children)

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "rung": self.rung,
            "src_key": self.src_key,
            "tgt_key": self.tgt_key,
            "evidence": self.evidence,
            "children": [c.to_json() for c in self.children],
        }

    def iter_nodes(self, path: tuple[int, ...] = ()):
        yield path, self
        for i, child in enumerate(self.children):
            yield from child.iter_nodes(path + (i,))


@dataclass(frozen=True)
class Certificate:
    transform: str
    source_root: str
    target_root: str | None
    root: CertNode

    @property
    def holds(self) -> bool:
        return self.root.holds()

    def to_json(self) -> dict[str, Any]:
        return {
            "schema": SCHEMA,
            "version": VERSION,
            "transform": self.transform,
            "source_root": self.source_root,
            "target_root": self.target_root,
            "root": self.root.to_json(),
        }

    def count(self, kind: str | None = None) -> int:
        return sum(1 for _, n in self.root.iter_nodes() if kind is None or n.kind == kind)


def serialize(cert: Certificate) -> bytes:
    text = json.dumps(cert.to_json(), sort_keys=True, indent=1, ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def _opt_str(doc: dict, name: str, where: str) -> str | None:
    val = doc.get(name)
    if val is not None and not isinstance(val, str):
        raise CertificateError(f"{where}: {name} must be a string or null")
    return val


def _node_from_json(doc: Any, where: str) -> CertNode:
    if not isinstance(doc, dict):
        raise CertificateError(f"{where}: node must be an object")
    expected = {"kind", "rung", "src_key", "tgt_key", "evidence", "children"}
    if set(doc) != expected:
        raise CertificateError(f"{where}: node fields must be {sorted(expected)}")
    kind = doc["kind"]
    if kind not in KINDS:
        raise CertificateError(f"{where}: unknown node kind {kind!r}")
    evidence = doc["evidence"]
    if not isinstance(evidence, dict):
        raise CertificateError(f"{where}: evidence must be an object")
    children = doc["children"]
    if not isinstance(children, list):
        raise CertificateError(f"{where}: children must be a list")
    if kind in LEAF_KINDS and children:
        raise CertificateError(f"{where}: {kind} is a leaf")
    return CertNode(
        kind=kind,
        rung=_opt_str(doc, "rung", where),
        src_key=_opt_str(doc, "src_key", where),
        tgt_key=_opt_str(doc, "tgt_key", where),
        evidence=evidence,
        children=tuple(
            _node_from_json(c, f"{where}/{i}") for i, c in enumerate(children)
        ),
    )


def deserialize(data: bytes | str) -> Certificate:
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CertificateError(f"malformed certificate: {exc}") from exc
    if not isinstance(doc, dict):
        raise CertificateError("certificate must be a JSON object")
    if doc.get("schema") != SCHEMA or doc.get("version") != VERSION:
        raise CertificateError("unsupported certificate schema or version")
    expected = {"schema", "version", "transform", "source_root", "target_root", "root"}
    if set(doc) != expected:
        raise CertificateError(f"certificate fields must be {sorted(expected)}")
    transform = doc["transform"]
    source_root = doc["source_root"]
    if not isinstance(transform, str) or not isinstance(source_root, str):
        raise CertificateError("transform and source_root must be strings")
    return Certificate(
        transform=transform,
        source_root=source_root,
        target_root=_opt_str(doc, "target_root", "certificate"),
        root=_node_from_json(doc["root"], "root"),
    )


@dataclass(frozen=True)
class ReplayResult:
    ok: bool
    path: tuple[int, ...] | None = None
    message: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _canon(value: Any) -> str:
    return json.dumps(value, sort_keys=True, ensure_ascii=False)


def _shallow(node: CertNode) -> str:
    return _canon(
        [node.kind, node.rung, node.src_key, node.tgt_key, node.evidence, len(node.children)]
    )


def replay(cert: Certificate, ot, src, tgt) -> ReplayResult:
    """Recompute every node of ``cert`` from the instances and compare.

    The recomputation resolves existentials by witness search, so it does
    not trust any choice recorded in the certificate.
    """
    from .engine import verify

    for path, node in cert.root.iter_nodes():
        if node.kind == EXISTS_WITNESS and node.evidence.get("found") is True:
            if node.tgt_key not in tgt.objects:
                return ReplayResult(False, path, f"dangling witness {node.tgt_key}")
    if cert.transform != ot.name:
        return ReplayResult(False, (), f"certificate is for {cert.transform}, not {ot.name}")
    if cert.source_root != src.root or cert.target_root != tgt.root:
        return ReplayResult(False, (), "certificate roots do not match the instances")

    fresh = verify(ot, src, tgt).trace

    def compare(a: CertNode, b: CertNode, path: tuple[int, ...]) -> ReplayResult | None:
        if _shallow(a) != _shallow(b):
            return ReplayResult(False, path, f"recorded {a.kind} differs from recomputation")
        for i, (ca, cb) in enumerate(zip(a.children, b.children)):
            bad = compare(ca, cb, path + (i,))
            if bad is not None:
                return bad
        return None

    bad = compare(cert.root, fresh.root, ())
    if bad is not None:
        return bad
    if not cert.holds:
        return ReplayResult(False, (), "recorded evidence does not conjoin to a proof")
    return ReplayResult(True)
