"""Finite typed object graphs over a metamodel.

Objects are addressed by a synthetic key ``"<Class>#<id>"``.  The numeric
``id`` alone is not unique (tables and columns may share ids); the pair
``(class, id)`` is.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

from .metamodel import Metamodel, Multiplicity, ValidationReport

RefValue = Union[str, None, tuple]
ObjectValue = tuple  # (class_name, id, ((flag, bool), ...))


class InstanceError(ValueError):
    pass


def object_key(class_name: str, id: int) -> str:
    return f"{class_name}#{id}"


@dataclass
class ObjectNode:
    class_name: str
    id: int
    flags: dict[str, bool] = field(default_factory=dict)
    refs: dict[str, RefValue] = field(default_factory=dict)

    @property
    def key(self) -> str:
        return object_key(self.class_name, self.id)

    @property
    def value(self) -> ObjectValue:
        """Structural value used for comparisons: class, id and flags only."""
        return (self.class_name, self.id, tuple(sorted(self.flags.items())))


class ModelInstance:
    """An object graph under construction, then frozen.

    Construction is single-writer.  After :meth:`freeze` the instance rejects
    further mutation and may be shared freely.
    """

    def __init__(self, metamodel: Metamodel, name: str = ""):
        self.metamodel = metamodel
        self.name = name
        self.objects: dict[str, ObjectNode] = {}
        self.root: str | None = None
        self.warnings: list[str] = []
        self._frozen = False
        # (key, rel) -> number of trailing entries that must stay last
        self._tail: dict[tuple[str, str], int] = {}

    # -- construction -----------------------------------------------------

    @property
    def frozen(self) -> bool:
        return self._frozen

    def _check_mutable(self) -> None:
        if self._frozen:
            raise InstanceError(f"instance {self.name!r} is frozen")

    def build_object(
        self,
        class_name: str,
        id: int,
        flags: Mapping[str, bool] | None = None,
        refs: Mapping[str, RefValue | list] | None = None,
    ) -> str:
        self._check_mutable()
        schema = self.metamodel.get(class_name)
        if schema is None:
            raise InstanceError(f"unknown class {class_name}")
        if isinstance(id, bool) or not isinstance(id, int) or id < 0:
            raise InstanceError(f"{class_name}: id must be a natural number, got {id!r}")
        key = object_key(class_name, id)
        if key in self.objects:
            raise InstanceError(f"duplicate object {key}")

        flags = dict(flags or {})
        for name, val in flags.items():
            if not schema.has_flag(name):
                raise InstanceError(f"{key}: unknown flag {name}")
            if not isinstance(val, bool):
                raise InstanceError(f"{key}: flag {name} must be boolean")
        node_flags = {name: bool(flags.get(name, False)) for name in schema.flags}

        refs = dict(refs or {})
        for name in refs:
            if schema.relationship(name) is None:
                raise InstanceError(f"{key}: undeclared relationship {name}")
        node_refs: dict[str, RefValue] = {}
        for rel in schema.relationships:
            given = refs.get(rel.name)
            if rel.multiplicity is Multiplicity.MANY:
                if given is None:
                    given = []
                if isinstance(given, str) or not isinstance(given, (list, tuple)):
                    raise InstanceError(
                        f"{key}: relationship {rel.name} is many-valued, expected a list"
                    )
                for ref in given:
                    self._check_ref(key, rel.name, rel.target_class, ref)
                node_refs[rel.name] = list(given)
            else:
                if isinstance(given, (list, tuple)):
                    raise InstanceError(
                        f"{key}: relationship {rel.name} is one-valued, got a list"
                    )
                if given is not None:
                    self._check_ref(key, rel.name, rel.target_class, given)
                node_refs[rel.name] = given
        self.objects[key] = ObjectNode(class_name, id, node_flags, node_refs)
        return key

    def _check_ref(self, key: str, rel: str, target_class: str, ref: object) -> None:
        if not isinstance(ref, str) or ref not in self.objects:
            raise InstanceError(f"{key}.{rel}: dangling reference {ref!r}")
        if self.objects[ref].class_name != target_class:
            raise InstanceError(
                f"{key}.{rel}: {ref} is not a {target_class}"
            )

    def link(self, parent: str, rel: str, child: str, *, trailing: bool = False) -> None:
        """Attach ``child`` under ``parent.rel``.

        MANY children are inserted before any entries previously attached with
        ``trailing=True``, so those stay at the end of the list.
        """
        self._check_mutable()
        node = self.objects[parent]
        decl = self.metamodel[node.class_name].relationship(rel)
        if decl is None:
            raise InstanceError(f"{parent}: undeclared relationship {rel}")
        self._check_ref(parent, rel, decl.target_class, child)
        if decl.multiplicity is Multiplicity.ONE:
            if node.refs[rel] is not None:
                raise InstanceError(f"{parent}.{rel} is one-valued and already set")
            node.refs[rel] = child
            return
        entries = node.refs[rel]
        tail = self._tail.get((parent, rel), 0)
        if trailing:
            entries.append(child)
            self._tail[(parent, rel)] = tail + 1
        else:
            entries.insert(len(entries) - tail, child)

    def remove_object(self, key: str) -> None:
        """Delete an object and every reference to it (unfrozen instances only)."""
        self._check_mutable()
        del self.objects[key]
        for node in self.objects.values():
            for rel, val in node.refs.items():
                if isinstance(val, list):
                    node.refs[rel] = [k for k in val if k != key]
                elif val == key:
                    node.refs[rel] = None
        if self.root == key:
            self.root = None

    def freeze(self, root: str | None = None) -> ModelInstance:
        if self._frozen:
            return self
        if root is not None:
            self.root = root
        if self.root is None:
            candidates = [
                k for k, n in self.objects.items()
                if n.class_name == self.metamodel.root_class
            ]
            if len(candidates) != 1:
                raise InstanceError(
                    f"instance {self.name!r} needs exactly one "
                    f"{self.metamodel.root_class} object, found {len(candidates)}"
                )
            self.root = candidates[0]
        for node in self.objects.values():
            for rel, val in node.refs.items():
                if isinstance(val, list):
                    node.refs[rel] = tuple(val)
        report = validate_instance(self)
        if not report.ok:
            for node in self.objects.values():
                for rel, val in node.refs.items():
                    if isinstance(val, tuple):
                        node.refs[rel] = list(val)
            raise InstanceError("; ".join(report.violations))
        self.warnings = list(report.warnings)
        self._frozen = True
        return self

    def copy(self) -> ModelInstance:
        """Unfrozen deep copy, for building variants of an instance."""
        clone = ModelInstance(self.metamodel, self.name)
        clone.objects = copy.deepcopy(self.objects)
        for node in clone.objects.values():
            for rel, val in node.refs.items():
                if isinstance(val, tuple):
                    node.refs[rel] = list(val)
        clone.root = self.root
        clone._tail = dict(self._tail)
        return clone

    # -- queries ----------------------------------------------------------

    def __getitem__(self, key: str) -> ObjectNode:
        return self.objects[key]

    def __contains__(self, key: object) -> bool:
        return key in self.objects

    def __len__(self) -> int:
        return len(self.objects)

    def sorted_keys(self) -> list[str]:
        """Canonical order: by class name, then id."""
        return sorted(self.objects, key=lambda k: (self.objects[k].class_name, self.objects[k].id))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ModelInstance):
            return NotImplemented
        return (
            self.metamodel == other.metamodel
            and self.root == other.root
            and self._canonical() == other._canonical()
        )

    def _canonical(self) -> dict:
        return {
            k: (n.class_name, n.id, n.flags,
                {r: tuple(v) if isinstance(v, list) else v for r, v in n.refs.items()})
            for k, n in self.objects.items()
        }

    def __repr__(self) -> str:
        return f"ModelInstance({self.name!r}, {len(self.objects)} objects, root={self.root})"


def navigate(model: ModelInstance, key: str, rel: str) -> RefValue:
    """Follow one relationship: a key (or None) for ONE, a tuple for MANY."""
    node = model.objects[key]
    decl = model.metamodel[node.class_name].relationship(rel)
    if decl is None:
        raise InstanceError(f"{node.class_name} has no relationship {rel}")
    val = node.refs[rel]
    if decl.multiplicity is Multiplicity.MANY:
        return tuple(val)
    return val


def navigate_path(model: ModelInstance, key: str, path: Iterable[str]) -> list[str]:
    """Follow a relationship path, flattening MANY steps in stored order."""
    frontier = [key]
    for rel in path:
        nxt: list[str] = []
        for k in frontier:
            val = navigate(model, k, rel)
            if isinstance(val, tuple):
                nxt.extend(val)
            elif val is not None:
                nxt.append(val)
        frontier = nxt
    return frontier


def objects_of(model: ModelInstance, class_name: str) -> list[str]:
    if class_name not in model.metamodel:
        raise InstanceError(f"unknown class {class_name}")
    keys = [k for k, n in model.objects.items() if n.class_name == class_name]
    return sorted(keys, key=lambda k: model.objects[k].id)


def validate_instance(model: ModelInstance) -> ValidationReport:
    report = ValidationReport()
    mm = model.metamodel
    for key, node in model.objects.items():
        schema = mm.get(node.class_name)
        if schema is None:
            report.violations.append(f"{key}: unknown class {node.class_name}")
            continue
        if key != object_key(node.class_name, node.id):
            report.violations.append(f"{key}: key does not match class and id")
        if set(node.flags) != set(schema.flags):
            report.violations.append(f"{key}: flags do not match class {schema.name}")
        if set(node.refs) != {r.name for r in schema.relationships}:
            report.violations.append(
                f"{key}: references do not match relationships of {schema.name}"
            )
            continue
        for rel in schema.relationships:
            val = node.refs[rel.name]
            targets: list = []
            if rel.multiplicity is Multiplicity.MANY:
                if not isinstance(val, (list, tuple)):
                    report.violations.append(f"{key}.{rel.name}: expected a list")
                    continue
                targets = list(val)
            elif val is not None:
                if isinstance(val, (list, tuple)):
                    report.violations.append(f"{key}.{rel.name}: expected a single reference")
                    continue
                targets = [val]
            for ref in targets:
                if ref not in model.objects:
                    report.violations.append(f"{key}.{rel.name}: dangling reference {ref}")
                elif model.objects[ref].class_name != rel.target_class:
                    report.violations.append(
                        f"{key}.{rel.name}: {ref} is not a {rel.target_class}"
                    )
    if report.violations:
        return report

    if model.root is None or model.root not in model.objects:
        report.violations.append("instance has no root object")
        return report
    if model.objects[model.root].class_name != mm.root_class:
        report.violations.append(
            f"root {model.root} is not a {mm.root_class}"
        )

    def children(k: str) -> list[str]:
        out: list[str] = []
        for val in model.objects[k].refs.values():
            if isinstance(val, (list, tuple)):
                out.extend(val)
            elif val is not None:
                out.append(val)
        return out

    # every object has at most one container, and containment is acyclic
    container: dict[str, str] = {}
    for k in model.sorted_keys():
        for c in children(k):
            if c in container:
                report.violations.append(f"{c} is contained by both {container[c]} and {k}")
                return report
            container[c] = k

    state: dict[str, int] = {}
    for start in model.sorted_keys():
        if state.get(start):
            continue
        stack = [(start, iter(children(start)))]
        state[start] = 1
        while stack:
            k, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[k] = 2
                stack.pop()
            elif state.get(nxt) == 1:
                report.violations.append(f"containment cycle through {nxt}")
                return report
            elif not state.get(nxt):
                state[nxt] = 1
                stack.append((nxt, iter(children(nxt))))

    reached = {model.root}
    frontier = [model.root]
    while frontier:
        k = frontier.pop()
        for c in children(k):
            if c not in reached:
                reached.add(c)
                frontier.append(c)
    for k in model.sorted_keys():
        if k not in reached:
            report.warnings.append(f"{k} is unreachable from root {model.root}")
    return report
