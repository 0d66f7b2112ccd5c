"""Class schemas, containment relationships and the containment order.

Every class carries a single natural-number base attribute named ``id``.
Boolean flags are extra, non-structural attributes.  Relationships are
containment edges with multiplicity ONE or MANY.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

BASE_ATTR = "id"


class Multiplicity(enum.Enum):
    ONE = "one"
    MANY = "many"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class RelationshipDecl:
    name: str
    target_class: str
    multiplicity: Multiplicity = Multiplicity.MANY


@dataclass(frozen=True)
class ClassSchema:
    name: str
    flags: tuple[str, ...] = ()
    relationships: tuple[RelationshipDecl, ...] = ()

    @property
    def base_attr(self) -> str:
        return BASE_ATTR

    def relationship(self, name: str) -> RelationshipDecl | None:
        for rel in self.relationships:
            if rel.name == name:
                return rel
        return None

    def has_flag(self, name: str) -> bool:
        return name in self.flags


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def extend(self, other: ValidationReport, prefix: str = "") -> None:
        self.violations.extend(prefix + v for v in other.violations)
        self.warnings.extend(prefix + w for w in other.warnings)


class MetamodelError(ValueError):
    """Raised when an operation needs a valid metamodel and gets an invalid one."""

    def __init__(self, report: ValidationReport):
        super().__init__("; ".join(report.violations))
        self.report = report


@dataclass(frozen=True)
class Metamodel:
    name: str
    classes: tuple[ClassSchema, ...]
    root_class: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(self.classes))

    def get(self, name: str) -> ClassSchema | None:
        for schema in self.classes:
            if schema.name == name:
                return schema
        return None

    def __getitem__(self, name: str) -> ClassSchema:
        schema = self.get(name)
        if schema is None:
            raise KeyError(f"unknown class {name!r} in metamodel {self.name!r}")
        return schema

    def __contains__(self, name: object) -> bool:
        return any(c.name == name for c in self.classes)

    @property
    def class_names(self) -> list[str]:
        return [c.name for c in self.classes]


def _find_cycle(mm: Metamodel) -> str | None:
    """Return the class at which a containment cycle is first closed, if any."""
    edges = {
        c.name: [r.target_class for r in c.relationships if r.target_class in mm]
        for c in mm.classes
    }
    white, grey, black = 0, 1, 2
    colour = dict.fromkeys(edges, white)

    def visit(name: str) -> str | None:
        colour[name] = grey
        for nxt in edges[name]:
            if colour[nxt] == grey:
                return nxt
            if colour[nxt] == white:
                found = visit(nxt)
                if found is not None:
                    return found
        colour[name] = black
        return None

    ordered = [mm.root_class] if mm.root_class in edges else []
    ordered += [n for n in edges if n != mm.root_class]
    for name in ordered:
        if colour[name] == white:
            found = visit(name)
            if found is not None:
                return found
    return None


def reachable_classes(mm: Metamodel) -> list[str]:
    """Classes reachable from the root along relationships, in preorder."""
    seen: list[str] = []
    stack = [mm.root_class] if mm.root_class in mm else []
    while stack:
        name = stack.pop()
        if name in seen:
            continue
        seen.append(name)
        schema = mm[name]
        stack.extend(
            r.target_class for r in reversed(schema.relationships) if r.target_class in mm
        )
    return seen


def validate_metamodel(mm: Metamodel) -> ValidationReport:
    report = ValidationReport()
    names = [c.name for c in mm.classes]
    for name in sorted({n for n in names if names.count(n) > 1}):
        report.violations.append(f"duplicate class {name}")

    for schema in mm.classes:
        rel_names = [r.name for r in schema.relationships]
        for dup in sorted({n for n in rel_names if rel_names.count(n) > 1}):
            report.violations.append(f"class {schema.name}: duplicate relationship {dup}")
        for dup in sorted({n for n in schema.flags if schema.flags.count(n) > 1}):
            report.violations.append(f"class {schema.name}: duplicate flag {dup}")
        for clash in sorted(set(schema.flags) & set(rel_names)):
            report.violations.append(
                f"class {schema.name}: {clash} is both a flag and a relationship"
            )
        if BASE_ATTR in schema.flags or BASE_ATTR in rel_names:
            report.violations.append(
                f"class {schema.name}: {BASE_ATTR} is reserved for the base attribute"
            )
        for rel in schema.relationships:
            if rel.target_class not in mm:
                report.violations.append(
                    f"class {schema.name}: relationship {rel.name} targets "
                    f"undeclared class {rel.target_class}"
                )

    if mm.root_class not in mm:
        report.violations.append(f"root class {mm.root_class} is not declared")
    else:
        for schema in mm.classes:
            for rel in schema.relationships:
                if rel.target_class == mm.root_class:
                    report.violations.append(
                        f"root class {mm.root_class} is the target of "
                        f"{schema.name}.{rel.name}"
                    )

    cycle_at = _find_cycle(mm)
    if cycle_at is not None:
        report.violations.append(f"containment cycle at {cycle_at}")

    if mm.root_class in mm:
        reach = set(reachable_classes(mm))
        for name in names:
            if name not in reach:
                report.warnings.append(f"class {name} is unreachable from root {mm.root_class}")
    return report


def require_valid(mm: Metamodel) -> None:
    report = validate_metamodel(mm)
    if not report.ok:
        raise MetamodelError(report)


def containment_order(mm: Metamodel) -> list[tuple[str, str]]:
    """Covering pairs ``(container, contained)`` in declaration order."""
    require_valid(mm)
    pairs: list[tuple[str, str]] = []
    for schema in mm.classes:
        for rel in schema.relationships:
            pair = (schema.name, rel.target_class)
            if pair not in pairs:
                pairs.append(pair)
    return pairs


def resolve_path(
    mm: Metamodel, start: str, path: tuple[str, ...] | list[str]
) -> tuple[str, Multiplicity]:
    """Follow a relationship path from ``start``.

    Returns the class reached and the path multiplicity (MANY if any step is).
    Raises ``KeyError`` naming the first undeclared step.
    """
    if not path:
        raise KeyError("empty relationship path")
    current = mm[start]
    multiplicity = Multiplicity.ONE
    for step in path:
        rel = current.relationship(step)
        if rel is None:
            raise KeyError(f"relationship {step} is not declared on {current.name}")
        if rel.multiplicity is Multiplicity.MANY:
            multiplicity = Multiplicity.MANY
        current = mm[rel.target_class]
    return current.name, multiplicity
