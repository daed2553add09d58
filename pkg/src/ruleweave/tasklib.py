"""Task definitions: an ontology plus the prompting metadata needed to populate it.

A task document is a JSON object with the keys

    id, context, prefixes, classes, properties, subclass, disjoint,
    rules, entities, assertions, target

and an optional free-text ``notes`` key. Rules are written in a compact
text form, ``"h:Statement(?s) ^ h:hasAssertion(?s, ?a) -> h:Hearsay(?s)"``.
Three documents ship with the package (hearsay, method_application,
clinical_eligibility) as embedded resources under ``data/tasks/``.

Every loaded task gets two reserved namespaces injected if absent: ``inst``
for minted individuals and ``sd`` for the bookkeeping property
``sd:belongsToCase`` that links extracted entities to their source text.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Optional

from .errors import (
    IriError,
    RuleSyntaxError,
    RuleweaveError,
    TaskDocumentError,
    UnsafeRuleError,
)
from .ontology import Atom, ClassAtom, Iri, PropertyAtom, SwrlRule, TBox, Variable
from .reasoner import subclass_closure

SD_PREFIX = "sd"
SD_URL = "http://example.org/sd#"
INSTANCE_PREFIX = "inst"
INSTANCE_URL = "http://example.org/instances#"
BELONGS_TO_CASE = Iri(SD_PREFIX, "belongsToCase")

BUILTIN_TASK_IDS = ("hearsay", "method_application", "clinical_eligibility")

UNARY = "unary"
BINARY = "binary"

_TOP_LEVEL_KEYS = (
    "id",
    "context",
    "prefixes",
    "classes",
    "properties",
    "subclass",
    "disjoint",
    "rules",
    "entities",
    "assertions",
    "target",
)

_PREFIX_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_ATOM_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*:[A-Za-z_][A-Za-z0-9_]*)\s*\(([^()]*)\)\Z")


@dataclass(frozen=True)
class EntitySpec:
    """One kind of thing the extractor should look for in the input text."""

    name: str
    ontology_class: Iri
    description: str
    required: bool


@dataclass(frozen=True)
class AssertionSpec:
    """One yes/no determination the extractor makes about entities.

    Unary specs assert class membership of the subject entity, binary specs
    assert a property between subject and object. ``negative`` marks the
    member of a complement pair that is dropped when complementary
    predicates are switched off.
    """

    name: str
    arity: str
    maps_to: Iri
    subject_entity: str
    description: str
    object_entity: Optional[str] = None
    complement_of: Optional[str] = None
    negative: bool = False


@dataclass(frozen=True)
class TaskDefinition:
    id: str
    domain_context: str
    tbox: TBox
    entity_specs: tuple[EntitySpec, ...]
    assertion_specs: tuple[AssertionSpec, ...]
    target_class: Iri
    target_entity: str
    label_map: dict[str, str] = field(default_factory=dict)
    notes: Optional[str] = None

    @property
    def positive_label(self) -> str:
        return self.label_map["positive"]

    @property
    def negative_label(self) -> str:
        return self.label_map["negative"]

    def entity_spec(self, name: str) -> EntitySpec:
        for spec in self.entity_specs:
            if spec.name == name:
                return spec
        raise KeyError(name)


# -- rule text -------------------------------------------------------------


def parse_rule_term(text: str) -> Variable | Iri:
    text = text.strip()
    if text.startswith("?"):
        try:
            return Variable(text[1:])
        except UnsafeRuleError as exc:
            raise RuleSyntaxError(f"bad variable {text!r}: {exc}") from exc
    try:
        return Iri.parse(text)
    except IriError as exc:
        raise RuleSyntaxError(f"bad term {text!r}: {exc}") from exc


def parse_rule_atom(text: str) -> Atom:
    match = _ATOM_RE.match(text.strip())
    if not match:
        raise RuleSyntaxError(f"cannot parse atom {text.strip()!r}")
    predicate = Iri.parse(match.group(1))
    args = match.group(2).split(",")
    if len(args) == 1:
        return ClassAtom(predicate, parse_rule_term(args[0]))
    if len(args) == 2:
        return PropertyAtom(predicate, parse_rule_term(args[0]), parse_rule_term(args[1]))
    raise RuleSyntaxError(f"atom {text.strip()!r} has {len(args)} arguments, expected 1 or 2")


def parse_rule(name: str, text: str) -> SwrlRule:
    """Parse ``"C(?x) ^ p(?x, ?y) -> D(?x)"`` into a SwrlRule."""
    if not isinstance(text, str) or text.count("->") != 1:
        raise RuleSyntaxError(f"rule {name!r} must contain exactly one '->': {text!r}")
    body, head = text.split("->")
    if not body.strip():
        raise RuleSyntaxError(f"rule {name!r} has an empty antecedent")
    antecedent = tuple(parse_rule_atom(part) for part in body.split("^"))
    return SwrlRule(name, antecedent, parse_rule_atom(head))


# -- document loading --------------------------------------------------------


def _fail(path: str, message: str) -> TaskDocumentError:
    return TaskDocumentError(f"{path}: {message}")


def _string(doc: dict, key: str, path: str) -> str:
    value = doc.get(key)
    if not isinstance(value, str) or not value.strip():
        raise _fail(f"{path}.{key}" if path else key, "must be a non-empty string")
    return value


def _parse_name(text: Any, prefixes: dict[str, str], path: str) -> Iri:
    if not isinstance(text, str):
        raise _fail(path, f"expected a prefixed name, got {text!r}")
    try:
        iri = Iri.parse(text)
    except IriError as exc:
        raise _fail(path, str(exc)) from exc
    if iri.prefix not in prefixes:
        raise _fail(path, f"unknown prefix {iri.prefix!r} in {text!r}")
    return iri


def _pair_list(doc: dict, key: str, prefixes: dict[str, str]) -> list[tuple[Iri, Iri]]:
    raw = doc.get(key)
    if not isinstance(raw, list):
        raise _fail(key, "must be a list of two-element lists")
    pairs = []
    for i, item in enumerate(raw):
        if not isinstance(item, list) or len(item) != 2:
            raise _fail(f"{key}[{i}]", "must be a two-element list")
        pairs.append(
            (
                _parse_name(item[0], prefixes, f"{key}[{i}][0]"),
                _parse_name(item[1], prefixes, f"{key}[{i}][1]"),
            )
        )
    return pairs


def _load_prefixes(doc: dict) -> dict[str, str]:
    raw = doc.get("prefixes")
    if not isinstance(raw, dict) or not raw:
        raise _fail("prefixes", "must be a non-empty object mapping prefix to base URL")
    prefixes: dict[str, str] = {}
    for name, url in raw.items():
        if not _PREFIX_NAME_RE.match(name):
            raise _fail("prefixes", f"invalid prefix name {name!r}")
        if not isinstance(url, str) or not url:
            raise _fail(f"prefixes.{name}", "base URL must be a non-empty string")
        prefixes[name] = url
    for reserved, url in ((SD_PREFIX, SD_URL), (INSTANCE_PREFIX, INSTANCE_URL)):
        if prefixes.setdefault(reserved, url) != url:
            raise _fail(f"prefixes.{reserved}", f"prefix is reserved for {url}")
    return prefixes


def _load_tbox(doc: dict, prefixes: dict[str, str]) -> TBox:
    tbox = TBox(prefixes)
    classes = doc.get("classes")
    if not isinstance(classes, list) or not classes:
        raise _fail("classes", "must be a non-empty list")
    for i, name in enumerate(classes):
        tbox.declare_class(_parse_name(name, prefixes, f"classes[{i}]"))

    properties = doc.get("properties")
    if not isinstance(properties, list):
        raise _fail("properties", "must be a list")
    for i, item in enumerate(properties):
        path = f"properties[{i}]"
        if isinstance(item, str):
            item = {"iri": item}
        if not isinstance(item, dict) or "iri" not in item:
            raise _fail(path, "must be a prefixed name or an object with an 'iri' key")
        unknown = set(item) - {"iri", "domain", "range"}
        if unknown:
            raise _fail(path, f"unknown keys {sorted(unknown)}")
        endpoints = {
            side: _parse_name(item[side], prefixes, f"{path}.{side}")
            for side in ("domain", "range")
            if item.get(side) is not None
        }
        try:
            tbox.declare_property(
                _parse_name(item["iri"], prefixes, f"{path}.iri"),
                domain=endpoints.get("domain"),
                range=endpoints.get("range"),
            )
        except RuleweaveError as exc:
            raise _fail(path, str(exc)) from exc
    if BELONGS_TO_CASE not in tbox.properties:
        tbox.declare_property(BELONGS_TO_CASE)

    for sub, super_ in _pair_list(doc, "subclass", prefixes):
        try:
            tbox.add_subclass(sub, super_)
        except RuleweaveError as exc:
            raise _fail("subclass", str(exc)) from exc
    for a, b in _pair_list(doc, "disjoint", prefixes):
        try:
            tbox.add_disjoint(a, b)
        except RuleweaveError as exc:
            raise _fail("disjoint", str(exc)) from exc

    rules = doc.get("rules")
    if not isinstance(rules, list) or not rules:
        raise _fail("rules", "must be a non-empty list")
    seen_names = set()
    for i, item in enumerate(rules):
        path = f"rules[{i}]"
        if not isinstance(item, dict) or set(item) != {"name", "text"}:
            raise _fail(path, "must be an object with exactly 'name' and 'text'")
        name = item["name"]
        if not isinstance(name, str) or not name.strip():
            raise _fail(f"{path}.name", "must be a non-empty string")
        if name in seen_names:
            raise _fail(f"{path}.name", f"duplicate rule name {name!r}")
        seen_names.add(name)
        try:
            rule = parse_rule(name, item["text"])
            for atom in (*rule.antecedent, rule.consequent):
                for term in _atom_terms(atom):
                    if isinstance(term, Iri) and term.prefix not in prefixes:
                        raise _fail(f"{path}.text", f"unknown prefix in term {term}")
            tbox.add_rule(rule)
        except RuleweaveError as exc:
            if isinstance(exc, TaskDocumentError):
                raise
            raise _fail(path, str(exc)) from exc
    return tbox


def _atom_terms(atom: Atom):
    if isinstance(atom, ClassAtom):
        return (atom.term,)
    return (atom.subject, atom.object)


def _load_entities(doc: dict, tbox: TBox, prefixes: dict[str, str]) -> tuple[EntitySpec, ...]:
    raw = doc.get("entities")
    if not isinstance(raw, list) or not raw:
        raise _fail("entities", "must be a non-empty list")
    specs = []
    names = set()
    for i, item in enumerate(raw):
        path = f"entities[{i}]"
        if not isinstance(item, dict):
            raise _fail(path, "must be an object")
        unknown = set(item) - {"name", "class", "description", "required"}
        if unknown:
            raise _fail(path, f"unknown keys {sorted(unknown)}")
        name = _string(item, "name", path)
        if not _PREFIX_NAME_RE.match(name):
            raise _fail(f"{path}.name", f"invalid entity name {name!r}")
        if name in names:
            raise _fail(f"{path}.name", f"duplicate entity name {name!r}")
        names.add(name)
        cls = _parse_name(item.get("class"), prefixes, f"{path}.class")
        if cls not in tbox.classes:
            raise _fail(f"{path}.class", f"class {cls} not declared")
        required = item.get("required")
        if not isinstance(required, bool):
            raise _fail(f"{path}.required", "must be true or false")
        specs.append(EntitySpec(name, cls, _string(item, "description", path), required))
    return tuple(specs)


def _load_assertions(
    doc: dict,
    tbox: TBox,
    prefixes: dict[str, str],
    entity_names: set[str],
) -> tuple[AssertionSpec, ...]:
    raw = doc.get("assertions")
    if not isinstance(raw, list) or not raw:
        raise _fail("assertions", "must be a non-empty list")
    allowed = {
        "name",
        "arity",
        "maps_to",
        "subject",
        "object",
        "description",
        "complement_of",
        "complement_role",
    }
    specs: list[AssertionSpec] = []
    names = set()
    for i, item in enumerate(raw):
        path = f"assertions[{i}]"
        if not isinstance(item, dict):
            raise _fail(path, "must be an object")
        unknown = set(item) - allowed
        if unknown:
            raise _fail(path, f"unknown keys {sorted(unknown)}")
        name = _string(item, "name", path)
        if name in names:
            raise _fail(f"{path}.name", f"duplicate assertion name {name!r}")
        names.add(name)
        arity = item.get("arity")
        if arity not in (UNARY, BINARY):
            raise _fail(f"{path}.arity", f"must be '{UNARY}' or '{BINARY}'")
        maps_to = _parse_name(item.get("maps_to"), prefixes, f"{path}.maps_to")
        if arity == UNARY and maps_to not in tbox.classes:
            raise _fail(f"{path}.maps_to", f"unary spec needs a declared class, got {maps_to}")
        if arity == BINARY and maps_to not in tbox.properties:
            raise _fail(f"{path}.maps_to", f"binary spec needs a declared property, got {maps_to}")
        subject = _string(item, "subject", path)
        if subject not in entity_names:
            raise _fail(f"{path}.subject", f"unknown entity {subject!r}")
        object_entity = item.get("object")
        if arity == BINARY:
            if not isinstance(object_entity, str) or object_entity not in entity_names:
                raise _fail(f"{path}.object", "binary spec must name a declared entity")
        elif object_entity is not None:
            raise _fail(f"{path}.object", "unary spec must not name an object entity")
        role = item.get("complement_role")
        if role is not None and role != "negative":
            raise _fail(f"{path}.complement_role", f"only 'negative' is allowed, got {role!r}")
        if role is not None and item.get("complement_of") is None:
            raise _fail(f"{path}.complement_role", "set on a spec without complement_of")
        complement_of = item.get("complement_of")
        if complement_of is not None and not isinstance(complement_of, str):
            raise _fail(f"{path}.complement_of", "must be an assertion name")
        specs.append(
            AssertionSpec(
                name=name,
                arity=arity,
                maps_to=maps_to,
                subject_entity=subject,
                description=_string(item, "description", path),
                object_entity=object_entity,
                complement_of=complement_of,
                negative=role == "negative",
            )
        )

    by_name = {spec.name: spec for spec in specs}
    for i, spec in enumerate(specs):
        if spec.complement_of is None:
            if spec.negative:
                raise _fail(f"assertions[{i}]", "negative role without a complement pair")
            continue
        other = by_name.get(spec.complement_of)
        if other is None:
            raise _fail(f"assertions[{i}].complement_of", f"no spec named {spec.complement_of!r}")
        if other is spec:
            raise _fail(f"assertions[{i}].complement_of", "spec cannot complement itself")
        if other.complement_of != spec.name:
            raise _fail(
                f"assertions[{i}].complement_of",
                f"{spec.name!r} and {other.name!r} must reference each other",
            )
        if other.arity != spec.arity:
            raise _fail(f"assertions[{i}]", "complement pair members must share an arity")
        if spec.negative == other.negative:
            raise _fail(
                f"assertions[{i}]",
                f"exactly one of {spec.name!r}/{other.name!r} must have complement_role 'negative'",
            )
    return tuple(specs)


def _check_populatable(
    tbox: TBox,
    entity_specs: tuple[EntitySpec, ...],
    assertion_specs: tuple[AssertionSpec, ...],
) -> None:
    """Reject rules containing an atom nothing in the task can ever assert."""
    closure = subclass_closure(tbox)
    classes: set[Iri] = set()
    properties: set[Iri] = {BELONGS_TO_CASE}
    for entity in entity_specs:
        classes |= closure[entity.ontology_class]
    for spec in assertion_specs:
        if spec.arity == UNARY:
            classes |= closure[spec.maps_to]
        else:
            properties.add(spec.maps_to)

    def populatable(atom: Atom) -> bool:
        if isinstance(atom, ClassAtom):
            return atom.cls in classes
        return atom.prop in properties

    pending = list(tbox.rules)
    progress = True
    while progress and pending:
        progress = False
        for rule in list(pending):
            if all(populatable(atom) for atom in rule.antecedent):
                if isinstance(rule.consequent, ClassAtom):
                    classes |= closure[rule.consequent.cls]
                else:
                    properties.add(rule.consequent.prop)
                pending.remove(rule)
                progress = True
    for rule in pending:
        for atom in rule.antecedent:
            if not populatable(atom):
                raise _fail(
                    "rules",
                    f"atom {atom} in rule {rule.name!r} can never be populated "
                    "by any entity or assertion spec",
                )


def load_task(document: Any) -> TaskDefinition:
    """Validate a task document and return the immutable TaskDefinition."""
    if not isinstance(document, dict):
        raise TaskDocumentError("task document must be a JSON object")
    unknown = set(document) - set(_TOP_LEVEL_KEYS) - {"notes"}
    if unknown:
        raise TaskDocumentError(f"unknown top-level keys {sorted(unknown)}")
    for key in _TOP_LEVEL_KEYS:
        if key not in document:
            raise _fail(key, "missing required key")

    task_id = _string(document, "id", "")
    context = _string(document, "context", "")
    prefixes = _load_prefixes(document)
    tbox = _load_tbox(document, prefixes)
    entity_specs = _load_entities(document, tbox, prefixes)
    entity_names = {spec.name for spec in entity_specs}
    assertion_specs = _load_assertions(document, tbox, prefixes, entity_names)

    target = document.get("target")
    if not isinstance(target, dict) or set(target) != {"class", "entity", "labels"}:
        raise _fail("target", "must be an object with 'class', 'entity' and 'labels'")
    target_class = _parse_name(target.get("class"), prefixes, "target.class")
    if target_class not in tbox.classes:
        raise _fail("target.class", f"class {target_class} not declared")
    if not any(
        isinstance(rule.consequent, ClassAtom) and rule.consequent.cls == target_class
        for rule in tbox.rules
    ):
        raise _fail("target.class", f"no rule concludes {target_class}")
    target_entity = target.get("entity")
    if target_entity not in entity_names:
        raise _fail("target.entity", f"unknown entity {target_entity!r}")
    labels = target.get("labels")
    if (
        not isinstance(labels, dict)
        or set(labels) != {"positive", "negative"}
        or not all(isinstance(v, str) and v for v in labels.values())
        or labels["positive"] == labels["negative"]
    ):
        raise _fail("target.labels", "must map 'positive' and 'negative' to distinct strings")

    notes = document.get("notes")
    if notes is not None and not isinstance(notes, str):
        raise _fail("notes", "must be a string when present")

    _check_populatable(tbox, entity_specs, assertion_specs)

    return TaskDefinition(
        id=task_id,
        domain_context=context,
        tbox=tbox,
        entity_specs=entity_specs,
        assertion_specs=assertion_specs,
        target_class=target_class,
        target_entity=target_entity,
        label_map=dict(labels),
        notes=notes,
    )


def load_task_text(text: str) -> TaskDefinition:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TaskDocumentError(f"invalid JSON: {exc}") from exc
    return load_task(document)


def serialize_task(task: TaskDefinition) -> dict:
    """Rebuild the JSON document form; round-trips through load_task."""
    tbox = task.tbox
    properties = []
    for decl in tbox.properties.values():
        entry: dict[str, str] = {"iri": str(decl.iri)}
        if decl.domain is not None:
            entry["domain"] = str(decl.domain)
        if decl.range is not None:
            entry["range"] = str(decl.range)
        properties.append(entry)

    assertions = []
    for spec in task.assertion_specs:
        entry = {
            "name": spec.name,
            "arity": spec.arity,
            "maps_to": str(spec.maps_to),
            "subject": spec.subject_entity,
            "description": spec.description,
        }
        if spec.object_entity is not None:
            entry["object"] = spec.object_entity
        if spec.complement_of is not None:
            entry["complement_of"] = spec.complement_of
        if spec.negative:
            entry["complement_role"] = "negative"
        assertions.append(entry)

    document = {
        "id": task.id,
        "context": task.domain_context,
        "prefixes": dict(tbox.prefixes),
        "classes": [str(c) for c in sorted(tbox.classes)],
        "properties": properties,
        "subclass": [[str(sub), str(super_)] for sub, super_ in tbox.subclass_axioms],
        "disjoint": [[str(a), str(b)] for a, b in tbox.disjoint_axioms],
        "rules": [{"name": rule.name, "text": str(rule)} for rule in tbox.rules],
        "entities": [
            {
                "name": spec.name,
                "class": str(spec.ontology_class),
                "description": spec.description,
                "required": spec.required,
            }
            for spec in task.entity_specs
        ],
        "assertions": assertions,
        "target": {
            "class": str(task.target_class),
            "entity": task.target_entity,
            "labels": dict(task.label_map),
        },
    }
    if task.notes is not None:
        document["notes"] = task.notes
    return document


def effective_assertion_specs(
    task: TaskDefinition, complementary: bool
) -> list[AssertionSpec]:
    """Specs the pipeline actually asks about under the given mode."""
    if complementary:
        return list(task.assertion_specs)
    return [spec for spec in task.assertion_specs if not spec.negative]


def builtin_task_document(task_id: str) -> dict:
    if task_id not in BUILTIN_TASK_IDS:
        raise TaskDocumentError(
            f"unknown builtin task {task_id!r}; available: {', '.join(BUILTIN_TASK_IDS)}"
        )
    payload = resources.files("ruleweave").joinpath(f"data/tasks/{task_id}.json").read_text("utf-8")
    return json.loads(payload)


def builtin_task(task_id: str) -> TaskDefinition:
    return load_task(builtin_task_document(task_id))
