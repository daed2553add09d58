"""In-memory TBox/ABox model.

The TBox holds classes, object properties (with optional domain/range),
subclass and disjointness axioms, and Horn rules over class/property atoms.
The ABox holds individuals plus class-membership and property assertions,
each tagged with an origin: either Asserted (carrying a natural-language
justification) or Inferred (carrying the rule name that produced it).

Identifiers are short prefix:Local pairs; a prefix table maps prefixes to
base URLs only when something needs full URLs (queries, serialization).

One deliberate deviation from OWL semantics: declared property domains and
ranges are validated eagerly when an assertion is added through the public
API, instead of being used as inference axioms. Population bugs surface at
the offending assertion rather than as downstream misclassification.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Optional, Union

from .errors import (
    DisjointnessError,
    DomainRangeError,
    IriError,
    OntologyError,
    SubclassCycleError,
    UndeclaredError,
    UnsafeRuleError,
)

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_VAR_RE = re.compile(r"[a-z][A-Za-z0-9]*\Z")

JUSTIFICATION_LIMIT = 4096  # UTF-8 bytes
_TRUNCATION_MARKER = "...[truncated]"


def truncate_justification(text: str) -> str:
    """Cap a justification at JUSTIFICATION_LIMIT bytes, marking the cut."""
    raw = text.encode("utf-8")
    if len(raw) <= JUSTIFICATION_LIMIT:
        return text
    keep = JUSTIFICATION_LIMIT - len(_TRUNCATION_MARKER.encode("utf-8"))
    clipped = raw[:keep].decode("utf-8", errors="ignore")
    return clipped + _TRUNCATION_MARKER


@dataclass(frozen=True, order=True)
class Iri:
    """A prefix:Local identifier. Ordering is (prefix, local), used anywhere
    the package promises deterministic iteration."""

    prefix: str
    local: str

    def __post_init__(self):
        if not self.prefix or not _NAME_RE.match(self.prefix):
            raise IriError(f"bad prefix in {self.prefix!r}:{self.local!r}")
        if not self.local or not _NAME_RE.match(self.local):
            raise IriError(f"bad local name in {self.prefix!r}:{self.local!r}")

    def __str__(self) -> str:
        return f"{self.prefix}:{self.local}"

    @classmethod
    def parse(cls, text: str) -> "Iri":
        if not isinstance(text, str) or ":" not in text:
            raise IriError(f"expected prefix:Local, got {text!r}")
        prefix, local = text.split(":", 1)
        return cls(prefix, local)


@dataclass(frozen=True, order=True)
class Variable:
    """A rule/query variable; stored without the leading '?'."""

    name: str

    def __post_init__(self):
        if not _VAR_RE.match(self.name):
            raise UnsafeRuleError(f"bad variable name ?{self.name!r}")

    def __str__(self) -> str:
        return f"?{self.name}"


Term = Union[Variable, Iri]


@dataclass(frozen=True)
class ClassAtom:
    cls: Iri
    term: Term

    def __str__(self) -> str:
        return f"{self.cls}({self.term})"


@dataclass(frozen=True)
class PropertyAtom:
    prop: Iri
    subject: Term
    object: Term

    def __str__(self) -> str:
        return f"{self.prop}({self.subject}, {self.object})"


Atom = Union[ClassAtom, PropertyAtom]


def atom_variables(atom: Atom) -> Iterator[Variable]:
    if isinstance(atom, ClassAtom):
        terms = (atom.term,)
    else:
        terms = (atom.subject, atom.object)
    for term in terms:
        if isinstance(term, Variable):
            yield term


@dataclass(frozen=True)
class SwrlRule:
    """A Horn rule: conjunction of atoms implies a single atom.

    Safety is checked at construction: every consequent variable must be
    bound by the antecedent, otherwise forward chaining could invent values.
    """

    name: str
    antecedent: tuple[Atom, ...]
    consequent: Atom

    def __post_init__(self):
        if not self.name:
            raise UnsafeRuleError("rule name must be non-empty")
        if not self.antecedent:
            raise UnsafeRuleError(f"rule {self.name!r} has an empty antecedent")
        bound = {v for atom in self.antecedent for v in atom_variables(atom)}
        for v in atom_variables(self.consequent):
            if v not in bound:
                raise UnsafeRuleError(
                    f"rule {self.name!r}: consequent variable {v} not bound in antecedent"
                )

    def __str__(self) -> str:
        body = " ^ ".join(str(a) for a in self.antecedent)
        return f"{body} -> {self.consequent}"


@dataclass(frozen=True)
class PropertyDecl:
    iri: Iri
    domain: Optional[Iri] = None
    range: Optional[Iri] = None


@dataclass(frozen=True)
class Asserted:
    """Origin of a fact added by population; justification is required prose."""

    justification: str

    def __post_init__(self):
        if not self.justification:
            raise OntologyError("Asserted origin requires a non-empty justification")
        object.__setattr__(
            self, "justification", truncate_justification(self.justification)
        )


@dataclass(frozen=True)
class Inferred:
    rule_name: str


Origin = Union[Asserted, Inferred]


class TBox:
    """Terminology: classes, properties, axioms, rules, and the prefix table."""

    def __init__(self, prefixes: Optional[dict[str, str]] = None):
        self.prefixes: dict[str, str] = dict(prefixes or {})
        self.classes: set[Iri] = set()
        self.properties: dict[Iri, PropertyDecl] = {}
        self.subclass_axioms: list[tuple[Iri, Iri]] = []
        self.disjoint_axioms: list[tuple[Iri, Iri]] = []
        self.rules: list[SwrlRule] = []

    # -- declarations ------------------------------------------------------

    def declare_class(self, iri: Iri) -> None:
        self._require_iri(iri)
        self.classes.add(iri)

    def declare_property(
        self,
        iri: Iri,
        domain: Optional[Iri] = None,
        range: Optional[Iri] = None,
    ) -> None:
        self._require_iri(iri)
        for endpoint, label in ((domain, "domain"), (range, "range")):
            if endpoint is not None and endpoint not in self.classes:
                raise UndeclaredError(f"{label} class {endpoint} of {iri} not declared")
        self.properties[iri] = PropertyDecl(iri, domain, range)

    def add_subclass(self, sub: Iri, super_: Iri) -> None:
        for c in (sub, super_):
            if c not in self.classes:
                raise UndeclaredError(f"subclass axiom references undeclared class {c}")
        if sub == super_:
            raise SubclassCycleError(f"self-loop {sub} subClassOf {sub} is forbidden")
        if sub in self._reachable(super_):
            raise SubclassCycleError(f"{sub} subClassOf {super_} would close a cycle")
        edge = (sub, super_)
        if edge in self.subclass_axioms:
            return
        self.subclass_axioms.append(edge)
        try:
            self._check_disjoint_axioms()
        except DisjointnessError:
            self.subclass_axioms.remove(edge)
            raise

    def add_disjoint(self, a: Iri, b: Iri) -> None:
        for c in (a, b):
            if c not in self.classes:
                raise UndeclaredError(f"disjointness axiom references undeclared class {c}")
        if a == b:
            raise DisjointnessError(f"{a} cannot be disjoint with itself")
        pair = (a, b) if a <= b else (b, a)
        if pair not in self.disjoint_axioms:
            self.disjoint_axioms.append(pair)
        try:
            self._check_disjoint_axioms()
        except DisjointnessError:
            self.disjoint_axioms.remove(pair)
            raise

    def add_rule(self, rule: SwrlRule) -> None:
        for atom in (*rule.antecedent, rule.consequent):
            if isinstance(atom, ClassAtom):
                if atom.cls not in self.classes:
                    raise UndeclaredError(f"rule {rule.name!r} uses undeclared class {atom.cls}")
            else:
                if atom.prop not in self.properties:
                    raise UndeclaredError(
                        f"rule {rule.name!r} uses undeclared property {atom.prop}"
                    )
        self.rules.append(rule)

    # -- queries over the hierarchy ----------------------------------------

    def superclasses(self, cls: Iri) -> set[Iri]:
        """Reflexive-transitive superclass set of one class."""
        return self._reachable(cls)

    def _reachable(self, start: Iri) -> set[Iri]:
        seen = {start}
        frontier = [start]
        while frontier:
            node = frontier.pop()
            for sub, sup in self.subclass_axioms:
                if sub == node and sup not in seen:
                    seen.add(sup)
                    frontier.append(sup)
        return seen

    def _check_disjoint_axioms(self) -> None:
        for a, b in self.disjoint_axioms:
            if b in self._reachable(a) or a in self._reachable(b):
                raise DisjointnessError(
                    f"disjoint({a}, {b}) contradicts the subclass hierarchy"
                )

    def _require_iri(self, iri: Iri) -> None:
        if not isinstance(iri, Iri):
            raise IriError(f"expected an Iri, got {type(iri).__name__}")

    # -- equality (round-trip tests) ----------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TBox):
            return NotImplemented
        return (
            self.prefixes == other.prefixes
            and self.classes == other.classes
            and self.properties == other.properties
            and sorted(self.subclass_axioms) == sorted(other.subclass_axioms)
            and sorted(self.disjoint_axioms) == sorted(other.disjoint_axioms)
            and self.rules == other.rules
        )

    def __repr__(self) -> str:
        return (
            f"TBox(classes={len(self.classes)}, properties={len(self.properties)}, "
            f"rules={len(self.rules)})"
        )


class ABox:
    """Assertions about individuals, validated against a companion TBox.

    Duplicate keys keep the first origin; asserting the same fact twice is
    a no-op, not an error. One ABox belongs to one evaluation instance and
    is never shared across threads.
    """

    def __init__(self, tbox: TBox):
        self.tbox = tbox
        self.individuals: set[Iri] = set()
        self.class_assertions: dict[tuple[Iri, Iri], Origin] = {}
        self.property_assertions: dict[tuple[Iri, Iri, Iri], Origin] = {}

    # -- public, validated entry points -------------------------------------

    def assert_class(self, individual: Iri, cls: Iri, justification: str) -> None:
        if cls not in self.tbox.classes:
            raise UndeclaredError(f"class {cls} not declared in TBox")
        self._insert_class(individual, cls, Asserted(justification))

    def assert_property(
        self, subject: Iri, prop: Iri, obj: Iri, justification: str
    ) -> None:
        decl = self.tbox.properties.get(prop)
        if decl is None:
            raise UndeclaredError(f"property {prop} not declared in TBox")
        if decl.domain is not None and not self.is_member(subject, decl.domain):
            raise DomainRangeError(
                f"{subject} is not a {decl.domain}: domain of {prop} violated"
            )
        if decl.range is not None and not self.is_member(obj, decl.range):
            raise DomainRangeError(
                f"{obj} is not a {decl.range}: range of {prop} violated"
            )
        self._insert_property(subject, prop, obj, Asserted(justification))

    # -- raw insertion: reasoner, snapshot restore, and fact-set test rigs --

    def _insert_class(self, individual: Iri, cls: Iri, origin: Origin) -> bool:
        if cls not in self.tbox.classes:
            raise UndeclaredError(f"class {cls} not declared in TBox")
        key = (individual, cls)
        self.individuals.add(individual)
        if key in self.class_assertions:
            return False
        self.class_assertions[key] = origin
        return True

    def _insert_property(
        self, subject: Iri, prop: Iri, obj: Iri, origin: Origin
    ) -> bool:
        if prop not in self.tbox.properties:
            raise UndeclaredError(f"property {prop} not declared in TBox")
        key = (subject, prop, obj)
        self.individuals.add(subject)
        self.individuals.add(obj)
        if key in self.property_assertions:
            return False
        self.property_assertions[key] = origin
        return True

    # -- lookups -------------------------------------------------------------

    def classes_of(self, individual: Iri) -> set[Iri]:
        """Directly recorded classes (asserted or inferred), no closure."""
        return {cls for (ind, cls) in self.class_assertions if ind == individual}

    def is_member(self, individual: Iri, cls: Iri) -> bool:
        """Membership with subclass closure over recorded classes."""
        return any(
            cls in self.tbox.superclasses(direct)
            for direct in self.classes_of(individual)
        )

    def copy(self) -> "ABox":
        dup = ABox(self.tbox)
        dup.individuals = set(self.individuals)
        dup.class_assertions = dict(self.class_assertions)
        dup.property_assertions = dict(self.property_assertions)
        return dup

    def sorted_class_assertions(self):
        return sorted(self.class_assertions.items())

    def sorted_property_assertions(self):
        return sorted(self.property_assertions.items())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ABox):
            return NotImplemented
        return (
            self.individuals == other.individuals
            and self.class_assertions == other.class_assertions
            and self.property_assertions == other.property_assertions
        )

    def __repr__(self) -> str:
        return (
            f"ABox(individuals={len(self.individuals)}, "
            f"classes={len(self.class_assertions)}, "
            f"properties={len(self.property_assertions)})"
        )
