"""Deterministic forward chaining over the SWRL subset.

The engine computes the least fixpoint of all rules under conjunctive-match
semantics. A class atom C(x) matches when x is recorded (asserted or
inferred) in any class whose superclass closure contains C; a property atom
matches exact recorded triples. Absent facts never match: there is no
negation-as-failure anywhere in the engine, so the open-world reading of
the rule language is preserved by construction.

Evaluation is semi-naive: each round only considers rule instantiations
that touch at least one fact derived in the previous round (all facts count
as new in the first round). The test suite keeps an independent naive
iterate-to-fixpoint oracle and checks set-equality of the inferred facts on
randomized inputs, so the delta bookkeeping here is not trusted by fiat.

Ordering guarantees, purely so `fired` logs are reproducible: rules are
evaluated in declaration order, candidate bindings for one rule within one
round are applied in sorted order (variables sorted by name, values by Iri),
and a (rule, binding) pair is logged only when it adds a fact that was not
already present. Inconsistency never halts chaining; violations are
collected after the fixpoint and reported in the result.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from .ontology import (
    ABox,
    Atom,
    ClassAtom,
    Inferred,
    Iri,
    PropertyAtom,
    SwrlRule,
    TBox,
    Variable,
)

log = logging.getLogger(__name__)

Binding = dict[str, Iri]


@dataclass
class InferenceResult:
    """Fixpoint output: the enriched ABox plus consistency and firing info."""

    abox: ABox
    consistent: bool
    violations: list[tuple[Iri, Iri, Iri]] = field(default_factory=list)
    fired: list[tuple[str, Binding]] = field(default_factory=list)


def subclass_closure(tbox: TBox) -> dict[Iri, set[Iri]]:
    """Reflexive-transitive superclass map for every declared class."""
    closure: dict[Iri, set[Iri]] = {}
    for cls in tbox.classes:
        seen = {cls}
        frontier = [cls]
        while frontier:
            node = frontier.pop()
            for sub, sup in tbox.subclass_axioms:
                if sub == node and sup not in seen:
                    seen.add(sup)
                    frontier.append(sup)
        closure[cls] = seen
    return closure


def _unify(term, value: Iri, binding: Binding) -> Optional[Binding]:
    """Extend binding so term equals value, or None if impossible."""
    if isinstance(term, Variable):
        bound = binding.get(term.name)
        if bound is None:
            extended = dict(binding)
            extended[term.name] = value
            return extended
        return binding if bound == value else None
    return binding if term == value else None


def _extend(
    atom: Atom,
    binding: Binding,
    members: dict[Iri, set[Iri]],
    pairs: dict[Iri, set[tuple[Iri, Iri]]],
) -> Iterator[Binding]:
    """All extensions of binding that satisfy atom against the given view."""
    if isinstance(atom, ClassAtom):
        population = members.get(atom.cls, frozenset())
        term = atom.term
        if isinstance(term, Variable) and term.name not in binding:
            for individual in sorted(population):
                extended = dict(binding)
                extended[term.name] = individual
                yield extended
        else:
            value = binding[term.name] if isinstance(term, Variable) else term
            if value in population:
                yield binding
    else:
        for subject, obj in sorted(pairs.get(atom.prop, frozenset())):
            extended = _unify(atom.subject, subject, binding)
            if extended is None:
                continue
            extended = _unify(atom.object, obj, extended)
            if extended is not None:
                yield extended


def _rule_bindings(
    rule: SwrlRule,
    full_members: dict[Iri, set[Iri]],
    full_pairs: dict[Iri, set[tuple[Iri, Iri]]],
    delta_members: dict[Iri, set[Iri]],
    delta_pairs: dict[Iri, set[tuple[Iri, Iri]]],
) -> list[Binding]:
    """Complete antecedent matches that touch the delta, sorted for replay."""
    found: dict[tuple, Binding] = {}
    n = len(rule.antecedent)
    for pivot in range(n):
        order = [pivot] + [i for i in range(n) if i != pivot]

        def descend(position: int, binding: Binding) -> None:
            if position == n:
                key = tuple(sorted(binding.items()))
                found.setdefault(key, binding)
                return
            index = order[position]
            atom = rule.antecedent[index]
            if index == pivot:
                view = _extend(atom, binding, delta_members, delta_pairs)
            else:
                view = _extend(atom, binding, full_members, full_pairs)
            for extended in view:
                descend(position + 1, extended)

        descend(0, {})
    return [found[key] for key in sorted(found)]


def _ground(term, binding: Binding) -> Iri:
    if isinstance(term, Variable):
        return binding[term.name]
    return term


def forward_chain(tbox: TBox, abox: ABox) -> InferenceResult:
    """Run all rules to the least fixpoint and check disjointness after."""
    closure = subclass_closure(tbox)
    work = abox.copy()

    full_members: dict[Iri, set[Iri]] = {}
    full_pairs: dict[Iri, set[tuple[Iri, Iri]]] = {}
    delta_memberships: list[tuple[Iri, Iri]] = []
    delta_triples: list[tuple[Iri, Iri, Iri]] = []

    for (individual, cls) in work.class_assertions:
        for super_cls in closure[cls]:
            if individual not in full_members.setdefault(super_cls, set()):
                full_members[super_cls].add(individual)
                delta_memberships.append((individual, super_cls))
    for (subject, prop, obj) in work.property_assertions:
        pair = (subject, obj)
        if pair not in full_pairs.setdefault(prop, set()):
            full_pairs[prop].add(pair)
            delta_triples.append((subject, prop, obj))

    fired: list[tuple[str, Binding]] = []

    while delta_memberships or delta_triples:
        delta_members: dict[Iri, set[Iri]] = {}
        for individual, cls in delta_memberships:
            delta_members.setdefault(cls, set()).add(individual)
        delta_pairs: dict[Iri, set[tuple[Iri, Iri]]] = {}
        for subject, prop, obj in delta_triples:
            delta_pairs.setdefault(prop, set()).add((subject, obj))

        next_memberships: list[tuple[Iri, Iri]] = []
        next_triples: list[tuple[Iri, Iri, Iri]] = []

        for rule in tbox.rules:
            bindings = _rule_bindings(
                rule, full_members, full_pairs, delta_members, delta_pairs
            )
            for binding in bindings:
                head = rule.consequent
                if isinstance(head, ClassAtom):
                    individual = _ground(head.term, binding)
                    if not work._insert_class(individual, head.cls, Inferred(rule.name)):
                        continue
                    fired.append((rule.name, binding))
                    for super_cls in closure[head.cls]:
                        if individual not in full_members.setdefault(super_cls, set()):
                            next_memberships.append((individual, super_cls))
                else:
                    subject = _ground(head.subject, binding)
                    obj = _ground(head.object, binding)
                    if not work._insert_property(
                        subject, head.prop, obj, Inferred(rule.name)
                    ):
                        continue
                    fired.append((rule.name, binding))
                    if (subject, obj) not in full_pairs.setdefault(head.prop, set()):
                        next_triples.append((subject, head.prop, obj))

        # Facts derived this round become visible (and "new") next round.
        for individual, cls in next_memberships:
            full_members.setdefault(cls, set()).add(individual)
        for subject, prop, obj in next_triples:
            full_pairs.setdefault(prop, set()).add((subject, obj))
        delta_memberships = next_memberships
        delta_triples = next_triples

    violations = check_consistency(tbox, work)
    return InferenceResult(
        abox=work,
        consistent=not violations,
        violations=violations,
        fired=fired,
    )


def check_consistency(tbox: TBox, abox: ABox) -> list[tuple[Iri, Iri, Iri]]:
    """One violation per individual per disjoint pair it is a member of both
    sides of, membership expanded through the subclass closure."""
    if not tbox.disjoint_axioms:
        return []
    closure = subclass_closure(tbox)
    violations: list[tuple[Iri, Iri, Iri]] = []
    for individual in sorted(abox.individuals):
        membership: set[Iri] = set()
        for cls in abox.classes_of(individual):
            membership.update(closure[cls])
        for a, b in tbox.disjoint_axioms:
            if a in membership and b in membership:
                violations.append((individual, a, b))
    return violations


def classify(result: InferenceResult, individual: Iri, target_class: Iri) -> bool:
    """True iff the individual's closure-expanded membership holds the target.

    An individual absent from the ABox yields False with a logged warning,
    not an error: the caller may be probing an entity extraction that never
    produced the individual.
    """
    if individual not in result.abox.individuals:
        log.warning("classify: individual %s not present in ABox", individual)
        return False
    return result.abox.is_member(individual, target_class)
