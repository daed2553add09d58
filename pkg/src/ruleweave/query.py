"""Restricted SPARQL-style SELECT queries over a populated ABox.

Supported surface: PREFIX declarations, SELECT with explicit variables, and
a WHERE block holding basic graph patterns. `;` continues the previous
subject, `a` is sugar for class membership, `#` comments run to end of
line. Nothing else: no OPTIONAL, FILTER, literals, or blank nodes.

Class-membership patterns respect the subclass closure, and matching runs
over asserted plus inferred facts, so a query sees exactly what the
reasoner concluded. Names in the query resolve through the query's own
PREFIX table to full URLs, then back through the task's prefix table; a
symbol that does not resolve, or resolves to an undeclared class/property,
makes the query return no rows and logs a warning instead of raising.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .errors import QuerySyntaxError
from .ontology import ABox, Iri, TBox, Variable
from .reasoner import subclass_closure

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<iriref><[^<>\s]*>)
  | (?P<var>\?[A-Za-z][A-Za-z0-9_]*)
  | (?P<pname>(?:[A-Za-z_][A-Za-z0-9_]*)?:[A-Za-z_][A-Za-z0-9_]*)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[{};.:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    line: int
    column: int


@dataclass(frozen=True)
class ResolvedName:
    """A prefixed name from the query, resolved to its full URL."""

    url: str
    rendered: str


PatternTerm = Union[Variable, ResolvedName]
CLASS_KEYWORD = "a"


@dataclass(frozen=True)
class TriplePattern:
    subject: PatternTerm
    predicate: Union[PatternTerm, str]  # the string is always CLASS_KEYWORD
    object: PatternTerm


@dataclass
class Query:
    prefixes: dict[str, str]
    select_vars: list[str]
    patterns: list[TriplePattern] = field(default_factory=list)


def _tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, column = 1, 1
    position = 0
    while position < len(text):
        match = _TOKEN_RE.match(text, position)
        if match is None:
            raise QuerySyntaxError(f"unexpected character {text[position]!r}", line, column)
        kind = match.lastgroup
        value = match.group()
        if kind == "newline":
            line += 1
            column = 1
        else:
            if kind not in ("ws", "comment"):
                tokens.append(Token(kind, value, line, column))
            column += len(value)
        position = match.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.position = 0

    def peek(self) -> Optional[Token]:
        if self.position < len(self.tokens):
            return self.tokens[self.position]
        return None

    def next(self, expectation: str) -> Token:
        token = self.peek()
        if token is None:
            last = self.tokens[-1] if self.tokens else Token("", "", 1, 1)
            raise QuerySyntaxError(f"expected {expectation}, found end of input", last.line, last.column)
        self.position += 1
        return token

    def expect_keyword(self, word: str) -> Token:
        token = self.next(word)
        if token.kind != "name" or token.value.upper() != word:
            raise QuerySyntaxError(f"expected {word}, found {token.value!r}", token.line, token.column)
        return token

    def at_keyword(self, word: str) -> bool:
        token = self.peek()
        return token is not None and token.kind == "name" and token.value.upper() == word


def parse_query(text: str) -> Query:
    """Parse query text; raises QuerySyntaxError with line/column on failure."""
    parser = _Parser(_tokenize(text))
    prefixes: dict[str, str] = {}

    while parser.at_keyword("PREFIX"):
        parser.expect_keyword("PREFIX")
        token = parser.next("prefix name or ':'")
        if token.kind == "name":
            name = token.value
            colon = parser.next("':'")
            if not (colon.kind == "punct" and colon.value == ":"):
                raise QuerySyntaxError("expected ':' after prefix name", colon.line, colon.column)
        elif token.kind == "punct" and token.value == ":":
            name = ""
        else:
            raise QuerySyntaxError(f"bad prefix declaration near {token.value!r}", token.line, token.column)
        iriref = parser.next("<url>")
        if iriref.kind != "iriref":
            raise QuerySyntaxError(f"expected <url>, found {iriref.value!r}", iriref.line, iriref.column)
        prefixes[name] = iriref.value[1:-1]

    parser.expect_keyword("SELECT")
    select_vars: list[str] = []
    while True:
        token = parser.peek()
        if token is not None and token.kind == "var":
            parser.next("variable")
            select_vars.append(token.value[1:])
        else:
            break
    if not select_vars:
        token = parser.peek()
        where = token if token else Token("", "", 1, 1)
        raise QuerySyntaxError("SELECT needs at least one variable", where.line, where.column)

    parser.expect_keyword("WHERE")
    brace = parser.next("'{'")
    if not (brace.kind == "punct" and brace.value == "{"):
        raise QuerySyntaxError(f"expected '{{', found {brace.value!r}", brace.line, brace.column)

    def resolve(token: Token) -> ResolvedName:
        prefix, local = token.value.split(":", 1)
        if prefix not in prefixes:
            raise QuerySyntaxError(f"unknown prefix {prefix!r}:", token.line, token.column)
        return ResolvedName(url=prefixes[prefix] + local, rendered=token.value)

    def parse_term(role: str, allow_a: bool = False) -> Union[PatternTerm, str]:
        token = parser.next(role)
        if token.kind == "var":
            name = token.value[1:]
            if not re.fullmatch(r"[a-z][A-Za-z0-9]*", name):
                raise QuerySyntaxError(
                    f"variable ?{name} must start lowercase and stay alphanumeric",
                    token.line,
                    token.column,
                )
            return Variable(name)
        if token.kind == "pname":
            return resolve(token)
        if allow_a and token.kind == "name" and token.value == "a":
            return CLASS_KEYWORD
        raise QuerySyntaxError(f"expected {role}, found {token.value!r}", token.line, token.column)

    patterns: list[TriplePattern] = []
    while True:
        token = parser.peek()
        if token is None:
            raise QuerySyntaxError("missing '}'", 1, 1)
        if token.kind == "punct" and token.value == "}":
            parser.next("'}'")
            break
        subject = parse_term("subject")
        while True:
            predicate = parse_term("predicate", allow_a=True)
            obj = parse_term("object")
            patterns.append(TriplePattern(subject, predicate, obj))
            separator = parser.peek()
            if separator is not None and separator.kind == "punct" and separator.value == ";":
                parser.next("';'")
                continue
            if separator is not None and separator.kind == "punct" and separator.value == ".":
                parser.next("'.'")
            break

    if not patterns:
        raise QuerySyntaxError("empty pattern list", 1, 1)

    trailing = parser.peek()
    if trailing is not None:
        raise QuerySyntaxError(
            f"unexpected {trailing.value!r} after '}}'", trailing.line, trailing.column
        )

    bound = set()
    for pattern in patterns:
        for term in (pattern.subject, pattern.predicate, pattern.object):
            if isinstance(term, Variable):
                bound.add(term.name)
    for name in select_vars:
        if name not in bound:
            raise QuerySyntaxError(f"select variable ?{name} appears in no pattern", 1, 1)

    return Query(prefixes=prefixes, select_vars=select_vars, patterns=patterns)


BindingRow = tuple[Iri, ...]


def _to_task_iri(name: ResolvedName, tbox: TBox) -> Optional[Iri]:
    """Map a full URL back into the task's prefix table; longest base wins."""
    candidates = []
    for prefix, base in tbox.prefixes.items():
        if name.url.startswith(base):
            local = name.url[len(base):]
            if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", local):
                candidates.append((len(base), prefix, local))
    if not candidates:
        return None
    candidates.sort(key=lambda item: (-item[0], item[1]))
    _, prefix, local = candidates[0]
    return Iri(prefix, local)


def execute(query: Query, tbox: TBox, abox: ABox) -> list[BindingRow]:
    """Natural join of the query's patterns over asserted+inferred facts.

    Rows are deduplicated and sorted. Symbols that cannot be mapped into the
    TBox yield an empty result with a logged warning, per the contract that
    a dangling reference is a data problem, not a crash.
    """
    closure = subclass_closure(tbox)
    members: dict[Iri, set[Iri]] = {}
    membership_pairs: list[tuple[Iri, Iri]] = []
    for (individual, cls) in abox.class_assertions:
        for super_cls in closure[cls]:
            population = members.setdefault(super_cls, set())
            if individual not in population:
                population.add(individual)
                membership_pairs.append((individual, super_cls))
    triples = list(abox.property_assertions)

    resolved_patterns: list[tuple] = []
    for pattern in query.patterns:
        terms = []
        for role, term in (
            ("subject", pattern.subject),
            ("predicate", pattern.predicate),
            ("object", pattern.object),
        ):
            if isinstance(term, ResolvedName):
                iri = _to_task_iri(term, tbox)
                if iri is None:
                    log.warning("query symbol %s resolves to no known namespace", term.rendered)
                    return []
                if role == "predicate" and iri not in tbox.properties:
                    log.warning("query property %s not declared in TBox", iri)
                    return []
                if (
                    role == "object"
                    and pattern.predicate == CLASS_KEYWORD
                    and iri not in tbox.classes
                ):
                    log.warning("query class %s not declared in TBox", iri)
                    return []
                terms.append(iri)
            else:
                terms.append(term)
        resolved_patterns.append(tuple(terms))

    def unify(term, value: Iri, binding: dict[str, Iri]) -> Optional[dict[str, Iri]]:
        if isinstance(term, Variable):
            bound = binding.get(term.name)
            if bound is None:
                extended = dict(binding)
                extended[term.name] = value
                return extended
            return binding if bound == value else None
        return binding if term == value else None

    bindings: list[dict[str, Iri]] = [{}]
    for subject, predicate, obj in resolved_patterns:
        extended: list[dict[str, Iri]] = []
        for binding in bindings:
            if predicate == CLASS_KEYWORD:
                for individual, cls in membership_pairs:
                    after_subject = unify(subject, individual, binding)
                    if after_subject is None:
                        continue
                    complete = unify(obj, cls, after_subject)
                    if complete is not None:
                        extended.append(complete)
            else:
                for s, p, o in triples:
                    after_predicate = unify(predicate, p, binding)
                    if after_predicate is None:
                        continue
                    after_subject = unify(subject, s, after_predicate)
                    if after_subject is None:
                        continue
                    complete = unify(obj, o, after_subject)
                    if complete is not None:
                        extended.append(complete)
        bindings = extended
        if not bindings:
            return []

    rows = {tuple(binding[name] for name in query.select_vars) for binding in bindings}
    return sorted(rows)


def format_tsv(query: Query, rows: list[BindingRow]) -> str:
    """SPARQL-results-style TSV: '?name' header row, prefix:Local cells."""
    header = "\t".join(f"?{name}" for name in query.select_vars)
    lines = [header]
    for row in rows:
        lines.append("\t".join(str(value) for value in row))
    return "\n".join(lines) + "\n"
