"""Prompt construction and structured-response parsing for the two LLM steps.

Step one identifies entities, step two extracts yes/no assertions about them.
Prompt builders are pure functions of their arguments. Parsing is strict; a
malformed reply earns exactly one repair attempt before the instance is given
up as an error.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Callable, Optional, TypeVar

from .backends import Backend, ChatRequest
from .errors import MalformedResponseError, NotExtractable
from .ontology import Iri
from .tasklib import (
    BINARY,
    INSTANCE_PREFIX,
    AssertionSpec,
    TaskDefinition,
    effective_assertion_specs,
)

T = TypeVar("T")

STEP_ENTITY = "entity"
STEP_ASSERTION = "assertion"
STEP_ASSERTION_COMP = "assertion_comp"
STEP_DIRECT = "direct"
STEP_DIRECT_COMP = "direct_comp"
STEP_FS = "fs"
STEP_COT = "cot"


def sanitize_local_name(text: str) -> str:
    cleaned = re.sub(r"[^A-Za-z0-9_]", "_", text)
    if not cleaned or not re.match(r"[A-Za-z_]", cleaned):
        cleaned = "_" + cleaned
    return cleaned


def mint_individual(instance_id: str, entity_name: str) -> Iri:
    return Iri(INSTANCE_PREFIX, sanitize_local_name(f"{instance_id}_{entity_name}"))


def case_individual(instance_id: str) -> Iri:
    return Iri(INSTANCE_PREFIX, sanitize_local_name(instance_id))


@dataclass(frozen=True)
class EntityRecord:
    name: str
    found: bool
    span: Optional[str] = None
    individual: Optional[Iri] = None
    explanation: Optional[str] = None


@dataclass(frozen=True)
class EntityExtraction:
    records: tuple[EntityRecord, ...]

    def get(self, name: str) -> EntityRecord:
        for record in self.records:
            if record.name == name:
                return record
        raise KeyError(name)

    def found(self, name: str) -> bool:
        return self.get(name).found


@dataclass(frozen=True)
class AssertionRecord:
    name: str
    holds: bool
    subject: Optional[Iri]
    justification: str
    object: Optional[Iri] = None


@dataclass(frozen=True)
class AssertionExtraction:
    records: tuple[AssertionRecord, ...]

    def get(self, name: str) -> AssertionRecord:
        for record in self.records:
            if record.name == name:
                return record
        raise KeyError(name)


# -- prompt builders ----------------------------------------------------------


def _require_input(input_text: str) -> str:
    if not isinstance(input_text, str) or not input_text.strip():
        raise ValueError("input text must be non-empty")
    return input_text


def _schema_records(key: str, count: int, fields: dict) -> dict:
    return {
        "type": "object",
        "required": [key],
        "properties": {
            key: {
                "type": "array",
                "minItems": count,
                "maxItems": count,
                "items": {
                    "type": "object",
                    "required": list(fields),
                    "properties": fields,
                },
            }
        },
    }


def _system_preamble(task: TaskDefinition) -> str:
    return (
        "You are a careful annotator feeding a rule-based reasoning system. "
        "Respond with a single JSON object and nothing else.\n\n"
        f"Domain context: {task.domain_context}"
    )


def build_entity_prompt(
    task: TaskDefinition,
    input_text: str,
    *,
    instance_id: str,
    model: str = "",
    temperature: float = 0.0,
) -> ChatRequest:
    _require_input(input_text)
    names = [spec.name for spec in task.entity_specs]
    schema = _schema_records(
        "entities",
        len(names),
        {
            "name": {"enum": names},
            "found": {"type": "boolean"},
            "span": {"type": ["string", "null"]},
            "individual": {"type": ["string", "null"]},
            "explanation": {"type": ["string", "null"]},
        },
    )
    lines = ["Identify the following kinds of entity in the input text."]
    for i, spec in enumerate(task.entity_specs, start=1):
        tag = "required" if spec.required else "optional"
        lines.append(f"{i}. {spec.name} ({tag}): {spec.description}")
    lines.append("")
    lines.append("Input text:")
    lines.append(input_text)
    lines.append("")
    lines.append(
        "Reply with one record per entity kind, in the order listed. "
        "When found is true, fill span (verbatim excerpt), individual (a short "
        "identifier of your choosing) and explanation. Use JSON matching this schema:"
    )
    lines.append(json.dumps(schema, indent=2, ensure_ascii=False))
    return ChatRequest(
        system=_system_preamble(task),
        user="\n".join(lines),
        response_schema=schema,
        model=model,
        instance_id=instance_id,
        step=STEP_ENTITY,
        temperature=temperature,
    )


def askable_specs(
    task: TaskDefinition, entities: EntityExtraction, complementary: bool
) -> tuple[list[AssertionSpec], list[AssertionSpec]]:
    """Split the effective specs into (asked, skipped-for-missing-entity).

    Raises NotExtractable when a required entity was not found at all.
    """
    missing_required = [
        spec.name
        for spec in task.entity_specs
        if spec.required and not entities.found(spec.name)
    ]
    if missing_required:
        raise NotExtractable(
            "required entity not identified: " + ", ".join(missing_required)
        )
    asked, skipped = [], []
    for spec in effective_assertion_specs(task, complementary):
        present = entities.found(spec.subject_entity) and (
            spec.arity != BINARY or entities.found(spec.object_entity)
        )
        (asked if present else skipped).append(spec)
    return asked, skipped


def build_assertion_prompt(
    task: TaskDefinition,
    input_text: str,
    entities: EntityExtraction,
    complementary: bool,
    *,
    instance_id: str,
    model: str = "",
    temperature: float = 0.0,
) -> ChatRequest:
    _require_input(input_text)
    asked, _ = askable_specs(task, entities, complementary)
    names = [spec.name for spec in asked]
    schema = _schema_records(
        "assertions",
        len(names),
        {
            "name": {"enum": names},
            "holds": {"type": "boolean"},
            "justification": {"type": "string", "minLength": 1},
        },
    )
    lines = ["Entities identified in the input:"]
    for spec in task.entity_specs:
        record = entities.get(spec.name)
        if record.found:
            lines.append(f"- {spec.name}: {record.span!r}")
    lines.append("")
    lines.append("Decide whether each of the following holds in the input text.")
    for i, spec in enumerate(asked, start=1):
        if spec.arity == BINARY:
            involves = f"{spec.subject_entity} and {spec.object_entity}"
        else:
            involves = spec.subject_entity
        lines.append(f"{i}. {spec.name} (about {involves}): {spec.description}")
    lines.append("")
    lines.append("Input text:")
    lines.append(input_text)
    lines.append("")
    lines.append(
        "Reply with one record per determination, in the order listed, each with "
        "a boolean holds and a short justification. Use JSON matching this schema:"
    )
    lines.append(json.dumps(schema, indent=2, ensure_ascii=False))
    return ChatRequest(
        system=_system_preamble(task),
        user="\n".join(lines),
        response_schema=schema,
        model=model,
        instance_id=instance_id,
        step=STEP_ASSERTION_COMP if complementary else STEP_ASSERTION,
        temperature=temperature,
    )


def build_direct_prompt(
    task: TaskDefinition,
    entities: EntityExtraction,
    assertions: AssertionExtraction,
    complementary: bool,
    *,
    instance_id: str,
    model: str = "",
    temperature: float = 0.0,
) -> ChatRequest:
    labels = [task.positive_label, task.negative_label]
    schema = {
        "type": "object",
        "required": ["answer"],
        "properties": {"answer": {"enum": labels}},
    }
    lines = ["Extracted entities:"]
    for record in entities.records:
        if record.found:
            lines.append(f"- {record.name}: {record.span!r}")
        else:
            lines.append(f"- {record.name}: not found")
    lines.append("")
    lines.append("Extracted determinations:")
    for record in assertions.records:
        lines.append(f"- {record.name} = {str(record.holds).lower()} ({record.justification})")
    lines.append("")
    lines.append(
        f"Based only on these extracted values, classify the {task.target_entity}: "
        f"answer {labels[0]} or {labels[1]}. "
        'Use JSON matching this schema:'
    )
    lines.append(json.dumps(schema, indent=2, ensure_ascii=False))
    return ChatRequest(
        system=_system_preamble(task),
        user="\n".join(lines),
        response_schema=schema,
        model=model,
        instance_id=instance_id,
        step=STEP_DIRECT_COMP if complementary else STEP_DIRECT,
        temperature=temperature,
    )


def build_baseline_prompt(
    task: TaskDefinition,
    input_text: str,
    style: str,
    exemplars: list[tuple[str, str]],
    *,
    instance_id: str,
    model: str = "",
    temperature: float = 0.0,
) -> ChatRequest:
    _require_input(input_text)
    if style not in (STEP_FS, STEP_COT):
        raise ValueError(f"unknown baseline style {style!r}")
    labels = [task.positive_label, task.negative_label]
    if style == STEP_COT:
        schema = {
            "type": "object",
            "required": ["reasoning", "answer"],
            "properties": {
                "reasoning": {"type": "string", "minLength": 1},
                "answer": {"enum": labels},
            },
        }
        instruction = (
            "Reason step by step about the input, then give your final answer. "
            "Use JSON matching this schema:"
        )
    else:
        schema = {
            "type": "object",
            "required": ["answer"],
            "properties": {"answer": {"enum": labels}},
        }
        instruction = f"Answer {labels[0]} or {labels[1]}. Use JSON matching this schema:"
    lines = []
    for i, (example_text, example_label) in enumerate(exemplars, start=1):
        lines.append(f"Example {i}:")
        lines.append(f"Input: {example_text}")
        lines.append(f"Answer: {example_label}")
        lines.append("")
    lines.append("Now the input to classify:")
    lines.append(input_text)
    lines.append("")
    lines.append(instruction)
    lines.append(json.dumps(schema, indent=2, ensure_ascii=False))
    return ChatRequest(
        system=_system_preamble(task),
        user="\n".join(lines),
        response_schema=schema,
        model=model,
        instance_id=instance_id,
        step=style,
        temperature=temperature,
    )


# -- response parsing ---------------------------------------------------------


def _records_by_name(data, key: str, expected: list[str]) -> dict[str, dict]:
    if not isinstance(data, dict) or not isinstance(data.get(key), list):
        raise MalformedResponseError(f"expected an object with a {key!r} array")
    records = data[key]
    seen: dict[str, dict] = {}
    for record in records:
        if not isinstance(record, dict) or not isinstance(record.get("name"), str):
            raise MalformedResponseError(f"every {key} record needs a string name")
        if record["name"] in seen:
            raise MalformedResponseError(f"duplicate record for {record['name']!r}")
        seen[record["name"]] = record
    if set(seen) != set(expected):
        raise MalformedResponseError(
            f"{key} records must cover exactly {sorted(expected)}, got {sorted(seen)}"
        )
    return seen


def _non_empty_string(record: dict, field_name: str, context: str) -> str:
    value = record.get(field_name)
    if not isinstance(value, str) or not value.strip():
        raise MalformedResponseError(f"{context}: {field_name} must be a non-empty string")
    return value


def parse_entity_response(data, task: TaskDefinition, instance_id: str) -> EntityExtraction:
    names = [spec.name for spec in task.entity_specs]
    by_name = _records_by_name(data, "entities", names)
    minted: list[EntityRecord] = []
    model_ids: set[str] = set()
    for spec in task.entity_specs:
        record = by_name[spec.name]
        found = record.get("found")
        if not isinstance(found, bool):
            raise MalformedResponseError(f"{spec.name}: found must be a boolean")
        if not found:
            minted.append(EntityRecord(name=spec.name, found=False))
            continue
        span = _non_empty_string(record, "span", spec.name)
        explanation = _non_empty_string(record, "explanation", spec.name)
        model_id = _non_empty_string(record, "individual", spec.name)
        if model_id in model_ids:
            raise MalformedResponseError(f"individual id {model_id!r} used twice")
        model_ids.add(model_id)
        minted.append(
            EntityRecord(
                name=spec.name,
                found=True,
                span=span,
                individual=mint_individual(instance_id, spec.name),
                explanation=explanation,
            )
        )
    return EntityExtraction(records=tuple(minted))


def parse_assertion_response(
    data,
    task: TaskDefinition,
    entities: EntityExtraction,
    complementary: bool,
) -> AssertionExtraction:
    asked, skipped = askable_specs(task, entities, complementary)
    by_name = _records_by_name(data, "assertions", [spec.name for spec in asked])
    records: list[AssertionRecord] = []
    for spec in asked:
        raw = by_name[spec.name]
        holds = raw.get("holds")
        if not isinstance(holds, bool):
            raise MalformedResponseError(f"{spec.name}: holds must be a boolean")
        records.append(
            AssertionRecord(
                name=spec.name,
                holds=holds,
                subject=entities.get(spec.subject_entity).individual,
                object=(
                    entities.get(spec.object_entity).individual
                    if spec.arity == BINARY
                    else None
                ),
                justification=_non_empty_string(raw, "justification", spec.name),
            )
        )
    for spec in skipped:
        missing = [
            name
            for name in (spec.subject_entity, spec.object_entity)
            if name is not None and not entities.found(name)
        ]
        records.append(
            AssertionRecord(
                name=spec.name,
                holds=False,
                subject=entities.get(spec.subject_entity).individual,
                justification="not asked: " + ", ".join(missing) + " not identified",
            )
        )
    order = {spec.name: i for i, spec in enumerate(effective_assertion_specs(task, complementary))}
    records.sort(key=lambda record: order[record.name])
    return AssertionExtraction(records=tuple(records))


def parse_answer_response(data, task: TaskDefinition) -> str:
    if not isinstance(data, dict):
        raise MalformedResponseError("expected a JSON object with an answer")
    answer = data.get("answer")
    if not isinstance(answer, str):
        raise MalformedResponseError("answer must be a string")
    answer = answer.strip()
    if answer not in (task.positive_label, task.negative_label):
        raise MalformedResponseError(
            f"answer must be {task.positive_label!r} or {task.negative_label!r}, got {answer!r}"
        )
    return answer


def parse_cot_response(data, task: TaskDefinition) -> tuple[str, str]:
    if not isinstance(data, dict):
        raise MalformedResponseError("expected a JSON object")
    reasoning = _non_empty_string(data, "reasoning", "chain of thought")
    return reasoning, parse_answer_response(data, task)


# -- request driving ----------------------------------------------------------


def repair_request(request: ChatRequest, error: MalformedResponseError) -> ChatRequest:
    note = (
        f"Your previous reply could not be used: {error}. "
        "Reply again with a single JSON object that matches the schema exactly."
    )
    return ChatRequest(
        system=request.system,
        user=f"{request.user}\n\n{note}",
        response_schema=request.response_schema,
        model=request.model,
        instance_id=request.instance_id,
        step=f"{request.step}_repair",
        temperature=request.temperature,
    )


def run_step(
    backend: Backend,
    request: ChatRequest,
    parse: Callable[[object], T],
    exchanges: list[dict],
) -> T:
    """Issue a request, parse it, and retry once with a repair prompt.

    Raw (digest, response) pairs are appended to ``exchanges`` as they happen,
    so the caller keeps them even when this raises.
    """
    response = backend.complete(request)
    exchanges.append({"digest": request.digest(), "response": response.text})
    try:
        if response.data is None:
            raise MalformedResponseError("reply is not valid JSON")
        return parse(response.data)
    except MalformedResponseError as first_error:
        retry = repair_request(request, first_error)
        response = backend.complete(retry)
        exchanges.append({"digest": retry.digest(), "response": response.text})
        if response.data is None:
            raise MalformedResponseError(
                f"step {request.step}: reply is not valid JSON after repair"
            ) from first_error
        return parse(response.data)
