"""Per-instance orchestration of the six experimental conditions.

Two baselines answer from a single prompt (FS, CoT). The decomposed
conditions run entity identification and assertion extraction, then either
hand the populated ABox to the reasoner (SD, SD-Comp) or ask the model for
the final call directly (SD-Direct, SD-Direct-Comp).

Every instance produces an InstanceTrace capturing the extractions, the
reasoner's world when one was built, which rules fired, and the raw
exchanges. Traces serialize to JSON lines; apart from one timestamp in the
file header, identical inputs give byte-identical files.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

from .backends import Backend
from .errors import BackendError, ConfigError, MalformedResponseError, NotExtractable
from .extraction import (
    STEP_COT,
    STEP_FS,
    AssertionExtraction,
    EntityExtraction,
    build_assertion_prompt,
    build_baseline_prompt,
    build_direct_prompt,
    build_entity_prompt,
    case_individual,
    mint_individual,
    parse_answer_response,
    parse_assertion_response,
    parse_cot_response,
    parse_entity_response,
    run_step,
)
from .ontology import ABox, Asserted, Inferred, Iri
from .reasoner import classify, forward_chain
from .tasklib import BELONGS_TO_CASE, BINARY, TaskDefinition, UNARY

OUTCOME_OK = "Ok"
OUTCOME_INCONSISTENT = "Inconsistent"
OUTCOME_NOT_EXTRACTABLE = "NotExtractable"
OUTCOME_ERROR = "Error"

CLASS_PREDICATE = "a"


class Condition(enum.Enum):
    FS = "FS"
    COT = "CoT"
    SD = "SD"
    SD_COMP = "SD-Comp"
    SD_DIRECT = "SD-Direct"
    SD_DIRECT_COMP = "SD-Direct-Comp"

    @property
    def complementary(self) -> bool:
        return self in (Condition.SD_COMP, Condition.SD_DIRECT_COMP)

    @property
    def uses_reasoner(self) -> bool:
        return self in (Condition.SD, Condition.SD_COMP)

    @property
    def is_baseline(self) -> bool:
        return self in (Condition.FS, Condition.COT)


_CONDITION_ALIASES = {
    "fs": Condition.FS,
    "cot": Condition.COT,
    "sd": Condition.SD,
    "sd-comp": Condition.SD_COMP,
    "sd-c": Condition.SD_COMP,
    "sd-direct": Condition.SD_DIRECT,
    "sd-direct-comp": Condition.SD_DIRECT_COMP,
    "sd-direct-c": Condition.SD_DIRECT_COMP,
}


def parse_condition(text: str) -> Condition:
    key = text.strip().lower().replace("_", "-")
    try:
        return _CONDITION_ALIASES[key]
    except KeyError:
        valid = ", ".join(c.value for c in Condition)
        raise ConfigError(f"unknown condition {text!r}; expected one of {valid}") from None


ALL_CONDITIONS = tuple(Condition)


@dataclass
class InstanceTrace:
    instance_id: str
    condition: str
    label: str
    prediction: Optional[str]
    outcome: str
    raw_exchanges: list[dict] = field(default_factory=list)
    entity_extraction: Optional[dict] = None
    assertion_extraction: Optional[dict] = None
    abox_snapshot: Optional[list[dict]] = None
    fired: Optional[list[dict]] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "type": "instance",
            "instance_id": self.instance_id,
            "condition": self.condition,
            "label": self.label,
            "prediction": self.prediction,
            "outcome": self.outcome,
            "error": self.error,
            "entity_extraction": self.entity_extraction,
            "assertion_extraction": self.assertion_extraction,
            "abox_snapshot": self.abox_snapshot,
            "fired": self.fired,
            "raw_exchanges": self.raw_exchanges,
        }


# -- JSON-able views of extraction results -------------------------------------


def _entities_to_dict(entities: EntityExtraction) -> dict:
    return {
        "records": [
            {
                "name": r.name,
                "found": r.found,
                "span": r.span,
                "individual": str(r.individual) if r.individual else None,
                "explanation": r.explanation,
            }
            for r in entities.records
        ]
    }


def _assertions_to_dict(assertions: AssertionExtraction) -> dict:
    return {
        "records": [
            {
                "name": r.name,
                "holds": r.holds,
                "subject": str(r.subject) if r.subject else None,
                "object": str(r.object) if r.object else None,
                "justification": r.justification,
            }
            for r in assertions.records
        ]
    }


def _origin_text(origin) -> str:
    if isinstance(origin, Asserted):
        return f"asserted:{origin.justification}"
    assert isinstance(origin, Inferred)
    return f"inferred:{origin.rule_name}"


def snapshot_abox(abox: ABox) -> list[dict]:
    """Flatten an ABox to origin-tagged triples, class assertions first."""
    triples = []
    for (individual, cls), origin in abox.sorted_class_assertions():
        triples.append(
            {
                "subject": str(individual),
                "predicate": CLASS_PREDICATE,
                "object": str(cls),
                "origin": _origin_text(origin),
            }
        )
    for (subject, prop, obj), origin in abox.sorted_property_assertions():
        triples.append(
            {
                "subject": str(subject),
                "predicate": str(prop),
                "object": str(obj),
                "origin": _origin_text(origin),
            }
        )
    return triples


def render_snapshot(snapshot: list[dict]) -> str:
    lines = [
        "\t".join((t["subject"], t["predicate"], t["object"], t["origin"]))
        for t in snapshot
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def rebuild_asserted_abox(task: TaskDefinition, snapshot: list[dict]) -> ABox:
    """Reconstruct the asserted portion of a snapshot against the task TBox."""
    abox = ABox(task.tbox)
    prefix = "asserted:"
    for triple in snapshot:
        origin = triple["origin"]
        if not origin.startswith(prefix):
            continue
        justification = origin[len(prefix):]
        subject = Iri.parse(triple["subject"])
        if triple["predicate"] == CLASS_PREDICATE:
            abox.assert_class(subject, Iri.parse(triple["object"]), justification)
        else:
            abox.assert_property(
                subject, Iri.parse(triple["predicate"]), Iri.parse(triple["object"]), justification
            )
    return abox


def replay_reasoning(task: TaskDefinition, trace: dict) -> tuple[str, bool]:
    """Re-run only the reasoner over a trace's asserted facts.

    Returns (prediction, consistent); prediction must equal the stored one
    for SD traces, since the symbolic half is deterministic.
    """
    abox = rebuild_asserted_abox(task, trace["abox_snapshot"])
    result = forward_chain(task.tbox, abox)
    target = mint_individual(trace["instance_id"], task.target_entity)
    if not result.consistent:
        return task.negative_label, False
    positive = classify(result, target, task.target_class)
    return task.positive_label if positive else task.negative_label, True


# -- ABox population ------------------------------------------------------------


def populate_abox(
    task: TaskDefinition,
    instance_id: str,
    entities: EntityExtraction,
    assertions: AssertionExtraction,
) -> ABox:
    abox = ABox(task.tbox)
    case = case_individual(instance_id)
    specs = {spec.name: spec for spec in task.assertion_specs}
    for spec in task.entity_specs:
        record = entities.get(spec.name)
        if record.found:
            abox.assert_class(record.individual, spec.ontology_class, record.explanation)
    for spec in task.entity_specs:
        record = entities.get(spec.name)
        if record.found:
            abox.assert_property(
                record.individual,
                BELONGS_TO_CASE,
                case,
                f"entity {spec.name} extracted from instance {instance_id}",
            )
    for record in assertions.records:
        if not record.holds:
            continue
        spec = specs[record.name]
        if spec.arity == UNARY:
            abox.assert_class(record.subject, spec.maps_to, record.justification)
        else:
            abox.assert_property(record.subject, spec.maps_to, record.object, record.justification)
    return abox


# -- condition runners -----------------------------------------------------------


def _labelled(task: TaskDefinition, positive: bool) -> str:
    return task.positive_label if positive else task.negative_label


def _extract(
    task: TaskDefinition,
    instance_id: str,
    text: str,
    backend: Backend,
    complementary: bool,
    model: str,
    temperature: float,
    exchanges: list[dict],
) -> tuple[EntityExtraction, AssertionExtraction]:
    request = build_entity_prompt(
        task, text, instance_id=instance_id, model=model, temperature=temperature
    )
    entities = run_step(
        backend, request, lambda data: parse_entity_response(data, task, instance_id), exchanges
    )
    request = build_assertion_prompt(
        task,
        text,
        entities,
        complementary,
        instance_id=instance_id,
        model=model,
        temperature=temperature,
    )
    assertions = run_step(
        backend,
        request,
        lambda data: parse_assertion_response(data, task, entities, complementary),
        exchanges,
    )
    return entities, assertions


def run_sd(
    task: TaskDefinition,
    instance_id: str,
    text: str,
    label: str,
    backend: Backend,
    complementary: bool,
    model: str = "",
    temperature: float = 0.0,
) -> InstanceTrace:
    condition = (Condition.SD_COMP if complementary else Condition.SD).value
    exchanges: list[dict] = []
    entities: Optional[EntityExtraction] = None
    try:
        entities, assertions = _extract(
            task, instance_id, text, backend, complementary, model, temperature, exchanges
        )
    except NotExtractable as exc:
        return InstanceTrace(
            instance_id=instance_id,
            condition=condition,
            label=label,
            prediction=task.negative_label,
            outcome=OUTCOME_NOT_EXTRACTABLE,
            raw_exchanges=exchanges,
            entity_extraction=_entities_to_dict(entities) if entities else None,
            error=str(exc),
        )
    except (BackendError, MalformedResponseError) as exc:
        return InstanceTrace(
            instance_id=instance_id,
            condition=condition,
            label=label,
            prediction=None,
            outcome=OUTCOME_ERROR,
            raw_exchanges=exchanges,
            entity_extraction=_entities_to_dict(entities) if entities else None,
            error=str(exc),
        )

    abox = populate_abox(task, instance_id, entities, assertions)
    result = forward_chain(task.tbox, abox)
    target = mint_individual(instance_id, task.target_entity)
    if not result.consistent:
        prediction, outcome = task.negative_label, OUTCOME_INCONSISTENT
        error = "; ".join(
            f"{ind} is a member of disjoint classes {a} and {b}"
            for ind, a, b in result.violations
        )
    else:
        prediction = _labelled(task, classify(result, target, task.target_class))
        outcome, error = OUTCOME_OK, None
    return InstanceTrace(
        instance_id=instance_id,
        condition=condition,
        label=label,
        prediction=prediction,
        outcome=outcome,
        raw_exchanges=exchanges,
        entity_extraction=_entities_to_dict(entities),
        assertion_extraction=_assertions_to_dict(assertions),
        abox_snapshot=snapshot_abox(result.abox),
        fired=[
            {"rule": name, "binding": {var: str(value) for var, value in binding.items()}}
            for name, binding in result.fired
        ],
        error=error,
    )


def run_sd_direct(
    task: TaskDefinition,
    instance_id: str,
    text: str,
    label: str,
    backend: Backend,
    complementary: bool,
    model: str = "",
    temperature: float = 0.0,
) -> InstanceTrace:
    condition = (Condition.SD_DIRECT_COMP if complementary else Condition.SD_DIRECT).value
    exchanges: list[dict] = []
    entities: Optional[EntityExtraction] = None
    assertions: Optional[AssertionExtraction] = None
    try:
        entities, assertions = _extract(
            task, instance_id, text, backend, complementary, model, temperature, exchanges
        )
        request = build_direct_prompt(
            task,
            entities,
            assertions,
            complementary,
            instance_id=instance_id,
            model=model,
            temperature=temperature,
        )
        answer = run_step(
            backend, request, lambda data: parse_answer_response(data, task), exchanges
        )
    except NotExtractable as exc:
        return InstanceTrace(
            instance_id=instance_id,
            condition=condition,
            label=label,
            prediction=task.negative_label,
            outcome=OUTCOME_NOT_EXTRACTABLE,
            raw_exchanges=exchanges,
            entity_extraction=_entities_to_dict(entities) if entities else None,
            error=str(exc),
        )
    except (BackendError, MalformedResponseError) as exc:
        return InstanceTrace(
            instance_id=instance_id,
            condition=condition,
            label=label,
            prediction=None,
            outcome=OUTCOME_ERROR,
            raw_exchanges=exchanges,
            entity_extraction=_entities_to_dict(entities) if entities else None,
            assertion_extraction=_assertions_to_dict(assertions) if assertions else None,
            error=str(exc),
        )
    return InstanceTrace(
        instance_id=instance_id,
        condition=condition,
        label=label,
        prediction=answer,
        outcome=OUTCOME_OK,
        raw_exchanges=exchanges,
        entity_extraction=_entities_to_dict(entities),
        assertion_extraction=_assertions_to_dict(assertions),
    )


def run_baseline(
    task: TaskDefinition,
    instance_id: str,
    text: str,
    label: str,
    backend: Backend,
    style: Condition,
    exemplars: list[tuple[str, str]],
    model: str = "",
    temperature: float = 0.0,
) -> InstanceTrace:
    if not style.is_baseline:
        raise ConfigError(f"{style.value} is not a baseline condition")
    step = STEP_COT if style is Condition.COT else STEP_FS
    exchanges: list[dict] = []
    try:
        request = build_baseline_prompt(
            task,
            text,
            step,
            exemplars,
            instance_id=instance_id,
            model=model,
            temperature=temperature,
        )
        if style is Condition.COT:
            _, answer = run_step(
                backend, request, lambda data: parse_cot_response(data, task), exchanges
            )
        else:
            answer = run_step(
                backend, request, lambda data: parse_answer_response(data, task), exchanges
            )
    except (BackendError, MalformedResponseError) as exc:
        return InstanceTrace(
            instance_id=instance_id,
            condition=style.value,
            label=label,
            prediction=None,
            outcome=OUTCOME_ERROR,
            raw_exchanges=exchanges,
            error=str(exc),
        )
    return InstanceTrace(
        instance_id=instance_id,
        condition=style.value,
        label=label,
        prediction=answer,
        outcome=OUTCOME_OK,
        raw_exchanges=exchanges,
    )


def evaluate_instance(
    task: TaskDefinition,
    instance_id: str,
    text: str,
    label: str,
    condition: Condition,
    backend: Backend,
    exemplars: Optional[list[tuple[str, str]]] = None,
    model: str = "",
    temperature: float = 0.0,
) -> InstanceTrace:
    """Run one instance under one condition; never raises for model faults."""
    if condition.is_baseline:
        return run_baseline(
            task,
            instance_id,
            text,
            label,
            backend,
            condition,
            exemplars or [],
            model=model,
            temperature=temperature,
        )
    runner = run_sd if condition.uses_reasoner else run_sd_direct
    return runner(
        task,
        instance_id,
        text,
        label,
        backend,
        condition.complementary,
        model=model,
        temperature=temperature,
    )


# -- trace files -----------------------------------------------------------------


def dump_traces(
    traces: list[InstanceTrace],
    task_id: str,
    condition: Condition,
    model: str,
    timestamp: Optional[str] = None,
) -> str:
    """Render a trace file: a header line then one JSON line per instance."""
    created = timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")
    header = {
        "type": "header",
        "task": task_id,
        "condition": condition.value,
        "model": model,
        "created": created,
    }
    lines = [json.dumps(header, sort_keys=True, ensure_ascii=False)]
    for trace in sorted(traces, key=lambda t: t.instance_id):
        lines.append(json.dumps(trace.to_dict(), sort_keys=True, ensure_ascii=False))
    return "\n".join(lines) + "\n"


def load_traces(path) -> tuple[dict, list[dict]]:
    header = None
    records = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if record.get("type") == "header":
                header = record
            elif record.get("type") == "instance":
                records.append(record)
            else:
                raise ValueError(f"{path}:{line_no}: unknown trace record type")
    if header is None:
        raise ValueError(f"{path}: missing header line")
    return header, records
