"""Condition orchestration, traces, and reasoning replay."""

from __future__ import annotations

import json

import pytest

from ruleweave.backends import ScriptedBackend
from ruleweave.errors import ConfigError
from ruleweave.ontology import Iri
from ruleweave.pipeline import (
    Condition,
    dump_traces,
    evaluate_instance,
    load_traces,
    parse_condition,
    populate_abox,
    rebuild_asserted_abox,
    render_snapshot,
    replay_reasoning,
    run_baseline,
    run_sd,
    run_sd_direct,
    snapshot_abox,
)
from ruleweave.extraction import parse_assertion_response, parse_entity_response
from ruleweave.tasklib import BELONGS_TO_CASE, builtin_task

from .test_extraction import SAMPLE_TEXT, assertion_reply, entity_reply


@pytest.fixture(scope="module")
def hearsay():
    return builtin_task("hearsay")


@pytest.fixture(scope="module")
def eligibility():
    return builtin_task("clinical_eligibility")


def hearsay_backend(
    instance_id="t1",
    proves=True,
    out_of_court=True,
    in_court=None,
    direct_answer="Yes",
    entity_text=None,
):
    """Scripted responses for one hearsay instance, all steps."""
    plain = {
        "IsOutOfCourt": out_of_court,
        "HasAssertion": True,
        "IntroducedForLegalIssue": True,
        "ProvesTruthOfAssertion": proves,
    }
    comp = dict(plain)
    comp["IsInCourt"] = (not out_of_court) if in_court is None else in_court
    return ScriptedBackend(
        {
            (instance_id, "entity"): entity_text or entity_reply(),
            (instance_id, "assertion"): assertion_reply(plain),
            (instance_id, "assertion_comp"): assertion_reply(comp),
            (instance_id, "direct"): json.dumps({"answer": direct_answer}),
            (instance_id, "direct_comp"): json.dumps({"answer": direct_answer}),
            (instance_id, "fs"): json.dumps({"answer": direct_answer}),
            (instance_id, "cot"): json.dumps({"reasoning": "steps", "answer": direct_answer}),
        }
    )


# -- conditions -----------------------------------------------------------------


def test_condition_aliases():
    assert parse_condition("sd") is Condition.SD
    assert parse_condition("SD-C") is Condition.SD_COMP
    assert parse_condition("sd_comp") is Condition.SD_COMP
    assert parse_condition("SD-Direct-C") is Condition.SD_DIRECT_COMP
    assert parse_condition("CoT") is Condition.COT
    with pytest.raises(ConfigError, match="unknown condition"):
        parse_condition("few-shot")


def test_condition_flags():
    assert Condition.SD.uses_reasoner and Condition.SD_COMP.uses_reasoner
    assert not Condition.SD_DIRECT.uses_reasoner
    assert Condition.SD_COMP.complementary and Condition.SD_DIRECT_COMP.complementary
    assert not Condition.SD.complementary
    assert Condition.FS.is_baseline and Condition.COT.is_baseline
    assert not Condition.SD.is_baseline


# -- SD -------------------------------------------------------------------------


def test_run_sd_positive(hearsay):
    trace = run_sd(hearsay, "t1", SAMPLE_TEXT, "Yes", hearsay_backend(), False)
    assert trace.prediction == "Yes"
    assert trace.outcome == "Ok"
    assert trace.error is None
    assert trace.fired and trace.fired[0]["rule"] == "hearsay_definition"
    assert any(t["origin"] == "inferred:hearsay_definition" for t in trace.abox_snapshot)
    assert trace.entity_extraction["records"][0]["individual"] == "inst:t1_Statement"
    assert len(trace.raw_exchanges) == 2


def test_run_sd_blocked_antecedent(hearsay):
    trace = run_sd(hearsay, "t1", SAMPLE_TEXT, "No", hearsay_backend(proves=False), False)
    assert trace.prediction == "No"
    assert trace.outcome == "Ok"
    assert trace.fired == []


def test_run_sd_out_of_court_false(hearsay):
    trace = run_sd(hearsay, "t1", SAMPLE_TEXT, "No", hearsay_backend(out_of_court=False), False)
    assert (trace.prediction, trace.outcome) == ("No", "Ok")


def test_run_sd_complementary_contradiction_is_inconsistent(eligibility):
    backend = ScriptedBackend(
        {
            ("n1", "entity"): json.dumps(
                {
                    "entities": [
                        {
                            "name": "Statement",
                            "found": True,
                            "span": "the patient is excluded",
                            "individual": "s",
                            "explanation": "candidate statement",
                        },
                        {
                            "name": "Criteria",
                            "found": True,
                            "span": "adults with prior treatment",
                            "individual": "c",
                            "explanation": "premise",
                        },
                    ]
                }
            ),
            ("n1", "assertion_comp"): assertion_reply(
                {"FollowsFromPremise": True, "StatementConflictsWithPremise": True}
            ),
        }
    )
    trace = run_sd(eligibility, "n1", "some premise and statement", "No", backend, True)
    assert trace.outcome == "Inconsistent"
    assert trace.prediction == "No"
    assert "disjoint" in trace.error
    assert trace.abox_snapshot is not None


def test_run_sd_not_extractable(hearsay):
    backend = ScriptedBackend({("t1", "entity"): entity_reply(statement=False)})
    trace = run_sd(hearsay, "t1", SAMPLE_TEXT, "No", backend, False)
    assert trace.outcome == "NotExtractable"
    assert trace.prediction == "No"
    assert "Statement" in trace.error
    assert trace.assertion_extraction is None
    assert trace.abox_snapshot is None


def test_run_sd_error_outcome(hearsay):
    backend = ScriptedBackend({("t1", "entity"): "garbage with no braces"})
    trace = run_sd(hearsay, "t1", SAMPLE_TEXT, "Yes", backend, False)
    assert trace.outcome == "Error"
    assert trace.prediction is None
    assert len(trace.raw_exchanges) == 2


def test_run_sd_repair_recovers(hearsay):
    mapping = {
        ("t1", "entity"): "hold on",
        ("t1", "entity_repair"): entity_reply(),
        ("t1", "assertion"): assertion_reply(
            {
                "IsOutOfCourt": True,
                "HasAssertion": True,
                "IntroducedForLegalIssue": True,
                "ProvesTruthOfAssertion": True,
            }
        ),
    }
    trace = run_sd(hearsay, "t1", SAMPLE_TEXT, "Yes", ScriptedBackend(mapping), False)
    assert trace.outcome == "Ok"
    assert trace.prediction == "Yes"
    assert len(trace.raw_exchanges) == 3


# -- SD-Direct ------------------------------------------------------------------


def test_sd_direct_diverges_from_reasoner_only_at_the_final_call(hearsay):
    backend = hearsay_backend(direct_answer="No")
    sd = run_sd(hearsay, "t1", SAMPLE_TEXT, "Yes", backend, False)
    direct = run_sd_direct(hearsay, "t1", SAMPLE_TEXT, "Yes", backend, False)
    assert sd.prediction == "Yes"
    assert direct.prediction == "No"
    assert direct.entity_extraction == sd.entity_extraction
    assert direct.assertion_extraction == sd.assertion_extraction
    assert direct.abox_snapshot is None and direct.fired is None
    assert direct.outcome == "Ok"


def test_sd_and_sd_direct_share_extraction_prompts(hearsay):
    class Spy:
        def __init__(self, inner):
            self.inner = inner
            self.requests = []

        def complete(self, request):
            self.requests.append(request)
            return self.inner.complete(request)

    for complementary in (False, True):
        spy_sd = Spy(hearsay_backend())
        spy_direct = Spy(hearsay_backend())
        run_sd(hearsay, "t1", SAMPLE_TEXT, "Yes", spy_sd, complementary)
        run_sd_direct(hearsay, "t1", SAMPLE_TEXT, "Yes", spy_direct, complementary)
        assert spy_sd.requests == spy_direct.requests[:2]
        assert len(spy_direct.requests) == 3


def test_sd_direct_not_extractable(hearsay):
    backend = ScriptedBackend({("t1", "entity"): entity_reply(statement=False)})
    trace = run_sd_direct(hearsay, "t1", SAMPLE_TEXT, "No", backend, False)
    assert trace.outcome == "NotExtractable"
    assert trace.prediction == "No"


def test_sd_direct_malformed_final_call_is_an_error(hearsay):
    backend = hearsay_backend()
    mapping = dict(backend._responses)
    mapping[("t1", "direct")] = "I think yes?"
    trace = run_sd_direct(hearsay, "t1", SAMPLE_TEXT, "Yes", ScriptedBackend(mapping), False)
    assert trace.outcome == "Error"
    assert trace.prediction is None
    assert trace.assertion_extraction is not None


# -- baselines ------------------------------------------------------------------


def test_run_baseline_fs(hearsay):
    exemplars = [(f"scenario {i}", "Yes") for i in range(5)]
    trace = run_baseline(
        hearsay, "t1", SAMPLE_TEXT, "Yes", hearsay_backend(), Condition.FS, exemplars
    )
    assert trace.prediction == "Yes"
    assert trace.condition == "FS"
    assert trace.entity_extraction is None
    assert trace.abox_snapshot is None
    assert len(trace.raw_exchanges) == 1


def test_run_baseline_cot_repair(hearsay):
    mapping = {
        ("t1", "cot"): json.dumps({"answer": "No"}),
        ("t1", "cot_repair"): json.dumps({"reasoning": "because", "answer": "No"}),
    }
    trace = run_baseline(
        hearsay, "t1", SAMPLE_TEXT, "No", ScriptedBackend(mapping), Condition.COT, []
    )
    assert trace.prediction == "No"
    assert len(trace.raw_exchanges) == 2


def test_run_baseline_rejects_non_baseline(hearsay):
    with pytest.raises(ConfigError):
        run_baseline(hearsay, "t1", SAMPLE_TEXT, "Yes", hearsay_backend(), Condition.SD, [])


def test_evaluate_instance_dispatch(hearsay):
    backend = hearsay_backend()
    for condition, has_snapshot in [
        (Condition.FS, False),
        (Condition.COT, False),
        (Condition.SD, True),
        (Condition.SD_COMP, True),
        (Condition.SD_DIRECT, False),
        (Condition.SD_DIRECT_COMP, False),
    ]:
        trace = evaluate_instance(
            hearsay, "t1", SAMPLE_TEXT, "Yes", condition, backend, exemplars=[]
        )
        assert trace.condition == condition.value
        assert (trace.abox_snapshot is not None) == has_snapshot, condition
        assert trace.prediction == "Yes"


# -- ABox population and snapshots ------------------------------------------------


def extractions(hearsay):
    entities = parse_entity_response(json.loads(entity_reply()), hearsay, "t1")
    assertions = parse_assertion_response(
        json.loads(
            assertion_reply(
                {
                    "IsOutOfCourt": True,
                    "HasAssertion": True,
                    "IntroducedForLegalIssue": True,
                    "ProvesTruthOfAssertion": True,
                }
            )
        ),
        hearsay,
        entities,
        False,
    )
    return entities, assertions


def test_populate_abox_links_entities_to_case(hearsay):
    entities, assertions = extractions(hearsay)
    abox = populate_abox(hearsay, "t1", entities, assertions)
    case = Iri("inst", "t1")
    for name in ("Statement", "Assertion", "LegalIssue"):
        key = (Iri("inst", f"t1_{name}"), BELONGS_TO_CASE, case)
        assert key in abox.property_assertions


def test_populate_abox_asserts_spec_facts(hearsay):
    entities, assertions = extractions(hearsay)
    abox = populate_abox(hearsay, "t1", entities, assertions)
    statement = Iri("inst", "t1_Statement")
    assert (statement, Iri("h", "OutOfCourtStatement")) in abox.class_assertions
    assert (
        statement,
        Iri("h", "hasAssertion"),
        Iri("inst", "t1_Assertion"),
    ) in abox.property_assertions


def test_snapshot_rebuild_round_trip(hearsay):
    entities, assertions = extractions(hearsay)
    abox = populate_abox(hearsay, "t1", entities, assertions)
    rebuilt = rebuild_asserted_abox(hearsay, snapshot_abox(abox))
    assert rebuilt == abox


def test_render_snapshot_is_tab_separated(hearsay):
    entities, assertions = extractions(hearsay)
    abox = populate_abox(hearsay, "t1", entities, assertions)
    text = render_snapshot(snapshot_abox(abox))
    first = text.splitlines()[0].split("\t")
    assert len(first) == 4
    assert first[1] == "a"
    assert first[3].startswith("asserted:")


def test_replay_reasoning_reproduces_predictions(hearsay, eligibility):
    cases = [
        (hearsay, run_sd(hearsay, "t1", SAMPLE_TEXT, "Yes", hearsay_backend(), False)),
        (
            hearsay,
            run_sd(hearsay, "t2", SAMPLE_TEXT, "No", hearsay_backend("t2", proves=False), False),
        ),
        (
            hearsay,
            run_sd(
                hearsay, "t3", SAMPLE_TEXT, "No", hearsay_backend("t3", out_of_court=False), True
            ),
        ),
    ]
    for task, trace in cases:
        prediction, consistent = replay_reasoning(task, trace.to_dict())
        assert prediction == trace.prediction
        assert consistent == (trace.outcome != "Inconsistent")


# -- world isolation and trace files ----------------------------------------------


def test_world_isolation_byte_identical_traces(hearsay):
    def one_run():
        backend = hearsay_backend()
        traces = [
            run_sd(hearsay, "t1", SAMPLE_TEXT, "Yes", backend, False)
            for _ in range(2)
        ]
        return traces

    first, second = one_run(), one_run()
    assert [t.to_dict() for t in first] == [t.to_dict() for t in second]
    text_a = dump_traces(first, "hearsay", Condition.SD, "scripted", timestamp="T")
    text_b = dump_traces(second, "hearsay", Condition.SD, "scripted", timestamp="T")
    assert text_a.encode() == text_b.encode()


def test_dump_traces_isolates_timestamp_to_header(hearsay):
    trace = run_sd(hearsay, "t1", SAMPLE_TEXT, "Yes", hearsay_backend(), False)
    early = dump_traces([trace], "hearsay", Condition.SD, "scripted", timestamp="2026-01-01")
    late = dump_traces([trace], "hearsay", Condition.SD, "scripted", timestamp="2026-06-30")
    assert early != late
    assert early.splitlines()[1:] == late.splitlines()[1:]


def test_dump_traces_sorted_and_loadable(hearsay, tmp_path):
    traces = [
        run_sd(hearsay, iid, SAMPLE_TEXT, "Yes", hearsay_backend(iid), False)
        for iid in ("t9", "t2", "t5")
    ]
    path = tmp_path / "traces.jsonl"
    path.write_text(dump_traces(traces, "hearsay", Condition.SD, "scripted"), encoding="utf-8")
    header, records = load_traces(path)
    assert header["task"] == "hearsay"
    assert header["condition"] == "SD"
    assert [r["instance_id"] for r in records] == ["t2", "t5", "t9"]
    assert all(r["prediction"] == "Yes" for r in records)
