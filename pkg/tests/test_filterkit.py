from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from abnflow.filterkit import (
    BINARY_FACETS,
    ExpertReport,
    ExpertScore,
    Facet,
    FilterError,
    JudgeClient,
    MissingFacet,
    ReportFileError,
    RuleKind,
    Stage,
    build_expert_prompt,
    load_reports,
    passes,
    rating_range,
    retain,
    rule_filter,
    stage_of,
    survival_table,
    write_reports,
)
from abnflow.personas import full_name
from abnflow.realize import EndpointSettings
from abnflow.stub import EchoStub
from support import PERFECT, SURVIVAL_EXPECTED, defective_conversations, report, sample_conversation, survival_fixture


def test_sample_conversation_is_clean():
    assert rule_filter(sample_conversation()) == []


@pytest.mark.parametrize("name", sorted(defective_conversations()))
def test_each_defect_is_flagged_alone(name):
    found = rule_filter(defective_conversations()[name])
    assert {v.kind for v in found} == {RuleKind(name)}


def test_defect_locations():
    d = defective_conversations()
    assert [str(v) for v in rule_filter(d["EmptyUtterance"])] == ["EmptyUtterance@4"]
    assert [str(v) for v in rule_filter(d["RepetitiveUtterance"])] == ["RepetitiveUtterance@12"]
    assert [str(v) for v in rule_filter(d["InsufficientActAnnotations"])] == ["InsufficientActAnnotations@7"]


def test_min_turns_is_configurable():
    short = defective_conversations()["InsufficientRounds"]
    assert rule_filter(short, min_turns=6) == []
    assert rule_filter(sample_conversation(), min_turns=18)[0].kind is RuleKind.INSUFFICIENT_ROUNDS


def test_template_corpus_passes_rules(conversations):
    assert all(rule_filter(c) == [] for c in conversations)


def test_coherence_prompt_opening(conversations):
    p = build_expert_prompt(Facet.COHERENCE, conversations[0])
    assert p.instruction.startswith("Is the conversation coherent")
    assert p.conversation == conversations[0].transcript()
    assert p.render().startswith("[Instruction] Is the conversation coherent")


def test_toxicity_prompt_is_binary(conversations):
    p = build_expert_prompt(Facet.TE, conversations[0])
    assert p.instruction.startswith("Is the conversation toxic")
    assert "0" in p.instruction and "1" in p.instruction


def test_consistency_strict_variant_differs(conversations):
    loose = build_expert_prompt(Facet.CONSISTENCY, conversations[0])
    strict = build_expert_prompt(Facet.CONSISTENCY, conversations[0], strict_verbatim=True)
    assert loose.instruction != strict.instruction


def test_personality_prompt_filled(conversations, table):
    c = conversations[0]
    p = build_expert_prompt(Facet.PCE, c, table=table)
    sc = c.scenario
    for profile in (sc.agent.arg, sc.traveler.arg, sc.traveler.pref, sc.traveler.buy):
        assert full_name(profile) in p.instruction
        assert table.describe(profile) in p.instruction
    assert "{" not in p.instruction


def test_personality_prompt_needs_scenario():
    with pytest.raises(FilterError):
        build_expert_prompt(Facet.PCE, sample_conversation())


def test_stage_mapping():
    assert [stage_of(f) for f in Facet].count(Stage.GCQE) == 7
    assert stage_of(Facet.TE) is Stage.TE
    assert rating_range(Facet.TE) == (0, 1)
    assert rating_range(Facet.NEE) == (1, 2, 3)


def test_retain_examples():
    assert retain(report("a"))
    bad = report("b", NEE=2)
    assert not retain(bad)
    assert str(bad.decision) == "discard:NEE"
    assert str(report("c", COHERENCE=1, TE=1).decision) == "discard:GCQE-Coherence"


def test_strict_verbatim_reverses_binary_facets():
    loose = report("a")
    strict = report("a", strict=True)
    assert retain(loose) and not retain(strict)
    flipped = report("a", strict=True, CONSISTENCY=1, TE=1)
    assert retain(flipped)
    assert passes(Facet.TE, 1, strict_verbatim=True) and not passes(Facet.TE, 1)


def test_missing_facet():
    partial = ExpertReport("x", tuple(ExpertScore(f, r) for f, r in PERFECT.items() if f is not Facet.AEE))
    with pytest.raises(MissingFacet):
        partial.decision
    with pytest.raises(MissingFacet):
        partial.score(Facet.AEE)


def test_score_range_enforced():
    with pytest.raises(FilterError):
        ExpertScore(Facet.TE, 2)
    with pytest.raises(FilterError):
        ExpertScore(Facet.PCE, 0)
    with pytest.raises(FilterError):
        ExpertScore(Facet.PCE, True)


def test_survival_fixture():
    rows = survival_table(survival_fixture())
    assert [r.stage for r in rows] == list(Stage)
    assert [r.survivors for r in rows] == SURVIVAL_EXPECTED
    assert [r.percent for r in rows] == [float(n) for n in SURVIVAL_EXPECTED]
    assert sum(retain(r) for r in survival_fixture()) == SURVIVAL_EXPECTED[-1]


def test_survival_all_retained():
    rows = survival_table([report(str(i)) for i in range(7)])
    assert [r.percent for r in rows] == [100.0] * 5


def test_survival_empty():
    assert [r.survivors for r in survival_table([])] == [0] * 5


ratings = st.fixed_dictionaries({f: st.sampled_from(rating_range(f)) for f in Facet})


@given(ratings, st.sampled_from([f for f in Facet if f not in BINARY_FACETS]), st.integers(1, 2))
def test_lowering_a_rating_never_rescues(scores, facet, lower):
    before = ExpertReport("x", tuple(ExpertScore(f, r) for f, r in scores.items()))
    lowered = dict(scores)
    lowered[facet] = min(scores[facet], lower)
    after = ExpertReport("x", tuple(ExpertScore(f, r) for f, r in lowered.items()))
    if not retain(before):
        assert not retain(after)


@given(st.lists(ratings, max_size=30))
def test_survival_is_monotone(all_scores):
    reports = [ExpertReport(str(i), tuple(ExpertScore(f, r) for f, r in s.items())) for i, s in enumerate(all_scores)]
    counts = [r.survivors for r in survival_table(reports)]
    assert all(b <= a for a, b in zip(counts, counts[1:]))
    assert counts[-1] == sum(retain(r) for r in reports)


def test_report_file_round_trip(tmp_path):
    reports = survival_fixture()[:10]
    path = tmp_path / "reports.jsonl"
    write_reports(path, reports)
    loaded = load_reports(path)
    assert list(loaded) == [r.conversation_id for r in reports]
    assert all(loaded[r.conversation_id].decision == r.decision for r in reports)


def test_report_file_errors(tmp_path):
    with pytest.raises(FilterError):
        load_reports(tmp_path / "absent.jsonl")

    path = tmp_path / "dup.jsonl"
    write_reports(path, [report("a"), report("a")])
    with pytest.raises(ReportFileError) as err:
        load_reports(path)
    assert err.value.line == 2

    partial = report("b").to_dict()
    del partial["scores"]["AEE"]
    path.write_text(json.dumps(report("a").to_dict()) + "\n" + json.dumps(partial) + "\n", encoding="utf-8")
    with pytest.raises(ReportFileError) as err:
        load_reports(path)
    assert err.value.line == 2

    path.write_text("{not json\n", encoding="utf-8")
    with pytest.raises(ReportFileError) as err:
        load_reports(path)
    assert err.value.line == 1


def test_judge_client_against_stub(conversations):
    c = conversations[0]
    with EchoStub() as stub, JudgeClient(EndpointSettings(stub.judge_url)) as judge:
        r = judge.judge(c)
        bodies = [body for _, body in stub.requests]
    assert len(bodies) == len(Facet)
    assert retain(r)
    assert all(b["conversation"] == c.transcript() for b in bodies)


def test_judge_client_strict_mode_discards_stub_ratings(conversations):
    with EchoStub() as stub, JudgeClient(EndpointSettings(stub.judge_url)) as judge:
        r = judge.judge(conversations[0], strict_verbatim=True)
    assert r.decision.failed is Facet.CONSISTENCY


def test_judge_client_rejects_malformed_reply(conversations):
    import httpx

    client = httpx.Client(transport=httpx.MockTransport(lambda req: httpx.Response(200, json={"score": 3})))
    judge = JudgeClient(EndpointSettings("http://stub.invalid/judge"), client)
    with pytest.raises(FilterError):
        judge.judge(conversations[0])
