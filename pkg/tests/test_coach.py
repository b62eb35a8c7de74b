import random

import pytest

from fixtures import coaching_session, tone_silence_wav
from presentcoach.coach import (
    AnalysisError,
    AnalysisReport,
    AudienceNote,
    AudienceSimulationError,
    FeedbackError,
    FourSourceBundle,
    OISFeedback,
    PracticeRecording,
    analyze_practice,
    compose_feedback,
    resolve_bundle,
    simulate_audience,
    validate_ois,
)
from presentcoach.errors import PreconditionError
from presentcoach.metrics import DeliveryMetrics, Transcript
from presentcoach.providers import (
    ProviderClient,
    ProviderConfig,
    ProviderSet,
    default_stub_behavior,
    make_stub,
)


def words(n, base="w"):
    return " ".join(f"{base}{i}" for i in range(n))


def ois_dict(o=20, i=20, s=20, encouragement="Nice energy throughout."):
    return {
        "encouragement": encouragement,
        "observation": words(o, "o"),
        "impact": words(i, "i"),
        "suggestion": words(s, "s"),
    }


def scripted_client(capability, script, default_behavior=False):
    cfg = ProviderConfig(capability=capability, endpoint="stub://x", model_name="x", max_retries=0)
    stub = make_stub(capability, script=script, use_default_behavior=default_behavior)
    return ProviderClient(cfg, transports={"x": stub}, sleep=lambda s: None), stub


def metrics_fixture():
    data = tone_silence_wav([("tone", 2000), ("silence", 400), ("tone", 1500)])
    from presentcoach.metrics import compute_delivery_metrics

    return compute_delivery_metrics(Transcript([]), data)


# ---- OIS validation --------------------------------------------------------

def test_ois_valid_passes():
    assert validate_ois(ois_dict()) == []


def test_ois_word_cap_inclusive():
    assert validate_ois(ois_dict(o=50, i=50, s=50)) == []  # exactly 150
    violations = validate_ois(ois_dict(o=50, i=50, s=51))  # 151
    assert violations and "151 words" in violations[0]


def test_ois_encouragement_uncounted():
    d = ois_dict(o=50, i=50, s=50, encouragement=words(500, "e"))
    assert validate_ois(d) == []


def test_ois_empty_or_missing_fields():
    for field in ("encouragement", "observation", "impact", "suggestion"):
        d = ois_dict()
        d[field] = "   "
        assert any(field in v for v in validate_ois(d))
        del d[field]
        assert any(field in v for v in validate_ois(d))


def test_ois_fuzz_validator_agrees_with_definition():
    rng = random.Random(3)
    fields = ("encouragement", "observation", "impact", "suggestion")
    for _ in range(300):
        d = {}
        for f in fields:
            roll = rng.random()
            if roll < 0.1:
                continue  # missing
            if roll < 0.2:
                d[f] = ""
            else:
                d[f] = words(rng.randint(1, 70), f[0])
        violations = validate_ois(d)
        structurally_ok = all(isinstance(d.get(f), str) and d.get(f, "").strip() for f in fields)
        if not structurally_ok:
            assert violations
        else:
            total = sum(len(d[f].split()) for f in ("observation", "impact", "suggestion"))
            assert bool(violations) == (total > 150)


# ---- bundle completeness ---------------------------------------------------

def test_bundle_complete_ok():
    FourSourceBundle(["img"], [{"slide_index": 1, "text": "t"}], ["aud"], "user")


@pytest.mark.parametrize(
    "kwargs,missing",
    [
        (dict(slide_image_refs=[], script_segments=[{}], ideal_audio_refs=["a"], user_audio_ref="u"), "(1) slide image"),
        (dict(slide_image_refs=["i"], script_segments=[], ideal_audio_refs=["a"], user_audio_ref="u"), "(2) ideal narration script"),
        (dict(slide_image_refs=["i"], script_segments=[{}], ideal_audio_refs=[], user_audio_ref="u"), "(3) ideal audio"),
        (dict(slide_image_refs=["i"], script_segments=[{}], ideal_audio_refs=["a"], user_audio_ref=""), "(4) user audio"),
    ],
)
def test_bundle_missing_source_named(kwargs, missing):
    with pytest.raises(PreconditionError) as exc:
        FourSourceBundle(**kwargs)
    assert missing in str(exc.value)


def test_resolve_bundle_full_range(store):
    session, exemplar, script, practice = coaching_session(store, n_slides=3)
    deck_doc = store.read_doc("decks", exemplar.deck_ref)
    bundle = resolve_bundle(practice, exemplar, script, deck_doc["slides"])
    assert len(bundle.slide_image_refs) == 3
    assert [s["slide_index"] for s in bundle.script_segments] == [1, 2, 3]
    assert len(bundle.ideal_audio_refs) == 3
    assert bundle.user_audio_ref == practice.audio_ref


def test_resolve_bundle_slide_range(store):
    session, exemplar, script, practice = coaching_session(store, n_slides=4)
    practice.slide_range = (2, 3)
    deck_doc = store.read_doc("decks", exemplar.deck_ref)
    bundle = resolve_bundle(practice, exemplar, script, deck_doc["slides"])
    assert [s["slide_index"] for s in bundle.script_segments] == [2, 3]
    assert len(bundle.slide_image_refs) == 2
    assert len(bundle.ideal_audio_refs) == 2


def test_resolve_bundle_range_out_of_deck(store):
    session, exemplar, script, practice = coaching_session(store, n_slides=2)
    practice.slide_range = (2, 5)
    deck_doc = store.read_doc("decks", exemplar.deck_ref)
    with pytest.raises(PreconditionError):
        resolve_bundle(practice, exemplar, script, deck_doc["slides"])


# ---- audience simulation ---------------------------------------------------

def good_audience_payload(**note_overrides):
    note = {
        "audience_profile": "students",
        "engagement": "high",
        "comprehension": "clear",
        "confusion_points": [],
        "reaction_summary": "Followed easily.",
    }
    note.update(note_overrides)
    return {"audience_notes": [note]}


def test_audience_parse_ok():
    client, _ = scripted_client("mllm_analysis", [{"ok": good_audience_payload()}])
    notes, audits = simulate_audience(b"", Transcript([]), "students", client)
    assert len(notes) == 1
    assert notes[0].engagement == "high"
    assert not notes[0].repaired
    assert len(audits) == 1


def test_audience_clear_with_confusion_demoted_to_partial():
    payload = good_audience_payload(comprehension="clear", confusion_points=["term X"])
    client, _ = scripted_client("mllm_analysis", [{"ok": payload}])
    notes, _ = simulate_audience(b"", Transcript([]), "students", client)
    assert notes[0].comprehension == "partial"
    assert notes[0].repaired is True


def test_audience_repair_reprompt_then_success():
    client, stub = scripted_client(
        "mllm_analysis",
        [{"ok": {"nonsense": True}}, {"ok": good_audience_payload()}],
    )
    notes, audits = simulate_audience(b"", Transcript([]), "students", client)
    assert len(notes) == 1
    assert len(audits) == 2
    assert "repair" in stub.call_log[1]


def test_audience_unparseable_twice_fails():
    client, _ = scripted_client(
        "mllm_analysis",
        [{"ok": {"audience_notes": [{"engagement": "extreme", "comprehension": "clear"}]}}] * 2,
    )
    with pytest.raises(AudienceSimulationError):
        simulate_audience(b"", Transcript([]), "students", client)


def test_audience_empty_profile_rejected():
    client, _ = scripted_client("mllm_analysis", [])
    with pytest.raises(PreconditionError):
        simulate_audience(b"", Transcript([]), "", client)


# ---- feedback composition --------------------------------------------------

def test_feedback_accepts_valid_first_draft():
    client, _ = scripted_client("llm_chat", [{"ok": ois_dict()}])
    feedback, audits = compose_feedback("analysis", metrics_fixture(), [], client)
    assert isinstance(feedback, OISFeedback)
    assert feedback.ois_word_count == 60
    assert len(audits) == 1


def test_feedback_corrective_reprompt_then_accept():
    client, stub = scripted_client(
        "llm_chat", [{"ok": ois_dict(o=80, i=80, s=80)}, {"ok": ois_dict()}]
    )
    feedback, audits = compose_feedback("analysis", metrics_fixture(), [], client)
    assert feedback.ois_word_count == 60
    assert len(audits) == 2
    assert "violations" in stub.call_log[1]
    assert any("240 words" in v for v in stub.call_log[1]["violations"])


def test_feedback_two_bad_drafts_carries_both():
    client, _ = scripted_client(
        "llm_chat", [{"ok": ois_dict(o=200)}, {"ok": ois_dict(i=200)}]
    )
    with pytest.raises(FeedbackError) as exc:
        compose_feedback("analysis", metrics_fixture(), [], client)
    assert len(exc.value.drafts) == 2


def test_feedback_fuzz_never_accepts_invalid():
    rng = random.Random(9)
    for _ in range(200):
        draft = {
            "encouragement": words(rng.randint(0, 10), "e"),
            "observation": words(rng.randint(0, 120), "o"),
            "impact": words(rng.randint(0, 120), "i"),
            "suggestion": words(rng.randint(0, 120), "s"),
        }
        client, _ = scripted_client("llm_chat", [{"ok": draft}, {"ok": draft}])
        try:
            feedback, _ = compose_feedback("a", metrics_fixture(), [], client)
        except FeedbackError:
            assert validate_ois(draft)
        else:
            assert validate_ois(feedback.to_dict()) == []


# ---- full analysis orchestration -------------------------------------------

def test_analyze_practice_happy_path(store, stub_providers):
    session, exemplar, script, practice = coaching_session(store)
    report = analyze_practice(session, practice, stub_providers, store)
    assert report.practice_ref == practice.id
    assert report.metrics.duration_ms == practice.duration_ms
    assert validate_ois(report.feedback.to_dict()) == []
    doc = store.read_doc("reports", report.id)
    assert doc["status"] == "complete"
    assert store.load_session(session.id).analysis_refs == [report.id]


def test_analyze_requires_coaching_stage(store, stub_providers):
    session, exemplar, script, practice = coaching_session(store)
    fresh = store.create_session()
    with pytest.raises(PreconditionError):
        analyze_practice(fresh, practice, stub_providers, store)


def test_analyze_failure_persists_partial_report(store):
    session, exemplar, script, practice = coaching_session(store)
    bad_feedback, _ = scripted_client("llm_chat", [{"ok": {"junk": 1}}] * 2)
    providers = ProviderSet.all_stub(overrides={"llm_chat": bad_feedback})
    with pytest.raises(AnalysisError) as exc:
        analyze_practice(session, practice, providers, store)
    assert "feedback" in str(exc.value)
    updated = store.load_session(session.id)
    assert len(updated.analysis_refs) == 1
    doc = store.read_doc("reports", updated.analysis_refs[0])
    assert doc["status"] == "failed"
    assert doc["failed_stage"] == "feedback"
    assert "metrics" in doc  # stages before the failure are retained
    assert updated.practice_refs == [practice.id]  # recording never lost


def test_analyze_audience_failure_degrades_not_fails(store):
    bad_audience_then_ok = []

    def selective(request):
        if request.get("task") == "audience":
            return {"audience_notes": "not-a-list"}
        return default_stub_behavior("mllm_analysis")(request)

    cfg = ProviderConfig(capability="mllm_analysis", endpoint="stub://m", model_name="m", max_retries=0)
    client = ProviderClient(
        cfg, transports={"m": make_stub("mllm_analysis", default=selective)}, sleep=lambda s: None
    )
    providers = ProviderSet.all_stub(overrides={"mllm_analysis": client})
    session, exemplar, script, practice = coaching_session(store)
    report = analyze_practice(session, practice, providers, store)
    assert report.audience_notes == []
    doc = store.read_doc("reports", report.id)
    assert doc["status"] == "complete"
    assert doc.get("audience_degraded") is True


def test_report_round_trip(store, stub_providers):
    session, exemplar, script, practice = coaching_session(store)
    report = analyze_practice(session, practice, stub_providers, store)
    doc = store.read_doc("reports", report.id)
    loaded = AnalysisReport.from_dict(doc)
    assert loaded.id == report.id
    assert loaded.metrics == report.metrics
    assert loaded.feedback == report.feedback


def test_report_constructor_rejects_invalid_feedback(store, stub_providers):
    session, exemplar, script, practice = coaching_session(store)
    report = analyze_practice(session, practice, stub_providers, store)
    bad = report.to_dict()
    bad["feedback"] = {**bad["feedback"], "observation": words(200)}
    with pytest.raises(PreconditionError):
        AnalysisReport.from_dict(bad)
