"""Span finding, template rendering, and value variation."""

import copy
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_find_spans

from dialogkit.acts import Act, Action
from dialogkit.dialogue import SYSTEM, USER, Frame, FrameState, Turn
from dialogkit.paraphrase import (
    MissingTemplate,
    TemplateSet,
    VariationTable,
    check_templates,
    date_variants,
    find_slot_spans,
    render_templates,
    time_variants,
    turn_slot_values,
    validate_paraphrase,
    vary_values,
)
from dialogkit.schema import parse_service


def as_tuples(spans):
    return [(s.slot, s.start, s.end, s.value) for s in spans]


# ---------------------------------------------------------------- span finding


def test_finds_simple_span():
    spans, missing = find_slot_spans("I want to eat in Oakland.", [("city", "Oakland")])
    assert missing == []
    assert as_tuples(spans) == [("city", 17, 24, "Oakland")]


def test_match_is_case_insensitive_and_keeps_utterance_case():
    spans, missing = find_slot_spans("book me into OAKLAND please", [("city", "Oakland")])
    assert missing == []
    (span,) = spans
    assert (span.start, span.end) == (13, 20)
    assert span.value == "OAKLAND"  # surface from the utterance, not the request


def test_longer_values_claim_first():
    spans, missing = find_slot_spans(
        "San is in San Francisco", [("short", "San"), ("long", "San Francisco")]
    )
    assert missing == []
    by_slot = {s.slot: (s.start, s.end) for s in spans}
    assert by_slot["long"] == (10, 23)
    assert by_slot["short"] == (0, 3)


def test_equal_length_ties_keep_input_order():
    spans, missing = find_slot_spans("a b c", [("x", "a b"), ("y", "b c")])
    assert as_tuples(spans) == [("x", 0, 3, "a b")]
    assert missing == [("y", "b c")]


def test_duplicate_values_take_distinct_occurrences():
    spans, missing = find_slot_spans("x and x", [("a", "x"), ("b", "x")])
    assert missing == []
    assert sorted((s.start, s.end) for s in spans) == [(0, 1), (6, 7)]


def test_empty_value_is_reported_missing():
    spans, missing = find_slot_spans("anything", [("a", "")])
    assert spans == []
    assert missing == [("a", "")]


def test_absent_value_is_reported_missing():
    spans, missing = find_slot_spans("no luck here", [("city", "Oakland")])
    assert spans == []
    assert missing == [("city", "Oakland")]


def test_fold_keeps_one_to_one_offsets_for_special_casing():
    # 'İ'.lower() expands to two characters; matching must not shift offsets
    spans, missing = find_slot_spans("Visit İstanbul today", [("city", "İSTANBUL")])
    assert missing == []
    (span,) = spans
    assert (span.start, span.end, span.value) == (6, 14, "İstanbul")


words = st.sampled_from(["a", "b", "ab", "ba", "aa", "bb", "aba"])


@st.composite
def span_instances(draw):
    utterance = " ".join(draw(st.lists(words, min_size=1, max_size=8)))
    n = draw(st.integers(min_value=1, max_value=4))
    expected = []
    for i in range(n):
        if draw(st.booleans()) and len(utterance) >= 2:
            lo = draw(st.integers(0, len(utterance) - 1))
            hi = draw(st.integers(lo + 1, len(utterance)))
            value = utterance[lo:hi]
        else:
            value = draw(words)
        expected.append((f"s{i}", value))
    return utterance, expected


@settings(max_examples=300, deadline=None)
@given(span_instances())
def test_find_slot_spans_matches_quadratic_reference(instance):
    utterance, expected = instance
    spans, missing = find_slot_spans(utterance, expected)
    ref_spans, ref_missing = brute_find_spans(utterance, expected)
    assert sorted(as_tuples(spans)) == sorted(ref_spans)
    assert missing == ref_missing
    for s in spans:
        assert utterance[s.start:s.end] == s.value


# ------------------------------------------------------- turn-level extraction


CATEGORICAL_SERVICE = parse_service({
    "service_name": "Gyms_1",
    "description": "gym lookup",
    "slots": [
        {"name": "city", "description": "where", "is_categorical": False,
         "possible_values": []},
        {"name": "class_type", "description": "kind of class", "is_categorical": True,
         "possible_values": ["yoga", "spin"]},
    ],
    "intents": [
        {"name": "FindGym", "description": "find one", "is_transactional": False,
         "required_slots": ["city"], "optional_slots": {},
         "result_slots": ["city", "class_type"]},
    ],
})


def make_turn():
    return Turn(
        speaker=USER,
        utterance="",
        frames=[Frame(
            service="Gyms_1",
            actions=[
                Action(Act.INFORM, slot="city", value="Oakland"),
                Action(Act.INFORM, slot="class_type", value="yoga"),
                Action(Act.REQUEST, slot="price"),
                Action(Act.INFORM, slot="date", value="dontcare"),
            ],
            state=FrameState(active_intent="FindGym",
                             slot_values={"city": ["Oakland"]}),
        )],
    )


def test_turn_slot_values_without_schemas_keeps_categoricals():
    values = turn_slot_values(make_turn())
    assert values == [("Gyms_1", "city", "Oakland"), ("Gyms_1", "class_type", "yoga")]


def test_turn_slot_values_with_schemas_drops_categoricals():
    schemas = {"Gyms_1": CATEGORICAL_SERVICE}
    assert turn_slot_values(make_turn(), schemas) == [("Gyms_1", "city", "Oakland")]


def test_dontcare_and_bare_request_never_need_spans():
    values = turn_slot_values(make_turn())
    slots = [slot for _, slot, _ in values]
    assert "price" not in slots and "date" not in slots


def test_validate_paraphrase_accepts_identity_utterances(small_corpus, schemas):
    checked = 0
    for dialogue in small_corpus[:10]:
        for turn in dialogue.turns:
            result = validate_paraphrase(turn, turn.utterance, schemas)
            assert result.accepted, result.missing
            expected = sorted(
                (s.slot, s.start, s.end, s.value)
                for f in turn.frames for s in f.slots
            )
            assert sorted(as_tuples(result.spans)) == expected
            checked += 1
    assert checked > 20


def test_validate_paraphrase_rejects_when_value_dropped():
    turn = make_turn()
    result = validate_paraphrase(turn, "I would like a yoga class")
    assert not result.accepted
    assert ("city", "Oakland") in result.missing
    payload = result.to_dict()
    assert payload["accepted"] is False
    assert {"slot": "city", "value": "Oakland"} in payload["missing"]
    assert all(set(s) == {"slot", "start", "exclusive_end", "value"}
               for s in payload["spans"])


# ------------------------------------------------------------------- templates


TEMPLATES = TemplateSet.from_dict({
    "defaults": {
        "INFORM": "default inform $value",
        "INFORM.city": "the city is $value",
        "INFORM.city.Oakland": "Oakland, obviously",
        "REQUEST": "what ${slot}?",
    },
    "services": {
        "Gyms_1": {"INFORM": "gym inform $value"},
    },
})


def lookup(service, act, slot=None, value=None):
    return TEMPLATES.lookup(service, Action(act, slot=slot, value=value))


def test_lookup_prefers_most_specific_key():
    assert lookup("Any", Act.INFORM, "city", "Oakland") == "Oakland, obviously"
    assert lookup("Any", Act.INFORM, "city", "Fresno") == "the city is $value"
    assert lookup("Any", Act.INFORM, "area", "Fresno") == "default inform $value"


def test_specific_default_beats_generic_service_override():
    # key precedence outranks the defaults/services distinction
    assert lookup("Gyms_1", Act.INFORM, "city", "Fresno") == "the city is $value"
    assert lookup("Gyms_1", Act.INFORM, "area", "Fresno") == "gym inform $value"


def test_lookup_raises_for_uncovered_act():
    with pytest.raises(MissingTemplate):
        lookup("Any", Act.GOODBYE)


def test_render_fills_slot_and_value_placeholders():
    out = TEMPLATES.render("Any", Action(Act.REQUEST, slot="price_range"))
    assert out == "what price range?"  # slot names render with spaces
    out = TEMPLATES.render("Any", Action(Act.INFORM, slot="area", value="Fresno"))
    assert out == "default inform Fresno"


def test_check_templates_flags_gaps_and_bad_placeholders():
    problems = check_templates(TemplateSet.from_dict({
        "defaults": {"GOODBYE": "bye $value", "NOPE": "x"},
    }))
    assert any("no default template for act INFORM" in p for p in problems)
    assert any("names no act" in p for p in problems)
    assert any("not bindable" in p for p in problems)


def test_bundled_templates_are_complete(training_assets):
    assert check_templates(training_assets.templates) == []


def test_render_templates_is_idempotent_and_annotates(small_corpus, training_assets):
    dialogue = copy.deepcopy(small_corpus[0])
    again = render_templates(dialogue, training_assets.templates,
                             training_assets.schemas)
    assert again.to_dict() == small_corpus[0].to_dict()
    for turn in again.turns:
        for frame in turn.frames:
            for span in frame.slots:
                assert turn.utterance[span.start:span.end] == span.value


# ------------------------------------------------------------- value variation


def test_date_and_time_variants_cover_known_shapes():
    forms = date_variants("2019-03-08")
    assert "March 8th" in forms and "next Friday" in forms
    forms = time_variants("5:30 pm")
    assert "17:30" in forms and "5:30 PM" in forms
    assert time_variants("half past five") == []
    assert date_variants("not a date") == []


def make_dated_dialogue():
    from dialogkit.dialogue import Dialogue

    user = Turn(speaker=USER, utterance="", frames=[Frame(
        service="Gyms_1",
        actions=[Action(Act.INFORM, slot="date", value="2019-03-08")],
        state=FrameState(active_intent="FindGym",
                         slot_values={"date": ["2019-03-08"]}),
    )])
    system = Turn(speaker=SYSTEM, utterance="", frames=[Frame(
        service="Gyms_1",
        actions=[Action(Act.CONFIRM, slot="date", value="2019-03-08")],
    )])
    return Dialogue(dialogue_id="1", services=["Gyms_1"], turns=[user, system])


def test_vary_values_rewrites_user_side_consistently():
    table = VariationTable()
    varied = vary_values(make_dated_dialogue(), table, random.Random(4))
    variant = varied.metadata["value_variations"]["2019-03-08"]
    assert variant in date_variants("2019-03-08")
    user, system = varied.turns
    assert user.frames[0].actions[0].value == variant
    assert user.frames[0].state.slot_values["date"] == ["2019-03-08", variant]
    # the system side keeps the canonical surface
    assert system.frames[0].actions[0].value == "2019-03-08"


def test_vary_values_is_seed_deterministic():
    table = VariationTable()
    a = vary_values(make_dated_dialogue(), table, random.Random(9))
    b = vary_values(make_dated_dialogue(), table, random.Random(9))
    assert a.to_dict() == b.to_dict()


def test_vary_values_without_variants_is_identity():
    table = VariationTable(date_forms=False, time_forms=False)
    original = make_dated_dialogue()
    varied = vary_values(original, table, random.Random(4))
    assert varied.to_dict() == original.to_dict()
    assert "value_variations" not in varied.metadata


def test_explicit_variants_beat_generated_ones():
    table = VariationTable(values={"2019-03-08": ["the eighth"]})
    varied = vary_values(make_dated_dialogue(), table, random.Random(4))
    assert varied.metadata["value_variations"]["2019-03-08"] == "the eighth"
