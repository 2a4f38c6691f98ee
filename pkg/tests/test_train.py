"""Training targets, the optimizer, and the end-to-end fit loop."""

import numpy as np
import pytest

from dialogkit.dialogue import (
    NONE_INTENT,
    SYSTEM,
    USER,
    Dialogue,
    Frame,
    FrameState,
    SlotSpan,
    Turn,
)
from dialogkit.metrics import evaluate
from dialogkit.schema import parse_service
from dialogkit.tracker import (
    Adam,
    HashedPairEncoder,
    STATUS_ORDER,
    TrainConfig,
    build_examples,
    embed_schema,
    init_params,
    track_dialogue,
    train_tracker,
)

CAFES = parse_service({
    "service_name": "Cafes_1",
    "description": "find a cafe",
    "slots": [
        {"name": "city", "description": "where", "is_categorical": False,
         "possible_values": []},
        {"name": "seating", "description": "indoor or outdoor",
         "is_categorical": True, "possible_values": ["indoor", "outdoor"]},
        {"name": "phone", "description": "contact number",
         "is_categorical": False, "possible_values": []},
    ],
    "intents": [
        {"name": "FindCafe", "description": "look one up",
         "is_transactional": False, "required_slots": ["city"],
         "optional_slots": {"seating": "dontcare"},
         "result_slots": ["city", "seating", "phone"]},
    ],
})
SCHEMAS = {"Cafes_1": CAFES}


def user_turn(text, state, spans=()):
    return Turn(speaker=USER, utterance=text, frames=[Frame(
        service="Cafes_1", state=state, slots=list(spans),
    )])


def system_turn(text):
    return Turn(speaker=SYSTEM, utterance=text, frames=[Frame(service="Cafes_1")])


def cafe_dialogue():
    return Dialogue(dialogue_id="t0", services=["Cafes_1"], turns=[
        user_turn(
            "Find a cafe in Oakland",
            FrameState(active_intent="FindCafe",
                       slot_values={"city": ["Oakland"]}),
            spans=[SlotSpan("city", 15, 22, "Oakland")],
        ),
        system_turn("Any seating preference?"),
        user_turn(
            "Outdoor please, and what is the phone number?",
            FrameState(active_intent="FindCafe",
                       requested_slots=["phone"],
                       slot_values={"city": ["Oakland"],
                                    "seating": ["outdoor"]}),
        ),
    ])


@pytest.fixture(scope="module")
def cafe_setup():
    encoder = HashedPairEncoder(dim=16, seed=0)
    embeddings = {"Cafes_1": embed_schema(encoder, CAFES)}
    return encoder, embeddings


# ------------------------------------------------------------ target assembly


def test_examples_carry_intent_requested_and_span(cafe_setup):
    encoder, embeddings = cafe_setup
    first, second = build_examples([cafe_dialogue()], SCHEMAS, encoder, embeddings)
    emb = embeddings["Cafes_1"]
    city = emb.slot_names.index("city")
    seating = emb.slot_names.index("seating")
    phone = emb.slot_names.index("phone")

    assert first.intent_label == 1 + emb.intent_names.index("FindCafe")
    assert first.requested.tolist() == [0.0] * len(emb.slot_names)
    assert STATUS_ORDER[first.status[city]] == "active"
    # "Oakland" is the index-4 token of the user segment (empty system turn)
    assert first.span_labels == {city: (4, 4)}
    assert first.value_labels == {}

    assert second.turn == 2
    assert second.requested[phone] == 1.0 and second.requested.sum() == 1.0
    # city kept its canonical value, so its status stays none
    assert STATUS_ORDER[second.status[city]] == "none"
    assert STATUS_ORDER[second.status[seating]] == "active"
    assert second.value_labels == {seating: emb.value_names["seating"].index("outdoor")}
    assert second.span_labels == {}


def test_dontcare_status_has_no_value_target(cafe_setup):
    encoder, embeddings = cafe_setup
    d = Dialogue(dialogue_id="t1", services=["Cafes_1"], turns=[
        user_turn("Anywhere is fine",
                  FrameState(active_intent="FindCafe",
                             slot_values={"seating": ["dontcare"]})),
    ])
    (ex,) = build_examples([d], SCHEMAS, encoder, embeddings)
    emb = embeddings["Cafes_1"]
    seating = emb.slot_names.index("seating")
    assert STATUS_ORDER[ex.status[seating]] == "dontcare"
    assert ex.value_labels == {} and ex.span_labels == {}


def test_none_intent_maps_to_label_zero(cafe_setup):
    encoder, embeddings = cafe_setup
    d = Dialogue(dialogue_id="t2", services=["Cafes_1"], turns=[
        user_turn("Hello there", FrameState(active_intent=NONE_INTENT)),
    ])
    (ex,) = build_examples([d], SCHEMAS, encoder, embeddings)
    assert ex.intent_label == 0


def test_unknown_intents_and_services_are_skipped(cafe_setup):
    encoder, embeddings = cafe_setup
    d = Dialogue(dialogue_id="t3", services=["Cafes_1"], turns=[
        user_turn("Do something else",
                  FrameState(active_intent="RideBicycle")),
    ])
    assert build_examples([d], SCHEMAS, encoder, embeddings) == []
    d2 = Dialogue(dialogue_id="t4", services=["Ghosts_1"], turns=[Turn(
        speaker=USER, utterance="boo",
        frames=[Frame(service="Ghosts_1",
                      state=FrameState(active_intent=NONE_INTENT))],
    )])
    assert build_examples([d2], SCHEMAS, encoder, embeddings) == []


def test_span_off_token_boundary_is_dropped(cafe_setup):
    encoder, embeddings = cafe_setup
    # span starts one char into the "Oaklandish" token: no aligned label
    d = Dialogue(dialogue_id="t5", services=["Cafes_1"], turns=[
        user_turn("Try Oaklandish",
                  FrameState(active_intent="FindCafe",
                             slot_values={"city": ["aklandish"]}),
                  spans=[SlotSpan("city", 5, 14, "aklandish")]),
    ])
    (ex,) = build_examples([d], SCHEMAS, encoder, embeddings)
    emb = embeddings["Cafes_1"]
    city = emb.slot_names.index("city")
    assert STATUS_ORDER[ex.status[city]] == "active"
    assert ex.span_labels == {}


def test_examples_from_generated_corpus_are_well_formed(small_corpus, schemas):
    encoder = HashedPairEncoder(dim=16, seed=0)
    embeddings = {name: embed_schema(encoder, s) for name, s in schemas.items()}
    examples = build_examples(small_corpus, schemas, encoder, embeddings)
    assert len(examples) > 50
    with_spans = with_values = 0
    for ex in examples:
        emb = embeddings[ex.service]
        n = len(emb.slot_names)
        assert ex.requested.shape == (n,) and ex.status.shape == (n,)
        assert all(0 <= s < len(STATUS_ORDER) for s in ex.status)
        assert 0 <= ex.intent_label <= len(emb.intent_names)
        for j, (p, q) in ex.span_labels.items():
            assert emb.slot_names[j] in emb.noncategorical
            assert 0 <= p <= q < ex.encoded.num_tokens
        for j, v in ex.value_labels.items():
            slot = emb.slot_names[j]
            assert 0 <= v < len(emb.value_names[slot])
        with_spans += bool(ex.span_labels)
        with_values += bool(ex.value_labels)
    assert with_spans > 10 and with_values > 10


# ------------------------------------------------------------------- optimizer


def test_adam_first_step_matches_hand_formula():
    w = np.array([1.0])
    opt = Adam([("w", w)], lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)
    g = np.array([0.5])
    opt.step({"w": g})
    mhat = (1 - 0.9) * 0.5 / (1 - 0.9)
    vhat = (1 - 0.999) * 0.25 / (1 - 0.999)
    expected = 1.0 - 0.1 * mhat / (np.sqrt(vhat) + 1e-8)
    assert w[0] == pytest.approx(expected, abs=1e-15)


def test_adam_weight_decay_is_decoupled():
    g = np.array([0.37, -1.4])
    base = np.array([2.0, -3.0])
    plain = base.copy()
    decayed = base.copy()
    lr, wd = 0.05, 0.01
    Adam([("w", plain)], lr=lr, beta1=0.9, beta2=0.999, eps=1e-8).step({"w": g})
    Adam([("w", decayed)], lr=lr, beta1=0.9, beta2=0.999, eps=1e-8,
         weight_decay=wd).step({"w": g})
    # decay multiplies the post-update weights, independent of the gradient
    assert decayed == pytest.approx(plain * (1 - lr * wd), abs=1e-15)


def test_adam_zero_gradient_only_decays():
    w = np.full(3, 4.0)
    opt = Adam([("w", w)], lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8,
               weight_decay=0.5)
    opt.step({"w": np.zeros(3)})
    assert w == pytest.approx(np.full(3, 4.0 * (1 - 0.1 * 0.5)), abs=1e-15)


def test_adam_updates_only_named_gradients():
    w1, w2 = np.ones(2), np.ones(2)
    opt = Adam([("a", w1), ("b", w2)], lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)
    opt.step({"a": np.ones(2)})
    assert not np.array_equal(w1, np.ones(2))
    assert np.array_equal(w2, np.ones(2))


# ------------------------------------------------------------------- training


def fit(dialogues, schemas, epochs=3, seed=0):
    config = TrainConfig(dim=32, seed=seed, encoder_seed=seed, epochs=epochs)
    return train_tracker(dialogues, schemas, config)


def test_training_is_seed_deterministic(small_corpus, schemas):
    params_a, _ = fit(small_corpus[:12], schemas, epochs=2, seed=3)
    params_b, _ = fit(small_corpus[:12], schemas, epochs=2, seed=3)
    for (name, arr_a), (_, arr_b) in zip(params_a.trainable_arrays(),
                                         params_b.trainable_arrays()):
        assert np.array_equal(arr_a, arr_b), name


def score(params, encoder, dialogues, schemas):
    records = []
    for d in dialogues:
        for rec in track_dialogue(encoder, schemas, params, d):
            rec["dialogue_id"] = d.dialogue_id
            records.append(rec)
    return evaluate(dialogues, records, schemas=schemas).overall


def test_short_training_beats_fresh_parameters(small_corpus, schemas):
    # 40 dialogues is enough for every head to move off its cold start;
    # held-out quality bars live in the end-to-end acceptance test
    config = TrainConfig(dim=64, seed=1, encoder_seed=1, epochs=50)
    params, encoder = train_tracker(small_corpus, schemas, config)
    trained = score(params, encoder, small_corpus, schemas)
    untrained = score(init_params(dim=64, seed=1), encoder, small_corpus, schemas)
    assert trained.active_intent_accuracy > max(
        untrained.active_intent_accuracy, 0.9
    )
    assert trained.requested_slot_f1 > untrained.requested_slot_f1
    assert trained.average_goal_accuracy > max(
        untrained.average_goal_accuracy, 0.15
    )
