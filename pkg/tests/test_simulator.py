"""Two-agent simulator: outline validity, state replay, transfers, errors."""

import copy
import random

import pytest

from conftest import _load

from dialogkit.acts import Act
from dialogkit.dialogue import SYSTEM, USER
from dialogkit.generate import generate_corpus
from dialogkit.simulator import (
    AutomatonConfig,
    ScenarioError,
    SimulationError,
    generate_outline,
    sample_scenario,
    validate_outline,
)


@pytest.fixture(scope="module")
def multi_corpus():
    """Two-service dialogues where values hop between services."""
    return generate_corpus(_load("multi_domain.json", seed=3), num=30, seed=3, workers=8)


def outline_for(assets, seed: int):
    rng = random.Random(seed)
    scenario = sample_scenario(assets.catalog, rng)
    return generate_outline(
        scenario, assets.backends, assets.automaton, rng,
        dialogue_id=f"{seed:05d}", catalog=assets.catalog,
    )


def test_sample_scenario_is_seed_deterministic(training_assets):
    picks_a = [sample_scenario(training_assets.catalog, random.Random(i)).scenario_id
               for i in range(20)]
    picks_b = [sample_scenario(training_assets.catalog, random.Random(i)).scenario_id
               for i in range(20)]
    assert picks_a == picks_b
    assert len(set(picks_a)) > 1  # the catalog actually mixes


def test_outline_is_seed_deterministic(training_assets):
    a = outline_for(training_assets, 5)
    b = outline_for(training_assets, 5)
    assert a.to_dict() == b.to_dict()


def test_outlines_validate_clean(training_assets):
    for seed in range(30):
        outline = outline_for(training_assets, seed)
        assert validate_outline(outline, training_assets.schemas) == []


def test_outline_alternates_and_terminates(training_assets):
    outline = outline_for(training_assets, 9)
    speakers = [t.speaker for t in outline.turns]
    assert speakers[::2] == [USER] * len(speakers[::2])
    assert speakers[1::2] == [SYSTEM] * len(speakers[1::2])
    last_user_acts = [
        a.act for f in outline.turns[-2].frames for a in f.actions
    ]
    assert Act.GOODBYE in last_user_acts
    last_system_acts = [
        a.act for f in outline.turns[-1].frames for a in f.actions
    ]
    assert Act.GOODBYE in last_system_acts


def test_every_call_carries_all_required_slots(training_assets):
    saw_call = False
    for seed in range(20):
        outline = outline_for(training_assets, seed)
        for turn in outline.turns:
            if turn.speaker != SYSTEM:
                continue
            for frame in turn.frames:
                if frame.service_call is None:
                    continue
                saw_call = True
                intent = training_assets.schemas[frame.service].intent_by_name(
                    frame.service_call.method
                )
                for slot in intent.required_slots:
                    assert slot in frame.service_call.parameters
    assert saw_call


def test_validator_catches_corrupted_state(training_assets):
    outline = outline_for(training_assets, 5)
    broken = copy.deepcopy(outline)
    for turn in broken.turns:
        if turn.speaker != USER:
            continue
        frame = turn.frames[0]
        if frame.state and frame.state.slot_values:
            slot = next(iter(frame.state.slot_values))
            frame.state.slot_values[slot] = ["corrupted value"]
            break
    problems = validate_outline(broken, training_assets.schemas)
    assert problems
    assert any("missing from state" in p or "unexpected values" in p for p in problems)


def test_validator_catches_dropped_required_parameter(training_assets):
    for seed in range(20):
        outline = outline_for(training_assets, seed)
        broken = copy.deepcopy(outline)
        dropped = False
        for turn in broken.turns:
            for frame in turn.frames:
                call = frame.service_call
                if call is None:
                    continue
                intent = training_assets.schemas[frame.service].intent_by_name(call.method)
                for slot in intent.required_slots:
                    call.parameters.pop(slot, None)
                    dropped = True
                    break
                if dropped:
                    break
            if dropped:
                break
        if not dropped:
            continue
        problems = validate_outline(broken, training_assets.schemas)
        assert any("without required slot" in p for p in problems)
        return
    pytest.fail("no outline with a service call found")


def test_validator_catches_wrong_speaker_act(training_assets):
    outline = outline_for(training_assets, 5)
    broken = copy.deepcopy(outline)
    # swap the opening user turn's speaker so its acts become illegal
    broken.turns[0].speaker = SYSTEM
    problems = validate_outline(broken, training_assets.schemas)
    assert any("may not use" in p or "expected USER" in p for p in problems)


def test_transfers_recorded_and_traceable(multi_corpus, training_assets):
    transferred = [
        d for d in multi_corpus if d.metadata.get("applied_transfers")
    ]
    assert transferred, "no dialogue exercised a slot transfer"
    for d in transferred:
        aliases = d.metadata.get("value_variations", {})
        assert validate_outline(d, training_assets.schemas, aliases=aliases) == []

    # at least one transferred value must be record-provenance: present in a
    # returned entity but never in the source service's user state
    def is_record_only(d, entry):
        value = entry["values"][0]
        for turn in d.turns:
            if turn.speaker != USER:
                continue
            frame = turn.frame_for(entry["source_service"])
            if frame is None or frame.state is None:
                continue
            for values in frame.state.slot_values.values():
                if value in values:
                    return False
        return True

    assert any(
        is_record_only(d, entry)
        for d in transferred
        for entry in d.metadata["applied_transfers"]
    ), "no transfer drew on a returned entity record"


def test_validator_catches_fabricated_transfer_value(multi_corpus, training_assets):
    for d in multi_corpus:
        if not d.metadata.get("applied_transfers"):
            continue
        broken = copy.deepcopy(d)
        entry = broken.metadata["applied_transfers"][0]
        fake = "value from nowhere"
        entry["values"] = [fake]
        # plant the fake value in the target state so only provenance breaks
        turn = broken.turns[entry["turn"]]
        frame = turn.frame_for(entry["target_service"])
        if frame is None or frame.state is None:
            continue
        frame.state.slot_values[entry["target_slot"]] = [fake]
        frame.transfers_in[entry["target_slot"]] = [fake]
        problems = validate_outline(
            broken, training_assets.schemas,
            aliases=broken.metadata.get("value_variations", {}),
        )
        assert any("matches neither" in p for p in problems)
        return
    pytest.fail("no dialogue with applied transfers found")


def test_turn_budget_exhaustion_raises_with_partial(training_assets):
    config = AutomatonConfig(max_turns=3)
    rng = random.Random(0)
    scenario = sample_scenario(training_assets.catalog, rng)
    with pytest.raises(SimulationError) as err:
        generate_outline(scenario, training_assets.backends, config, rng,
                         catalog=training_assets.catalog)
    assert err.value.partial_turns


def test_unknown_backend_raises(training_assets):
    rng = random.Random(0)
    scenario = sample_scenario(training_assets.catalog, rng)
    with pytest.raises(ScenarioError):
        generate_outline(scenario, {}, training_assets.automaton, rng)


def test_corpus_shape_envelope(small_corpus):
    turn_counts = [len(d.turns) for d in small_corpus]
    assert all(c % 2 == 0 for c in turn_counts)
    assert min(turn_counts) >= 4
    assert max(turn_counts) <= 60
    avg = sum(turn_counts) / len(turn_counts)
    assert 6 <= avg <= 20
