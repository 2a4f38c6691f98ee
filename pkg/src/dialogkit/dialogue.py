"""Dialogue data structures shared by the simulator, paraphraser, and corpus.

A dialogue is a strict user/system turn alternation.  Each turn carries one
frame per service; user frames hold the accumulated dialogue state, system
frames hold the service call and its results.  Serialization follows the
public release shape (actions carry a "values" list, spans use
"exclusive_end") so externally published corpora in that shape parse too.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .acts import Act, Action

USER = "USER"
SYSTEM = "SYSTEM"

# Intent sentinel for "no intent in progress for this service".
NONE_INTENT = "NONE"


class DialogueFormatError(ValueError):
    """Raised when a serialized dialogue cannot be decoded."""


@dataclass
class FrameState:
    """User-side dialogue state for one service at one turn.

    slot_values maps a slot to the list of surface strings accepted for it;
    the canonical value always comes first, paraphrase variants after it.
    requested_slots covers only the current utterance, it does not accumulate.
    """

    active_intent: str = NONE_INTENT
    requested_slots: tuple[str, ...] = ()
    slot_values: dict[str, list[str]] = field(default_factory=dict)

    def copy(self) -> "FrameState":
        return FrameState(
            active_intent=self.active_intent,
            requested_slots=tuple(self.requested_slots),
            slot_values={k: list(v) for k, v in self.slot_values.items()},
        )

    def to_dict(self) -> dict:
        return {
            "active_intent": self.active_intent,
            "requested_slots": sorted(self.requested_slots),
            "slot_values": {k: list(self.slot_values[k]) for k in sorted(self.slot_values)},
        }

    @staticmethod
    def from_dict(obj: dict) -> "FrameState":
        return FrameState(
            active_intent=obj.get("active_intent", NONE_INTENT),
            requested_slots=tuple(obj.get("requested_slots", [])),
            slot_values={k: [str(v) for v in vs] for k, vs in obj.get("slot_values", {}).items()},
        )


@dataclass(frozen=True)
class SlotSpan:
    """Character span of one slot value inside a turn's utterance."""

    slot: str
    start: int
    end: int  # exclusive
    value: str

    def to_dict(self) -> dict:
        return {
            "slot": self.slot,
            "start": self.start,
            "exclusive_end": self.end,
            "value": self.value,
        }

    @staticmethod
    def from_dict(obj: dict, utterance: str = "") -> "SlotSpan":
        end = obj["exclusive_end"] if "exclusive_end" in obj else obj["end"]
        value = obj.get("value")
        if value is None:
            value = utterance[obj["start"]:end]
        return SlotSpan(slot=obj["slot"], start=int(obj["start"]), end=int(end), value=value)


@dataclass
class ServiceCall:
    method: str
    parameters: dict[str, str]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "parameters": {k: self.parameters[k] for k in sorted(self.parameters)},
        }

    @staticmethod
    def from_dict(obj: dict) -> "ServiceCall":
        return ServiceCall(method=obj["method"], parameters=dict(obj.get("parameters", {})))


@dataclass
class Frame:
    """Per-service annotation of one turn."""

    service: str
    actions: list[Action] = field(default_factory=list)
    slots: list[SlotSpan] = field(default_factory=list)
    state: FrameState | None = None  # user turns only
    service_call: ServiceCall | None = None  # system turns only
    service_results: list[dict[str, str]] | None = None
    # values injected into state by a cross-service slot transfer this turn
    transfers_in: dict[str, list[str]] = field(default_factory=dict)

    def to_dict(self, include_actions: bool = True) -> dict:
        out: dict = {"service": self.service}
        if include_actions:
            out["actions"] = [a.to_dict() for a in self.actions]
        out["slots"] = [s.to_dict() for s in self.slots]
        if self.state is not None:
            out["state"] = self.state.to_dict()
        if self.service_call is not None:
            out["service_call"] = self.service_call.to_dict()
        if self.service_results is not None:
            out["service_results"] = [
                {k: rec[k] for k in sorted(rec)} for rec in self.service_results
            ]
        if self.transfers_in:
            out["transfers_in"] = {
                k: list(self.transfers_in[k]) for k in sorted(self.transfers_in)
            }
        return out

    @staticmethod
    def from_dict(obj: dict, utterance: str = "") -> "Frame":
        try:
            actions = [Action.from_dict(a) for a in obj.get("actions", [])]
        except (KeyError, ValueError) as exc:
            raise DialogueFormatError(f"bad action in frame {obj.get('service')!r}: {exc}")
        return Frame(
            service=obj["service"],
            actions=actions,
            slots=[SlotSpan.from_dict(s, utterance) for s in obj.get("slots", [])],
            state=FrameState.from_dict(obj["state"]) if "state" in obj else None,
            service_call=(
                ServiceCall.from_dict(obj["service_call"]) if obj.get("service_call") else None
            ),
            service_results=(
                [dict(r) for r in obj["service_results"]]
                if obj.get("service_results") is not None
                else None
            ),
            transfers_in={
                k: [str(v) for v in vs] for k, vs in obj.get("transfers_in", {}).items()
            },
        )


@dataclass
class Turn:
    speaker: str  # USER or SYSTEM
    utterance: str = ""
    frames: list[Frame] = field(default_factory=list)

    def frame_for(self, service: str) -> Frame | None:
        for frame in self.frames:
            if frame.service == service:
                return frame
        return None

    def to_dict(self, include_user_actions: bool = True) -> dict:
        include_actions = include_user_actions or self.speaker == SYSTEM
        return {
            "speaker": self.speaker,
            "utterance": self.utterance,
            "frames": [f.to_dict(include_actions=include_actions) for f in self.frames],
        }

    @staticmethod
    def from_dict(obj: dict) -> "Turn":
        speaker = obj.get("speaker", "")
        if speaker not in (USER, SYSTEM):
            raise DialogueFormatError(f"unknown speaker {speaker!r}")
        utterance = obj.get("utterance", "")
        return Turn(
            speaker=speaker,
            utterance=utterance,
            frames=[Frame.from_dict(f, utterance) for f in obj.get("frames", [])],
        )


@dataclass
class Dialogue:
    dialogue_id: str
    services: list[str]
    turns: list[Turn]
    # generation provenance: scenario id, chosen value variants, applied transfers
    metadata: dict = field(default_factory=dict)

    def user_turns(self) -> list[tuple[int, Turn]]:
        return [(i, t) for i, t in enumerate(self.turns) if t.speaker == USER]

    def to_dict(self, include_user_actions: bool = True, include_metadata: bool = True) -> dict:
        out: dict = {
            "dialogue_id": self.dialogue_id,
            "services": list(self.services),
            "turns": [t.to_dict(include_user_actions=include_user_actions) for t in self.turns],
        }
        if include_metadata and self.metadata:
            out["metadata"] = self.metadata
        return out

    @staticmethod
    def from_dict(obj: dict) -> "Dialogue":
        if not isinstance(obj, dict):
            raise DialogueFormatError(f"dialogue should be an object, got {type(obj).__name__}")
        try:
            return Dialogue(
                dialogue_id=str(obj["dialogue_id"]),
                services=[str(s) for s in obj["services"]],
                turns=[Turn.from_dict(t) for t in obj["turns"]],
                metadata=dict(obj.get("metadata", {})),
            )
        except KeyError as exc:
            raise DialogueFormatError(f"missing key {exc.args[0]!r}")


def validate_dialogue(dialogue: Dialogue, schemas: dict | None = None) -> list[str]:
    """Structural checks every corpus dialogue must pass.

    Returns a list of problem strings (empty when the dialogue is clean).
    Covers turn alternation, goodbye termination, span soundness against the
    utterance, and (when schemas are given) state keys being real slots.
    """
    problems: list[str] = []
    did = dialogue.dialogue_id

    if not dialogue.turns:
        return [f"{did}: no turns"]
    for i, turn in enumerate(dialogue.turns):
        expected = USER if i % 2 == 0 else SYSTEM
        if turn.speaker != expected:
            problems.append(f"{did} turn {i}: speaker {turn.speaker}, expected {expected}")
    last_user = [t for t in dialogue.turns if t.speaker == USER]
    if last_user:
        acts = [a.act for f in last_user[-1].frames for a in f.actions]
        if acts and Act.GOODBYE not in acts:
            problems.append(f"{did}: final user turn does not contain GOODBYE")

    for i, turn in enumerate(dialogue.turns):
        for frame in turn.frames:
            if frame.service not in dialogue.services:
                problems.append(f"{did} turn {i}: frame service {frame.service!r} not listed")
            seen: list[tuple[int, int]] = []
            for span in frame.slots:
                if not (0 <= span.start <= span.end <= len(turn.utterance)):
                    problems.append(f"{did} turn {i}: span {span} out of range")
                    continue
                if turn.utterance[span.start:span.end] != span.value:
                    problems.append(
                        f"{did} turn {i}: span text "
                        f"{turn.utterance[span.start:span.end]!r} != {span.value!r}"
                    )
                for s, e in seen:
                    if span.start < e and s < span.end:
                        problems.append(f"{did} turn {i}: overlapping spans at {span.start}")
                seen.append((span.start, span.end))
            if schemas is not None and frame.state is not None:
                schema = schemas.get(frame.service)
                if schema is None:
                    continue
                known = set(schema.slot_names)
                for slot in frame.state.slot_values:
                    if slot not in known:
                        problems.append(f"{did} turn {i}: state slot {slot!r} not in schema")
                for slot in frame.state.requested_slots:
                    if slot not in known:
                        problems.append(f"{did} turn {i}: requested slot {slot!r} not in schema")
    return problems
