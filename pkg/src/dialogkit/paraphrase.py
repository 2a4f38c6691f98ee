"""Value variation, template rendering, span search, and paraphrase checks.

Outlines leave the simulator with every slot value in the canonical form the
backend produced.  This module (a) swaps user-side surfaces for natural
variants while keeping one consistent choice per dialogue, (b) renders each
action through an utterance template and concatenates per turn, (c) recovers
character spans for slot values by string search, and (d) validates human
paraphrases by requiring every slot value verbatim.
"""

from __future__ import annotations

import copy
import datetime as _dt
import random
import re
from dataclasses import dataclass, field

from .acts import ARITY, Act, Action, COUNT_SLOT, INTENT_SLOT
from .backend import TODAY
from .dialogue import Dialogue, Frame, SlotSpan, Turn, USER
from .schema import DONTCARE


class MissingTemplate(Exception):
    def __init__(self, key: str):
        super().__init__(f"no template for {key}")
        self.key = key


_ORDINAL = {1: "st", 2: "nd", 3: "rd", 21: "st", 22: "nd", 23: "rd", 31: "st"}


def _ordinal(day: int) -> str:
    return f"{day}{_ORDINAL.get(day, 'th')}"


def date_variants(value: str, today: _dt.date = TODAY) -> list[str]:
    """Natural surfaces for an ISO date, including relative forms."""
    try:
        day = _dt.date.fromisoformat(value)
    except ValueError:
        return []
    month = day.strftime("%B")
    out = [
        f"{month} {_ordinal(day.day)}",
        f"{month} {day.day}",
        f"the {_ordinal(day.day)} of {month}",
    ]
    if (day.year, day.month) == (today.year, today.month):
        out.append(f"the {_ordinal(day.day)} of this month")
    delta = (day - today).days
    if delta == 0:
        out.append("today")
    elif delta == 1:
        out.append("tomorrow")
    elif delta == 2:
        out.append("the day after tomorrow")
    weekday = day.strftime("%A")
    if 1 <= delta <= 6:
        out.append(f"this {weekday}")
    elif 7 <= delta <= 13:
        out.append(f"next {weekday}")
    return out


_TIME_RE = re.compile(r"^(\d{1,2}):(\d{2}) (am|pm)$")


def time_variants(value: str) -> list[str]:
    """Natural surfaces for a "h:mm am" style clock time."""
    m = _TIME_RE.match(value)
    if not m:
        return []
    hour, minute, half = int(m.group(1)), int(m.group(2)), m.group(3)
    hour24 = hour % 12 + (12 if half == "pm" else 0)
    if half == "am":
        part = "morning"
    elif hour24 < 17:
        part = "afternoon"
    else:
        part = "evening"
    out = [
        f"{hour}:{minute:02d} {half.upper()}",
        f"{hour24:02d}:{minute:02d}",
        f"{hour}:{minute:02d} in the {part}",
    ]
    if minute == 0:
        out.append(f"{hour} {half}")
    return out


@dataclass
class VariationTable:
    """Canonical value -> candidate surface variants.

    Explicit entries win; otherwise date- and time-shaped values get
    generated variants anchored to the corpus date.  A value with no entry
    and no recognized shape varies only to itself.
    """

    values: dict[str, list[str]] = field(default_factory=dict)
    date_forms: bool = True
    time_forms: bool = True

    def variants_for(self, value: str) -> list[str]:
        if value in self.values:
            seen = []
            for v in self.values[value]:
                if v not in seen:
                    seen.append(v)
            return seen
        if self.date_forms:
            forms = date_variants(value)
            if forms:
                return forms
        if self.time_forms:
            forms = time_variants(value)
            if forms:
                return forms
        return []

    @staticmethod
    def from_dict(obj: dict) -> "VariationTable":
        return VariationTable(
            values={k: list(v) for k, v in obj.get("values", {}).items()},
            date_forms=bool(obj.get("date_forms", True)),
            time_forms=bool(obj.get("time_forms", True)),
        )


def _real_slot_value(action: Action) -> bool:
    """True for actions carrying a schema slot value worth varying/spanning."""
    return (
        ARITY[action.act] == "slot_value"
        and action.slot not in (INTENT_SLOT, COUNT_SLOT)
        and action.value != DONTCARE
    )


def vary_values(
    dialogue: Dialogue, table: VariationTable, rng: random.Random
) -> Dialogue:
    """Swap user-side value surfaces for one consistent variant per value.

    System actions keep the canonical surface.  Every state list that held
    [canonical] grows to [canonical, variant] so downstream consumers accept
    either surface.  The chosen mapping lands in metadata["value_variations"].
    """
    out = copy.deepcopy(dialogue)
    chosen: dict[str, str] = {}

    def choose(value: str) -> str:
        if value not in chosen:
            variants = table.variants_for(value)
            chosen[value] = rng.choice(variants) if variants else value
        return chosen[value]

    def patch_state_list(values: list[str]) -> list[str]:
        if len(values) == 1:
            canonical = values[0]
            variant = chosen.get(canonical, canonical)
            if variant != canonical:
                return [canonical, variant]
        return values

    for turn in out.turns:
        if turn.speaker != USER:
            continue
        for frame in turn.frames:
            new_actions = []
            for action in frame.actions:
                if _real_slot_value(action):
                    action = Action(action.act, slot=action.slot, value=choose(action.value))
                new_actions.append(action)
            frame.actions = new_actions
            if frame.state is not None:
                frame.state.slot_values = {
                    slot: patch_state_list(values)
                    for slot, values in frame.state.slot_values.items()
                }
            frame.transfers_in = {
                slot: patch_state_list(values)
                for slot, values in frame.transfers_in.items()
            }
    variations = {k: v for k, v in chosen.items() if v != k}
    if variations:
        out.metadata["value_variations"] = variations
    return out


_PLACEHOLDER_RE = re.compile(r"\$(?:\{)?(slot|value)(?:\})?")


@dataclass
class TemplateSet:
    """Utterance templates keyed by act, with slot and service refinements.

    Lookup for an action (act A, slot s, value v), most specific first:
    "A.s.v", then "A.s", then "A.v", then "A"; each key is tried in the
    service's override map before the defaults.  The value keys carry
    per-intent phrasings ("INFORM_INTENT.intent.FindRestaurants") and the
    generic dontcare reading ("INFORM.dontcare").  Templates use $slot and
    $value placeholders.
    """

    defaults: dict[str, str] = field(default_factory=dict)
    services: dict[str, dict[str, str]] = field(default_factory=dict)

    @staticmethod
    def from_dict(obj: dict) -> "TemplateSet":
        return TemplateSet(
            defaults=dict(obj.get("defaults", {})),
            services={k: dict(v) for k, v in obj.get("services", {}).items()},
        )

    def lookup(self, service: str, action: Action) -> str:
        keys = []
        if action.slot and action.value:
            keys.append(f"{action.act.value}.{action.slot}.{action.value}")
        if action.slot:
            keys.append(f"{action.act.value}.{action.slot}")
        if action.value:
            keys.append(f"{action.act.value}.{action.value}")
        keys.append(action.act.value)
        override = self.services.get(service, {})
        for key in keys:
            if key in override:
                return override[key]
            if key in self.defaults:
                return self.defaults[key]
        raise MissingTemplate(keys[-1])

    def render(self, service: str, action: Action) -> str:
        template = self.lookup(service, action)

        def fill(match: re.Match) -> str:
            name = match.group(1)
            if name == "slot":
                return (action.slot or "").replace("_", " ")
            return action.value or ""

        return _PLACEHOLDER_RE.sub(fill, template)


def check_templates(templates: TemplateSet) -> list[str]:
    """Coverage and placeholder problems, empty when the set is usable."""
    problems = []
    for act in Act:
        if act.value not in templates.defaults:
            problems.append(f"no default template for act {act.value}")
    allowed_by_arity = {"none": set(), "slot": {"slot"}, "slot_value": {"slot", "value"}}
    maps = [("defaults", templates.defaults)]
    maps += [(f"services.{s}", m) for s, m in templates.services.items()]
    for where, mapping in maps:
        for key, template in mapping.items():
            act_name = key.split(".", 1)[0]
            try:
                act = Act(act_name)
            except ValueError:
                problems.append(f"{where}: key {key!r} names no act")
                continue
            allowed = set(allowed_by_arity[ARITY[act]])
            if key.endswith(".dontcare"):
                allowed.discard("value")  # the marker itself is never rendered
            used = {m.group(1) for m in _PLACEHOLDER_RE.finditer(template)}
            extra = used - allowed
            if extra:
                problems.append(
                    f"{where}.{key}: placeholders {sorted(extra)} not bindable for "
                    f"{ARITY[act]} arity"
                )
    return problems


def _fold(text: str) -> str:
    """Per-character lowercase that never changes string length."""
    out = []
    for ch in text:
        low = ch.lower()
        out.append(low if len(low) == 1 else ch)
    return "".join(out)


def _find_spans_indexed(
    utterance: str, expected: list[tuple[str, str]]
) -> dict[int, SlotSpan]:
    """Map expected-pair index -> claimed span; absent index means missing."""
    hay = _fold(utterance)
    order = sorted(range(len(expected)), key=lambda i: -len(expected[i][1]))
    claims: list[tuple[int, int]] = []
    found: dict[int, SlotSpan] = {}
    for i in order:
        slot, value = expected[i]
        needle = _fold(value)
        if not needle:
            continue
        pos = 0
        while True:
            idx = hay.find(needle, pos)
            if idx < 0:
                break
            end = idx + len(needle)
            if any(idx < ce and cs < end for cs, ce in claims):
                pos = idx + 1
                continue
            claims.append((idx, end))
            found[i] = SlotSpan(slot=slot, start=idx, end=end, value=utterance[idx:end])
            break
    return found


def find_slot_spans(
    utterance: str, expected: list[tuple[str, str]]
) -> tuple[list[SlotSpan], list[tuple[str, str]]]:
    """Locate each expected value in the utterance by string search.

    Case-insensitive, offsets index the original text, each value claims its
    leftmost occurrence that overlaps no earlier claim.  Longer values claim
    first so a short value never sits inside a longer one's match; returned
    spans follow the order of `expected`.  Unlocated values come back in the
    missing list instead of raising.
    """
    found = _find_spans_indexed(utterance, expected)
    spans = [found[i] for i in sorted(found)]
    missing = [expected[i] for i in range(len(expected)) if i not in found]
    return spans, missing


def _is_noncategorical(schemas, service: str, slot: str) -> bool:
    """Unknown services or slots count as non-categorical (conservative)."""
    schema = schemas.get(service) if schemas else None
    if schema is None:
        return True
    try:
        return not schema.slot_by_name(slot).is_categorical
    except KeyError:
        return True


def _frame_slot_values(frame: Frame, schemas=None) -> list[tuple[str, str]]:
    """Slot values in a frame's actions that the span contract covers.

    With schemas supplied, categorical values are excluded: their templates
    phrase them freely ("make it private" for True), so only non-categorical
    values must appear verbatim and carry spans.
    """
    out = []
    for a in frame.actions:
        if not _real_slot_value(a):
            continue
        if schemas is not None and not _is_noncategorical(schemas, frame.service, a.slot):
            continue
        out.append((a.slot, a.value))
    return out


def turn_slot_values(turn: Turn, schemas=None) -> list[tuple[str, str, str]]:
    """(service, slot, value) for every span-covered value uttered in a turn."""
    out = []
    for frame in turn.frames:
        for slot, value in _frame_slot_values(frame, schemas):
            out.append((frame.service, slot, value))
    return out


def render_templates(dialogue: Dialogue, templates: TemplateSet, schemas=None) -> Dialogue:
    """Fill turn utterances from action templates and attach slot spans.

    One sentence per action, concatenated with single spaces in action order.
    Acts, states, and turn structure pass through untouched.  When schemas
    are given, spans cover non-categorical values only.
    """
    out = copy.deepcopy(dialogue)
    for turn in out.turns:
        sentences = []
        for frame in turn.frames:
            for action in frame.actions:
                sentences.append(templates.render(frame.service, action))
        turn.utterance = " ".join(sentences)
        expected: list[tuple[str, str]] = []
        frame_of: list[Frame] = []
        for frame in turn.frames:
            frame.slots = []
            for pair in _frame_slot_values(frame, schemas):
                expected.append(pair)
                frame_of.append(frame)
        found = _find_spans_indexed(turn.utterance, expected)
        for i, span in sorted(found.items()):
            frame_of[i].slots.append(span)
        for frame in turn.frames:
            frame.slots.sort(key=lambda s: s.start)
    return out


@dataclass
class ValidationResult:
    """Outcome of checking one human paraphrase against its turn."""

    accepted: bool
    spans: list[SlotSpan]
    missing: list[tuple[str, str]]

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "spans": [s.to_dict() for s in self.spans],
            "missing": [{"slot": slot, "value": value} for slot, value in self.missing],
        }


def validate_paraphrase(turn: Turn, text: str, schemas=None) -> ValidationResult:
    """Accept iff every covered slot value of the turn appears verbatim."""
    expected = [(slot, value) for _svc, slot, value in turn_slot_values(turn, schemas)]
    spans, missing = find_slot_spans(text, expected)
    return ValidationResult(accepted=not missing, spans=spans, missing=missing)
