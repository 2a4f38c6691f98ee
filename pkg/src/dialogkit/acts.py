"""Dialogue act inventory and per-act argument rules.

Acts split by actor: only INFORM, REQUEST and GOODBYE may be produced by
both sides.  Every act has a fixed argument arity; Action enforces it at
construction time so malformed annotations cannot be built at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

# Pseudo-slot names used by acts whose argument is not a schema slot.
INTENT_SLOT = "intent"
COUNT_SLOT = "count"


class Act(str, Enum):
    # user only
    INFORM_INTENT = "INFORM_INTENT"
    NEGATE_INTENT = "NEGATE_INTENT"
    AFFIRM_INTENT = "AFFIRM_INTENT"
    AFFIRM = "AFFIRM"
    NEGATE = "NEGATE"
    SELECT = "SELECT"
    REQUEST_ALTS = "REQUEST_ALTS"
    THANK_YOU = "THANK_YOU"
    # system only
    CONFIRM = "CONFIRM"
    OFFER = "OFFER"
    NOTIFY_SUCCESS = "NOTIFY_SUCCESS"
    NOTIFY_FAILURE = "NOTIFY_FAILURE"
    INFORM_COUNT = "INFORM_COUNT"
    OFFER_INTENT = "OFFER_INTENT"
    REQ_MORE = "REQ_MORE"
    # both actors
    INFORM = "INFORM"
    REQUEST = "REQUEST"
    GOODBYE = "GOODBYE"


USER_ACTS = frozenset(
    {
        Act.INFORM_INTENT,
        Act.NEGATE_INTENT,
        Act.AFFIRM_INTENT,
        Act.INFORM,
        Act.REQUEST,
        Act.AFFIRM,
        Act.NEGATE,
        Act.SELECT,
        Act.REQUEST_ALTS,
        Act.THANK_YOU,
        Act.GOODBYE,
    }
)

SYSTEM_ACTS = frozenset(
    {
        Act.INFORM,
        Act.REQUEST,
        Act.CONFIRM,
        Act.OFFER,
        Act.NOTIFY_SUCCESS,
        Act.NOTIFY_FAILURE,
        Act.INFORM_COUNT,
        Act.OFFER_INTENT,
        Act.REQ_MORE,
        Act.GOODBYE,
    }
)


def actor_of(act: Act) -> str:
    """'user', 'system', or 'both'."""
    in_user = act in USER_ACTS
    in_system = act in SYSTEM_ACTS
    if in_user and in_system:
        return "both"
    return "user" if in_user else "system"


# act -> argument shape: "none", "slot", or "slot_value"
ARITY: dict[Act, str] = {
    Act.INFORM_INTENT: "slot_value",  # slot is always "intent"
    Act.NEGATE_INTENT: "none",
    Act.AFFIRM_INTENT: "none",
    Act.INFORM: "slot_value",
    Act.REQUEST: "slot",
    Act.AFFIRM: "none",
    Act.NEGATE: "none",
    Act.SELECT: "slot_value",
    Act.REQUEST_ALTS: "none",
    Act.THANK_YOU: "none",
    Act.GOODBYE: "none",
    Act.CONFIRM: "slot_value",
    Act.OFFER: "slot_value",
    Act.NOTIFY_SUCCESS: "none",
    Act.NOTIFY_FAILURE: "none",
    Act.INFORM_COUNT: "slot_value",  # slot is always "count"
    Act.OFFER_INTENT: "slot_value",  # slot is always "intent"
    Act.REQ_MORE: "none",
}


class ActionError(ValueError):
    """Raised when an (act, slot, value) combination is illegal."""


@dataclass(frozen=True)
class Action:
    """One annotated dialogue action."""

    act: Act
    slot: str | None = None
    value: str | None = None

    def __post_init__(self):
        arity = ARITY[self.act]
        if self.value is not None and self.slot is None:
            raise ActionError(f"{self.act.value}: value without slot")
        if arity == "none" and (self.slot is not None or self.value is not None):
            raise ActionError(f"{self.act.value} takes no arguments")
        # REQUEST may carry a suggested value and SELECT may drop both
        # arguments in human-annotated corpora; everything else is strict.
        if arity == "slot" and self.slot is None:
            raise ActionError(f"{self.act.value} takes a slot")
        if (
            arity == "slot_value"
            and self.act is not Act.SELECT
            and (self.slot is None or self.value is None)
        ):
            raise ActionError(f"{self.act.value} takes a slot and a value")
        if self.act in (Act.INFORM_INTENT, Act.OFFER_INTENT) and self.slot != INTENT_SLOT:
            raise ActionError(f"{self.act.value} slot must be {INTENT_SLOT!r}")
        if self.act is Act.INFORM_COUNT and self.slot != COUNT_SLOT:
            raise ActionError(f"{self.act.value} slot must be {COUNT_SLOT!r}")

    def to_dict(self) -> dict:
        return {
            "act": self.act.value,
            "slot": self.slot if self.slot is not None else "",
            "values": [self.value] if self.value is not None else [],
        }

    @staticmethod
    def from_dict(obj: dict) -> "Action":
        act = Act(obj["act"])
        slot = obj.get("slot") or None
        if "values" in obj:
            values = obj["values"]
            value = str(values[0]) if values else None
        else:
            value = obj.get("value")
        return Action(act=act, slot=slot, value=value)
