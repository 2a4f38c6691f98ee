"""Two-agent dialogue simulator producing fully annotated outlines.

A scenario fixes the user's plan: an ordered list of intents (possibly across
services) plus slot transfers between adjacent intents.  The user agent knows
the goal values (sampled from the backend so searches always succeed); the
system agent only sees what the user has said and may not call an intent until
every required slot is filled.  Both agents are probabilistic automata driven
by one shared RNG, so a (scenario, seed) pair fully determines the outline.

The automaton is domain-agnostic: every service-specific detail lives in the
schema, backend, and scenario fixtures.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from .acts import COUNT_SLOT, INTENT_SLOT, Act, Action, USER_ACTS, SYSTEM_ACTS
from .backend import Backend
from .dialogue import (
    Dialogue,
    Frame,
    FrameState,
    NONE_INTENT,
    ServiceCall,
    SYSTEM,
    Turn,
    USER,
)
from .schema import DONTCARE, ServiceSchema


class SimulationError(Exception):
    """The automaton could not finish a dialogue; carries a diagnostic."""

    def __init__(self, message: str, partial_turns: list[Turn] | None = None):
        super().__init__(message)
        self.partial_turns = partial_turns or []


class ScenarioError(Exception):
    """A scenario or catalog is inconsistent with the schemas."""


@dataclass(frozen=True)
class IntentRef:
    service: str
    intent: str

    def to_dict(self) -> dict:
        return {"service": self.service, "intent": self.intent}


@dataclass(frozen=True)
class SlotTransfer:
    """Carry an accepted value from one intent to the next at the switch."""

    source_service: str
    source_slot: str
    target_service: str
    target_slot: str


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    intent_refs: tuple[IntentRef, ...]
    transfers: tuple[SlotTransfer, ...] = ()
    weight: float = 1.0


@dataclass(frozen=True)
class SuggestionEdge:
    """After completing (service, intent) the system may offer next_intent."""

    service: str
    intent: str
    next_service: str
    next_intent: str


@dataclass
class ScenarioCatalog:
    scenarios: list[Scenario]
    suggestions: list[SuggestionEdge] = field(default_factory=list)

    def suggestion_after(self, service: str, intent: str) -> SuggestionEdge | None:
        for edge in self.suggestions:
            if edge.service == service and edge.intent == intent:
                return edge
        return None

    @staticmethod
    def from_dict(obj: dict) -> "ScenarioCatalog":
        scenarios = []
        for raw in obj.get("scenarios", []):
            scenarios.append(
                Scenario(
                    scenario_id=raw["scenario_id"],
                    intent_refs=tuple(
                        IntentRef(service=r["service"], intent=r["intent"])
                        for r in raw["intents"]
                    ),
                    transfers=tuple(
                        SlotTransfer(
                            source_service=t["source_service"],
                            source_slot=t["source_slot"],
                            target_service=t["target_service"],
                            target_slot=t["target_slot"],
                        )
                        for t in raw.get("transfers", [])
                    ),
                    weight=float(raw.get("weight", 1.0)),
                )
            )
        suggestions = [
            SuggestionEdge(
                service=e["service"],
                intent=e["intent"],
                next_service=e["next_service"],
                next_intent=e["next_intent"],
            )
            for e in obj.get("suggestions", [])
        ]
        return ScenarioCatalog(scenarios=scenarios, suggestions=suggestions)


def validate_catalog(catalog: ScenarioCatalog, schemas: dict[str, ServiceSchema]) -> None:
    """Raise ScenarioError on any reference to a missing service, intent, or slot."""

    def check_ref(where: str, service: str, intent: str):
        if service not in schemas:
            raise ScenarioError(f"{where}: unknown service {service!r}")
        if intent not in schemas[service].intent_names:
            raise ScenarioError(f"{where}: service {service!r} has no intent {intent!r}")

    for scenario in catalog.scenarios:
        sid = scenario.scenario_id
        if not 1 <= len(scenario.intent_refs) <= 5:
            raise ScenarioError(f"{sid}: needs 1..5 intents, has {len(scenario.intent_refs)}")
        if scenario.weight <= 0:
            raise ScenarioError(f"{sid}: weight must be positive")
        for ref in scenario.intent_refs:
            check_ref(sid, ref.service, ref.intent)
        adjacent = {
            (a.service, b.service)
            for a, b in zip(scenario.intent_refs, scenario.intent_refs[1:])
        }
        for t in scenario.transfers:
            if (t.source_service, t.target_service) not in adjacent:
                raise ScenarioError(
                    f"{sid}: transfer {t.source_slot}->{t.target_slot} does not join"
                    f" adjacent intents ({t.source_service} -> {t.target_service})"
                )
            if t.source_slot not in schemas[t.source_service].slot_names:
                raise ScenarioError(f"{sid}: unknown transfer source slot {t.source_slot!r}")
            if t.target_slot not in schemas[t.target_service].slot_names:
                raise ScenarioError(f"{sid}: unknown transfer target slot {t.target_slot!r}")
    for edge in catalog.suggestions:
        check_ref("suggestion", edge.service, edge.intent)
        check_ref("suggestion", edge.next_service, edge.next_intent)


def sample_scenario(catalog: ScenarioCatalog, rng: random.Random) -> Scenario:
    """Weight-proportional draw from the catalog."""
    if not catalog.scenarios:
        raise ScenarioError("catalog has no scenarios")
    weights = [s.weight for s in catalog.scenarios]
    return rng.choices(catalog.scenarios, weights=weights, k=1)[0]


@dataclass
class AutomatonConfig:
    """Transition probabilities and bounds for both agents."""

    max_turns: int = 60
    # user informs 1..max_informs_per_turn slots, geometric tail
    more_informs_prob: float = 0.45
    max_informs_per_turn: int = 3
    request_alts_prob: float = 0.15
    max_request_alts: int = 2
    request_info_prob: float = 0.35
    max_requested_slots: int = 2
    chain_announce_prob: float = 0.25
    suggest_intent_prob: float = 0.85
    inform_count_prob: float = 0.5
    offer_secondary_slot_prob: float = 0.4
    dontcare_prob: float = 0.12
    optional_constraint_prob: float = 0.5
    max_requests_per_turn: int = 2
    max_service_results: int = 10

    @staticmethod
    def from_dict(obj: dict) -> "AutomatonConfig":
        config = AutomatonConfig()
        known = set(config.__dataclass_fields__)
        bad = set(obj) - known
        if bad:
            raise ScenarioError(f"unknown automaton config keys {sorted(bad)}")
        return replace(config, **obj)


@dataclass
class IntentGoal:
    constraints: dict[str, str]  # slot -> canonical value (or dontcare)
    requestable: tuple[str, ...]  # result slots the user may ask about


def build_goal(
    scenario: Scenario,
    backends: dict[str, Backend],
    config: AutomatonConfig,
    rng: random.Random,
) -> list[IntentGoal]:
    """Sample goal values for every scenario intent.

    Search constraints come from one target entity row, so the later query is
    guaranteed a hit; optional constraints may degrade to dontcare.  Values
    for slots the table does not record come from the backend's user pools.
    """
    goals: list[IntentGoal] = []
    for ref in scenario.intent_refs:
        backend = backends[ref.service]
        schema = backend.schema
        intent = schema.intent_by_name(ref.intent)
        columns = backend.table.columns

        target: dict[str, str] | None = None
        if not intent.is_transactional:
            records = backend.table.records()
            if not records:
                raise SimulationError(f"backend {ref.service!r} has an empty table")
            target = rng.choice(records)

        constraints: dict[str, str] = {}
        for slot in intent.required_slots:
            if target is not None and slot in columns:
                constraints[slot] = target[slot]
            else:
                constraints[slot] = backend.sample_slot_value(slot, rng)
        for slot in intent.optional_slots:
            if rng.random() >= config.optional_constraint_prob:
                continue
            if not intent.is_transactional and rng.random() < config.dontcare_prob:
                constraints[slot] = DONTCARE
            elif target is not None and slot in columns:
                constraints[slot] = target[slot]
            else:
                constraints[slot] = backend.sample_slot_value(slot, rng)

        requestable = tuple(s for s in intent.result_slots if s in columns)
        goals.append(IntentGoal(constraints=constraints, requestable=requestable))
    return goals


@dataclass
class _SystemSignal:
    """What the system did last turn, as seen by the user agent."""

    requested: list[str] = field(default_factory=list)
    offered: list[tuple[str, str]] = field(default_factory=list)
    confirm: bool = False
    informed: list[str] = field(default_factory=list)
    offer_intent: IntentRef | None = None
    reqmore: bool = False
    notify: str | None = None


class _Sim:
    """Mutable state shared by the two agent step functions."""

    def __init__(
        self,
        scenario: Scenario,
        backends: dict[str, Backend],
        config: AutomatonConfig,
        rng: random.Random,
        catalog: ScenarioCatalog | None = None,
    ):
        self.scenario = scenario
        self.backends = backends
        self.config = config
        self.rng = rng
        self.catalog = catalog
        self.goals = build_goal(scenario, backends, config, rng)

        self.states: dict[str, FrameState] = {}
        self.services_seen: list[str] = []
        self.pos = 0
        self.announced = False
        self.completed = False
        self.pos_started = False

        # per-intent working set, reset on announcement
        self.offers: list[dict[str, str]] = []
        self.offer_idx = 0
        self.offer_made = False
        self.alts_used = 0
        self.informed_slots: set[str] = set()
        self.accepted_record: dict[str, str] | None = None
        self.accepted_pos = -1  # scenario position the record belongs to
        self.confirm_sent = False
        self.result_count = 0
        self.suggestion_used = False
        self.last_offer_pairs: list[tuple[str, str]] = []

        self.signal = _SystemSignal()
        self.user_requested: list[str] = []
        self.user_affirmed = False
        self.user_goodbye = False
        self.done = False
        self.applied_transfers: list[dict] = []
        self.turn_index = 0  # index of the user turn currently being composed

    # -- helpers ------------------------------------------------------------

    @property
    def ref(self) -> IntentRef:
        return self.scenario.intent_refs[self.pos]

    @property
    def goal(self) -> IntentGoal:
        return self.goals[self.pos]

    def backend(self) -> Backend:
        return self.backends[self.ref.service]

    def intent_def(self):
        return self.backend().schema.intent_by_name(self.ref.intent)

    def state(self, service: str) -> FrameState:
        if service not in self.states:
            self.states[service] = FrameState()
            self.services_seen.append(service)
        return self.states[service]

    def missing_required(self) -> list[str]:
        # a dontcare left over from an earlier search cannot satisfy a
        # required slot, so it still needs to be elicited
        state = self.state(self.ref.service)
        out = []
        for slot in self.intent_def().required_slots:
            values = state.slot_values.get(slot)
            if not values or values[0] == DONTCARE:
                out.append(slot)
        return out

    def call_args(self) -> dict[str, str]:
        """Canonical non-dontcare values for the active intent's arg slots."""
        intent = self.intent_def()
        state = self.state(self.ref.service)
        args: dict[str, str] = {}
        for slot in list(intent.required_slots) + list(intent.optional_slots):
            values = state.slot_values.get(slot)
            if values and values[0] != DONTCARE:
                args[slot] = values[0]
        return args

    def _reset_intent_stage(self):
        self.offers = []
        self.offer_idx = 0
        self.offer_made = False
        self.alts_used = 0
        self.informed_slots = set()
        self.confirm_sent = False
        self.result_count = 0
        self.suggestion_used = False
        self.last_offer_pairs = []
        self.announced = True
        self.completed = False
        self.pos_started = True

    def _num_informs(self) -> int:
        k = 1
        while (
            k < self.config.max_informs_per_turn
            and self.rng.random() < self.config.more_informs_prob
        ):
            k += 1
        return k

    def _announce(
        self,
        actions: list[tuple[str, Action]],
        transfers: dict[str, dict[str, list[str]]],
        with_inform_intent: bool = True,
    ):
        """Announce the current scenario intent and volunteer some goal slots.

        Actions appended earlier in the same turn (a SELECT before a chained
        announcement) are not in the canonical state yet, so transfer sources
        and already-filled slots are looked up through a same-turn overlay.
        """

        def turn_view(service: str) -> dict[str, list[str]]:
            view = {
                k: list(v)
                for k, v in self.states.get(service, FrameState()).slot_values.items()
            }
            for svc, action in actions:
                if svc == service and action.act in (Act.INFORM, Act.SELECT):
                    view[action.slot] = [action.value]
            return view

        ref = self.ref
        self.state(ref.service)  # make sure the frame exists before transfers
        if with_inform_intent:
            actions.append(
                (ref.service, Action(Act.INFORM_INTENT, slot=INTENT_SLOT, value=ref.intent))
            )
        target_view = turn_view(ref.service)
        if self.pos > 0:
            prev_ref = self.scenario.intent_refs[self.pos - 1]
            for t in self.scenario.transfers:
                if t.source_service != prev_ref.service or t.target_service != ref.service:
                    continue
                source_values = turn_view(t.source_service).get(t.source_slot)
                if (
                    not source_values
                    and self.accepted_record is not None
                    and self.accepted_pos == self.pos - 1
                ):
                    # the accepted entity supplies attributes the user never
                    # uttered, e.g. a booked restaurant's address as the cab
                    # destination
                    value = self.accepted_record.get(t.source_slot)
                    if value is not None:
                        source_values = [value]
                if not source_values or source_values[0] == DONTCARE:
                    continue
                if t.target_slot in target_view:
                    continue
                transfers.setdefault(ref.service, {})[t.target_slot] = list(source_values)
                self.applied_transfers.append(
                    {
                        "turn": self.turn_index,
                        "source_service": t.source_service,
                        "source_slot": t.source_slot,
                        "target_service": t.target_service,
                        "target_slot": t.target_slot,
                        "values": list(source_values),
                    }
                )
        self._reset_intent_stage()
        pending_transfer = set(transfers.get(ref.service, {}))
        available = [
            s
            for s in self.goal.constraints
            if s not in target_view and s not in pending_transfer
        ]
        k = min(self._num_informs(), len(available))
        for idx in sorted(self.rng.sample(range(len(available)), k)):
            slot = available[idx]
            actions.append(
                (ref.service, Action(Act.INFORM, slot=slot, value=self.goal.constraints[slot]))
            )

    def _close(self, actions: list[tuple[str, Action]], negate_act: Act | None):
        service = self.ref.service
        if negate_act is not None:
            actions.append((service, Action(negate_act)))
        actions.append((service, Action(Act.THANK_YOU)))
        actions.append((service, Action(Act.GOODBYE)))
        self.user_goodbye = True

    def _advance_or_close(
        self,
        actions: list[tuple[str, Action]],
        transfers: dict[str, dict[str, list[str]]],
        negate_act: Act | None,
    ):
        """After finishing an intent: announce the next one or say goodbye."""
        if self.pos + 1 < len(self.scenario.intent_refs):
            if negate_act is not None:
                actions.append((self.ref.service, Action(negate_act)))
            self.pos += 1
            self._announce(actions, transfers)
        else:
            self._close(actions, negate_act)


# ---------------------------------------------------------------------------
# Agent step functions


def user_step(
    sim: _Sim,
) -> tuple[list[tuple[str, Action]], dict[str, dict[str, list[str]]]]:
    """One user turn: a list of (service, action) plus transferred values."""
    actions: list[tuple[str, Action]] = []
    transfers: dict[str, dict[str, list[str]]] = {}
    signal = sim.signal
    config = sim.config
    rng = sim.rng
    sim.user_requested = []
    sim.user_affirmed = False

    if not sim.pos_started:
        sim._announce(actions, transfers)
        return actions, transfers

    if signal.requested:
        service = sim.ref.service
        for slot in signal.requested:
            value = sim.goal.constraints.get(slot)
            if value is None:
                value = sim.backend().sample_slot_value(slot, rng)
                sim.goal.constraints[slot] = value
            actions.append((service, Action(Act.INFORM, slot=slot, value=value)))
        return actions, transfers

    if signal.confirm:
        service = sim.ref.service
        actions.append((service, Action(Act.AFFIRM)))
        sim.user_affirmed = True
        candidates = [
            s
            for s in sim.goal.requestable
            if s not in sim.informed_slots and s not in sim.state(service).slot_values
        ]
        if candidates and rng.random() < config.request_info_prob:
            n = min(len(candidates), 1 + rng.randrange(config.max_requested_slots))
            for slot in candidates[:n]:
                actions.append((service, Action(Act.REQUEST, slot=slot)))
                sim.user_requested.append(slot)
        return actions, transfers

    if signal.offer_intent is not None:
        offered = signal.offer_intent
        nxt = (
            sim.scenario.intent_refs[sim.pos + 1]
            if sim.pos + 1 < len(sim.scenario.intent_refs)
            else None
        )
        if nxt is not None and offered == nxt:
            sim.pos += 1
            actions.append((offered.service, Action(Act.AFFIRM_INTENT)))
            sim._announce(actions, transfers, with_inform_intent=False)
        else:
            sim._advance_or_close(actions, transfers, Act.NEGATE_INTENT)
        return actions, transfers

    if signal.reqmore:
        if sim.pos + 1 < len(sim.scenario.intent_refs):
            sim.pos += 1
            sim._announce(actions, transfers)
        else:
            sim._close(actions, Act.NEGATE)
        return actions, transfers

    if signal.offered or signal.informed:
        # an offer is on the table (possibly just clarified by system informs)
        service = sim.ref.service
        record = sim.offers[sim.offer_idx]
        can_alts = (
            sim.alts_used < config.max_request_alts
            and sim.offer_idx + 1 < len(sim.offers)
            and not signal.informed
        )
        if can_alts and rng.random() < config.request_alts_prob:
            actions.append((service, Action(Act.REQUEST_ALTS)))
            sim.alts_used += 1
            return actions, transfers
        candidates = [
            s
            for s in sim.goal.requestable
            if s not in sim.informed_slots and s not in dict(signal.offered) and s in record
        ]
        if candidates and not signal.informed and rng.random() < config.request_info_prob:
            n = min(len(candidates), 1 + rng.randrange(config.max_requested_slots))
            for slot in candidates[:n]:
                actions.append((service, Action(Act.REQUEST, slot=slot)))
                sim.user_requested.append(slot)
            return actions, transfers
        offered_pairs = signal.offered or sim.last_offer_pairs
        slot, value = offered_pairs[0]
        actions.append((service, Action(Act.SELECT, slot=slot, value=value)))
        sim.accepted_record = record
        sim.accepted_pos = sim.pos
        sim.completed = True
        if (
            sim.pos + 1 < len(sim.scenario.intent_refs)
            and rng.random() < config.chain_announce_prob
        ):
            sim.pos += 1
            sim._announce(actions, transfers)
        return actions, transfers

    raise SimulationError(
        f"user agent has no move at scenario {sim.scenario.scenario_id!r} "
        f"position {sim.pos} (announced={sim.announced}, completed={sim.completed})"
    )


def system_step(
    sim: _Sim,
) -> tuple[list[tuple[str, Action]], dict[str, tuple[ServiceCall, list[dict[str, str]]]]]:
    """One system turn: actions plus any service calls made."""
    actions: list[tuple[str, Action]] = []
    calls: dict[str, tuple[ServiceCall, list[dict[str, str]]]] = {}
    signal = _SystemSignal()
    config = sim.config
    rng = sim.rng

    if sim.user_goodbye:
        sim.signal = signal
        sim.done = True
        return [(sim.ref.service, Action(Act.GOODBYE))], calls

    service = sim.ref.service
    backend = sim.backends[service]
    intent = sim.intent_def()

    if sim.announced and not sim.completed:
        if not intent.is_transactional:
            if sim.user_requested and sim.offer_made:
                record = sim.offers[sim.offer_idx]
                for slot in sim.user_requested:
                    actions.append(
                        (service, Action(Act.INFORM, slot=slot, value=record.get(slot, "")))
                    )
                    signal.informed.append(slot)
                    sim.informed_slots.add(slot)
                sim.user_requested = []
                sim.signal = signal
                return actions, calls
            missing = sim.missing_required()
            if missing:
                for slot in missing[: config.max_requests_per_turn]:
                    actions.append((service, Action(Act.REQUEST, slot=slot)))
                    signal.requested.append(slot)
                sim.signal = signal
                return actions, calls
            if not sim.offer_made:
                args = sim.call_args()
                result = backend.query(sim.ref.intent, args, rng=rng)
                sim.offers = result.rows
                sim.offer_idx = 0
                sim.offer_made = True
                sim.result_count = result.count
                calls[service] = (
                    ServiceCall(method=sim.ref.intent, parameters=args),
                    result.rows[: config.max_service_results],
                )
                if not sim.offers:
                    actions.append((service, Action(Act.NOTIFY_FAILURE)))
                    signal.notify = "failure"
                    sim.completed = True
                    _post_completion(sim, actions, signal)
                    sim.signal = signal
                    return actions, calls
                if result.count > 1 and rng.random() < config.inform_count_prob:
                    actions.append(
                        (
                            service,
                            Action(Act.INFORM_COUNT, slot=COUNT_SLOT, value=str(result.count)),
                        )
                    )
            else:
                # only reachable after a user REQUEST_ALTS
                sim.offer_idx += 1
            record = sim.offers[sim.offer_idx]
            pairs = _offer_pairs(sim, backend, record)
            for slot, value in pairs:
                actions.append((service, Action(Act.OFFER, slot=slot, value=value)))
            signal.offered = pairs
            sim.last_offer_pairs = pairs
            sim.signal = signal
            return actions, calls

        # transactional intent
        missing = sim.missing_required()
        if missing:
            for slot in missing[: config.max_requests_per_turn]:
                actions.append((service, Action(Act.REQUEST, slot=slot)))
                signal.requested.append(slot)
            sim.signal = signal
            return actions, calls
        if not sim.confirm_sent:
            for slot, value in sim.call_args().items():
                actions.append((service, Action(Act.CONFIRM, slot=slot, value=value)))
            sim.confirm_sent = True
            signal.confirm = True
            sim.signal = signal
            return actions, calls
        if sim.user_affirmed:
            args = sim.call_args()
            result = backend.query(sim.ref.intent, args, rng=rng)
            calls[service] = (
                ServiceCall(method=sim.ref.intent, parameters=args),
                result.rows[: config.max_service_results],
            )
            if result.transaction_status == "success":
                actions.append((service, Action(Act.NOTIFY_SUCCESS)))
                signal.notify = "success"
                sim.accepted_record = result.rows[0]
                sim.accepted_pos = sim.pos
                for slot in sim.user_requested:
                    actions.append(
                        (
                            service,
                            Action(Act.INFORM, slot=slot, value=sim.accepted_record.get(slot, "")),
                        )
                    )
                    signal.informed.append(slot)
                    sim.informed_slots.add(slot)
            else:
                actions.append((service, Action(Act.NOTIFY_FAILURE)))
                signal.notify = "failure"
            sim.user_requested = []
            sim.completed = True
            _post_completion(sim, actions, signal)
            sim.signal = signal
            return actions, calls

    if sim.completed:
        _post_completion(sim, actions, signal)
        sim.signal = signal
        return actions, calls

    raise SimulationError(
        f"system agent has no move at scenario {sim.scenario.scenario_id!r} "
        f"position {sim.pos} (announced={sim.announced}, completed={sim.completed})"
    )


def _offer_pairs(sim: _Sim, backend: Backend, record: dict[str, str]) -> list[tuple[str, str]]:
    """Which slots of an entity the system volunteers in an OFFER."""
    args = set(sim.call_args())
    informable = set(backend.schema.informable_slots())
    columns = list(backend.table.columns)
    primary = None
    for col in columns:
        if col in informable and col not in args:
            primary = col
            break
    if primary is None:
        for col in columns:
            if col not in args:
                primary = col
                break
    if primary is None:
        primary = columns[0]
    pairs = [(primary, record[primary])]
    if sim.rng.random() < sim.config.offer_secondary_slot_prob:
        for col in columns:
            if col != primary and col not in args:
                pairs.append((col, record[col]))
                break
    return pairs


def _post_completion(sim: _Sim, actions: list[tuple[str, Action]], signal: _SystemSignal):
    """Append the directive that follows a finished intent."""
    edge = (
        sim.catalog.suggestion_after(sim.ref.service, sim.ref.intent)
        if sim.catalog is not None
        else None
    )
    if (
        edge is not None
        and not sim.suggestion_used
        and sim.rng.random() < sim.config.suggest_intent_prob
    ):
        sim.suggestion_used = True
        target = IntentRef(service=edge.next_service, intent=edge.next_intent)
        actions.append(
            (target.service, Action(Act.OFFER_INTENT, slot=INTENT_SLOT, value=target.intent))
        )
        signal.offer_intent = target
    else:
        actions.append((sim.ref.service, Action(Act.REQ_MORE)))
        signal.reqmore = True


# ---------------------------------------------------------------------------
# Outline assembly


def _apply_user_actions(
    sim: _Sim,
    actions: list[tuple[str, Action]],
    transfers: dict[str, dict[str, list[str]]],
) -> Turn:
    """Mutate canonical states with one user turn and snapshot the frames."""
    announcing = {
        service
        for service, action in actions
        if action.act in (Act.INFORM_INTENT, Act.AFFIRM_INTENT)
    }
    if announcing:
        active_ref = sim.ref
        for service in sim.services_seen:
            if service not in announcing:
                sim.states[service].active_intent = NONE_INTENT
        sim.states[active_ref.service].active_intent = active_ref.intent

    for service, slot_map in transfers.items():
        for slot, values in slot_map.items():
            sim.state(service).slot_values[slot] = list(values)

    requested: dict[str, list[str]] = {}
    for service, action in actions:
        state = sim.state(service)
        if action.act in (Act.INFORM, Act.SELECT):
            state.slot_values[action.slot] = [action.value]
        elif action.act is Act.REQUEST:
            requested.setdefault(service, []).append(action.slot)
    for service in sim.services_seen:
        sim.states[service].requested_slots = tuple(requested.get(service, []))

    frames = []
    for service in sim.services_seen:
        frames.append(
            Frame(
                service=service,
                actions=[a for s, a in actions if s == service],
                state=sim.states[service].copy(),
                transfers_in={k: list(v) for k, v in transfers.get(service, {}).items()},
            )
        )
    return Turn(speaker=USER, frames=frames)


def _make_system_turn(
    actions: list[tuple[str, Action]],
    calls: dict[str, tuple[ServiceCall, list[dict[str, str]]]],
) -> Turn:
    order: list[str] = []
    for service, _ in actions:
        if service not in order:
            order.append(service)
    for service in calls:
        if service not in order:
            order.append(service)
    frames = []
    for service in order:
        frame = Frame(service=service, actions=[a for s, a in actions if s == service])
        if service in calls:
            call, results = calls[service]
            frame.service_call = call
            frame.service_results = results
        frames.append(frame)
    return Turn(speaker=SYSTEM, frames=frames)


def generate_outline(
    scenario: Scenario,
    backends: dict[str, Backend],
    config: AutomatonConfig,
    rng: random.Random,
    dialogue_id: str = "00000",
    catalog: ScenarioCatalog | None = None,
) -> Dialogue:
    """Run the two agents to completion and return the annotated outline."""
    for ref in scenario.intent_refs:
        if ref.service not in backends:
            raise ScenarioError(f"no backend for service {ref.service!r}")
    sim = _Sim(scenario, backends, config, rng, catalog=catalog)

    turns: list[Turn] = []
    while not sim.done:
        if len(turns) >= config.max_turns:
            raise SimulationError(
                f"turn cap {config.max_turns} exceeded in scenario "
                f"{scenario.scenario_id!r} at position {sim.pos} "
                f"(announced={sim.announced}, completed={sim.completed})",
                partial_turns=turns,
            )
        sim.turn_index = len(turns)
        user_actions, transfers = user_step(sim)
        turns.append(_apply_user_actions(sim, user_actions, transfers))
        system_actions, calls = system_step(sim)
        turns.append(_make_system_turn(system_actions, calls))

    services = list(sim.services_seen)
    for turn in turns:
        for frame in turn.frames:
            if frame.service not in services:
                services.append(frame.service)
    metadata = {
        "scenario_id": scenario.scenario_id,
        "applied_transfers": sim.applied_transfers,
    }
    return Dialogue(dialogue_id=dialogue_id, services=services, turns=turns, metadata=metadata)


# ---------------------------------------------------------------------------
# Outline validation (used by tests and the generation pipeline)


def _replay_active_intent(
    turn: Turn, frame: Frame, prev_active: str, prev_system: Turn | None
) -> str:
    acts = [a.act for a in frame.actions]
    if Act.INFORM_INTENT in acts:
        for a in frame.actions:
            if a.act is Act.INFORM_INTENT:
                return a.value
    if Act.AFFIRM_INTENT in acts and prev_system is not None:
        offered = prev_system.frame_for(frame.service)
        if offered is not None:
            for a in offered.actions:
                if a.act is Act.OFFER_INTENT:
                    return a.value
    announced_elsewhere = any(
        a.act in (Act.INFORM_INTENT, Act.AFFIRM_INTENT)
        for f in turn.frames
        if f.service != frame.service
        for a in f.actions
    )
    if announced_elsewhere:
        return NONE_INTENT
    return prev_active


def validate_outline(
    dialogue: Dialogue,
    schemas: dict[str, ServiceSchema],
    aliases: dict[str, str] | None = None,
) -> list[str]:
    """Check every simulator invariant on one outline; returns problems.

    aliases maps canonical values to their chosen paraphrase variant; pass the
    dialogue's value_variations metadata when checking a varied dialogue, or
    leave it None for an exact canonical replay.
    """
    problems: list[str] = []
    did = dialogue.dialogue_id
    aliases = aliases or {}
    reverse = {v: k for k, v in aliases.items()}

    if not dialogue.turns:
        return [f"{did}: empty dialogue"]

    # alternation and actor legality
    for i, turn in enumerate(dialogue.turns):
        expected = USER if i % 2 == 0 else SYSTEM
        if turn.speaker != expected:
            problems.append(f"{did} turn {i}: speaker {turn.speaker}, expected {expected}")
        legal = USER_ACTS if turn.speaker == USER else SYSTEM_ACTS
        for frame in turn.frames:
            for action in frame.actions:
                if action.act not in legal:
                    problems.append(
                        f"{did} turn {i}: {turn.speaker} may not use {action.act.value}"
                    )

    last = dialogue.turns[-1]
    if last.speaker != SYSTEM or Act.GOODBYE not in [
        a.act for f in last.frames for a in f.actions
    ]:
        problems.append(f"{did}: dialogue does not end with a system GOODBYE")
    user_turns = [t for t in dialogue.turns if t.speaker == USER]
    if user_turns:
        final_acts = [a.act for f in user_turns[-1].frames for a in f.actions]
        if Act.GOODBYE not in final_acts:
            problems.append(f"{did}: final user turn lacks GOODBYE")

    # required-slot safety for every recorded service call
    for i, turn in enumerate(dialogue.turns):
        if turn.speaker != SYSTEM:
            continue
        for frame in turn.frames:
            if frame.service_call is None:
                continue
            schema = schemas.get(frame.service)
            if schema is None:
                problems.append(f"{did} turn {i}: call to unknown service {frame.service!r}")
                continue
            try:
                intent = schema.intent_by_name(frame.service_call.method)
            except KeyError:
                problems.append(
                    f"{did} turn {i}: call to unknown intent {frame.service_call.method!r}"
                )
                continue
            for slot in intent.required_slots:
                if slot not in frame.service_call.parameters:
                    problems.append(
                        f"{did} turn {i}: {frame.service}.{frame.service_call.method} "
                        f"called without required slot {slot!r}"
                    )

    # state replay per service
    states: dict[str, FrameState] = {}
    prev_system: Turn | None = None
    for i, turn in enumerate(dialogue.turns):
        if turn.speaker == SYSTEM:
            prev_system = turn
            continue
        for frame in turn.frames:
            if frame.state is None:
                problems.append(f"{did} turn {i}: user frame without state")
                continue
            prev = states.get(frame.service, FrameState())
            expected_active = _replay_active_intent(turn, frame, prev.active_intent, prev_system)
            expected_requested = tuple(a.slot for a in frame.actions if a.act is Act.REQUEST)
            expected_values = {k: list(v) for k, v in prev.slot_values.items()}
            for slot, values in frame.transfers_in.items():
                expected_values[slot] = list(values)
            for action in frame.actions:
                if action.act in (Act.INFORM, Act.SELECT):
                    expected_values[action.slot] = [action.value]

            state = frame.state
            if state.active_intent != expected_active:
                problems.append(
                    f"{did} turn {i} {frame.service}: active_intent "
                    f"{state.active_intent!r} != replayed {expected_active!r}"
                )
            if tuple(sorted(state.requested_slots)) != tuple(sorted(expected_requested)):
                problems.append(
                    f"{did} turn {i} {frame.service}: requested {state.requested_slots} "
                    f"!= replayed {expected_requested}"
                )
            if set(state.slot_values) != set(expected_values):
                problems.append(
                    f"{did} turn {i} {frame.service}: state slots "
                    f"{sorted(state.slot_values)} != replayed {sorted(expected_values)}"
                )
            else:
                for slot, expect in expected_values.items():
                    got = state.slot_values[slot]
                    closure: set[str] = set()
                    for v in expect:
                        closure.add(v)
                        if v in aliases:
                            closure.add(aliases[v])
                        if v in reverse:
                            closure.add(reverse[v])
                    for v in expect:
                        forms = {v, aliases.get(v), reverse.get(v)} - {None}
                        if not forms & set(got):
                            problems.append(
                                f"{did} turn {i} {frame.service}.{slot}: value {v!r} "
                                f"missing from state {got}"
                            )
                    if not set(got) <= closure:
                        problems.append(
                            f"{did} turn {i} {frame.service}.{slot}: unexpected values "
                            f"{sorted(set(got) - closure)}"
                        )
            states[frame.service] = state.copy()

    # transfer correctness: every transferred value must be traceable to the
    # source service, either through its user state or through an entity the
    # system returned for it
    recorded = dialogue.metadata.get("applied_transfers", [])
    by_turn: dict[int, list[dict]] = {}
    for entry in recorded:
        by_turn.setdefault(entry["turn"], []).append(entry)
    replay_states: dict[str, FrameState] = {}
    seen_results: dict[str, set[tuple[str, str]]] = {}
    for i, turn in enumerate(dialogue.turns):
        if turn.speaker == SYSTEM:
            for frame in turn.frames:
                bag = seen_results.setdefault(frame.service, set())
                for record in frame.service_results or []:
                    for slot, value in record.items():
                        bag.add((slot, value))
            continue
        for entry in by_turn.get(i, []):
            source_state = replay_states.get(entry["source_service"])
            frame = turn.frame_for(entry["source_service"])
            current = dict(source_state.slot_values) if source_state else {}
            if frame is not None:
                for action in frame.actions:
                    if action.act in (Act.INFORM, Act.SELECT):
                        current[action.slot] = [action.value]
            source_values = current.get(entry["source_slot"])
            value = entry["values"][0]
            from_state = source_values is not None and source_values[0] == value
            from_results = (entry["source_slot"], value) in seen_results.get(
                entry["source_service"], set()
            )
            if not from_state and not from_results:
                problems.append(
                    f"{did} turn {i}: transfer {entry['source_slot']}->"
                    f"{entry['target_slot']} value {entry['values']} matches neither "
                    f"source state {source_values} nor any returned entity"
                )
        for frame in turn.frames:
            if frame.state is not None:
                replay_states[frame.service] = frame.state
    return problems
