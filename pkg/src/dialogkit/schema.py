"""Service schema definitions: loading, validation, and embedding input pairs.

A service is described declaratively by its slots and intents.  Slots are
either categorical (closed value set, listed in the schema) or free-form
(values are arbitrary strings extracted from text).  Intents are either
transactional (they change state in the backing service and need explicit
confirmation) or searches.  All natural language descriptions are load-bearing:
the tracker conditions on them, so empty descriptions are validation errors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

# Reserved slot value meaning "no preference"; never a real backend value.
DONTCARE = "dontcare"


class SchemaError(Exception):
    """Base class for schema problems."""


class SchemaParseError(SchemaError):
    """The input is not JSON, or the JSON does not have the schema shape."""


class SchemaValidationError(SchemaError):
    """A structurally well-formed schema violates a semantic invariant."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("; ".join(f.message for f in report.findings))


@dataclass(frozen=True)
class Finding:
    """One invariant violation: offending element, rule id, human message."""

    element: str
    rule: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.findings

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "\n".join(f"{f.element}: [{f.rule}] {f.message}" for f in self.findings)


@dataclass(frozen=True)
class SlotDef:
    name: str
    description: str
    is_categorical: bool = False
    possible_values: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "is_categorical": self.is_categorical,
            "possible_values": list(self.possible_values),
        }


@dataclass(frozen=True)
class IntentDef:
    name: str
    description: str
    is_transactional: bool = False
    required_slots: tuple[str, ...] = ()
    # optional slot name -> default value used when the caller omits it
    optional_slots: dict[str, str] = field(default_factory=dict)
    result_slots: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "is_transactional": self.is_transactional,
            "required_slots": list(self.required_slots),
            "optional_slots": dict(self.optional_slots),
            "result_slots": list(self.result_slots),
        }


@dataclass(frozen=True)
class ServiceSchema:
    service_name: str
    description: str
    slots: tuple[SlotDef, ...]
    intents: tuple[IntentDef, ...]

    def slot_by_name(self, name: str) -> SlotDef:
        for s in self.slots:
            if s.name == name:
                return s
        raise KeyError(name)

    def intent_by_name(self, name: str) -> IntentDef:
        for i in self.intents:
            if i.name == name:
                return i
        raise KeyError(name)

    @property
    def slot_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.slots)

    @property
    def intent_names(self) -> tuple[str, ...]:
        return tuple(i.name for i in self.intents)

    def informable_slots(self) -> tuple[str, ...]:
        """Slots that can carry user constraints: union of intent args, schema order."""
        used: set[str] = set()
        for intent in self.intents:
            used.update(intent.required_slots)
            used.update(intent.optional_slots)
        return tuple(n for n in self.slot_names if n in used)

    def to_dict(self) -> dict:
        return {
            "service_name": self.service_name,
            "description": self.description,
            "slots": [s.to_dict() for s in self.slots],
            "intents": [i.to_dict() for i in self.intents],
        }


def _require(obj: dict, key: str, kind: type, where: str):
    if key not in obj:
        raise SchemaParseError(f"{where}: missing key {key!r}")
    value = obj[key]
    if not isinstance(value, kind):
        raise SchemaParseError(
            f"{where}: key {key!r} should be {kind.__name__}, got {type(value).__name__}"
        )
    return value


def _str_list(value, where: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise SchemaParseError(f"{where}: expected a list of strings")
    return tuple(value)


def parse_service(obj) -> ServiceSchema:
    """Build a ServiceSchema from one decoded JSON object. Raises SchemaParseError."""
    if not isinstance(obj, dict):
        raise SchemaParseError(f"service entry should be an object, got {type(obj).__name__}")
    name = _require(obj, "service_name", str, "service")
    where = f"service {name!r}"
    description = _require(obj, "description", str, where)

    slots = []
    for raw in _require(obj, "slots", list, where):
        if not isinstance(raw, dict):
            raise SchemaParseError(f"{where}: slot entries should be objects")
        sname = _require(raw, "name", str, f"{where} slot")
        slots.append(
            SlotDef(
                name=sname,
                description=_require(raw, "description", str, f"{where} slot {sname!r}"),
                is_categorical=bool(raw.get("is_categorical", False)),
                possible_values=_str_list(
                    raw.get("possible_values", []), f"{where} slot {sname!r} possible_values"
                ),
            )
        )

    intents = []
    for raw in _require(obj, "intents", list, where):
        if not isinstance(raw, dict):
            raise SchemaParseError(f"{where}: intent entries should be objects")
        iname = _require(raw, "name", str, f"{where} intent")
        iwhere = f"{where} intent {iname!r}"
        optional = raw.get("optional_slots", {})
        if not isinstance(optional, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in optional.items()
        ):
            raise SchemaParseError(f"{iwhere}: optional_slots should map slot name to default")
        intents.append(
            IntentDef(
                name=iname,
                description=_require(raw, "description", str, iwhere),
                is_transactional=bool(raw.get("is_transactional", False)),
                required_slots=_str_list(raw.get("required_slots", []), f"{iwhere} required_slots"),
                optional_slots=dict(optional),
                result_slots=_str_list(raw.get("result_slots", []), f"{iwhere} result_slots"),
            )
        )

    return ServiceSchema(
        service_name=name, description=description, slots=tuple(slots), intents=tuple(intents)
    )


def validate_schema(schema: ServiceSchema) -> ValidationReport:
    """Check every schema invariant; returns all findings rather than the first."""
    findings: list[Finding] = []

    def add(element: str, rule: str, message: str):
        findings.append(Finding(element=element, rule=rule, message=message))

    sname = schema.service_name
    if not sname.strip():
        add("service", "empty-name", "service_name is empty")
    if not schema.description.strip():
        add(sname, "empty-description", f"service {sname!r} has an empty description")

    seen_slots: set[str] = set()
    for slot in schema.slots:
        el = f"{sname}.{slot.name}"
        if slot.name in seen_slots:
            add(el, "duplicate-slot", f"slot {slot.name!r} defined more than once")
        seen_slots.add(slot.name)
        if not slot.description.strip():
            add(el, "empty-description", f"slot {slot.name!r} has an empty description")
        if slot.is_categorical:
            if not slot.possible_values:
                add(el, "categorical-values", f"categorical slot {slot.name!r} lists no values")
            if len(set(slot.possible_values)) != len(slot.possible_values):
                add(el, "duplicate-values", f"slot {slot.name!r} has duplicate possible_values")
        elif slot.possible_values:
            add(
                el,
                "noncategorical-values",
                f"slot {slot.name!r} is not categorical but lists possible_values",
            )

    if not schema.intents:
        add(sname, "no-intents", f"service {sname!r} defines no intents")

    seen_intents: set[str] = set()
    for intent in schema.intents:
        el = f"{sname}.{intent.name}"
        if intent.name in seen_intents:
            add(el, "duplicate-intent", f"intent {intent.name!r} defined more than once")
        seen_intents.add(intent.name)
        if not intent.description.strip():
            add(el, "empty-description", f"intent {intent.name!r} has an empty description")
        overlap = set(intent.required_slots) & set(intent.optional_slots)
        for slot_name in sorted(overlap):
            add(
                el,
                "required-optional-overlap",
                f"intent {intent.name!r} lists {slot_name!r} as both required and optional",
            )
        referenced = (
            list(intent.required_slots)
            + list(intent.optional_slots)
            + list(intent.result_slots)
        )
        for slot_name in referenced:
            if slot_name not in seen_slots:
                add(
                    el,
                    "unknown-slot",
                    f"intent {intent.name!r} references missing slot {slot_name!r}",
                )

    return ValidationReport(findings=tuple(findings))


def parse_schema_text(text: str) -> list[ServiceSchema]:
    """Parse a schema file body: one service object or a top-level array of them."""
    try:
        decoded = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaParseError(f"not valid JSON: {exc}") from exc
    if isinstance(decoded, dict):
        return [parse_service(decoded)]
    if isinstance(decoded, list):
        return [parse_service(entry) for entry in decoded]
    raise SchemaParseError(
        f"top level should be an object or array, got {type(decoded).__name__}"
    )


def load_schema(path: str | Path) -> list[ServiceSchema]:
    """Load and validate one schema file (UTF-8 JSON).

    Raises SchemaParseError on malformed input and SchemaValidationError
    (carrying the full report) on semantic problems.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaParseError(f"cannot read {path}: {exc}") from exc
    schemas = parse_schema_text(text)
    findings: list[Finding] = []
    for schema in schemas:
        findings.extend(validate_schema(schema).findings)
    if findings:
        raise SchemaValidationError(ValidationReport(findings=tuple(findings)))
    return schemas


def load_schema_dir(path: str | Path) -> dict[str, ServiceSchema]:
    """Load every *.json schema file under a directory (or a single file).

    Returns schemas keyed by service name, in sorted file order.
    """
    path = Path(path)
    files = [path] if path.is_file() else sorted(path.glob("*.json"))
    if not files:
        raise SchemaParseError(f"no schema files found under {path}")
    out: dict[str, ServiceSchema] = {}
    for f in files:
        for schema in load_schema(f):
            if schema.service_name in out:
                raise SchemaParseError(f"duplicate service {schema.service_name!r} in {f}")
            out[schema.service_name] = schema
    return out


# Element keys for schema_element_sequences.
INTENT_ELEMENT = "intent"
SLOT_ELEMENT = "slot"
VALUE_ELEMENT = "value"


def schema_element_sequences(schema: ServiceSchema) -> list[tuple[tuple, str, str]]:
    """Sentence pairs fed to the encoder, one per embeddable schema element.

    Order is deterministic: intents in schema order, then slots in schema
    order, then the value list of each categorical slot in schema order.
    Element ids are ("intent", name), ("slot", name) and
    ("value", slot_name, value).
    """
    pairs: list[tuple[tuple, str, str]] = []
    for intent in schema.intents:
        pairs.append(((INTENT_ELEMENT, intent.name), schema.description, intent.description))
    for slot in schema.slots:
        pairs.append(((SLOT_ELEMENT, slot.name), schema.description, slot.description))
    for slot in schema.slots:
        if slot.is_categorical:
            for value in slot.possible_values:
                pairs.append(((VALUE_ELEMENT, slot.name, value), slot.description, value))
    return pairs
