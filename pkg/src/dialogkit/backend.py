"""In-memory service backends: entity tables, intent calls, seeded sampling.

Search intents filter an entity table with conjunctive equality constraints.
Transactional intents produce a single success (or failure) record.  Tables
are plain JSON fixtures so a corpus is reproducible from its inputs alone.

All dates in bundled fixtures are anchored to a fixed corpus "today" so that
relative surface forms ("the 7th of this month") stay meaningful.
"""

from __future__ import annotations

import datetime as _dt
import random
from dataclasses import dataclass, field

from .schema import DONTCARE, ServiceSchema

# Fixed corpus date: every generated date lies 0..N days after this day.
TODAY = _dt.date(2019, 3, 1)


class BackendError(Exception):
    """Base class for backend problems."""


class UnknownSlot(BackendError):
    def __init__(self, service: str, slot: str):
        self.service, self.slot = service, slot
        super().__init__(f"service {service!r} has no slot {slot!r}")


class MissingRequiredSlot(BackendError):
    def __init__(self, intent: str, slot: str):
        self.intent, self.slot = intent, slot
        super().__init__(f"intent {intent!r} called without required slot {slot!r}")


class SamplingSpecError(BackendError):
    """An entity sampling spec is inconsistent with its schema."""


@dataclass(frozen=True)
class EntityTable:
    service_name: str
    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        for row in self.rows:
            assert len(row) == len(self.columns), (
                f"{self.service_name}: row width {len(row)} != {len(self.columns)} columns"
            )

    def records(self) -> list[dict[str, str]]:
        return [dict(zip(self.columns, row)) for row in self.rows]

    def to_dict(self) -> dict:
        return {
            "service_name": self.service_name,
            "columns": list(self.columns),
            "rows": [list(r) for r in self.rows],
        }

    @staticmethod
    def from_dict(obj: dict) -> "EntityTable":
        return EntityTable(
            service_name=obj["service_name"],
            columns=tuple(obj["columns"]),
            rows=tuple(tuple(str(v) for v in row) for row in obj["rows"]),
        )


@dataclass
class QueryResult:
    rows: list[dict[str, str]]
    count: int
    # "success" / "failure" for transactional intents, None for searches
    transaction_status: str | None = None

    def __post_init__(self):
        assert self.count == len(self.rows) or self.transaction_status == "failure"


def check_table(schema: ServiceSchema, table: EntityTable) -> None:
    """Raise BackendError if the table does not fit the schema."""
    if table.service_name != schema.service_name:
        raise BackendError(
            f"table is for {table.service_name!r}, schema is {schema.service_name!r}"
        )
    slot_names = set(schema.slot_names)
    for col in table.columns:
        if col not in slot_names:
            raise UnknownSlot(schema.service_name, col)
    for slot in schema.slots:
        if slot.is_categorical and slot.name in table.columns:
            idx = table.columns.index(slot.name)
            allowed = set(slot.possible_values)
            for row in table.rows:
                if row[idx] not in allowed:
                    raise BackendError(
                        f"{schema.service_name}.{slot.name}: table value {row[idx]!r} "
                        f"not in possible_values"
                    )


def invoke_intent(
    schema: ServiceSchema,
    table: EntityTable,
    intent_name: str,
    args: dict[str, str],
    *,
    failure_prob: float = 0.0,
    rng: random.Random | None = None,
) -> QueryResult:
    """Call one intent against the table.

    Search intents return every record matching all constraints (equality on
    canonical values; a dontcare value does not constrain).  Optional slots
    absent from args take their schema defaults.  Transactional intents return
    one success record echoing the call arguments merged over the matched
    entity, or a failure with no records when the failure probability fires.
    """
    intent = None
    for cand in schema.intents:
        if cand.name == intent_name:
            intent = cand
            break
    if intent is None:
        raise BackendError(f"service {schema.service_name!r} has no intent {intent_name!r}")

    slot_names = set(schema.slot_names)
    for slot in args:
        if slot not in slot_names:
            raise UnknownSlot(schema.service_name, slot)
    for slot in intent.required_slots:
        if slot not in args:
            raise MissingRequiredSlot(intent_name, slot)

    merged = dict(intent.optional_slots)
    merged.update(args)
    constraints = {k: v for k, v in merged.items() if v != DONTCARE}

    # Constraints on slots the table does not record cannot filter anything.
    filterable = {k: v for k, v in constraints.items() if k in table.columns}
    matches = [rec for rec in table.records() if all(rec[k] == v for k, v in filterable.items())]

    if not intent.is_transactional:
        return QueryResult(rows=matches, count=len(matches))

    if failure_prob > 0.0 and rng is not None and rng.random() < failure_prob:
        return QueryResult(rows=[], count=0, transaction_status="failure")
    record = dict(matches[0]) if matches else {}
    record.update(constraints)
    return QueryResult(rows=[record], count=1, transaction_status="success")


# ---------------------------------------------------------------------------
# Seeded entity sampling


@dataclass(frozen=True)
class Pool:
    """Joint value pool: each draw fixes all listed columns together."""

    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    replace: bool = True


@dataclass(frozen=True)
class Generator:
    """Per-column scalar generator. Kinds: date, time, int, choice."""

    kind: str
    values: tuple[str, ...] = ()
    low: int = 0
    high: int = 0
    window_days: int = 30

    def draw(self, rng: random.Random) -> str:
        if self.kind == "choice":
            return rng.choice(list(self.values))
        if self.kind == "int":
            return str(rng.randint(self.low, self.high))
        if self.kind == "date":
            day = TODAY + _dt.timedelta(days=rng.randint(0, self.window_days))
            return day.isoformat()
        if self.kind == "time":
            hour = rng.randint(max(self.low, 0), self.high if self.high else 21)
            minute = rng.choice([0, 15, 30, 45])
            suffix = "am" if hour < 12 else "pm"
            display = hour if hour <= 12 else hour - 12
            if display == 0:
                display = 12
            return f"{display}:{minute:02d} {suffix}"
        raise SamplingSpecError(f"unknown generator kind {self.kind!r}")

    @staticmethod
    def from_dict(obj: dict) -> "Generator":
        return Generator(
            kind=obj["kind"],
            values=tuple(obj.get("values", [])),
            low=int(obj.get("low", 0)),
            high=int(obj.get("high", 0)),
            window_days=int(obj.get("window_days", 30)),
        )


@dataclass
class SamplingSpec:
    """Declarative recipe for building an EntityTable with a seeded RNG."""

    service_name: str
    columns: tuple[str, ...]
    num_rows: int
    pools: list[Pool] = field(default_factory=list)
    generators: dict[str, Generator] = field(default_factory=dict)

    @staticmethod
    def from_dict(obj: dict) -> "SamplingSpec":
        return SamplingSpec(
            service_name=obj["service_name"],
            columns=tuple(obj["columns"]),
            num_rows=int(obj["num_rows"]),
            pools=[
                Pool(
                    columns=tuple(p["columns"]),
                    rows=tuple(tuple(str(v) for v in row) for row in p["rows"]),
                    replace=bool(p.get("replace", True)),
                )
                for p in obj.get("pools", [])
            ],
            generators={
                name: Generator.from_dict(g) for name, g in obj.get("generators", {}).items()
            },
        )


def sample_entities(
    schema: ServiceSchema, spec: SamplingSpec, rng: random.Random
) -> EntityTable:
    """Draw a table per the spec. Identical seeds give identical tables."""
    if spec.service_name != schema.service_name:
        raise SamplingSpecError(
            f"spec is for {spec.service_name!r}, schema is {schema.service_name!r}"
        )
    slot_names = set(schema.slot_names)
    covered: dict[str, object] = {}
    for pool in spec.pools:
        for col in pool.columns:
            if col in covered:
                raise SamplingSpecError(f"column {col!r} covered twice")
            covered[col] = pool
        for row in pool.rows:
            if len(row) != len(pool.columns):
                raise SamplingSpecError(f"pool row width mismatch for {pool.columns}")
    for col, gen in spec.generators.items():
        if col in covered:
            raise SamplingSpecError(f"column {col!r} covered twice")
        covered[col] = gen
    for col in spec.columns:
        if col not in slot_names:
            raise UnknownSlot(schema.service_name, col)
        if col not in covered:
            raise SamplingSpecError(f"column {col!r} has no pool or generator")

    # Categorical columns may only ever produce in-schema values.
    for slot in schema.slots:
        if not slot.is_categorical or slot.name not in spec.columns:
            continue
        allowed = set(slot.possible_values)
        source = covered[slot.name]
        produced: set[str] = set()
        if isinstance(source, Pool):
            idx = source.columns.index(slot.name)
            produced = {row[idx] for row in source.rows}
        elif isinstance(source, Generator) and source.kind == "choice":
            produced = set(source.values)
        else:
            raise SamplingSpecError(
                f"categorical column {slot.name!r} needs a pool or choice generator"
            )
        bad = produced - allowed
        if bad:
            raise SamplingSpecError(
                f"categorical column {slot.name!r} can produce out-of-schema values {sorted(bad)}"
            )

    rows: list[tuple[str, ...]] = []
    pool_queues: dict[int, list[tuple[str, ...]]] = {}
    for i, pool in enumerate(spec.pools):
        if not pool.replace:
            queue = list(pool.rows)
            rng.shuffle(queue)
            pool_queues[i] = queue

    for _ in range(spec.num_rows):
        record: dict[str, str] = {}
        for i, pool in enumerate(spec.pools):
            if pool.replace:
                chosen = rng.choice(list(pool.rows))
            else:
                queue = pool_queues[i]
                if not queue:
                    raise SamplingSpecError(
                        f"pool over {pool.columns} exhausted before {spec.num_rows} rows"
                    )
                chosen = queue.pop()
            record.update(zip(pool.columns, chosen))
        for col, gen in spec.generators.items():
            record[col] = gen.draw(rng)
        rows.append(tuple(record[c] for c in spec.columns))

    table = EntityTable(service_name=spec.service_name, columns=spec.columns, rows=tuple(rows))
    check_table(schema, table)
    return table


# ---------------------------------------------------------------------------
# Backend bundle: everything the simulator needs for one service


@dataclass
class Backend:
    """A service schema plus its entity table and goal-value sources."""

    schema: ServiceSchema
    table: EntityTable
    # value sources for informable slots that are not table columns
    user_pools: dict[str, Generator] = field(default_factory=dict)
    failure_prob: float = 0.0

    def query(
        self, intent_name: str, args: dict[str, str], rng: random.Random | None = None
    ) -> QueryResult:
        return invoke_intent(
            self.schema,
            self.table,
            intent_name,
            args,
            failure_prob=self.failure_prob,
            rng=rng,
        )

    def sample_slot_value(self, slot_name: str, rng: random.Random) -> str:
        """A plausible user goal value for one slot."""
        slot = self.schema.slot_by_name(slot_name)
        if slot.is_categorical:
            return rng.choice(list(slot.possible_values))
        if slot_name in self.user_pools:
            return self.user_pools[slot_name].draw(rng)
        if slot_name in self.table.columns:
            idx = self.table.columns.index(slot_name)
            values = sorted({row[idx] for row in self.table.rows})
            return rng.choice(values)
        raise BackendError(
            f"{self.schema.service_name}.{slot_name}: no value source for goal sampling"
        )


def load_backend(schema: ServiceSchema, obj: dict, rng: random.Random) -> Backend:
    """Build a Backend from its JSON fixture.

    The fixture either embeds a literal "table" or a "sampling" spec drawn
    with the supplied RNG.  "user_pools" maps non-column slots to generators.
    """
    if "table" in obj:
        table = EntityTable.from_dict(obj["table"])
        check_table(schema, table)
    elif "sampling" in obj:
        table = sample_entities(schema, SamplingSpec.from_dict(obj["sampling"]), rng)
    else:
        raise BackendError(
            f"backend fixture for {schema.service_name!r} has neither table nor sampling"
        )
    user_pools = {
        name: Generator.from_dict(g) for name, g in obj.get("user_pools", {}).items()
    }
    for name in user_pools:
        if name not in schema.slot_names:
            raise UnknownSlot(schema.service_name, name)
    return Backend(
        schema=schema,
        table=table,
        user_pools=user_pools,
        failure_prob=float(obj.get("failure_prob", 0.0)),
    )
