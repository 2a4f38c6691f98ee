"""Corpus serialization, dataset statistics, and train/dev/test splits.

Dialogues are stored as sharded JSON files (``dialogues_NNN.json``, each a
list of dialogue objects) in the public release shape; the same reader
parses externally released corpora in that shape.  Statistics are computed
through mergeable per-dialogue partials so shards can be processed
independently.  Splitting supports held-out services that must never appear
in training data.
"""

from __future__ import annotations

import json
import os
import random
import re
from dataclasses import dataclass, field

from .dialogue import Dialogue, USER


class CorpusFormatError(Exception):
    """A corpus file could not be parsed; names the file and position."""


SHARD_PATTERN = re.compile(r"^dialogues_\d+\.json$")


def shard_name(index: int) -> str:
    return f"dialogues_{index + 1:03d}.json"


def _atomic_write_json(path: str, payload) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, ensure_ascii=False)
        fh.write("\n")
    os.replace(tmp, path)


def write_corpus(
    dialogues: list[Dialogue],
    out_dir: str,
    *,
    shard_size: int = 64,
    include_user_actions: bool = False,
    include_metadata: bool = False,
) -> list[str]:
    """Write sharded dialogue files, ordered by dialogue_id; returns paths.

    The default shape matches the public release: user-turn actions are
    withheld, system actions kept.  Pass include_user_actions (and
    include_metadata) for a full-fidelity corpus that round-trips exactly.
    """
    os.makedirs(out_dir, exist_ok=True)
    ordered = sorted(dialogues, key=lambda d: d.dialogue_id)
    paths = []
    for i in range(0, max(len(ordered), 1), shard_size):
        chunk = ordered[i : i + shard_size]
        payload = [
            d.to_dict(
                include_user_actions=include_user_actions,
                include_metadata=include_metadata,
            )
            for d in chunk
        ]
        path = os.path.join(out_dir, shard_name(i // shard_size))
        _atomic_write_json(path, payload)
        paths.append(path)
    return paths


def read_corpus(dir_path: str) -> list[Dialogue]:
    """Read every dialogue shard in dir_path, in shard order."""
    try:
        names = sorted(n for n in os.listdir(dir_path) if SHARD_PATTERN.match(n))
    except OSError as exc:
        raise CorpusFormatError(f"cannot list corpus dir {dir_path}: {exc}") from exc
    dialogues: list[Dialogue] = []
    for name in names:
        path = os.path.join(dir_path, name)
        try:
            with open(path, encoding="utf-8") as fh:
                payload = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CorpusFormatError(f"{path}: {exc}") from exc
        if not isinstance(payload, list):
            raise CorpusFormatError(f"{path}: expected a list of dialogues")
        for pos, obj in enumerate(payload):
            try:
                dialogues.append(Dialogue.from_dict(obj))
            except Exception as exc:
                raise CorpusFormatError(f"{path}: dialogue #{pos}: {exc}") from exc
    return dialogues


# ---------------------------------------------------------------------------
# Statistics


def domain_of(service_name: str) -> str:
    """Service names carry a numeric suffix per instance: Restaurants_2 ->
    Restaurants."""
    return re.sub(r"_\d+$", "", service_name)


@dataclass
class StatsPartial:
    """Additive per-shard counters; merge with ``|``."""

    num_dialogues: int = 0
    total_turns: int = 0
    total_tokens: int = 0
    tokens: set = field(default_factory=set)
    slots: set = field(default_factory=set)
    slot_values: set = field(default_factory=set)
    per_domain: dict = field(default_factory=dict)
    length_histogram: dict = field(default_factory=dict)
    act_histogram: dict = field(default_factory=dict)

    def add_dialogue(self, dialogue: Dialogue) -> None:
        self.num_dialogues += 1
        n_turns = len(dialogue.turns)
        self.total_turns += n_turns
        self.length_histogram[n_turns] = self.length_histogram.get(n_turns, 0) + 1
        for domain in sorted({domain_of(s) for s in dialogue.services}):
            self.per_domain[domain] = self.per_domain.get(domain, 0) + 1
        for turn in dialogue.turns:
            words = turn.utterance.lower().split()
            self.total_tokens += len(words)
            self.tokens.update(words)
            for frame in turn.frames:
                for action in frame.actions:
                    act = action.act.value
                    self.act_histogram[act] = self.act_histogram.get(act, 0) + 1
                if frame.state is not None:
                    for slot, values in frame.state.slot_values.items():
                        self.slots.add((frame.service, slot))
                        for value in values:
                            self.slot_values.add((frame.service, slot, value))

    def __or__(self, other: "StatsPartial") -> "StatsPartial":
        merged = StatsPartial()
        merged.num_dialogues = self.num_dialogues + other.num_dialogues
        merged.total_turns = self.total_turns + other.total_turns
        merged.total_tokens = self.total_tokens + other.total_tokens
        merged.tokens = self.tokens | other.tokens
        merged.slots = self.slots | other.slots
        merged.slot_values = self.slot_values | other.slot_values
        for src in (self.per_domain, other.per_domain):
            for k, v in src.items():
                merged.per_domain[k] = merged.per_domain.get(k, 0) + v
        for src in (self.length_histogram, other.length_histogram):
            for k, v in src.items():
                merged.length_histogram[k] = merged.length_histogram.get(k, 0) + v
        for src in (self.act_histogram, other.act_histogram):
            for k, v in src.items():
                merged.act_histogram[k] = merged.act_histogram.get(k, 0) + v
        return merged


@dataclass
class CorpusStats:
    num_dialogues: int
    total_turns: int
    avg_turns_per_dialogue: float
    avg_tokens_per_turn: float
    unique_tokens: int
    num_slots: int
    num_slot_values: int
    per_domain: dict[str, int]
    length_histogram: dict[int, int]
    act_histogram: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "num_dialogues": self.num_dialogues,
            "total_turns": self.total_turns,
            "avg_turns_per_dialogue": self.avg_turns_per_dialogue,
            "avg_tokens_per_turn": self.avg_tokens_per_turn,
            "unique_tokens": self.unique_tokens,
            "num_slots": self.num_slots,
            "num_slot_values": self.num_slot_values,
            "per_domain": dict(sorted(self.per_domain.items())),
            "length_histogram": {
                str(k): v for k, v in sorted(self.length_histogram.items())
            },
            "act_histogram": dict(sorted(self.act_histogram.items())),
        }


def finalize_stats(partial: StatsPartial) -> CorpusStats:
    n, t = partial.num_dialogues, partial.total_turns
    return CorpusStats(
        num_dialogues=n,
        total_turns=t,
        avg_turns_per_dialogue=t / n if n else 0.0,
        avg_tokens_per_turn=partial.total_tokens / t if t else 0.0,
        unique_tokens=len(partial.tokens),
        num_slots=len(partial.slots),
        num_slot_values=len(partial.slot_values),
        per_domain=dict(partial.per_domain),
        length_histogram=dict(partial.length_histogram),
        act_histogram=dict(partial.act_histogram),
    )


def compute_stats(dialogues: list[Dialogue]) -> CorpusStats:
    partial = StatsPartial()
    for dialogue in dialogues:
        partial.add_dialogue(dialogue)
    return finalize_stats(partial)


def render_stats_table(stats: CorpusStats) -> str:
    """Aligned text summary of the headline corpus numbers."""
    rows = [
        ("No. of dialogues", f"{stats.num_dialogues:,}"),
        ("Total no. of turns", f"{stats.total_turns:,}"),
        ("Avg. turns per dialogue", f"{stats.avg_turns_per_dialogue:.2f}"),
        ("Avg. tokens per turn", f"{stats.avg_tokens_per_turn:.2f}"),
        ("No. of unique tokens", f"{stats.unique_tokens:,}"),
        ("No. of slots", f"{stats.num_slots:,}"),
        ("No. of slot values", f"{stats.num_slot_values:,}"),
    ]
    width = max(len(label) for label, _ in rows)
    lines = [f"{label:<{width}}  {value}" for label, value in rows]
    if stats.per_domain:
        lines.append("")
        lines.append("Dialogues per domain")
        dwidth = max(len(d) for d in stats.per_domain)
        for domain, count in sorted(stats.per_domain.items()):
            lines.append(f"  {domain:<{dwidth}}  {count:,}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Splits


class SplitError(Exception):
    pass


@dataclass(frozen=True)
class SplitPolicy:
    """How to partition a corpus.

    Dialogues touching a test-held-out service always land in test;
    otherwise dev-held-out services send them to dev; the remainder is a
    seeded ratio split, stable per dialogue_id.
    """

    train_frac: float = 0.8
    dev_frac: float = 0.1
    dev_services: tuple[str, ...] = ()
    test_services: tuple[str, ...] = ()
    seed: int = 0

    @staticmethod
    def from_dict(obj: dict) -> "SplitPolicy":
        return SplitPolicy(
            train_frac=float(obj.get("train_frac", 0.8)),
            dev_frac=float(obj.get("dev_frac", 0.1)),
            dev_services=tuple(obj.get("dev_services", [])),
            test_services=tuple(obj.get("test_services", [])),
            seed=int(obj.get("seed", 0)),
        )


def split_corpus(
    dialogues: list[Dialogue],
    schemas: dict[str, object],
    policy: SplitPolicy,
) -> tuple[list[Dialogue], list[Dialogue], list[Dialogue]]:
    if not 0 < policy.train_frac <= 1 or policy.dev_frac < 0:
        raise SplitError("split fractions out of range")
    if policy.train_frac + policy.dev_frac > 1:
        raise SplitError("train_frac + dev_frac exceeds 1")
    for name in (*policy.dev_services, *policy.test_services):
        if name not in schemas:
            raise SplitError(f"holdout policy names unknown service {name!r}")
    test_held = set(policy.test_services)
    dev_held = set(policy.dev_services)
    train, dev, test = [], [], []
    for dialogue in dialogues:
        touched = set(dialogue.services)
        if touched & test_held:
            test.append(dialogue)
        elif touched & dev_held:
            dev.append(dialogue)
        else:
            roll = random.Random(f"split:{policy.seed}:{dialogue.dialogue_id}").random()
            if roll < policy.train_frac:
                train.append(dialogue)
            elif roll < policy.train_frac + policy.dev_frac:
                dev.append(dialogue)
            else:
                test.append(dialogue)
    return train, dev, test


def state_turn_count(dialogues: list[Dialogue]) -> int:
    """Number of (user turn, service frame) units, the evaluation grain."""
    return sum(
        len(turn.frames) for d in dialogues for turn in d.turns if turn.speaker == USER
    )
