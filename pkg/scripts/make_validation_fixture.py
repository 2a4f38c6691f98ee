#!/usr/bin/env python3
"""Regenerate the shared paraphrase-validation fixture.

The fixture freezes (values, text) -> verdict cases computed by the server's
validator so the browser client's port can be held to exact agreement.  Cases
mix turns sampled from a seeded bundled-asset corpus with handcrafted edge
cases (substring values, duplicate values, case folding, empty inputs).

Usage: python scripts/make_validation_fixture.py
Writes tests/fixtures/validation_cases.json; run it only to refresh the
fixture after changing the validation contract, and commit the result.
"""

import json
import os
import random
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT, "src"))

from dialogkit.generate import generate_corpus, load_assets  # noqa: E402
from dialogkit.paraphrase import find_slot_spans  # noqa: E402

ASSETS = os.path.join(ROOT, "src", "dialogkit", "assets")
OUT = os.path.join(ROOT, "tests", "fixtures", "validation_cases.json")

TOTAL_CASES = 50


def case(name: str, values: list[tuple[str, str]], text: str) -> dict:
    spans, missing = find_slot_spans(text, values)
    return {
        "name": name,
        "values": [[slot, value] for slot, value in values],
        "text": text,
        "expected": {
            "accepted": not missing,
            "missing": [[slot, value] for slot, value in missing],
            "spans": [
                {
                    "slot": s.slot,
                    "value": s.value,
                    "start": s.start,
                    "exclusive_end": s.end,
                }
                for s in spans
            ],
        },
    }


def corpus_turn_pool() -> list[tuple[list[tuple[str, str]], str]]:
    assets = load_assets(
        os.path.join(ASSETS, "schemas"),
        os.path.join(ASSETS, "backends"),
        os.path.join(ASSETS, "scenarios", "training.json"),
        os.path.join(ASSETS, "templates.json"),
        variations_file=os.path.join(ASSETS, "variations.json"),
        seed=13,
    )
    pool = []
    for dialogue in generate_corpus(assets, num=20, seed=13):
        for turn in dialogue.turns:
            values = [
                (span.slot, span.value)
                for frame in turn.frames
                for span in frame.slots
            ]
            if values:
                pool.append((values, turn.utterance))
    return pool


def mutate(kind: str, values, text, rng) -> str:
    """One candidate paraphrase; verdicts are recomputed, not assumed."""
    if kind == "identity":
        return text
    if kind == "prefixed":
        return "Well, " + text
    if kind == "upper":
        return text.upper()
    if kind == "dropped":
        return text.replace(values[0][1], "something else")
    if kind == "values_only":
        return " ".join(v for _s, v in values) + "."
    if kind == "truncated":
        return text[: len(text) // 2]
    words = text.split()
    rng.shuffle(words)
    return " ".join(words)


MUTATION_KINDS = (
    "identity", "prefixed", "upper", "dropped", "values_only", "truncated",
    "shuffled",
)


def main() -> int:
    rng = random.Random(13)
    cases = []

    pool = corpus_turn_pool()
    picks = rng.sample(range(len(pool)), k=min(len(pool), TOTAL_CASES - 12))
    for n, pick in enumerate(picks):
        values, text = pool[pick]
        kind = MUTATION_KINDS[n % len(MUTATION_KINDS)]
        candidate = mutate(kind, values, text, rng)
        cases.append(case(f"case_{len(cases):02d}_{kind}", values, candidate))

    hand = [
        ("substring_both_present",
         [("city", "San Jose"), ("name", "San")],
         "San Jose has San in it."),
        ("substring_only_long",
         [("city", "San Jose"), ("name", "San")],
         "I am in San Jose."),
        ("duplicate_value_once",
         [("time", "5 pm"), ("time", "5 pm")],
         "Meet at 5 pm."),
        ("duplicate_value_twice",
         [("time", "5 pm"), ("time", "5 pm")],
         "5 pm works, confirm 5 pm."),
        ("punctuated_value",
         [("time", "12:30 pm")],
         "Book it for 12:30 pm sharp."),
        ("unicode_value",
         [("restaurant", "Café Reynard")],
         "CAFÉ REYNARD sounds lovely."),
        ("no_values",
         [],
         "Anything at all is fine here."),
        ("empty_value_entry",
         [("note", "")],
         "There is text but the value is empty."),
        ("value_at_edges",
         [("a", "Oakland"), ("b", "tonight")],
         "Oakland is where we eat tonight"),
        ("overlap_chain",
         [("x", "a b"), ("y", "b c")],
         "a b c"),
        ("tie_length_order",
         [("x", "red"), ("y", "rod")],
         "rod and red"),
        ("missing_everything",
         [("city", "Berkeley"), ("time", "noon")],
         ""),
    ]
    for name, values, text in hand:
        cases.append(case(f"case_{len(cases):02d}_{name}", values, text))

    cases = cases[:TOTAL_CASES]
    assert len(cases) == TOTAL_CASES, len(cases)

    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "w", encoding="utf-8") as fh:
        json.dump({"cases": cases}, fh, indent=1, ensure_ascii=False, sort_keys=True)
        fh.write("\n")
    accepted = sum(c["expected"]["accepted"] for c in cases)
    print(f"wrote {len(cases)} cases ({accepted} accepted) to {OUT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
