"""HTTP API for the dialogue paraphrasing workbench.

Serves templated dialogues as rewriting tasks: every turn is editable, the
slot values the annotator must keep verbatim are sent with their character
offsets so the client can highlight them without re-searching the text.
Validation and submission share one rule, the server's: a paraphrase is
accepted iff every annotated value still appears in the text.  Accepted
dialogues are rebuilt with freshly located spans and stored one file per
task in a directory read_corpus understands.

One annotator paraphrases a whole dialogue; concurrent submissions to the
same task serialize on a per-task lock and the last write wins.
"""

from __future__ import annotations

import copy
import json
import os
import tempfile
import threading

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .corpus import read_corpus, shard_name
from .dialogue import Dialogue, Turn, validate_dialogue
from .paraphrase import ValidationResult, find_slot_spans
from .schema import ServiceSchema


class TurnTexts(BaseModel):
    """Request body for validate and submit: one text per dialogue turn."""

    turns: list[str]


def turn_expected_values(turn: Turn) -> list[tuple[int, str, str]]:
    """(frame index, slot, value) for every annotated span of a turn.

    Expected values come from the stored span annotations, not from dialogue
    acts: public-format corpora withhold user-turn acts, and the annotations
    are exactly what the client highlights.
    """
    out = []
    for fi, frame in enumerate(turn.frames):
        for span in frame.slots:
            out.append((fi, span.slot, span.value))
    return out


def validate_turn_text(turn: Turn, text: str) -> ValidationResult:
    expected = [(slot, value) for _fi, slot, value in turn_expected_values(turn)]
    spans, missing = find_slot_spans(text, expected)
    return ValidationResult(accepted=not missing, spans=spans, missing=missing)


def rebuild_dialogue(dialogue: Dialogue, texts: list[str]) -> Dialogue:
    """Replace every utterance with its paraphrase and relocate all spans.

    Raises ValueError if any turn is missing a value; callers validate first
    so this only guards against races between validate and submit.
    """
    if len(texts) != len(dialogue.turns):
        raise ValueError(
            f"expected {len(dialogue.turns)} turn texts, got {len(texts)}"
        )
    out = copy.deepcopy(dialogue)
    for turn, text in zip(out.turns, texts):
        triples = turn_expected_values(turn)
        expected = [(slot, value) for _fi, slot, value in triples]
        spans, missing = find_slot_spans(text, expected)
        if missing:
            lost = ", ".join(f"{slot}={value!r}" for slot, value in missing)
            raise ValueError(f"paraphrase drops values: {lost}")
        turn.utterance = text
        for frame in turn.frames:
            frame.slots = []
        for (fi, _slot, _value), span in zip(triples, spans):
            turn.frames[fi].slots.append(span)
    return out


class _TaskStore:
    """Corpus-backed task list plus the accepted-paraphrase directory."""

    def __init__(
        self,
        corpus_dir: str,
        schemas: dict[str, ServiceSchema] | None,
        accepted_dir: str | None,
    ):
        self.dialogues = read_corpus(corpus_dir)
        if not self.dialogues:
            raise ValueError(f"corpus {corpus_dir} contains no dialogues")
        self.schemas = schemas
        self.accepted_dir = accepted_dir or os.path.join(corpus_dir, "accepted")
        os.makedirs(self.accepted_dir, exist_ok=True)
        self.index = {d.dialogue_id: i for i, d in enumerate(self.dialogues)}
        self._locks: dict[int, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def task_lock(self, task_index: int) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(task_index, threading.Lock())

    def accepted_path(self, task_index: int) -> str:
        return os.path.join(self.accepted_dir, shard_name(task_index))

    def is_completed(self, task_index: int) -> bool:
        return os.path.isfile(self.accepted_path(task_index))

    def stored_texts(self, task_index: int) -> list[str] | None:
        path = self.accepted_path(task_index)
        try:
            with open(path, encoding="utf-8") as fh:
                payload = json.load(fh)
            return [t["utterance"] for t in payload[0]["turns"]]
        except (OSError, json.JSONDecodeError, LookupError, TypeError):
            return None

    def store(self, task_index: int, dialogue: Dialogue) -> str:
        path = self.accepted_path(task_index)
        payload = [dialogue.to_dict()]
        fd, tmp = tempfile.mkstemp(dir=self.accepted_dir, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, indent=1, sort_keys=True)
                fh.write("\n")
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return os.path.basename(path)

    def task_payload(self, task_index: int) -> dict:
        dialogue = self.dialogues[task_index]
        turns = []
        for ti, turn in enumerate(dialogue.turns):
            values = []
            for frame in turn.frames:
                for span in frame.slots:
                    chip = span.to_dict()
                    chip["service"] = frame.service
                    values.append(chip)
            turns.append(
                {
                    "index": ti,
                    "speaker": turn.speaker,
                    "template": turn.utterance,
                    "values": values,
                }
            )
        payload = {
            "task_id": dialogue.dialogue_id,
            "index": task_index,
            "services": list(dialogue.services),
            "completed": self.is_completed(task_index),
            "turns": turns,
        }
        if payload["completed"]:
            payload["paraphrases"] = self.stored_texts(task_index)
        return payload


def create_app(
    corpus_dir: str,
    schemas: dict[str, ServiceSchema] | None = None,
    accepted_dir: str | None = None,
) -> FastAPI:
    store = _TaskStore(corpus_dir, schemas, accepted_dir)
    app = FastAPI(title="dialogkit paraphrase workbench")
    app.state.store = store

    def task_or_404(task_id: str) -> int:
        if task_id not in store.index:
            raise HTTPException(status_code=404, detail=f"unknown task {task_id!r}")
        return store.index[task_id]

    def validation_payload(task_index: int, texts: list[str]) -> dict:
        dialogue = store.dialogues[task_index]
        if len(texts) != len(dialogue.turns):
            raise HTTPException(
                status_code=400,
                detail=f"expected {len(dialogue.turns)} turn texts, got {len(texts)}",
            )
        results = [
            validate_turn_text(turn, text).to_dict()
            for turn, text in zip(dialogue.turns, texts)
        ]
        return {
            "task_id": dialogue.dialogue_id,
            "results": results,
            "all_accepted": all(r["accepted"] for r in results),
        }

    @app.get("/api/tasks/next")
    def next_task() -> dict:
        for i in range(len(store.dialogues)):
            if not store.is_completed(i):
                return {"done": False, "task": store.task_payload(i)}
        return {"done": True, "task": None}

    @app.get("/api/tasks/{task_id}")
    def get_task(task_id: str) -> dict:
        return store.task_payload(task_or_404(task_id))

    @app.post("/api/tasks/{task_id}/validate")
    def validate_task(task_id: str, body: TurnTexts) -> dict:
        return validation_payload(task_or_404(task_id), body.turns)

    @app.post("/api/tasks/{task_id}/submit")
    def submit_task(task_id: str, body: TurnTexts) -> dict:
        task_index = task_or_404(task_id)
        verdict = validation_payload(task_index, body.turns)
        if not verdict["all_accepted"]:
            raise HTTPException(status_code=422, detail=verdict)
        with store.task_lock(task_index):
            try:
                rebuilt = rebuild_dialogue(store.dialogues[task_index], body.turns)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            problems = validate_dialogue(rebuilt, store.schemas)
            if problems:
                raise HTTPException(
                    status_code=422,
                    detail={"task_id": task_id, "problems": problems},
                )
            stored = store.store(task_index, rebuilt)
        return {"accepted": True, "task_id": task_id, "stored": stored}

    @app.get("/api/progress")
    def progress() -> dict:
        done = [
            d.dialogue_id
            for i, d in enumerate(store.dialogues)
            if store.is_completed(i)
        ]
        return {
            "total": len(store.dialogues),
            "completed": len(done),
            "remaining": len(store.dialogues) - len(done),
            "completed_ids": done,
        }

    return app
