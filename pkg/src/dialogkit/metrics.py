"""Evaluation of dialogue state tracking predictions.

Four metrics per evaluation unit, where a unit is one (dialogue, user turn,
service) frame: active intent accuracy, requested slot F1, average goal
accuracy, and joint goal accuracy.  Non-categorical values score with a
normalized Levenshtein similarity unless exact mode is on; "dontcare" only
ever matches "dontcare".  Metrics with no eligible frames are reported as
None (serialized null), never coerced to zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .corpus import domain_of
from .dialogue import Dialogue, NONE_INTENT, USER
from .schema import DONTCARE, ServiceSchema

FUZZY_THRESHOLD = 0.9


class MetricsError(ValueError):
    """Raised when references and hypotheses cannot be aligned."""


def levenshtein(a: str, b: str) -> int:
    """Plain edit distance; small strings, no need for anything cleverer."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(
                prev[j] + 1,
                cur[j - 1] + 1,
                prev[j - 1] + (0 if ca == cb else 1),
            ))
        prev = cur
    return prev[-1]


def _normalize(text: str) -> str:
    return " ".join(text.lower().split())


def fuzzy_score(a: str, b: str) -> float:
    """Normalized Levenshtein similarity in [0, 1] over folded strings."""
    na, nb = _normalize(a), _normalize(b)
    if not na and not nb:
        return 1.0
    dist = levenshtein(na, nb)
    return 1.0 - dist / max(len(na), len(nb))


def value_match_score(gt_values: list[str], predicted: str | None,
                      categorical: bool, exact: bool) -> float:
    """Score one slot assignment against the ground-truth surface list."""
    if predicted is None:
        return 0.0
    gt_canonical = gt_values[0] if gt_values else ""
    if gt_canonical == DONTCARE or predicted == DONTCARE:
        return 1.0 if (gt_canonical == DONTCARE and predicted == DONTCARE) else 0.0
    if categorical or exact:
        return 1.0 if any(_normalize(predicted) == _normalize(v) for v in gt_values) else 0.0
    return max(fuzzy_score(predicted, v) for v in gt_values)


@dataclass
class FramePair:
    """One aligned (reference frame, predicted frame) unit."""

    dialogue_id: str
    turn: int
    service: str
    ref_intent: str
    ref_requested: frozenset[str]
    ref_state: dict[str, list[str]]
    hyp_intent: str
    hyp_requested: frozenset[str]
    hyp_state: dict[str, str]


def reference_frames(dialogues: Iterable[Dialogue]) -> dict[tuple[str, int, str], dict]:
    out: dict[tuple[str, int, str], dict] = {}
    for dialogue in dialogues:
        for i, turn in enumerate(dialogue.turns):
            if turn.speaker != USER:
                continue
            for frame in turn.frames:
                if frame.state is None:
                    continue
                out[(dialogue.dialogue_id, i, frame.service)] = {
                    "active_intent": frame.state.active_intent,
                    "requested_slots": frozenset(frame.state.requested_slots),
                    "slot_values": {k: list(v) for k, v in frame.state.slot_values.items()},
                }
    return out


def hypothesis_frames(predictions) -> dict[tuple[str, int, str], dict]:
    """Accepts the prediction file object or a bare record list."""
    if isinstance(predictions, dict):
        records = predictions.get("predictions", [])
    else:
        records = predictions
    out: dict[tuple[str, int, str], dict] = {}
    for rec in records:
        try:
            key = (str(rec["dialogue_id"]), int(rec["turn"]), str(rec["service"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise MetricsError(f"malformed prediction record {rec!r}: {exc}")
        out[key] = {
            "active_intent": rec.get("active_intent", NONE_INTENT),
            "requested_slots": frozenset(rec.get("requested_slots", [])),
            "state": {str(k): str(v) for k, v in rec.get("state", {}).items()},
        }
    return out


def align_frames(refs: Iterable[Dialogue], predictions,
                 allow_partial: bool = False) -> tuple[list[FramePair], int]:
    """Pair every reference frame with its prediction.

    Predictions for frames the references never annotate are ignored (the
    tracker predicts every service on every turn; references only annotate
    services seen so far).  Missing predictions are an error unless
    allow_partial, in which case they are dropped and counted.
    """
    ref_index = reference_frames(refs)
    hyp_index = hypothesis_frames(predictions)
    pairs: list[FramePair] = []
    missing: list[tuple[str, int, str]] = []
    for key, ref in ref_index.items():
        hyp = hyp_index.get(key)
        if hyp is None:
            missing.append(key)
            continue
        pairs.append(FramePair(
            dialogue_id=key[0],
            turn=key[1],
            service=key[2],
            ref_intent=ref["active_intent"],
            ref_requested=ref["requested_slots"],
            ref_state=ref["slot_values"],
            hyp_intent=hyp["active_intent"],
            hyp_requested=hyp["requested_slots"],
            hyp_state=hyp["state"],
        ))
    if missing and not allow_partial:
        shown = ", ".join(f"{d}/{t}/{s}" for d, t, s in sorted(missing)[:5])
        raise MetricsError(
            f"{len(missing)} reference frames have no prediction (first: {shown})"
        )
    return pairs, len(missing)


def active_intent_accuracy(pairs: list[FramePair]) -> float | None:
    if not pairs:
        return None
    hits = sum(1 for p in pairs if p.hyp_intent == p.ref_intent)
    return hits / len(pairs)


def requested_slot_f1(pairs: list[FramePair]) -> float | None:
    """Macro-average of per-frame F1; frames empty on both sides are skipped."""
    scores = []
    for p in pairs:
        if not p.ref_requested and not p.hyp_requested:
            continue
        if not p.ref_requested or not p.hyp_requested:
            scores.append(0.0)
            continue
        overlap = len(p.ref_requested & p.hyp_requested)
        precision = overlap / len(p.hyp_requested)
        recall = overlap / len(p.ref_requested)
        if precision + recall == 0:
            scores.append(0.0)
        else:
            scores.append(2 * precision * recall / (precision + recall))
    if not scores:
        return None
    return sum(scores) / len(scores)


def _is_categorical(schemas: dict[str, ServiceSchema] | None,
                    service: str, slot: str) -> bool:
    if schemas is None:
        return False
    schema = schemas.get(service)
    if schema is None:
        return False
    try:
        return schema.slot_by_name(slot).is_categorical
    except KeyError:
        return False


def average_goal_accuracy(pairs: list[FramePair],
                          schemas: dict[str, ServiceSchema] | None,
                          exact: bool = False) -> float | None:
    """Mean match score over (frame, slot) pairs with non-empty ground truth."""
    total = 0.0
    count = 0
    for p in pairs:
        for slot, gt_values in p.ref_state.items():
            if not gt_values:
                continue
            count += 1
            total += value_match_score(
                gt_values, p.hyp_state.get(slot),
                _is_categorical(schemas, p.service, slot), exact,
            )
    if count == 0:
        return None
    return total / count


def _frame_is_joint_match(p: FramePair, schemas, exact: bool,
                          threshold: float, ignore_extra: bool) -> bool:
    for slot, gt_values in p.ref_state.items():
        if not gt_values:
            continue
        score = value_match_score(
            gt_values, p.hyp_state.get(slot),
            _is_categorical(schemas, p.service, slot), exact,
        )
        if score < (1.0 if exact else threshold):
            return False
    if not ignore_extra:
        extra = set(p.hyp_state) - set(p.ref_state)
        if extra:
            return False
    return True


def joint_goal_accuracy(pairs: list[FramePair],
                        schemas: dict[str, ServiceSchema] | None,
                        exact: bool = False,
                        threshold: float = FUZZY_THRESHOLD,
                        ignore_extra: bool = False) -> float | None:
    if not pairs:
        return None
    hits = sum(
        1 for p in pairs
        if _frame_is_joint_match(p, schemas, exact, threshold, ignore_extra)
    )
    return hits / len(pairs)


@dataclass
class MetricBlock:
    frames: int
    active_intent_accuracy: float | None
    requested_slot_f1: float | None
    average_goal_accuracy: float | None
    joint_goal_accuracy: float | None

    def to_dict(self) -> dict:
        return {
            "frames": self.frames,
            "active_intent_accuracy": self.active_intent_accuracy,
            "requested_slot_f1": self.requested_slot_f1,
            "average_goal_accuracy": self.average_goal_accuracy,
            "joint_goal_accuracy": self.joint_goal_accuracy,
        }


@dataclass
class EvalReport:
    overall: MetricBlock
    per_service: dict[str, MetricBlock]
    per_domain: dict[str, MetricBlock]
    seen: MetricBlock | None
    unseen: MetricBlock | None
    missing_predictions: int

    def to_dict(self) -> dict:
        return {
            "overall": self.overall.to_dict(),
            "per_service": {k: v.to_dict() for k, v in sorted(self.per_service.items())},
            "per_domain": {k: v.to_dict() for k, v in sorted(self.per_domain.items())},
            "seen": self.seen.to_dict() if self.seen is not None else None,
            "unseen": self.unseen.to_dict() if self.unseen is not None else None,
            "missing_predictions": self.missing_predictions,
        }


def _block(pairs: list[FramePair], schemas, exact: bool,
           threshold: float, ignore_extra: bool) -> MetricBlock:
    return MetricBlock(
        frames=len(pairs),
        active_intent_accuracy=active_intent_accuracy(pairs),
        requested_slot_f1=requested_slot_f1(pairs),
        average_goal_accuracy=average_goal_accuracy(pairs, schemas, exact),
        joint_goal_accuracy=joint_goal_accuracy(
            pairs, schemas, exact, threshold, ignore_extra
        ),
    )


def evaluate(refs: list[Dialogue], predictions,
             schemas: dict[str, ServiceSchema] | None = None,
             seen_services: Iterable[str] | None = None,
             exact: bool = False,
             threshold: float = FUZZY_THRESHOLD,
             ignore_extra: bool = False,
             allow_partial: bool = False) -> EvalReport:
    """Full scoring: aggregate plus per-service, per-domain, seen/unseen."""
    pairs, missing = align_frames(refs, predictions, allow_partial=allow_partial)

    by_service: dict[str, list[FramePair]] = {}
    by_domain: dict[str, list[FramePair]] = {}
    for p in pairs:
        by_service.setdefault(p.service, []).append(p)
        by_domain.setdefault(domain_of(p.service), []).append(p)

    seen_block = unseen_block = None
    if seen_services is not None:
        seen_set = set(seen_services)
        seen_pairs = [p for p in pairs if p.service in seen_set]
        unseen_pairs = [p for p in pairs if p.service not in seen_set]
        seen_block = _block(seen_pairs, schemas, exact, threshold, ignore_extra)
        unseen_block = _block(unseen_pairs, schemas, exact, threshold, ignore_extra)

    return EvalReport(
        overall=_block(pairs, schemas, exact, threshold, ignore_extra),
        per_service={
            k: _block(v, schemas, exact, threshold, ignore_extra)
            for k, v in by_service.items()
        },
        per_domain={
            k: _block(v, schemas, exact, threshold, ignore_extra)
            for k, v in by_domain.items()
        },
        seen=seen_block,
        unseen=unseen_block,
        missing_predictions=missing,
    )


def _fmt(value: float | None) -> str:
    return "   --" if value is None else f"{value:.3f}"


def render_report_table(report: EvalReport) -> str:
    """Aligned text table of every block in the report."""
    rows: list[tuple[str, MetricBlock]] = [("overall", report.overall)]
    rows += [(f"service:{k}", v) for k, v in sorted(report.per_service.items())]
    rows += [(f"domain:{k}", v) for k, v in sorted(report.per_domain.items())]
    if report.seen is not None:
        rows.append(("seen", report.seen))
    if report.unseen is not None:
        rows.append(("unseen", report.unseen))
    width = max(len(name) for name, _ in rows)
    lines = [
        f"{'':{width}}  frames  intent_acc  req_f1  avg_ga  joint_ga",
    ]
    for name, block in rows:
        lines.append(
            f"{name:{width}}  {block.frames:6d}  "
            f"{_fmt(block.active_intent_accuracy):>10}  "
            f"{_fmt(block.requested_slot_f1):>6}  "
            f"{_fmt(block.average_goal_accuracy):>6}  "
            f"{_fmt(block.joint_goal_accuracy):>8}"
        )
    if report.missing_predictions:
        lines.append(f"missing predictions: {report.missing_predictions}")
    return "\n".join(lines)
