"""State tracker forward pass: projections, prediction heads, decoding.

Every head is the same three-layer projection applied to an (x, y) pair:

    h1 = gelu(w1 x + b1)
    h2 = gelu(w2 (y concat h1) + b2)
    l  = w3 h2 + b3

with x an utterance-side vector (pair embedding u, or a token vector for the
span heads) and y a schema-element embedding.  Predictions are therefore
defined for any schema the encoder can embed; growing the schema grows the
output arity without touching parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from ..dialogue import Dialogue, NONE_INTENT, USER
from ..schema import DONTCARE, ServiceSchema, schema_element_sequences
from ..schema import INTENT_ELEMENT, SLOT_ELEMENT, VALUE_ELEMENT
from .encoder import EncodedPair, PairEncoder
from .params import ProjectionParams, TrackerParams

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

STATUS_NONE = "none"
STATUS_DONTCARE = "dontcare"
STATUS_ACTIVE = "active"
# softmax slot order of the status head; also the tie-break preference
STATUS_ORDER = (STATUS_NONE, STATUS_DONTCARE, STATUS_ACTIVE)


def normal_cdf(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(np.asarray(x, dtype=np.float64) * _INV_SQRT2))


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact gaussian-error linear unit x * Phi(x)."""
    x = np.asarray(x, dtype=np.float64)
    return x * normal_cdf(x)


def gelu_prime(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return normal_cdf(x) + x * pdf


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def project_batch(params: ProjectionParams, x: np.ndarray, y: np.ndarray):
    """Forward over n row-aligned (x, y) pairs; returns (logits (n,p), cache)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape != y.shape or x.shape[1] != params.dim:
        raise ValueError(
            f"projection inputs {x.shape} / {y.shape} do not match dim {params.dim}"
        )
    pre1 = x @ params.w1.T + params.b1
    h1 = gelu(pre1)
    z = np.concatenate([y, h1], axis=1)
    pre2 = z @ params.w2.T + params.b2
    h2 = gelu(pre2)
    logits = h2 @ params.w3.T + params.b3
    cache = (x, pre1, z, pre2, h2)
    return logits, cache


def project(params: ProjectionParams, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    logits, _ = project_batch(params, x, y)
    return logits[0]


def project_backward(params: ProjectionParams, cache, dlogits: np.ndarray):
    """Gradients for a cached forward pass.

    Returns (parameter grads, dx, dy); dy is what trains the NONE intent
    vector, every other schema embedding is frozen.
    """
    x, pre1, z, pre2, h2 = cache
    d = params.dim
    dlogits = np.atleast_2d(np.asarray(dlogits, dtype=np.float64))
    dw3 = dlogits.T @ h2
    db3 = dlogits.sum(axis=0)
    dh2 = dlogits @ params.w3
    dpre2 = dh2 * gelu_prime(pre2)
    dw2 = dpre2.T @ z
    db2 = dpre2.sum(axis=0)
    dz = dpre2 @ params.w2
    dy = dz[:, :d]
    dh1 = dz[:, d:]
    dpre1 = dh1 * gelu_prime(pre1)
    dw1 = dpre1.T @ x
    db1 = dpre1.sum(axis=0)
    dx = dpre1 @ params.w1
    grads = {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2, "w3": dw3, "b3": db3}
    return grads, dx, dy


@dataclass
class SchemaEmbeddings:
    """Fixed vectors for one service's intents, slots, and categorical values."""

    service: str
    dim: int
    intent_names: tuple[str, ...]
    slot_names: tuple[str, ...]
    intent_vecs: np.ndarray  # (I, d)
    slot_vecs: np.ndarray  # (S, d)
    value_names: dict[str, tuple[str, ...]]  # categorical slot -> values
    value_vecs: dict[str, np.ndarray]  # categorical slot -> (V, d)
    noncategorical: tuple[str, ...]


def embed_schema(encoder: PairEncoder, schema: ServiceSchema) -> SchemaEmbeddings:
    vectors = {
        key: encoder.encode(seq1, seq2).u
        for key, seq1, seq2 in schema_element_sequences(schema)
    }
    intent_names = schema.intent_names
    slot_names = schema.slot_names
    value_names: dict[str, tuple[str, ...]] = {}
    value_vecs: dict[str, np.ndarray] = {}
    for slot in schema.slots:
        if slot.is_categorical:
            value_names[slot.name] = slot.possible_values
            value_vecs[slot.name] = np.stack(
                [vectors[(VALUE_ELEMENT, slot.name, v)] for v in slot.possible_values]
            )
    return SchemaEmbeddings(
        service=schema.service_name,
        dim=encoder.dim,
        intent_names=intent_names,
        slot_names=slot_names,
        intent_vecs=np.stack([vectors[(INTENT_ELEMENT, n)] for n in intent_names]),
        slot_vecs=np.stack([vectors[(SLOT_ELEMENT, n)] for n in slot_names]),
        value_names=value_names,
        value_vecs=value_vecs,
        noncategorical=tuple(s.name for s in schema.slots if not s.is_categorical),
    )


def _tile_rows(vec: np.ndarray, n: int) -> np.ndarray:
    return np.broadcast_to(vec, (n, vec.shape[0]))


def predict_active_intent(u: np.ndarray, emb: SchemaEmbeddings,
                          params: TrackerParams) -> tuple[str, np.ndarray]:
    """(intent name or NONE, distribution over the NONE slot plus I intents)."""
    ys = np.vstack([params.none_intent[None, :], emb.intent_vecs])
    logits, _ = project_batch(params.heads["intent"], _tile_rows(u, len(ys)), ys)
    probs = softmax(logits[:, 0])
    idx = int(np.argmax(probs))  # first occurrence wins ties, NONE sits at 0
    name = NONE_INTENT if idx == 0 else emb.intent_names[idx - 1]
    return name, probs


def predict_requested_slots(u: np.ndarray, emb: SchemaEmbeddings,
                            params: TrackerParams) -> tuple[set[str], np.ndarray]:
    logits, _ = project_batch(
        params.heads["requested"], _tile_rows(u, len(emb.slot_vecs)), emb.slot_vecs
    )
    scores = sigmoid(logits[:, 0])
    requested = {emb.slot_names[j] for j in range(len(scores)) if scores[j] > 0.5}
    return requested, scores


def decode_span(start_probs: np.ndarray, end_probs: np.ndarray) -> tuple[int, int]:
    """Indices p <= q maximizing start[p] + end[q]; ties take the first pair
    in (p, q) lexicographic order."""
    m = len(start_probs)
    score = np.asarray(start_probs)[:, None] + np.asarray(end_probs)[None, :]
    score[np.tril_indices(m, k=-1)] = -np.inf
    flat = int(np.argmax(score))
    return flat // m, flat % m


@dataclass
class SlotDecision:
    status: str
    status_probs: np.ndarray
    value: str | None = None
    value_probs: np.ndarray | None = None
    span: tuple[int, int] | None = None


@dataclass
class TurnPrediction:
    service: str
    active_intent: str
    intent_probs: np.ndarray
    requested: set[str]
    requested_scores: np.ndarray
    slots: dict[str, SlotDecision] = field(default_factory=dict)

    def update(self) -> dict[str, tuple[str, str | None]]:
        out: dict[str, tuple[str, str | None]] = {}
        for name, decision in self.slots.items():
            if decision.status == STATUS_NONE:
                out[name] = (STATUS_NONE, None)
            elif decision.status == STATUS_DONTCARE:
                out[name] = (STATUS_DONTCARE, None)
            else:
                out[name] = (STATUS_ACTIVE, decision.value)
        return out


def predict_goal_update(encoded: EncodedPair, emb: SchemaEmbeddings,
                        params: TrackerParams) -> dict[str, SlotDecision]:
    """Stage one statuses for every slot, stage two values for active ones."""
    u = encoded.u
    n_slots = len(emb.slot_names)
    status_logits, _ = project_batch(
        params.heads["status"], _tile_rows(u, n_slots), emb.slot_vecs
    )
    decisions: dict[str, SlotDecision] = {}
    for j, slot in enumerate(emb.slot_names):
        probs = softmax(status_logits[j])
        status = STATUS_ORDER[int(np.argmax(probs))]
        decision = SlotDecision(status=status, status_probs=probs)
        if status == STATUS_ACTIVE:
            if slot in emb.value_vecs:
                vecs = emb.value_vecs[slot]
                logits, _ = project_batch(
                    params.heads["value"], _tile_rows(u, len(vecs)), vecs
                )
                vprobs = softmax(logits[:, 0])
                decision.value_probs = vprobs
                decision.value = emb.value_names[slot][int(np.argmax(vprobs))]
            else:
                slot_vec = emb.slot_vecs[j]
                tiled = _tile_rows(slot_vec, encoded.num_tokens)
                start_logits, _ = project_batch(params.heads["start"], encoded.tokens, tiled)
                end_logits, _ = project_batch(params.heads["end"], encoded.tokens, tiled)
                p, q = decode_span(softmax(start_logits[:, 0]), softmax(end_logits[:, 0]))
                decision.span = (p, q)
                decision.value = encoded.span_text(p, q)
        decisions[slot] = decision
    return decisions


def accumulate_state(prev: dict[str, str],
                     update: dict[str, tuple[str, str | None]]) -> dict[str, str]:
    """Fold one turn's goal update into the running per-service state.

    Status none keeps the previous assignment, dontcare writes the sentinel,
    active writes the decoded value.  Slots absent from both stay absent.
    """
    out = dict(prev)
    for slot, (status, value) in update.items():
        if status == STATUS_NONE:
            continue
        if status == STATUS_DONTCARE:
            out[slot] = DONTCARE
        else:
            out[slot] = value if value is not None else ""
    return out


def predict_turn(encoded: EncodedPair, emb: SchemaEmbeddings,
                 params: TrackerParams) -> TurnPrediction:
    intent, intent_probs = predict_active_intent(encoded.u, emb, params)
    requested, scores = predict_requested_slots(encoded.u, emb, params)
    slots = predict_goal_update(encoded, emb, params)
    return TurnPrediction(
        service=emb.service,
        active_intent=intent,
        intent_probs=intent_probs,
        requested=requested,
        requested_scores=scores,
        slots=slots,
    )


def track_dialogue(encoder: PairEncoder, schemas: dict[str, ServiceSchema],
                   params: TrackerParams, dialogue: Dialogue,
                   embeddings: dict[str, SchemaEmbeddings] | None = None) -> list[dict]:
    """Run the tracker over every user turn of one dialogue.

    Returns flat prediction records {turn, service, active_intent,
    requested_slots, state}; states accumulate across turns per service.
    """
    cache = embeddings if embeddings is not None else {}
    for service in dialogue.services:
        if service not in cache:
            schema = schemas.get(service)
            if schema is None:
                raise KeyError(f"no schema for service {service!r}")
            cache[service] = embed_schema(encoder, schema)

    records: list[dict] = []
    states: dict[str, dict[str, str]] = {s: {} for s in dialogue.services}
    prev_system = ""
    for i, turn in enumerate(dialogue.turns):
        if turn.speaker != USER:
            prev_system = turn.utterance
            continue
        encoded = encoder.encode(prev_system, turn.utterance)
        for service in dialogue.services:
            pred = predict_turn(encoded, cache[service], params)
            states[service] = accumulate_state(states[service], pred.update())
            records.append({
                "turn": i,
                "service": service,
                "active_intent": pred.active_intent,
                "requested_slots": sorted(pred.requested),
                "state": dict(states[service]),
            })
    return records
