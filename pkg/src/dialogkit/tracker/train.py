"""Mini training loop fitting the projection heads on a generated corpus.

Labels come straight from the corpus annotations: the active intent and
requested slots of each user frame, and per-slot status/value targets from the
difference between consecutive dialogue states.  Statuses diff on the
canonical surface (the head of each state list) because paraphrase variants
may lengthen a list without changing the underlying assignment.

The optimizer is Adam over every head plus the NONE intent vector; settings
live in TrainConfig and are not part of any numeric contract.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..dialogue import Dialogue, NONE_INTENT, USER
from ..schema import DONTCARE, ServiceSchema
from .encoder import EncodedPair, HashedPairEncoder, PairEncoder
from .model import (
    STATUS_ORDER,
    SchemaEmbeddings,
    embed_schema,
    project_backward,
    project_batch,
    sigmoid,
    softmax,
)
from .params import TrackerParams, init_params

log = logging.getLogger(__name__)

_STATUS_INDEX = {name: i for i, name in enumerate(STATUS_ORDER)}


@dataclass
class TrainConfig:
    dim: int = 64
    seed: int = 0
    encoder_seed: int = 0
    epochs: int = 24
    batch_size: int = 32
    learning_rate: float = 2e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    init_scale: float = 0.08
    # gaussian jitter on schema-side vectors during training; keeps the heads
    # smooth around each embedding so paraphrased descriptions of the same
    # concept land in the same decision region
    schema_noise: float = 0.08
    weight_decay: float = 1e-4


@dataclass
class TurnExample:
    """Training targets for one (user turn, service) frame."""

    dialogue_id: str
    turn: int
    service: str
    encoded: EncodedPair
    intent_label: int  # 0 is NONE, j+1 is the j-th schema intent
    requested: np.ndarray  # (S,) float 0/1
    status: np.ndarray  # (S,) int index into STATUS_ORDER
    value_labels: dict[int, int] = field(default_factory=dict)  # slot idx -> value idx
    span_labels: dict[int, tuple[int, int]] = field(default_factory=dict)


def _token_span(encoded: EncodedPair, start: int, end: int) -> tuple[int, int] | None:
    """Token index pair covering exactly chars [start, end) of the user segment."""
    p = q = None
    for i, info in enumerate(encoded.token_info):
        if info.segment != 1:
            continue
        if info.start == start:
            p = i
        if info.end == end:
            q = i
    if p is None or q is None or p > q:
        return None
    return p, q


def build_examples(dialogues: list[Dialogue], schemas: dict[str, ServiceSchema],
                   encoder: PairEncoder,
                   embeddings: dict[str, SchemaEmbeddings]) -> list[TurnExample]:
    examples: list[TurnExample] = []
    for dialogue in dialogues:
        prev_states: dict[str, dict[str, list[str]]] = {}
        prev_system = ""
        for ti, turn in enumerate(dialogue.turns):
            if turn.speaker != USER:
                prev_system = turn.utterance
                continue
            encoded = encoder.encode(prev_system, turn.utterance)
            for frame in turn.frames:
                if frame.state is None or frame.service not in embeddings:
                    continue
                emb = embeddings[frame.service]
                state = frame.state
                prev = prev_states.get(frame.service, {})

                if state.active_intent == NONE_INTENT:
                    intent_label = 0
                elif state.active_intent in emb.intent_names:
                    intent_label = 1 + emb.intent_names.index(state.active_intent)
                else:
                    continue

                requested = np.zeros(len(emb.slot_names))
                for slot in state.requested_slots:
                    if slot in emb.slot_names:
                        requested[emb.slot_names.index(slot)] = 1.0

                status = np.zeros(len(emb.slot_names), dtype=np.int64)
                value_labels: dict[int, int] = {}
                span_labels: dict[int, tuple[int, int]] = {}
                spans_by_slot = {s.slot: s for s in frame.slots}
                for j, slot in enumerate(emb.slot_names):
                    cur = state.slot_values.get(slot)
                    before = prev.get(slot)
                    if cur is None or (before is not None and cur[0] == before[0]):
                        continue  # status stays none
                    if cur[0] == DONTCARE:
                        status[j] = _STATUS_INDEX["dontcare"]
                        continue
                    status[j] = _STATUS_INDEX["active"]
                    if slot in emb.value_names:
                        values = emb.value_names[slot]
                        if cur[0] in values:
                            value_labels[j] = values.index(cur[0])
                    else:
                        span = spans_by_slot.get(slot)
                        if span is not None:
                            tok = _token_span(encoded, span.start, span.end)
                            if tok is not None:
                                span_labels[j] = tok

                examples.append(TurnExample(
                    dialogue_id=dialogue.dialogue_id,
                    turn=ti,
                    service=frame.service,
                    encoded=encoded,
                    intent_label=intent_label,
                    requested=requested,
                    status=status,
                    value_labels=value_labels,
                    span_labels=span_labels,
                ))
                prev_states[frame.service] = state.slot_values
    return examples


class Adam:
    """Standard Adam over named parameter arrays, updating them in place."""

    def __init__(self, arrays: list[tuple[str, np.ndarray]], lr: float,
                 beta1: float, beta2: float, eps: float,
                 weight_decay: float = 0.0):
        self.arrays = dict(arrays)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.m = {k: np.zeros_like(v) for k, v in self.arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in self.arrays.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, g in grads.items():
            arr = self.arrays[name]
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            arr -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
            if self.weight_decay:
                arr -= self.lr * self.weight_decay * arr


def _tile(vec: np.ndarray, n: int) -> np.ndarray:
    return np.broadcast_to(vec, (n, vec.shape[0]))


def _accumulate(grads: dict[str, np.ndarray], head: str,
                head_grads: dict[str, np.ndarray]) -> None:
    for k, g in head_grads.items():
        key = f"{head}.{k}"
        if key in grads:
            grads[key] += g
        else:
            grads[key] = g.copy()


def _example_pass(params: TrackerParams, emb: SchemaEmbeddings, ex: TurnExample,
                  grads: dict[str, np.ndarray],
                  noise_rng: np.random.Generator | None = None,
                  noise: float = 0.0) -> float:
    """Forward + backward for one example; returns its summed loss."""
    u = ex.encoded.u
    loss = 0.0

    def jitter(vecs: np.ndarray) -> np.ndarray:
        if noise_rng is None or noise <= 0.0:
            return vecs
        return vecs + noise_rng.standard_normal(vecs.shape) * noise

    # active intent: softmax over NONE plus every schema intent
    ys = np.vstack([params.none_intent[None, :], jitter(emb.intent_vecs)])
    logits, cache = project_batch(params.heads["intent"], _tile(u, len(ys)), ys)
    probs = softmax(logits[:, 0])
    loss -= float(np.log(max(probs[ex.intent_label], 1e-12)))
    dlog = probs.copy()
    dlog[ex.intent_label] -= 1.0
    hg, _, dy = project_backward(params.heads["intent"], cache, dlog[:, None])
    _accumulate(grads, "intent", hg)
    key = "none_intent"
    if key in grads:
        grads[key] += dy[0]
    else:
        grads[key] = dy[0].copy()

    n_slots = len(emb.slot_names)
    tiled_u = _tile(u, n_slots)
    slot_vecs = jitter(emb.slot_vecs)

    # requested slots: independent sigmoid per slot
    logits, cache = project_batch(params.heads["requested"], tiled_u, slot_vecs)
    scores = sigmoid(logits[:, 0])
    loss -= float(np.sum(
        ex.requested * np.log(np.maximum(scores, 1e-12))
        + (1 - ex.requested) * np.log(np.maximum(1 - scores, 1e-12))
    ))
    hg, _, _ = project_backward(
        params.heads["requested"], cache, (scores - ex.requested)[:, None]
    )
    _accumulate(grads, "requested", hg)

    # slot status: three-way softmax per slot
    logits, cache = project_batch(params.heads["status"], tiled_u, slot_vecs)
    probs = softmax(logits)
    onehot = np.zeros_like(probs)
    onehot[np.arange(n_slots), ex.status] = 1.0
    loss -= float(np.sum(np.log(np.maximum(probs[np.arange(n_slots), ex.status], 1e-12))))
    hg, _, _ = project_backward(params.heads["status"], cache, probs - onehot)
    _accumulate(grads, "status", hg)

    # categorical values: softmax over the slot's value list
    for j, vidx in ex.value_labels.items():
        vecs = jitter(emb.value_vecs[emb.slot_names[j]])
        logits, cache = project_batch(params.heads["value"], _tile(u, len(vecs)), vecs)
        probs = softmax(logits[:, 0])
        loss -= float(np.log(max(probs[vidx], 1e-12)))
        dlog = probs.copy()
        dlog[vidx] -= 1.0
        hg, _, _ = project_backward(params.heads["value"], cache, dlog[:, None])
        _accumulate(grads, "value", hg)

    # span boundaries: softmax over tokens for start and end separately
    for j, (p, q) in ex.span_labels.items():
        slot_vec = jitter(emb.slot_vecs[j][None, :])[0]
        tokens = ex.encoded.tokens
        tiled = _tile(slot_vec, len(tokens))
        for head, target in (("start", p), ("end", q)):
            logits, cache = project_batch(params.heads[head], tokens, tiled)
            probs = softmax(logits[:, 0])
            loss -= float(np.log(max(probs[target], 1e-12)))
            dlog = probs.copy()
            dlog[target] -= 1.0
            hg, _, _ = project_backward(params.heads[head], cache, dlog[:, None])
            _accumulate(grads, head, hg)

    return loss


def train_tracker(dialogues: list[Dialogue], schemas: dict[str, ServiceSchema],
                  config: TrainConfig | None = None,
                  encoder: PairEncoder | None = None,
                  ) -> tuple[TrackerParams, PairEncoder]:
    """Fit tracker parameters on annotated dialogues; returns (params, encoder)."""
    config = config or TrainConfig()
    if encoder is None:
        encoder = HashedPairEncoder(dim=config.dim, seed=config.encoder_seed)
    services = sorted({s for d in dialogues for s in d.services})
    embeddings = {
        name: embed_schema(encoder, schemas[name])
        for name in services if name in schemas
    }
    examples = build_examples(dialogues, schemas, encoder, embeddings)
    if not examples:
        raise ValueError("no trainable frames in the corpus")
    params = init_params(config.dim, seed=config.seed, scale=config.init_scale)
    opt = Adam(params.trainable_arrays(), config.learning_rate,
               config.beta1, config.beta2, config.adam_eps,
               weight_decay=config.weight_decay)
    rng = np.random.default_rng(config.seed)
    noise_rng = np.random.default_rng(config.seed + 1)
    emb_by_service = embeddings

    t0 = time.monotonic()
    for epoch in range(config.epochs):
        order = rng.permutation(len(examples))
        total = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo:lo + config.batch_size]
            grads: dict[str, np.ndarray] = {}
            for idx in batch:
                ex = examples[idx]
                total += _example_pass(params, emb_by_service[ex.service], ex, grads,
                                       noise_rng, config.schema_noise)
            for g in grads.values():
                g /= len(batch)
            opt.step(grads)
        log.info("epoch %d/%d loss %.4f (%.1fs)", epoch + 1, config.epochs,
                 total / len(examples), time.monotonic() - t0)
    return params, encoder
