"""Schema-guided dialogue state tracker: encoder, heads, training loop."""

from .encoder import EncodedPair, HashedPairEncoder, PairEncoder, TokenInfo, tokenize
from .model import (
    SchemaEmbeddings,
    SlotDecision,
    TurnPrediction,
    STATUS_ACTIVE,
    STATUS_DONTCARE,
    STATUS_NONE,
    STATUS_ORDER,
    accumulate_state,
    decode_span,
    embed_schema,
    gelu,
    gelu_prime,
    normal_cdf,
    predict_active_intent,
    predict_goal_update,
    predict_requested_slots,
    predict_turn,
    project,
    project_backward,
    project_batch,
    sigmoid,
    softmax,
    track_dialogue,
)
from .params import (
    CheckpointError,
    HEAD_SIZES,
    ProjectionParams,
    TrackerParams,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .train import Adam, TrainConfig, TurnExample, build_examples, train_tracker

__all__ = [
    "EncodedPair",
    "HashedPairEncoder",
    "PairEncoder",
    "TokenInfo",
    "tokenize",
    "SchemaEmbeddings",
    "SlotDecision",
    "TurnPrediction",
    "STATUS_ACTIVE",
    "STATUS_DONTCARE",
    "STATUS_NONE",
    "STATUS_ORDER",
    "accumulate_state",
    "decode_span",
    "embed_schema",
    "gelu",
    "gelu_prime",
    "normal_cdf",
    "predict_active_intent",
    "predict_goal_update",
    "predict_requested_slots",
    "predict_turn",
    "project",
    "project_backward",
    "project_batch",
    "sigmoid",
    "softmax",
    "track_dialogue",
    "CheckpointError",
    "HEAD_SIZES",
    "ProjectionParams",
    "TrackerParams",
    "init_params",
    "load_checkpoint",
    "save_checkpoint",
    "Adam",
    "TrainConfig",
    "TurnExample",
    "build_examples",
    "train_tracker",
]
