"""Schema-driven dialogue corpus generation and state-tracking evaluation.

Two halves share one data model.  The generation half turns declarative
service schemas, backend record pools, and scenario catalogs into fully
annotated dialogues: a two-agent simulator produces act-level outlines,
a value-variation pass rewrites surface forms, and a template renderer
emits utterances with character-level slot spans.  The evaluation half
encodes (system, user) utterance pairs against schema element
descriptions, predicts intents, requested slots, and goal updates with
small projection heads, and scores predictions with joint and average
goal accuracy under a fuzzy-match policy.
"""

from .acts import Act, Action, ARITY, COUNT_SLOT, INTENT_SLOT, SYSTEM_ACTS, USER_ACTS
from .dialogue import (
    Dialogue,
    Frame,
    FrameState,
    NONE_INTENT,
    SYSTEM,
    ServiceCall,
    SlotSpan,
    Turn,
    USER,
    validate_dialogue,
)
from .schema import (
    DONTCARE,
    IntentDef,
    ServiceSchema,
    SlotDef,
    load_schema,
    load_schema_dir,
    schema_element_sequences,
)

__version__ = "0.1.0"

__all__ = [
    "Act",
    "Action",
    "ARITY",
    "COUNT_SLOT",
    "INTENT_SLOT",
    "SYSTEM_ACTS",
    "USER_ACTS",
    "Dialogue",
    "Frame",
    "FrameState",
    "NONE_INTENT",
    "SYSTEM",
    "ServiceCall",
    "SlotSpan",
    "Turn",
    "USER",
    "validate_dialogue",
    "DONTCARE",
    "IntentDef",
    "ServiceSchema",
    "SlotDef",
    "load_schema",
    "load_schema_dir",
    "schema_element_sequences",
]
