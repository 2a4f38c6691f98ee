"""Deterministic utterance-pair encoder.

The tracker's math only needs an encoder that maps a (system utterance, user
utterance) pair to a pair embedding u and per-token vectors t_1..t_M.  The
hashed encoder below is the shipped stand-in: every distinct token surface gets
a fixed unit vector seeded from its hash, u is the normalized mean over both
segments.  Anything implementing PairEncoder (a fine-tuned transformer,
for example) can be dropped in; the heads never look inside.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Protocol

import numpy as np

# Alphanumeric runs stay whole, every other non-space character is its own
# token.  Punctuation therefore never glues to a value surface, which keeps
# span boundaries aligned with token boundaries ("Oakland." -> "oakland", ".").
_TOKEN_RE = re.compile(r"[A-Za-z0-9]+|[^A-Za-z0-9\s]")


@dataclass(frozen=True)
class TokenInfo:
    """One token of the encoded pair, with enough geometry to cut spans."""

    text: str
    segment: int  # 0 = first sequence, 1 = second sequence
    start: int  # char offset within the segment text
    end: int


@dataclass
class EncodedPair:
    u: np.ndarray  # (d,)
    tokens: np.ndarray  # (M, d)
    token_info: list[TokenInfo]
    segments: tuple[str, str]

    @property
    def num_tokens(self) -> int:
        return len(self.token_info)

    def span_text(self, p: int, q: int) -> str:
        """Surface text covered by tokens p..q inclusive."""
        a = self.token_info[p]
        b = self.token_info[q]
        if a.segment == b.segment:
            return self.segments[a.segment][a.start:b.end]
        return (self.segments[a.segment][a.start:] + " "
                + self.segments[b.segment][:b.end]).strip()


class PairEncoder(Protocol):
    dim: int

    def encode(self, seq1: str, seq2: str) -> EncodedPair: ...


def tokenize(text: str) -> list[tuple[str, int, int]]:
    """(surface, start, end) for every token of text."""
    return [(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


class HashedPairEncoder:
    """Bag-of-hashed-tokens encoder; deterministic across runs and platforms."""

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim < 2:
            raise ValueError("encoder dimension must be at least 2")
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def _vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.sha256(f"{self.seed}:{token}".encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
            raw = rng.standard_normal(self.dim)
            vec = raw / np.linalg.norm(raw)
            self._cache[token] = vec
        return vec

    def encode(self, seq1: str, seq2: str) -> EncodedPair:
        info: list[TokenInfo] = []
        rows: list[np.ndarray] = []
        for segment, text in enumerate((seq1, seq2)):
            for surface, start, end in tokenize(text):
                info.append(TokenInfo(surface, segment, start, end))
                rows.append(self._vector(surface.lower()))
        if not rows:
            # keep M >= 1 so the span heads always have something to point at
            info.append(TokenInfo("", 1, 0, 0))
            rows.append(self._vector(""))
        tokens = np.stack(rows)
        u = tokens.mean(axis=0)
        norm = float(np.linalg.norm(u))
        if norm > 0:
            u = u / norm
        return EncodedPair(u=u, tokens=tokens, token_info=info, segments=(seq1, seq2))

    def to_dict(self) -> dict:
        return {"kind": "hashed", "dim": self.dim, "seed": self.seed}

    @staticmethod
    def from_dict(obj: dict) -> "HashedPairEncoder":
        if obj.get("kind") != "hashed":
            raise ValueError(f"unknown encoder kind {obj.get('kind')!r}")
        return HashedPairEncoder(dim=int(obj["dim"]), seed=int(obj["seed"]))
