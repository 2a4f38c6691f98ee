"""Trainable parameters of the tracker and their JSON checkpoint format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# head name -> logit arity; every head shares the projection shape otherwise
HEAD_SIZES = {
    "intent": 1,
    "requested": 1,
    "status": 3,
    "value": 1,
    "start": 1,
    "end": 1,
}

CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Raised when a parameter file cannot be decoded."""


@dataclass
class ProjectionParams:
    """One three-layer projection: w1 (d,d), w2 (d,2d), w3 (p,d) plus biases."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    @property
    def dim(self) -> int:
        return self.w1.shape[0]

    @property
    def out_size(self) -> int:
        return self.w3.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2,
                "b2": self.b2, "w3": self.w3, "b3": self.b3}

    def check_shapes(self) -> None:
        d = self.dim
        p = self.out_size
        expected = {
            "w1": (d, d), "b1": (d,),
            "w2": (d, 2 * d), "b2": (d,),
            "w3": (p, d), "b3": (p,),
        }
        for name, arr in self.arrays().items():
            if arr.shape != expected[name]:
                raise CheckpointError(
                    f"{name} has shape {arr.shape}, expected {expected[name]}"
                )


@dataclass
class TrackerParams:
    """All trainable state: one projection per head plus the NONE intent vector."""

    dim: int
    none_intent: np.ndarray  # (d,)
    heads: dict[str, ProjectionParams] = field(default_factory=dict)

    def check(self) -> None:
        if self.none_intent.shape != (self.dim,):
            raise CheckpointError(
                f"none_intent has shape {self.none_intent.shape}, expected ({self.dim},)"
            )
        missing = set(HEAD_SIZES) - set(self.heads)
        if missing:
            raise CheckpointError(f"missing heads: {sorted(missing)}")
        for name, head in self.heads.items():
            if name not in HEAD_SIZES:
                raise CheckpointError(f"unknown head {name!r}")
            if head.dim != self.dim or head.out_size != HEAD_SIZES[name]:
                raise CheckpointError(
                    f"head {name!r}: dim {head.dim} out {head.out_size}, "
                    f"expected dim {self.dim} out {HEAD_SIZES[name]}"
                )
            head.check_shapes()

    def trainable_arrays(self) -> list[tuple[str, np.ndarray]]:
        """Stable (name, array) listing used by the optimizer."""
        out: list[tuple[str, np.ndarray]] = [("none_intent", self.none_intent)]
        for head_name in sorted(self.heads):
            for arr_name, arr in self.heads[head_name].arrays().items():
                out.append((f"{head_name}.{arr_name}", arr))
        return out


def init_params(dim: int, seed: int = 0, scale: float = 0.08) -> TrackerParams:
    """Fresh parameters with small gaussian weights and zero biases."""
    rng = np.random.default_rng(seed)
    heads = {}
    for name, p in HEAD_SIZES.items():
        heads[name] = ProjectionParams(
            w1=rng.standard_normal((dim, dim)) * scale,
            b1=np.zeros(dim),
            w2=rng.standard_normal((dim, 2 * dim)) * scale,
            b2=np.zeros(dim),
            w3=rng.standard_normal((p, dim)) * scale,
            b3=np.zeros(p),
        )
    params = TrackerParams(
        dim=dim,
        none_intent=rng.standard_normal(dim) * scale,
        heads=heads,
    )
    params.check()
    return params


def _encode_array(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape), "data": [float(v) for v in arr.reshape(-1)]}


def _decode_array(obj: dict, where: str) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in obj["shape"])
        data = np.asarray(obj["data"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"bad array at {where}: {exc}")
    expected = int(np.prod(shape)) if shape else 1
    if data.size != expected:
        raise CheckpointError(
            f"array at {where} has {data.size} values for shape {shape}"
        )
    return data.reshape(shape)


def save_checkpoint(params: TrackerParams, path: str | Path,
                    encoder_config: dict | None = None) -> None:
    params.check()
    blob = {
        "version": CHECKPOINT_VERSION,
        "dim": params.dim,
        "encoder": encoder_config or {},
        "none_intent": _encode_array(params.none_intent),
        "heads": {
            name: {k: _encode_array(v) for k, v in head.arrays().items()}
            for name, head in sorted(params.heads.items())
        },
    }
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(blob) + "\n", encoding="utf-8")
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> tuple[TrackerParams, dict]:
    """Returns (params, encoder_config)."""
    path = Path(path)
    try:
        blob = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path.name}: not valid JSON ({exc})")
    if not isinstance(blob, dict) or blob.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path.name}: unsupported checkpoint version {blob.get('version')!r}"
        )
    dim = int(blob["dim"])
    heads = {}
    for name, arrays in blob.get("heads", {}).items():
        heads[name] = ProjectionParams(
            **{k: _decode_array(arrays[k], f"heads.{name}.{k}") for k in
               ("w1", "b1", "w2", "b2", "w3", "b3")}
        )
    params = TrackerParams(
        dim=dim,
        none_intent=_decode_array(blob["none_intent"], "none_intent"),
        heads=heads,
    )
    params.check()
    return params, dict(blob.get("encoder", {}))
