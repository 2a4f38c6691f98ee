"""Numeric contracts of the projection heads, checked against independent oracles.

The oracles here deliberately avoid the code paths under test: the normal CDF
comes from Gauss-Legendre quadrature of the density (not erf), gradients come
from central finite differences, and span decoding is compared to a brute-force
scan over every legal index pair.
"""

import math

import numpy as np
import pytest

from oracles import GELU_AT_TWO, brute_force_span, normal_cdf_quadrature

from dialogkit.schema import ServiceSchema, SlotDef, IntentDef
from dialogkit.tracker import (
    HashedPairEncoder,
    ProjectionParams,
    accumulate_state,
    decode_span,
    embed_schema,
    gelu,
    init_params,
    predict_active_intent,
    predict_requested_slots,
    project,
    project_batch,
    project_backward,
    softmax,
)

def test_gelu_at_two_matches_frozen_value():
    assert abs(float(gelu(np.array(2.0))) - GELU_AT_TWO) < 1e-12


def test_gelu_matches_quadrature_oracle_on_grid():
    for x in np.linspace(-5.0, 5.0, 41):
        expected = x * normal_cdf_quadrature(float(x))
        assert abs(float(gelu(np.array(x))) - expected) < 1e-9


def test_gelu_zero_is_zero():
    assert float(gelu(np.array(0.0))) == 0.0


def test_gelu_monotone_right_of_dip():
    # x * Phi(x) dips to a minimum near -0.75 and increases from there on;
    # monotonicity only holds to the right of the dip
    grid = np.linspace(-0.7, 5.0, 200)
    vals = gelu(grid)
    assert np.all(np.diff(vals) >= 0)


def test_gelu_agrees_with_tanh_approximation_loosely():
    grid = np.linspace(-5.0, 5.0, 101)
    approx = 0.5 * grid * (1 + np.tanh(math.sqrt(2 / math.pi) * (grid + 0.044715 * grid**3)))
    assert np.max(np.abs(gelu(grid) - approx)) < 1e-3


def _zero_params(d: int, p: int) -> ProjectionParams:
    return ProjectionParams(
        w1=np.zeros((d, d)),
        b1=np.zeros(d),
        w2=np.zeros((d, 2 * d)),
        b2=np.zeros(d),
        w3=np.zeros((p, d)),
        b3=np.zeros(p),
    )


def test_project_all_zero_parameters_give_zero_logits():
    params = _zero_params(4, 3)
    out = project(params, np.zeros(4), np.ones(4))
    assert out.shape == (3,)
    assert np.allclose(out, 0.0)


def test_project_isolates_second_input_through_first_weight_row():
    # d=1 with w2 reading only the y half of the concatenation reduces the
    # whole network to gelu(y)
    params = ProjectionParams(
        w1=np.array([[1.0]]),
        b1=np.array([0.0]),
        w2=np.array([[1.0, 0.0]]),
        b2=np.array([0.0]),
        w3=np.array([[1.0]]),
        b3=np.array([0.0]),
    )
    out = project(params, np.array([0.0]), np.array([2.0]))
    assert abs(float(out[0]) - GELU_AT_TWO) < 1e-9


def _flatten_params(params: ProjectionParams):
    return [params.w1, params.b1, params.w2, params.b2, params.w3, params.b3]


def test_project_gradients_match_central_differences():
    rng = np.random.default_rng(7)
    eps = 1e-6
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(2, 5))
        p = int(rng.integers(1, 4))
        params = ProjectionParams(
            w1=rng.standard_normal((d, d)),
            b1=rng.standard_normal(d),
            w2=rng.standard_normal((d, 2 * d)),
            b2=rng.standard_normal(d),
            w3=rng.standard_normal((p, d)),
            b3=rng.standard_normal(p),
        )
        x = rng.standard_normal((1, d))
        y = rng.standard_normal((1, d))
        up = rng.standard_normal((1, p))

        _, cache = project_batch(params, x, y)
        grads, dx, dy = project_backward(params, cache, up)

        def loss(px: ProjectionParams, lx=None, ly=None) -> float:
            out, _ = project_batch(px, x if lx is None else lx, y if ly is None else ly)
            return float(np.sum(out * up))

        analytic = {
            "w1": grads["w1"], "b1": grads["b1"],
            "w2": grads["w2"], "b2": grads["b2"],
            "w3": grads["w3"], "b3": grads["b3"],
        }
        for name in analytic:
            arr = getattr(params, name)
            flat = arr.reshape(-1)
            num = np.zeros_like(flat)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                hi = loss(params)
                flat[i] = orig - eps
                lo = loss(params)
                flat[i] = orig
                num[i] = (hi - lo) / (2 * eps)
            ga = analytic[name].reshape(-1)
            denom = np.maximum(np.abs(ga) + np.abs(num), 1e-4)
            worst = max(worst, float(np.max(np.abs(ga - num) / denom)))
        # input gradients too
        for vec, dvec in ((x, dx), (y, dy)):
            flat = vec.reshape(-1)
            num = np.zeros_like(flat)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                hi = loss(params)
                flat[i] = orig - eps
                lo = loss(params)
                flat[i] = orig
                num[i] = (hi - lo) / (2 * eps)
            ga = dvec.reshape(-1)
            denom = np.maximum(np.abs(ga) + np.abs(num), 1e-4)
            worst = max(worst, float(np.max(np.abs(ga - num) / denom)))
    assert worst < 1e-4, f"worst relative gradient error {worst}"


def test_span_decode_matches_exhaustive_search():
    rng = np.random.default_rng(11)
    for _ in range(500):
        m = int(rng.integers(1, 13))
        start = softmax(rng.standard_normal(m) * 2)
        end = softmax(rng.standard_normal(m) * 2)
        assert decode_span(start, end) == brute_force_span(start, end)


def test_span_decode_crossing_pair_example():
    start = np.array([0.1, 0.6, 0.3])
    end = np.array([0.2, 0.1, 0.7])
    # (1,2) scores 1.3, beating (0,2)=0.8 even though end mass at 0 is low
    assert decode_span(start, end) == (1, 2)


def test_span_decode_single_token_is_forced():
    assert decode_span(np.array([1.0]), np.array([1.0])) == (0, 0)


def test_span_decode_tie_takes_lowest_start_then_lowest_end():
    flat = np.array([0.25, 0.25, 0.25, 0.25])
    assert decode_span(flat, flat) == (0, 0)


def test_softmax_outputs_are_distributions():
    rng = np.random.default_rng(3)
    for _ in range(50):
        z = rng.standard_normal(int(rng.integers(1, 9))) * 10
        probs = softmax(z)
        assert np.all(probs >= 0)
        assert abs(float(np.sum(probs)) - 1.0) < 1e-6


def test_softmax_handles_large_logits():
    probs = softmax(np.array([1000.0, 1000.0]))
    assert np.allclose(probs, [0.5, 0.5])


@pytest.fixture()
def tiny_schema() -> ServiceSchema:
    return ServiceSchema(
        service_name="Cafes_1",
        description="Find and book cafes",
        slots=(
            SlotDef("city", "City of the cafe"),
            SlotDef("seating", "Seating area", is_categorical=True,
                    possible_values=("indoor", "outdoor", "bar", "patio")),
            SlotDef("time", "Time of the booking"),
        ),
        intents=(
            IntentDef("FindCafe", "Search for a cafe", required_slots=("city",)),
            IntentDef("BookCafe", "Reserve a table at a cafe", is_transactional=True,
                      required_slots=("city", "time")),
        ),
    )


def test_embed_schema_vector_counts(tiny_schema):
    enc = HashedPairEncoder(dim=16, seed=5)
    emb = embed_schema(enc, tiny_schema)
    assert len(emb.intent_names) == 2
    assert len(emb.slot_names) == 3
    assert set(emb.value_vecs) == {"seating"}
    assert emb.value_vecs["seating"].shape == (4, 16)
    assert emb.intent_vecs.shape == (2, 16)
    assert emb.slot_vecs.shape == (3, 16)


def test_embed_schema_deterministic_and_local(tiny_schema):
    enc = HashedPairEncoder(dim=16, seed=5)
    a = embed_schema(enc, tiny_schema)
    b = embed_schema(enc, tiny_schema)
    assert np.array_equal(a.slot_vecs, b.slot_vecs)
    assert np.array_equal(a.intent_vecs, b.intent_vecs)

    # changing one slot description moves only that slot's vector
    slots = list(tiny_schema.slots)
    slots[0] = SlotDef("city", "Town where the cafe is located")
    changed = ServiceSchema(
        service_name=tiny_schema.service_name,
        description=tiny_schema.description,
        slots=tuple(slots),
        intents=tiny_schema.intents,
    )
    c = embed_schema(enc, changed)
    assert not np.array_equal(a.slot_vecs[0], c.slot_vecs[0])
    assert np.array_equal(a.slot_vecs[1:], c.slot_vecs[1:])
    assert np.array_equal(a.intent_vecs, c.intent_vecs)


def test_intent_prediction_uniform_tie_prefers_none(tiny_schema):
    enc = HashedPairEncoder(dim=16, seed=5)
    emb = embed_schema(enc, tiny_schema)
    params = init_params(dim=16, seed=1)
    # zero the intent head so every logit is identical
    zero = _zero_params(16, 1)
    params.heads["intent"] = zero
    u = enc.encode("", "hello there").u
    name, probs = predict_active_intent(u, emb, params)
    assert name == "NONE"
    assert probs.shape == (3,)
    assert np.allclose(probs, 1.0 / 3.0)
    assert abs(float(np.sum(probs)) - 1.0) < 1e-6


def test_intent_arity_tracks_schema_without_parameter_change(tiny_schema):
    enc = HashedPairEncoder(dim=16, seed=5)
    params = init_params(dim=16, seed=1)
    u = enc.encode("", "hello").u
    _, probs = predict_active_intent(u, embed_schema(enc, tiny_schema), params)
    assert probs.shape == (3,)

    grown = ServiceSchema(
        service_name=tiny_schema.service_name,
        description=tiny_schema.description,
        slots=tiny_schema.slots,
        intents=tiny_schema.intents + (
            IntentDef("CancelBooking", "Cancel an existing booking"),
        ),
    )
    _, probs2 = predict_active_intent(u, embed_schema(enc, grown), params)
    assert probs2.shape == (4,)


def test_requested_slots_threshold_is_strict(tiny_schema):
    enc = HashedPairEncoder(dim=16, seed=5)
    emb = embed_schema(enc, tiny_schema)
    params = init_params(dim=16, seed=1)
    params.heads["requested"] = _zero_params(16, 1)
    u = enc.encode("", "what time").u
    requested, scores = predict_requested_slots(u, emb, params)
    # zero logits sit exactly on the 0.5 boundary and must not fire
    assert requested == set()
    assert np.allclose(scores, 0.5)


def test_accumulate_state_semantics():
    assert accumulate_state({}, {}) == {}

    prev = {"city": "LA"}
    keep = accumulate_state(prev, {"city": ("none", None)})
    assert keep == {"city": "LA"}

    overwrite = accumulate_state(prev, {"city": ("active", "SF")})
    assert overwrite == {"city": "SF"}

    dontcare = accumulate_state(prev, {"city": ("dontcare", None)})
    assert dontcare == {"city": "dontcare"}

    # never-mentioned slots stay absent
    assert "time" not in accumulate_state({}, {"city": ("none", None)})


def test_accumulate_state_none_updates_are_idempotent():
    prev = {"city": "LA", "time": "7 pm"}
    update = {"city": ("none", None), "time": ("none", None)}
    once = accumulate_state(prev, update)
    twice = accumulate_state(once, update)
    assert once == prev and twice == once


def test_accumulate_state_does_not_mutate_input():
    prev = {"city": "LA"}
    accumulate_state(prev, {"city": ("active", "SF")})
    assert prev == {"city": "LA"}
