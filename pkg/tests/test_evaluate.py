import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcpflow.core import Catalog, Event, EventSequence, KernelConfig
from mcpflow.errors import ValidationError
from mcpflow.evaluate import (
    OccupancyMatrix,
    accuracy_report,
    occupancy_from_sequences,
    predict_events,
    predict_next,
    relative_sim_error,
    simulate_cohort,
    split_for_simulation,
)
from mcpflow.model import FlowModel

CAT = Catalog.generic(1, 2, 3, 2)


def model_with(params, variant="mpp"):
    return FlowModel(np.asarray(params, dtype=float), KernelConfig(variant, 1.0), CAT.space, CAT.states,
                     CAT.durations, CAT.digest())


def patient(sid="p", state=1, static=(0,), t=1.0):
    return EventSequence(sid, static, [Event(t, state, None, (1,))], t)


def forced(state, duration):
    """Static feature row pushing all mass onto one state and one duration bucket."""
    p = np.zeros((3, 5))
    p[0, state - 1] = 200.0
    p[0, 3 + duration - 1] = 200.0
    return model_with(p)


# prediction

def test_zero_model_predicts_first_labels():
    assert predict_next(FlowModel.zeros(KernelConfig("mcp", 1.0), CAT), patient(), 1, 2.0) == (1, 1)


def test_hand_logits_argmax():
    p = np.zeros((3, 5))
    p[0, :2] = [math.log(2), 0.0]
    p[0, 2] = -1.0
    assert predict_next(model_with(p), patient(), 1, 1.0)[0] == 1


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), shift=st.floats(-5, 5))
def test_state_argmax_invariant_to_common_shift(seed, shift):
    rng = np.random.default_rng(seed)
    p = rng.normal(size=(3, 5))
    q = p.copy()
    q[:, :3] += shift * rng.normal(size=(3, 1))
    seq = EventSequence("a", (0,), [Event(1.0, 1, None, (0, 1)), Event(2.5, 2, 1, (1,))], 3.0)
    for hl, t in ((0, 0.5), (1, 1.0), (2, 2.5), (2, 4.0)):
        a = predict_next(model_with(p, "mcp"), seq, hl, t)[0]
        b = predict_next(model_with(q, "mcp"), seq, hl, t)[0]
        pa = model_with(p, "mcp").probabilities(seq, hl, t)[0]
        if np.sort(pa)[-1] - np.sort(pa)[-2] > 1e-9:
            assert a == b


def test_predict_events_matches_pointwise():
    rng = np.random.default_rng(0)
    m = model_with(rng.normal(size=(3, 5)), "mcp")
    seq = EventSequence("a", (0,), [Event(1.0, 1, None, (0,)), Event(2.0, 3, 1, (1,)), Event(4.0, 2, 2, ())], 5.0)
    ps, ts, pd, td = predict_events(m, [seq])
    for i in range(3):
        t = seq.events[i - 1].time if i else 0.0
        assert predict_next(m, seq, i, t)[0] == ps[i]
    assert list(ts) == [1, 3, 2] and list(td) == [1, 2] and len(pd) == 2


# accuracy

def test_all_correct():
    r = accuracy_report([1, 2, 3], [1, 2, 3], [1, 2, 3])
    assert r.overall == 1.0 and all(v == 1.0 for v in r.per_class.values())


def test_hand_counts():
    r = accuracy_report([1, 2, 2], [1, 1, 2], [1, 2, 3])
    assert r.per_class[1] == 0.5 and r.per_class[2] == 1.0
    assert r.overall == pytest.approx(2 / 3, abs=1e-15)
    assert r.per_class[3] is None


@settings(max_examples=80, deadline=None)
@given(pairs=st.lists(st.tuples(st.integers(1, 4), st.integers(1, 4)), min_size=1, max_size=60))
def test_overall_is_micro_accuracy(pairs):
    p, t = zip(*pairs)
    r = accuracy_report(p, t, [1, 2, 3, 4])
    assert r.overall == pytest.approx(np.mean(np.array(p) == np.array(t)), abs=1e-12)


def test_length_mismatch():
    with pytest.raises(ValidationError):
        accuracy_report([1, 2], [1], [1, 2])


# simulation

def test_forced_trajectory():
    occ = simulate_cohort(forced(2, 1), [patient(state=1)], horizon=3, rounds=1, seed=0)
    np.testing.assert_array_equal(occ.counts[1], [1, 1, 1])
    assert occ.counts.sum() == 3


def test_deterministic_model_rounds_average():
    m = forced(3, 2)
    one = simulate_cohort(m, [patient(), patient("q", 2)], horizon=5, rounds=1, seed=1)
    many = simulate_cohort(m, [patient(), patient("q", 2)], horizon=5, rounds=4, seed=9)
    np.testing.assert_array_equal(one.counts, many.counts)


def test_duration_buckets_hold_for_bucket_days():
    occ = simulate_cohort(forced(3, 2), [patient(state=1)], horizon=4, seed=0)
    np.testing.assert_array_equal(occ.counts, [[1, 0, 0, 0], [0, 0, 0, 0], [0, 1, 1, 1]])


def test_uniform_model_first_day_occupancy():
    # one-day buckets only, so every patient moves exactly once before day 1
    cat = Catalog.generic(1, 2, 4, 1)
    m = FlowModel.zeros(KernelConfig("mcp", 1.0), cat)
    n = 10_000
    cohort = [EventSequence(f"p{i}", (), [Event(1.0, 1, None)], 1.0) for i in range(n)]
    occ = simulate_cohort(m, cohort, horizon=1, seed=0)
    bound = 3 * math.sqrt(n * 0.25 * 0.75)
    assert np.all(np.abs(occ.counts[:, 0] - n / 4) <= bound)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 1000), horizon=st.integers(1, 9), n=st.integers(1, 6))
def test_patients_conserved(seed, horizon, n):
    rng = np.random.default_rng(seed)
    m = model_with(rng.normal(size=(3, 5)), "mcp")
    cohort = [patient(f"p{i}", int(rng.integers(1, 4)), t=float(rng.integers(1, 5))) for i in range(n)]
    occ = simulate_cohort(m, cohort, horizon=horizon, rounds=2, seed=seed)
    np.testing.assert_allclose(occ.daily_totals, n)


def test_simulation_deterministic():
    rng = np.random.default_rng(3)
    m = model_with(rng.normal(size=(3, 5)), "mcp")
    cohort = [patient(f"p{i}", 1 + i % 3) for i in range(20)]
    a = simulate_cohort(m, cohort, horizon=7, rounds=3, seed=5)
    b = simulate_cohort(m, cohort, horizon=7, rounds=3, seed=5)
    assert a.counts.tobytes() == b.counts.tobytes()


def test_simulation_errors():
    with pytest.raises(ValidationError):
        simulate_cohort(forced(1, 1), [], horizon=3)
    with pytest.raises(ValidationError):
        simulate_cohort(forced(1, 1), [patient()], horizon=0)


def test_observed_occupancy():
    seq = EventSequence("a", (), [Event(1.0, 1, None), Event(3.0, 2, 2), Event(4.0, 3, 1)], 6.0)
    occ = occupancy_from_sequences([seq], [1.0], 4, 3)
    np.testing.assert_array_equal(occ.counts, [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 1]])


# relative error

def test_sim_equals_real_is_zero():
    real = OccupancyMatrix(np.array([[3.0, 4.0], [1.0, 2.0]]))
    e = relative_sim_error(real, OccupancyMatrix(real.counts.copy()))
    assert e.per_state == [0.0, 0.0] and e.overall == 0.0


def test_zero_sim_is_one():
    real = OccupancyMatrix(np.array([[3.0, 4.0], [1.0, 2.0]]))
    e = relative_sim_error(real, OccupancyMatrix(np.zeros((2, 2))))
    assert e.per_state == [1.0, 1.0] and e.overall == 1.0


def test_hand_ratio():
    e = relative_sim_error(OccupancyMatrix([[10.0]]), OccupancyMatrix([[12.0]]))
    assert e.per_state[0] == pytest.approx(0.2) and e.overall == pytest.approx(0.2)


def test_zero_cells_skipped():
    e = relative_sim_error(OccupancyMatrix([[0.0, 2.0], [0.0, 0.0]]), OccupancyMatrix([[5.0, 1.0], [1.0, 0.0]]))
    assert e.per_state == [0.5, None] and e.skipped_cells == 4


def test_shape_mismatch():
    with pytest.raises(ValidationError):
        relative_sim_error(OccupancyMatrix(np.ones((2, 3))), OccupancyMatrix(np.ones((2, 2))))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_error_non_negative_and_zero_iff_equal(seed):
    rng = np.random.default_rng(seed)
    real = rng.integers(1, 9, (3, 4)).astype(float)
    sim = real.copy()
    e0 = relative_sim_error(OccupancyMatrix(real), OccupancyMatrix(sim))
    assert all(v == 0 for v in e0.per_state)
    sim[rng.integers(3), rng.integers(4)] += 1
    e1 = relative_sim_error(OccupancyMatrix(real), OccupancyMatrix(sim))
    assert all(v >= 0 for v in e1.per_state) and any(v > 0 for v in e1.per_state)


def test_split_for_simulation():
    seq = EventSequence("a", (), [Event(1.0, 1, None), Event(3.0, 2, 2), Event(4.0, 3, 1)], 6.0)
    prefixes, starts, kept = split_for_simulation([seq, EventSequence("b", (), [Event(1.0, 1, None)], 1.0)])
    assert len(prefixes) == 1 and len(prefixes[0].events) == 2 and starts == [3.0] and kept == [seq]
