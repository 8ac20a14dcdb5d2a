import time

import pytest

from conftest import crossing_at_66, make_binary_model, shaped_streams, words
from earlyrisk.classifier import LevelConfig, text_vector
from earlyrisk.stream import (
    EarlyPolicy,
    Status,
    SubjectState,
    feed,
    finalize,
    run_subject,
    slope_ratio,
    write_trajectory_csv,
)

THRESHOLD = EarlyPolicy.threshold()
DELTA = EarlyPolicy.delta(4.0, 0.0)


def test_threshold_fires_on_accumulated_values():
    assert THRESHOLD.fires((2.0, 2.5), (0.0, 0.0)) == "threshold"
    assert THRESHOLD.fires((2.5, 2.5), (0.0, 0.0)) is None


def test_slope_ratio_rules():
    p = EarlyPolicy.slope_ratio(4.0, 0.0)
    assert p.fires((10.0, 0.0), (0.5, 2.5)) == "slope_ratio"
    assert p.fires((10.0, 0.0), (0.5, 2.0)) is None  # ratio exactly 4 is not enough
    assert p.fires((10.0, 0.0), (0.0, 0.3)) == "slope_ratio"
    assert p.fires((10.0, 0.0), (0.0, 0.0)) is None
    floored = EarlyPolicy.slope_ratio(4.0, 1.0)
    assert floored.fires((10.0, 0.0), (0.01, 0.05)) is None
    assert floored.fires((10.0, 0.0), (0.2, 1.5)) == "slope_ratio"
    assert slope_ratio((0.5, 2.5)) == 5.0
    assert slope_ratio((0.0, 1.0)) == float("inf")


def test_policy_validation():
    with pytest.raises(ValueError):
        EarlyPolicy.slope_ratio(0.0)
    with pytest.raises(ValueError):
        EarlyPolicy.slope_ratio(4.0, -1.0)
    with pytest.raises(ValueError):
        EarlyPolicy("bogus")


def test_feed_accumulates_and_decides(binary_model):
    state = SubjectState.new("s", 2, keep_history=True)
    feed(state, binary_model, words(2, 1), THRESHOLD)
    assert state.status is Status.PENDING and state.items_seen == 1
    _, decision = feed(state, binary_model, words(0, 3), THRESHOLD)
    assert decision is Status.POSITIVE and state.decided_at == 2
    acc_after = state.acc
    feed(state, binary_model, words(9, 0), THRESHOLD)
    assert state.status is Status.POSITIVE and state.decided_at == 2
    assert state.items_seen == 3
    assert state.acc != acc_after
    total = (0.0, 0.0)
    for d in state.history:
        total = tuple(a + b for a, b in zip(total, d))
    assert total == state.acc


def test_feed_chunk_counts_writings(binary_model):
    state = SubjectState.new("s", 2)
    feed(state, binary_model, [words(1, 0), words(0, 3), "zzz"], THRESHOLD)
    assert state.items_seen == 3 and state.steps == 1
    assert state.decided_at == 3


def test_finalize():
    s = SubjectState.new("s", 2)
    assert finalize(s) is Status.NEGATIVE and s.decided_at == 0
    s = SubjectState.new("s", 2)
    s.status, s.decided_at = Status.POSITIVE, 4
    assert finalize(s) is Status.POSITIVE and s.decided_at == 4


def test_empty_subject_is_negative_at_zero(binary_model):
    run = run_subject(binary_model, [], THRESHOLD)
    assert run.decision is Status.NEGATIVE and run.k == 0 and run.trajectory == []


def test_near_miss_is_negative_under_threshold(binary_model):
    run = run_subject(binary_model, shaped_streams()["near_miss"], THRESHOLD)
    assert run.decision is Status.NEGATIVE and run.k == 10
    assert all(p.acc[1] < p.acc[0] for p in run.trajectory)


def test_threshold_fires_at_first_crossing(binary_model):
    for items in shaped_streams().values():
        run = run_subject(binary_model, items, THRESHOLD)
        crossing = next((p.k for p in run.trajectory if p.acc[1] > p.acc[0]), None)
        if crossing is None:
            assert run.decision is Status.NEGATIVE
        else:
            assert run.decision is Status.POSITIVE and run.k == crossing


def test_trajectory_matches_one_shot_classification(binary_model):
    cfg = LevelConfig.default()
    items = shaped_streams()["late_cross"]
    run = run_subject(binary_model, items, THRESHOLD, cfg)
    whole = text_vector(binary_model, "\n\n".join(items), cfg)
    assert run.trajectory[-1].acc == pytest.approx(whole, rel=1e-12)
    prefix = (0.0, 0.0)
    for item, point in zip(items, run.trajectory):
        prefix = tuple(a + b for a, b in zip(prefix, text_vector(binary_model, item, cfg)))
        assert point.acc == prefix


def test_delta_never_later_than_threshold(binary_model):
    for items in shaped_streams().values():
        a = run_subject(binary_model, items, THRESHOLD)
        b = run_subject(binary_model, items, DELTA)
        if a.decision is Status.POSITIVE:
            assert b.decision is Status.POSITIVE and b.k <= a.k


def test_slope_policy_can_fire_while_behind(binary_model):
    run = run_subject(binary_model, shaped_streams()["near_miss"], DELTA)
    assert run.decision is Status.POSITIVE and run.k == 8
    fired = run.trajectory[7]
    assert fired.fired == "slope_ratio"
    assert fired.acc[1] < fired.acc[0]


def test_stop_on_decision_keeps_outcome(binary_model):
    for items in shaped_streams().values():
        a = run_subject(binary_model, items, DELTA)
        b = run_subject(binary_model, items, DELTA, stop_on_decision=True)
        assert (a.decision, a.k) == (b.decision, b.k)


def test_crossing_at_66(binary_model):
    run = run_subject(binary_model, crossing_at_66(), THRESHOLD)
    assert run.decision is Status.POSITIVE and run.k == 66


def test_trajectory_csv(tmp_path, binary_model):
    run = run_subject(binary_model, shaped_streams()["near_miss"], DELTA)
    path = tmp_path / "t.csv"
    write_trajectory_csv(run, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "item_index,k,acc_neg,acc_pos,delta_neg,delta_pos,fired_policy"
    assert len(lines) == 11
    assert lines[8].endswith(",slope_ratio")
    assert sum(1 for l in lines[1:] if not l.endswith(",")) == 1


def test_feed_cost_is_constant():
    model = make_binary_model()
    model.update_global_values()
    post = "n p common. " * 10
    state = SubjectState.new("s", 2)
    times = []
    for _ in range(1000):
        t0 = time.perf_counter()
        feed(state, model, post, THRESHOLD)
        times.append(time.perf_counter() - t0)
    early = sum(times[:100]) / 100
    late = sum(times[900:]) / 100
    assert late <= 2 * early
