"""Acceptance criteria; each test is tagged with the criterion it checks.

A PASS/FAIL/SKIP line per criterion is printed at the end of the run.
"""

import gc
import math
import os
import random
import time

import pytest

from conftest import TOY_CORPUS, make_binary_model, shaped_streams
from earlyrisk.classifier import LevelConfig, RunningVector, classify, classify_at_level, incremental_append, parse_blocks
from earlyrisk.evaluation import ErdeConfig, SubjectDecision, erde, evaluate, latency_cost, score_decisions
from earlyrisk.explain import build_explanation, intensities, render_html
from earlyrisk.model import Hyperparams, Model, global_values, naive_bayes_valuation, sanctions, significances
from earlyrisk.stream import EarlyPolicy, SubjectState, Status, feed, run_subject
from earlyrisk.tuning import SearchSpec, refine_sigma

VALUATION = "valuation goldens"
INCREMENTAL = "incremental equals batch"
MNB = "naive Bayes instance oracle"
ERDE = "ERDE unit suite"
LINEAR = "constant per-post cost"
POLICY = "early policy behavior"
TUNING = "tuning determinism"
EXPLAIN = "explanation properties"
ERISK = "eRisk 2017 reference (dataset-gated)"


# -- valuation ----------------------------------------------------------------


@pytest.mark.acceptance(VALUATION)
def test_valuation_goldens():
    from test_model import profile

    m = Model([profile("a", top=100, mid=25), profile("b", other=3)], Hyperparams(0.5))
    assert m.local_value("top", "a") == 1.0
    assert m.local_value("mid", "a") == pytest.approx(0.5, abs=1e-15)
    assert m.local_value("unseen", "a") == 0.0
    assert significances([0.3] * 5, 1.0) == [0.5 * math.tanh(-2.0) + 0.5] * 5
    assert sanctions([0.99, 0.0, 0.0], 1.0)[0] == 1.0
    assert sanctions([0.3, 1.0, 1.0], 1.0)[0] == 0.0
    assert sanctions([0.9, 0.5, 0.5], 1.0)[0] == 0.5
    for (lv, sg, sn), expected in [((0.92, 0.05, 1.0), 0.046), ((0.65, 0.99, 0.95), 0.611325), ((0.70, 0.85, 0.60), 0.357)]:
        assert global_values([lv], [sg], [sn])[0] == pytest.approx(expected, abs=1e-12)


# -- incremental classification ------------------------------------------------


@pytest.mark.acceptance(INCREMENTAL)
@pytest.mark.parametrize("op", ["addition", "maximum", "mean"])
def test_incremental_equals_batch_200_documents(op):
    rng = random.Random(2024)
    vocab = [f"w{i}" for i in range(300)] + ["the", "a", "of"]
    m = Model(["c0", "c1", "c2"], Hyperparams(0.455))
    for c in m.category_names:
        weights = [rng.random() ** 3 for _ in vocab]
        m.learn_document(" ".join(rng.choices(vocab, weights, k=3000)), c)
    m.update_global_values()
    cfg = LevelConfig.sentences(op)
    t0 = time.perf_counter()
    for _ in range(200):
        sents = [" ".join(rng.choices(vocab, k=rng.randint(1, 15))) + rng.choice(".!?") for _ in range(rng.randint(5, 50))]
        running = RunningVector.empty(op, 3)
        for s in sents:
            incremental_append(m, running, s, cfg)
        doc = " ".join(sents)
        batch = classify_at_level(m, parse_blocks(doc, cfg, m.tokenizer), cfg)
        assert running.value == batch
    assert time.perf_counter() - t0 < 10.0


# -- naive Bayes ----------------------------------------------------------------


@pytest.mark.acceptance(MNB)
def test_naive_bayes_instance():
    from test_model import MNB_TESTS, mnb_oracle

    m = Model(["finance", "pets"]).learn(TOY_CORPUS)
    m.valuation = naive_bayes_valuation(m)
    assert len(MNB_TESTS) == 8
    for text in MNB_TESTS:
        assert classify(m, text, LevelConfig.default("addition")).selected == [mnb_oracle(TOY_CORPUS, text)], text


# -- ERDE -----------------------------------------------------------------------


@pytest.mark.acceptance(ERDE)
def test_erde_unit_suite():
    from test_evaluation import SHEET, sheet_erde

    cfg = ErdeConfig(o=5)
    assert erde("n", "n", 7, cfg) == 0.0
    assert erde("p", "n", 7, cfg) == 0.129
    assert erde("p", "p", 7, cfg) == latency_cost(7, 5)
    assert erde("n", "p", 7, cfg) == 1.0
    for o in (5, 50):
        assert latency_cost(o, o) == 0.5
    decisions = [SubjectDecision(str(i), "positive" if d == "p" else "negative", k, "positive" if t == "p" else "negative") for i, (d, t, k) in enumerate(SHEET)]
    assert len(decisions) == 10
    rep = score_decisions(decisions, (5, 10, 50))
    for o in (5, 10, 50):
        assert abs(rep.erde[o] - sheet_erde(o)) <= 1e-9


# -- complexity -------------------------------------------------------------------


@pytest.mark.acceptance(LINEAR)
def test_per_post_cost_does_not_grow():
    model = make_binary_model()
    model.update_global_values()
    post = "n p common w. " * 20
    policy = EarlyPolicy.threshold()
    state = SubjectState.new("s", 2)
    times = []
    t_start = time.perf_counter()
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(1000):
            t0 = time.perf_counter()
            feed(state, model, post, policy)
            times.append(time.perf_counter() - t0)
    finally:
        if was_enabled:
            gc.enable()
    assert state.items_seen == 1000
    assert sum(times[900:]) / 100 <= 2 * sum(times[:100]) / 100
    assert time.perf_counter() - t_start < 30.0


# -- policies -----------------------------------------------------------------------


@pytest.mark.acceptance(POLICY)
def test_policy_behavior():
    m = make_binary_model()
    s = shaped_streams()
    threshold = EarlyPolicy.threshold()
    outcomes = {name: run_subject(m, s[name], threshold) for name in ("neg_dominant", "pos_dominant", "late_cross", "near_miss")}
    assert outcomes["neg_dominant"].decision is Status.NEGATIVE
    assert outcomes["pos_dominant"].decision is Status.POSITIVE
    late = outcomes["late_cross"]
    crossing = next(p.k for p in late.trajectory if p.acc[1] > p.acc[0])
    assert late.decision is Status.POSITIVE and late.k == crossing == 6
    assert outcomes["near_miss"].decision is Status.NEGATIVE
    # the slope rule catches the steep positive change at item 8
    delta = EarlyPolicy.delta(4.0, 0.0)
    run = run_subject(m, s["near_miss"], delta)
    assert run.decision is Status.POSITIVE and run.k == 8
    # a tiny but steep change fires without a floor and is suppressed with min_change=1
    assert run_subject(m, s["small_spike"], threshold).decision is Status.NEGATIVE
    spike = run_subject(m, s["small_spike"], delta)
    assert spike.decision is Status.POSITIVE and spike.k == 6
    assert run_subject(m, s["small_spike"], EarlyPolicy.delta(4.0, 1.0)).decision is Status.NEGATIVE
    assert run_subject(m, s["near_miss"], EarlyPolicy.delta(4.0, 1.0)).k == 8


# -- tuning ---------------------------------------------------------------------------


@pytest.mark.acceptance(TUNING)
def test_tuning_determinism():
    from test_tuning import synthetic_subjects
    from earlyrisk.tuning import CrossValidator, format_score_table, grid_search

    first = refine_sigma(lambda s: (s - 0.455) ** 2)
    assert abs(first[0] - 0.455) <= 0.001
    assert refine_sigma(lambda s: (s - 0.455) ** 2) == first
    spec = SearchSpec(folds=2, o=5, sigma_steps=(0.1, 0.01), rho_grid=(0.5, 1.0), seed=7)
    tables = [format_score_table(grid_search(CrossValidator(synthetic_subjects(), spec))).encode() for _ in range(2)]
    assert tables[0] == tables[1]


# -- explanations --------------------------------------------------------------------


@pytest.mark.acceptance(EXPLAIN)
def test_explanation_properties():
    from test_explain import bodies, random_writings

    m = make_binary_model()
    rng = random.Random(50)
    for _ in range(50):
        texts = random_writings(rng, rng.randint(1, 15))
        tree = build_explanation(m, texts, focus="positive")
        assert tree.cv == run_subject(m, texts, EarlyPolicy.threshold()).acc
        markup = render_html(tree)
        assert bodies(markup) == texts
        values = [n.cv[1] for n in tree.items]
        for c in (0.25, 3.0, 1000.0):
            assert intensities([v * c for v in values]) == pytest.approx(intensities(values), abs=1e-12)


# -- reference collection --------------------------------------------------------------


@pytest.mark.acceptance(ERISK)
def test_erisk_reference():
    train = os.environ.get("EARLYRISK_ERISK_TRAIN")
    test = os.environ.get("EARLYRISK_ERISK_TEST")
    if not (train and test):
        pytest.skip("set EARLYRISK_ERISK_TRAIN and EARLYRISK_ERISK_TEST to JSONL exports of the collection")
    from earlyrisk.data import load_dataset

    m = Model(["negative", "positive"], Hyperparams(0.455, 1.0, 1.0))
    for s in load_dataset(train):
        for t in s.items:
            m.learn_document(t, s.truth)
    rep = evaluate(m, EarlyPolicy.threshold(), load_dataset(test), mode="chunked", deadlines=(5, 50), jobs=os.cpu_count() or 1)
    assert abs(rep.erde[5] - 12.60) <= 1.5
    assert abs(rep.erde[50] - 8.12) <= 1.5
