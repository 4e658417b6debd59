from __future__ import annotations

import os
import random
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexbridge.corpus import LexiconEntry
from lexbridge.evalharness import (
    EditOp,
    EvalError,
    EvalReport,
    OcrSample,
    apply_ops,
    bootstrap_ci,
    build_report,
    corrupt,
    corrupt_many,
    emit_efficiency,
    emit_report,
    evaluate,
    evaluate_ranks,
    evaluate_ranks_parallel,
    metrics_from_ranks,
    ocr_eval,
    pos_breakdown,
    rank_metrics,
    subsample,
    translit_eval,
)
from lexbridge.retrieval import (
    CandidatePool,
    EditScorer,
    RandomScorer,
    RankedList,
    RuleScorer,
    Universe,
    build_pool,
    rank_with,
)

STAMP = "test"


def test_rank_metrics_examples():
    lists = [RankedList(0, (("a", 1.0), ("b", 0.5)), "x")]
    acc, mrr, _ = rank_metrics(lists, ["a"])
    assert acc == {1: 1.0, 5: 1.0, 10: 1.0} and mrr == 1.0
    four = [RankedList(0, tuple((c, 1.0 - i / 10) for i, c in enumerate("wxyzv")), "x")]
    acc, mrr, rr = rank_metrics(four, ["z"])
    assert acc[1] == 0.0 and acc[5] == 1.0 and mrr == 0.25
    acc, mrr, rr = rank_metrics(four, ["missing"])
    assert rr == [0.0] and mrr == 0.0


def test_rank_metrics_recount_oracle():
    rng = random.Random(1)
    lists, golds = [], []
    for q in range(200):
        cands = [f"c{i}" for i in range(rng.randint(1, 30))]
        rng.shuffle(cands)
        lists.append(RankedList(q, tuple((c, -i) for i, c in enumerate(cands)), "x"))
        golds.append(rng.choice(cands + ["absent"]))
    acc, mrr, _ = rank_metrics(lists, golds)
    positions = []
    for rl, g in zip(lists, golds):
        pos = None
        for i, (c, _) in enumerate(rl.items):
            if c == g:
                pos = i + 1
        positions.append(pos)
    for k in (1, 5, 10):
        assert acc[k] == sum(1 for p in positions if p is not None and p <= k) / 200
    assert mrr == pytest.approx(sum(1 / p for p in positions if p) / 200, abs=1e-15)


def test_rank_metrics_errors():
    pool = CandidatePool(0, "a", ("b",), 0)
    with pytest.raises(EvalError):
        rank_metrics([RankedList(0, (("a", 1.0),), "x")], ["a"], pools=[pool])
    with pytest.raises(EvalError):
        rank_metrics([], ["a"])
    with pytest.raises(EvalError):
        metrics_from_ranks([])


def test_bootstrap_examples():
    assert bootstrap_ci([1.0] * 50) == (1.0, 1.0)
    assert bootstrap_ci([0.0] * 50) == (0.0, 0.0)
    with pytest.raises(EvalError):
        bootstrap_ci([])
    assert bootstrap_ci([0.1, 0.9, 0.5], seed=3) == bootstrap_ci([0.1, 0.9, 0.5], seed=3)


def test_bootstrap_bernoulli_interval():
    rng = np.random.default_rng(42)
    values = np.zeros(4011)
    values[rng.choice(4011, size=round(0.987 * 4011), replace=False)] = 1.0
    lo, hi = bootstrap_ci(values, seed=42)
    assert abs(lo - 0.984) <= 0.002 and abs(hi - 0.990) <= 0.002


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=40), st.integers(0, 2**32))
def test_bootstrap_interval_contains_mean(values, seed):
    lo, hi = bootstrap_ci(values, 1000, seed=seed)
    mean = float(np.mean(values))
    assert lo - 1e-12 <= mean <= hi + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.one_of(st.none(), st.integers(1, 30)), min_size=1, max_size=50))
def test_report_invariants(ranks):
    r = build_report("m", ranks, 30, iterations=50)
    assert 0 <= r.acc[1] <= r.acc[5] <= r.acc[10] <= 1
    assert r.acc[1] <= r.mrr <= 1


def test_report_rejects_non_monotone():
    with pytest.raises(EvalError):
        EvalReport("m", 1, 1, {1: 0.5, 5: 0.4, 10: 0.6}, 0.5, {})
    with pytest.raises(EvalError):
        EvalReport("m", 1, 1, {1: 0.5, 5: 0.5, 10: 0.6}, 0.4, {})


def test_emit_report_formats(tmp_path):
    reports = [build_report(m, [1, 2, None, 4], 10, iterations=20) for m in ("a", "b", "c", "d", "e")]
    one = emit_report(reports[:1], "csv", stamp=STAMP)
    assert len(one.strip().splitlines()) == 2
    assert "0.750" in one and "eval_s" not in one
    md = emit_report(reports, "markdown", stamp=STAMP)
    lines = md.strip().splitlines()
    assert len(lines) == 7 and lines[0].startswith("| method |") and lines[1].startswith("|---")
    assert emit_report(reports, "json", stamp=STAMP).lstrip().startswith("[")
    emit_report(reports, "csv", tmp_path / "a.csv", STAMP)
    emit_report([build_report(m, [1, 2, None, 4], 10, iterations=20) for m in "abcde"], "csv", tmp_path / "b.csv", STAMP)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert "peak_mb" in emit_efficiency(reports, stamp=STAMP)
    with pytest.raises(EvalError):
        emit_report(reports, "xml", stamp=STAMP)
    with pytest.raises(EvalError):
        emit_report([], "csv")


def test_corrupt_basics():
    words = ["کتاب", "دریا", "آب"]
    for i, w in enumerate(words):
        s = corrupt(w, p_word=0.0, alphabet="ابت", seed=i)
        assert s.corrupted == w and not s.ops and not s.selected
    seed = next(s for s in range(1000) if corrupt("ب", 1.0, 1.0, "ابت", s).ops[0].kind == "del")
    s = corrupt("ب", 1.0, 1.0, "ابت", seed)
    assert s.corrupted == "" and s.ops == (EditOp("del", 0),)
    with pytest.raises(EvalError):
        corrupt("")


def test_empty_corrupted_query_is_valid():
    uni = Universe(["ب", "ا", "ت"])
    pool = CandidatePool(0, "ب", ("ا", "ت"), 0)
    rl = rank_with(EditScorer("persian"), "", pool, uni)
    assert sorted(rl.candidates) == sorted(pool.candidates)


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="ابپتث", min_size=1, max_size=12), st.integers(0, 2**40), st.floats(0, 1), st.floats(0, 1))
def test_corruption_replay(word, seed, p_word, p_char):
    s = corrupt(word, p_word, p_char, "ابپتثج", seed)
    assert corrupt(word, p_word, p_char, "ابپتثج", seed) == s
    assert apply_ops(word, s.ops) == s.corrupted
    assert OcrSample.from_json(s.to_json()) == s
    for op in s.ops:
        if op.kind == "sub":
            assert op.char != word[op.position]


def test_corruption_counters():
    words = ["".join(random.Random(i).choice("ابپتثجچ") for _ in range(6)) for i in range(20_000)]
    _, stats = corrupt_many(words, seed=7)
    assert abs(stats.selected_rate - 0.30) < 0.015
    assert abs(stats.char_edit_rate - 0.20) < 0.01
    assert stats.effective_rate < stats.selected_rate


def test_evaluate_ranks_match_sorted_lists(small_lexicon):
    entries, truth = small_lexicon
    uni = Universe(e.persian for e in entries)
    scorers = [EditScorer(), RuleScorer(truth.rules), RandomScorer(5)]
    queries, golds = [e.tajik for e in entries[:30]], [e.persian for e in entries[:30]]
    for scorer in scorers:
        ranks = evaluate_ranks(scorer, queries, golds, uni, 50, seed=42)
        expected = [
            rank_with(scorer, q, build_pool(g, uni, 50, 42, i), uni).rank_of(g)
            for i, (q, g) in enumerate(zip(queries, golds))
        ]
        assert ranks == expected


def test_parallel_evaluation_matches_serial(small_lexicon):
    entries, truth = small_lexicon
    uni = Universe(e.persian for e in entries)
    queries, golds = [e.tajik for e in entries[:40]], [e.persian for e in entries[:40]]
    serial = evaluate_ranks(EditScorer(), queries, golds, uni, 60)
    assert evaluate_ranks_parallel(EditScorer(), queries, golds, uni, 60, jobs=3) == serial


def test_rule_oracle_and_random_baseline(small_lexicon):
    entries, truth = small_lexicon
    uni = Universe(e.persian for e in entries)
    queries, golds = [e.tajik for e in entries], [e.persian for e in entries]
    report, _ = evaluate(RuleScorer(truth.rules), queries, golds, uni, 100, iterations=50)
    assert report.acc[1] == 1.0 and report.mrr == 1.0
    rnd, _ = evaluate(RandomScorer(42), queries, golds, uni, 100, iterations=50)
    assert rnd.acc[1] < 0.05


def test_ocr_eval(small_lexicon):
    entries, _ = small_lexicon
    uni = Universe(e.persian for e in entries)
    words = [e.persian for e in entries[:50]]
    clean, _ = corrupt_many(words, p_word=0.0)
    report, _ = ocr_eval(EditScorer("persian"), clean, uni, 100, iterations=50)
    assert report.acc[1] == 1.0 and report.task == "ocr"
    noisy, _ = corrupt_many(words, p_word=1.0, p_char=0.5)
    single, _ = ocr_eval(EditScorer("persian"), noisy, uni, 0, iterations=50)
    assert single.acc[1] == 1.0
    with pytest.raises(EvalError):
        ocr_eval(EditScorer("tajik"), clean, uni, 10)


def test_pos_breakdown_and_translit_eval(small_lexicon):
    entries, truth = small_lexicon
    rows = pos_breakdown(entries[:4], [1, 2, None, 1])
    assert sum(n for _, n, _, _ in rows) == 4
    scores = translit_eval(truth.rules, entries[:50])
    assert scores.exact == 1.0 and scores.cer == 0.0 and scores.chrf == 1.0
    wrong = translit_eval(truth.rules, [LexiconEntry(entries[0].tajik, "ببببب")])
    assert wrong.exact == 0.0 and wrong.cer > 0


def test_subsample_keeps_order_and_is_seeded():
    words = [f"w{i}" for i in range(100)]
    a = subsample(words, 10, seed=1)
    assert len(a) == 10 and a == sorted(a, key=words.index)
    assert a == subsample(words, 10, seed=1) and a != subsample(words, 10, seed=2)
    assert subsample(words, 0) == words and subsample(words, 500) == words


@pytest.mark.skipif(not os.path.exists("/proc/self/status"), reason="needs /proc")
def test_peak_memory_of_a_child_ignores_the_parent():
    ballast = np.ones(300 * 2**20 // 8)  # 300 MB resident in this process
    code = "from lexbridge.evalharness import peak_rss_mb; print(peak_rss_mb())"
    child = float(subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout)
    assert ballast.sum() > 0 and child < 150
