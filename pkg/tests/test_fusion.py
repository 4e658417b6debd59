from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexbridge.embed import EmbeddingModel, EmbeddingParams, WordVectorTable
from lexbridge.fusion import (
    ComponentScorer,
    FusionWeights,
    HybridModels,
    HybridScorer,
    SingleComponentScorer,
    TuningData,
    collect_tuning_data,
    component_scores,
    fuse,
    mrr_for_weights,
    simplex_grid,
    tune_weights,
)
from lexbridge.retrieval import Universe, persian_romanizer, pool_rows, build_pool, sample_distractors, tajik_romanizer
from lexbridge.strmetrics import norm_sim


def random_model(kind, units, seed):
    rng = np.random.default_rng(seed)
    return EmbeddingModel(EmbeddingParams(kind, dim=8), list(units), rng.normal(size=(len(units), 8)).astype(np.float32))


def test_weights_normalize_and_validate(tmp_path):
    w = FusionWeights(2, 1, 1, 0)
    assert w.as_array().tolist() == [0.5, 0.25, 0.25, 0.0]
    assert FusionWeights().to_dict() == {"alpha": 0.4, "beta": 0.3, "gamma": 0.2, "delta": 0.1}
    with pytest.raises(ValueError):
        FusionWeights(-1, 1, 1, 1)
    with pytest.raises(ValueError):
        FusionWeights(0, 0, 0, 0)
    w.save(tmp_path / "w.json", {"grid_step": 0.05})
    assert FusionWeights.load(tmp_path / "w.json") == w


def test_fuse_examples():
    scores = (0.3, 0.7, 0.2, 0.9)
    assert fuse(FusionWeights(1, 0, 0, 0), scores) == 0.3
    assert fuse(FusionWeights(0.4, 0.3, 0.2, 0.1), (1, 1, 1, 1)) == pytest.approx(1.0)
    assert fuse(FusionWeights(0.25, 0.25, 0.25, 0.25), (1, 0, 0, 0)) == 0.25


def test_component_scores(small_lexicon, tiny_models):
    entries, truth = small_lexicon
    q, gold = entries[0].tajik, entries[0].persian
    s_ft, s_w2v, s_edit, s_rule = component_scores(q, gold, tiny_models)
    assert s_rule == 1.0
    assert s_edit == norm_sim(tajik_romanizer(q), persian_romanizer(gold))
    assert all(0.0 <= s <= 1.0 for s in (s_ft, s_w2v))
    bare = HybridModels(truth.rules)
    assert component_scores(q, gold, bare)[:2] == (0.5, 0.5)
    assert component_scores(gold, gold, bare, "persian")[2:] == (1.0, 1.0)


def test_hybrid_scorer_matches_component_scores(small_lexicon, tiny_models):
    entries, _ = small_lexicon
    uni = Universe(e.persian for e in entries)
    pool = build_pool(entries[3].persian, uni, 20, 42, 3)
    rows = pool_rows(uni, pool)
    mat = ComponentScorer(tiny_models).matrix(entries[3].tajik, uni, rows)
    expected = np.array([component_scores(entries[3].tajik, c, tiny_models) for c in pool.candidates])
    assert np.allclose(mat, expected, atol=1e-6)
    w = FusionWeights()
    hybrid = HybridScorer(tiny_models, w).scores(entries[3].tajik, uni, rows)
    assert np.allclose(hybrid, expected @ w.as_array(), atol=1e-6)
    single = SingleComponentScorer(tiny_models, "rule").scores(entries[3].tajik, uni, rows)
    assert np.array_equal(single, mat[:, 3])


def test_table_backed_scorer_matches_model(small_lexicon, tiny_models):
    entries, _ = small_lexicon
    uni = Universe(e.persian for e in entries)
    table = WordVectorTable.from_model(tiny_models.ft, list(uni.forms) + [e.tajik for e in entries])
    with_table = HybridModels(tiny_models.rules, None, tiny_models.w2v, tiny_models.bpe, table)
    rows = np.arange(30)
    a = ComponentScorer(tiny_models).matrix(entries[0].tajik, uni, rows)
    b = ComponentScorer(with_table).matrix(entries[0].tajik, uni, rows)
    assert np.allclose(a, b, atol=1e-6)


def test_simplex_grid():
    grid = simplex_grid(0.05)
    assert grid.shape == (1771, 4)
    assert np.allclose(grid.sum(axis=1), 1.0)
    assert all(any((grid == corner).all(axis=1)) for corner in np.eye(4))
    assert [tuple(x) for x in grid] == sorted(tuple(x) for x in grid)
    assert simplex_grid(1.0).tolist() == [[0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0], [1, 0, 0, 0]]
    with pytest.raises(ValueError):
        simplex_grid(0.3)


def test_rule_only_signal_tunes_to_rule_corner(small_lexicon):
    entries, truth = small_lexicon
    uni = Universe(e.persian for e in entries)
    units = sorted({c for e in entries for c in e.persian + e.tajik})
    ft = random_model("char-ngram", [f"<{u}>" for u in units], 1)
    models = HybridModels(truth.rules, ft, None, None)
    dev = entries[:60]
    rows = [np.concatenate([[uni.index[e.persian]], sample_distractors(uni, e.persian, 50, 42, i)]) for i, e in enumerate(dev)]
    data = collect_tuning_data(ComponentScorer(models), [e.tajik for e in dev], uni, rows)
    result = tune_weights(data, 0.05)
    assert result.weights.as_array().tolist() == [0, 0, 0, 1]
    assert result.mrr == 1.0
    assert result.mrr >= max(result.corner_mrr.values())
    corners = tune_weights(data, 1.0)
    assert corners.grid.shape == (4, 4) and corners.weights.delta == 1.0


def random_tuning_data(seed, q=12, n=9):
    rng = np.random.default_rng(seed)
    mats = rng.random((q, n, 4))
    mats[rng.random((q, n, 4)) < 0.3] = 0.5  # plenty of ties
    lex = np.stack([rng.permutation(n) for _ in range(q)])
    return TuningData(mats, lex)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_tuned_mrr_dominates_every_corner(seed):
    result = tune_weights(random_tuning_data(seed), 0.1)
    assert result.mrr >= max(result.corner_mrr.values())
    assert result.mrr == result.grid_mrr.max()
    assert int(np.argmax(result.grid_mrr)) == int(np.flatnonzero(result.grid_mrr == result.mrr)[0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100))
def test_argmax_invariance_under_positive_scaling(seed, c):
    data = random_tuning_data(seed)
    grid = simplex_grid(0.25)
    scaled = TuningData(data.matrices * c, data.lex)
    assert np.allclose(mrr_for_weights(data, grid), mrr_for_weights(scaled, grid))
    w = FusionWeights(0.1, 0.2, 0.3, 0.4).as_array()
    for m in data.matrices:
        order = np.lexsort((np.arange(len(m)), -(m @ w)))
        order_scaled = np.lexsort((np.arange(len(m)), -((m * c) @ w)))
        assert (order == order_scaled).all()


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(0, 1), min_size=4, max_size=4),
    st.lists(st.floats(0, 1), min_size=4, max_size=4).filter(lambda w: sum(w) > 0),
    st.integers(0, 3),
    st.floats(0, 1),
)
def test_fuse_is_bounded_and_monotone(scores, weights, coord, bump):
    w = FusionWeights(*weights)
    base = fuse(w, scores)
    assert -1e-12 <= base <= 1 + 1e-12
    higher = list(scores)
    higher[coord] = max(higher[coord], bump)
    assert fuse(w, higher) >= base - 1e-12
