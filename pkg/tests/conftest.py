from __future__ import annotations

import pytest

from lexbridge.corpus import write_jsonl
from lexbridge.embed import EmbeddingParams, build_training_stream, build_word_stream, train_skipgram
from lexbridge.fusion import HybridModels
from lexbridge.subword import corpus_from_entries, train_bpe
from lexbridge.synth import SynthParams, gen_lexicon


@pytest.fixture(scope="session")
def small_lexicon():
    """400 zero-noise synthetic pairs and their ground truth."""
    return gen_lexicon(SynthParams(n_pairs=400, seed=11))


@pytest.fixture(scope="session")
def tiny_models(small_lexicon):
    entries, truth = small_lexicon
    bpe = train_bpe(corpus_from_entries(entries), vocab_size=200, seed=1)
    w2v = train_skipgram(
        build_training_stream(entries, bpe), EmbeddingParams("wordpiece", dim=16, epochs=2, min_count=1), seed=3
    )
    ft = train_skipgram(
        build_word_stream(entries), EmbeddingParams("char-ngram", dim=16, epochs=2, min_count=1), seed=3
    )
    return HybridModels(truth.rules, ft, w2v, bpe)


@pytest.fixture
def lexicon_file(tmp_path, small_lexicon):
    entries, truth = small_lexicon
    path = tmp_path / "lex.jsonl"
    write_jsonl(path, entries)
    truth.save(tmp_path / "truth.json")
    return path


# ---------------------------------------------------------------------------
# Acceptance summary: one PASS/FAIL line per criterion
# ---------------------------------------------------------------------------

_CRITERIA: dict[str, tuple[int, str]] = {}
_OUTCOMES: dict[str, tuple[bool, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _CRITERIA[item.nodeid] = (mark.args[0], mark.args[1])


def pytest_runtest_logreport(report):
    if report.nodeid not in _CRITERIA:
        return
    if report.when == "call" or report.failed or report.skipped:
        detail = dict(report.user_properties).get("detail", "")
        if report.failed:
            detail = (detail + "; " if detail else "") + str(report.longrepr).strip().splitlines()[-1][:200]
        ok = report.passed and report.when == "call"
        if report.nodeid not in _OUTCOMES or not ok:
            _OUTCOMES[report.nodeid] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (number, title) in sorted(_CRITERIA.items(), key=lambda kv: kv[1][0]):
        if nodeid in _OUTCOMES:
            ok, detail = _OUTCOMES[nodeid]
            terminalreporter.write_line(f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
