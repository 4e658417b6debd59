"""Retrieval metrics, bootstrap intervals, OCR corruption, and report files."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import multiprocessing
import random
import resource
import sys
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .corpus import LexiconEntry, derive_seed
from .retrieval import CandidatePool, RankedList, Scorer, Universe, gold_rank, sample_distractors
from .strmetrics import cer, chrf, chrf_corpus
from .translit import GraphemeRuleSet

log = logging.getLogger(__name__)

KS = (1, 5, 10)
REGIMES = {"primary": 1000, "stress": 3000}


class EvalError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def metrics_from_ranks(ranks: Sequence[int | None], ks: Sequence[int] = KS) -> tuple[dict[int, float], float, list[float]]:
    """Acc@k, MRR and reciprocal ranks from 1-based gold ranks (None = absent)."""
    if not ranks:
        raise EvalError("no queries to score")
    rr = [0.0 if r is None else 1.0 / r for r in ranks]
    acc = {k: sum(1 for r in ranks if r is not None and r <= k) / len(ranks) for k in ks}
    return acc, sum(rr) / len(rr), rr


def rank_metrics(
    ranked_lists: Sequence[RankedList],
    golds: Sequence[str],
    ks: Sequence[int] = KS,
    pools: Sequence[CandidatePool] | None = None,
) -> tuple[dict[int, float], float, list[float]]:
    if len(ranked_lists) != len(golds):
        raise EvalError("need exactly one ranked list per gold")
    if pools is not None:
        for rl, pool in zip(ranked_lists, pools):
            cands = rl.candidates
            if len(cands) != len(pool) or set(cands) != set(pool.candidates):
                raise EvalError(f"ranked list {rl.query_id} does not contain exactly its pool")
    return metrics_from_ranks([rl.rank_of(g) for rl, g in zip(ranked_lists, golds)], ks)


def bootstrap_ci(
    values: Sequence[float], iterations: int = 1000, alpha: float = 0.05, seed: int = 42, chunk: int = 25
) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise EvalError("cannot bootstrap an empty sample")
    if iterations < 1:
        raise EvalError("iterations must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    means = np.empty(iterations)
    for start in range(0, iterations, chunk):
        m = min(chunk, iterations - start)
        means[start : start + m] = x[rng.integers(0, x.size, size=(m, x.size))].mean(axis=1)
    lo, hi = np.percentile(means, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return float(lo), float(hi)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class EvalReport:
    method: str
    n_queries: int
    pool_size: int
    acc: dict[int, float]
    mrr: float
    ci: dict[str, tuple[float, float]]
    seconds: float = 0.0
    peak_mb: float = 0.0
    seed: int = 42
    regime: str = "primary"
    task: str = "retrieval"
    extra: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        a1, a5, a10 = (self.acc.get(k, 0.0) for k in KS)
        if not (0.0 <= a1 <= a5 <= a10 <= 1.0):
            raise EvalError(f"Acc@k not monotone: {self.acc}")
        if not (a1 <= self.mrr + 1e-12 and self.mrr <= 1.0):
            raise EvalError("MRR must lie in [Acc@1, 1]")


def build_report(
    method: str,
    ranks: Sequence[int | None],
    pool_size: int,
    seed: int = 42,
    regime: str = "primary",
    task: str = "retrieval",
    iterations: int = 1000,
    seconds: float = 0.0,
    peak_mb: float = 0.0,
) -> EvalReport:
    acc, mrr, rr = metrics_from_ranks(ranks)
    ci = {}
    for k in KS:
        hits = [1.0 if r is not None and r <= k else 0.0 for r in ranks]
        ci[f"acc{k}"] = bootstrap_ci(hits, iterations, seed=derive_seed(seed, method, f"acc{k}"))
    ci["mrr"] = bootstrap_ci(rr, iterations, seed=derive_seed(seed, method, "mrr"))
    return EvalReport(method, len(ranks), pool_size, acc, mrr, ci, seconds, peak_mb, seed, regime, task)


def peak_rss_mb() -> float:
    """Peak resident memory of this process image in MB.

    Prefers ``VmHWM`` from /proc: Linux carries ``ru_maxrss`` over an exec,
    so a child started from a large parent would report the parent's peak.
    """
    try:
        with open("/proc/self/status", encoding="ascii") as fh:
            for line in fh:
                if line.startswith("VmHWM:"):
                    return int(line.split()[1]) / 1024
    except OSError:
        pass
    peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    return peak / (1024 * 1024) if sys.platform == "darwin" else peak / 1024


def source_stamp() -> str:
    """Version plus a short hash of the package sources."""
    h = hashlib.sha1()
    root = Path(__file__).parent
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.suffix in (".py", ".tsv"):
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    return f"{__version__}+{h.hexdigest()[:10]}"


REPORT_COLUMNS = (
    "method", "task", "regime", "n", "pool", "acc1", "acc5", "acc10", "mrr",
    "acc1_lo", "acc1_hi", "mrr_lo", "mrr_hi", "seed", "version",
)  # fmt: skip
EFFICIENCY_COLUMNS = ("method", "task", "n", "pool", "eval_s", "peak_mb", "version")


def _row(r: EvalReport, stamp: str) -> dict[str, str]:
    f = "{:.3f}".format
    return {
        "method": r.method,
        "task": r.task,
        "regime": r.regime,
        "n": str(r.n_queries),
        "pool": str(r.pool_size),
        "acc1": f(r.acc[1]),
        "acc5": f(r.acc[5]),
        "acc10": f(r.acc[10]),
        "mrr": f(r.mrr),
        "acc1_lo": f(r.ci["acc1"][0]),
        "acc1_hi": f(r.ci["acc1"][1]),
        "mrr_lo": f(r.ci["mrr"][0]),
        "mrr_hi": f(r.ci["mrr"][1]),
        "seed": str(r.seed),
        "version": stamp,
        "eval_s": f"{r.seconds:.1f}",
        "peak_mb": f"{r.peak_mb:.1f}",
    }


def _typed(value: str) -> int | float | str:
    for kind in (int, float):
        try:
            return kind(value)
        except ValueError:
            pass
    return value


def _render(rows: list[dict[str, str]], columns: Sequence[str], fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([row[c] for c in columns])
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(columns) + " |", "|" + "|".join("---" for _ in columns) + "|"]
        lines += ["| " + " | ".join(row[c] for c in columns) + " |" for row in rows]
        return "\n".join(lines) + "\n"
    if fmt == "json":
        return json.dumps([{c: _typed(row[c]) for c in columns} for row in rows], indent=1, ensure_ascii=False) + "\n"
    raise EvalError(f"unknown report format {fmt!r}; expected csv, markdown or json")


def emit_report(reports: Sequence[EvalReport], fmt: str = "csv", path: str | Path | None = None, stamp: str | None = None) -> str:
    """Metric table without timings, so identical runs give identical files.
    Timings go through :func:`emit_efficiency`."""
    if not reports:
        raise EvalError("no reports to emit")
    stamp = stamp or source_stamp()
    text = _render([_row(r, stamp) for r in reports], REPORT_COLUMNS, fmt)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def emit_efficiency(reports: Sequence[EvalReport], fmt: str = "csv", path: str | Path | None = None, stamp: str | None = None) -> str:
    if not reports:
        raise EvalError("no reports to emit")
    stamp = stamp or source_stamp()
    text = _render([_row(r, stamp) for r in reports], EFFICIENCY_COLUMNS, fmt)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


# ---------------------------------------------------------------------------
# Retrieval evaluation
# ---------------------------------------------------------------------------


def evaluate_ranks(
    scorer: Scorer,
    queries: Sequence[str],
    golds: Sequence[str],
    universe: Universe,
    pool_size: int,
    seed: int = 42,
    start: int = 0,
) -> list[int]:
    """Gold rank of every query in its per-query pool, without sorting.
    Query ``i`` uses pool seed ``(seed, start + i)``."""
    if len(queries) != len(golds):
        raise EvalError("queries and golds differ in length")
    ranks = []
    for i, (q, g) in enumerate(zip(queries, golds), start):
        rows = np.concatenate([[universe.index[g]], sample_distractors(universe, g, pool_size, seed, i)])
        scores = scorer.scores(q, universe, rows, i)
        ranks.append(gold_rank(scores, universe.lex_rank[rows]))
    return ranks


_SHARED: dict = {}


def _rank_chunk(bounds: tuple[int, int]) -> list[int]:
    lo, hi = bounds
    s = _SHARED
    return evaluate_ranks(s["scorer"], s["queries"][lo:hi], s["golds"][lo:hi], s["universe"], s["pool"], s["seed"], lo)


def evaluate_ranks_parallel(
    scorer: Scorer,
    queries: Sequence[str],
    golds: Sequence[str],
    universe: Universe,
    pool_size: int,
    seed: int = 42,
    jobs: int = 1,
) -> list[int]:
    """:func:`evaluate_ranks` fanned out over forked workers. Pools depend only
    on (seed, query index), so the ranks equal the single-process ones."""
    if jobs <= 1 or len(queries) < 2:
        return evaluate_ranks(scorer, queries, golds, universe, pool_size, seed)
    log.warning("evaluating with %d workers; wall-clock timings are not comparable to single-threaded runs", jobs)
    _SHARED.update(scorer=scorer, queries=list(queries), golds=list(golds), universe=universe, pool=pool_size, seed=seed)
    step = -(-len(queries) // jobs)
    bounds = [(lo, min(lo + step, len(queries))) for lo in range(0, len(queries), step)]
    try:
        with multiprocessing.get_context("fork").Pool(jobs) as pool:
            parts = pool.map(_rank_chunk, bounds)
    finally:
        _SHARED.clear()
    return [r for part in parts for r in part]


def evaluate(
    scorer: Scorer,
    queries: Sequence[str],
    golds: Sequence[str],
    universe: Universe,
    pool_size: int = 1000,
    seed: int = 42,
    regime: str = "primary",
    task: str = "retrieval",
    iterations: int = 1000,
    method: str | None = None,
    jobs: int = 1,
) -> tuple[EvalReport, list[int]]:
    start = time.perf_counter()
    ranks = evaluate_ranks_parallel(scorer, queries, golds, universe, pool_size, seed, jobs)
    seconds = time.perf_counter() - start
    report = build_report(method or scorer.name, ranks, pool_size, seed, regime, task, iterations, seconds)
    report.peak_mb = peak_rss_mb()  # after the bootstrap, which also counts
    return report, ranks


def pos_breakdown(entries: Sequence[LexiconEntry], ranks: Sequence[int | None]) -> list[tuple[str, int, float, float]]:
    """(label, n, Acc@1, MRR) per part of speech, most frequent first."""
    groups: dict[str, list[int | None]] = defaultdict(list)
    for e, r in zip(entries, ranks):
        groups[e.part_of_speech].append(r)
    out = []
    for label, rs in sorted(groups.items(), key=lambda kv: (-len(kv[1]), kv[0])):
        acc, mrr, _ = metrics_from_ranks(rs)
        out.append((label, len(rs), acc[1], mrr))
    return out


@dataclass(frozen=True)
class TranslitScores:
    n: int
    exact: float
    cer: float
    chrf: float
    chrf_corpus: float


def translit_eval(rules: GraphemeRuleSet, entries: Sequence[LexiconEntry]) -> TranslitScores:
    if not entries:
        raise EvalError("no entries to evaluate")
    hyps = [rules.transliterate(e.tajik) for e in entries]
    refs = [e.persian for e in entries]
    n = len(refs)
    return TranslitScores(
        n,
        sum(h == r for h, r in zip(hyps, refs)) / n,
        sum(cer(h, r) for h, r in zip(hyps, refs)) / n,
        sum(chrf(h, r) for h, r in zip(hyps, refs)) / n,
        chrf_corpus(hyps, refs),
    )


# ---------------------------------------------------------------------------
# OCR corruption
# ---------------------------------------------------------------------------

OPS = ("sub", "del", "ins")


@dataclass(frozen=True)
class EditOp:
    kind: str  # sub | del | ins
    position: int  # index into the original word
    char: str = ""  # substitute or inserted character


@dataclass(frozen=True)
class OcrSample:
    original: str
    corrupted: str
    ops: tuple[EditOp, ...]
    selected: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "original": self.original,
                "corrupted": self.corrupted,
                "selected": self.selected,
                "ops": [[o.kind, o.position, o.char] for o in self.ops],
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "OcrSample":
        d = json.loads(line)
        return cls(d["original"], d["corrupted"], tuple(EditOp(*o) for o in d["ops"]), d["selected"])


def apply_ops(word: str, ops: Iterable[EditOp]) -> str:
    """Replay recorded operations (positions refer to the original word)."""
    by_pos: dict[int, EditOp] = {o.position: o for o in ops}
    out = []
    for i, ch in enumerate(word):
        op = by_pos.get(i)
        if op is None:
            out.append(ch)
        elif op.kind == "sub":
            out.append(op.char)
        elif op.kind == "ins":
            out.append(ch + op.char)
        elif op.kind != "del":
            raise EvalError(f"unknown edit kind {op.kind!r}")
    return "".join(out)


def corrupt(word: str, p_word: float = 0.30, p_char: float = 0.20, alphabet: Sequence[str] = (), seed: int = 0) -> OcrSample:
    """Select the word with probability ``p_word``; then each character with
    probability ``p_char`` is substituted, deleted, or followed by an
    inserted character, the three chosen uniformly."""
    if not word:
        raise EvalError("cannot corrupt an empty word")
    chars = sorted(set(alphabet)) or sorted(set(word))
    rng = random.Random(seed)
    if rng.random() >= p_word:
        return OcrSample(word, word, (), False)
    ops = []
    for i, ch in enumerate(word):
        if rng.random() >= p_char:
            continue
        kind = OPS[rng.randrange(3)]
        if kind == "sub":
            others = [c for c in chars if c != ch]
            if not others:
                kind = "del"
            else:
                ops.append(EditOp("sub", i, rng.choice(others)))
                continue
        if kind == "del":
            ops.append(EditOp("del", i))
        else:
            ops.append(EditOp("ins", i, rng.choice(chars)))
    ops_t = tuple(ops)
    return OcrSample(word, apply_ops(word, ops_t), ops_t, True)


@dataclass
class CorruptionStats:
    words: int = 0
    selected: int = 0
    effective: int = 0  # selected and received at least one edit
    chars_in_selected: int = 0
    edits: int = 0

    @property
    def selected_rate(self) -> float:
        return self.selected / self.words if self.words else 0.0

    @property
    def effective_rate(self) -> float:
        return self.effective / self.words if self.words else 0.0

    @property
    def char_edit_rate(self) -> float:
        return self.edits / self.chars_in_selected if self.chars_in_selected else 0.0


def corrupt_many(
    words: Sequence[str], p_word: float = 0.30, p_char: float = 0.20, alphabet: Sequence[str] = (), seed: int = 42
) -> tuple[list[OcrSample], CorruptionStats]:
    chars = sorted(set(alphabet) if alphabet else {c for w in words for c in w})
    stats = CorruptionStats()
    samples = []
    for i, w in enumerate(words):
        s = corrupt(w, p_word, p_char, chars, derive_seed(seed, "ocr", i))
        samples.append(s)
        stats.words += 1
        if s.selected:
            stats.selected += 1
            stats.chars_in_selected += len(w)
            stats.edits += len(s.ops)
            stats.effective += bool(s.ops)
    return samples, stats


def subsample(words: Sequence[str], n: int, seed: int = 42) -> list[str]:
    """``n`` words drawn without replacement, kept in their original order;
    ``n <= 0`` or ``n >= len(words)`` keeps them all."""
    if n <= 0 or n >= len(words):
        return list(words)
    keep = sorted(random.Random(derive_seed(seed, "ocr-sample")).sample(range(len(words)), n))
    return [words[i] for i in keep]


def ocr_eval(
    scorer: Scorer,
    samples: Sequence[OcrSample],
    universe: Universe,
    pool_size: int = 1000,
    seed: int = 42,
    iterations: int = 1000,
    method: str | None = None,
    jobs: int = 1,
) -> tuple[EvalReport, list[int]]:
    """Rank clean candidates against each corrupted form; ``scorer`` must be
    built with ``query_script="persian"``."""
    if scorer.query_script != "persian":
        raise EvalError("OCR evaluation needs a scorer with query_script='persian'")
    return evaluate(
        scorer,
        [s.corrupted for s in samples],
        [s.original for s in samples],
        universe,
        pool_size,
        seed,
        task="ocr",
        iterations=iterations,
        method=method,
        jobs=jobs,
    )


def report_to_dict(r: EvalReport) -> dict:
    d = asdict(r)
    d["acc"] = {str(k): v for k, v in r.acc.items()}
    return d
