"""Candidate pools and the single-signal rankers.

Each ranker exists in two shapes. The public ``*_rank`` functions take a
query and a :class:`CandidatePool` and return a fully sorted
:class:`RankedList`. The :class:`Scorer` classes score a query against rows
of a shared :class:`Universe`, which caches per-candidate preprocessing so an
evaluation over thousands of pools never repeats it; the evaluation harness
uses them to find the gold rank without sorting.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .corpus import derive_seed
from .strmetrics import EncodedStrings, encode_strings, norm_sim, norm_sim_batch
from .translit import (
    GraphemeRuleSet,
    PhoneticTable,
    code_agreement,
    phonetic_code,
    phonetic_table,
    romanize,
)

Romanizer = Callable[[str], str]


class PoolError(ValueError):
    pass


def tajik_romanizer(word: str) -> str:
    return romanize(word, "tajik")


def persian_romanizer(word: str) -> str:
    return romanize(word, "persian")


# ---------------------------------------------------------------------------
# Pools
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CandidatePool:
    query_id: int
    gold: str
    distractors: tuple[str, ...]
    seed: int

    def __post_init__(self) -> None:
        if self.gold in self.distractors:
            raise PoolError("gold form appears among the distractors")
        if len(set(self.distractors)) != len(self.distractors):
            raise PoolError("distractors are not pairwise distinct")

    @property
    def candidates(self) -> tuple[str, ...]:
        return (self.gold,) + self.distractors

    def __len__(self) -> int:
        return 1 + len(self.distractors)

    def to_json(self) -> str:
        return json.dumps(
            {"query_id": self.query_id, "gold": self.gold, "distractors": list(self.distractors), "seed": self.seed},
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "CandidatePool":
        d = json.loads(line)
        return cls(d["query_id"], d["gold"], tuple(d["distractors"]), d["seed"])


class Universe:
    """Distinct candidate forms in first-seen order, with lazily built caches."""

    def __init__(self, forms: Iterable[str]):
        self.forms: tuple[str, ...] = tuple(dict.fromkeys(forms))
        self.index = {f: i for i, f in enumerate(self.forms)}
        order = sorted(range(len(self.forms)), key=self.forms.__getitem__)
        self.lex_rank = np.empty(len(self.forms), dtype=np.int64)
        self.lex_rank[order] = np.arange(len(self.forms))
        self._cache: dict[object, object] = {}

    def __len__(self) -> int:
        return len(self.forms)

    def cached(self, key: object, build: Callable[[], object]):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def encoded(self, transform: Callable[[str], str] | None = None, key: object = None) -> EncodedStrings:
        key = ("encoded", key if key is not None else transform)
        return self.cached(key, lambda: encode_strings([transform(f) if transform else f for f in self.forms]))


def sample_distractors(universe: Universe, gold: str, pool_size: int, run_seed: int, query_index: int) -> np.ndarray:
    """Universe rows of ``pool_size`` distractors, uniform without replacement
    over the universe minus ``gold``.

    ``pool_size + 1`` rows are drawn; the gold row is dropped if present and
    otherwise the last draw is, which leaves a uniform subset of the rest.
    """
    gold_row = universe.index.get(gold)
    available = len(universe) - (gold_row is not None)
    if pool_size < 0:
        raise PoolError("pool_size must be >= 0")
    if available < pool_size:
        raise PoolError(f"universe has {available} non-gold forms, fewer than pool_size {pool_size}")
    rng = random.Random(derive_seed(run_seed, query_index))
    draw = rng.sample(range(len(universe)), min(pool_size + 1, len(universe)))
    if gold_row in draw:
        draw.remove(gold_row)
    return np.array(draw[:pool_size], dtype=np.int64)


def build_pool(
    gold: str, universe: Sequence[str] | Universe, pool_size: int, run_seed: int, query_index: int
) -> CandidatePool:
    uni = universe if isinstance(universe, Universe) else Universe(universe)
    rows = sample_distractors(uni, gold, pool_size, run_seed, query_index)
    return CandidatePool(query_index, gold, tuple(uni.forms[i] for i in rows), derive_seed(run_seed, query_index))


def write_pools(path: str | Path, pools: Iterable[CandidatePool]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in pools:
            fh.write(p.to_json() + "\n")


def read_pools(path: str | Path) -> list[CandidatePool]:
    with open(path, encoding="utf-8") as fh:
        return [CandidatePool.from_json(line) for line in fh if line.strip()]


# ---------------------------------------------------------------------------
# Ranked lists
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RankedList:
    query_id: int
    items: tuple[tuple[str, float], ...]
    component: str

    @property
    def candidates(self) -> list[str]:
        return [c for c, _ in self.items]

    def rank_of(self, candidate: str) -> int | None:
        for i, (c, _) in enumerate(self.items, 1):
            if c == candidate:
                return i
        return None

    def to_tsv(self, query: str) -> str:
        return "".join(f"{query}\t{i}\t{c}\t{s:.6f}\t{self.component}\n" for i, (c, s) in enumerate(self.items, 1))


def ranked(query_id: int, candidates: Sequence[str], scores: Sequence[float], component: str) -> RankedList:
    """Sort by score descending, ties by candidate string ascending."""
    order = sorted(range(len(candidates)), key=lambda i: (-scores[i], candidates[i]))
    return RankedList(query_id, tuple((candidates[i], float(scores[i])) for i in order), component)


def gold_rank(scores: np.ndarray, lex: np.ndarray, gold_pos: int = 0) -> int:
    """1-based rank of position ``gold_pos`` under the :func:`ranked` order,
    where ``lex`` holds any keys with the candidates' lexicographic order."""
    g = scores[gold_pos]
    return 1 + int(np.count_nonzero(scores > g) + np.count_nonzero((scores == g) & (lex < lex[gold_pos])))


# ---------------------------------------------------------------------------
# BM25
# ---------------------------------------------------------------------------


def trigrams(text: str) -> list[str]:
    """Character trigrams of each whitespace token padded with ``#``."""
    grams = []
    for tok in text.split():
        padded = f"##{tok}#"
        grams.extend(padded[i : i + 3] for i in range(len(padded) - 2))
    return grams


@dataclass(frozen=True)
class Bm25Index:
    docs: tuple[tuple[str, ...], ...]
    k1: float = 1.5
    b: float = 0.75
    df: dict[str, int] = field(init=False, compare=False)
    avgdl: float = field(init=False, compare=False)

    def __post_init__(self) -> None:
        postings: dict[str, list[tuple[int, int]]] = {}
        for i, d in enumerate(self.docs):
            for term, tf in Counter(d).items():
                postings.setdefault(term, []).append((i, tf))
        object.__setattr__(self, "df", {t: len(p) for t, p in postings.items()})
        object.__setattr__(self, "_postings", postings)
        total = sum(len(d) for d in self.docs)
        object.__setattr__(self, "avgdl", total / len(self.docs) if self.docs else 0.0)

    @classmethod
    def build(cls, docs: Iterable[str], romanizer: Romanizer = persian_romanizer, k1: float = 1.5, b: float = 0.75):
        return cls(tuple(tuple(trigrams(romanizer(d))) for d in docs), k1, b)

    def idf(self, term: str) -> float:
        n, df = len(self.docs), self.df.get(term, 0)
        return math.log((n - df + 0.5) / (df + 0.5) + 1.0)

    def scores(self, query_terms: Sequence[str]) -> list[float]:
        """BM25 of every document; a query term repeated r times counts r times."""
        out = [0.0] * len(self.docs)
        if not self.docs or self.avgdl == 0:
            return out
        k1, b, avgdl, docs = self.k1, self.b, self.avgdl, self.docs
        for term, reps in Counter(query_terms).items():
            plist = self._postings.get(term)
            if not plist:
                continue
            idf = self.idf(term) * reps
            for i, f in plist:
                norm = k1 * (1.0 - b + b * len(docs[i]) / avgdl)
                out[i] += idf * f * (k1 + 1.0) / (f + norm)
        return out


def bm25_rank(
    index: Bm25Index, query: str, candidates: Sequence[str], romanizer: Romanizer = tajik_romanizer, query_id: int = 0
) -> RankedList:
    """Rank the documents of ``index`` (in ``candidates`` order) for ``query``."""
    if len(candidates) != len(index.docs):
        raise PoolError("index and candidate list differ in length")
    return ranked(query_id, candidates, index.scores(trigrams(romanizer(query))), "bm25")


# ---------------------------------------------------------------------------
# Pool rankers
# ---------------------------------------------------------------------------


def edit_rank(query: str, pool: CandidatePool, romanizer: Romanizer = tajik_romanizer) -> RankedList:
    q = romanizer(query)
    cands = pool.candidates
    return ranked(pool.query_id, cands, [norm_sim(q, persian_romanizer(c)) for c in cands], "edit")


def rule_rank(query: str, pool: CandidatePool, rules: GraphemeRuleSet) -> RankedList:
    t = rules.transliterate(query)
    cands = pool.candidates
    return ranked(pool.query_id, cands, [norm_sim(t, c) for c in cands], "rule")


def phonetic_score(query: str, candidate: str, query_table: PhoneticTable, cand_table: PhoneticTable) -> float:
    if not query or not candidate:
        return 0.0
    return code_agreement(phonetic_code(query, query_table), phonetic_code(candidate, cand_table))


def phonetic_rank(
    query: str, pool: CandidatePool, tables: tuple[PhoneticTable, PhoneticTable] | None = None
) -> RankedList:
    qt, ct = tables or (phonetic_table("tajik"), phonetic_table("persian"))
    cands = pool.candidates
    return ranked(pool.query_id, cands, [phonetic_score(query, c, qt, ct) for c in cands], "phonetic")


def random_rank(pool: CandidatePool, seed: int) -> RankedList:
    cands = sorted(pool.candidates)
    random.Random(derive_seed(seed, pool.query_id)).shuffle(cands)
    n = len(cands)
    return RankedList(pool.query_id, tuple((c, 1.0 - i / n) for i, c in enumerate(cands)), "random")


# ---------------------------------------------------------------------------
# Universe scorers
# ---------------------------------------------------------------------------


class Scorer:
    """Scores one query against universe rows. ``query_script`` is ``tajik``
    for cross-script retrieval and ``persian`` for OCR correction."""

    name = "scorer"

    def __init__(self, query_script: str = "tajik"):
        if query_script not in ("tajik", "persian"):
            raise ValueError(f"query_script must be tajik or persian, not {query_script!r}")
        self.query_script = query_script

    def scores(self, query: str, universe: Universe, rows: np.ndarray, query_index: int = 0) -> np.ndarray:
        raise NotImplementedError


class EditScorer(Scorer):
    """Normalized similarity of romanizations; Persian queries compare in script."""

    name = "edit"

    def scores(self, query, universe, rows, query_index=0):
        if self.query_script == "persian":
            return norm_sim_batch(query, universe.encoded().take(rows))
        enc = universe.encoded(persian_romanizer, key="romanized")
        return norm_sim_batch(tajik_romanizer(query), enc.take(rows))


class RuleScorer(Scorer):
    name = "rule"

    def __init__(self, rules: GraphemeRuleSet, query_script: str = "tajik"):
        super().__init__(query_script)
        self.rules = rules

    def scores(self, query, universe, rows, query_index=0):
        t = self.rules.transliterate(query) if self.query_script == "tajik" else query
        return norm_sim_batch(t, universe.encoded().take(rows))


class PhoneticScorer(Scorer):
    name = "phonetic"

    def __init__(self, query_script: str = "tajik"):
        super().__init__(query_script)
        self.query_table = phonetic_table(query_script)
        self.cand_table = phonetic_table("persian")

    def scores(self, query, universe, rows, query_index=0):
        table = self.cand_table
        codes = universe.cached(
            ("phonetic", table), lambda: [phonetic_code(f, table) if f else "" for f in universe.forms]
        )
        if not query:
            return np.zeros(len(rows))
        q = phonetic_code(query, self.query_table)
        return np.array([code_agreement(q, codes[r]) if codes[r] else 0.0 for r in rows], dtype=np.float64)


class Bm25Scorer(Scorer):
    """BM25 over a fresh index of the pool's candidates."""

    name = "bm25"

    def __init__(self, query_script: str = "tajik", k1: float = 1.5, b: float = 0.75):
        super().__init__(query_script)
        self.k1, self.b = k1, b

    def scores(self, query, universe, rows, query_index=0):
        docs = universe.cached("trigrams", lambda: [tuple(trigrams(persian_romanizer(f))) for f in universe.forms])
        index = Bm25Index(tuple(docs[r] for r in rows), self.k1, self.b)
        q = romanize(query, self.query_script)
        return np.array(index.scores(trigrams(q)), dtype=np.float64)


class RandomScorer(Scorer):
    """Scores reproducing :func:`random_rank` for the same pool and seed."""

    name = "random"

    def __init__(self, seed: int, query_script: str = "tajik"):
        super().__init__(query_script)
        self.seed = seed

    def scores(self, query, universe, rows, query_index=0):
        order = sorted(range(len(rows)), key=lambda i: universe.lex_rank[rows[i]])
        random.Random(derive_seed(self.seed, query_index)).shuffle(order)
        out = np.empty(len(rows), dtype=np.float64)
        n = len(rows)
        for pos, i in enumerate(order):
            out[i] = 1.0 - pos / n
        return out


def pool_rows(universe: Universe, pool: CandidatePool) -> np.ndarray:
    return np.array([universe.index[c] for c in pool.candidates], dtype=np.int64)


def rank_with(scorer: Scorer, query: str, pool: CandidatePool, universe: Universe | None = None) -> RankedList:
    """Full ranked list of ``pool`` under a universe scorer."""
    uni = universe or Universe(pool.candidates)
    rows = pool_rows(uni, pool)
    scores = scorer.scores(query, uni, rows, pool.query_id)
    return ranked(pool.query_id, pool.candidates, scores.tolist(), scorer.name)
