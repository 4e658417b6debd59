"""Linear fusion of four similarity signals and grid-search weight tuning."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .embed import CandidateVectors, EmbeddingModel, WordVectorTable, cosine01, word_vector
from .retrieval import EditScorer, RuleScorer, Scorer, Universe, persian_romanizer, tajik_romanizer
from .strmetrics import norm_sim
from .subword import BpeModel
from .translit import GraphemeRuleSet

COMPONENTS = ("ft", "w2v", "edit", "rule")


@dataclass(frozen=True)
class FusionWeights:
    """Weights of (fastText, word2vec, edit, rule), normalized to sum to one."""

    alpha: float = 0.4
    beta: float = 0.3
    gamma: float = 0.2
    delta: float = 0.1

    def __post_init__(self) -> None:
        raw = (self.alpha, self.beta, self.gamma, self.delta)
        if any(w < 0 for w in raw):
            raise ValueError("fusion weights must be non-negative")
        total = sum(raw)
        if total <= 0:
            raise ValueError("at least one fusion weight must be positive")
        if abs(total - 1.0) > 1e-9:
            for name, w in zip(("alpha", "beta", "gamma", "delta"), raw):
                object.__setattr__(self, name, w / total)

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma, self.delta], dtype=np.float64)

    def to_dict(self) -> dict[str, float]:
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma, "delta": self.delta}

    def save(self, path: str | Path, meta: dict | None = None) -> None:
        payload = {"weights": self.to_dict(), **(meta or {})}
        Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "FusionWeights":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        w = d.get("weights", d)
        return cls(w["alpha"], w["beta"], w["gamma"], w["delta"])


@dataclass
class HybridModels:
    """Everything the four components need."""

    rules: GraphemeRuleSet
    ft: EmbeddingModel | None = None  # char-ngram kind
    w2v: EmbeddingModel | None = None  # wordpiece kind
    bpe: BpeModel | None = None
    ft_table: WordVectorTable | None = None  # precomputed char-ngram word vectors


def component_scores(query: str, candidate: str, models: HybridModels, query_script: str = "tajik") -> tuple[float, ...]:
    """(s_ft, s_w2v, s_edit, s_rule), each in [0, 1]."""

    def emb(model: EmbeddingModel | None) -> float:
        if model is None:
            return 0.5
        return cosine01(word_vector(model, query, models.bpe), word_vector(model, candidate, models.bpe))

    if query_script == "persian":
        s_edit = s_rule = norm_sim(query, candidate)
    else:
        s_edit = norm_sim(tajik_romanizer(query), persian_romanizer(candidate))
        s_rule = norm_sim(models.rules.transliterate(query), candidate)
    return (emb(models.ft), emb(models.w2v), s_edit, s_rule)


def fuse(w: FusionWeights, scores: Sequence[float]) -> float:
    return float(np.dot(w.as_array(), np.asarray(scores, dtype=np.float64)))


class EmbeddingScorer(Scorer):
    """cosine01 between the query vector and candidate vectors.

    With a :class:`WordVectorTable` whose leading words are the universe
    forms, scores come from its precomputed rows; otherwise candidate vectors
    are derived from ``model`` on first use.
    """

    def __init__(
        self,
        model: EmbeddingModel | None,
        bpe: BpeModel | None,
        name: str,
        query_script: str = "tajik",
        table: WordVectorTable | None = None,
    ):
        super().__init__(query_script)
        self.model, self.bpe, self.name, self.table = model, bpe, name, table
        self._checked: Universe | None = None

    def scores(self, query, universe, rows, query_index=0):
        if self.table is not None:
            if self._checked is not universe:
                if len(self.table.words) < len(universe) or any(a != b for a, b in zip(self.table.words, universe.forms)):
                    raise ValueError("vector table does not start with the universe forms")
                self._checked = universe
            return self.table.scores(query, rows)
        if self.model is None:
            return np.full(len(rows), 0.5)
        cv = universe.cached(("vectors", id(self.model)), lambda: CandidateVectors(self.model, universe.forms, self.bpe))
        return cv.scores(word_vector(self.model, query, self.bpe), rows)


class ComponentScorer:
    """Computes the (n, 4) component matrix for one query and a set of rows."""

    def __init__(self, models: HybridModels, query_script: str = "tajik"):
        self.models = models
        self.query_script = query_script
        self.parts: list[Scorer] = [
            EmbeddingScorer(models.ft, models.bpe, "ft", query_script, models.ft_table),
            EmbeddingScorer(models.w2v, models.bpe, "w2v", query_script),
            EditScorer(query_script),
            RuleScorer(models.rules, query_script),
        ]

    def matrix(self, query: str, universe: Universe, rows: np.ndarray, query_index: int = 0) -> np.ndarray:
        return np.stack([p.scores(query, universe, rows, query_index) for p in self.parts], axis=1)


class HybridScorer(Scorer):
    name = "hybrid"

    def __init__(self, models: HybridModels, weights: FusionWeights = FusionWeights(), query_script: str = "tajik"):
        super().__init__(query_script)
        self.components = ComponentScorer(models, query_script)
        self.weights = weights

    def scores(self, query, universe, rows, query_index=0):
        return self.components.matrix(query, universe, rows, query_index) @ self.weights.as_array()


class SingleComponentScorer(Scorer):
    """One column of the component matrix, exposed as a ranker."""

    def __init__(self, models: HybridModels, component: str, query_script: str = "tajik"):
        super().__init__(query_script)
        self.inner = ComponentScorer(models, query_script).parts[COMPONENTS.index(component)]
        self.name = component

    def scores(self, query, universe, rows, query_index=0):
        return self.inner.scores(query, universe, rows, query_index)


# ---------------------------------------------------------------------------
# Tuning
# ---------------------------------------------------------------------------


def simplex_grid(step: float = 0.05) -> np.ndarray:
    """Integer compositions of ``1/step`` into four parts, lexicographic, as weights."""
    steps = round(1.0 / step)
    if steps < 1 or abs(steps * step - 1.0) > 1e-9:
        raise ValueError(f"grid step {step} must divide 1")
    pts = [
        (a, b, c, steps - a - b - c)
        for a in range(steps + 1)
        for b in range(steps + 1 - a)
        for c in range(steps + 1 - a - b)
    ]
    return np.array(pts, dtype=np.float64) / steps


@dataclass
class TuningData:
    """Component matrices of the dev pools; the gold is row 0 of each."""

    matrices: np.ndarray  # (Q, n, 4)
    lex: np.ndarray  # (Q, n) lexicographic keys


@dataclass
class TuningResult:
    weights: FusionWeights
    mrr: float
    grid: np.ndarray
    grid_mrr: np.ndarray
    corner_mrr: dict[str, float]

    def log_lines(self) -> list[str]:
        return [
            "\t".join(f"{x:.2f}" for x in pt) + f"\t{m:.6f}" for pt, m in zip(self.grid, self.grid_mrr)
        ]


def collect_tuning_data(
    scorer: ComponentScorer, queries: Sequence[str], universe: Universe, pool_rows: Sequence[np.ndarray]
) -> TuningData:
    if not queries:
        raise ValueError("tuning needs at least one dev query")
    sizes = {len(r) for r in pool_rows}
    if len(sizes) != 1:
        raise ValueError("tuning pools must all have the same size")
    mats = np.stack([scorer.matrix(q, universe, rows, i) for i, (q, rows) in enumerate(zip(queries, pool_rows))])
    lex = np.stack([universe.lex_rank[rows] for rows in pool_rows])
    return TuningData(mats, lex)


def mrr_for_weights(data: TuningData, weights: np.ndarray) -> np.ndarray:
    """Dev MRR for each row of ``weights`` (G, 4); gold sits at column 0."""
    out = np.empty(len(weights))
    tie_ahead = data.lex < data.lex[:, :1]  # (Q, n)
    for g, w in enumerate(weights):
        s = data.matrices @ w  # (Q, n)
        gold = s[:, :1]
        rank = 1 + np.count_nonzero(s > gold, axis=1) + np.count_nonzero((s == gold) & tie_ahead, axis=1)
        out[g] = float(np.mean(1.0 / rank))
    return out


def tune_weights(data: TuningData, grid_step: float = 0.05) -> TuningResult:
    """Exhaustive simplex grid search maximizing dev MRR; the earliest grid
    point wins ties."""
    grid = simplex_grid(grid_step)
    mrr = mrr_for_weights(data, grid)
    best = int(np.argmax(mrr))  # first maximum
    corners = mrr_for_weights(data, np.eye(4))
    w = FusionWeights(*grid[best])
    return TuningResult(w, float(mrr[best]), grid, mrr, dict(zip(COMPONENTS, corners.tolist())))
