"""End-to-end runs: ingest, split, train, tune, evaluate and report."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .corpus import (
    LexiconEntry,
    SplitSpec,
    dedupe,
    iter_jsonl,
    normalize_entry,
    read_jsonl,
    split,
    stats,
    write_jsonl,
    write_splits,
)
from .embed import EmbeddingModel, EmbeddingParams, WordVectorTable, build_training_stream, build_word_stream, train_skipgram
from .evalharness import (
    REGIMES,
    EvalReport,
    corrupt_many,
    emit_efficiency,
    emit_report,
    evaluate,
    ocr_eval,
    peak_rss_mb,
    pos_breakdown,
    source_stamp,
    subsample,
    translit_eval,
)
from .fusion import (
    COMPONENTS,
    ComponentScorer,
    EmbeddingScorer,
    FusionWeights,
    HybridModels,
    HybridScorer,
    collect_tuning_data,
    tune_weights,
)
from .retrieval import (
    Bm25Scorer,
    EditScorer,
    PhoneticScorer,
    RandomScorer,
    RuleScorer,
    Scorer,
    Universe,
    sample_distractors,
)
from .subword import BpeModel, corpus_from_entries, train_bpe
from .synth import GroundTruth
from .translit import GraphemeRuleSet, default_rules, load_rules

log = logging.getLogger(__name__)

METHODS = ("random", "edit", "phonetic", "rule", "w2v", "ft", "bm25", "hybrid")
OCR_METHODS = ("edit", "bm25", "hybrid")


# Wall-clock and memory files differ between identical runs.
VOLATILE = frozenset({"manifest.json", "timings.json", "efficiency.csv"})


class StageError(RuntimeError):
    pass


@dataclass
class RunConfig:
    dataset: str = ""
    out_dir: str = "run"
    seed: int = 42
    regime: str = "primary"
    pool_size: int = 0  # 0 = regime default (1,000 primary, 3,000 stress)
    rules: str = ""  # rule TSV or synthetic truth JSON; empty = shipped tables
    exceptions: str = ""
    bpe_vocab: int = 2000
    character_coverage: float = 0.9995
    dim: int = 200
    window: int = 5
    min_count: int = 2
    epochs: int = 10
    negative: int = 5
    n_min: int = 3
    n_max: int = 6
    k1: float = 1.5
    b: float = 0.75
    grid_step: float = 0.05
    tune_pool: int = 100
    p_word: float = 0.30
    p_char: float = 0.20
    ocr_sample: int = 0  # words drawn from the evaluation split for OCR; 0 = all
    bootstrap: int = 1000
    methods: str = ",".join(METHODS)
    ocr_methods: str = ",".join(OCR_METHODS)
    eval_split: str = "test"
    include_examples: bool = False

    def __post_init__(self) -> None:
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {sorted(REGIMES)}")
        if self.eval_split not in ("dev", "test"):
            raise ValueError("eval_split must be dev or test")
        for name in ("methods", "ocr_methods"):
            unknown = set(self.method_list(name)) - set(METHODS)
            if unknown:
                raise ValueError(f"unknown methods in {name}: {sorted(unknown)}")

    @property
    def pool(self) -> int:
        return self.pool_size or REGIMES[self.regime]

    def method_list(self, name: str = "methods") -> list[str]:
        return [m.strip() for m in getattr(self, name).split(",") if m.strip()]

    def embedding_params(self, kind: str) -> EmbeddingParams:
        return EmbeddingParams(
            kind=kind, dim=self.dim, window=self.window, min_count=self.min_count, epochs=self.epochs,
            negative=self.negative, n_min=self.n_min, n_max=self.n_max,
        )  # fmt: skip


def load_rule_set(path: str = "", exceptions: str = "") -> GraphemeRuleSet:
    """Shipped tables, a rule TSV (plus optional exceptions TSV), or the rules
    recorded in a synthetic truth JSON."""
    if not path:
        return default_rules()
    if path.endswith(".json"):
        return GroundTruth.load(path).rules
    return load_rules(path, exceptions or None)


def file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class Manifest:
    config: dict
    seeds: dict[str, int]
    version: str
    stages: list[dict] = field(default_factory=list)
    failed_stage: str | None = None
    files: dict[str, str] = field(default_factory=dict)

    def write(self, out: Path) -> None:
        self.files = {
            p.relative_to(out).as_posix(): file_sha256(p)
            for p in sorted(out.rglob("*"))
            if p.is_file() and p.name not in VOLATILE
        }
        payload = asdict(self)
        (out / "manifest.json").write_text(json.dumps(payload, indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def ingest(path: str | Path) -> tuple[list[LexiconEntry], dict]:
    raw, rejects = read_jsonl(path)
    entries = [normalize_entry(e) for e in raw]
    kept, report = dedupe(entries)
    info = {"read": len(raw) + len(rejects), "rejects": len(rejects), "exact_dupes": report.exact, "fuzzy_dupes": report.fuzzy, "kept": len(kept)}
    return kept, info


def train_models(cfg: RunConfig, train: list[LexiconEntry], out: Path) -> tuple[BpeModel, EmbeddingModel, EmbeddingModel, dict[str, float]]:
    timings = {}
    t = time.perf_counter()
    bpe = train_bpe(corpus_from_entries(train, cfg.include_examples), cfg.bpe_vocab, cfg.seed, cfg.character_coverage)
    bpe.save(out / "bpe.model")
    timings["bpe"] = time.perf_counter() - t
    t = time.perf_counter()
    w2v = train_skipgram(build_training_stream(train, bpe, cfg.include_examples), cfg.embedding_params("wordpiece"), cfg.seed)
    w2v.save(out / "w2v.vec")
    timings["w2v"] = time.perf_counter() - t
    t = time.perf_counter()
    ft = train_skipgram(build_word_stream(train, cfg.include_examples), cfg.embedding_params("char-ngram"), cfg.seed)
    ft.save(out / "ft.vec")
    timings["ft"] = time.perf_counter() - t
    return bpe, w2v, ft, timings


def tune(cfg: RunConfig, models: HybridModels, dev: list[LexiconEntry], universe: Universe, out: Path | None = None):
    scorer = ComponentScorer(models)
    rows = [
        np.concatenate([[universe.index[e.persian]], sample_distractors(universe, e.persian, cfg.tune_pool, cfg.seed, i)])
        for i, e in enumerate(dev)
    ]
    data = collect_tuning_data(scorer, [e.tajik for e in dev], universe, rows)
    result = tune_weights(data, cfg.grid_step)
    if out is not None:
        meta = {"grid_step": cfg.grid_step, "tune_pool": cfg.tune_pool, "dev_mrr": result.mrr, "corner_mrr": result.corner_mrr, "n_dev": len(dev)}
        result.weights.save(out / "weights.json", meta)
        header = "\t".join(COMPONENTS) + "\tmrr\n"
        (out / "tuning_log.tsv").write_text(header + "\n".join(result.log_lines()) + "\n", encoding="utf-8")
    return result


def make_scorer(method: str, models: HybridModels, weights: FusionWeights, seed: int, cfg: RunConfig, query_script: str = "tajik") -> Scorer:
    if method == "random":
        return RandomScorer(seed, query_script)
    if method == "edit":
        return EditScorer(query_script)
    if method == "phonetic":
        return PhoneticScorer(query_script)
    if method == "rule":
        return RuleScorer(models.rules, query_script)
    if method == "bm25":
        return Bm25Scorer(query_script, cfg.k1, cfg.b)
    if method == "ft":
        return EmbeddingScorer(models.ft, models.bpe, "ft", query_script, models.ft_table)
    if method == "w2v":
        return EmbeddingScorer(models.w2v, models.bpe, "w2v", query_script)
    if method == "hybrid":
        return HybridScorer(models, weights, query_script)
    raise ValueError(f"unknown method {method!r}")


def reproduce(cfg: RunConfig, progress: Callable[[str], None] | None = None) -> tuple[int, Path]:
    """Run every stage into ``cfg.out_dir``. Returns (exit status, directory).

    A failing stage leaves earlier artifacts in place and is named in the
    manifest.
    """
    say = progress or log.info
    if not cfg.dataset or not Path(cfg.dataset).is_file():
        raise FileNotFoundError(f"dataset not found: {cfg.dataset!r}")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(
        config=asdict(cfg),
        seeds={"split": cfg.seed, "embeddings": cfg.seed, "pools": cfg.seed, "bootstrap": cfg.seed, "ocr": cfg.seed},
        version=source_stamp(),
    )
    efficiency: list[EvalReport] = []
    state: dict = {}

    def stage(name: str, fn: Callable[[], None]) -> None:
        say(f"stage {name}")
        t = time.perf_counter()
        fn()
        manifest.stages.append({"name": name, "status": "ok"})
        state.setdefault("timings", {})[name] = time.perf_counter() - t

    def do_ingest():
        entries, info = ingest(cfg.dataset)
        if not entries:
            raise StageError("no usable records")
        write_jsonl(out / "clean.jsonl", entries)
        (out / "ingest.json").write_text(json.dumps(info, indent=1, sort_keys=True) + "\n", encoding="utf-8")
        state["entries"] = entries

    def do_split():
        parts = split(state["entries"], SplitSpec(seed=cfg.seed))
        write_splits(out / "splits", parts)
        table = stats(state["entries"])
        (out / "stats.csv").write_text(table.to_csv(), encoding="utf-8")
        (out / "stats.md").write_text(table.to_markdown(), encoding="utf-8")
        state["train"], state["dev"], state["test"] = parts

    def do_train():
        bpe, w2v, ft, timings = train_models(cfg, state["train"], out)
        rules = load_rule_set(cfg.rules, cfg.exceptions)
        state["models"] = HybridModels(rules, ft, w2v, bpe)
        state["train_timings"] = timings

    def do_tune():
        universe = Universe(e.persian for e in state["entries"])
        state["universe"] = universe
        t = time.perf_counter()
        result = tune(cfg, state["models"], state["dev"], universe, out)
        state["train_timings"]["tune"] = time.perf_counter() - t
        state["weights"] = result.weights

    def do_eval():
        models, universe = state["models"], state["universe"]
        queries = state[cfg.eval_split]
        reports = []
        for method in cfg.method_list():
            scorer = make_scorer(method, models, state["weights"], cfg.seed, cfg)
            report, ranks = evaluate(
                scorer, [e.tajik for e in queries], [e.persian for e in queries], universe, cfg.pool, cfg.seed,
                cfg.regime, iterations=cfg.bootstrap, method=method,
            )  # fmt: skip
            reports.append(report)
            if method == "hybrid":
                rows = pos_breakdown(queries, ranks)
                lines = ["pos,count,acc1,mrr"] + [f"{p},{n},{a:.3f},{m:.3f}" for p, n, a, m in rows]
                (out / "pos_breakdown.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        emit_report(reports, "csv", out / "retrieval.csv", manifest.version)
        emit_report(reports, "markdown", out / "retrieval.md", manifest.version)
        efficiency.extend(reports)
        tr = translit_eval(models.rules, queries)
        (out / "translit.csv").write_text(
            "method,n,exact,cer,chrf,chrf_corpus\n"
            f"rule,{tr.n},{tr.exact:.3f},{tr.cer:.3f},{tr.chrf:.3f},{tr.chrf_corpus:.3f}\n",
            encoding="utf-8",
        )

    def do_ocr():
        models, universe = state["models"], state["universe"]
        queries = state[cfg.eval_split]
        alphabet = sorted({c for f in universe.forms for c in f})
        words = subsample([e.persian for e in queries], cfg.ocr_sample, cfg.seed)
        samples, cstats = corrupt_many(words, cfg.p_word, cfg.p_char, alphabet, cfg.seed)
        with open(out / "ocr_samples.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            for s in samples:
                fh.write(s.to_json() + "\n")
        reports = []
        for method in cfg.method_list("ocr_methods"):
            scorer = make_scorer(method, models, state["weights"], cfg.seed, cfg, "persian")
            report, _ = ocr_eval(scorer, samples, universe, cfg.pool, cfg.seed, cfg.bootstrap, method)
            reports.append(report)
        emit_report(reports, "csv", out / "ocr.csv", manifest.version)
        emit_report(reports, "markdown", out / "ocr.md", manifest.version)
        efficiency.extend(reports)
        (out / "ocr_stats.json").write_text(
            json.dumps({"words": cstats.words, "selected_rate": cstats.selected_rate, "effective_rate": cstats.effective_rate, "char_edit_rate": cstats.char_edit_rate}, indent=1, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    status = 0
    for name, fn in (("ingest", do_ingest), ("split", do_split), ("train", do_train), ("tune", do_tune), ("eval", do_eval), ("ocr", do_ocr)):
        try:
            stage(name, fn)
        except Exception as exc:  # recorded, then reported through the exit status
            log.error("stage %s failed: %s", name, exc)
            manifest.stages.append({"name": name, "status": "failed", "error": str(exc)})
            manifest.failed_stage = name
            status = 1
            break
    if efficiency:
        emit_efficiency(efficiency, "csv", out / "efficiency.csv", manifest.version)
        timings = {**state.get("train_timings", {}), **state.get("timings", {}), "peak_mb": peak_rss_mb()}
        (out / "timings.json").write_text(json.dumps(timings, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    manifest.write(out)
    return status, out


def load_models(
    model_dir: str | Path,
    rules: str = "",
    exceptions: str = "",
    ft_words: list[str] | None = None,
    with_ft: bool = True,
) -> HybridModels:
    """Models saved by :func:`train_models`. With ``ft_words`` the char-ngram
    table is streamed into per-word vectors instead of being loaded whole."""
    d = Path(model_dir)
    bpe = BpeModel.load(d / "bpe.model")
    w2v = EmbeddingModel.load(d / "w2v.vec")
    if not with_ft:
        return HybridModels(load_rule_set(rules, exceptions), None, w2v, bpe)
    if ft_words is None:
        return HybridModels(load_rule_set(rules, exceptions), EmbeddingModel.load(d / "ft.vec"), w2v, bpe)
    table = WordVectorTable.from_file(d / "ft.vec", ft_words)
    return HybridModels(load_rule_set(rules, exceptions), None, w2v, bpe, table)


def run_saved_eval(
    lexicon: str | Path,
    queries: str | Path | None,
    model_dir: str | Path,
    method: str = "hybrid",
    weights: str | Path | None = None,
    cfg: RunConfig | None = None,
    task: str = "retrieval",
    samples: list | None = None,
    jobs: int = 1,
) -> tuple[EvalReport, list[int]]:
    """Evaluate one method from saved artifacts with a small footprint."""
    cfg = cfg or RunConfig()
    universe = Universe(e.persian for e in iter_jsonl(lexicon))
    if task == "ocr":
        if samples is None:
            raise ValueError("OCR evaluation needs corruption samples")
        q_text, golds, script = [s.corrupted for s in samples], [s.original for s in samples], "persian"
    else:
        if queries is None:
            raise ValueError("retrieval evaluation needs a query file")
        pairs = [(e.tajik, e.persian) for e in iter_jsonl(queries)]
        q_text, golds = [t for t, _ in pairs], [p for _, p in pairs]
        script = "tajik"
    needs_ft = method in ("ft", "hybrid")
    models = (
        load_models(model_dir, cfg.rules, cfg.exceptions, list(universe.forms) + q_text if needs_ft else None, needs_ft)
        if method not in ("random", "edit", "phonetic", "bm25")
        else HybridModels(load_rule_set(cfg.rules, cfg.exceptions))
    )
    w = FusionWeights.load(weights) if weights else FusionWeights()
    scorer = make_scorer(method, models, w, cfg.seed, cfg, script)
    if task == "ocr":
        return ocr_eval(scorer, samples, universe, cfg.pool, cfg.seed, cfg.bootstrap, method, jobs)
    return evaluate(
        scorer, q_text, golds, universe, cfg.pool, cfg.seed, cfg.regime, iterations=cfg.bootstrap, method=method, jobs=jobs
    )
