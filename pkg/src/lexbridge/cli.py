"""Command-line entry point: ``lexbridge <subcommand> ...``.

Every option can also come from ``--config FILE`` holding ``key = value``
lines (keys spelled like the long option without dashes, ``-`` or ``_``);
flags given on the command line win.
"""

from __future__ import annotations

import os

for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse  # noqa: E402
import json  # noqa: E402
import logging  # noqa: E402
import sys  # noqa: E402
from dataclasses import fields  # noqa: E402
from pathlib import Path  # noqa: E402
from typing import Sequence  # noqa: E402

from . import __version__  # noqa: E402

log = logging.getLogger("lexbridge")


class UsageError(Exception):
    pass


def read_config(path: str | Path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; keys are normalized to
    underscores."""
    out: dict[str, str] = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{n}: expected key = value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def cmd_synth(a: argparse.Namespace) -> int:
    from .corpus import write_jsonl
    from .synth import SynthParams, gen_lexicon
    from .translit import save_rules

    params = SynthParams(
        n_pairs=a.n, noise_rate=a.noise, exception_fraction=a.exceptions, min_len=a.min_len, max_len=a.max_len, seed=a.seed
    )
    entries, truth = gen_lexicon(params)
    write_jsonl(a.out, entries)
    if a.truth:
        truth.save(a.truth)
    if a.rules_out:
        save_rules(truth.rules, a.rules_out, a.exceptions_out or None)
    print(f"wrote {len(entries)} pairs to {a.out}")
    return 0


def cmd_ingest(a: argparse.Namespace) -> int:
    from .corpus import dedupe, normalize_entry, read_jsonl, write_jsonl

    entries, rejects = read_jsonl(a.input, strict_alphabet=a.strict_alphabet)
    entries = [normalize_entry(e) for e in entries]
    report = None
    if not a.no_dedupe:
        entries, report = dedupe(entries, a.max_distance)
    write_jsonl(a.out, entries)
    if a.rejects:
        with open(a.rejects, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("line\treason\n")
            for r in rejects:
                fh.write(f"{r.line_no}\t{r.reason}\n")
    for r in rejects:
        log.warning("line %d rejected: %s", r.line_no, r.reason)
    dupes = f", {report.exact} exact and {report.fuzzy} near duplicates removed" if report else ""
    print(f"kept {len(entries)} entries, {len(rejects)} rejected{dupes}")
    return 0


def cmd_stats(a: argparse.Namespace) -> int:
    from .corpus import read_jsonl, stats

    entries, _ = read_jsonl(a.input)
    table = stats(entries)
    text = table.to_csv() if a.format == "csv" else table.to_markdown()
    _emit(text, a.out)
    return 0


def cmd_split(a: argparse.Namespace) -> int:
    from .corpus import SplitSpec, read_jsonl, split, write_splits

    entries, _ = read_jsonl(a.input)
    parts = split(entries, SplitSpec(seed=a.seed))
    paths = write_splits(a.out_dir, parts)
    for p, part in zip(paths, parts):
        print(f"{p}\t{len(part)}")
    return 0


def cmd_bpe(a: argparse.Namespace) -> int:
    from .corpus import read_jsonl
    from .subword import BpeModel, corpus_from_entries, train_bpe

    if a.bpe_cmd == "train":
        entries, _ = read_jsonl(a.input)
        model = train_bpe(corpus_from_entries(entries, a.with_examples), a.vocab, a.seed, a.coverage)
        model.save(a.out)
        print(f"{len(model.merges)} merges, vocabulary {len(model.vocab)}")
        return 0
    model = BpeModel.load(a.model)
    for w in a.words:
        print(w + "\t" + " ".join(model.segment(w)) + "\t" + " ".join(map(str, model.encode(w))))
    return 0


def cmd_embed(a: argparse.Namespace) -> int:
    from .corpus import read_jsonl
    from .embed import EmbeddingParams, build_training_stream, build_word_stream, train_skipgram
    from .subword import BpeModel

    entries, _ = read_jsonl(a.input)
    params = EmbeddingParams(
        kind=a.kind, dim=a.dim, window=a.window, min_count=a.min_count, epochs=a.epochs, negative=a.negative,
        n_min=a.n_min, n_max=a.n_max,
    )  # fmt: skip
    if a.kind == "wordpiece":
        if not a.bpe:
            raise UsageError("--bpe is required for wordpiece embeddings")
        stream = build_training_stream(entries, BpeModel.load(a.bpe), a.with_examples)
    else:
        stream = build_word_stream(entries, a.with_examples)
    model = train_skipgram(stream, params, a.seed)
    model.save(a.out)
    print(f"{len(model.units)} units x {model.dim}")
    return 0


def cmd_translit(a: argparse.Namespace) -> int:
    from collections import Counter

    from .corpus import read_jsonl
    from .evalharness import translit_eval
    from .pipeline import load_rule_set
    from .translit import romanize

    rules = load_rule_set(a.rules, a.exceptions)
    if a.input and a.input.endswith(".jsonl"):
        entries, _ = read_jsonl(a.input)
        s = translit_eval(rules, entries)
        _emit(
            "n,exact,cer,chrf,chrf_corpus\n"
            f"{s.n},{s.exact:.3f},{s.cer:.3f},{s.chrf:.3f},{s.chrf_corpus:.3f}\n",
            a.out,
        )
        return 0
    words = list(a.words)
    if a.input:
        words += [w.strip() for w in Path(a.input).read_text(encoding="utf-8").splitlines() if w.strip()]
    if not words:
        raise UsageError("give words to transliterate or --in FILE")
    unmapped: Counter = Counter()
    lines = []
    for w in words:
        out = romanize(w, a.romanize) if a.romanize else rules.transliterate(w, unmapped)
        lines.append(f"{w}\t{out}\n")
    _emit("".join(lines), a.out)
    if unmapped:
        log.warning("unmapped characters: %s", dict(unmapped))
    return 0


def _scorer_for(a: argparse.Namespace, method: str, query_script: str = "tajik"):
    from .fusion import FusionWeights, HybridModels
    from .pipeline import RunConfig, load_models, load_rule_set, make_scorer

    cfg = RunConfig(seed=a.seed, k1=a.k1, b=a.b)
    if method in ("ft", "w2v", "hybrid"):
        if not a.models:
            raise UsageError(f"--models DIR is required for method {method}")
        models = load_models(a.models, a.rules, a.exceptions)
    else:
        models = HybridModels(load_rule_set(a.rules, a.exceptions))
    weights = FusionWeights.load(a.weights) if getattr(a, "weights", None) else FusionWeights()
    return make_scorer(method, models, weights, a.seed, cfg, query_script)


def cmd_rank(a: argparse.Namespace) -> int:
    from .corpus import read_jsonl
    from .retrieval import Universe, build_pool, rank_with, write_pools

    lexicon, _ = read_jsonl(a.lexicon)
    queries, _ = read_jsonl(a.queries)
    universe = Universe(e.persian for e in lexicon)
    scorer = _scorer_for(a, a.method)
    pools = []
    chunks = []
    for i, e in enumerate(queries):
        pool = build_pool(e.persian, universe, a.pool, a.seed, i)
        pools.append(pool)
        rl = rank_with(scorer, e.tajik, pool, universe)
        if a.top:
            rl = type(rl)(rl.query_id, rl.items[: a.top], rl.component)
        chunks.append(rl.to_tsv(e.tajik))
    _emit("query\trank\tcandidate\tscore\tcomponent\n" + "".join(chunks), a.out)
    if a.pools_out:
        write_pools(a.pools_out, pools)
    return 0


def cmd_fusion(a: argparse.Namespace) -> int:
    if a.fusion_cmd == "rank":
        a.method = "hybrid"
        return cmd_rank(a)
    from .corpus import read_jsonl
    from .pipeline import RunConfig, load_models, tune
    from .retrieval import Universe

    lexicon, _ = read_jsonl(a.lexicon)
    dev, _ = read_jsonl(a.dev)
    models = load_models(a.models, a.rules, a.exceptions)
    cfg = RunConfig(seed=a.seed, grid_step=a.grid_step, tune_pool=a.tune_pool)
    result = tune(cfg, models, dev, Universe(e.persian for e in lexicon), None)
    meta = {"grid_step": a.grid_step, "tune_pool": a.tune_pool, "dev_mrr": result.mrr, "corner_mrr": result.corner_mrr}
    result.weights.save(a.out, meta)
    if a.log:
        Path(a.log).write_text("\n".join(result.log_lines()) + "\n", encoding="utf-8")
    print(json.dumps({"weights": result.weights.to_dict(), "dev_mrr": result.mrr}, sort_keys=True))
    return 0


def _config_from(a: argparse.Namespace):
    from .pipeline import RunConfig

    return RunConfig(
        seed=a.seed, regime=a.regime, pool_size=a.pool or 0, rules=a.rules, exceptions=a.exceptions, bootstrap=a.bootstrap, k1=a.k1, b=a.b
    )


def _write_reports(reports, a: argparse.Namespace) -> None:
    from .evalharness import emit_efficiency, emit_report

    text = emit_report(reports, a.format, a.out)
    if not a.out:
        sys.stdout.write(text)
    if a.efficiency:
        emit_efficiency(reports, "csv", a.efficiency)


def cmd_eval(a: argparse.Namespace) -> int:
    from .pipeline import run_saved_eval

    cfg = _config_from(a)
    report, _ = run_saved_eval(a.lexicon, a.queries, a.models or ".", a.method, a.weights, cfg, jobs=a.jobs)
    _write_reports([report], a)
    log.info("%s: %.1f s, peak %.1f MB", a.method, report.seconds, report.peak_mb)
    return 0


def cmd_ocr(a: argparse.Namespace) -> int:
    from .corpus import read_jsonl
    from .evalharness import OcrSample, corrupt_many, subsample

    if a.ocr_cmd == "sim":
        entries, _ = read_jsonl(a.input)
        words = subsample([e.persian for e in entries], a.sample, a.seed)
        samples, stats = corrupt_many(words, a.p_word, a.p_char, (), a.seed)
        with open(a.out, "w", encoding="utf-8", newline="\n") as fh:
            for s in samples:
                fh.write(s.to_json() + "\n")
        print(
            f"{stats.words} words, selected rate {stats.selected_rate:.4f}, "
            f"edited-word rate {stats.effective_rate:.4f}, char edit rate {stats.char_edit_rate:.4f}"
        )
        return 0
    from .pipeline import run_saved_eval

    with open(a.samples, encoding="utf-8") as fh:
        samples = [OcrSample.from_json(line) for line in fh if line.strip()]
    cfg = _config_from(a)
    report, _ = run_saved_eval(a.lexicon, None, a.models or ".", a.method, a.weights, cfg, "ocr", samples, a.jobs)
    _write_reports([report], a)
    return 0


def cmd_metrics(a: argparse.Namespace) -> int:
    import csv
    import io

    from .strmetrics import cer, chrf, chrf_corpus, levenshtein

    if a.pairs:
        rows = [line.rstrip("\n").split("\t") for line in open(a.pairs, encoding="utf-8") if line.strip()]
    elif a.hyp or a.ref:
        rows = [[a.hyp, a.ref]]
    else:
        raise UsageError("give --pairs FILE or --hyp/--ref")
    hyps = [r[0] for r in rows]
    refs = [r[1] if len(r) > 1 else "" for r in rows]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["hyp", "ref", "levenshtein", "cer", "chrf"])
    cers, chrfs = [], []
    for h, r in zip(hyps, refs):
        cers.append(cer(h, r))
        chrfs.append(chrf(h, r))
        w.writerow([h, r, levenshtein(h, r), f"{cers[-1]:.4f}", f"{chrfs[-1]:.4f}"])
    w.writerow(["macro", "", "", f"{sum(cers) / len(cers):.4f}", f"{sum(chrfs) / len(chrfs):.4f}"])
    corpus_cer = sum(levenshtein(h, r) for h, r in zip(hyps, refs)) / max(1, sum(len(r) for r in refs))
    w.writerow(["corpus", "", "", f"{corpus_cer:.4f}", f"{chrf_corpus(hyps, refs):.4f}"])
    _emit(buf.getvalue(), a.out)
    return 0


def cmd_reproduce(a: argparse.Namespace) -> int:
    from .pipeline import RunConfig, reproduce

    values = {f.name: getattr(a, f.name) for f in fields(RunConfig) if hasattr(a, f.name)}
    cfg = RunConfig(**values)
    status, out = reproduce(cfg, progress=lambda msg: log.info(msg))
    print(f"artifacts in {out} (exit {status})")
    return status


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Formatter(argparse.ArgumentDefaultsHelpFormatter, argparse.RawDescriptionHelpFormatter):
    pass


def _common_eval_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lexicon", required=True, help="JSONL whose Persian forms make up the candidate universe")
    p.add_argument("--models", help="directory holding bpe.model, w2v.vec and ft.vec")
    p.add_argument("--weights", help="fusion weights JSON (default: initial weights 0.4/0.3/0.2/0.1)")
    p.add_argument("--rules", default="", help="rule TSV or synthetic truth JSON; empty uses the shipped tables")
    p.add_argument("--exceptions", default="", help="exception TSV for --rules")
    p.add_argument("--seed", type=int, default=42, help="run seed (reference setting)")
    p.add_argument("--k1", type=float, default=1.5, help="BM25 term saturation (reference setting)")
    p.add_argument("--b", type=float, default=0.75, help="BM25 length normalization (reference setting)")


def build_parser() -> argparse.ArgumentParser:
    from .evalharness import REGIMES
    from .pipeline import METHODS, OCR_METHODS, RunConfig

    parser = argparse.ArgumentParser(prog="lexbridge", description=__doc__, formatter_class=_Formatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="key = value file supplying option defaults")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, helptext: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, help=helptext, description=helptext, formatter_class=_Formatter)

    p = add("synth", "generate a synthetic lexicon with a known mapping")
    sp = p.add_subparsers(dest="synth_cmd", required=True)
    g = sp.add_parser("gen", formatter_class=_Formatter, help="write pairs and ground truth")
    g.add_argument("--n", type=int, default=10_000, help="number of pairs")
    g.add_argument("--noise", type=float, default=0.0, help="per-character substitution rate on the target side")
    g.add_argument("--exceptions", type=float, default=0.0, help="fraction of pairs replaced by random exceptions")
    g.add_argument("--min-len", type=int, default=3, help="shortest source word")
    g.add_argument("--max-len", type=int, default=9, help="longest source word")
    g.add_argument("--seed", type=int, default=7, help="generator seed")
    g.add_argument("--out", required=True, help="output JSONL")
    g.add_argument("--truth", help="ground-truth JSON")
    g.add_argument("--rules-out", help="also write the mapping as a rule TSV")
    g.add_argument("--exceptions-out", help="exception TSV written next to --rules-out")
    g.set_defaults(func=cmd_synth)

    p = add("ingest", "validate, normalize and deduplicate a JSONL lexicon")
    p.add_argument("--in", dest="input", required=True, help="raw JSONL")
    p.add_argument("--out", required=True, help="clean JSONL")
    p.add_argument("--rejects", help="TSV of rejected lines")
    p.add_argument("--no-dedupe", action="store_true", help="keep duplicates")
    p.add_argument("--max-distance", type=int, default=1, help="largest edit distance treated as a near duplicate")
    p.add_argument("--strict-alphabet", action="store_true", help="reject forms with characters outside the script")
    p.set_defaults(func=cmd_ingest)

    p = add("stats", "dataset statistics table")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=("csv", "markdown"), default="markdown")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = add("split", "stratified 80/10/10 split")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=42, help="split seed (reference setting)")
    p.set_defaults(func=cmd_split)

    p = add("bpe", "train or apply the joint BPE model")
    sp = p.add_subparsers(dest="bpe_cmd", required=True)
    t = sp.add_parser("train", formatter_class=_Formatter, help="learn merges")
    t.add_argument("--in", dest="input", required=True, help="training JSONL")
    t.add_argument("--vocab", type=int, default=2000, help="target vocabulary size (reference setting)")
    t.add_argument("--coverage", type=float, default=0.9995, help="character coverage of the base alphabet")
    t.add_argument("--seed", type=int, default=42, help="recorded in the model header")
    t.add_argument("--with-examples", action="store_true", help="also train on usage examples")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_bpe)
    e = sp.add_parser("encode", formatter_class=_Formatter, help="segment words")
    e.add_argument("--model", required=True)
    e.add_argument("words", nargs="+")
    e.set_defaults(func=cmd_bpe)

    p = add("embed", "train skip-gram subword embeddings")
    p.add_argument("--in", dest="input", required=True, help="training JSONL")
    p.add_argument("--kind", choices=("wordpiece", "char-ngram"), default="wordpiece")
    p.add_argument("--bpe", help="BPE model (wordpiece kind)")
    p.add_argument("--dim", type=int, default=200, help="vector size (reference setting)")
    p.add_argument("--window", type=int, default=5, help="context window (reference setting)")
    p.add_argument("--min-count", type=int, default=2, help="minimum unit frequency (reference setting)")
    p.add_argument("--epochs", type=int, default=10, help="training epochs (reference setting)")
    p.add_argument("--negative", type=int, default=5, help="negative samples per positive")
    p.add_argument("--n-min", type=int, default=3, help="shortest character n-gram (reference setting)")
    p.add_argument("--n-max", type=int, default=6, help="longest character n-gram (reference setting)")
    p.add_argument("--with-examples", action="store_true")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = add("translit", "transliterate words or score a lexicon")
    p.add_argument("words", nargs="*")
    p.add_argument("--in", dest="input", help="words file (one per line), or a .jsonl lexicon to score with CER and chrF")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--rules", default="", help="rule TSV or synthetic truth JSON")
    p.add_argument("--exceptions", default="")
    p.add_argument("--romanize", choices=("tajik", "persian"), help="print the Latin pivot instead")
    p.set_defaults(func=cmd_translit)

    p = add("rank", "rank per-query pools with one method; TSV output")
    p.add_argument("--method", choices=METHODS, default="rule")
    p.add_argument("--queries", required=True, help="JSONL of query pairs")
    p.add_argument("--pool", type=int, default=1000, help="distractors per query (reference setting)")
    p.add_argument("--top", type=int, default=0, help="keep only the first N rows per query (0 = all)")
    p.add_argument("--out")
    p.add_argument("--pools-out", help="write the pools as JSONL for audit")
    _common_eval_args(p)
    p.set_defaults(func=cmd_rank)

    p = add("fusion", "tune fusion weights or rank with the hybrid")
    sp = p.add_subparsers(dest="fusion_cmd", required=True)
    t = sp.add_parser("tune", formatter_class=_Formatter, help="grid search on the dev set")
    t.add_argument("--dev", required=True, help="dev JSONL")
    t.add_argument("--grid-step", type=float, default=0.05)
    t.add_argument("--tune-pool", type=int, default=100, help="distractors per dev query while tuning")
    t.add_argument("--out", required=True, help="weights JSON")
    t.add_argument("--log", help="TSV with the MRR of every grid point")
    _common_eval_args(t)
    t.set_defaults(func=cmd_fusion)
    r = sp.add_parser("rank", formatter_class=_Formatter, help="hybrid ranking, TSV output")
    r.add_argument("--queries", required=True)
    r.add_argument("--pool", type=int, default=1000)
    r.add_argument("--top", type=int, default=0)
    r.add_argument("--out")
    r.add_argument("--pools-out")
    _common_eval_args(r)
    r.set_defaults(func=cmd_fusion)

    def eval_outputs(q: argparse.ArgumentParser) -> None:
        q.add_argument("--regime", choices=sorted(REGIMES), default="primary", help="1,000 or 3,000 distractors")
        q.add_argument("--pool", type=int, default=0, help="override the regime pool size")
        q.add_argument("--bootstrap", type=int, default=1000, help="bootstrap iterations (reference setting)")
        q.add_argument("--format", choices=("csv", "markdown", "json"), default="csv")
        q.add_argument("--out", help="report file (default: stdout)")
        q.add_argument("--efficiency", help="also write wall-clock and peak memory CSV")
        q.add_argument("--jobs", type=int, default=1, help="worker processes; timings are then not single-threaded")

    p = add("eval", "evaluate one method on per-query pools")
    sp = p.add_subparsers(dest="eval_cmd", required=True)
    r = sp.add_parser("run", formatter_class=_Formatter, help="retrieval evaluation")
    r.add_argument("--method", choices=METHODS, default="hybrid")
    r.add_argument("--queries", required=True, help="JSONL of test pairs")
    eval_outputs(r)
    _common_eval_args(r)
    r.set_defaults(func=cmd_eval)

    p = add("ocr", "simulate OCR noise or evaluate post-correction")
    sp = p.add_subparsers(dest="ocr_cmd", required=True)
    s = sp.add_parser("sim", formatter_class=_Formatter, help="corrupt Persian forms")
    s.add_argument("--in", dest="input", required=True, help="JSONL whose Persian forms are corrupted")
    s.add_argument("--p-word", type=float, default=0.30, help="word selection probability (reference setting)")
    s.add_argument("--p-char", type=float, default=0.20, help="per-character edit probability (reference setting)")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--sample", type=int, default=0, help="corrupt only this many words, drawn with the seed (0 = all)")
    s.add_argument("--out", required=True, help="JSONL of corruption samples")
    s.set_defaults(func=cmd_ocr)
    r = sp.add_parser("eval", formatter_class=_Formatter, help="rank clean candidates for corrupted forms")
    r.add_argument("--method", choices=METHODS, default="hybrid")
    r.add_argument("--samples", required=True, help="JSONL from 'ocr sim'")
    eval_outputs(r)
    _common_eval_args(r)
    r.set_defaults(func=cmd_ocr)

    p = add("metrics", "Levenshtein, CER and chrF for string pairs")
    p.add_argument("--hyp", default="")
    p.add_argument("--ref", default="")
    p.add_argument("--pairs", help="TSV of hypothesis<TAB>reference lines")
    p.add_argument("--out", help="CSV with per-pair rows plus macro and corpus rows (default: stdout)")
    p.set_defaults(func=cmd_metrics)

    p = add("reproduce", "run the whole pipeline into one artifact directory")
    defaults = RunConfig()
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        value = getattr(defaults, f.name)
        if f.name == "dataset":
            p.add_argument(flag, default="", help="lexicon JSONL (real or synthetic)")
        elif isinstance(value, bool):
            p.add_argument(flag, action="store_true", help=_REPRODUCE_HELP.get(f.name, f.name.replace("_", " ")))
        else:
            p.add_argument(flag, type=type(value), default=value, help=_REPRODUCE_HELP.get(f.name, f.name.replace("_", " ")))
    p.set_defaults(func=cmd_reproduce)
    return parser


_REPRODUCE_HELP = {
    "seed": "seed for splits, training, pools, bootstrap and OCR noise (reference setting)",
    "pool_size": "distractors per query; 0 uses the regime size (1,000 primary, 3,000 stress)",
    "bpe_vocab": "BPE vocabulary size (reference setting)",
    "dim": "embedding size (reference setting)",
    "window": "skip-gram window (reference setting)",
    "min_count": "minimum unit frequency (reference setting)",
    "epochs": "embedding epochs (reference setting)",
    "k1": "BM25 term saturation (reference setting)",
    "b": "BM25 length normalization (reference setting)",
    "p_word": "OCR word selection probability (reference setting)",
    "p_char": "OCR per-character edit probability (reference setting)",
    "bootstrap": "bootstrap iterations (reference setting)",
    "tune_pool": "distractors per dev query during weight tuning",
    "ocr_sample": "OCR words drawn from the evaluation split; 0 uses all of them",
    "grid_step": "simplex grid step for weight tuning",
    "regime": "evaluation regime: primary (1,000 distractors) or stress (3,000) (reference setting)",
    "out_dir": "artifact directory; created if missing",
    "rules": "grapheme rule table (.tsv or synthetic truth .json); empty uses the shipped table",
    "exceptions": "exception table (.tsv) used with a --rules TSV; ignored otherwise",
    "character_coverage": "share of character occurrences kept as BPE base symbols; rarer ones become UNK",
    "negative": "negative samples per skip-gram pair",
    "n_min": "shortest character n-gram for the char-ngram model",
    "n_max": "longest character n-gram for the char-ngram model",
    "methods": "comma-separated retrieval methods to evaluate",
    "ocr_methods": "comma-separated methods for OCR post-correction",
    "eval_split": "split whose queries are evaluated (dev or test)",
    "include_examples": "also train BPE and embeddings on usage examples",
}


def _apply_config(parser: argparse.ArgumentParser, config: dict[str, str]) -> None:
    """Install config values as defaults on every (sub)parser that knows them."""
    stack = [parser]
    while stack:
        p = stack.pop()
        known = {a.dest: a for a in p._actions}
        updates = {}
        for key, value in config.items():
            action = known.get(key)
            if action is None:
                continue
            if isinstance(action, argparse._StoreTrueAction):
                updates[key] = value.lower() in ("1", "true", "yes", "on")
            else:
                updates[key] = value  # argparse converts string defaults with the option type
        p.set_defaults(**updates)
        for a in p._actions:
            if isinstance(a, argparse._SubParsersAction):
                stack.extend(a.choices.values())


def _known_dests(parser: argparse.ArgumentParser) -> set[str]:
    dests, stack = set(), [parser]
    while stack:
        p = stack.pop()
        for a in p._actions:
            dests.add(a.dest)
            if isinstance(a, argparse._SubParsersAction):
                stack.extend(a.choices.values())
    return dests


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        if known.config:
            config = read_config(known.config)
            unknown = set(config) - _known_dests(parser)
            if unknown:
                raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
            _apply_config(parser, config)
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s"
        )
        if args.command == "reproduce" and (not args.dataset or not Path(args.dataset).is_file()):
            raise UsageError(f"dataset not found: {args.dataset!r}")
        return int(args.func(args) or 0)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"lexbridge: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError) as exc:
        print(f"lexbridge: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
