from __future__ import annotations

import csv
import io
import json

import pytest

from lexbridge.cli import main, read_config, UsageError
from lexbridge.corpus import read_jsonl


def run(capsys, *argv: str) -> tuple[int, str, str]:
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """A small synthetic corpus with trained models, built once through the CLI."""
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth", "gen", "--n", "300", "--seed", "4", "--out", str(d / "lex.jsonl"), "--truth", str(d / "truth.json"),
                 "--rules-out", str(d / "rules.tsv"), "--exceptions-out", str(d / "exc.tsv")]) == 0  # fmt: skip
    assert main(["split", "--in", str(d / "lex.jsonl"), "--out-dir", str(d / "splits")]) == 0
    models = d / "models"
    models.mkdir()
    train = str(d / "splits" / "train.jsonl")
    assert main(["bpe", "train", "--in", train, "--vocab", "80", "--out", str(models / "bpe.model")]) == 0
    small = ["--dim", "8", "--epochs", "1", "--min-count", "1"]
    assert main(["embed", "--in", train, "--kind", "wordpiece", "--bpe", str(models / "bpe.model"), *small, "--out", str(models / "w2v.vec")]) == 0
    assert main(["embed", "--in", train, "--kind", "char-ngram", *small, "--out", str(models / "ft.vec")]) == 0
    return d


def test_help_lists_reference_defaults(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["reproduce", "--help"])
    assert exc.value.code == 0
    text = " ".join(capsys.readouterr().out.split())
    for needle in ("default: 42", "default: 2000", "default: 200", "default: 1.5", "default: 0.75", "default: 0.3", "reference setting"):
        assert needle in text


def test_every_subcommand_has_help(capsys):
    for cmd in ("ingest", "stats", "split", "bpe", "embed", "translit", "rank", "fusion", "eval", "ocr", "synth", "metrics", "reproduce"):
        with pytest.raises(SystemExit) as exc:
            main([cmd, "--help"])
        assert exc.value.code == 0
    capsys.readouterr()


def test_synth_and_split_outputs(workdir):
    entries, rejects = read_jsonl(workdir / "lex.jsonl")
    assert len(entries) == 300 and not rejects
    sizes = [len(read_jsonl(workdir / "splits" / f"{p}.jsonl")[0]) for p in ("train", "dev", "test")]
    assert sum(sizes) == 300 and sizes[1] == sizes[2] and 236 <= sizes[0] <= 244
    assert (workdir / "rules.tsv").read_text(encoding="utf-8").strip()


def test_ingest_and_stats(capsys, tmp_path, workdir):
    raw = (workdir / "lex.jsonl").read_text(encoding="utf-8")
    first = raw.splitlines()[0]
    (tmp_path / "raw.jsonl").write_text(raw + first + "\nnot json\n", encoding="utf-8")
    code, out, _ = run(capsys, "ingest", "--in", tmp_path / "raw.jsonl", "--out", tmp_path / "clean.jsonl", "--rejects", tmp_path / "rej.tsv")
    assert code == 0 and "kept 300 entries, 1 rejected" in out
    assert len((tmp_path / "rej.tsv").read_text(encoding="utf-8").splitlines()) == 2
    code, out, _ = run(capsys, "stats", "--in", tmp_path / "clean.jsonl", "--format", "csv")
    assert code == 0 and "300" in out


def test_translit_words_and_scoring(capsys, tmp_path, workdir):
    entries, _ = read_jsonl(workdir / "lex.jsonl")
    code, out, _ = run(capsys, "translit", "--rules", workdir / "truth.json", entries[0].tajik)
    assert code == 0 and out == f"{entries[0].tajik}\t{entries[0].persian}\n"
    code, out, _ = run(capsys, "translit", "--rules", workdir / "rules.tsv", "--exceptions", workdir / "exc.tsv", "--in", workdir / "lex.jsonl")
    assert code == 0
    row = next(csv.DictReader(io.StringIO(out)))
    assert row["n"] == "300" and float(row["exact"]) == 1.0 and float(row["cer"]) == 0.0
    code, out, _ = run(capsys, "translit", "--romanize", "tajik", "салом")
    assert code == 0 and out.startswith("салом\t")
    assert run(capsys, "translit")[0] == 2


def test_bpe_encode(capsys, workdir):
    code, out, _ = run(capsys, "bpe", "encode", "--model", workdir / "models" / "bpe.model", "абв")
    assert code == 0 and out.startswith("абв\t")


def test_rank_rule_puts_gold_first(capsys, tmp_path, workdir):
    lex, dev = workdir / "lex.jsonl", workdir / "splits" / "dev.jsonl"
    code, out, _ = run(capsys, "rank", "--lexicon", lex, "--queries", dev, "--method", "rule", "--rules", workdir / "truth.json",
                       "--pool", "20", "--top", "1", "--pools-out", tmp_path / "pools.jsonl")  # fmt: skip
    assert code == 0
    entries, _ = read_jsonl(dev)
    rows = [line.split("\t") for line in out.splitlines()[1:]]
    assert [r[2] for r in rows] == [e.persian for e in entries]
    assert len((tmp_path / "pools.jsonl").read_text(encoding="utf-8").splitlines()) == len(entries)


def test_fusion_tune_then_eval(capsys, tmp_path, workdir):
    common = ["--lexicon", workdir / "lex.jsonl", "--models", workdir / "models", "--rules", workdir / "truth.json"]
    code, out, _ = run(capsys, "fusion", "tune", "--dev", workdir / "splits" / "dev.jsonl", "--tune-pool", "20", "--grid-step", "0.25",
                       "--out", tmp_path / "w.json", "--log", tmp_path / "log.tsv", *common)  # fmt: skip
    assert code == 0 and json.loads(out)["dev_mrr"] == 1.0
    assert len((tmp_path / "log.tsv").read_text(encoding="utf-8").splitlines()) == 35
    code, out, _ = run(capsys, "eval", "run", "--queries", workdir / "splits" / "test.jsonl", "--pool", "50", "--bootstrap", "50",
                       "--weights", tmp_path / "w.json", "--efficiency", tmp_path / "eff.csv", *common)  # fmt: skip
    assert code == 0
    row = next(csv.DictReader(io.StringIO(out)))
    assert row["method"] == "hybrid" and float(row["acc1"]) == 1.0
    assert (tmp_path / "eff.csv").read_text(encoding="utf-8").startswith("method")
    code, out, _ = run(capsys, "fusion", "rank", "--queries", workdir / "splits" / "test.jsonl", "--pool", "10", "--top", "2", *common)
    n_test = len(read_jsonl(workdir / "splits" / "test.jsonl")[0])
    assert code == 0 and len(out.splitlines()) == 1 + 2 * n_test


def test_ocr_sim_and_eval(capsys, tmp_path, workdir):
    code, out, _ = run(capsys, "ocr", "sim", "--in", workdir / "lex.jsonl", "--out", tmp_path / "s.jsonl", "--seed", "1")
    assert code == 0 and "300 words" in out
    code, out, _ = run(capsys, "ocr", "eval", "--samples", tmp_path / "s.jsonl", "--lexicon", workdir / "lex.jsonl", "--method", "edit",
                       "--pool", "30", "--bootstrap", "20", "--format", "json")  # fmt: skip
    assert code == 0
    report = json.loads(out)[0]
    assert report["n"] == 300 and report["method"] == "edit" and 0.9 <= report["acc1"] <= 1.0


def test_metrics_rows(capsys, tmp_path):
    code, out, _ = run(capsys, "metrics", "--hyp", "kitten", "--ref", "sitting")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["hyp", "ref", "levenshtein", "cer", "chrf"]
    assert rows[1][:4] == ["kitten", "sitting", "3", "0.4286"]
    assert rows[2][0] == "macro" and rows[3][0] == "corpus"
    (tmp_path / "p.tsv").write_text("ab\tab\nab\tabcd\n", encoding="utf-8")
    run(capsys, "metrics", "--pairs", tmp_path / "p.tsv", "--out", tmp_path / "m.csv")
    rows = list(csv.reader(open(tmp_path / "m.csv", encoding="utf-8")))
    assert rows[3][:4] == ["macro", "", "", "0.2500"] and rows[4][3] == f"{2 / 6:.4f}"
    assert run(capsys, "metrics")[0] == 2


def test_reproduce_missing_dataset_is_usage_error(capsys, tmp_path):
    out_dir = tmp_path / "run"
    code, _, err = run(capsys, "reproduce", "--dataset", tmp_path / "nope.jsonl", "--out-dir", out_dir)
    assert code == 2 and "dataset not found" in err
    assert not out_dir.exists()


def test_config_file_supplies_defaults_and_flags_win(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nhyp = abc\nref=abd\n", encoding="utf-8")
    code, out, _ = run(capsys, "--config", cfg, "metrics")
    assert code == 0 and "abc,abd,1" in out
    code, out, _ = run(capsys, "--config", cfg, "metrics", "--hyp", "abd")
    assert "abd,abd,0" in out
    cfg.write_text("bogus_key = 1\n", encoding="utf-8")
    assert run(capsys, "--config", cfg, "metrics")[0] == 2
    cfg.write_text("no separator\n", encoding="utf-8")
    with pytest.raises(UsageError):
        read_config(cfg)


def test_contract_violations_exit_nonzero(capsys, tmp_path):
    assert run(capsys, "stats", "--in", tmp_path / "missing.jsonl")[0] == 1
    assert run(capsys, "embed", "--in", tmp_path / "missing.jsonl", "--kind", "wordpiece", "--out", tmp_path / "x")[0] != 0
    with pytest.raises(SystemExit) as exc:
        main(["eval", "run", "--queries", "q", "--lexicon", "l", "--method", "nope"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_ocr_sim_subsample(capsys, tmp_path, workdir):
    code, out, _ = run(capsys, "ocr", "sim", "--in", workdir / "lex.jsonl", "--out", tmp_path / "s.jsonl", "--sample", "40")
    assert code == 0 and "40 words" in out
    assert len((tmp_path / "s.jsonl").read_text(encoding="utf-8").splitlines()) == 40
