"""Lexicon ingestion: JSONL parsing, normalization, deduplication, splits, statistics."""

from __future__ import annotations

import hashlib
import json
import logging
import random
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from ._data import data_path, read_pairs, read_tsv
from .strmetrics import levenshtein

log = logging.getLogger(__name__)

UNCLASSIFIED = "unclassified"
ALWAYS_ALLOWED = frozenset(" -'‌")


@lru_cache(maxsize=None)
def pos_labels() -> tuple[str, ...]:
    """Closed part-of-speech inventory, in table order."""
    rows, _ = read_tsv(data_path("pos_labels.tsv"))
    return tuple(r[0] for r in rows)


@lru_cache(maxsize=None)
def alphabets() -> dict[str, frozenset[str]]:
    rows, _ = read_tsv(data_path("alphabets.tsv"))
    return {script: frozenset(chars) | ALWAYS_ALLOWED for script, chars in rows}


@dataclass(frozen=True)
class LexiconEntry:
    tajik: str
    persian: str
    part_of_speech: str = UNCLASSIFIED
    examples: tuple[str, ...] = ()
    queried_word: str | None = None

    def to_dict(self) -> dict:
        d = {
            "tajik": self.tajik,
            "persian": self.persian,
            "part_of_speech": self.part_of_speech,
            "examples": list(self.examples),
        }
        if self.queried_word is not None:
            d["_queried_word"] = self.queried_word
        return d


def entry_issues(entry: LexiconEntry) -> list[str]:
    """Alphabet and emptiness violations of an entry (empty list when clean)."""
    issues = []
    abc = alphabets()
    for name, script in (("tajik", "tajik"), ("persian", "persian")):
        value = getattr(entry, name)
        if not value.strip():
            issues.append(f"empty field {name}")
            continue
        bad = sorted({c for c in value if c not in abc[script]})
        if bad:
            issues.append(f"{name} has characters outside the {script} alphabet: {''.join(bad)!r}")
    return issues


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Reject:
    line_no: int
    reason: str
    raw: str


class CorpusDecodeError(ValueError):
    """Input is not valid UTF-8."""


def _entry_from_obj(obj: object, labels: frozenset[str]) -> LexiconEntry | str:
    if not isinstance(obj, dict):
        return "record is not a JSON object"
    for name in ("tajik", "persian"):
        if name not in obj:
            return f"missing field {name}"
        if not isinstance(obj[name], str):
            return f"field {name} is not a string"
        if not obj[name].strip():
            return f"empty field {name}"
    examples = obj.get("examples") or []
    if not isinstance(examples, list) or not all(isinstance(x, str) for x in examples):
        return "examples must be a list of strings"
    pos = obj.get("part_of_speech")
    if not isinstance(pos, str) or pos not in labels:
        pos = UNCLASSIFIED
    queried = obj.get("_queried_word")
    if queried is not None and not isinstance(queried, str):
        return "_queried_word is not a string"
    return LexiconEntry(obj["tajik"], obj["persian"], pos, tuple(examples), queried)


def parse_jsonl(
    data: bytes, *, labels: Iterable[str] | None = None, strict_alphabet: bool = False
) -> tuple[list[LexiconEntry], list[Reject]]:
    """Parse JSONL bytes into entries and rejects (line numbers are 1-based).

    Malformed lines are rejected, never fatal. Non-UTF-8 input raises
    :class:`CorpusDecodeError`. With ``strict_alphabet`` entries containing
    characters outside the configured script alphabets are rejected too.
    Records are separated by ``\n`` only, so a raw U+2028 inside a JSON
    string stays part of its record.
    """
    return _parse_lines(iter(data.split(b"\n")), labels, strict_alphabet)


def _iter_records(
    lines: Iterator[bytes], labels: Iterable[str] | None, strict_alphabet: bool
) -> Iterator[LexiconEntry | Reject]:
    label_set = frozenset(labels if labels is not None else pos_labels())
    for line_no, raw in enumerate(lines, 1):
        try:
            line = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorpusDecodeError(f"line {line_no} is not valid UTF-8: {exc}") from exc
        if line_no == 1:
            line = line.removeprefix("\ufeff")
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            yield Reject(line_no, f"invalid JSON: {exc.msg}", line)
            continue
        result = _entry_from_obj(obj, label_set)
        if isinstance(result, str):
            yield Reject(line_no, result, line)
            continue
        if strict_alphabet:
            issues = entry_issues(result)
            if issues:
                yield Reject(line_no, "; ".join(issues), line)
                continue
        yield result


def _parse_lines(
    lines: Iterator[bytes], labels: Iterable[str] | None, strict_alphabet: bool
) -> tuple[list[LexiconEntry], list[Reject]]:
    entries: list[LexiconEntry] = []
    rejects: list[Reject] = []
    for rec in _iter_records(lines, labels, strict_alphabet):
        (rejects if isinstance(rec, Reject) else entries).append(rec)
    for r in rejects:
        log.warning("rejected line %d: %s", r.line_no, r.reason)
    return entries, rejects


def iter_jsonl(
    path: str | Path, *, labels: Iterable[str] | None = None, strict_alphabet: bool = False
) -> Iterator[LexiconEntry]:
    """Entries of a JSONL file one at a time; rejected lines are logged and
    skipped."""
    with open(path, "rb") as fh:
        for rec in _iter_records(iter(fh), labels, strict_alphabet):
            if isinstance(rec, Reject):
                log.warning("rejected line %d: %s", rec.line_no, rec.reason)
            else:
                yield rec


def serialize_jsonl(entries: Iterable[LexiconEntry]) -> bytes:
    lines = (json.dumps(e.to_dict(), ensure_ascii=False) for e in entries)
    return "".join(line + "\n" for line in lines).encode("utf-8")


def read_jsonl(
    path: str | Path, *, labels: Iterable[str] | None = None, strict_alphabet: bool = False
) -> tuple[list[LexiconEntry], list[Reject]]:
    """:func:`parse_jsonl` over a file, read line by line."""
    with open(path, "rb") as fh:
        return _parse_lines(iter(fh), labels, strict_alphabet)


def write_jsonl(path: str | Path, entries: Iterable[LexiconEntry]) -> None:
    Path(path).write_bytes(serialize_jsonl(entries))


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


def _load_folds(name: str) -> dict[str, str]:
    return dict(read_pairs(data_path(name)))


@dataclass(frozen=True)
class NormalizationPolicy:
    """Character folds applied after NFC.

    ``tajik_folds`` (ё -> е by default) is applied only when ``fold_yo`` is on.
    """

    fold_yo: bool = True
    tajik_folds: dict[str, str] = field(default_factory=lambda: _load_folds("fold_tajik.tsv"))
    persian_folds: dict[str, str] = field(default_factory=lambda: _load_folds("fold_persian.tsv"))

    @classmethod
    def from_files(cls, tajik: str | Path | None = None, persian: str | Path | None = None, fold_yo: bool = True):
        kwargs = {}
        if tajik is not None:
            kwargs["tajik_folds"] = dict(read_pairs(tajik))
        if persian is not None:
            kwargs["persian_folds"] = dict(read_pairs(persian))
        return cls(fold_yo=fold_yo, **kwargs)


def _apply_folds(text: str, folds: dict[str, str]) -> str:
    if not folds:
        return text
    return "".join(folds.get(c, c) for c in text)


def normalize_text(text: str, folds: dict[str, str] | None = None) -> str:
    text = unicodedata.normalize("NFC", text)
    if folds:
        text = unicodedata.normalize("NFC", _apply_folds(text, folds))
    return " ".join(text.split())


def normalize_tajik(text: str, policy: NormalizationPolicy | None = None) -> str:
    policy = policy or default_policy()
    return normalize_text(text, policy.tajik_folds if policy.fold_yo else None)


def normalize_persian(text: str, policy: NormalizationPolicy | None = None) -> str:
    policy = policy or default_policy()
    return normalize_text(text, policy.persian_folds)


@lru_cache(maxsize=None)
def default_policy() -> NormalizationPolicy:
    return NormalizationPolicy()


def normalize_entry(entry: LexiconEntry, policy: NormalizationPolicy | None = None) -> LexiconEntry:
    policy = policy or default_policy()
    queried = entry.queried_word
    return replace(
        entry,
        tajik=normalize_tajik(entry.tajik, policy),
        persian=normalize_persian(entry.persian, policy),
        examples=tuple(normalize_text(x) for x in entry.examples),
        queried_word=None if queried is None else normalize_tajik(queried, policy),
    )


# ---------------------------------------------------------------------------
# Deduplication
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Removal:
    index: int  # position in the input list
    kept_index: int  # the surviving entry it duplicates
    reason: str  # "exact" or "fuzzy"
    distance: int


@dataclass
class DedupeReport:
    removals: list[Removal] = field(default_factory=list)

    @property
    def exact(self) -> int:
        return sum(r.reason == "exact" for r in self.removals)

    @property
    def fuzzy(self) -> int:
        return sum(r.reason == "fuzzy" for r in self.removals)


def dedupe(entries: Sequence[LexiconEntry], max_distance: int = 1) -> tuple[list[LexiconEntry], DedupeReport]:
    """Drop exact (tajik, persian) duplicates, then near-duplicate Persian forms
    (Levenshtein distance <= ``max_distance``) under an identical Tajik headword.
    The first occurrence always survives."""
    report = DedupeReport()
    seen: dict[tuple[str, str], int] = {}
    survivors: list[int] = []
    for i, e in enumerate(entries):
        key = (e.tajik, e.persian)
        if key in seen:
            report.removals.append(Removal(i, seen[key], "exact", 0))
        else:
            seen[key] = i
            survivors.append(i)

    kept_by_tajik: dict[str, list[int]] = defaultdict(list)
    kept: list[int] = []
    for i in survivors:
        e = entries[i]
        for j in kept_by_tajik[e.tajik]:
            d = levenshtein(entries[j].persian, e.persian)
            if d <= max_distance:
                report.removals.append(Removal(i, j, "fuzzy", d))
                break
        else:
            kept_by_tajik[e.tajik].append(i)
            kept.append(i)
    report.removals.sort(key=lambda r: r.index)
    return [entries[i] for i in kept], report


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------

SPLIT_NAMES = ("train", "dev", "test")


@dataclass(frozen=True)
class SplitSpec:
    train_ratio: Fraction = Fraction(8, 10)
    dev_ratio: Fraction = Fraction(1, 10)
    test_ratio: Fraction = Fraction(1, 10)
    seed: int = 42
    stratify_key: str = "part_of_speech"

    def __post_init__(self) -> None:
        ratios = []
        for name in ("train_ratio", "dev_ratio", "test_ratio"):
            value = Fraction(getattr(self, name)).limit_denominator(10**9)
            object.__setattr__(self, name, value)
            ratios.append(value)
        if any(r <= 0 for r in ratios):
            raise ValueError("split ratios must be positive")
        if sum(ratios) != 1:
            raise ValueError(f"split ratios must sum to 1, got {sum(ratios)}")

    @property
    def ratios(self) -> tuple[Fraction, Fraction, Fraction]:
        return (self.train_ratio, self.dev_ratio, self.test_ratio)


def largest_remainder(total: int, ratios: Sequence[Fraction]) -> list[int]:
    quotas = [total * r for r in ratios]
    counts = [int(q) for q in quotas]
    order = sorted(range(len(ratios)), key=lambda k: (-(quotas[k] - counts[k]), k))
    for k in order[: total - sum(counts)]:
        counts[k] += 1
    return counts


def derive_seed(*parts: object) -> int:
    """Platform-independent 64-bit seed from arbitrary parts."""
    blob = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


def _allocate(stratum_sizes: dict[str, int], targets: list[int], ratios: Sequence[Fraction]) -> dict[str, list[int]]:
    """Per-stratum split counts: largest-remainder rounding of each stratum's
    quotas, constrained so the column totals hit the global ``targets``."""
    alloc: dict[str, list[int]] = {}
    fracs: dict[str, list[Fraction]] = {}
    for s, n in stratum_sizes.items():
        quotas = [n * r for r in ratios]
        alloc[s] = [int(q) for q in quotas]
        fracs[s] = [q - int(q) for q in quotas]
    row_def = {s: n - sum(alloc[s]) for s, n in stratum_sizes.items()}
    col_def = [t - sum(alloc[s][k] for s in alloc) for k, t in enumerate(targets)]
    cells = sorted(
        ((s, k) for s in alloc for k in range(len(ratios))),
        key=lambda sk: (-fracs[sk[0]][sk[1]], sk[0], sk[1]),
    )
    for s, k in cells:
        if fracs[s][k] > 0 and row_def[s] > 0 and col_def[k] > 0:
            alloc[s][k] += 1
            row_def[s] -= 1
            col_def[k] -= 1
    while any(row_def.values()):
        for s, k in cells:
            if row_def[s] > 0 and col_def[k] > 0:
                alloc[s][k] += 1
                row_def[s] -= 1
                col_def[k] -= 1
    return alloc


def split(
    entries: Sequence[LexiconEntry], spec: SplitSpec = SplitSpec()
) -> tuple[list[LexiconEntry], list[LexiconEntry], list[LexiconEntry]]:
    """Deterministic stratified train/dev/test partition.

    Each stratum is shuffled with its own seeded generator. Strata with fewer
    than 3 entries go entirely to train. Each output keeps input order.
    """
    if not entries:
        raise ValueError("cannot split an empty entry list")
    strata: dict[str, list[int]] = defaultdict(list)
    for i, e in enumerate(entries):
        strata[str(getattr(e, spec.stratify_key))].append(i)

    assigned: list[list[int]] = [[], [], []]
    regular: dict[str, int] = {}
    for label in sorted(strata):
        members = strata[label]
        if len(members) < 3:
            log.warning("stratum %r has %d entries; assigning all to train", label, len(members))
            assigned[0].extend(members)
        else:
            regular[label] = len(members)

    if regular:
        targets = largest_remainder(sum(regular.values()), spec.ratios)
        alloc = _allocate(regular, targets, spec.ratios)
        for label in sorted(regular):
            members = list(strata[label])
            random.Random(derive_seed(spec.seed, label)).shuffle(members)
            n_train, n_dev, _ = alloc[label]
            assigned[0].extend(members[:n_train])
            assigned[1].extend(members[n_train : n_train + n_dev])
            assigned[2].extend(members[n_train + n_dev :])

    train, dev, test = ([entries[i] for i in sorted(part)] for part in assigned)
    return train, dev, test


def write_splits(out_dir: str | Path, parts: Sequence[Sequence[LexiconEntry]]) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, part in zip(SPLIT_NAMES, parts):
        path = out / f"{name}.jsonl"
        write_jsonl(path, part)
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StatsTable:
    records: int
    tajik_types: int
    persian_types: int
    queried_types: int
    mean_examples: float
    mean_example_chars: float
    pos_histogram: tuple[tuple[str, int], ...]

    def rows(self) -> list[tuple[str, str]]:
        rows = [
            ("Records (N)", f"{self.records:,}"),
            ("Tajik types", f"{self.tajik_types:,}"),
            ("Persian types", f"{self.persian_types:,}"),
            ("Distinct queried forms", f"{self.queried_types:,}"),
            ("Avg. examples per record", f"{self.mean_examples:.2f}"),
            ("Avg. example length (chars)", f"{self.mean_example_chars:.1f}"),
        ]
        rows += [(f"POS: {label}", f"{count:,}") for label, count in self.pos_histogram]
        return rows

    def to_csv(self) -> str:
        lines = ["statistic,value"]
        lines += [f'"{k}",{v.replace(",", "")}' for k, v in self.rows()]
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        lines = ["| Statistic | Value |", "|---|---:|"]
        lines += [f"| {k} | {v} |" for k, v in self.rows()]
        return "\n".join(lines) + "\n"


def stats(entries: Sequence[LexiconEntry]) -> StatsTable:
    n = len(entries)
    n_examples = sum(len(e.examples) for e in entries)
    example_chars = sum(len(x) for e in entries for x in e.examples)
    pos = Counter(e.part_of_speech for e in entries)
    order = {label: i for i, label in enumerate(pos_labels())}
    hist = tuple(sorted(pos.items(), key=lambda kv: (-kv[1], order.get(kv[0], len(order)), kv[0])))
    return StatsTable(
        records=n,
        tajik_types=len({e.tajik for e in entries}),
        persian_types=len({e.persian for e in entries}),
        queried_types=len({e.queried_word for e in entries if e.queried_word}),
        mean_examples=n_examples / n if n else 0.0,
        mean_example_chars=example_chars / n_examples if n_examples else 0.0,
        pos_histogram=hist,
    )
