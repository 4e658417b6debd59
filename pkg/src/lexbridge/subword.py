"""Joint byte-pair-encoding tokenizer over Tajik and Persian lexical forms."""

from __future__ import annotations

import heapq
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

EOW = "</w>"
UNK = "<unk>"
FORMAT_TAG = "#lexbridge-bpe v1"


class BpeError(ValueError):
    pass


# Segmentations memoized per model; words seen first are usually the frequent ones.
CACHE_WORDS = 8192


@dataclass
class BpeModel:
    alphabet: tuple[str, ...]  # sorted base symbols, EOW included
    merges: tuple[tuple[str, str], ...]
    vocab_size: int  # target size the model was trained for
    seed: int = 0
    character_coverage: float = 1.0
    vocab: dict[str, int] = field(init=False)

    def __post_init__(self) -> None:
        vocab = {UNK: 0}
        for sym in self.alphabet:
            vocab.setdefault(sym, len(vocab))
        for a, b in self.merges:
            vocab.setdefault(a + b, len(vocab))
        self.vocab = vocab
        self._ranks = {pair: i for i, pair in enumerate(self.merges)}
        self._alphabet = frozenset(self.alphabet)
        self._id_to_symbol = {i: s for s, i in vocab.items()}
        self._cache: dict[str, tuple[str, ...]] = {}

    @property
    def unk_id(self) -> int:
        return 0

    def segment_word(self, word: str) -> tuple[str, ...]:
        """Symbols of one whitespace-free word (the last carries no separate
        marker; :data:`EOW` is its own final symbol until merged)."""
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        symbols = [c if c in self._alphabet else UNK for c in word] + [EOW]
        ranks = self._ranks
        while len(symbols) > 1:
            best, best_rank = None, None
            for pair in zip(symbols, symbols[1:]):
                r = ranks.get(pair)
                if r is not None and (best_rank is None or r < best_rank):
                    best, best_rank = pair, r
            if best is None:
                break
            symbols = _merge_pair(symbols, best)
        out = tuple(symbols)
        if len(self._cache) < CACHE_WORDS:
            self._cache[word] = out
        return out

    def segment(self, text: str) -> list[str]:
        return [s for w in text.split() for s in self.segment_word(w)]

    def encode(self, text: str) -> list[int]:
        vocab = self.vocab
        return [vocab.get(s, 0) for s in self.segment(text)]

    def decode_symbols(self, ids: Sequence[int]) -> list[str]:
        return [self._id_to_symbol[i] for i in ids]

    def decode(self, ids: Sequence[int]) -> str:
        text = "".join(self.decode_symbols(ids))
        return " ".join(w for w in text.split(EOW) if w)

    # -- persistence ------------------------------------------------------

    def dumps(self) -> str:
        header = {
            "alphabet": list(self.alphabet),
            "vocab_size": self.vocab_size,
            "seed": self.seed,
            "character_coverage": self.character_coverage,
            "n_merges": len(self.merges),
        }
        lines = [FORMAT_TAG, json.dumps(header, ensure_ascii=False, sort_keys=True)]
        lines += [f"{a} {b}" for a, b in self.merges]
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "BpeModel":
        lines = text.splitlines()
        if not lines or lines[0] != FORMAT_TAG:
            raise BpeError("not a lexbridge BPE model file")
        header = json.loads(lines[1])
        merges = tuple(tuple(line.split(" ")) for line in lines[2 : 2 + header["n_merges"]])
        return cls(
            tuple(header["alphabet"]),
            merges,  # type: ignore[arg-type]
            header["vocab_size"],
            header["seed"],
            header["character_coverage"],
        )

    @classmethod
    def load(cls, path: str | Path) -> "BpeModel":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def encode(model: BpeModel, word: str) -> list[int]:
    return model.encode(word)


def _merge_pair(symbols: Sequence[str], pair: tuple[str, str]) -> list[str]:
    a, b = pair
    out: list[str] = []
    i, n = 0, len(symbols)
    while i < n:
        if i + 1 < n and symbols[i] == a and symbols[i + 1] == b:
            out.append(a + b)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return out


def _covered_alphabet(char_counts: Counter, coverage: float) -> set[str]:
    total = sum(char_counts.values())
    kept: set[str] = set()
    running = 0
    for ch, n in sorted(char_counts.items(), key=lambda kv: (-kv[1], kv[0])):
        if total and running / total >= coverage:
            break
        kept.add(ch)
        running += n
    return kept


def corpus_from_entries(entries: Iterable, with_examples: bool = False) -> list[str]:
    """One training line per record: Tajik form, a space, the Persian form."""
    lines = []
    for e in entries:
        lines.append(f"{e.tajik} {e.persian}")
        if with_examples:
            lines.extend(e.examples)
    return lines


def train_bpe(
    corpus: Sequence[str], vocab_size: int = 2000, seed: int = 0, character_coverage: float = 0.9995
) -> BpeModel:
    """Learn merges until the vocabulary (UNK included) reaches ``vocab_size``
    or no adjacent pair occurs at least twice.

    The most frequent pair wins; ties go to the lexicographically smallest
    pair. The rarest characters beyond ``character_coverage`` of all character
    occurrences are left out of the alphabet and encode as UNK.
    """
    if not corpus:
        raise BpeError("empty training corpus")
    word_freq: Counter = Counter(w for line in corpus for w in line.split())
    char_counts: Counter = Counter()
    for w, f in word_freq.items():
        for c in w:
            char_counts[c] += f
    kept = _covered_alphabet(char_counts, character_coverage)
    alphabet = tuple(sorted(kept | {EOW}))
    if vocab_size <= len(alphabet):
        raise BpeError(f"vocab_size {vocab_size} must exceed the alphabet size {len(alphabet)}")

    words = sorted(word_freq)
    freqs = [word_freq[w] for w in words]
    seqs = [[c if c in kept else UNK for c in w] + [EOW] for w in words]

    stats: defaultdict[tuple[str, str], int] = defaultdict(int)
    where: defaultdict[tuple[str, str], set[int]] = defaultdict(set)
    for idx, (seq, f) in enumerate(zip(seqs, freqs)):
        for pair in zip(seq, seq[1:]):
            if UNK in pair:
                continue
            stats[pair] += f
            where[pair].add(idx)
    heap = [(-c, p) for p, c in stats.items()]
    heapq.heapify(heap)

    vocab = {UNK, *alphabet}
    merges: list[tuple[str, str]] = []
    while len(vocab) < vocab_size and heap:
        neg, pair = heapq.heappop(heap)
        count = stats.get(pair, 0)
        if -neg != count:
            continue  # stale heap entry
        if count < 2:
            break
        merges.append(pair)
        merged = pair[0] + pair[1]
        vocab.add(merged)
        touched: set[tuple[str, str]] = set()
        for idx in sorted(where.pop(pair, ())):
            seq, f = seqs[idx], freqs[idx]
            for p in zip(seq, seq[1:]):
                if UNK in p:
                    continue
                stats[p] -= f
                touched.add(p)
            new = _merge_pair(seq, pair)
            seqs[idx] = new
            for p in zip(new, new[1:]):
                if UNK in p:
                    continue
                stats[p] += f
                where[p].add(idx)
                touched.add(p)
        stats.pop(pair, None)
        for p in touched:
            c = stats.get(p, 0)
            if c <= 0:
                stats.pop(p, None)
                where.pop(p, None)
            elif p != pair:
                heapq.heappush(heap, (-c, p))
    return BpeModel(alphabet, tuple(merges), vocab_size, seed, character_coverage)
