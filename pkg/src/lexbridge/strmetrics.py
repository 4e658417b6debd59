"""String distances and transliteration-quality metrics.

All functions work on NFC-normalized Unicode scalar values, so a combining
sequence that has no precomposed form counts as several characters.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ChrfParams",
    "levenshtein",
    "norm_sim",
    "cer",
    "chrf",
    "chrf_corpus",
    "EncodedStrings",
    "encode_strings",
    "levenshtein_batch",
    "norm_sim_batch",
]


def _nfc(s: str) -> str:
    return unicodedata.normalize("NFC", s)


def levenshtein(a: str, b: str) -> int:
    """Minimal number of single-character insertions, deletions and
    substitutions turning ``a`` into ``b``."""
    a, b = _nfc(a), _nfc(b)
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def norm_sim(a: str, b: str) -> float:
    """``1 - levenshtein(a, b) / max(len(a), len(b))``; two empty strings give 1.0."""
    a, b = _nfc(a), _nfc(b)
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def cer(hyp: str, ref: str) -> float:
    """Character error rate with the denominator clamped to 1."""
    return levenshtein(hyp, ref) / max(1, len(_nfc(ref)))


@dataclass(frozen=True)
class ChrfParams:
    max_n: int = 6
    beta: float = 2.0

    def __post_init__(self) -> None:
        if self.max_n < 1:
            raise ValueError(f"max_n must be >= 1, got {self.max_n}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")


def _char_ngrams(text: str, n: int) -> Counter:
    return Counter(text[i : i + n] for i in range(len(text) - n + 1))


def _strip_ws(text: str) -> str:
    return "".join(_nfc(text).split())


def _chrf_stats(hyp: str, ref: str, max_n: int) -> list[tuple[int, int, int]]:
    """Per order: (matched n-grams, hypothesis n-grams, reference n-grams)."""
    stats = []
    for n in range(1, max_n + 1):
        h = _char_ngrams(hyp, n)
        r = _char_ngrams(ref, n)
        matched = sum((h & r).values())
        stats.append((matched, sum(h.values()), sum(r.values())))
    return stats


def _f_beta(matched: int, hyp_total: int, ref_total: int, beta: float) -> float:
    precision = matched / hyp_total if hyp_total else 0.0
    recall = matched / ref_total if ref_total else 0.0
    if precision + recall == 0.0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * precision * recall / (b2 * precision + recall)


def _chrf_from_stats(stats: Sequence[tuple[int, int, int]], beta: float) -> float | None:
    scores = [_f_beta(m, h, r, beta) for m, h, r in stats if r > 0]
    if not scores:
        return None
    return sum(scores) / len(scores)


def chrf(hyp: str, ref: str, params: ChrfParams = ChrfParams()) -> float:
    """Character n-gram F-score in [0, 1] (whitespace ignored).

    The F-score is computed per n-gram order and averaged over the orders for
    which the reference has at least one n-gram.
    """
    hyp, ref = _strip_ws(hyp), _strip_ws(ref)
    if not ref:
        return 1.0 if not hyp else 0.0
    if not hyp:
        return 0.0
    score = _chrf_from_stats(_chrf_stats(hyp, ref, params.max_n), params.beta)
    return 0.0 if score is None else score


def chrf_corpus(hyps: Iterable[str], refs: Iterable[str], params: ChrfParams = ChrfParams()) -> float:
    """Corpus-level chrF: n-gram statistics are pooled over all pairs first."""
    totals = [[0, 0, 0] for _ in range(params.max_n)]
    for hyp, ref in zip(hyps, refs, strict=True):
        for slot, stat in zip(totals, _chrf_stats(_strip_ws(hyp), _strip_ws(ref), params.max_n)):
            for i in range(3):
                slot[i] += stat[i]
    score = _chrf_from_stats([tuple(t) for t in totals], params.beta)
    return 0.0 if score is None else score


# ---------------------------------------------------------------------------
# Batch kernels: one query against many candidates at once.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EncodedStrings:
    """Code points of many strings, right-padded with -1."""

    codes: np.ndarray  # (n, max_len) int16 or int32
    lengths: np.ndarray  # (n,) int32

    def __len__(self) -> int:
        return len(self.lengths)

    def take(self, idx: np.ndarray) -> "EncodedStrings":
        lengths = self.lengths[idx]
        width = int(lengths.max()) if len(lengths) else 0
        return EncodedStrings(self.codes[idx, :width], lengths)


def encode_strings(strings: Sequence[str]) -> EncodedStrings:
    texts = [_nfc(s) for s in strings]
    lengths = np.fromiter((len(t) for t in texts), dtype=np.int32, count=len(texts))
    width = int(lengths.max()) if len(texts) else 0
    top = max((max(map(ord, t)) for t in texts if t), default=0)
    dtype = np.int16 if top <= np.iinfo(np.int16).max else np.int32  # halves the cache for BMP scripts
    codes = np.full((len(texts), width), -1, dtype=dtype)
    for i, t in enumerate(texts):
        if t:
            codes[i, : len(t)] = np.frombuffer(t.encode("utf-32-le"), dtype=np.uint32)
    return EncodedStrings(codes, lengths)


def levenshtein_batch(query: str, candidates: EncodedStrings) -> np.ndarray:
    """Levenshtein distance from ``query`` to every encoded candidate.

    Rows of the DP table are computed for all candidates simultaneously; the
    in-row insertion recurrence ``d[j] = min(t[j], d[j-1] + 1)`` is solved in
    closed form as ``j + cummin(t[k] - k)``.
    """
    q = _nfc(query)
    n, width = candidates.codes.shape
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    cols = np.arange(width + 1, dtype=np.int32)
    prev = np.broadcast_to(cols, (n, width + 1)).copy()
    tmp = np.empty_like(prev)
    top = np.iinfo(candidates.codes.dtype).max
    for i, ch in enumerate(q, 1):
        c = ord(ch)
        cost = (candidates.codes != c).astype(np.int32) if c <= top else np.ones((n, width), dtype=np.int32)
        tmp[:, 0] = i
        np.minimum(prev[:, 1:] + 1, prev[:, :-1] + cost, out=tmp[:, 1:])
        tmp -= cols
        np.minimum.accumulate(tmp, axis=1, out=prev)
        prev += cols
    return prev[np.arange(n), candidates.lengths].astype(np.int64)


def norm_sim_batch(query: str, candidates: EncodedStrings) -> np.ndarray:
    """Vectorized :func:`norm_sim`; bit-identical to the scalar version."""
    dist = levenshtein_batch(query, candidates)
    longest = np.maximum(candidates.lengths, len(_nfc(query))).astype(np.float64)
    out = np.ones(len(dist), dtype=np.float64)
    nz = longest > 0
    out[nz] = 1.0 - dist[nz] / longest[nz]
    return out
