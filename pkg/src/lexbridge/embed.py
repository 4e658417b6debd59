"""Skip-gram embeddings over subword units, and word vectors by unit averaging.

Two model kinds share one trainer:

* ``wordpiece``: units are BPE symbols; the stream is a list of symbol
  sequences (see :func:`build_training_stream`).
* ``char-ngram``: the stream holds whole words; each word is represented by
  its character n-grams (with ``<``/``>`` boundary markers) plus the bracketed
  whole word, on both the input and the output side.

Exported unit vectors are the sum of the input and output embeddings. A pair
of units that predict each other then ends up with similar vectors even when
they never share a context, which is the situation for a Tajik form and its
Persian counterpart.
"""

from __future__ import annotations

import ctypes
import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .subword import EOW, UNK, BpeModel

log = logging.getLogger(__name__)

KINDS = ("wordpiece", "char-ngram")
FORMAT_TAG = "#lexbridge-embed v1"


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingParams:
    kind: str = "wordpiece"
    dim: int = 200
    window: int = 5
    min_count: int = 2
    epochs: int = 10
    negative: int = 5
    alpha: float = 0.025
    min_alpha: float = 0.0001
    ns_exponent: float = 0.75
    n_min: int = 3
    n_max: int = 6
    batch_sentences: int = 16  # sentences whose updates are applied together

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise EmbeddingError(f"unknown embedding kind {self.kind!r}")
        if min(self.dim, self.window, self.epochs, self.batch_sentences) < 1 or self.negative < 0:
            raise EmbeddingError("dim, window, epochs and batch_sentences must be >= 1; negative >= 0")
        if not 1 <= self.n_min <= self.n_max:
            raise EmbeddingError("need 1 <= n_min <= n_max")


@dataclass
class EmbeddingModel:
    params: EmbeddingParams
    units: list[str]
    vectors: np.ndarray  # (len(units), dim) float32
    seed: int = 0

    def __post_init__(self) -> None:
        if self.vectors.shape != (len(self.units), self.params.dim):
            raise EmbeddingError("vector table shape does not match units/dim")
        self.index = {u: i for i, u in enumerate(self.units)}

    @property
    def kind(self) -> str:
        return self.params.kind

    @property
    def dim(self) -> int:
        return self.params.dim

    def __contains__(self, unit: str) -> bool:
        return unit in self.index

    def vector(self, unit: str) -> np.ndarray:
        return self.vectors[self.index[unit]]

    def units_of(self, word: str, bpe: BpeModel | None = None) -> list[str]:
        """Units of ``word`` whether or not the table knows them."""
        if self.kind == "wordpiece":
            if bpe is None:
                raise EmbeddingError("wordpiece models need the BPE model to segment words")
            # a bare end-of-word marker is not a piece of the word
            return [u for u in bpe.segment(word) if u != EOW]
        return [u for tok in word.split() for u in char_ngrams(tok, self.params.n_min, self.params.n_max)]

    def unit_ids(self, word: str, bpe: BpeModel | None = None) -> list[int]:
        """Table rows averaged to form the vector of ``word``."""
        index = self.index
        return [index[u] for u in self.units_of(word, bpe) if u in index]

    # -- persistence ------------------------------------------------------

    def save(self, path: str | Path) -> None:
        header = {"params": asdict(self.params), "seed": self.seed, "n_units": len(self.units)}
        fmt = " ".join(["%.9g"] * self.dim)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(FORMAT_TAG + "\n")
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for unit, row in zip(self.units, self.vectors):
                fh.write(unit + "\t" + fmt % tuple(row.tolist()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingModel":
        with open(path, encoding="utf-8") as fh:
            if fh.readline().rstrip("\n") != FORMAT_TAG:
                raise EmbeddingError(f"{path} is not a lexbridge embedding file")
            header = json.loads(fh.readline())
            params = EmbeddingParams(**header["params"])
            n = header["n_units"]
            vectors = np.empty((n, params.dim), dtype=np.float32)
            units = []
            for i in range(n):
                unit, _, rest = fh.readline().rstrip("\n").partition("\t")
                units.append(unit)
                vectors[i] = np.array(rest.split(" "), dtype=np.float64)
        return cls(params, units, vectors, header["seed"])


def char_ngrams(word: str, n_min: int = 3, n_max: int = 6) -> list[str]:
    """Character n-grams of ``<word>`` plus the bracketed word itself."""
    marked = f"<{word}>"
    grams = [marked[i : i + n] for n in range(n_min, n_max + 1) for i in range(len(marked) - n + 1)]
    if len(marked) > n_max or len(marked) < n_min:
        grams.append(marked)
    return grams


def build_training_stream(entries: Iterable, bpe: BpeModel, include_examples: bool = False) -> list[list[str]]:
    """BPE symbols of each record's Tajik form followed by its Persian form,
    so the paired forms share a context window. Examples become extra
    sequences when requested."""
    stream = []
    for e in entries:
        stream.append(bpe.segment(e.tajik) + bpe.segment(e.persian))
        if include_examples:
            stream.extend(bpe.segment(x) for x in e.examples)
    return stream


def build_word_stream(entries: Iterable, include_examples: bool = False) -> list[list[str]]:
    """Whitespace tokens of each record, for the char-ngram model."""
    stream = []
    for e in entries:
        stream.append(e.tajik.split() + e.persian.split())
        if include_examples:
            stream.extend(x.split() for x in e.examples)
    return stream


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30.0, 30.0)))


class _Ragged:
    """Unit lists of a set of tokens in flat CSR layout."""

    def __init__(self, lists: Sequence[Sequence[int]]):
        self.lengths = np.array([len(x) for x in lists], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(self.lengths)])
        self.flat = np.fromiter((u for x in lists for u in x), dtype=np.int64, count=int(self.offsets[-1]))

    def gather(self, tokens: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        lengths = self.lengths[tokens]
        starts = self.offsets[tokens]
        seg = np.repeat(np.arange(len(tokens)), lengths)
        pos = np.arange(int(lengths.sum())) - np.repeat(np.cumsum(lengths) - lengths, lengths)
        return self.flat[np.repeat(starts, lengths) + pos], seg, lengths


_PAIR_CACHE: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def _window_pairs(n: int, window: int) -> tuple[np.ndarray, np.ndarray]:
    """(center, context) positions of every pair within ``window`` of each other."""
    key = (n, window)
    if key not in _PAIR_CACHE:
        ci, xi = [], []
        for i in range(n):
            for j in range(max(0, i - window), min(n, i + window + 1)):
                if j != i:
                    ci.append(i)
                    xi.append(j)
        _PAIR_CACHE[key] = (np.array(ci, dtype=np.int64), np.array(xi, dtype=np.int64))
    return _PAIR_CACHE[key]


def _scatter_add(table: np.ndarray, idx: np.ndarray, rows: np.ndarray) -> None:
    """``np.add.at(table, idx, rows)`` via a sort and a segmented sum, which is
    much faster for wide rows."""
    order = np.argsort(idx, kind="stable")
    sidx = idx[order]
    starts = np.flatnonzero(np.concatenate(([True], sidx[1:] != sidx[:-1])))
    table[sidx[starts]] += np.add.reduceat(rows[order], starts, axis=0)


def _sgns_step_padded(syn0, syn1, batch, valid, negs, window, lr) -> None:
    """One batch of sentences, right-padded to a common length.

    Every in-window (center, context) pair contributes a positive term. Each
    center draws ``k`` negatives once and reuses them for all of its context
    pairs, so their gradient is weighted by the center's context count. All
    pairs of the batch see the same parameters; gradients are summed.
    """
    L = batch.shape[1]
    pos = np.arange(L)
    near = (np.abs(pos[:, None] - pos[None, :]) <= window) & (pos[:, None] != pos[None, :])
    mask = (near[None] & valid[:, :, None] & valid[:, None, :]).astype(np.float32)
    n_ctx = mask.sum(axis=2)
    h = syn0[batch]  # (B, L, dim)
    out = syn1[batch]
    nv = syn1[negs]  # (B, L, k, dim)
    g_pos = (1.0 - _sigmoid(h @ out.transpose(0, 2, 1))) * mask * lr
    g_neg = -_sigmoid(np.einsum("bld,blkd->blk", h, nv)) * (n_ctx * lr)[:, :, None]
    d_h = g_pos @ out + np.einsum("blk,blkd->bld", g_neg, nv)
    d_out = g_pos.transpose(0, 2, 1) @ h
    d_nv = g_neg[:, :, :, None] * h[:, :, None, :]
    dim = syn0.shape[1]
    _scatter_add(syn0, batch[valid], d_h[valid])
    live = n_ctx > 0
    rows = np.concatenate([batch[valid], negs[live].ravel()])
    grads = np.concatenate([d_out[valid], d_nv[live].reshape(-1, dim)])
    _scatter_add(syn1, rows, grads.astype(np.float32, copy=False))


def _mean_rows(table, ragged: _Ragged, tokens: np.ndarray):
    rows, seg, lengths = ragged.gather(tokens)
    starts = np.cumsum(lengths) - lengths
    acc = np.add.reduceat(table[rows], starts, axis=0)
    acc /= lengths[:, None].astype(np.float32)
    return acc, rows, seg, lengths


def _sgns_step_ragged(syn0, syn1, ragged: _Ragged, centers, targets, labels, lr) -> None:
    """Per-pair negatives, each token the mean of several units. As in
    fastText, the gradient of a mean is applied undivided to every unit."""
    h, c_rows, c_seg, c_len = _mean_rows(syn0, ragged, centers)
    flat = targets.ravel()
    out, t_rows, t_seg, t_len = _mean_rows(syn1, ragged, flat)
    out = out.reshape(targets.shape + (h.shape[1],))
    g = (labels - _sigmoid(np.einsum("pd,pkd->pk", h, out))) * lr
    dh = np.einsum("pk,pkd->pd", g, out)
    _scatter_add(syn0, c_rows, dh[c_seg])
    g_flat = g.ravel()
    pair_of_target = np.repeat(np.arange(len(centers)), targets.shape[1])
    _scatter_add(syn1, t_rows, g_flat[t_seg][:, None] * h[pair_of_target[t_seg]])


def train_skipgram(stream: Sequence[Sequence[str]], params: EmbeddingParams = EmbeddingParams(), seed: int = 42) -> EmbeddingModel:
    """Skip-gram with negative sampling, single-threaded and seeded.

    Learning rate decays linearly from ``alpha`` to ``min_alpha`` over all
    epochs; negatives come from the unigram distribution raised to
    ``ns_exponent``. Identical inputs give bitwise-identical tables.
    """
    if not stream:
        raise EmbeddingError("empty training stream")
    token_counts = Counter(t for seq in stream for t in seq if t != UNK)

    if params.kind == "wordpiece":
        units = sorted((u for u, c in token_counts.items() if c >= params.min_count), key=lambda u: (-token_counts[u], u))
        unit_index = {u: i for i, u in enumerate(units)}
        tokens = units
        token_units: list[list[int]] = [[i] for i in range(len(units))]
    else:
        unit_counts: Counter = Counter()
        for tok, c in token_counts.items():
            for g in char_ngrams(tok, params.n_min, params.n_max):
                unit_counts[g] += c
        units = sorted((u for u, c in unit_counts.items() if c >= params.min_count), key=lambda u: (-unit_counts[u], u))
        unit_index = {u: i for i, u in enumerate(units)}
        tokens, token_units = [], []
        for tok in sorted(token_counts, key=lambda t: (-token_counts[t], t)):
            ids = [unit_index[g] for g in char_ngrams(tok, params.n_min, params.n_max) if g in unit_index]
            if ids:
                tokens.append(tok)
                token_units.append(ids)
    if not units or not tokens:
        raise EmbeddingError("no unit survives min_count filtering")

    token_index = {t: i for i, t in enumerate(tokens)}
    seqs = [np.array([token_index[t] for t in seq if t in token_index], dtype=np.int64) for seq in stream]
    seqs = [s for s in seqs if len(s) > 1]
    total = sum(len(s) for s in seqs) * params.epochs
    if total == 0:
        raise EmbeddingError("no sequence has two known tokens to train on")

    freq = np.array([token_counts[t] for t in tokens], dtype=np.float64) ** params.ns_exponent
    noise_cdf = np.cumsum(freq / freq.sum())
    noise_cdf[-1] = 1.0

    rng = np.random.Generator(np.random.PCG64(seed))
    dim = params.dim
    syn0 = ((rng.random((len(units), dim)) - 0.5) / dim).astype(np.float32)
    syn1 = np.zeros((len(units), dim), dtype=np.float32)
    ragged = _Ragged(token_units)
    k = params.negative
    labels = np.zeros((1, k + 1), dtype=np.float32)
    labels[0, 0] = 1.0
    done = 0

    bs = params.batch_sentences
    if params.kind == "wordpiece":
        lengths = np.array([len(x) for x in seqs])
        for _epoch in range(params.epochs):
            for start in range(0, len(seqs), bs):
                chunk = seqs[start : start + bs]
                lr = np.float32(params.alpha - (params.alpha - params.min_alpha) * (done / total))
                n_tok = lengths[start : start + bs]
                done += int(n_tok.sum())
                width = int(n_tok.max())
                batch = np.zeros((len(chunk), width), dtype=np.int64)
                for i, x in enumerate(chunk):
                    batch[i, : len(x)] = x
                valid = np.arange(width)[None, :] < n_tok[:, None]
                negs = np.searchsorted(noise_cdf, rng.random((len(chunk), width, k)), side="right")
                _sgns_step_padded(syn0, syn1, batch, valid, negs, params.window, lr)
    else:
        offsets = np.concatenate([[0], np.cumsum([len(x) for x in seqs])])
        flat_seq = np.concatenate(seqs)
        pair_tables = [_window_pairs(len(x), params.window) for x in seqs]
        for _epoch in range(params.epochs):
            for start in range(0, len(seqs), bs):
                stop = min(start + bs, len(seqs))
                lr = np.float32(params.alpha - (params.alpha - params.min_alpha) * (done / total))
                done += int(offsets[stop] - offsets[start])
                ci = np.concatenate([pair_tables[i][0] + offsets[i] for i in range(start, stop)])
                xi = np.concatenate([pair_tables[i][1] + offsets[i] for i in range(start, stop)])
                negs = np.searchsorted(noise_cdf, rng.random((len(ci), k)), side="right")
                targets = np.concatenate([flat_seq[xi][:, None], negs], axis=1)  # (pairs, k+1)
                _sgns_step_ragged(syn0, syn1, ragged, flat_seq[ci], targets, labels, lr)
    vectors = (syn0 + syn1).astype(np.float32)
    log.info("trained %s model: %d units, %d token updates", params.kind, len(units), done)
    return EmbeddingModel(params, list(units), vectors, seed)


def word_vector(model: EmbeddingModel, word: str, bpe: BpeModel | None = None) -> np.ndarray | None:
    """Mean of the known unit vectors of ``word`` (float64), or None."""
    ids = model.unit_ids(word, bpe)
    if not ids:
        return None
    return model.vectors[ids].astype(np.float64).mean(axis=0)


def cosine01(u: np.ndarray | None, v: np.ndarray | None) -> float:
    """Cosine similarity rescaled to [0, 1]; missing or zero vectors give 0.5."""
    if u is None or v is None:
        return 0.5
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.5
    cos = float(np.dot(u, v)) / (nu * nv)
    return min(1.0, max(0.0, (1.0 + cos) / 2.0))


def coverage(model: EmbeddingModel, word: str, bpe: BpeModel | None = None) -> float:
    """Fraction of the characters of ``word`` that fall inside at least one
    unit known to ``model``."""
    chars = [c for c in word if not c.isspace()]
    if not chars:
        return 0.0
    covered = 0
    if model.kind == "wordpiece":
        assert bpe is not None
        for tok in word.split():
            for sym in bpe.segment_word(tok):
                width = 1 if sym == UNK else len(sym.replace("</w>", ""))
                if sym != UNK and sym in model.index:
                    covered += width
        return covered / len(chars)
    n_min, n_max = model.params.n_min, model.params.n_max
    for tok in word.split():
        marked = f"<{tok}>"
        hit = [False] * len(marked)
        for n in range(n_min, n_max + 1):
            for i in range(len(marked) - n + 1):
                if marked[i : i + n] in model.index:
                    hit[i : i + n] = [True] * n
        if marked in model.index:
            hit = [True] * len(marked)
        covered += sum(hit[1:-1])
    return covered / len(chars)


class CandidateVectors:
    """Precomputed unit lists and norms for a fixed list of candidate strings.

    ``scores(query_vector, idx)`` gives ``cosine01`` between the query and the
    candidates at ``idx`` without materializing candidate vectors: the query
    is projected onto the unit table once and the projections are averaged.
    """

    def __init__(self, model: EmbeddingModel, candidates: Sequence[str], bpe: BpeModel | None = None, chunk: int = 512):
        self.model = model
        lists = [model.unit_ids(c, bpe) for c in candidates]
        self.ragged = _Ragged(lists)
        norms = np.zeros(len(lists), dtype=np.float64)
        for start in range(0, len(lists), chunk):
            idx = np.arange(start, min(start + chunk, len(lists)))
            rows, seg, lengths = self.ragged.gather(idx)
            sums = np.zeros((len(idx), model.dim), dtype=np.float64)
            np.add.at(sums, seg, model.vectors[rows].astype(np.float64))
            safe = np.maximum(lengths, 1)[:, None]
            norms[idx] = np.linalg.norm(sums / safe, axis=1)
        self.norms = norms

    def scores(self, qvec: np.ndarray | None, idx: np.ndarray) -> np.ndarray:
        out = np.full(len(idx), 0.5, dtype=np.float64)
        if qvec is None:
            return out
        qnorm = float(np.linalg.norm(qvec))
        if qnorm == 0.0:
            return out
        proj = self.model.vectors @ qvec.astype(np.float32)
        rows, seg, lengths = self.ragged.gather(idx)
        dots = np.bincount(seg, weights=proj[rows].astype(np.float64), minlength=len(idx))
        norms = self.norms[idx]
        ok = (lengths > 0) & (norms > 0)
        cos = dots[ok] / lengths[ok] / (qnorm * norms[ok])
        out[ok] = np.clip((1.0 + cos) / 2.0, 0.0, 1.0)
        return out


def release_free_memory() -> None:
    """Hand freed heap pages back to the OS where the C library allows it
    (glibc keeps them otherwise, which inflates peak RSS of later stages)."""
    try:
        ctypes.CDLL(None).malloc_trim(0)
    except (AttributeError, OSError):
        pass


def _read_header(fh, path) -> dict:
    if fh.readline().rstrip("\n") != FORMAT_TAG:
        raise EmbeddingError(f"{path} is not a lexbridge embedding file")
    return json.loads(fh.readline())


class WordIndex:
    """Row lookup for a fixed word list: sorted string hashes searched with
    numpy, each hit confirmed against the word itself. Much smaller than a
    dict for tens of thousands of words."""

    def __init__(self, words: Sequence[str]):
        self.words = words
        hashes = np.fromiter((hash(w) for w in words), dtype=np.int64, count=len(words))
        self.order = np.argsort(hashes, kind="stable").astype(np.int32)
        self.hashes = hashes[self.order]

    def get(self, word: str, default: int | None = None) -> int | None:
        h = hash(word)
        at = int(np.searchsorted(self.hashes, h))
        while at < len(self.hashes) and self.hashes[at] == h:
            row = int(self.order[at])
            if self.words[row] == word:
                return row
            at += 1
        return default

    def __contains__(self, word: str) -> bool:
        return self.get(word) is not None

    def __getitem__(self, word: str) -> int:
        row = self.get(word)
        if row is None:
            raise KeyError(word)
        return row

    def __len__(self) -> int:
        return len(self.words)


class WordVectorTable:
    """Unit-normalized mean vectors for a fixed list of words.

    Built from an in-memory model or streamed from a model file, in which case
    the unit table is never held in memory at once: unit names are read in a
    first pass, rows are summed chunk by chunk in a second.
    """

    def __init__(self, words: Sequence[str], vectors: np.ndarray, known: np.ndarray, model: EmbeddingModel | None = None, bpe: BpeModel | None = None):
        self.words = list(words)
        self.index = WordIndex(self.words)
        self.vectors = vectors  # (n, dim) float32, zero rows where unknown
        self.known = known
        self.model, self.bpe = model, bpe

    @staticmethod
    def _finish(sums: np.ndarray, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # in place: the table can be large
        norms = np.sqrt(np.einsum("ij,ij->i", sums, sums, dtype=np.float64))
        known = (counts > 0) & (norms > 0)
        np.divide(sums, norms[:, None].astype(sums.dtype), out=sums, where=known[:, None])
        sums[~known] = 0.0
        return sums, known

    @classmethod
    def from_model(cls, model: EmbeddingModel, words: Sequence[str], bpe: BpeModel | None = None) -> "WordVectorTable":
        words = list(dict.fromkeys(words))
        sums = np.zeros((len(words), model.dim), dtype=np.float32)
        counts = np.zeros(len(words), dtype=np.int64)
        for i, w in enumerate(words):
            ids = model.unit_ids(w, bpe)
            if ids:
                sums[i] = model.vectors[ids].astype(np.float64).mean(axis=0)
                counts[i] = len(ids)
        vectors, known = cls._finish(sums, counts)
        return cls(words, vectors, known, model, bpe)

    @classmethod
    def from_file(cls, path: str | Path, words: Sequence[str], bpe: BpeModel | None = None, chunk: int = 4096) -> "WordVectorTable":
        words = list(dict.fromkeys(words))
        # Units are matched through 64-bit string hashes (sorted array plus
        # searchsorted) rather than a dict of every unit name, which would
        # dominate peak memory for large n-gram tables.
        with open(path, encoding="utf-8") as fh:
            header = _read_header(fh, path)
            params = EmbeddingParams(**header["params"])
            unit_hash = np.fromiter(
                (hash(fh.readline().partition("\t")[0]) for _ in range(header["n_units"])), dtype=np.int64, count=header["n_units"]
            )
        by_hash = np.argsort(unit_hash, kind="stable").astype(np.int32)
        sorted_hash = unit_hash[by_hash]
        del unit_hash
        if np.any(sorted_hash[1:] == sorted_hash[:-1]):
            return cls.from_model(EmbeddingModel.load(path), words, bpe)
        stub = EmbeddingModel(params, [], np.zeros((0, params.dim), dtype=np.float32))
        # exact-size arrays: growing buffers would leave freed heap behind
        sizes = np.fromiter((len(stub.units_of(w, bpe)) for w in words), dtype=np.int64, count=len(words))
        h = np.empty(int(sizes.sum()), dtype=np.int64)
        at = 0
        for w, n in zip(words, sizes.tolist()):
            h[at : at + n] = [hash(u) for u in stub.units_of(w, bpe)]
            at += n
        owner = np.repeat(np.arange(len(words), dtype=np.int32), sizes)
        del sizes
        if len(sorted_hash):
            pos = np.searchsorted(sorted_hash, h).astype(np.int32)
            np.minimum(pos, len(sorted_hash) - 1, out=pos)
            found = sorted_hash[pos] == h
        else:
            pos, found = np.zeros(len(h), dtype=np.int32), np.zeros(len(h), dtype=bool)
        del h
        # one int64 key per reference: unit row in the high half, word in the
        # low half, so a single in-place sort orders by unit, then by word
        key = by_hash[pos[found]].astype(np.int64) if len(sorted_hash) else np.zeros(0, dtype=np.int64)
        del pos
        key <<= 32
        key |= owner[found]
        del owner, found, sorted_hash, by_hash
        key.sort()
        flat_a = (key >> 32).astype(np.int32)
        owner_a = (key & 0xFFFFFFFF).astype(np.int32)
        del key
        counts = np.bincount(owner_a, minlength=len(words)).astype(np.int64)
        release_free_memory()
        sums = np.zeros((len(words), params.dim), dtype=np.float32)
        with open(path, encoding="utf-8") as fh:
            _read_header(fh, path)
            row = 0
            block = np.empty((chunk, params.dim), dtype=np.float32)
            while row < header["n_units"]:
                n = min(chunk, header["n_units"] - row)
                for j in range(n):
                    block[j] = np.array(fh.readline().rstrip("\n").partition("\t")[2].split(" "), dtype=np.float64)
                lo, hi = np.searchsorted(flat_a, [row, row + n])
                # frequent units are shared by many words; bound the gathered rows
                for a in range(lo, hi, 1024):
                    b = min(a + 1024, hi)
                    _scatter_add(sums, owner_a[a:b], block[flat_a[a:b] - row])
                row += n
        vectors, known = cls._finish(sums, counts)
        release_free_memory()
        return cls(words, vectors, known, None, bpe)

    def query_vector(self, word: str) -> np.ndarray | None:
        i = self.index.get(word)
        if i is not None:
            return self.vectors[i] if self.known[i] else None
        if self.model is None:
            return None
        v = word_vector(self.model, word, self.bpe)
        if v is None:
            return None
        n = float(np.linalg.norm(v))
        return (v / n).astype(np.float32) if n > 0 else None

    def scores(self, query: str, rows: np.ndarray) -> np.ndarray:
        """cosine01 of ``query`` against table rows; unknown words give 0.5."""
        q = self.query_vector(query)
        if q is None:
            return np.full(len(rows), 0.5)
        cos = (self.vectors[rows] @ q).astype(np.float64)
        out = np.clip((1.0 + cos) / 2.0, 0.0, 1.0)
        out[~self.known[rows]] = 0.5
        return out
