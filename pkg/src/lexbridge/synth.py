"""Synthetic parallel lexica with a known transliteration mapping.

The generator is the verification oracle for the whole pipeline: with zero
noise and no exceptions, every target is exactly the transliteration of its
source under ``truth.rules``.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .corpus import LexiconEntry, pos_labels
from .strmetrics import levenshtein
from .translit import GraphemeRuleSet

SOURCE_ALPHABET = "абвгғдежзиӣйкқлмнопрстуӯфхҳчҷшэюя"
TARGET_ALPHABET = "ابپتثجچحخدذرزژسشصضطظعغفقکگلمنوهی"

# Part-of-speech counts of the reference lexicon, used as sampling weights.
DEFAULT_POS_WEIGHTS = (21987, 14375, 1458, 1302, 398, 227, 133, 85, 35, 29, 23, 9, 52)


class SynthError(RuntimeError):
    pass


@dataclass(frozen=True)
class SynthParams:
    n_pairs: int = 10_000
    source_alphabet: str = SOURCE_ALPHABET
    target_alphabet: str = TARGET_ALPHABET
    mapping: tuple[tuple[str, str], ...] | None = None  # drawn from the seed when None
    n_digraphs: int = 8
    exception_fraction: float = 0.0
    noise_rate: float = 0.0
    min_len: int = 3
    max_len: int = 9
    pos_weights: tuple[float, ...] = DEFAULT_POS_WEIGHTS
    seed: int = 7
    max_retries: int = 200

    def __post_init__(self) -> None:
        if self.n_pairs < 0:
            raise ValueError("n_pairs must be >= 0")
        for name in ("exception_fraction", "noise_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("need 1 <= min_len <= max_len")
        if len(self.pos_weights) != len(pos_labels()):
            raise ValueError(f"pos_weights needs {len(pos_labels())} values")
        if set(self.source_alphabet) & set(self.target_alphabet):
            raise ValueError("source and target alphabets must be disjoint")
        if len(set(self.target_alphabet)) < 2:
            raise ValueError("target alphabet needs at least two characters")


@dataclass
class GroundTruth:
    rules: GraphemeRuleSet
    clean_targets: list[str]  # mapping(source), after exception replacement
    edit_counts: list[int]  # substitutions applied by the noise stage
    exception_sources: list[str] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "rules": [list(r) for r in self.rules.regular_rules],
            "exceptions": self.rules.exceptions,
            "clean_targets": self.clean_targets,
            "edit_counts": self.edit_counts,
            "exception_sources": self.exception_sources,
            "params": self.params,
        }
        return json.dumps(payload, ensure_ascii=False, indent=1, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "GroundTruth":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        rules = GraphemeRuleSet(tuple(tuple(r) for r in d["rules"]), d["exceptions"], "synthetic")
        return cls(rules, d["clean_targets"], d["edit_counts"], d["exception_sources"], d["params"])


def draw_mapping(params: SynthParams, rng: random.Random) -> tuple[tuple[str, str], ...]:
    """Random table: every source letter plus a few digraphs, each mapped to a
    target string of length 1 or 2."""
    letters = list(params.source_alphabet)
    digraphs: list[str] = []
    wanted = min(params.n_digraphs, len(letters) * (len(letters) - 1))
    while len(digraphs) < wanted:
        d = "".join(rng.sample(letters, 2))
        if d not in digraphs:
            digraphs.append(d)
    rules = []
    for src in digraphs + letters:
        length = 1 if rng.random() < 0.75 else 2
        rules.append((src, "".join(rng.choice(params.target_alphabet) for _ in range(length))))
    return tuple(rules)


def _perturb(target: str, rate: float, alphabet: str, rng: random.Random) -> tuple[str, int]:
    chars = list(target)
    edits = 0
    for i, ch in enumerate(chars):
        if rng.random() < rate:
            chars[i] = rng.choice([c for c in alphabet if c != ch])
            edits += 1
    return "".join(chars), edits


def gen_lexicon(params: SynthParams = SynthParams()) -> tuple[list[LexiconEntry], GroundTruth]:
    rng = random.Random(params.seed)
    mapping = params.mapping if params.mapping is not None else draw_mapping(params, rng)
    base = GraphemeRuleSet(tuple(mapping), {}, "synthetic")
    labels = pos_labels()

    sources: list[str] = []
    clean: list[str] = []
    finals: list[str] = []
    edits: list[int] = []
    exceptions: dict[str, str] = {}
    used_sources: set[str] = set()
    used_targets: set[str] = set()

    def random_word(alphabet: str) -> str:
        return "".join(rng.choice(alphabet) for _ in range(rng.randint(params.min_len, params.max_len)))

    for _ in range(params.n_pairs):
        for _attempt in range(params.max_retries):
            src = random_word(params.source_alphabet)
            if src in used_sources:
                continue
            tgt = base.transliterate(src)
            is_exception = rng.random() < params.exception_fraction
            if is_exception:
                tgt = random_word(params.target_alphabet)
            if not tgt or tgt in used_targets:
                continue
            final, n_edits = tgt, 0
            if params.noise_rate > 0:
                for _noise_try in range(params.max_retries):
                    final, n_edits = _perturb(tgt, params.noise_rate, params.target_alphabet, rng)
                    if final not in used_targets and levenshtein(tgt, final) == n_edits:
                        break
                else:
                    continue
            break
        else:
            raise SynthError(f"could not draw a unique pair within {params.max_retries} attempts")
        used_sources.add(src)
        used_targets.add(tgt)
        used_targets.add(final)
        if is_exception:
            exceptions[src] = tgt
        sources.append(src)
        clean.append(tgt)
        finals.append(final)
        edits.append(n_edits)

    pos = rng.choices(labels, weights=params.pos_weights, k=len(sources))
    entries = [LexiconEntry(s, t, p) for s, t, p in zip(sources, finals, pos)]
    truth = GroundTruth(
        rules=GraphemeRuleSet(tuple(mapping), exceptions, "synthetic"),
        clean_targets=clean,
        edit_counts=edits,
        exception_sources=sorted(exceptions),
        params={k: v for k, v in asdict(params).items() if k != "mapping"},
    )
    return entries, truth
