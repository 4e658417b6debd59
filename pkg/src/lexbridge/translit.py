"""Rule-based transliteration, a coarse Latin pivot, and script-aware Soundex."""

from __future__ import annotations

import logging
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

from ._data import data_path, read_pairs, read_tsv

log = logging.getLogger(__name__)

START, END = "\x02", "\x03"


@dataclass(frozen=True)
class GraphemeRuleSet:
    """Ordered (source, target) rules plus whole-word exceptions.

    A source starting with ``^`` only matches at the start of a word and one
    ending with ``$`` only at its end. With ``lowercase`` set the input is
    lowercased before lookup.
    """

    regular_rules: tuple[tuple[str, str], ...]
    exceptions: dict[str, str] = field(default_factory=dict)
    version: str = "custom"
    lowercase: bool = False

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for src, _ in self.regular_rules:
            if not src or src in ("^", "$", "^$"):
                raise ValueError(f"empty rule source {src!r}")
            if src in seen:
                raise ValueError(f"duplicate rule source {src!r}")
            seen.add(src)
        compiled: dict[str, list[tuple[str, str]]] = {}
        anchored = False
        for order, (src, tgt) in enumerate(self.regular_rules):
            key = src
            if key.startswith("^"):
                key, anchored = START + key[1:], True
            if key.endswith("$"):
                key, anchored = key[:-1] + END, True
            compiled.setdefault(key[0], []).append((len(key), order, key, tgt))
        table = {c: [(k, t) for _, _, k, t in sorted(lst, key=lambda x: (-x[0], x[1]))] for c, lst in compiled.items()}
        object.__setattr__(self, "_table", table)
        object.__setattr__(self, "_anchored", anchored)

    def __hash__(self) -> int:
        return hash((self.regular_rules, tuple(sorted(self.exceptions.items())), self.version, self.lowercase))

    def _scan(self, token: str, unmapped: Counter | None) -> str:
        table = self._table
        text = START + token + END if self._anchored else token
        out = []
        i, n = 0, len(text)
        while i < n:
            for src, tgt in table.get(text[i], ()):
                if text.startswith(src, i):
                    out.append(tgt)
                    i += len(src)
                    break
            else:
                ch = text[i]
                if ch not in (START, END):
                    out.append(ch)
                    if unmapped is not None:
                        unmapped[ch] += 1
                i += 1
        return "".join(out)

    def transliterate(self, word: str, unmapped: Counter | None = None) -> str:
        if self.lowercase:
            word = word.lower()
        if word in self.exceptions:
            return self.exceptions[word]
        if not self._anchored and not self.exceptions:
            return self._scan(word, unmapped)
        parts = re.split(r"(\s+)", word)
        return "".join(
            p if not p or p.isspace() else self.exceptions.get(p) or self._scan(p, unmapped) for p in parts
        )


def transliterate(rules: GraphemeRuleSet, word: str, unmapped: Counter | None = None) -> str:
    """Deterministic greedy longest-match transliteration.

    Exceptions are looked up first (whole input, then each whitespace token).
    Characters without a rule are copied through and counted in ``unmapped``.
    """
    out = rules.transliterate(word, unmapped)
    if unmapped:
        log.debug("unmapped characters in %r: %s", word, dict(unmapped))
    return out


def load_rules(path: str | Path, exceptions: str | Path | None = None, version: str | None = None) -> GraphemeRuleSet:
    rows, directives = read_tsv(path)
    rules = tuple((r[0], r[1] if len(r) > 1 else "") for r in rows)
    exc = dict(read_pairs(exceptions)) if exceptions else {}
    return GraphemeRuleSet(rules, exc, version or Path(path).stem, "lowercase" in directives)


def save_rules(rules: GraphemeRuleSet, path: str | Path, exceptions: str | Path | None = None) -> None:
    head = [f"# version: {rules.version}"]
    if rules.lowercase:
        head.append("#! lowercase")
    body = [f"{s}\t{t}" for s, t in rules.regular_rules]
    Path(path).write_text("\n".join(head + body) + "\n", encoding="utf-8")
    if exceptions is not None:
        lines = [f"{k}\t{v}" for k, v in rules.exceptions.items()]
        Path(exceptions).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


@lru_cache(maxsize=None)
def default_rules() -> GraphemeRuleSet:
    """Shipped Tajik Cyrillic -> Perso-Arabic tables."""
    return load_rules(
        data_path("translit_tajik_persian.tsv"),
        data_path("translit_exceptions.tsv"),
        version="tg-fa-1",
    )


# ---------------------------------------------------------------------------
# Latin pivot
# ---------------------------------------------------------------------------

SCRIPT_ALIASES = {
    "tajik": "tajik",
    "tg": "tajik",
    "cyrillic": "tajik",
    "persian": "persian",
    "fa": "persian",
    "arabic": "persian",
    "latin": "latin",
}
_PASSTHROUGH = frozenset(" -'")


def canonical_script(script: str) -> str:
    try:
        return SCRIPT_ALIASES[script.lower()]
    except KeyError:
        raise ValueError(f"unknown script {script!r}; expected one of {sorted(SCRIPT_ALIASES)}") from None


@lru_cache(maxsize=None)
def romanization_table(script: str) -> dict[str, str]:
    script = canonical_script(script)
    if script == "latin":
        return {}
    return dict(read_pairs(data_path(f"romanize_{script}.tsv")))


def _is_latin(ch: str) -> bool:
    return (ch.isascii() and ch.isalnum()) or unicodedata.name(ch, "").startswith("LATIN")


def romanize(word: str, script: str) -> str:
    """Map a Tajik or Persian string into the shared coarse Latin alphabet.

    Latin letters, digits, spaces, hyphens and apostrophes pass through;
    anything else without a table entry becomes ``?``.
    """
    table = romanization_table(script)
    out = []
    for ch in word:
        mapped = table.get(ch)
        if mapped is None:
            mapped = table.get(ch.lower())
        if mapped is None:
            mapped = ch if (ch in _PASSTHROUGH or _is_latin(ch)) else "?"
        out.append(mapped)
    return "".join(out)


# ---------------------------------------------------------------------------
# Phonetic coding
# ---------------------------------------------------------------------------

CLASS_LETTERS = "ABGDLMRSJ"  # class 0..8


@dataclass(frozen=True)
class PhoneticTable:
    script: str
    classes: dict[str, int]
    code_length: int = 4

    def __post_init__(self) -> None:
        if self.code_length < 1:
            raise ValueError("code_length must be >= 1")
        bad = {c: d for c, d in self.classes.items() if not 0 <= d < len(CLASS_LETTERS)}
        if bad:
            raise ValueError(f"digit classes out of range: {bad}")

    def __hash__(self) -> int:
        return hash((self.script, tuple(sorted(self.classes.items())), self.code_length))


def load_phonetic_table(path: str | Path, script: str, code_length: int = 4) -> PhoneticTable:
    rows, _ = read_tsv(path)
    classes: dict[str, int] = {}
    for row in rows:
        ch, digit = row[0], int(row[1])
        if ch in classes:
            raise ValueError(f"character {ch!r} listed twice in {path}")
        classes[ch] = digit
    return PhoneticTable(canonical_script(script), classes, code_length)


@lru_cache(maxsize=None)
def phonetic_table(script: str) -> PhoneticTable:
    script = canonical_script(script)
    return load_phonetic_table(data_path(f"phonetic_{script}.tsv"), script)


def phonetic_code(word: str, table: PhoneticTable) -> str:
    """Soundex generalized to arbitrary scripts.

    The first mapped character contributes its class letter; later ones their
    digit class, with class 0 dropped and adjacent repeats collapsed. The code
    is zero-padded or truncated to ``table.code_length``. Characters missing
    from the table are ignored.
    """
    if not word:
        raise ValueError("cannot compute a phonetic code for an empty word")
    classes = [table.classes[c] for c in word.lower() if c in table.classes]
    if not classes:
        return CLASS_LETTERS[0] + "0" * (table.code_length - 1)
    digits: list[int] = []
    for d in classes[1:]:
        if d == 0:
            continue
        if not digits or digits[-1] != d:
            digits.append(d)
    code = CLASS_LETTERS[classes[0]] + "".join(map(str, digits))
    return (code + "0" * table.code_length)[: table.code_length]


def code_agreement(a: str, b: str) -> float:
    """1.0 for identical codes, otherwise the fraction of equal aligned positions."""
    if a == b:
        return 1.0
    width = max(len(a), len(b))
    if width == 0:
        return 1.0
    return sum(x == y for x, y in zip(a, b)) / width


def translit_many(rules: GraphemeRuleSet, words: Sequence[str] | Iterable[str]) -> tuple[list[str], Counter]:
    unmapped: Counter = Counter()
    return [rules.transliterate(w, unmapped) for w in words], unmapped
