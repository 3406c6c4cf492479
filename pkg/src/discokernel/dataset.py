"""Meaning-classification data: food (0) versus technology (1) sentences."""
from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DatasetFormatError, InsufficientCombinations, TooSmall
from .pregroup import LexiconEntry, parse_lexicon, parse_sentence

__all__ = [
    "FOOD", "TECH", "TOPIC_LABELS", "TEMPLATES", "LabeledSentence", "SplitDataset",
    "default_lexicon", "DEFAULT_LEXICON_PATH", "enumerate_sentences", "generate",
    "split", "read_tsv", "write_tsv", "dumps_tsv",
]

FOOD, TECH = 0, 1
TOPIC_LABELS = {"food": FOOD, "tech": TECH}

TEMPLATES = (
    ("noun", "tverb", "noun"),
    ("adj", "noun", "tverb", "noun"),
    ("noun", "tverb", "adj", "noun"),
    ("adj", "noun", "tverb", "adj", "noun"),
)


@dataclass(frozen=True)
class LabeledSentence:
    tokens: tuple[str, ...]
    label: int

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class SplitDataset:
    train: tuple[LabeledSentence, ...]
    test: tuple[LabeledSentence, ...]


DEFAULT_LEXICON_PATH = resources.files("discokernel") / "data" / "default_lexicon.txt"


def default_lexicon() -> list[LexiconEntry]:
    return parse_lexicon(DEFAULT_LEXICON_PATH.read_text(encoding="utf-8").splitlines())


def _topic_label(words: Sequence[LexiconEntry]):
    topics = {w.topic for w in words} - {"neutral"}
    if len(topics) != 1:
        return None
    return TOPIC_LABELS.get(topics.pop())


def _roles_ok(words: Sequence[LexiconEntry]) -> bool:
    # the subject phrase (everything before the verb) names a topic-neutral
    # agent; the object noun carries a topic
    verb = next((i for i, w in enumerate(words) if w.category == "tverb"), None)
    if verb is None:
        return True
    return all(w.topic == "neutral" for w in words[:verb]) and words[-1].topic != "neutral"


def enumerate_sentences(lexicon: Iterable[LexiconEntry], templates=TEMPLATES) -> list[LabeledSentence]:
    """Every topic-consistent template instantiation, in a fixed order.

    Sentences mixing food and tech words, or using no topical word at all,
    are left out, as are those whose subject phrase carries a topic or whose
    object noun does not.
    """
    by_cat: dict[str, list[LexiconEntry]] = {}
    for entry in lexicon:
        by_cat.setdefault(entry.category, []).append(entry)
    out, seen = [], set()
    for template in templates:
        pools = [by_cat.get(cat, []) for cat in template]
        for words in itertools.product(*pools):
            label = _topic_label(words)
            tokens = tuple(w.word for w in words)
            if label is None or tokens in seen or not _roles_ok(words):
                continue
            seen.add(tokens)
            out.append(LabeledSentence(tokens, label))
    return out


def generate(lexicon: Iterable[LexiconEntry], templates=TEMPLATES, n: int = 100, seed=0) -> list[LabeledSentence]:
    """Draw ``n`` distinct labelled sentences.

    Half the draws (rounded up for food) come uniformly from each topic's
    instantiations; a short class is topped up from the other one. The result
    is shuffled and depends only on the inputs and ``seed``.
    """
    pool = enumerate_sentences(lexicon, templates)
    if n > len(pool):
        raise InsufficientCombinations(n, len(pool))
    rng = np.random.default_rng(seed)
    by_label = {lab: [s for s in pool if s.label == lab] for lab in (FOOD, TECH)}
    want = {FOOD: min(math.ceil(n / 2), len(by_label[FOOD]))}
    want[TECH] = min(n - want[FOOD], len(by_label[TECH]))
    want[FOOD] = n - want[TECH]
    chosen = []
    for lab in (FOOD, TECH):
        idx = rng.choice(len(by_label[lab]), size=want[lab], replace=False)
        chosen += [by_label[lab][i] for i in sorted(idx)]
    order = rng.permutation(len(chosen))
    return [chosen[i] for i in order]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(data: Sequence[LabeledSentence], ratio: float = 0.7, seed=0) -> SplitDataset:
    """Stratified train/test split.

    Each class contributes ``round(ratio * class_size)`` sentences to the
    training side, kept within ``[1, class_size - 1]`` so both sides see both
    classes.
    """
    data = list(data)
    if len(data) < 4:
        raise TooSmall(f"need at least 4 sentences to split, got {len(data)}")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for lab in (FOOD, TECH):
        members = [s for s in data if s.label == lab]
        if len(members) < 2:
            raise TooSmall(f"class {lab} has {len(members)} sentence(s); need 2 to populate both sides")
        k = min(max(_round_half_up(ratio * len(members)), 1), len(members) - 1)
        perm = rng.permutation(len(members))
        train += [members[i] for i in sorted(perm[:k])]
        test += [members[i] for i in sorted(perm[k:])]
    # restore the input order inside each side
    pos = {id(s): i for i, s in enumerate(data)}
    train.sort(key=lambda s: pos[id(s)])
    test.sort(key=lambda s: pos[id(s)])
    return SplitDataset(tuple(train), tuple(test))


def dumps_tsv(data: Iterable[LabeledSentence]) -> str:
    return "".join(f"{s.label}\t{s.text}\n" for s in data)


def write_tsv(path: str | os.PathLike, data: Iterable[LabeledSentence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_tsv(data))


def read_tsv(path: str | os.PathLike, lexicon: Iterable[LexiconEntry] | None = None) -> list[LabeledSentence]:
    """Load ``label<TAB>sentence`` lines, checking labels and, given a lexicon, grammar."""
    table = None if lexicon is None else {e.word: e for e in lexicon}
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[0].strip() not in ("0", "1"):
                raise DatasetFormatError(f"{path}:{lineno}: expected '<0|1><TAB>sentence', got {line!r}")
            tokens = tuple(parts[1].split())
            if table is not None:
                try:
                    parse_sentence(tokens, table)
                except Exception as exc:
                    raise DatasetFormatError(f"{path}:{lineno}: {exc}") from None
            out.append(LabeledSentence(tokens, int(parts[0])))
    return out
