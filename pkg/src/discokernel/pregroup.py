"""Pregroup types, a typed lexicon and DisCoCat string diagrams.

A sentence is grammatical when the concatenation of its word types cancels
down to a single plain sentence wire ``s``. Cancellation pairs an adjacent
``x . x^r`` or ``x^l . x``; each such pair becomes a *cup* in the diagram.
"""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

from .exceptions import LexiconError, NoReduction, UnknownWord

__all__ = [
    "Kind", "BasicType", "PregroupType", "LexiconEntry", "Diagram",
    "N", "S", "CATEGORIES", "build_diagram", "parse_sentence", "reduces_to_sentence",
    "load_lexicon", "parse_lexicon", "make_entry",
]


class Kind(enum.Enum):
    NOUN = "n"
    SENTENCE = "s"


@dataclass(frozen=True)
class BasicType:
    """A basic type with its adjoint winding (-1 left, 0 plain, +1 right)."""

    kind: Kind
    adjoint_order: int = 0

    def __post_init__(self):
        if self.adjoint_order not in (-1, 0, 1):
            raise ValueError(f"adjoint order {self.adjoint_order} not supported")

    @property
    def l(self) -> "BasicType":
        return BasicType(self.kind, self.adjoint_order - 1)

    @property
    def r(self) -> "BasicType":
        return BasicType(self.kind, self.adjoint_order + 1)

    def cancels_with(self, right: "BasicType") -> bool:
        # x^l . x and x . x^r both reduce to the unit
        return self.kind is right.kind and self.adjoint_order + 1 == right.adjoint_order

    def __str__(self):
        suffix = {-1: "^l", 0: "", 1: "^r"}[self.adjoint_order]
        return self.kind.value + suffix


N = BasicType(Kind.NOUN)
S = BasicType(Kind.SENTENCE)


@dataclass(frozen=True)
class PregroupType:
    factors: tuple[BasicType, ...] = ()

    def __matmul__(self, other: "PregroupType | BasicType") -> "PregroupType":
        if isinstance(other, BasicType):
            other = PregroupType((other,))
        return PregroupType(self.factors + other.factors)

    def __len__(self):
        return len(self.factors)

    def __iter__(self):
        return iter(self.factors)

    def __str__(self):
        return " . ".join(map(str, self.factors)) or "1"


# category name -> type; ``sent`` is a degenerate one-box sentence used by tests
CATEGORIES = {
    "noun": PregroupType((N,)),
    "adj": PregroupType((N, N.l)),
    "tverb": PregroupType((N.r, S, N.l)),
    "sent": PregroupType((S,)),
}


def _check_word(word: str) -> None:
    if not word or word != word.lower() or any(c.isspace() for c in word):
        raise LexiconError(f"invalid lexicon word {word!r}: must be non-empty, lowercase, no whitespace")


@dataclass(frozen=True)
class LexiconEntry:
    word: str
    category: str
    topic: str = "neutral"

    def __post_init__(self):
        _check_word(self.word)
        if self.category not in CATEGORIES:
            raise LexiconError(f"unknown category {self.category!r} for word {self.word!r}")

    @property
    def type(self) -> PregroupType:
        return CATEGORIES[self.category]

    @property
    def n_wires(self) -> int:
        return len(self.type)


def make_entry(word: str, category: str, topic: str = "neutral") -> LexiconEntry:
    return LexiconEntry(word, category, topic)


def parse_lexicon(lines: Iterable[str]) -> list[LexiconEntry]:
    """Parse ``word<TAB>category[<TAB>topic]`` lines.

    Blank lines and lines starting with ``#`` are skipped. The optional third
    column tags the word's topic for the dataset generator.
    """
    entries, seen = [], set()
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise LexiconError(f"line {lineno}: expected 'word<TAB>category[<TAB>topic]', got {line!r}")
        word, category = parts[0].strip(), parts[1].strip()
        topic = parts[2].strip() if len(parts) == 3 else "neutral"
        if word in seen:
            raise LexiconError(f"line {lineno}: duplicate word {word!r}")
        seen.add(word)
        try:
            entries.append(LexiconEntry(word, category, topic))
        except LexiconError as exc:
            raise LexiconError(f"line {lineno}: {exc}") from None
    return entries


def load_lexicon(path: str | os.PathLike) -> list[LexiconEntry]:
    with open(path, encoding="utf-8") as fh:
        return parse_lexicon(fh)


@dataclass(frozen=True)
class Diagram:
    """Word boxes laid out left to right with cups joining adjoint wires.

    ``wires`` is the concatenation of the word types, ``cups`` holds index
    pairs ``(i, j)`` with ``i < j`` into ``wires`` and ``open_wires`` lists the
    uncovered indices in order.
    """

    words: tuple[LexiconEntry, ...] = ()
    wires: tuple[BasicType, ...] = ()
    cups: tuple[tuple[int, int], ...] = ()
    open_wires: tuple[int, ...] = ()

    @property
    def word_offsets(self) -> list[int]:
        offsets, pos = [], 0
        for entry in self.words:
            offsets.append(pos)
            pos += entry.n_wires
        return offsets

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(e.word for e in self.words)

    def __str__(self):
        return " ".join(self.tokens)


def _reduce(wires: Sequence[BasicType]) -> tuple[list[tuple[int, int]], list[int]]:
    # bracket matching: a stack of unmatched wire indices
    stack: list[int] = []
    cups = []
    for idx, wire in enumerate(wires):
        if stack and wires[stack[-1]].cancels_with(wire):
            cups.append((stack.pop(), idx))
        else:
            stack.append(idx)
    return sorted(cups), stack


def build_diagram(tokens: Sequence[str] | str, lexicon: Iterable[LexiconEntry]) -> Diagram:
    """Place cups by adjacent cancellation without checking the result type."""
    if isinstance(tokens, str):
        tokens = tokens.split()
    table = lexicon if isinstance(lexicon, dict) else {e.word: e for e in lexicon}
    words = []
    for tok in tokens:
        try:
            words.append(table[tok])
        except KeyError:
            raise UnknownWord(tok) from None
    wires = tuple(w for entry in words for w in entry.type)
    cups, remaining = _reduce(wires)
    return Diagram(tuple(words), wires, tuple(cups), tuple(remaining))


def parse_sentence(tokens: Sequence[str] | str, lexicon: Iterable[LexiconEntry]) -> Diagram:
    """Build the reduced diagram of a sentence.

    Raises :class:`UnknownWord` for tokens missing from ``lexicon`` and
    :class:`NoReduction` when the types do not cancel to a single ``s``.
    """
    d = build_diagram(tokens, lexicon)
    if not reduces_to_sentence(d):
        left = " . ".join(str(d.wires[i]) for i in d.open_wires) or "1"
        raise NoReduction(f"{str(d)!r} reduces to {left}, not s")
    return d


def reduces_to_sentence(d: Diagram) -> bool:
    return len(d.open_wires) == 1 and d.wires[d.open_wires[0]] == S
