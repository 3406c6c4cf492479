"""Input validation shared by the estimators."""
from __future__ import annotations

import os
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DegenerateLabels
from .pregroup import Diagram, LexiconEntry, load_lexicon, parse_sentence


def check_lexicon(lexicon) -> dict[str, LexiconEntry]:
    """Accept a path, an iterable of entries, or a word -> entry dict."""
    if lexicon is None:
        from .dataset import default_lexicon
        lexicon = default_lexicon()
    elif isinstance(lexicon, (str, os.PathLike)):
        lexicon = load_lexicon(lexicon)
    if isinstance(lexicon, dict):
        return lexicon
    return {e.word: e for e in lexicon}


def check_sentences(X, lexicon=None) -> list[Diagram]:
    """Turn strings, token lists, labelled sentences or diagrams into diagrams."""
    table = None
    out = []
    for item in X:
        if isinstance(item, Diagram):
            out.append(item)
            continue
        if table is None:
            table = check_lexicon(lexicon)
        tokens = getattr(item, "tokens", item)
        if isinstance(tokens, str):
            tokens = tokens.split()
        out.append(parse_sentence(list(tokens), table))
    return out


def check_binary_labels(y, n: int | None = None) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"labels must be one-dimensional, got shape {y.shape}")
    if n is not None and len(y) != n:
        raise ValueError(f"got {len(y)} labels for {n} samples")
    if not np.isin(y, (0, 1)).all():
        raise ValueError(f"labels must be 0 or 1, got {sorted(set(y.tolist()))}")
    return y.astype(int)


def check_two_classes(y: np.ndarray) -> None:
    if len(np.unique(y)) < 2:
        raise DegenerateLabels("training labels contain a single class")
