"""Explicit model: read a sentence's label off its sentence qubit and train the
shared word parameters with SPSA."""
from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, NamedTuple, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .circuit import AnsatzConfig, Circuit, ParameterMap, bind, compile_diagram, word_symbols
from .exceptions import EmptyDataset, PostSelectImpossible, PredictionFailed
from .pregroup import Diagram, LexiconEntry
from .simulator import Backend
from .validation import check_binary_labels, check_lexicon, check_sentences

__all__ = [
    "EmbeddingStore", "TrainConfig", "HistoryRow", "lexicon_symbols", "lexicon_hash",
    "predict_explicit", "predict_many", "loss", "cross_entropy", "train_spsa",
    "evaluate_accuracy", "save_embeddings", "load_embeddings", "ExplicitSentenceClassifier",
]

TWO_PI = 2.0 * math.pi


def lexicon_symbols(lexicon: Iterable[LexiconEntry]) -> list[str]:
    return [name for e in lexicon for name in word_symbols(e.word, e.n_wires)]


def lexicon_hash(lexicon: Iterable[LexiconEntry]) -> str:
    text = "".join(f"{e.word}\t{e.category}\n" for e in sorted(lexicon, key=lambda e: e.word))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass
class EmbeddingStore:
    """Word parameters shared by every sentence that uses the word."""

    params: ParameterMap
    rng_seed: Optional[int] = None
    lexicon_hash: str = ""
    ansatz: AnsatzConfig = field(default_factory=AnsatzConfig)

    @classmethod
    def random(cls, lexicon: Iterable[LexiconEntry], seed=None) -> "EmbeddingStore":
        lexicon = list(lexicon)
        names = lexicon_symbols(lexicon)
        values = np.random.default_rng(seed).uniform(0.0, TWO_PI, size=len(names))
        return cls(ParameterMap(zip(names, values.tolist())), seed, lexicon_hash(lexicon))

    @property
    def symbols(self) -> list[str]:
        return list(self.params)

    def vector(self) -> np.ndarray:
        return np.array(list(self.params.values()), dtype=float)

    def with_vector(self, theta: np.ndarray) -> "EmbeddingStore":
        return EmbeddingStore(ParameterMap(zip(self.params, np.asarray(theta, float).tolist())),
                              self.rng_seed, self.lexicon_hash, self.ansatz)

    def digest(self) -> str:
        text = "".join(f"{k}\t{v!r}\n" for k, v in self.params.items())
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def save_embeddings(path: str | os.PathLike, store: EmbeddingStore) -> None:
    a = store.ansatz
    lines = [f"# lexicon_hash={store.lexicon_hash} q_n={a.q_n} q_s={a.q_s} layers={a.layers} seed={store.rng_seed}"]
    lines += [f"{name}\t{value!r}" for name, value in store.params.items()]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_embeddings(path: str | os.PathLike) -> EmbeddingStore:
    meta, params = {}, ParameterMap()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if line.startswith("#"):
                meta.update(kv.split("=", 1) for kv in line[1:].split() if "=" in kv)
                continue
            if not line.strip():
                continue
            try:
                name, value = line.split("\t")
                params[name] = float(value)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected 'symbol<TAB>radians', got {line!r}") from None
    ansatz = AnsatzConfig(int(meta.get("q_n", 1)), int(meta.get("q_s", 1)), int(meta.get("layers", 1)))
    seed = meta.get("seed")
    return EmbeddingStore(params, None if seed in (None, "None") else int(seed),
                          meta.get("lexicon_hash", ""), ansatz)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    shots: int = 8192
    spsa_a: float = 3.0
    spsa_c: float = 0.3
    spsa_A: Optional[float] = None  # None means 0.1 * epochs
    alpha: float = 0.602
    gamma: float = 0.101
    eps: float = 1e-9
    batch_size: Optional[int] = 10  # None means full batch, one step per epoch

    def __post_init__(self):
        if self.epochs <= 0 or self.shots <= 0:
            raise ValueError("epochs and shots must be positive")
        if self.spsa_a <= 0 or self.spsa_c <= 0:
            raise ValueError("spsa_a and spsa_c must be positive")
        if self.spsa_A is not None and self.spsa_A < 0:
            raise ValueError("spsa_A must be non-negative")
        if not 0 < self.eps < 0.5:
            raise ValueError("eps must lie in (0, 0.5)")
        if self.batch_size is not None and self.batch_size <= 0:
            raise ValueError("batch_size must be positive")

    @property
    def stability(self) -> float:
        return 0.1 * self.epochs if self.spsa_A is None else self.spsa_A


class HistoryRow(NamedTuple):
    epoch: int
    loss: float
    train_acc: float
    test_acc: Optional[float] = None


@lru_cache(maxsize=8192)
def _symbolic(d: Diagram) -> Circuit:
    return compile_diagram(d)


def _derive_seed(*parts) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(p) & 0xFFFFFFFFFFFFFFFF for p in parts])


def predict_explicit(sentence: Diagram, store: EmbeddingStore, backend: Backend | None = None,
                     seed=None, eps: float = 1e-9) -> float:
    """P(sentence qubit reads 1 | post-selection), clamped to ``[eps, 1 - eps]``."""
    backend = backend or Backend()
    circuit = bind(_symbolic(sentence), store.params)
    try:
        dist = backend.run(circuit, seed)
    except PostSelectImpossible as exc:
        raise PredictionFailed(f"post-selection impossible for {str(sentence)!r}") from exc
    p = dist.marginal(circuit.sentence_qubits[0], 1)
    return min(max(p, eps), 1.0 - eps)


def predict_many(sentences: Sequence[Diagram], store: EmbeddingStore, backend: Backend | None = None,
                 seed=0, eps: float = 1e-9, stream: int = 0) -> np.ndarray:
    # per-sentence seeds keep results independent of evaluation order
    backend = backend or Backend()
    seeds = [_derive_seed(seed, stream, i) if backend.sampled else None for i in range(len(sentences))]
    return np.array([predict_explicit(d, store, backend, s, eps) for d, s in zip(sentences, seeds)])


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    probs = np.asarray(probs, float)
    labels = np.asarray(labels, float)
    return float(np.mean(-(labels * np.log(probs) + (1.0 - labels) * np.log(1.0 - probs))))


def loss(sentences: Sequence[Diagram], labels, store: EmbeddingStore, backend: Backend | None = None,
         seed=0, eps: float = 1e-9, stream: int = 0) -> float:
    """Mean binary cross-entropy of the explicit model's predictions."""
    labels = check_binary_labels(labels, len(sentences))
    return cross_entropy(predict_many(sentences, store, backend, seed, eps, stream), labels)


def _accuracy(probs: np.ndarray, labels: np.ndarray) -> float:
    # p == 0.5 counts as class 1
    return float(np.mean((np.asarray(probs) >= 0.5).astype(int) == np.asarray(labels)))


def evaluate_accuracy(sentences: Sequence[Diagram], labels, store: EmbeddingStore,
                      backend: Backend | None = None, seed=0, threshold: float = 0.5) -> float:
    labels = check_binary_labels(labels, len(sentences))
    probs = predict_many(sentences, store, backend, seed)
    return float(np.mean((probs >= threshold).astype(int) == labels))


def train_spsa(sentences: Sequence[Diagram], labels, cfg: TrainConfig | None = None,
               lexicon: Iterable[LexiconEntry] | None = None, seed=0,
               backend: Backend | None = None, test: tuple | None = None,
               init: EmbeddingStore | None = None,
               callback: Callable[[HistoryRow], None] | None = None):
    """Fit word parameters by simultaneous-perturbation stochastic approximation.

    Each epoch shuffles the training set and takes one SPSA step per
    minibatch of ``cfg.batch_size`` sentences; the step counter ``k`` in the
    gain schedules runs across epochs. Returns the trained store and one
    :class:`HistoryRow` per epoch, row 0 being the initial point.
    """
    cfg = cfg or TrainConfig()
    if len(sentences) == 0:
        raise EmptyDataset("training set is empty")
    labels = check_binary_labels(labels, len(sentences))
    backend = backend or Backend()
    store = init if init is not None else EmbeddingStore.random(check_lexicon(lexicon).values(), seed)
    rng = np.random.default_rng(_derive_seed(seed, 0x5B5A))
    theta = store.vector()

    def record(epoch, current):
        stream = 3 * epoch + 2
        probs = predict_many(sentences, current, backend, seed, cfg.eps, stream)
        test_acc = None
        if test is not None:
            test_probs = predict_many(test[0], current, backend, seed, cfg.eps, stream + 10 ** 6)
            test_acc = _accuracy(test_probs, test[1])
        row = HistoryRow(epoch, cross_entropy(probs, labels), _accuracy(probs, labels), test_acc)
        history.append(row)
        if callback is not None:
            callback(row)

    history: list[HistoryRow] = []
    record(0, store)
    n = len(sentences)
    n_batches = 1 if cfg.batch_size is None else math.ceil(n / cfg.batch_size)
    k = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if n_batches > 1 else np.arange(n)
        for batch in np.array_split(order, n_batches):
            xs, ys = [sentences[i] for i in batch], labels[batch]
            a_k = cfg.spsa_a / (k + 1 + cfg.stability) ** cfg.alpha
            c_k = cfg.spsa_c / (k + 1) ** cfg.gamma
            delta = rng.choice((-1.0, 1.0), size=theta.shape)
            plus = loss(xs, ys, store.with_vector(theta + c_k * delta), backend, seed, cfg.eps, 3 * k)
            minus = loss(xs, ys, store.with_vector(theta - c_k * delta), backend, seed, cfg.eps, 3 * k + 1)
            theta = theta - a_k * (plus - minus) / (2.0 * c_k) * delta
            k += 1
        record(epoch + 1, store.with_vector(theta))
    return store.with_vector(theta), history


class ExplicitSentenceClassifier(ClassifierMixin, BaseEstimator):
    """Sentence classifier reading the post-selected sentence qubit.

    Parameters
    ----------
    lexicon : path, list of LexiconEntry or None
        Vocabulary; None uses the packaged default.
    epochs, spsa_a, spsa_c, spsa_A, alpha, gamma, eps, batch_size :
        SPSA schedule, see :class:`TrainConfig`.
    backend : {'exact', 'shots', 'density', 'noisy'}
    shots : int
        Shots per circuit for sampled backends.
    noise : NoiseModel or None
    shot_budget : {'raw', 'kept'}
        Whether ``shots`` counts executions or post-selected survivors.
    random_state : int
        Seeds parameter initialisation, perturbations and shot sampling.
    """

    def __init__(self, lexicon=None, epochs=100, spsa_a=3.0, spsa_c=0.3, spsa_A=None,
                 alpha=0.602, gamma=0.101, eps=1e-9, batch_size=10, backend="exact", shots=8192,
                 noise=None, shot_budget="raw", random_state=0):
        self.lexicon = lexicon
        self.epochs = epochs
        self.spsa_a = spsa_a
        self.spsa_c = spsa_c
        self.spsa_A = spsa_A
        self.alpha = alpha
        self.gamma = gamma
        self.eps = eps
        self.batch_size = batch_size
        self.backend = backend
        self.shots = shots
        self.noise = noise
        self.shot_budget = shot_budget
        self.random_state = random_state

    def _backend(self) -> Backend:
        return Backend(self.backend, self.shots, self.noise, self.shot_budget)

    def fit(self, X, y):
        table = check_lexicon(self.lexicon)
        diagrams = check_sentences(X, table)
        y = check_binary_labels(y, len(diagrams))
        cfg = TrainConfig(self.epochs, self.shots, self.spsa_a, self.spsa_c, self.spsa_A,
                          self.alpha, self.gamma, self.eps, self.batch_size)
        self.store_, self.history_ = train_spsa(diagrams, y, cfg, table.values(),
                                                self.random_state, self._backend())
        self.lexicon_ = table
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "store_")
        diagrams = check_sentences(X, self.lexicon_)
        p1 = predict_many(diagrams, self.store_, self._backend(), self.random_state, self.eps, stream=-1)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)
