"""Quantum sentence kernels and Gram-matrix assembly.

Two fidelity estimators are provided. The transition-amplitude kernel runs
one sentence's circuit followed by the adjoint of the other's and reads the
probability that the shared sentence wire returns to ``|0>``. The SWAP-test
kernel prepares both sentences side by side and compares their sentence
wires through an ancilla-controlled swap.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .circuit import Circuit, Gate, adjoint, bind, compose, parallel
from .embeddings import EmbeddingStore, _derive_seed, _symbolic
from .exceptions import (DiscoKernelError, GramFailed, KernelEvalFailed, PostSelectImpossible,
                         UnsupportedAnsatz)
from .pregroup import Diagram
from .simulator import Backend
from .validation import check_binary_labels, check_sentences

__all__ = [
    "KERNELS", "KernelEstimate", "transition_circuit", "swap_test_circuit",
    "transition_amplitude_kernel", "swap_test_kernel", "kernel_estimate", "gram",
    "GramMatrix", "RegionRow", "region_stats", "save_gram", "load_gram", "write_pgm",
    "QuantumSentenceKernel",
]

KERNELS = ("transition", "swap")


def _sentence_circuit(d: Diagram, store: EmbeddingStore) -> Circuit:
    c = bind(_symbolic(d), store.params)
    if len(c.sentence_qubits) != 1:
        raise UnsupportedAnsatz(f"kernels need exactly one sentence qubit, {str(d)!r} has {len(c.sentence_qubits)}")
    return c


def transition_circuit(ci: Circuit, cj: Circuit) -> Circuit:
    """``ci`` followed by ``adjoint(cj)`` sharing one sentence wire.

    cj's sentence qubit lands on ci's; every other cj qubit gets a fresh
    wire, and cj's post-selections are imposed on those wires at the end.
    """
    (si,), (sj,) = ci.sentence_qubits, cj.sentence_qubits
    wire_map, fresh = {}, ci.n_qubits
    for q in range(cj.n_qubits):
        if q == sj:
            wire_map[q] = si
        else:
            wire_map[q] = fresh
            fresh += 1
    joined = compose(ci, adjoint(cj), wire_map)
    post = dict(ci.post_select)
    post.update({wire_map[q]: bit for q, bit in cj.post_select.items()})
    return Circuit(joined.n_qubits, joined.gates, post, (si,))


def swap_test_circuit(ci: Circuit, cj: Circuit) -> Circuit:
    """Both circuits in parallel plus an ancilla on the last wire, which is the read-out."""
    both = parallel(ci, cj)
    si, sj = both.sentence_qubits
    anc = both.n_qubits
    gates = both.gates + (Gate("H", (anc,)), Gate("CSWAP", (anc, si, sj)), Gate("H", (anc,)))
    return Circuit(anc + 1, gates, both.post_select, (anc,))


class KernelEstimate(NamedTuple):
    value: float
    p0: float
    success_prob: float
    shots_kept: int | None


def kernel_estimate(kind: str, xi: Diagram, xj: Diagram, store: EmbeddingStore,
                    backend: Backend | None = None, seed=None, index=(0, 0)) -> KernelEstimate:
    """Evaluate one kernel entry with its diagnostics.

    ``index`` only labels a :class:`KernelEvalFailed` raised when
    post-selection cannot succeed.
    """
    if kind not in KERNELS:
        raise ValueError(f"unknown kernel {kind!r}; choose from {KERNELS}")
    backend = backend or Backend()
    ci, cj = _sentence_circuit(xi, store), _sentence_circuit(xj, store)
    circuit = transition_circuit(ci, cj) if kind == "transition" else swap_test_circuit(ci, cj)
    try:
        dist = backend.run(circuit, seed)
    except PostSelectImpossible as exc:
        raise KernelEvalFailed(index[0], index[1], exc) from exc
    p0 = dist.marginal(circuit.sentence_qubits[0], 0)
    if kind == "transition":
        value = min(max(p0, 0.0), 1.0)
    else:
        # finite-shot estimates of 2*p0 - 1 can go negative
        value = min(max(2.0 * p0 - 1.0, 0.0), 1.0)
    return KernelEstimate(value, p0, dist.success_prob, dist.shots_kept)


def transition_amplitude_kernel(xi: Diagram, xj: Diagram, store: EmbeddingStore,
                                backend: Backend | None = None, seed=None) -> float:
    """Pr[shared sentence wire reads 0 | all post-selections] of ``U_j^dagger U_i``.

    The diagonal is not guaranteed to be 1. With the IQP ansatz the sentence
    wire gets a Hadamard followed only by diagonal gates, and the value
    reduces to ``F / (F + G)`` with ``F = |<psi_j|psi_i>|^2`` and
    ``G = |<psi_j|Z|psi_i>|^2``. Sentence states pushed towards ``|0>`` or
    ``|1>`` by training therefore drive every entry towards 0.5.
    """
    return kernel_estimate("transition", xi, xj, store, backend, seed).value


def swap_test_kernel(xi: Diagram, xj: Diagram, store: EmbeddingStore,
                     backend: Backend | None = None, seed=None) -> float:
    """``clamp(2 * Pr[ancilla = 0] - 1, 0, 1)``, the overlap of the two sentence states."""
    return kernel_estimate("swap", xi, xj, store, backend, seed).value


@dataclass
class GramMatrix:
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def gram(A: Sequence[Diagram], B: Sequence[Diagram] | None, kind: str, store: EmbeddingStore,
         backend: Backend | None = None, seed=0) -> GramMatrix:
    """Kernel values for every pair in ``A x B``.

    Passing ``B=None`` or ``B is A`` evaluates only the upper triangle and
    mirrors it. Each entry's shot seed comes from ``(seed, min(i, j),
    max(i, j))``, so results do not depend on evaluation order. Any failing
    entry fails the whole matrix with :class:`GramFailed`.
    """
    backend = backend or Backend()
    same = B is None or B is A
    B = A if same else B
    K = np.zeros((len(A), len(B)))
    failures = []
    for i in range(len(A)):
        for j in range(i if same else 0, len(B)):
            s = _derive_seed(seed, min(i, j), max(i, j)) if backend.sampled else None
            try:
                K[i, j] = kernel_estimate(kind, A[i], B[j], store, backend, s, (i, j)).value
            except KernelEvalFailed as exc:
                failures.append(exc)
                continue
            if same:
                K[j, i] = K[i, j]
    if failures:
        raise GramFailed(failures)
    meta = {"kernel": kind, "backend": backend.kind, "shots": backend.shots if backend.sampled else 0,
            "seed": seed, "embedding_hash": store.digest(), "symmetric_eval": int(same),
            "description": backend.describe()}
    return GramMatrix(K, meta)


class RegionRow(NamedTuple):
    region: str
    mean: float
    std: float
    count: int


def region_stats(K, labels_a, labels_b=None, exclude_diagonal: bool | None = None) -> list[RegionRow]:
    """Mean and population standard deviation over Class 0, Class 1 and Mixed blocks.

    With ``labels_b`` omitted the matrix is taken as square over one set and
    the diagonal is excluded unless ``exclude_diagonal`` says otherwise.
    """
    K = np.asarray(K, dtype=float)
    la = check_binary_labels(labels_a, K.shape[0])
    same = labels_b is None
    lb = la if same else check_binary_labels(labels_b, K.shape[1])
    if exclude_diagonal is None:
        exclude_diagonal = same
    mask = np.ones(K.shape, dtype=bool)
    if exclude_diagonal:
        np.fill_diagonal(mask, False)
    regions = {
        "Class 0": (la[:, None] == 0) & (lb[None, :] == 0),
        "Class 1": (la[:, None] == 1) & (lb[None, :] == 1),
        "Mixed": la[:, None] != lb[None, :],
    }
    rows = []
    for name, sel in regions.items():
        vals = K[sel & mask]
        if vals.size:
            rows.append(RegionRow(name, float(vals.mean()), float(vals.std()), int(vals.size)))
        else:
            rows.append(RegionRow(name, math.nan, math.nan, 0))
    return rows


def save_gram(path: str | os.PathLike, K: GramMatrix) -> None:
    lines = [f"# {k}={v}" for k, v in K.meta.items()]
    lines += [",".join(repr(float(x)) for x in row) for row in K.values]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_gram(path: str | os.PathLike) -> GramMatrix:
    """Read a CSV written by :func:`save_gram`; malformed content raises ValueError with the line."""
    meta, rows = {}, []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].strip().partition("=")
                if sep:
                    meta[key.strip()] = value.strip()
                continue
            try:
                rows.append([float(x) for x in line.split(",")])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric Gram entry in {line!r}") from None
            if len(rows[-1]) != len(rows[0]):
                raise ValueError(f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(rows[-1])}")
    if not rows:
        raise ValueError(f"{path}: no Gram rows")
    values = np.array(rows)
    if not np.isfinite(values).all():
        raise ValueError(f"{path}: Gram contains non-finite entries")
    return GramMatrix(values, meta)


def write_pgm(path: str | os.PathLike, K) -> None:
    """8-bit binary graymap, pixel = round(255 * K_ij)."""
    values = np.clip(np.asarray(K, dtype=float), 0.0, 1.0)
    pixels = np.rint(255.0 * values).astype(np.uint8)
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


class QuantumSentenceKernel(TransformerMixin, BaseEstimator):
    """Map sentences to rows of kernel values against the fitted sentences.

    ``fit`` stores the reference sentences; ``transform`` returns the Gram
    block ``K(X, X_fit)``, ready for an estimator taking precomputed kernels.

    Parameters
    ----------
    store : EmbeddingStore
        Trained word parameters.
    kind : {'transition', 'swap'}
    lexicon : path, list of LexiconEntry or None
    backend : {'exact', 'shots', 'density', 'noisy'}
    shots : int
    noise : NoiseModel or None
    shot_budget : {'raw', 'kept'}
        Whether ``shots`` counts executions or post-selected survivors.
    random_state : int
    """

    def __init__(self, store=None, kind="swap", lexicon=None, backend="exact", shots=8192,
                 noise=None, shot_budget="kept", random_state=0):
        self.store = store
        self.kind = kind
        self.lexicon = lexicon
        self.backend = backend
        self.shots = shots
        self.noise = noise
        self.shot_budget = shot_budget
        self.random_state = random_state

    def _backend(self) -> Backend:
        return Backend(self.backend, self.shots, self.noise, self.shot_budget)

    def fit(self, X, y=None):
        if self.store is None:
            raise ValueError("QuantumSentenceKernel needs trained embeddings in `store`")
        if self.kind not in KERNELS:
            raise ValueError(f"unknown kernel {self.kind!r}; choose from {KERNELS}")
        self.reference_ = check_sentences(X, self.lexicon)
        return self

    def transform(self, X):
        check_is_fitted(self, "reference_")
        diagrams = check_sentences(X, self.lexicon)
        same = len(diagrams) == len(self.reference_) and all(
            a == b for a, b in zip(diagrams, self.reference_))
        B = None if same else self.reference_
        return gram(diagrams, B, self.kind, self.store, self._backend(), self.random_state).values

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform(X)
