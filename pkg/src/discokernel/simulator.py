"""Statevector and density-matrix simulation with post-selection and noise.

Conventions
-----------
Qubit 0 is the most significant bit of an amplitude index and the leftmost
character of a bitstring.

Post-selected outcomes are reported over the non-post-selected qubits, sentence
qubits first and the remaining ones in ascending order (``qubit_order``).

Internally a circuit runs on a *live register*: a qubit joins the register at
its first gate and a post-selected qubit is projected out right after its last
gate. Both moves commute with every other gate, so the result equals the
textbook "apply everything, then condition" semantics while only a handful of
qubits are ever held at once.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Optional

import numpy as np

from .circuit import Circuit, Gate
from .exceptions import (InvalidCircuit, PostSelectImpossible, TooManyQubits,
                         UnboundCircuit)

__all__ = [
    "NoiseModel", "NOISE_PROFILES", "noise_profile", "StateVector", "DensityMatrix",
    "PostSelectedDistribution", "ShotCounts", "Backend",
    "run_exact", "run_shots", "run_density", "sample_kept", "simulate_statevector",
    "simulate_density", "depolarize", "gate_matrix",
    "MAX_STATEVECTOR_QUBITS", "MAX_DENSITY_QUBITS", "MIN_SUCCESS_PROB",
]

MAX_STATEVECTOR_QUBITS = 16
MAX_DENSITY_QUBITS = 10
MIN_SUCCESS_PROB = 1e-12

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
# index permutations: new[i] = old[perm[i]]
_PERMUTATIONS = {
    "CX": np.array([0, 1, 3, 2]),
    "CSWAP": np.array([0, 1, 2, 3, 4, 6, 5, 7]),
}


def _rx(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def _rz(theta):
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def gate_matrix(g: Gate) -> np.ndarray:
    """Dense unitary of a bound gate, first target most significant."""
    if not g.is_bound:
        raise UnboundCircuit(f"gate {g} has an unbound angle")
    if g.kind == "H":
        return _H
    if g.kind == "RX":
        return _rx(g.angle)
    if g.kind == "RZ":
        return _rz(g.angle)
    if g.kind == "CRZ":
        m = np.eye(4, dtype=complex)
        m[2:, 2:] = _rz(g.angle)
        return m
    perm = _PERMUTATIONS[g.kind]
    return np.eye(len(perm), dtype=complex)[perm]


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing probability per 1-, 2- and 3-qubit gate plus readout flips."""

    p1: float = 0.0
    p2: float = 0.0
    p3: float = 0.0
    readout_flip: float = 0.0

    def __post_init__(self):
        for name in ("p1", "p2", "p3", "readout_flip"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")

    @property
    def is_zero(self) -> bool:
        return self.p1 == self.p2 == self.p3 == self.readout_flip == 0.0

    def gate_error(self, arity: int) -> float:
        return (self.p1, self.p2, self.p3)[arity - 1]


NOISE_PROFILES = {
    "none": NoiseModel(),
    "guadalupe-like": NoiseModel(p1=0.001, p2=0.01, p3=0.03, readout_flip=0.02),
}


def noise_profile(name: str) -> NoiseModel:
    try:
        return NOISE_PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown noise profile {name!r}; choose from {sorted(NOISE_PROFILES)}") from None


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class DensityMatrix:
    n_qubits: int
    entries: np.ndarray

    def probabilities(self) -> np.ndarray:
        return np.real(np.diag(self.entries)).copy()

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))


@dataclass(frozen=True)
class PostSelectedDistribution:
    """Outcome distribution over ``qubit_order`` given the post-selection held.

    ``shots_kept`` is None for exact distributions and the number of
    surviving shots for sampled estimates.
    """

    success_prob: float
    probs: Mapping[str, float]
    qubit_order: tuple[int, ...] = ()
    shots_kept: Optional[int] = None

    def marginal(self, qubit: int, bit: int = 1) -> float:
        """Probability that ``qubit`` reads ``bit``."""
        pos = self.qubit_order.index(qubit)
        want = str(bit)
        return float(sum(p for key, p in self.probs.items() if key[pos] == want))


@dataclass(frozen=True)
class ShotCounts:
    shots_requested: int
    shots_kept: int
    counts: Mapping[str, int]
    qubit_order: tuple[int, ...] = ()

    def to_distribution(self) -> PostSelectedDistribution:
        if self.shots_kept == 0:
            raise PostSelectImpossible(0.0)
        probs = {k: v / self.shots_kept for k, v in self.counts.items()}
        return PostSelectedDistribution(self.shots_kept / self.shots_requested, probs,
                                        self.qubit_order, self.shots_kept)


# -- live register ----------------------------------------------------------------


def _check_bound(c: Circuit) -> None:
    if not c.is_bound:
        raise UnboundCircuit(f"circuit has free symbols: {sorted(c.free_symbols)}")


def _output_order(c: Circuit) -> tuple[int, ...]:
    rest = [q for q in range(c.n_qubits) if q not in c.post_select and q not in c.sentence_qubits]
    return tuple(c.sentence_qubits) + tuple(rest)


def _lifetimes(c: Circuit) -> tuple[dict[int, int], dict[int, list[int]]]:
    first, last = {}, {}
    for t, g in enumerate(c.gates):
        for q in g.targets:
            first.setdefault(q, t)
            last[q] = t
    retire: dict[int, list[int]] = {}
    for q, t in last.items():
        if q in c.post_select:
            retire.setdefault(t, []).append(q)
    return first, retire


class _Register:
    """Tensor over live qubits; ``mixed`` selects density-matrix mode.

    The statevector tensor has one axis per live qubit. The density tensor has
    the row axes first, then the column axes in the same order.
    """

    def __init__(self, mixed: bool, limit: int):
        self.mixed = mixed
        self.limit = limit
        self.live: list[int] = []
        self.data = np.ones((), dtype=complex)
        self.weight = 1.0

    @property
    def k(self) -> int:
        return len(self.live)

    def allocate(self, q: int) -> None:
        if self.k + 1 > self.limit:
            kind = "density-matrix" if self.mixed else "statevector"
            raise TooManyQubits(f"{kind} register would hold {self.k + 1} live qubits (limit {self.limit})")
        k = self.k
        if self.mixed:
            zero = np.zeros((2, 2), dtype=complex)
            zero[0, 0] = 1.0
            data = np.multiply.outer(self.data, zero)
            # new row axis sits after the k existing row axes
            order = list(range(k)) + [2 * k] + list(range(k, 2 * k)) + [2 * k + 1]
            self.data = data.transpose(order)
        else:
            self.data = np.multiply.outer(self.data, np.array([1.0, 0.0], dtype=complex))
        self.live.append(q)

    def _axes(self, qubits) -> list[int]:
        return [self.live.index(q) for q in qubits]

    def _apply_front(self, axes, fn) -> None:
        m = len(axes)
        order = _front_order(self.data.ndim, tuple(axes))
        moved = self.data.transpose(order)
        shape = moved.shape
        out = fn(moved.reshape(2 ** m, -1)).reshape(shape)
        self.data = out.transpose(_inverse(order))

    def _apply_op(self, axes, op, perm) -> None:
        if perm is not None:
            self._apply_front(axes, lambda x: x[perm])
        else:
            self._apply_front(axes, lambda x: op @ x)

    def apply(self, g: Gate) -> None:
        perm = _PERMUTATIONS.get(g.kind)
        op = None if perm is not None else gate_matrix(g)
        axes = self._axes(g.targets)
        self._apply_op(axes, op, perm)
        if self.mixed:
            col = [a + self.k for a in axes]
            self._apply_op(col, None if op is None else op.conj(), perm)

    def apply_pauli(self, q: int, which: int) -> None:
        self._apply_op(self._axes([q]), _PAULI[which], None)

    def depolarize(self, qubits, p: float) -> None:
        # rho -> (1-p) rho + p * mean over {X,Y,Z}^k of P rho P
        if p == 0.0:
            return
        twirled = self.data
        for q in qubits:
            twirled = _pauli_twirl_axis(twirled, self.live.index(q), self.k)
        self.data = (1.0 - p) * self.data + p * twirled

    def retire(self, q: int, bit: int, flip: float = 0.0) -> None:
        """Condition on reading ``bit`` from ``q`` (readout flips with prob ``flip``) and drop it."""
        a = self.live.index(q)
        if self.mixed:
            k = self.k
            diag = np.diagonal(self.data, axis1=a, axis2=a + k)
            # np.diagonal appends the diagonal as the last axis
            reduced = (1.0 - flip) * diag[..., bit] + flip * diag[..., 1 - bit]
            prob = float(np.real(np.trace(reduced.reshape(2 ** (k - 1), 2 ** (k - 1))))) if k > 1 \
                else float(np.real(reduced))
        else:
            if flip:
                raise InvalidCircuit("readout flips on a pure register must be sampled, not averaged")
            index = [slice(None)] * self.k
            index[a] = bit
            reduced = self.data[tuple(index)]
            prob = float(np.vdot(reduced, reduced).real)
        self.live.pop(a)
        self.weight *= prob
        if prob <= 1e-300 or self.weight < MIN_SUCCESS_PROB * 1e-6:
            raise PostSelectImpossible(self.weight)
        self.data = reduced / (prob if self.mixed else np.sqrt(prob))

    def probabilities(self, order) -> np.ndarray:
        axes = self._axes(order)
        if self.mixed:
            k = self.k
            flat = self.data.reshape(2 ** k, 2 ** k)
            probs = np.real(np.diag(flat)).reshape((2,) * k) if k else np.real(flat).reshape(())
        else:
            probs = np.abs(self.data) ** 2
        probs = np.transpose(probs, axes) if axes else probs
        return np.clip(np.asarray(probs, dtype=float), 0.0, None)


_EYE2 = np.eye(2, dtype=complex)


@lru_cache(maxsize=None)
def _front_order(ndim: int, axes: tuple[int, ...]) -> tuple[int, ...]:
    return axes + tuple(i for i in range(ndim) if i not in axes)


@lru_cache(maxsize=None)
def _inverse(order: tuple[int, ...]) -> tuple[int, ...]:
    inv = [0] * len(order)
    for i, o in enumerate(order):
        inv[o] = i
    return tuple(inv)


def _pauli_twirl_axis(data: np.ndarray, a: int, k: int) -> np.ndarray:
    # (1/3) sum_{P in X,Y,Z} P rho P = (2 I (x) Tr_q rho - rho) / 3
    traced = np.trace(data, axis1=a, axis2=a + k)
    full = np.multiply.outer(traced, _EYE2)  # row_q, col_q appended last
    n = data.ndim
    rest = [i for i in range(n) if i not in (a, a + k)]
    src = {ax: pos for pos, ax in enumerate(rest)}
    order = [n - 2 if ax == a else n - 1 if ax == a + k else src[ax] for ax in range(n)]
    return (2.0 * full.transpose(order) - data) / 3.0


def _run_register(c: Circuit, mixed: bool, noise: Optional[NoiseModel] = None,
                  paulis: Optional[Mapping[int, tuple]] = None,
                  flips: Optional[Mapping[int, int]] = None) -> tuple[float, np.ndarray, tuple[int, ...]]:
    """Core loop shared by the exact, density and trajectory paths.

    ``paulis`` maps gate index -> Pauli index per target, inserted after the
    gate (trajectory mode); ``flips`` maps post-selected qubit -> sampled
    readout flip, turning a flipped read into a projection on the other bit.
    Returns the success weight, the kept-qubit probability tensor and its order.
    """
    _check_bound(c)
    limit = MAX_DENSITY_QUBITS if mixed else MAX_STATEVECTOR_QUBITS
    reg = _Register(mixed, limit)
    first, retire = _lifetimes(c)
    readout = noise.readout_flip if (noise is not None and mixed) else 0.0
    flips = flips or {}
    for t, g in enumerate(c.gates):
        for q in g.targets:
            if first[q] == t:
                reg.allocate(q)
        reg.apply(g)
        if mixed and noise is not None:
            reg.depolarize(g.targets, noise.gate_error(len(g.targets)))
        if paulis and t in paulis:
            for q, which in zip(g.targets, paulis[t]):
                if which:
                    reg.apply_pauli(q, which)
        for q in retire.get(t, ()):
            reg.retire(q, c.post_select[q] ^ flips.get(q, 0), readout)
    # post-selected qubits that no gate touched are still |0>
    for q, bit in c.post_select.items():
        if q not in first:
            read = bit ^ flips.get(q, 0)
            reg.weight *= (1.0 - readout if read == 0 else readout)
            if reg.weight < MIN_SUCCESS_PROB * 1e-6:
                raise PostSelectImpossible(reg.weight)
    order = _output_order(c)
    for q in order:
        if q not in reg.live:
            reg.allocate(q)
    probs = reg.probabilities(order)
    if readout:
        confusion = np.array([[1 - readout, readout], [readout, 1 - readout]])
        for ax in range(probs.ndim):
            probs = np.moveaxis(np.tensordot(confusion, probs, axes=([1], [ax])), 0, ax)
    total = probs.sum()
    return reg.weight * float(total), probs / total, order


def _to_distribution(weight, probs, order, shots_kept=None) -> PostSelectedDistribution:
    if weight < MIN_SUCCESS_PROB:
        raise PostSelectImpossible(weight)
    flat = probs.reshape(-1)
    width = len(order)
    table = {}
    for idx in np.flatnonzero(flat > 1e-15):
        table[format(idx, f"0{width}b") if width else ""] = float(flat[idx])
    return PostSelectedDistribution(float(weight), table, tuple(order), shots_kept)


def run_exact(c: Circuit) -> PostSelectedDistribution:
    """Noiseless Born-rule distribution conditioned on the post-selection."""
    weight, probs, order = _run_register(c, mixed=False)
    return _to_distribution(weight, probs, order)


def run_density(c: Circuit, noise: Optional[NoiseModel] = None) -> PostSelectedDistribution:
    """Exact noisy distribution from density-matrix evolution.

    After each gate the gate's qubits go through a depolarizing channel of the
    gate's arity class; readout flips act as a classical confusion channel on
    every measured bit, post-selected ones included.
    """
    weight, probs, order = _run_register(c, mixed=True, noise=noise or NoiseModel())
    return _to_distribution(weight, probs, order)


def _sample_counts(rng, weight, probs, order, shots) -> ShotCounts:
    # lump every failed post-selection into one extra category
    flat = probs.reshape(-1)
    pvals = np.concatenate([[max(0.0, 1.0 - weight)], weight * flat])
    pvals = pvals / pvals.sum()
    drawn = rng.multinomial(shots, pvals)
    width = len(order)
    counts = {format(i, f"0{width}b") if width else "": int(n) for i, n in enumerate(drawn[1:]) if n}
    return ShotCounts(shots, int(drawn[1:].sum()), counts, tuple(order))


def sample_kept(dist: PostSelectedDistribution, shots: int, seed=None) -> PostSelectedDistribution:
    """Empirical distribution of ``shots`` draws from an exact conditional distribution."""
    if shots <= 0:
        raise ValueError("shots must be positive")
    keys = sorted(dist.probs)
    pvals = np.array([dist.probs[k] for k in keys])
    drawn = _as_rng(seed).multinomial(shots, pvals / pvals.sum())
    probs = {k: int(n) / shots for k, n in zip(keys, drawn) if n}
    return PostSelectedDistribution(dist.success_prob, probs, dist.qubit_order, shots)


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def run_shots(c: Circuit, shots: int, seed=None, noise: Optional[NoiseModel] = None) -> ShotCounts:
    """Sample ``shots`` executions, discarding those that fail post-selection.

    Without noise the exact joint distribution is sampled. With noise every
    shot is a stochastic trajectory: after each gate, with the arity-class
    probability, each gate qubit receives a uniformly random non-identity
    Pauli, and every measured bit flips independently with ``readout_flip``.
    Shots sharing an error pattern share one simulation.
    """
    if shots <= 0:
        raise ValueError("shots must be positive")
    _check_bound(c)
    rng = _as_rng(seed)
    if noise is None or noise.is_zero:
        try:
            weight, probs, order = _run_register(c, mixed=False)
        except PostSelectImpossible:
            return ShotCounts(shots, 0, {}, _output_order(c))
        return _sample_counts(rng, weight, probs, order, shots)
    return _run_trajectories(c, shots, rng, noise)


def _run_trajectories(c: Circuit, shots: int, rng, noise: NoiseModel) -> ShotCounts:
    n_gates = len(c.gates)
    arity = np.array([len(g.targets) for g in c.gates], dtype=int)
    p_err = np.array([noise.gate_error(a) for a in arity]) if n_gates else np.zeros(0)
    hit = rng.random((shots, n_gates)) < p_err
    which = rng.integers(1, 4, size=(shots, n_gates, 3))
    ps_qubits = list(c.post_select)
    ps_flip = rng.random((shots, len(ps_qubits))) < noise.readout_flip
    order = _output_order(c)

    groups: dict[tuple, int] = {}
    for s in range(shots):
        gates_hit = np.flatnonzero(hit[s])
        key = (tuple((int(t), tuple(int(x) for x in which[s, t, :arity[t]])) for t in gates_hit),
               tuple(int(x) for x in np.flatnonzero(ps_flip[s])))
        groups[key] = groups.get(key, 0) + 1

    width = len(order)
    total = np.zeros(2 ** width, dtype=np.int64)
    for key in sorted(groups):
        m = groups[key]
        paulis = dict(key[0])
        flips = {ps_qubits[i]: 1 for i in key[1]}
        try:
            weight, probs, _ = _run_register(c, mixed=False, paulis=paulis, flips=flips)
        except PostSelectImpossible:
            continue
        kept = rng.binomial(m, min(1.0, weight))
        if kept:
            total += rng.multinomial(kept, probs.reshape(-1) / probs.sum())

    if noise.readout_flip and width:
        total = _flip_counts(total, width, noise.readout_flip, rng)
    counts = {format(i, f"0{width}b") if width else "": int(n) for i, n in enumerate(total) if n}
    return ShotCounts(shots, int(total.sum()), counts, tuple(order))


def _flip_counts(total: np.ndarray, width: int, r: float, rng) -> np.ndarray:
    out = np.zeros_like(total)
    for idx in np.flatnonzero(total):
        n = int(total[idx])
        masks = (rng.random((n, width)) < r) @ (1 << np.arange(width - 1, -1, -1))
        np.add.at(out, idx ^ masks, 1)
    return out


# -- whole-register helpers ----------------------------------------------------------


def simulate_statevector(c: Circuit) -> StateVector:
    """Full final state on all qubits, ignoring post-selection."""
    _check_bound(c)
    if c.n_qubits > MAX_STATEVECTOR_QUBITS:
        raise TooManyQubits(f"{c.n_qubits} qubits exceed the statevector limit of {MAX_STATEVECTOR_QUBITS}")
    reg = _Register(False, MAX_STATEVECTOR_QUBITS)
    for q in range(c.n_qubits):
        reg.allocate(q)
    for g in c.gates:
        reg.apply(g)
    return StateVector(c.n_qubits, reg.data.reshape(-1).copy())


def simulate_density(c: Circuit, noise: Optional[NoiseModel] = None) -> DensityMatrix:
    """Full final density matrix on all qubits, ignoring post-selection and readout."""
    _check_bound(c)
    if c.n_qubits > MAX_DENSITY_QUBITS:
        raise TooManyQubits(f"{c.n_qubits} qubits exceed the density-matrix limit of {MAX_DENSITY_QUBITS}")
    reg = _Register(True, MAX_DENSITY_QUBITS)
    for q in range(c.n_qubits):
        reg.allocate(q)
    for g in c.gates:
        reg.apply(g)
        if noise is not None:
            reg.depolarize(g.targets, noise.gate_error(len(g.targets)))
    dim = 2 ** c.n_qubits
    return DensityMatrix(c.n_qubits, reg.data.reshape(dim, dim).copy())


def depolarize(rho: np.ndarray, qubits, p: float) -> np.ndarray:
    """Apply the depolarizing channel on ``qubits`` of a ``2^n x 2^n`` matrix."""
    dim = rho.shape[0]
    n = int(round(np.log2(dim)))
    reg = _Register(True, max(n, 1))
    reg.live = list(range(n))
    reg.data = np.asarray(rho, dtype=complex).reshape((2,) * (2 * n))
    reg.depolarize(list(qubits), p)
    return reg.data.reshape(dim, dim)


# -- backends -------------------------------------------------------------------------


@dataclass(frozen=True)
class Backend:
    """How a circuit gets executed.

    ``exact``
        noiseless Born-rule probabilities.
    ``shots``
        ``shots`` samples; noisy trajectories when ``noise`` is given.
    ``density``
        exact noisy probabilities from density-matrix evolution.
    ``noisy``
        ``shots`` samples drawn from the density-matrix distribution. Each
        trajectory shot is an independent draw from exactly this distribution,
        so this is the same estimator at a fraction of the cost.

    ``budget`` says what ``shots`` counts for the sampled kinds. ``"raw"``
    counts executions, so shots failing post-selection are lost. ``"kept"``
    counts surviving shots: ``shots`` samples are drawn from the conditional
    distribution, as if execution repeated until that many survived, and the
    reported ``success_prob`` is the exact one.
    """

    kind: str = "exact"
    shots: int = 8192
    noise: Optional[NoiseModel] = None
    budget: str = "raw"

    KINDS = ("exact", "shots", "density", "noisy")
    BUDGETS = ("raw", "kept")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown backend {self.kind!r}; choose from {self.KINDS}")
        if self.kind in ("shots", "noisy") and self.shots <= 0:
            raise ValueError("shots must be positive")
        if self.budget not in self.BUDGETS:
            raise ValueError(f"unknown shot budget {self.budget!r}; choose from {self.BUDGETS}")

    @property
    def sampled(self) -> bool:
        return self.kind in ("shots", "noisy")

    def run(self, c: Circuit, seed=None) -> PostSelectedDistribution:
        if self.kind == "exact":
            return run_exact(c)
        if self.kind == "density":
            return run_density(c, self.noise)
        if self.budget == "kept":
            noisy = self.noise is not None and not self.noise.is_zero
            weight, probs, order = _run_register(c, mixed=noisy, noise=self.noise if noisy else None)
            return sample_kept(_to_distribution(weight, probs, order), self.shots, seed)
        if self.kind == "shots":
            return run_shots(c, self.shots, seed, self.noise).to_distribution()
        weight, probs, order = _run_register(c, mixed=True, noise=self.noise or NoiseModel())
        return _sample_counts(_as_rng(seed), weight, probs, order, self.shots).to_distribution()

    def describe(self) -> str:
        if self.kind == "exact":
            return "exact"
        parts = [self.kind]
        if self.sampled:
            parts.append(f"shots={self.shots}")
            if self.budget != "raw":
                parts.append(f"budget={self.budget}")
        if self.noise is not None and not self.noise.is_zero:
            n = self.noise
            parts.append(f"noise=p1:{n.p1},p2:{n.p2},p3:{n.p3},ro:{n.readout_flip}")
        return " ".join(parts)
