"""Gate-level circuits with symbolic angles, and the diagram compiler.

Every wire of a diagram becomes one qubit starting in ``|0>``. Word boxes are
lowered with the IQP ansatz and every cup with a Bell effect (``CX`` then
``H`` on the left wire, both qubits post-selected on 0).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Union

from .exceptions import (DiagramNotSentence, InvalidCircuit, MissingSymbol,
                         PostSelectConflict, UnsupportedAnsatz,
                         WireMapNotInjective)
from .pregroup import Diagram, reduces_to_sentence

__all__ = [
    "Symbol", "Gate", "Circuit", "ParameterMap", "AnsatzConfig",
    "GATE_ARITY", "compile_diagram", "bind", "adjoint", "compose", "parallel",
    "identity", "dumps", "word_symbols",
]

GATE_ARITY = {"H": 1, "RX": 1, "RZ": 1, "CRZ": 2, "CX": 2, "CSWAP": 3}
ROTATIONS = frozenset({"RX", "RZ", "CRZ"})


@dataclass(frozen=True)
class Symbol:
    """A named angle, optionally scaled (adjoints carry ``scale=-1``)."""

    name: str
    scale: float = 1.0

    def __neg__(self):
        return Symbol(self.name, -self.scale)

    def __str__(self):
        if self.scale == 1.0:
            return self.name
        if self.scale == -1.0:
            return "-" + self.name
        return f"{self.scale!r}*{self.name}"


Angle = Union[Symbol, float, None]


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, ...]
    angle: Angle = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(q) for q in self.targets))
        if self.kind not in GATE_ARITY:
            raise InvalidCircuit(f"unknown gate kind {self.kind!r}")
        if len(self.targets) != GATE_ARITY[self.kind]:
            raise InvalidCircuit(f"{self.kind} takes {GATE_ARITY[self.kind]} qubits, got {self.targets}")
        if len(set(self.targets)) != len(self.targets):
            raise InvalidCircuit(f"{self.kind} targets must be distinct, got {self.targets}")
        if (self.kind in ROTATIONS) != (self.angle is not None):
            raise InvalidCircuit(f"{self.kind} angle mismatch: {self.angle!r}")
        if isinstance(self.angle, (int, float)) and not isinstance(self.angle, bool):
            object.__setattr__(self, "angle", float(self.angle))

    @property
    def is_bound(self) -> bool:
        return not isinstance(self.angle, Symbol)

    def remap(self, wire_map: Mapping[int, int]) -> "Gate":
        return Gate(self.kind, tuple(wire_map[q] for q in self.targets), self.angle)

    def inverse(self) -> "Gate":
        if self.kind in ROTATIONS:
            return Gate(self.kind, self.targets, -self.angle)
        return self


@dataclass(frozen=True)
class Circuit:
    """An immutable circuit on ``n_qubits`` wires, all prepared in ``|0>``.

    ``post_select`` maps qubit -> required measurement bit and
    ``sentence_qubits`` names the open sentence wire(s) read as output.
    """

    n_qubits: int
    gates: tuple[Gate, ...] = ()
    post_select: Mapping[int, int] = field(default_factory=dict)
    sentence_qubits: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n_qubits < 1:
            raise InvalidCircuit("a circuit needs at least one qubit")
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "sentence_qubits", tuple(self.sentence_qubits))
        ps = {int(q): int(b) for q, b in sorted(dict(self.post_select).items())}
        object.__setattr__(self, "post_select", MappingProxyType(ps))
        for g in self.gates:
            if max(g.targets) >= self.n_qubits:
                raise InvalidCircuit(f"gate {g} addresses a qubit outside 0..{self.n_qubits - 1}")
        for q, bit in ps.items():
            if not 0 <= q < self.n_qubits or bit not in (0, 1):
                raise InvalidCircuit(f"bad post-selection entry {q}={bit}")
        if any(not 0 <= q < self.n_qubits for q in self.sentence_qubits):
            raise InvalidCircuit("sentence qubit out of range")
        if set(ps) & set(self.sentence_qubits):
            raise InvalidCircuit("post-selected qubits overlap sentence qubits")

    def __hash__(self):
        return hash((self.n_qubits, self.gates, tuple(self.post_select.items()), self.sentence_qubits))

    @property
    def free_symbols(self) -> frozenset[str]:
        return frozenset(g.angle.name for g in self.gates if isinstance(g.angle, Symbol))

    @property
    def is_bound(self) -> bool:
        return all(g.is_bound for g in self.gates)

    def __str__(self):
        return dumps(self)


class ParameterMap(dict):
    """Symbol name -> angle in radians; a missing name is always an error."""

    def __missing__(self, name):
        raise MissingSymbol(name)


@dataclass(frozen=True)
class AnsatzConfig:
    q_n: int = 1
    q_s: int = 1
    layers: int = 1

    def __post_init__(self):
        if (self.q_n, self.q_s, self.layers) != (1, 1, 1):
            raise UnsupportedAnsatz(
                f"only q_n = q_s = 1 with one layer is supported, got "
                f"q_n={self.q_n}, q_s={self.q_s}, layers={self.layers}")


def word_symbols(word: str, n_wires: int) -> list[str]:
    """Names of the parameters the IQP ansatz gives a word box."""
    count = 3 if n_wires == 1 else n_wires - 1
    return [f"{word}__{k}" for k in range(count)]


def _word_gates(word: str, qubits: list[int]) -> list[Gate]:
    names = word_symbols(word, len(qubits))
    if len(qubits) == 1:
        q = qubits[0]
        return [Gate("RX", (q,), Symbol(names[0])),
                Gate("RZ", (q,), Symbol(names[1])),
                Gate("RX", (q,), Symbol(names[2]))]
    gates = [Gate("H", (q,)) for q in qubits]
    gates += [Gate("CRZ", (a, b), Symbol(name))
              for (a, b), name in zip(zip(qubits, qubits[1:]), names)]
    return gates


def compile_diagram(d: Diagram, cfg: AnsatzConfig | None = None) -> Circuit:
    """Lower a sentence diagram to a symbolic circuit under the IQP ansatz.

    Gates are emitted word by word; each cup is emitted as soon as both of
    its wires exist, which keeps the set of simultaneously live qubits small
    without changing the circuit's meaning (the gates act on disjoint wires).
    """
    cfg = cfg or AnsatzConfig()
    if not reduces_to_sentence(d):
        raise DiagramNotSentence(f"diagram {str(d)!r} does not reduce to a sentence")
    gates: list[Gate] = []
    post_select: dict[int, int] = {}
    pending = sorted(d.cups, key=lambda c: c[1])
    placed = 0
    for entry, offset in zip(d.words, d.word_offsets):
        qubits = list(range(offset, offset + entry.n_wires))
        gates += _word_gates(entry.word, qubits)
        placed = offset + entry.n_wires
        while pending and pending[0][1] < placed:
            left, right = pending.pop(0)
            gates += [Gate("CX", (left, right)), Gate("H", (left,))]
            post_select[left] = post_select[right] = 0
    return Circuit(len(d.wires), tuple(gates), post_select, tuple(d.open_wires))


def _bind_angle(angle: Angle, params: Mapping[str, float]) -> Angle:
    if not isinstance(angle, Symbol):
        return angle
    try:
        value = params[angle.name]
    except KeyError:
        raise MissingSymbol(angle.name) from None
    return angle.scale * float(value)


def bind(c: Circuit, params: Mapping[str, float]) -> Circuit:
    gates = tuple(Gate(g.kind, g.targets, _bind_angle(g.angle, params)) for g in c.gates)
    return Circuit(c.n_qubits, gates, c.post_select, c.sentence_qubits)


def adjoint(c: Circuit) -> Circuit:
    """Reverse the gate list and invert each gate.

    Post-selection and sentence qubits are dropped: projections have no
    adjoint, so callers re-state measurement semantics on the result.
    """
    return Circuit(c.n_qubits, tuple(g.inverse() for g in reversed(c.gates)))


def identity(n_qubits: int) -> Circuit:
    return Circuit(n_qubits)


def _merge_post_select(a: Mapping[int, int], b: Mapping[int, int]) -> dict[int, int]:
    merged = dict(a)
    for q, bit in b.items():
        if merged.get(q, bit) != bit:
            raise PostSelectConflict(f"qubit {q} post-selected on both {merged[q]} and {bit}")
        merged[q] = bit
    return merged


def compose(a: Circuit, b: Circuit, wire_map: Mapping[int, int] | None = None) -> Circuit:
    """Append ``b`` after ``a``, sending b's qubit ``q`` to ``wire_map[q]``.

    Targets at or beyond ``a.n_qubits`` allocate fresh wires. The result keeps
    a's sentence qubits.
    """
    if wire_map is None:
        wire_map = {q: q for q in range(b.n_qubits)}
    wire_map = dict(wire_map)
    if set(wire_map) != set(range(b.n_qubits)):
        raise WireMapNotInjective(f"wire map must cover qubits 0..{b.n_qubits - 1} of the appended circuit")
    if len(set(wire_map.values())) != len(wire_map):
        raise WireMapNotInjective(f"wire map {wire_map} is not injective")
    if min(wire_map.values()) < 0:
        raise WireMapNotInjective("wire map targets must be non-negative")
    n = max(a.n_qubits, max(wire_map.values()) + 1)
    gates = a.gates + tuple(g.remap(wire_map) for g in b.gates)
    b_ps = {wire_map[q]: bit for q, bit in b.post_select.items()}
    return Circuit(n, gates, _merge_post_select(a.post_select, b_ps), a.sentence_qubits)


def parallel(a: Circuit, b: Circuit) -> Circuit:
    off = a.n_qubits
    shift = {q: q + off for q in range(b.n_qubits)}
    gates = a.gates + tuple(g.remap(shift) for g in b.gates)
    ps = _merge_post_select(a.post_select, {q + off: bit for q, bit in b.post_select.items()})
    return Circuit(off + b.n_qubits, gates, ps,
                   a.sentence_qubits + tuple(q + off for q in b.sentence_qubits))


def _fmt_angle(angle: Angle) -> str:
    if angle is None:
        return ""
    if isinstance(angle, Symbol):
        return " " + str(angle)
    return " " + repr(float(angle))


def dumps(c: Circuit) -> str:
    """Deterministic text form: one gate per line, then post-selection, then sentence wires."""
    lines = [f"{g.kind} {','.join(map(str, g.targets))}{_fmt_angle(g.angle)}" for g in c.gates]
    lines += [f"POSTSELECT {q}={bit}" for q, bit in c.post_select.items()]
    lines.append("SENTENCE " + " ".join(map(str, c.sentence_qubits)))
    return "\n".join(lines) + "\n"
