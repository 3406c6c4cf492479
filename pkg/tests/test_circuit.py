from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from discokernel.circuit import (AnsatzConfig, Circuit, Gate, ParameterMap, Symbol, adjoint, bind,
                                 compile_diagram, compose, dumps, identity, parallel)
from discokernel.exceptions import (DiagramNotSentence, InvalidCircuit, MissingSymbol, PostSelectConflict,
                                    UnsupportedAnsatz, WireMapNotInjective)
from discokernel.pregroup import LexiconEntry, build_diagram, parse_sentence
from discokernel.simulator import run_exact

from conftest import diagram

GOLDEN = Path(__file__).parent / "golden"


def test_compile_man_prepares_meal(lexicon):
    c = compile_diagram(diagram("man prepares meal", lexicon))
    assert c.n_qubits == 5
    assert c.free_symbols == {"man__0", "man__1", "man__2", "prepares__0", "prepares__1",
                              "meal__0", "meal__1", "meal__2"}
    assert dict(c.post_select) == {0: 0, 1: 0, 3: 0, 4: 0}
    assert c.sentence_qubits == (2,)


def test_bare_sentence_type():
    entry = LexiconEntry("rains", "sent")
    c = compile_diagram(parse_sentence(["rains"], [entry]))
    assert c.n_qubits == 1 and not c.post_select and c.sentence_qubits == (0,)


def test_compile_rejects_non_sentences(table):
    with pytest.raises(DiagramNotSentence):
        compile_diagram(build_diagram("skillful man", table))


@pytest.mark.parametrize("name,text", [("man_prepares_meal", "man prepares meal"),
                                       ("skillful_man_prepares_tasty_meal", "skillful man prepares tasty meal")])
def test_dump_golden(lexicon, name, text):
    first = dumps(compile_diagram(diagram(text, lexicon)))
    assert first == dumps(compile_diagram(diagram(text, lexicon)))
    assert first == (GOLDEN / f"{name}.txt").read_text()


def test_parameter_count(train_diagrams):
    for d in train_diagrams:
        c = compile_diagram(d)
        per_word = {"noun": 3, "adj": 1, "tverb": 2}
        expected = sum(per_word[e.category] for e in {e.word: e for e in d.words}.values())
        assert len(c.free_symbols) == expected


def test_only_minimal_ansatz_supported():
    AnsatzConfig(1, 1, 1)
    for bad in [(2, 1, 1), (1, 2, 1), (1, 1, 2)]:
        with pytest.raises(UnsupportedAnsatz):
            AnsatzConfig(*bad)


@pytest.mark.parametrize("kind,targets,angle", [("H", (0, 1), None), ("CX", (0, 0), None),
                                                ("RX", (0,), None), ("H", (0,), 0.3), ("FOO", (0,), None)])
def test_gate_validation(kind, targets, angle):
    with pytest.raises(InvalidCircuit):
        Gate(kind, targets, angle)


def test_circuit_validation():
    with pytest.raises(InvalidCircuit):
        Circuit(1, (Gate("CX", (0, 1)),))
    with pytest.raises(InvalidCircuit):
        Circuit(2, (), {0: 0}, (0,))


def test_bind():
    c = Circuit(1, (Gate("RX", (0,), Symbol("a")),))
    bound = bind(c, {"a": 0.0})
    assert bound.gates[0].angle == 0.0 and bound.is_bound
    with pytest.raises(MissingSymbol):
        bind(c, ParameterMap())
    with pytest.raises(KeyError):
        ParameterMap()["nope"]


def test_adjoint_of_rotation():
    c = Circuit(1, (Gate("RX", (0,), 0.7),))
    assert adjoint(c).gates == (Gate("RX", (0,), -0.7),)


KINDS = st.sampled_from(["H", "RX", "RZ", "CRZ", "CX", "CSWAP"])


@st.composite
def random_circuits(draw, symbolic=False):
    n = draw(st.integers(3, 5))
    gates = []
    for _ in range(draw(st.integers(0, 12))):
        kind = draw(KINDS)
        arity = {"H": 1, "RX": 1, "RZ": 1, "CRZ": 2, "CX": 2, "CSWAP": 3}[kind]
        targets = tuple(draw(st.permutations(range(n)))[:arity])
        angle = None
        if kind in ("RX", "RZ", "CRZ"):
            angle = Symbol(f"w__{draw(st.integers(0, 3))}") if symbolic else draw(
                st.floats(-7, 7, allow_nan=False))
        gates.append(Gate(kind, targets, angle))
    return Circuit(n, tuple(gates))


@settings(max_examples=60, deadline=None)
@given(random_circuits(symbolic=True), st.lists(st.floats(-7, 7, allow_nan=False), min_size=4, max_size=4))
def test_bind_commutes_with_adjoint(c, values):
    params = {f"w__{k}": v for k, v in enumerate(values)}
    assert bind(adjoint(c), params) == adjoint(bind(c, params))


@settings(max_examples=60, deadline=None)
@given(random_circuits())
def test_adjoint_involution_and_unitarity(c):
    assert adjoint(adjoint(c)) == c
    dist = run_exact(compose(c, adjoint(c)))
    assert dist.probs["0" * c.n_qubits] == pytest.approx(1.0, abs=1e-10)


def test_free_symbols_match_gates(random_store, train_diagrams):
    for d in train_diagrams[:10]:
        c = compile_diagram(d)
        names = {g.angle.name for g in c.gates if isinstance(g.angle, Symbol)}
        assert names == c.free_symbols
        assert set(c.free_symbols) <= set(random_store.params)


def test_parallel_and_compose():
    c1 = Circuit(1, (Gate("H", (0,)),), {}, (0,))
    c2 = Circuit(1, (Gate("RX", (0,), 0.5),), {}, (0,))
    both = parallel(c1, c2)
    assert both.n_qubits == 2 and both.gates[1].targets == (1,)
    assert both.sentence_qubits == (0, 1)
    assert compose(c1, identity(1)) == c1


def test_compose_errors():
    a = Circuit(2, (), {0: 0}, (1,))
    b = Circuit(2, (), {0: 1}, ())
    with pytest.raises(PostSelectConflict):
        compose(a, b)
    with pytest.raises(WireMapNotInjective):
        compose(a, Circuit(2), {0: 1, 1: 1})


def test_compose_fresh_wires():
    a = Circuit(1, (Gate("H", (0,)),), {}, (0,))
    b = Circuit(2, (Gate("CX", (0, 1)),), {1: 0})
    c = compose(a, b, {0: 0, 1: 1})
    assert c.n_qubits == 2 and dict(c.post_select) == {1: 0} and c.sentence_qubits == (0,)


def test_bell_effect_undoes_bell_state():
    # prepare (|00> + |11>)/sqrt 2, then the cup lowering CX, H(left) with both post-selected
    c = Circuit(2, (Gate("H", (0,)), Gate("CX", (0, 1)), Gate("CX", (0, 1)), Gate("H", (0,))), {0: 0, 1: 0})
    assert run_exact(c).success_prob == pytest.approx(1.0, abs=1e-12)
