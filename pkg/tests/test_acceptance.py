"""End-to-end acceptance checks.

Two full pipeline runs back these tests: a noiseless one (exact backend,
seven seeds, both kernels) and a noisy one (default noise profile, SWAP
kernel). Each criterion records one PASS/FAIL line, printed in the terminal
summary.
"""
import json
import time
from pathlib import Path

import numpy as np
import pytest

from discokernel import oracles
from discokernel.circuit import Circuit, Gate, adjoint, bind, compose
from discokernel.cli import DEFAULT_SEEDS, main
from discokernel.dataset import read_tsv
from discokernel.embeddings import _symbolic, load_embeddings
from discokernel.kernels import gram, kernel_estimate, load_gram, region_stats, swap_test_kernel, transition_circuit
from discokernel.simulator import (Backend, NoiseModel, depolarize, run_density, run_exact,
                                   simulate_statevector)
from discokernel.svm import load_model
from discokernel.validation import check_sentences

RESULTS: dict[int, tuple[bool, str]] = {}
SEEDS = list(DEFAULT_SEEDS)


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = (bool(ok), detail)
    assert ok, f"criterion {n}: {detail}"


def _pipeline(out: Path, *extra) -> dict:
    timings = {}
    base = ["--out", str(out), "--seeds", ",".join(map(str, SEEDS)), *extra]
    for stage in ("gen-data", "train", "gram", "svm", "full"):
        t0 = time.perf_counter()
        assert main([stage, *base]) == 0, stage
        timings[stage] = time.perf_counter() - t0
    return timings


@pytest.fixture(scope="module")
def noiseless(tmp_path_factory):
    out = tmp_path_factory.mktemp("noiseless")
    return out, _pipeline(out)


@pytest.fixture(scope="module")
def noisy(tmp_path_factory, noiseless):
    out = tmp_path_factory.mktemp("noisy")
    return out, _pipeline(out, "--backend", "noisy", "--kernel", "swap")


@pytest.fixture(scope="module")
def task(noiseless, lexicon):
    out, _ = noiseless
    train = read_tsv(out / "train.tsv", lexicon)
    test = read_tsv(out / "test.tsv", lexicon)
    return (check_sentences(train, lexicon), np.array([s.label for s in train]),
            check_sentences(test, lexicon), np.array([s.label for s in test]))


def _metrics(out: Path) -> dict:
    return json.loads((out / "metrics.json").read_text())


def _acc(out: Path, section: str, kernel: str, backend: str) -> dict:
    return {r["seed"]: r["test_acc"] for r in _metrics(out)[section]
            if r["kernel"] == kernel and r["backend"] == backend}


def _mean_regions(out: Path, kernel: str, y) -> dict:
    rows = [region_stats(load_gram(out / f"gram_{kernel}_{s}_train.csv").values, y) for s in SEEDS]
    return {name: float(np.mean([r[i].mean for r in rows])) for i, name in enumerate(["Class 0", "Class 1", "Mixed"])}


def test_criterion_01_swap_equals_fidelity_oracle(noiseless, task):
    out, _ = noiseless
    X, *_ = task
    store = load_embeddings(out / f"embeddings_{SEEDS[0]}.txt")
    t0 = time.perf_counter()
    states = [oracles.sentence_state(bind(_symbolic(d), store.params)) for d in X]
    worst = 0.0
    for i, xi in enumerate(X):
        for j, xj in enumerate(X):
            ref = abs(np.vdot(states[j], states[i])) ** 2
            worst = max(worst, abs(swap_test_kernel(xi, xj, store) - ref))
    elapsed = time.perf_counter() - t0
    n_pairs = len(X) ** 2
    record(1, n_pairs == 4900 and worst <= 1e-10 and elapsed < 600,
           f"{n_pairs} pairs, max |swap - oracle| = {worst:.2e} (tol 1e-10), {elapsed:.0f}s (limit 600s)")


def test_criterion_02_swap_diagonal_and_symmetry(noiseless, task):
    out, _ = noiseless
    X, *_ = task
    store = load_embeddings(out / f"embeddings_{SEEDS[0]}.txt")
    # B is a distinct list, so every ordered pair is evaluated rather than mirrored
    full = gram(X, list(X), "swap", store).values
    diag_err = max(float(np.abs(np.diag(load_gram(out / f"gram_swap_{s}_train.csv").values) - 1).max())
                   for s in SEEDS)
    diag_err = max(diag_err, float(np.abs(np.diag(full) - 1).max()))
    sym_err = float(np.abs(full - full.T).max())
    record(2, diag_err <= 1e-10 and sym_err <= 1e-10,
           f"max |K_ii - 1| = {diag_err:.2e}, max |K_ij - K_ji| = {sym_err:.2e} (tol 1e-10)")


def test_criterion_03_transition_diagonal_deficiency(noiseless, task):
    out, _ = noiseless
    X, *_ = task
    diag_min = {s: float(np.diag(load_gram(out / f"gram_transition_{s}_train.csv").values).min()) for s in SEEDS}
    store = load_embeddings(out / f"embeddings_{SEEDS[0]}.txt")
    worst = 0.0
    pairs = [(i, i) for i in range(len(X))] + [(i, (7 * i + 3) % len(X)) for i in range(len(X))]
    for i, j in pairs:
        c = transition_circuit(*(bind(_symbolic(X[k]), store.params) for k in (i, j)))
        q = c.sentence_qubits[0]
        worst = max(worst, abs(run_exact(c).marginal(q, 0) - run_density(c, NoiseModel()).marginal(q, 0)))
    deficient = all(v < 0.99 for v in diag_min.values())
    record(3, deficient and worst <= 1e-10,
           f"min diagonal per seed {[round(v, 3) for v in diag_min.values()]} (need < 0.99); "
           f"exact vs density on {len(pairs)} composed circuits max diff {worst:.2e} (tol 1e-10)")


def test_criterion_04_explicit_accuracy(noiseless):
    out, timings = noiseless
    acc = _acc(out, "explicit", "explicit", "exact")
    mean = float(np.mean(list(acc.values())))
    stderr = float(np.std(list(acc.values()), ddof=1) / np.sqrt(len(acc)))
    record(4, len(acc) == 7 and 0.85 <= mean <= 1.0 and timings["train"] < 1800,
           f"explicit test accuracy {mean:.4f} +/- {stderr:.4f} over {len(acc)} seeds (need [0.85, 1]); "
           f"training took {timings['train']:.0f}s (limit 1800s)")


def test_criterion_05_kernels_beat_explicit(noiseless):
    out, _ = noiseless
    explicit = _acc(out, "explicit", "explicit", "exact")
    swap = _acc(out, "svm", "swap", "exact")
    transition = _acc(out, "svm", "transition", "exact")
    wins = sum(swap[s] >= explicit[s] for s in SEEDS)
    swap_mean, trans_mean = np.mean(list(swap.values())), np.mean(list(transition.values()))
    record(5, wins >= 5 and swap_mean >= trans_mean,
           f"swap SVM >= explicit on {wins}/{len(SEEDS)} seeds (need >= 5); mean test swap {swap_mean:.4f} "
           f"vs transition {trans_mean:.4f} (need swap >= transition)")


def test_criterion_06_region_ordering(noiseless, task):
    out, _ = noiseless
    _, y, _, _ = task
    details, ok = [], True
    for kernel in ("transition", "swap"):
        m = _mean_regions(out, kernel, y)
        ok &= m["Class 0"] > m["Class 1"] > m["Mixed"] and m["Mixed"] < 0.5
        details.append(f"{kernel}: C0 {m['Class 0']:.3f} C1 {m['Class 1']:.3f} Mixed {m['Mixed']:.3f}")
    record(6, ok, "; ".join(details) + " (need C0 > C1 > Mixed, Mixed < 0.5)")


def test_criterion_07_shot_convergence(noiseless, task):
    out, _ = noiseless
    X, *_ = task
    store = load_embeddings(out / f"embeddings_{SEEDS[0]}.txt")
    rng = np.random.default_rng(7)
    pairs = [tuple(int(v) for v in rng.integers(0, len(X), 2)) for _ in range(50)]
    backend = Backend("shots", 8192, budget="kept")
    details, ok = [], True
    for kind in ("swap", "transition"):
        failures = 0
        for n, (i, j) in enumerate(pairs):
            exact = kernel_estimate(kind, X[i], X[j], store)
            est = kernel_estimate(kind, X[i], X[j], store, backend, seed=n)
            sigma = np.sqrt(exact.p0 * (1 - exact.p0) / est.shots_kept)
            failures += abs(est.p0 - exact.p0) > 4 * sigma + 1e-12
        ok &= failures <= 1
        details.append(f"{kind}: {failures}/50 outside 4 sigma")
    record(7, ok, "; ".join(details) + " (need <= 1)")


def test_criterion_08_noise_degradation(noiseless, noisy, task):
    clean_out, _ = noiseless
    noisy_out, _ = noisy
    _, y, _, _ = task
    clean_acc = _acc(clean_out, "explicit", "explicit", "exact")
    noisy_acc = _acc(noisy_out, "explicit", "explicit", "noisy")
    drop = np.mean([clean_acc[s] for s in SEEDS]) - np.mean([noisy_acc[s] for s in SEEDS])
    clean_regions = _mean_regions(clean_out, "swap", y)
    noisy_regions = _mean_regions(noisy_out, "swap", y)
    contracts = all(abs(noisy_regions[r] - 0.5) < abs(clean_regions[r] - 0.5) for r in ("Class 0", "Mixed"))
    svm_noisy = float(np.mean(list(_acc(noisy_out, "svm", "swap", "noisy").values())))
    record(8, drop < 0.10 and contracts and svm_noisy >= 0.85,
           f"(a) explicit accuracy drop {100 * drop:.1f} points (need < 10); "
           f"(b) swap regions C0 {clean_regions['Class 0']:.3f}->{noisy_regions['Class 0']:.3f}, "
           f"Mixed {clean_regions['Mixed']:.3f}->{noisy_regions['Mixed']:.3f} (need closer to 0.5); "
           f"(c) noisy swap SVM test accuracy {svm_noisy:.4f} (need >= 0.85)")


def test_criterion_09_smo_correctness(noiseless, noisy):
    from discokernel.svm import dual_objective, fit_precomputed, fit_qp_oracle, symmetrize
    rng = np.random.default_rng(99)
    worst, count = 0.0, 0
    for n in (2, 3, 4):
        for t in range(40):
            X = rng.normal(size=(n, 3))
            K = X @ X.T + (0.2 * rng.normal(size=(n, n)) if t % 4 == 0 else 0.0)
            y = rng.integers(0, 2, n)
            y[0], y[1] = 0, 1
            C = float(rng.choice([0.1, 1.0, 10.0]))
            ypm = np.where(y == 1, 1.0, -1.0)
            Ks = symmetrize(K)
            gap = dual_objective(fit_qp_oracle(K, y, C).alphas, Ks, ypm) - dual_objective(
                fit_precomputed(K, y, C).alphas, Ks, ypm)
            worst, count = max(worst, abs(gap)), count + 1
    models = sorted(noiseless[0].glob("svm_*.txt")) + sorted(noisy[0].glob("svm_*.txt"))
    feasible = all(abs(m.alphas @ m.labels) <= 1e-8 and m.alphas.min() >= 0 and m.alphas.max() <= m.C
                   for m in map(load_model, models))
    record(9, count >= 100 and worst <= 1e-2 and feasible and len(models) == 21,
           f"{count} random instances, max objective gap {worst:.2e} (tol 1e-2); "
           f"{len(models)} pipeline models feasible: {feasible}")


def test_criterion_10_simulator_battery():
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    checks = {}
    kinds = ["H", "RX", "RZ", "CRZ", "CX", "CSWAP"]
    arity = {"H": 1, "RX": 1, "RZ": 1, "CRZ": 2, "CX": 2, "CSWAP": 3}
    norm_err = unit_err = 0.0
    for _ in range(200):
        n = int(rng.integers(3, 7))
        gates = []
        for _ in range(int(rng.integers(1, 20))):
            kind = kinds[int(rng.integers(len(kinds)))]
            targets = tuple(int(q) for q in rng.permutation(n)[:arity[kind]])
            gates.append(Gate(kind, targets, float(rng.uniform(-7, 7)) if kind in ("RX", "RZ", "CRZ") else None))
        c = Circuit(n, tuple(gates))
        norm_err = max(norm_err, abs(simulate_statevector(c).norm - 1))
        unit_err = max(unit_err, abs(run_exact(compose(c, adjoint(c))).probs.get("0" * n, 0.0) - 1))
    checks["normalization"] = norm_err <= 1e-10
    checks["unitarity"] = unit_err <= 1e-10
    bell = run_exact(Circuit(2, (Gate("H", (0,)), Gate("CX", (0, 1))), {1: 0}, (0,)))
    checks["bell"] = abs(bell.success_prob - 0.5) <= 1e-12
    fixed = max(float(np.abs(depolarize(np.eye(2 ** n) / 2 ** n, qs, 0.3) - np.eye(2 ** n) / 2 ** n).max())
                for n, qs in [(1, [0]), (2, [0]), (2, [0, 1])])
    checks["depolarizing fixed point"] = fixed <= 1e-12
    chan = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 6))
        gates = [Gate("H", (q,)) for q in range(n)] + [Gate("CRZ", (q, q + 1), float(rng.uniform(0, 6)))
                                                      for q in range(n - 1)]
        c = Circuit(n, tuple(gates), {0: 0}, tuple(range(1, n)))
        a, b = run_exact(c), run_density(c, NoiseModel())
        chan = max(chan, max(abs(a.probs.get(k, 0) - b.probs.get(k, 0)) for k in set(a.probs) | set(b.probs)))
    checks["zero-noise channel"] = chan <= 1e-10
    elapsed = time.perf_counter() - t0
    record(10, all(checks.values()) and elapsed < 60,
           ", ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in checks.items()) + f" in {elapsed:.1f}s (limit 60s)")
