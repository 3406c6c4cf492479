"""Soft-margin support vector machine over precomputed kernel matrices.

:func:`fit_precomputed` solves the dual with sequential minimal
optimization (SMO) in a fixed scan order, so a given Gram matrix always
yields the same model. :func:`fit_qp_oracle` solves tiny instances exactly
by enumerating active sets and is meant for validating the solver.
"""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DegenerateLabels, LengthMismatch, NotSquare, TooLarge
from .validation import check_binary_labels

__all__ = [
    "SvmModel", "symmetrize", "dual_objective", "fit_precomputed", "fit_qp_oracle",
    "decision_function", "predict", "predict_many", "save_model", "load_model", "PrecomputedSVC",
]

ORACLE_MAX_POINTS = 8


@dataclass(frozen=True)
class SvmModel:
    """Dual solution; ``labels`` are in {-1, +1}."""

    alphas: np.ndarray
    bias: float
    labels: np.ndarray
    C: float
    tol: float = 1e-3

    @property
    def support_indices(self) -> np.ndarray:
        return np.flatnonzero(self.alphas > self.tol * self.C)

    @property
    def n_support(self) -> int:
        return int(self.support_indices.size)

    @property
    def coef(self) -> np.ndarray:
        return self.alphas * self.labels


def symmetrize(K) -> np.ndarray:
    K = np.asarray(K, dtype=float)
    return 0.5 * (K + K.T)


def _prepare(K, y):
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise NotSquare(f"Gram matrix must be square, got shape {K.shape}")
    y01 = check_binary_labels(y, K.shape[0])
    if len(np.unique(y01)) < 2:
        raise DegenerateLabels("training labels contain a single class")
    return symmetrize(K), np.where(y01 == 1, 1.0, -1.0)


def dual_objective(alphas, K, y_pm) -> float:
    """``sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij`` with ``y`` in {-1, +1}."""
    v = np.asarray(alphas) * np.asarray(y_pm)
    return float(np.sum(alphas) - 0.5 * v @ np.asarray(K) @ v)


def _bias(alphas, K, y, C, tol) -> float:
    g = K @ (alphas * y)
    free = (alphas > tol * C) & (alphas < C - tol * C)
    if free.any():
        return float(np.mean(y[free] - g[free]))
    # every multiplier at a bound: take the middle of the interval the KKT conditions allow
    at_zero, at_c = alphas <= tol * C, ~(alphas <= tol * C)
    lower = ((y > 0) & at_zero) | ((y < 0) & at_c)
    upper = ((y < 0) & at_zero) | ((y > 0) & at_c)
    lo = np.max(y[lower] - g[lower]) if lower.any() else None
    hi = np.min(y[upper] - g[upper]) if upper.any() else None
    if lo is None:
        return float(hi)
    if hi is None:
        return float(lo)
    return float(0.5 * (lo + hi))


def fit_precomputed(K, y, C: float = 1.0, tol: float = 1e-3, max_passes: int = 200,
                    max_sweeps: int = 100_000) -> SvmModel:
    """Train on a square Gram matrix with SMO.

    The matrix is symmetrized as ``(K + K.T) / 2`` first. Each sweep visits
    the KKT violators in index order and pairs each with the partner of
    largest ``|E_i - E_j|``, falling back through the remaining partners in
    that order. Because the scan is deterministic, a sweep that changes
    nothing would repeat forever, so training stops after the first such
    sweep; ``max_passes`` caps how many sweeps may pass without the dual
    objective improving by more than ``1e-6 * tol``, and ``max_sweeps`` caps the
    total. The dual objective is checked to be non-decreasing after each
    accepted step.
    """
    if C <= 0:
        raise ValueError("C must be positive")
    if tol <= 0:
        raise ValueError("tol must be positive")
    K, y = _prepare(K, y)
    n = len(y)
    alphas = np.zeros(n)
    b = 0.0
    err = -y.copy()  # f(x_i) - y_i with f = 0 initially
    objective = 0.0
    eps = 1e-12
    scale = max(1.0, float(np.abs(K).max()))

    def step(i, j) -> bool:
        nonlocal b, objective
        if i == j:
            return False
        ai, aj = alphas[i], alphas[j]
        s = y[i] * y[j]
        if s > 0:
            lo, hi = max(0.0, ai + aj - C), min(C, ai + aj)
        else:
            lo, hi = max(0.0, aj - ai), min(C, C + aj - ai)
        if hi - lo < eps:
            return False
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta > eps:
            new_aj = min(max(aj + y[j] * (err[i] - err[j]) / eta, lo), hi)
        else:
            # flat or concave-up along the constraint line: best endpoint wins
            def obj_at(t):
                trial = alphas.copy()
                trial[j] = t
                trial[i] = ai + s * (aj - t)
                return dual_objective(trial, K, y)
            f_lo, f_hi = obj_at(lo), obj_at(hi)
            if f_lo > f_hi + eps * scale:
                new_aj = lo
            elif f_hi > f_lo + eps * scale:
                new_aj = hi
            else:
                return False
        if new_aj < eps * C:
            new_aj = 0.0
        elif new_aj > C - eps * C:
            new_aj = C
        if abs(new_aj - aj) < eps * (new_aj + aj + eps):
            return False
        new_ai = ai + s * (aj - new_aj)
        new_ai = 0.0 if new_ai < eps * C else (C if new_ai > C - eps * C else new_ai)
        trial = alphas.copy()
        trial[i], trial[j] = new_ai, new_aj
        new_objective = dual_objective(trial, K, y)
        if new_objective < objective - 1e-9 * scale * max(1.0, abs(objective)):
            raise AssertionError(f"SMO step ({i}, {j}) decreased the dual objective "
                                 f"{objective!r} -> {new_objective!r}")
        if new_objective <= objective:
            return False
        di, dj = new_ai - ai, new_aj - aj
        b1 = b - err[i] - y[i] * di * K[i, i] - y[j] * dj * K[i, j]
        b2 = b - err[j] - y[i] * di * K[i, j] - y[j] * dj * K[j, j]
        if 0.0 < new_ai < C:
            new_b = b1
        elif 0.0 < new_aj < C:
            new_b = b2
        else:
            new_b = 0.5 * (b1 + b2)
        err[:] += y[i] * di * K[:, i] + y[j] * dj * K[:, j] + (new_b - b)
        alphas[i], alphas[j], b = new_ai, new_aj, new_b
        objective = new_objective
        return True

    stale = 0
    for _ in range(max_sweeps):
        changed = False
        before = objective
        for i in range(n):
            r = y[i] * err[i]
            if not ((r < -tol and alphas[i] < C) or (r > tol and alphas[i] > 0)):
                continue
            order = sorted((j for j in range(n) if j != i), key=lambda j: (-abs(err[i] - err[j]), j))
            for j in order:
                if step(i, j):
                    changed = True
                    break
        if not changed:
            break
        stale = stale + 1 if objective - before <= tol * 1e-6 else 0
        if stale >= max_passes:
            break
    return SvmModel(alphas, _bias(alphas, K, y, C, tol), y, float(C), float(tol))


def fit_qp_oracle(K, y, C: float = 1.0, tol: float = 1e-9) -> SvmModel:
    """Exact dual optimum for at most eight points.

    Every optimum lies in the relative interior of some face of the feasible
    polytope, where each multiplier is 0, C or free. For each such pattern the
    stationarity conditions on the free multipliers together with the
    equality constraint form a linear system; the best feasible solution over
    all ``3**n`` patterns is the optimum.
    """
    K, y = _prepare(K, y)
    n = len(y)
    if n > ORACLE_MAX_POINTS:
        raise TooLarge(f"oracle handles at most {ORACLE_MAX_POINTS} points, got {n}")
    Q = (y[:, None] * y[None, :]) * K
    best, best_alpha = -np.inf, None
    for pattern in itertools.product((0, 1, 2), repeat=n):
        pattern = np.array(pattern)
        free = np.flatnonzero(pattern == 2)
        alpha = np.where(pattern == 1, C, 0.0)
        if free.size:
            fixed = np.flatnonzero(pattern != 2)
            m = free.size
            A = np.zeros((m + 1, m + 1))
            A[:m, :m] = Q[np.ix_(free, free)]
            A[:m, m] = y[free]
            A[m, :m] = y[free]
            rhs = np.concatenate([1.0 - Q[np.ix_(free, fixed)] @ alpha[fixed], [-y[fixed] @ alpha[fixed]]])
            sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
            if np.abs(A @ sol - rhs).max() > 1e-8:
                continue
            alpha[free] = sol[:m]
        if abs(y @ alpha) > 1e-8 or alpha.min() < -tol or alpha.max() > C + tol:
            continue
        alpha = np.clip(alpha, 0.0, C)
        value = dual_objective(alpha, K, y)
        if value > best + 1e-12:
            best, best_alpha = value, alpha
    return SvmModel(best_alpha, _bias(best_alpha, K, y, C, 1e-6), y, float(C), 1e-6)


def decision_function(model: SvmModel, K_rows) -> np.ndarray:
    """Scores for rows of ``K(x_test, x_train)``."""
    K_rows = np.atleast_2d(np.asarray(K_rows, dtype=float))
    if K_rows.shape[1] != len(model.alphas):
        raise LengthMismatch(f"kernel rows have {K_rows.shape[1]} columns, model has {len(model.alphas)} training points")
    return K_rows @ model.coef + model.bias


def predict(model: SvmModel, k_row) -> tuple[int, float]:
    """Label and score for one kernel row; a score of exactly 0 gives label 1."""
    k_row = np.asarray(k_row, dtype=float)
    if k_row.ndim != 1:
        raise LengthMismatch(f"expected one kernel row, got shape {k_row.shape}")
    score = float(decision_function(model, k_row)[0])
    return int(score >= 0.0), score


def predict_many(model: SvmModel, K_rows) -> np.ndarray:
    return (decision_function(model, K_rows) >= 0.0).astype(int)


def save_model(path: str | os.PathLike, model: SvmModel) -> None:
    lines = [f"# C={float(model.C)!r} tol={float(model.tol)!r} n={len(model.alphas)} bias={float(model.bias)!r}"]
    lines += [f"{i}\t{float(a)!r}\t{int(l)}" for i, (a, l) in enumerate(zip(model.alphas, model.labels))]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path: str | os.PathLike) -> SvmModel:
    with open(path, encoding="utf-8") as fh:
        lines = [l.rstrip("\n") for l in fh if l.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing model header")
    header = dict(kv.split("=", 1) for kv in lines[0][1:].split())
    n = int(header["n"])
    alphas, labels = np.zeros(n), np.zeros(n)
    rows = lines[1:]
    if len(rows) != n:
        raise ValueError(f"{path}: header says n={n} but found {len(rows)} rows")
    for row in rows:
        i, a, l = row.split("\t")
        alphas[int(i)], labels[int(i)] = float(a), float(l)
    return SvmModel(alphas, float(header["bias"]), labels, float(header["C"]), float(header["tol"]))


class PrecomputedSVC(ClassifierMixin, BaseEstimator):
    """Binary SVM whose ``X`` is a Gram matrix: ``K(train, train)`` for
    ``fit`` and ``K(test, train)`` for ``predict``.

    Parameters
    ----------
    C : float
        Box constraint on the dual multipliers.
    tol : float
        KKT violation tolerance.
    max_passes : int
        Sweeps allowed without objective progress before stopping.
    """

    def __init__(self, C=1.0, tol=1e-3, max_passes=200):
        self.C = C
        self.tol = tol
        self.max_passes = max_passes

    def fit(self, X, y):
        self.model_ = fit_precomputed(X, y, self.C, self.tol, self.max_passes)
        self.classes_ = np.array([0, 1])
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return decision_function(self.model_, X)

    def predict(self, X):
        return (self.decision_function(X) >= 0.0).astype(int)

    @property
    def support_(self) -> np.ndarray:
        check_is_fitted(self, "model_")
        return self.model_.support_indices
