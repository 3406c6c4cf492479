"""Command-line pipeline: gen-data -> train -> gram -> svm, or all of them via ``full``.

Every stage reads the files written by the previous one from ``--out``, so
stages can be rerun independently and Gram matrices are reused when their
inputs have not changed.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .circuit import AnsatzConfig
from .dataset import generate, read_tsv, split, write_tsv
from .embeddings import (TrainConfig, evaluate_accuracy, lexicon_hash, load_embeddings, save_embeddings,
                         train_spsa)
from .exceptions import DiscoKernelError
from .kernels import KERNELS, GramMatrix, gram, load_gram, region_stats, save_gram, write_pgm
from .simulator import NOISE_PROFILES, Backend, noise_profile
from .svm import fit_precomputed, predict_many, save_model
from .validation import check_lexicon, check_sentences

log = logging.getLogger("discokernel")

SCHEMA_VERSION = 1
DEFAULT_SEEDS = (0, 1, 2, 3, 4, 5, 6)
BACKENDS = ("exact", "shots", "noisy")


class ConfigError(Exception):
    """Bad configuration; exit code 2."""


@dataclass
class ExperimentConfig:
    lexicon: Optional[str] = None
    dataset: Optional[str] = None
    n: int = 100
    ratio: float = 0.7
    data_seed: Optional[int] = None
    q_n: int = 1
    q_s: int = 1
    layers: int = 1
    backend: str = "exact"
    shots: int = 8192
    noise_profile: Optional[str] = None
    shot_budget: str = "kept"
    epochs: int = 100
    spsa_a: float = TrainConfig.spsa_a
    spsa_c: float = TrainConfig.spsa_c
    spsa_A: Optional[float] = None
    alpha: float = 0.602
    gamma: float = 0.101
    eps: float = 1e-9
    batch_size: Optional[int] = TrainConfig.batch_size
    kernel: tuple[str, ...] = KERNELS
    C: float = 1.0
    tol: float = 1e-3
    max_passes: int = 200
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    out: str = "runs"

    def validate(self) -> "ExperimentConfig":
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.shot_budget not in Backend.BUDGETS:
            raise ConfigError(f"shot_budget must be one of {Backend.BUDGETS}, got {self.shot_budget!r}")
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        for k in self.kernel:
            if k not in KERNELS:
                raise ConfigError(f"kernel must be one of {KERNELS}, got {k!r}")
        if self.noise_profile is not None and self.noise_profile not in NOISE_PROFILES:
            raise ConfigError(f"unknown noise profile {self.noise_profile!r}; known: {sorted(NOISE_PROFILES)}")
        for name in ("lexicon", "dataset"):
            path = getattr(self, name)
            if path is not None and not os.path.exists(path):
                raise ConfigError(f"{name} file {path!r} does not exist")
        if not 0 < self.ratio < 1:
            raise ConfigError("ratio must lie strictly between 0 and 1")
        for name in ("n", "shots", "epochs", "max_passes"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.batch_size is not None and self.batch_size <= 0:
            raise ConfigError("batch_size must be positive (or none for full batch)")
        for name in ("C", "tol", "spsa_a", "spsa_c"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        try:
            AnsatzConfig(self.q_n, self.q_s, self.layers)
        except DiscoKernelError as exc:
            raise ConfigError(str(exc)) from None
        return self

    @property
    def train_config(self) -> TrainConfig:
        return TrainConfig(self.epochs, self.shots, self.spsa_a, self.spsa_c, self.spsa_A,
                           self.alpha, self.gamma, self.eps, self.batch_size)

    def make_backend(self) -> Backend:
        profile = self.noise_profile
        if profile is None:
            profile = "guadalupe-like" if self.backend == "noisy" else "none"
        noise = noise_profile(profile)
        if self.backend == "exact":
            if not noise.is_zero:
                raise ConfigError("the exact backend is noiseless; use --backend noisy or shots with a noise profile")
            return Backend("exact")
        return Backend(self.backend, self.shots, None if noise.is_zero else noise, self.shot_budget)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_INT_KEYS = {"n", "data_seed", "batch_size", "q_n", "q_s", "layers", "shots", "epochs", "max_passes"}
_FLOAT_KEYS = {"ratio", "spsa_a", "spsa_c", "spsa_A", "alpha", "gamma", "eps", "C", "tol"}


def _coerce(key: str, raw):
    if raw is None:
        return None
    if isinstance(raw, str):
        raw = raw.strip()
        if raw.lower() in ("", "none"):
            return None
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key == "seeds":
            items = raw if isinstance(raw, (list, tuple)) else str(raw).replace(",", " ").split()
            return tuple(int(s) for s in items)
        if key == "kernel":
            items = raw if isinstance(raw, (list, tuple)) else str(raw).replace(",", " ").split()
            return tuple(items)
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {raw!r}") from None
    return raw


def read_config(path: str | os.PathLike) -> dict:
    """Flat ``key = value`` pairs from any section of an INI-style file."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            name = next((f for f in _FIELDS if f.lower() == key.lower()), None)
            if name is None:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            values[name] = _coerce(name, raw)
    return values


def build_config(args: argparse.Namespace, env=os.environ) -> ExperimentConfig:
    values = read_config(args.config) if args.config else {}
    for name in _FIELDS:
        given = getattr(args, name, None)
        if given is not None:
            values[name] = _coerce(name, given)
    if getattr(args, "seed", None) is not None:
        values["seeds"] = (args.seed,)
    cfg = ExperimentConfig(**{k: v for k, v in values.items() if v is not None or k in ("spsa_A",)})
    if env.get("DISCO_SEED"):
        try:
            first = int(env["DISCO_SEED"])
        except ValueError:
            raise ConfigError(f"DISCO_SEED must be an integer, got {env['DISCO_SEED']!r}") from None
        cfg = replace(cfg, seeds=(first,) + tuple(cfg.seeds[1:]))
    return cfg.validate()


# -- helpers ----------------------------------------------------------------------


def _out(cfg: ExperimentConfig) -> Path:
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _update_metrics(cfg: ExperimentConfig, section: str, records: list[dict]) -> None:
    path = _out(cfg) / "metrics.json"
    metrics = {"schema_version": SCHEMA_VERSION}
    if path.exists():
        metrics = json.loads(path.read_text(encoding="utf-8"))
    kept = [r for r in metrics.get(section, [])
            if (r.get("seed"), r.get("kernel"), r.get("backend")) not in
            {(n.get("seed"), n.get("kernel"), n.get("backend")) for n in records}]
    metrics[section] = sorted(kept + records, key=lambda r: (r.get("kernel", ""), r["backend"], r["seed"]))
    metrics["schema_version"] = SCHEMA_VERSION
    _write_json(path, metrics)


def mean_stderr(values: Sequence[float]) -> dict:
    values = [float(v) for v in values]
    n = len(values)
    mean = sum(values) / n
    stderr = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1) / n) if n > 1 else 0.0
    return {"mean": mean, "stderr": stderr, "n": n, "values": values}


def _splits(cfg: ExperimentConfig):
    out = _out(cfg)
    table = check_lexicon(cfg.lexicon)
    paths = [out / "train.tsv", out / "test.tsv"]
    for p in paths:
        if not p.exists():
            raise ConfigError(f"{p} not found; run gen-data first")
    train, test = (read_tsv(p, table.values()) for p in paths)
    return table, train, test


# -- stages ------------------------------------------------------------------------


def cmd_gen_data(cfg: ExperimentConfig) -> None:
    out = _out(cfg)
    table = check_lexicon(cfg.lexicon)
    seed = cfg.seeds[0] if cfg.data_seed is None else cfg.data_seed
    if cfg.dataset is not None:
        data = read_tsv(cfg.dataset, table.values())
    else:
        data = generate(table.values(), n=cfg.n, seed=seed)
    parts = split(data, cfg.ratio, seed)
    write_tsv(out / "data.tsv", data)
    write_tsv(out / "train.tsv", parts.train)
    write_tsv(out / "test.tsv", parts.test)
    log.info("wrote %d sentences (%d train / %d test) to %s", len(data), len(parts.train), len(parts.test), out)


def cmd_train(cfg: ExperimentConfig) -> None:
    out = _out(cfg)
    table, train, test = _splits(cfg)
    Xtr, ytr = check_sentences(train, table), [s.label for s in train]
    Xte, yte = check_sentences(test, table), [s.label for s in test]
    backend = cfg.make_backend()
    records = []
    for seed in cfg.seeds:
        t0 = time.perf_counter()
        store, history = train_spsa(Xtr, ytr, cfg.train_config, table.values(), seed, backend, (Xte, yte))
        save_embeddings(out / f"embeddings_{seed}.txt", store)
        with open(out / f"history_{seed}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "loss", "train_acc", "test_acc"])
            for row in history:
                w.writerow([row.epoch, repr(row.loss), repr(row.train_acc), repr(row.test_acc)])
        final = history[-1]
        records.append({"seed": seed, "backend": backend.kind, "kernel": "explicit",
                        "train_acc": final.train_acc, "test_acc": final.test_acc,
                        "final_loss": final.loss, "epochs": cfg.epochs})
        log.info("seed %d: loss %.4f train %.3f test %.3f (%.1fs)", seed, final.loss, final.train_acc,
                 final.test_acc, time.perf_counter() - t0)
    _update_metrics(cfg, "explicit", records)
    _write_json(out / "explicit_summary.json", {
        "schema_version": SCHEMA_VERSION, "backend": backend.kind,
        "train_acc": mean_stderr([r["train_acc"] for r in records]),
        "test_acc": mean_stderr([r["test_acc"] for r in records]),
    })


def _load_store(cfg: ExperimentConfig, table, seed):
    path = _out(cfg) / f"embeddings_{seed}.txt"
    if not path.exists():
        raise ConfigError(f"{path} not found; run train first")
    store = load_embeddings(path)
    if store.lexicon_hash and store.lexicon_hash != lexicon_hash(table.values()):
        raise ConfigError(f"{path} was trained on a different lexicon")
    return store


def _cached_gram(path: Path, want: dict) -> Optional[GramMatrix]:
    if not path.exists():
        return None
    try:
        K = load_gram(path)
    except ValueError:
        return None
    if all(str(K.meta.get(k)) == str(v) for k, v in want.items()):
        return K
    return None


def cmd_gram(cfg: ExperimentConfig) -> None:
    out = _out(cfg)
    table, train, test = _splits(cfg)
    Xtr, ytr = check_sentences(train, table), [s.label for s in train]
    Xte, yte = check_sentences(test, table), [s.label for s in test]
    backend = cfg.make_backend()
    for seed in cfg.seeds:
        store = _load_store(cfg, table, seed)
        for kind in cfg.kernel:
            stem = f"{kind}_{seed}"
            for name, rows, cols, seed_offset in (("train", Xtr, None, 0), ("test", Xte, Xtr, 1)):
                path = out / f"gram_{stem}_{name}.csv"
                entry_seed = seed * 2 + seed_offset
                want = {"kernel": kind, "backend": backend.kind, "embedding_hash": store.digest(),
                        "seed": entry_seed, "shots": backend.shots if backend.sampled else 0,
                        "description": backend.describe()}
                K = _cached_gram(path, want)
                if K is None:
                    t0 = time.perf_counter()
                    K = gram(rows, cols, kind, store, backend, entry_seed)
                    save_gram(path, K)
                    log.info("%s %s gram %dx%d in %.1fs", kind, name, *K.shape, time.perf_counter() - t0)
                write_pgm(out / f"gram_{stem}_{name}.pgm", K.values)
            K = load_gram(out / f"gram_{stem}_train.csv")
            with open(out / f"regions_{stem}.tsv", "w", encoding="utf-8", newline="\n") as fh:
                fh.write("region\tmean\tstd\tcount\n")
                for row in region_stats(K.values, ytr):
                    fh.write(f"{row.region}\t{row.mean:.6f}\t{row.std:.6f}\t{row.count}\n")


def cmd_svm(cfg: ExperimentConfig) -> None:
    out = _out(cfg)
    _, train, test = _splits(cfg)
    ytr = np.array([s.label for s in train])
    yte = np.array([s.label for s in test])
    records = []
    for seed in cfg.seeds:
        for kind in cfg.kernel:
            stem = f"{kind}_{seed}"
            Ktr = load_gram(out / f"gram_{stem}_train.csv").values
            Kte = load_gram(out / f"gram_{stem}_test.csv").values
            if Ktr.shape != (len(ytr), len(ytr)) or Kte.shape != (len(yte), len(ytr)):
                raise ValueError(f"Gram shapes {Ktr.shape}, {Kte.shape} do not match the {len(ytr)}/{len(yte)} split")
            model = fit_precomputed(Ktr, ytr, cfg.C, cfg.tol, cfg.max_passes)
            save_model(out / f"svm_{stem}.txt", model)
            records.append({"kernel": kind, "backend": cfg.backend, "seed": seed,
                            "train_acc": float(np.mean(predict_many(model, Ktr) == ytr)),
                            "test_acc": float(np.mean(predict_many(model, Kte) == yte)),
                            "n_support": model.n_support, "C": cfg.C})
            log.info("%s seed %d: train %.3f test %.3f, %d support vectors", kind, seed,
                     records[-1]["train_acc"], records[-1]["test_acc"], model.n_support)
    _update_metrics(cfg, "svm", records)


def cmd_full(cfg: ExperimentConfig) -> None:
    cmd_gen_data(cfg)
    cmd_train(cfg)
    cmd_gram(cfg)
    cmd_svm(cfg)
    metrics = json.loads((_out(cfg) / "metrics.json").read_text(encoding="utf-8"))
    seeds = set(cfg.seeds)

    def pick(section, kernel):
        return [r for r in metrics[section]
                if r["kernel"] == kernel and r["backend"] == cfg.backend and r["seed"] in seeds]

    summary = {"schema_version": SCHEMA_VERSION, "backend": cfg.backend, "seeds": list(cfg.seeds),
               "noise_profile": cfg.noise_profile}
    for name, section in [("explicit", "explicit")] + [(k, "svm") for k in cfg.kernel]:
        rows = pick(section, name)
        summary[name] = {m: mean_stderr([r[m] for r in rows]) for m in ("train_acc", "test_acc")}
    _write_json(_out(cfg) / "summary.json", summary)


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "gram": cmd_gram, "svm": cmd_svm, "full": cmd_full}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="discokernel", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="INI-style file of key = value settings")
    p.add_argument("--seed", type=int, help="run a single seed instead of the configured list")
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--backend", choices=BACKENDS)
    p.add_argument("--shots", type=int)
    p.add_argument("--kernel", choices=KERNELS, help="restrict gram/svm to one kernel")
    p.add_argument("--out", help="output directory")
    p.add_argument("--noise-profile", dest="noise_profile", choices=sorted(NOISE_PROFILES))
    for name, f in _FIELDS.items():
        if name in ("backend", "shots", "kernel", "out", "noise_profile", "seeds"):
            continue
        flags = [f"--{name}"] + ([f"--{name.replace('_', '-')}"] if "_" in name else [])
        p.add_argument(*flags, dest=name, help=f"override config key {name}")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = build_config(args)
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DiscoKernelError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
