import csv
import json

import numpy as np
import pytest

from discokernel.cli import build_config, build_parser, main, mean_stderr
from discokernel.kernels import load_gram


def run(*args):
    return main([str(a) for a in args])


def test_gen_data_defaults(tmp_path):
    assert run("gen-data", "--out", tmp_path / "a", "--seed", 4) == 0
    assert len((tmp_path / "a" / "data.tsv").read_text().splitlines()) == 100
    assert len((tmp_path / "a" / "train.tsv").read_text().splitlines()) == 70
    assert len((tmp_path / "a" / "test.tsv").read_text().splitlines()) == 30
    assert run("gen-data", "--out", tmp_path / "b", "--seed", 4) == 0
    for name in ("data.tsv", "train.tsv", "test.tsv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_gen_data_too_many(tmp_path, capsys):
    assert run("gen-data", "--out", tmp_path, "--n", 100000) == 3
    assert "InsufficientCombinations" in capsys.readouterr().err


def test_config_errors(tmp_path):
    assert run("train", "--out", tmp_path) == 2  # nothing generated yet
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\nbogus = 1\n")
    assert run("gen-data", "--config", bad, "--out", tmp_path) == 2
    assert run("gen-data", "--out", tmp_path, "--C", "-1") == 2
    assert run("gen-data", "--backend", "quantum") == 2
    assert run("gen-data", "--out", tmp_path, "--q_n", 2) == 2


def test_config_file_and_overrides(tmp_path, monkeypatch):
    cfg_path = tmp_path / "exp.ini"
    cfg_path.write_text("[data]\nn = 40\n\n[train]\nepochs = 7\nspsa_a = 2.5\n\n"
                        "[experiment]\nseeds = 1, 2, 3\n")
    args = build_parser().parse_args(["train", "--config", str(cfg_path), "--epochs", "9"])
    monkeypatch.delenv("DISCO_SEED", raising=False)
    cfg = build_config(args, env={})
    assert (cfg.n, cfg.epochs, cfg.spsa_a, cfg.seeds) == (40, 9, 2.5, (1, 2, 3))
    cfg = build_config(args, env={"DISCO_SEED": "42"})
    assert cfg.seeds == (42, 2, 3)


def test_mean_stderr():
    out = mean_stderr([1.0, 2.0, 3.0])
    assert out["mean"] == 2.0 and out["stderr"] == pytest.approx(np.std([1, 2, 3], ddof=1) / np.sqrt(3))


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = main(["full", "--out", str(out), "--n", "16", "--epochs", "3", "--seeds", "0,1"])
    assert code == 0
    return out


def test_full_outputs(small_run):
    out = small_run
    for seed in (0, 1):
        rows = list(csv.reader(open(out / f"history_{seed}.csv")))
        assert rows[0] == ["epoch", "loss", "train_acc", "test_acc"] and len(rows) == 1 + 4
        assert (out / f"embeddings_{seed}.txt").exists()
        for kind in ("transition", "swap"):
            train = load_gram(out / f"gram_{kind}_{seed}_train.csv")
            test = load_gram(out / f"gram_{kind}_{seed}_test.csv")
            assert train.shape == (12, 12) and test.shape == (4, 12)
            assert (out / f"gram_{kind}_{seed}_train.pgm").read_bytes().startswith(b"P5\n12 12\n255\n")
            lines = (out / f"regions_{kind}_{seed}.tsv").read_text().splitlines()
            assert [l.split("\t")[0] for l in lines[1:]] == ["Class 0", "Class 1", "Mixed"]
            assert (out / f"svm_{kind}_{seed}.txt").exists()
        swap = load_gram(out / f"gram_swap_{seed}_train.csv").values
        assert np.allclose(np.diag(swap), 1.0, atol=1e-10)
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["schema_version"] == 1
    for rec in metrics["svm"]:
        assert set(rec) == {"kernel", "backend", "seed", "train_acc", "test_acc", "n_support", "C"}
    summary = json.loads((out / "summary.json").read_text())
    assert {"explicit", "transition", "swap"} <= set(summary)
    assert summary["explicit"]["test_acc"]["n"] == 2


def test_full_is_reproducible(small_run, tmp_path):
    assert main(["full", "--out", str(tmp_path), "--n", "16", "--epochs", "3", "--seeds", "0,1"]) == 0
    for path in sorted(small_run.iterdir()):
        assert (tmp_path / path.name).read_bytes() == path.read_bytes(), path.name


def test_svm_rejects_malformed_gram(small_run, tmp_path, capsys):
    import shutil
    work = tmp_path / "copy"
    shutil.copytree(small_run, work)
    (work / "gram_swap_0_train.csv").write_text("1.0,zzz\n")
    assert main(["svm", "--out", str(work), "--seeds", "0", "--kernel", "swap"]) == 3
    assert "non-numeric" in capsys.readouterr().err


def test_gram_reuses_cache(small_run):
    path = small_run / "gram_swap_0_train.csv"
    before = path.stat().st_mtime_ns
    assert main(["gram", "--out", str(small_run), "--seeds", "0", "--kernel", "swap"]) == 0
    assert path.stat().st_mtime_ns == before
