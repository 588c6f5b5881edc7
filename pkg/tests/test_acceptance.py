"""Release gate: one test per numbered criterion.

Run with `pytest -v tests/test_acceptance.py` to get a pass/fail line
per criterion. Each test also enforces its wall-clock budget, with wide
measured margins on a single CPU core.
"""

import io
import math
import os
import time
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from colorvit import autodiff as ad
from colorvit import cli
from colorvit import metrics as mx
from colorvit import model as vm
from colorvit import pseudocolor as pc
from colorvit import synthetic
from colorvit import train as tr
from fd import worst_gradient_error
from helpers import ArrayLoader, separable_images
from test_pseudocolor import jet_oracle

BRISC_ENV = "BRISC2025_ROOT"


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = cli.main([str(a) for a in argv])
    return code, out.getvalue(), err.getvalue()


def pairwise_auc(pos, neg):
    """Rank-sum route: P(pos > neg) + 0.5 P(pos == neg), all pairs."""
    pos = np.asarray(pos)[:, None]
    neg = np.asarray(neg)[None, :]
    wins = np.count_nonzero(pos > neg)
    ties = np.count_nonzero(pos == neg)
    return (wins + 0.5 * ties) / (pos.size * neg.size)


def test_criterion_1_gradient_check_matches_finite_differences():
    start = time.time()
    cfg = vm.ModelConfig(image_size=32, patch_size=16, embed_dim=8,
                         depth=2, num_heads=2, ffn_dim=32, num_classes=4)
    net = vm.VisionTransformer(cfg, seed=11, dtype=np.float64)
    rng = np.random.default_rng(7)
    images = rng.uniform(0.0, 1.0, size=(2, 3, 32, 32))
    labels = np.array([1, 3])

    def loss_fn():
        return float(tr.cross_entropy(net.forward(images).logits, labels).data)

    params = dict(net.parameters())
    ad.zero_grads(params.values())
    ad.backward(tr.cross_entropy(net.forward(images).logits, labels))
    analytic = {name: p.grad.copy() for name, p in params.items()}
    arrays = {name: p.data for name, p in params.items()}

    worst = worst_gradient_error(loss_fn, analytic, arrays, step=1e-5)
    elapsed = time.time() - start
    print(f"criterion 1: worst relative error {worst:.3e} over "
          f"{net.num_parameters()} parameters in {elapsed:.1f}s")
    assert worst < 1e-4
    assert elapsed < 120


def test_criterion_2_jet_goldens_and_lut_oracle():
    start = time.time()
    goldens = {
        0.0: (0.0, 0.0, 0.5),
        1.0: (0.5, 0.0, 0.0),
        0.5: (0.4839, 1.0, 0.4839),
    }
    for v, want in goldens.items():
        np.testing.assert_allclose(pc.jet(v), want, atol=1e-3)

    lut = pc.jet_lut()
    expected = np.array([jet_oracle(i / 255) for i in range(256)])
    np.testing.assert_allclose(lut, expected, atol=1e-6)
    assert time.time() - start < 1.0


def test_criterion_3_auc_rank_sum_equivalence_and_worked_example():
    start = time.time()
    rng = np.random.default_rng(42)
    for _ in range(100):
        n = int(rng.integers(10, 501))
        scores = rng.integers(0, 25, size=n) / 24.0  # coarse grid -> ties
        labels = rng.integers(0, 2, size=n)
        labels[0], labels[1] = 0, 1  # both classes always present
        cols = np.column_stack([1.0 - scores, scores])
        trapezoid = mx.auc(mx.roc_curve_ovr(cols, labels, 1))
        ranksum = pairwise_auc(scores[labels == 1], scores[labels == 0])
        assert abs(trapezoid - ranksum) < 1e-10

    labels = np.array([0, 0, 1, 2, 3, 3])
    preds = np.array([0, 1, 1, 2, 3, 2])
    cm = mx.confusion_matrix(labels, preds, 4)
    accuracy = np.trace(cm) / len(labels)
    assert accuracy == pytest.approx(0.666667, abs=1e-6)
    prf = mx.precision_recall_f1(cm)
    assert prf.macro_precision == 0.75
    assert prf.macro_recall == 0.75
    assert time.time() - start < 10


def test_criterion_4_loss_calibration_and_single_batch_overfit():
    start = time.time()
    for mode in ("fused", "literal"):
        logits = ad.Tensor(np.zeros((5, 4)))
        loss = tr.cross_entropy(logits, np.array([0, 1, 2, 3, 0]), mode=mode)
        assert abs(float(loss.data) - math.log(4)) < 1e-6

    # 8 samples, 2 per class, where mean intensity encodes the class; a
    # 12-layer stack needs a signal this strong to memorize in 300 steps
    cfg = vm.config_from_variant("tiny", image_size=32)
    net = vm.VisionTransformer(cfg, seed=0, dtype=np.float64)
    rng = np.random.default_rng(0)
    labels = np.arange(8) % 4
    images = np.empty((8, 3, 32, 32))
    for i, k in enumerate(labels):
        images[i] = 0.5 * k + rng.normal(0.0, 0.05, size=(3, 32, 32))

    opt = tr.Adam(dict(net.parameters()), lr=1e-3)
    reached = None
    for step in range(1, 301):
        opt.zero_grad()
        loss = tr.cross_entropy(net.forward(images).logits, labels)
        ad.backward(loss)
        opt.step()
        if float(loss.data) < 0.01:
            reached = step
            break
    elapsed = time.time() - start
    print(f"criterion 4: loss {float(loss.data):.5f} at step {reached} "
          f"in {elapsed:.1f}s")
    assert reached is not None and reached <= 300
    assert elapsed < 300


def test_criterion_5_early_stopping_halts_at_best_plus_patience(tmp_path):
    start = time.time()
    for k, values in ((2, [0.5, 0.6] + [0.55] * 40),
                      (5, [0.1, 0.2, 0.3, 0.4, 0.5] + [0.45] * 40)):
        images, labels = separable_images(2, size=16, seed=0, dtype=np.float64)
        loader = ArrayLoader(images, labels)
        cfg = vm.ModelConfig(image_size=16, patch_size=8, embed_dim=8,
                             depth=1, num_heads=2, ffn_dim=16, num_classes=4)
        model = vm.VisionTransformer(cfg, seed=0, dtype=np.float64)
        snapshots = {}

        def eval_fn(m, epoch, values=values, snapshots=snapshots):
            snapshots[epoch] = m.state_arrays()
            return values[epoch - 1]

        path = tmp_path / f"best_{k}.cvt"
        result = tr.train(
            model, loader, loader,
            tr.TrainConfig(epochs=50, batch_size=4, lr=1e-3, patience=15, seed=0),
            path, eval_fn=eval_fn,
        )
        assert result.best_epoch == k
        assert result.stopped_epoch == k + 15
        assert len(result.history) == k + 15

        loaded, container = tr.load_checkpoint(path)
        assert container.meta["best_epoch"] == str(k)
        for name, arr in snapshots[k].items():
            assert_array_equal(loaded.params[name].data, arr)
    assert time.time() - start < 60


@pytest.fixture(scope="module")
def toy_runs(tmp_path_factory):
    """The full toy pipeline, run twice with identical seeds."""
    base = tmp_path_factory.mktemp("toy")
    train_root, test_root = synthetic.write_toy_corpus(
        base / "corpus", n_train=400, n_test=100, size=64, seed=0)

    runs = []
    for tag in ("first", "second"):
        prep = base / tag / "prep"
        run_dir = base / tag / "run"
        report = base / tag / "report"
        start = time.time()
        for split_root in (train_root, test_root):
            code, _, err = run_cli("preprocess", "--data-root", split_root,
                                   "--out", prep, "--image-size", 64)
            assert code == 0, err
        code, _, err = run_cli(
            "train", "--data-root", prep, "--out", run_dir,
            "--variant", "tiny", "--image-size", 64, "--epochs", 30,
            "--batch-size", 32, "--lr", 3e-4, "--patience", 5, "--seed", 0)
        assert code == 0, err
        code, _, err = run_cli(
            "evaluate", run_dir / "checkpoint.cvt",
            "--data-root", prep / "test.cvt", "--out", report)
        assert code == 0, err
        runs.append({"run": run_dir, "report": report,
                     "seconds": time.time() - start})
    return runs


def test_criterion_6_toy_end_to_end_learning(toy_runs):
    first = toy_runs[0]
    report = mx.read_report(first["report"])
    rows = (first["run"] / "history.csv").read_text().strip().splitlines()
    epochs_run = len(rows) - 1
    print(f"criterion 6: accuracy {report.accuracy}, macro AUC "
          f"{report.macro_auc}, {epochs_run} epochs, {first['seconds']:.0f}s")
    assert epochs_run <= 30
    assert report.accuracy >= 0.90
    assert report.macro_auc is not None and report.macro_auc >= 0.95
    assert first["seconds"] < 900


def test_criterion_7_identical_seeds_are_byte_identical(toy_runs):
    first, second = toy_runs
    artifacts = ["history.csv", "checkpoint.cvt"]
    for name in artifacts:
        a = (first["run"] / name).read_bytes()
        b = (second["run"] / name).read_bytes()
        assert a == b, f"{name} differs between identically seeded runs"
    report_files = ["report.txt", "confusion.csv", "per_class.csv",
                    "roc.svg", "confusion.svg"]
    report_files += [f"roc_{name}.csv" for name in synthetic.CLASS_NAMES]
    for name in report_files:
        a = (first["report"] / name).read_bytes()
        b = (second["report"] / name).read_bytes()
        assert a == b, f"{name} differs between identically seeded runs"


def test_criterion_8_invariant_suite():
    start = time.time()
    rng = np.random.default_rng(3)

    # attention rows are probability distributions
    cfg = vm.ModelConfig(image_size=32, patch_size=16, embed_dim=8,
                         depth=2, num_heads=2, ffn_dim=32, num_classes=4)
    net = vm.VisionTransformer(cfg, seed=5, dtype=np.float64)
    out = net.forward(rng.uniform(0, 1, size=(3, 3, 32, 32)),
                      return_attention=True)
    for layer in out.attention:
        np.testing.assert_allclose(layer.sum(axis=-1), 1.0, atol=1e-6)

    # softmax shift invariance
    x = rng.normal(size=(4, 7))
    shifted = ad.softmax(ad.Tensor(x + 123.0), axis=-1).data
    plain = ad.softmax(ad.Tensor(x), axis=-1).data
    np.testing.assert_allclose(shifted, plain, atol=1e-10)

    # zeroed branch outputs turn every encoder block into the identity
    for i in range(cfg.depth):
        for name in (f"blocks.{i}.attn.out.weight", f"blocks.{i}.attn.out.bias",
                     f"blocks.{i}.ffn.fc2.weight", f"blocks.{i}.ffn.fc2.bias"):
            net.params[name].data[...] = 0.0
    z = net.embed(rng.uniform(0, 1, size=(2, 3, 32, 32)))
    through = z
    for i in range(cfg.depth):
        through = net.encoder_block(through, i)
    assert_array_equal(through.data, z.data)

    # AUC is invariant under strictly monotone score transforms
    scores = rng.integers(0, 15, size=200) / 14.0
    labels = rng.integers(0, 2, size=200)
    labels[:2] = [0, 1]

    def auc_of(col):
        return mx.auc(mx.roc_curve_ovr(
            np.column_stack([1.0 - col, col]), labels, 1))

    base = auc_of(scores)
    assert abs(auc_of(2.0 * scores + 1.0) - base) < 1e-12
    assert abs(auc_of(scores ** 3) - base) < 1e-12

    # confusion-matrix trace agrees with samplewise accuracy
    y = rng.integers(0, 4, size=1000)
    p = rng.integers(0, 4, size=1000)
    cm = mx.confusion_matrix(y, p, 4)
    assert np.trace(cm) / y.size == np.mean(y == p)
    assert time.time() - start < 120


@pytest.mark.skipif(BRISC_ENV not in os.environ,
                    reason=f"set {BRISC_ENV} to run against the real corpus")
def test_criterion_9_real_corpus_ingest(tmp_path):
    root = Path(os.environ[BRISC_ENV])
    prep, run_dir, report = tmp_path / "prep", tmp_path / "run", tmp_path / "rep"
    for split in ("train", "test"):
        code, _, err = run_cli("preprocess", "--data-root", root / split,
                               "--out", prep, "--image-size", 64)
        assert code == 0, err
    code, _, err = run_cli(
        "train", "--data-root", prep, "--out", run_dir,
        "--variant", "tiny", "--epochs", 1, "--batch-size", 32, "--seed", 0)
    assert code == 0, err
    code, _, err = run_cli(
        "evaluate", run_dir / "checkpoint.cvt",
        "--data-root", prep / "test.cvt", "--out", report)
    assert code == 0, err
    parsed = mx.read_report(report)
    assert parsed.n > 0
    for name in ("report.txt", "confusion.csv", "per_class.csv"):
        assert (report / name).exists()
