"""Acceptance suite: one test per release criterion, each at its stated tolerance.

Run ``pytest tests/test_acceptance.py`` to see the PASS/FAIL summary lines.
"""
import json
import math
import time

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from vihsd.autograd import Tensor, conv1d, global_max_pool
from vihsd.checkpoint import load_checkpoint, save_checkpoint
from vihsd.cli import main
from vihsd.estimator import HateSpeechClassifier
from vihsd.models import KINDS, param_count
from vihsd.nn import GRU, LSTM, Bidirectional
from vihsd.rng import make_rng
from vihsd.text import normalize_text, read_dataset
from vihsd.training import class_weights, evaluate_predictions
from vihsd.verify import run_checks

GRADIENT_CHECKS = ("embedding", "spatial-dropout", "conv1d", "global-max-pool", "dense", "lstm", "gru",
                   "bidirectional", "softmax-cross-entropy", "model-textcnn", "model-bigru-cnn",
                   "model-bigru-lstm-cnn")


def _fixture_estimator(data_dir, **overrides):
    cfg = json.loads((data_dir / "fixture_config.json").read_text())
    train = dict(cfg["train"])
    params = dict(cfg["model"], **train, random_state=train.pop("seed"),
                  lexicon=str(data_dir / cfg["lexicon"]), val_fraction=cfg["val_fraction"])
    params.pop("seed")
    params.update(overrides)
    return HateSpeechClassifier(**params)


def test_gradient_soundness(acceptance):
    start = time.perf_counter()
    results = {r.name: r for r in run_checks(GRADIENT_CHECKS)}
    elapsed = time.perf_counter() - start
    failed = [n for n, r in results.items() if not r.passed]
    worst = max(float(r.detail.split()[0]) for r in results.values())
    acceptance(1, "finite-difference gradients (float64, h=1e-3, <=32 probes)",
               not failed and worst < 1e-4 and elapsed < 60,
               f"{len(results)} checks, worst rel. error {worst:.2e}, {elapsed:.1f}s"
               + (f", failed {failed}" if failed else ""))


def _conv_loops(x, K, bias):
    b, t, c = x.shape
    f, k, _ = K.shape
    out = np.zeros((b, t - k + 1, f))
    for i in range(b):
        for s in range(t - k + 1):
            for j in range(f):
                acc = bias[j]
                for d in range(k):
                    for ch in range(c):
                        acc += x[i, s + d, ch] * K[j, d, ch]
                out[i, s, j] = acc
    return out


def _pool_loops(x):
    b, t, c = x.shape
    out = np.full((b, c), -np.inf)
    for i in range(b):
        for s in range(t):
            for ch in range(c):
                out[i, ch] = max(out[i, ch], x[i, s, ch])
    return out


def test_oracle_equivalence(acceptance):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        b, c, k, f = (int(v) for v in rng.integers(1, 6, size=4))
        t = int(rng.integers(k, 6))
        x, K, bias = rng.normal(size=(b, t, c)), rng.normal(size=(f, k, c)), rng.normal(size=f)
        got = conv1d(Tensor(x), Tensor(K), Tensor(bias), activation=None).data
        worst = max(worst, float(np.abs(got - _conv_loops(x, K, bias)).max()))
        worst = max(worst, float(np.abs(global_max_pool(Tensor(x)).data - _pool_loops(x)).max()))
    acceptance(2, "conv1d and max-pool match brute-force loops", worst < 1e-6,
               f"100 random shapes, max abs diff {worst:.1e}")


def test_closed_form_parameter_counts(acceptance):
    lstm = param_count(Bidirectional(LSTM, 300, 112, rng=make_rng(0)))
    gru = param_count(Bidirectional(GRU, 300, 112, rng=make_rng(0)))
    lstm_formula = 2 * 4 * (300 * 112 + 112 ** 2 + 112)
    gru_formula = 2 * 3 * (300 * 112 + 112 ** 2 + 112)
    acceptance(3, "Bi-LSTM / Bi-GRU parameter counts",
               lstm == lstm_formula == 370_048 and gru == gru_formula == 277_536,
               f"Bi-LSTM {lstm:,}, Bi-GRU {gru:,}")


def test_overfit_harness(acceptance, data_dir):
    texts, labels = read_dataset(data_dir / "fixture.csv")
    start = time.perf_counter()
    clf = _fixture_estimator(data_dir).fit(texts, labels)
    elapsed = time.perf_counter() - start
    score = clf.score(texts, labels)
    epochs = len(clf.history_.records)
    spec = clf.model_.spec
    scaled = (spec.kind, spec.max_len, spec.embed_dim, spec.gru_units, spec.lstm_units,
              spec.conv_filters) == ("bigru-lstm-cnn", 20, 16, 8, 8, 8)
    acceptance(4, "overfit 64-row fixture with scaled Bi-GRU-LSTM-CNN",
               len(texts) == 64 and scaled and score >= 0.99 and epochs <= 200 and elapsed < 300,
               f"training macro-F1 {score:.4f} after {epochs} epochs in {elapsed:.1f}s")


def test_metric_correctness(acceptance):
    counts = (18614, 1022, 709)
    gold = np.repeat([0, 1, 2], counts)
    macro = evaluate_predictions(gold, np.zeros_like(gold)).macro_f1
    expected_macro = 2 * 0.9149 / 1.9149 / 3
    weights = class_weights(counts)
    expected_weights = np.array([0.3643, 6.6357, 9.5651])
    ok = abs(macro - 0.3185) <= 5e-4 and abs(macro - expected_macro) <= 5e-4 \
        and np.all(np.abs(weights - expected_weights) <= 1e-3)
    acceptance(5, "always-clean macro-F1 and inverse-frequency weights", ok,
               f"macro-F1 {macro:.4f}, weights {np.round(weights, 4).tolist()}")


GOLDENS = [
    ("Thương tụi mày quá không biết tụi mày có thương tao ko :(",
     "thương tụi mày quá không biết tụi mày có thương tao ko"),
    ("Thi đấu thể thao chuyên nghiệp ở trong nước bạc bẽo vl",
     "thi đấu thể thao chuyên nghiệp ở trong nước bạc bẽo vl"),
    ("Không ai rãnh mà nói chuyện với mày đâu thằng ngũ",
     "không ai rãnh mà nói chuyện với mày đâu thằng ngũ"),
    ("Thương tụi mày quá", "thương tụi mày quá"),
    ("Có  3   con!!!", "có number con"),
    ("ĐỘI TUYỂN 2019 vô địch!!!", "đội tuyển number vô địch"),
]


def test_preprocessing_goldens(acceptance):
    mismatches = [(raw, normalize_text(raw)) for raw, want in GOLDENS if normalize_text(raw) != want]
    violations = []

    @settings(max_examples=1000, deadline=None, database=None)
    @given(st.text())
    def idempotent(raw):
        once = normalize_text(raw)
        if normalize_text(once) != once:
            violations.append(raw)

    idempotent()
    acceptance(6, "normalization goldens and idempotence",
               not mismatches and not violations,
               f"{len(GOLDENS) - len(mismatches)}/{len(GOLDENS)} goldens, "
               f"{len(violations)} idempotence violations in 1000 strings")


def test_determinism_and_persistence(acceptance, data_dir, tmp_path):
    texts, labels = read_dataset(data_dir / "fixture.csv")
    losses = [_fixture_estimator(data_dir, max_epochs=1).fit(texts, labels)
              .history_.records[0]["train_loss"] for _ in range(2)]
    clf = _fixture_estimator(data_dir, max_epochs=3).fit(texts, labels)
    ids = clf.encoder_.transform(texts)
    before = clf.model_(ids).data
    save_checkpoint(clf.model_, tmp_path / "ck")
    after = load_checkpoint(tmp_path / "ck")(ids).data
    same_loss = np.float64(losses[0]).tobytes() == np.float64(losses[1]).tobytes()
    same_forward = before.tobytes() == after.tobytes()
    acceptance(7, "seeded epoch-1 loss and checkpoint round trip are bitwise stable",
               same_loss and same_forward,
               f"epoch-1 losses {losses[0]!r} / {losses[1]!r}, forward identical: {same_forward}")


def test_three_model_harness(acceptance, data_dir, tmp_path, capsys):
    code = main(["train", "--config", str(data_dir / "fixture_config.json"), "--model", "all",
                 "--out-dir", str(tmp_path)])
    capsys.readouterr()
    histories = [(tmp_path / k / "history.csv").is_file() for k in KINDS]
    table = (tmp_path / "comparison.txt").read_text() if (tmp_path / "comparison.txt").exists() else ""
    rows = {line.split()[0]: line.split()[1:] for line in table.splitlines()[1:4] if line.strip()}
    formatted = all(len(v) == 2 and all(math.isfinite(float(x)) and len(x.split(".")[1]) == 3
                                        for x in v) for v in rows.values())
    ordering_note = "TextCNN < Bi-GRU-CNN < Bi-GRU-LSTM-CNN" in table
    scores = {k: v[0] for k, v in rows.items()}
    acceptance(8, "train --model all on the fixture with a comparison table",
               code == 0 and all(histories) and len(rows) == 3 and formatted and ordering_note,
               f"exit {code}, macro-F1 % {scores} (expected ordering reported, not gated)")
