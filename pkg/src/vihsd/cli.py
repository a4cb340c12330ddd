"""``vihsd`` command line: train, eval, predict and verify.

Exit codes: 0 success, 1 verification failure, 2 configuration or checkpoint
problem, 3 unreadable or invalid data, 4 numerical failure during training.
Failures print one line on stderr of the form
``vihsd: error=<kind> exit=<code> reason=<text>``.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import verify as verify_mod
from .errors import ConfigError, CorruptionError, DataError, NumericalError
from .estimator import HateSpeechClassifier
from .io_utils import atomic_write_text
from .models import DISPLAY_NAMES, KINDS, ModelSpec
from .text import LABEL_NAMES, parse_dataset, read_dataset
from .training import TrainConfig

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3, 4

# Macro-F1 (%) each architecture reaches on the full 3-class corpus.  The
# ordering is the expected outcome there; it is reported, never enforced.
REFERENCE_MACRO_F1 = {"textcnn": 56.512, "bigru-cnn": 69.293, "bigru-lstm-cnn": 70.576}

# ModelSpec fields a config may set (vocab size and class count are derived)
_MODEL_KEYS = {f.name for f in dataclasses.fields(ModelSpec)} - {"vocab_size", "num_classes"}
_TRAIN_KEYS = {"batch_size", "max_epochs", "learning_rate", "early_stopping_patience", "seed",
               "class_weighting"}
_CLASS_WEIGHTS = {"none": "none", "inverse": "inverse_frequency"}


@dataclass
class RunConfig:
    """Everything ``train`` needs; loaded from JSON then overridden by flags."""

    dataset: Path | None = None
    test_dataset: Path | None = None
    vectors: Path | None = None
    lexicon: Path | None = None
    out_dir: Path = Path("runs")
    val_fraction: float = 0.1
    min_frequency: int = 1
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)

    _PATHS = ("dataset", "test_dataset", "vectors", "lexicon", "out_dir")

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        return cls.from_dict(data, base=path.parent)

    @classmethod
    def from_dict(cls, data: dict, base: Path = Path(".")) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values = dict(data)
        for key in cls._PATHS:
            if values.get(key) is not None:
                values[key] = base / values[key]
        for key in ("model", "train"):
            if not isinstance(values.get(key, {}), dict):
                raise ConfigError(f"config key {key!r} must be an object")
        cfg = cls(**{k: v for k, v in values.items() if v is not None or k != "out_dir"})
        cfg.check_keys()
        return cfg

    def check_keys(self) -> None:
        bad_model = set(self.model) - _MODEL_KEYS
        if bad_model:
            raise ConfigError(f"unknown model keys: {sorted(bad_model)}")
        bad_train = set(self.train) - _TRAIN_KEYS
        if bad_train:
            raise ConfigError(f"unknown train keys: {sorted(bad_train)}")

    def validate(self) -> None:
        """Check values and that every referenced input file exists."""
        self.check_keys()
        train = {k: v for k, v in self.train.items() if k != "seed"}
        try:
            ModelSpec(**self.model)
            TrainConfig(**train)
        except TypeError as exc:
            raise ConfigError(f"invalid config value: {exc}") from None
        if not isinstance(self.val_fraction, (int, float)) or not 0 <= self.val_fraction < 1:
            raise ConfigError(f"val_fraction must lie in [0, 1), got {self.val_fraction!r}")
        if self.dataset is None:
            raise ConfigError("no dataset given (config key 'dataset' or --dataset)")
        for key in ("dataset", "test_dataset", "vectors", "lexicon"):
            path = getattr(self, key)
            if path is not None and not Path(path).is_file():
                raise DataError(f"{key} file not found: {path}")

    def estimator(self, kind: str, verbose: bool = False) -> HateSpeechClassifier:
        model = dict(self.model, kind=kind)
        train = dict(self.train)
        seed = train.pop("seed", 1234)
        return HateSpeechClassifier(
            **model, **train, vectors=None if self.vectors is None else str(self.vectors),
            lexicon=None if self.lexicon is None else str(self.lexicon),
            min_frequency=self.min_frequency, val_fraction=self.val_fraction,
            random_state=seed, verbose=verbose)


def _build_run_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for key in ("dataset", "test_dataset", "vectors", "lexicon", "out_dir"):
        value = getattr(args, key)
        if value is not None:
            setattr(cfg, key, Path(value))
    if args.val_fraction is not None:
        cfg.val_fraction = args.val_fraction
    if args.seed is not None:
        cfg.train["seed"] = args.seed
    if args.max_epochs is not None:
        cfg.train["max_epochs"] = args.max_epochs
    if args.class_weights is not None:
        cfg.train["class_weighting"] = _CLASS_WEIGHTS[args.class_weights]
    cfg.validate()
    return cfg


def comparison_table(scores: dict[str, float]) -> str:
    """Macro-F1 per architecture next to the full-corpus reference scores."""
    lines = [f"{'Model':<18}{'Macro-F1 (%)':>14}{'Reference (%)':>15}"]
    for kind in KINDS:
        if kind in scores:
            lines.append(f"{DISPLAY_NAMES[kind]:<18}{100 * scores[kind]:>14.3f}"
                         f"{REFERENCE_MACRO_F1[kind]:>15.3f}")
    order = " < ".join(DISPLAY_NAMES[k] for k in KINDS)
    lines.append("")
    lines.append(f"Expected ordering on the full corpus (informational, not checked): {order}")
    return "\n".join(lines) + "\n"


def cmd_train(args) -> int:
    cfg = _build_run_config(args)
    kinds = list(KINDS) if args.model == "all" else [args.model]
    texts, labels = read_dataset(cfg.dataset)
    if not texts:
        raise DataError(f"dataset {cfg.dataset} has no rows")
    test = read_dataset(cfg.test_dataset) if cfg.test_dataset else None
    if test is not None and not test[0]:
        raise DataError(f"test dataset {cfg.test_dataset} has no rows")
    scores = {}
    for kind in kinds:
        clf = cfg.estimator(kind, verbose=args.verbose).fit(texts, labels)
        if test is not None:
            report, split = clf.evaluate(*test), "test"
        elif cfg.val_fraction:
            idx = clf.val_index_
            report, split = clf.evaluate([texts[i] for i in idx], labels[idx]), "validation"
        else:
            report, split = clf.evaluate(texts, labels), "training"
        out = Path(cfg.out_dir) / kind
        out.mkdir(parents=True, exist_ok=True)
        clf.save(out / "checkpoint")
        clf.history_.to_csv(out / "history.csv")
        header = (f"{DISPLAY_NAMES[kind]} on the {split} set "
                  f"(best epoch {clf.history_.best_epoch} of {len(clf.history_.records)})\n\n")
        atomic_write_text(out / "report.txt", header + report.format() + "\n")
        atomic_write_text(out / "report.json", json.dumps(
            dict(report.to_dict(), model=kind, split=split, best_epoch=clf.history_.best_epoch,
                 epochs=len(clf.history_.records),
                 embedding_coverage=clf.embedding_coverage_), indent=2) + "\n")
        scores[kind] = report.macro_f1
        print(f"{DISPLAY_NAMES[kind]}: {split} macro-F1 {100 * report.macro_f1:.3f} "
              f"(epochs {len(clf.history_.records)}, artifacts in {out})")
    if len(kinds) > 1:
        table = comparison_table(scores)
        atomic_write_text(Path(cfg.out_dir) / "comparison.txt", table)
        print()
        print(table, end="")
    return EXIT_OK


def _load_classifier(path) -> HateSpeechClassifier:
    if not Path(path).is_dir():
        raise ConfigError(f"checkpoint directory not found: {path}")
    return HateSpeechClassifier.from_checkpoint(path)


def cmd_eval(args) -> int:
    clf = _load_classifier(args.checkpoint)
    texts, labels = read_dataset(args.dataset)
    if not texts:
        raise DataError(f"dataset {args.dataset} has no rows")
    report = clf.evaluate(texts, labels)
    print(report.format())
    if args.output:
        report.to_csv(args.output)
    return EXIT_OK


def _read_predict_input(path) -> list[str]:
    if path is None:
        return [line.rstrip("\r\n") for line in sys.stdin]
    try:
        content = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read input {path}: {exc.strerror or exc}") from None
    except UnicodeDecodeError as exc:
        raise DataError(f"input {path} is not valid UTF-8: {exc}") from None
    if not content.strip():
        return []
    texts, _ = parse_dataset(content, require_labels=False, source=str(path))
    return texts


def cmd_predict(args) -> int:
    clf = _load_classifier(args.checkpoint)
    texts = _read_predict_input(args.input)
    if not texts:
        if args.output:
            atomic_write_text(args.output, "")
        return EXIT_OK
    probs = clf.predict_proba(texts)
    labels = probs.argmax(axis=1)
    fh = io.StringIO()
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["text", "label"] + [f"p_{n}" for n in LABEL_NAMES])
    for text, label, p in zip(texts, labels, probs):
        writer.writerow([text, int(label)] + [f"{v:.9f}" for v in p])
    if args.output:
        atomic_write_text(args.output, fh.getvalue())
    else:
        sys.stdout.write(fh.getvalue())
    return EXIT_OK


def cmd_verify(args) -> int:
    results = verify_mod.run_checks(sabotage=args.sabotage)
    print(verify_mod.format_results(results))
    failed = [r.name for r in results if not r.passed]
    if failed:
        _report_error("verify", EXIT_VERIFY, f"failed checks: {', '.join(failed)}")
        return EXIT_VERIFY
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vihsd",
                                     description="Vietnamese hate-speech detection toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train one or all architectures")
    train.add_argument("--config", help="JSON run config; its relative paths resolve against it")
    train.add_argument("--model", default="bigru-lstm-cnn", choices=KINDS + ("all",))
    train.add_argument("--dataset", help="training CSV with text,label columns")
    train.add_argument("--test-dataset", help="held-out CSV for the final report")
    train.add_argument("--vectors", help="pre-trained .vec embeddings")
    train.add_argument("--lexicon", help="multi-syllable word list, one per line")
    train.add_argument("--out-dir", help="artifact directory (default ./runs)")
    train.add_argument("--seed", type=int)
    train.add_argument("--max-epochs", type=int)
    train.add_argument("--val-fraction", type=float,
                       help="stratified validation share; 0 validates on the training set")
    train.add_argument("--class-weights", choices=sorted(_CLASS_WEIGHTS))
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="score a checkpoint on a labelled CSV")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--output", help="also write per-class scores as CSV")
    ev.set_defaults(func=cmd_eval)

    pr = sub.add_parser("predict", help="label texts from a CSV or stdin lines")
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("--input", help="CSV with a text column (default: one text per stdin line)")
    pr.add_argument("--output", help="output CSV (default stdout)")
    pr.set_defaults(func=cmd_predict)

    ve = sub.add_parser("verify", help="gradient, oracle and preprocessing self-checks")
    ve.add_argument("--sabotage", choices=sorted(verify_mod._SABOTAGE_TARGETS),
                    help=argparse.SUPPRESS)
    ve.set_defaults(func=cmd_verify)
    return parser


def _report_error(kind: str, code: int, reason) -> None:
    text = " ".join(str(reason).split())
    print(f"vihsd: error={kind} exit={code} reason={text}", file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, CorruptionError) as exc:
        _report_error("config", EXIT_CONFIG, exc)
        return EXIT_CONFIG
    except DataError as exc:
        _report_error("data", EXIT_DATA, exc)
        return EXIT_DATA
    except NumericalError as exc:
        _report_error("numeric", EXIT_NUMERIC, exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
