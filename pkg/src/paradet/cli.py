"""Command-line interface: train, eval, predict, gradcheck, curve.

Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 numeric
failure.  Every source of randomness derives from --seed, so identical
invocations on identical files produce identical outputs, reports, and
checkpoints.

Config precedence: built-in defaults, then ``key=value`` lines from
--config, then explicit flags.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .checkpoint import load_checkpoint
from .corpus import load_msrp, load_twitter, pad_tokens
from .embeddings import load_pretrained, tokenize
from .encoder import EncoderConfig
from .errors import CheckpointError, DataError, NumericError, ParadetError, ShapeError
from .features import LexicalSimilarityProvider
from .gradcheck import REL_TOLERANCE, check_model
from .model import ModelConfig, PairModel
from .training import Trainer, evaluate, learning_curve, restore_model_arrays, train
from .wordsim import WordSimConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of exiting the process."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _int_list(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in raw.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {raw!r}")


def _float_list(raw: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in raw.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {raw!r}")


def _bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {raw!r}")


# (option name, config attribute, parser) for every tunable ModelConfig field.
_CONFIG_OPTIONS = [
    ("ablation", "ablation", str),
    ("dataset", "dataset_profile", str),
    ("epochs", "epochs", int),
    ("batch-size", "batch_size", int),
    ("lr", "lr", float),
    ("dropout", "dropout", float),
    ("seed", "seed", int),
    ("min-len", "min_len", int),
    ("threshold", "threshold", float),
    ("hidden-layers", "hidden_layers", _int_list),
    ("augment", "augment", _bool),
    ("absolute-difference", "absolute_difference", _bool),
    ("finetune-embeddings", "finetune_embeddings", _bool),
    ("filter-widths", "encoder.filter_widths", _int_list),
    ("filters", "encoder.filters_per_width", int),
    ("lstm-hidden", "encoder.lstm_hidden", int),
    ("sim-filters", "wordsim.sim_filters", int),
    ("sim-filter-width", "wordsim.sim_filter_width", int),
    ("sim-channels", "wordsim.sim_channels", int),
    ("use-cosine", "wordsim.use_cosine", _bool),
]


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value file applied between defaults and flags")
    for option, _, kind in _CONFIG_OPTIONS:
        parser.add_argument(f"--{option}", type=kind, default=None)


def _set_path(config: ModelConfig, dotted: str, value) -> None:
    target = config
    parts = dotted.split(".")
    for part in parts[:-1]:
        target = getattr(target, part)
    setattr(target, parts[-1], value)


def _parse_config_file(path) -> dict[str, str]:
    known = {option for option, _, _ in _CONFIG_OPTIONS}
    values: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise DataError("expected key=value", path=path, line=line_no)
                key, _, value = line.partition("=")
                key = key.strip()
                if key not in known:
                    raise DataError(f"unknown config key {key!r}", path=path, line=line_no)
                values[key] = value.strip()
    except OSError as exc:
        raise DataError(f"cannot read config file: {exc}", path=path)
    return values


def build_config(args: argparse.Namespace) -> ModelConfig:
    """Defaults, then the config file, then explicit flags."""
    config = ModelConfig(encoder=EncoderConfig(), wordsim=WordSimConfig())
    file_values = _parse_config_file(args.config) if args.config else {}
    for option, dotted, kind in _CONFIG_OPTIONS:
        if option in file_values:
            try:
                _set_path(config, dotted, kind(file_values[option]))
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise DataError(f"config key {option!r}: {exc}", path=args.config)
        flag_value = getattr(args, option.replace("-", "_"))
        if flag_value is not None:
            _set_path(config, dotted, flag_value)
    return config


def _load_corpus(path, dataset: str, split: str):
    if dataset == "msrp":
        return load_msrp(path, split)
    return load_twitter(path, split)


def _load_provider(args) -> LexicalSimilarityProvider | None:
    if args.pos_lexicon or args.pair_scores:
        if not (args.pos_lexicon and args.pair_scores):
            raise UsageError("provide both --pos-lexicon and --pair-scores or neither")
        return LexicalSimilarityProvider.load(args.pos_lexicon, args.pair_scores)
    return None


def _write_report(report_lines: list[str], table: str, path) -> None:
    print(table)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(report_lines) + "\n")
    else:
        for line in report_lines:
            print(line)


def _model_from_checkpoint(args) -> PairModel:
    ckpt = load_checkpoint(args.checkpoint)
    config = ckpt.model_config()
    table = load_pretrained(args.embeddings, expected_dim=config.encoder.embedding_dim or None)
    provider = _load_provider(args)
    model = PairModel.build(config, table, provider=provider, idf=ckpt.idf)
    restore_model_arrays(model, None, ckpt)
    return model


def cmd_train(args) -> int:
    config = build_config(args)
    provider = _load_provider(args)
    table = load_pretrained(args.embeddings)
    train_corpus = _load_corpus(args.train, config.dataset_profile,
                                "train")
    dev_corpus = None
    if args.dev:
        dev_split = "dev" if config.dataset_profile == "twitter" else "test"
        dev_corpus = _load_corpus(args.dev, config.dataset_profile, dev_split)
        dev_corpus.split = "dev"
    model, trainer = train(train_corpus, dev_corpus, config, table, provider=provider)
    if args.checkpoint:
        trainer.save(args.checkpoint)
    report = evaluate(model, trainer.dev_corpus)
    lines = [f"split=dev"] + report.key_value_lines()
    for entry in trainer.history:
        print(f"epoch={entry['epoch']} train_loss={entry['train_loss']:.6f} "
              f"dev_f1={entry['f1']:.6f} dev_accuracy={entry['accuracy']:.6f}")
    _write_report(lines, report.table(), args.report)
    return EXIT_OK


def cmd_eval(args) -> int:
    model = _model_from_checkpoint(args)
    corpus = _load_corpus(args.data, model.config.dataset_profile, args.split)
    threshold = args.threshold if args.threshold is not None else model.config.threshold
    report = evaluate(model, corpus, threshold=threshold)
    lines = [f"split={args.split}", f"threshold={threshold}"] + report.key_value_lines()
    _write_report(lines, report.table(), args.report)
    return EXIT_OK


def cmd_predict(args) -> int:
    model = _model_from_checkpoint(args)
    threshold = args.threshold if args.threshold is not None else model.config.threshold
    min_len = model.config.min_len
    for line_no, line in enumerate(sys.stdin, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        if "\t" not in line:
            raise DataError("expected 'sentence1<TAB>sentence2'", path="<stdin>", line=line_no)
        sent1, _, sent2 = line.partition("\t")
        tokens1 = pad_tokens(tokenize(sent1), min_len)
        tokens2 = pad_tokens(tokenize(sent2), min_len)
        prob = model.predict_proba(tokens1, tokens2)
        label = 1 if prob >= threshold else 0
        print(f"{prob:.6f}\t{label}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    seed = args.seed if args.seed is not None else 0
    model, pair = _gradcheck_fixture(seed)
    errors = check_model(model, pair[0], pair[1], label=1)
    worst = 0.0
    for name in sorted(errors):
        print(f"{name}\t{errors[name]:.3e}")
        worst = max(worst, errors[name])
    print(f"max_rel_err={worst:.3e} tolerance={REL_TOLERANCE:.0e}")
    if worst >= REL_TOLERANCE:
        print("gradcheck FAILED", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _gradcheck_fixture(seed: int):
    """A tiny full model over random embeddings, for the gradient gate."""
    from .autodiff import Tensor
    from .embeddings import EmbeddingTable, Vocabulary, PAD_TOKEN, UNK_TOKEN

    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(12)]
    mapping = {w: i for i, w in enumerate(words)}
    mapping[PAD_TOKEN] = len(words)
    mapping[UNK_TOKEN] = len(words) + 1
    matrix = rng.normal(scale=0.5, size=(len(words) + 2, 4))
    matrix[len(words)] = 0.0
    table = EmbeddingTable(Vocabulary(mapping), Tensor(matrix))

    config = ModelConfig(
        ablation="augdeep",
        dataset_profile="twitter",
        encoder=EncoderConfig(filter_widths=(2, 3), filters_per_width=3, lstm_hidden=5),
        wordsim=WordSimConfig(sim_filters=2, sim_filter_width=2, sim_channels=6),
        hidden_layers=(4,),
        seed=seed,
        min_len=3,
    )
    model = PairModel.build(config, table)
    sent1 = [words[i] for i in rng.integers(0, len(words), size=5)]
    sent2 = [words[i] for i in rng.integers(0, len(words), size=6)]
    return model, (sent1, sent2)


def cmd_curve(args) -> int:
    config = build_config(args)
    provider = _load_provider(args)
    table = load_pretrained(args.embeddings)
    train_corpus = _load_corpus(args.train, config.dataset_profile, "train")
    dev_corpus = None
    if args.dev:
        dev_corpus = _load_corpus(args.dev, config.dataset_profile,
                                  "dev" if config.dataset_profile == "twitter" else "test")
        dev_corpus.split = "dev"
    fractions = args.fractions or (0.25, 0.5, 1.0)
    rows = learning_curve(train_corpus, dev_corpus, config, table,
                          fractions=fractions, provider=provider)
    lines = []
    for row in rows:
        print(f"fraction={row['fraction']:.2f} train_pairs={row['train_pairs']} "
              f"f1={row['f1']:.4f} accuracy={row['accuracy']:.4f}")
        lines.append(
            f"fraction={row['fraction']}\tf1={row['f1']:.6f}\taccuracy={row['accuracy']:.6f}"
        )
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="paradet", description=__doc__)
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_train = sub.add_parser("train", help="train a model and save a checkpoint")
    p_train.add_argument("--train", required=True, help="training corpus path")
    p_train.add_argument("--dev", help="dev corpus path (twitter); omit for a seeded holdout")
    p_train.add_argument("--embeddings", required=True)
    p_train.add_argument("--pos-lexicon")
    p_train.add_argument("--pair-scores")
    p_train.add_argument("--checkpoint", help="where to save the trained model")
    p_train.add_argument("--report", help="write metric=value lines here")
    _add_config_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a corpus")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--embeddings", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--split", default="test", choices=("train", "dev", "test"))
    p_eval.add_argument("--threshold", type=float, default=None)
    p_eval.add_argument("--pos-lexicon")
    p_eval.add_argument("--pair-scores")
    p_eval.add_argument("--report")
    p_eval.set_defaults(func=cmd_eval)

    p_pred = sub.add_parser("predict", help="score sentence pairs from stdin")
    p_pred.add_argument("--checkpoint", required=True)
    p_pred.add_argument("--embeddings", required=True)
    p_pred.add_argument("--threshold", type=float, default=None)
    p_pred.add_argument("--pos-lexicon")
    p_pred.add_argument("--pair-scores")
    p_pred.set_defaults(func=cmd_predict)

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient gate")
    p_grad.add_argument("--seed", type=int, default=None)
    p_grad.set_defaults(func=cmd_gradcheck)

    p_curve = sub.add_parser("curve", help="learning curve over training fractions")
    p_curve.add_argument("--train", required=True)
    p_curve.add_argument("--dev")
    p_curve.add_argument("--embeddings", required=True)
    p_curve.add_argument("--pos-lexicon")
    p_curve.add_argument("--pair-scores")
    p_curve.add_argument("--fractions", type=_float_list, default=None)
    p_curve.add_argument("--report")
    _add_config_flags(p_curve)
    p_curve.set_defaults(func=cmd_curve)

    return parser


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.verbose:
            logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                                format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CheckpointError, ShapeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ParadetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
