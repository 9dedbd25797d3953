"""Training loop, evaluation metrics, and the learning-curve harness.

One Adadelta step per mini-batch: per-pair binary cross-entropy gradients
accumulate (scaled by 1/batch) into the parameter grad slots, then every
parameter updates and the slots clear.  Epoch shuffles derive from
(seed, epoch) so a run resumed from a checkpoint replays the exact batch
order; dropout masks come from one long-lived generator whose state the
checkpoint captures.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .corpus import Corpus, PaddedPair, augment_swap, pad_and_batch
from .errors import NumericError
from .model import ModelConfig, PairModel
from .optim import AdadeltaState, adadelta_step

log = logging.getLogger(__name__)

# Sub-stream tags so parameter init, dropout, and holdout splitting never
# share a random stream even under the same seed.
_DROPOUT_STREAM = 1
_HOLDOUT_STREAM = 2
_SUBSAMPLE_STREAM = 3
_SHUFFLE_STREAM = 4


@dataclass
class EvaluationReport:
    """Confusion counts and the derived metrics."""

    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    accuracy: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, tn: int) -> "EvaluationReport":
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = f1_score(precision, recall)
        total = tp + fp + fn + tn
        accuracy = (tp + tn) / total if total else 0.0
        return cls(tp, fp, fn, tn, precision, recall, f1, accuracy)

    def metrics(self) -> dict[str, float]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
        }

    def key_value_lines(self) -> list[str]:
        lines = [f"{k}={v:.6f}" for k, v in self.metrics().items()]
        lines += [f"{k}={getattr(self, k)}" for k in ("tp", "fp", "fn", "tn")]
        return lines

    def table(self) -> str:
        rows = [("precision", f"{self.precision:.4f}"), ("recall", f"{self.recall:.4f}"),
                ("f1", f"{self.f1:.4f}"), ("accuracy", f"{self.accuracy:.4f}"),
                ("tp/fp/fn/tn", f"{self.tp}/{self.fp}/{self.fn}/{self.tn}")]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def evaluate(model: PairModel, corpus: Corpus, threshold: float | None = None) -> EvaluationReport:
    """Score every pair at the decision threshold (p >= threshold -> paraphrase)."""
    if len(corpus) == 0:
        raise ValueError("evaluate: empty corpus")
    if any(p.augmented for p in corpus.pairs):
        raise ValueError("evaluate: corpus contains augmented pairs; evaluate on originals only")
    if threshold is None:
        threshold = model.config.threshold
    # Counts are order-independent; a fixed seed keeps the pass deterministic
    # even for train-split corpora, whose batching would otherwise shuffle.
    batches = pad_and_batch(corpus, min_len=model.config.min_len,
                            batch_size=model.config.batch_size, seed=0)
    tp = fp = fn = tn = 0
    for batch in batches:
        for item in batch:
            prob = model.predict_proba(item.padded1, item.padded2)
            predicted = 1 if prob >= threshold else 0
            if predicted == 1 and item.label == 1:
                tp += 1
            elif predicted == 1:
                fp += 1
            elif item.label == 1:
                fn += 1
            else:
                tn += 1
    return EvaluationReport.from_counts(tp, fp, fn, tn)


def _epoch_seed(seed: int, epoch: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, _SHUFFLE_STREAM, epoch])


class Trainer:
    """Drives epochs over a training corpus and tracks the best parameters.

    Model selection uses dev F1 for the twitter profile and dev accuracy for
    msrp.  State that a checkpoint must capture lives here: the epoch and
    batch counters, per-parameter Adadelta accumulators, and the dropout
    generator.
    """

    def __init__(self, model: PairModel, train_corpus: Corpus, dev_corpus: Corpus):
        self.model = model
        self.config = model.config
        self.train_corpus = train_corpus
        self.dev_corpus = dev_corpus
        self.named_params = model.params.named()
        self.opt_state = {
            name: AdadeltaState(shape=t.values.shape) for name, t in self.named_params.items()
        }
        self.dropout_rng = np.random.default_rng(
            np.random.SeedSequence([self.config.seed, _DROPOUT_STREAM])
        )
        self.epoch = 0
        self.batch_index = 0
        self.history: list[dict] = []
        self.best_metric = -1.0
        self.best_values: dict[str, np.ndarray] | None = None
        self.selection_metric = "f1" if self.config.dataset_profile == "twitter" else "accuracy"

    def _epoch_batches(self) -> list[list[PaddedPair]]:
        rng = np.random.default_rng(_epoch_seed(self.config.seed, self.epoch))
        return pad_and_batch(self.train_corpus, min_len=self.config.min_len,
                             batch_size=self.config.batch_size, seed=rng)

    def step_batch(self, batch: list[PaddedPair]) -> float:
        """One accumulated-gradient Adadelta step; returns the mean pair loss."""
        tensors = list(self.named_params.values())
        ad.zero_grad(tensors)
        total = 0.0
        inv = 1.0 / len(batch)
        for item in batch:
            prob = self.model.forward_pair(item.padded1, item.padded2,
                                           mode="train", rng=self.dropout_rng)
            loss = ad.bce_loss(prob, item.label)
            total += loss.item()
            ad.backward(ad.scale(loss, inv))
        if not np.isfinite(total):
            raise NumericError(
                f"non-finite loss in epoch {self.epoch} batch {self.batch_index}"
            )
        for name, tensor in self.named_params.items():
            if tensor.grad is None:
                continue
            adadelta_step(tensor, self.opt_state[name], lr=self.config.lr)
        ad.zero_grad(tensors)
        self.batch_index += 1
        return total * inv

    def run_epoch(self) -> float:
        """Train over one shuffled pass; returns the epoch's mean pair loss."""
        batches = self._epoch_batches()
        if self.batch_index >= len(batches):
            self.epoch += 1
            self.batch_index = 0
            batches = self._epoch_batches()
        losses = []
        sizes = []
        for batch in batches[self.batch_index :]:
            losses.append(self.step_batch(batch))
            sizes.append(len(batch))
        self.epoch += 1
        self.batch_index = 0
        return float(np.average(losses, weights=sizes)) if losses else 0.0

    def evaluate_dev(self) -> EvaluationReport:
        return evaluate(self.model, self.dev_corpus)

    def record_epoch(self, train_loss: float) -> EvaluationReport:
        report = self.evaluate_dev()
        entry = {"epoch": self.epoch, "train_loss": train_loss, **report.metrics()}
        self.history.append(entry)
        metric = entry[self.selection_metric]
        if metric > self.best_metric:
            self.best_metric = metric
            self.best_values = {
                name: t.values.copy() for name, t in self.named_params.items()
            }
        log.info(
            "epoch %d: train_loss=%.4f dev_f1=%.4f dev_acc=%.4f",
            self.epoch, train_loss, report.f1, report.accuracy,
        )
        return report

    def train(self, epochs: int | None = None) -> list[dict]:
        if epochs is None:
            epochs = self.config.epochs
        for _ in range(epochs):
            loss = self.run_epoch()
            self.record_epoch(loss)
        return self.history

    def restore_best(self) -> None:
        """Overwrite live parameters with the best-dev snapshot, if any."""
        if self.best_values is None:
            return
        for name, values in self.best_values.items():
            self.named_params[name].values = values.copy()

    def save(self, path) -> None:
        from .checkpoint import save_checkpoint

        save_checkpoint(
            path,
            config=self.config,
            params=self.named_params,
            opt_state=self.opt_state,
            rng_state=self.dropout_rng.bit_generator.state,
            epoch=self.epoch,
            batch_index=self.batch_index,
            idf=self.model.idf,
        )

    @classmethod
    def from_checkpoint(cls, ckpt, train_corpus: Corpus, dev_corpus: Corpus,
                        table, provider=None) -> "Trainer":
        """Rebuild a trainer mid-run; stepping it continues the original run
        bit-identically."""
        from .checkpoint import Checkpoint, load_checkpoint

        if not isinstance(ckpt, Checkpoint):
            ckpt = load_checkpoint(ckpt)
        config = ckpt.model_config()
        model = PairModel.build(config, table, provider=provider, idf=ckpt.idf)
        trainer = cls(model, train_corpus, dev_corpus)
        restore_model_arrays(model, trainer, ckpt)
        return trainer


def restore_model_arrays(model: PairModel, trainer: Trainer | None, ckpt) -> None:
    """Copy checkpoint arrays into a freshly built model (and trainer state)."""
    named = model.params.named()
    missing = set(named) - set(ckpt.params)
    extra = set(ckpt.params) - set(named)
    if missing or extra:
        raise ValueError(
            f"checkpoint parameters do not match the model: missing {sorted(missing)}, "
            f"unexpected {sorted(extra)}"
        )
    for name, tensor in named.items():
        arr = ckpt.params[name]
        if arr.shape != tensor.values.shape:
            raise ValueError(
                f"checkpoint parameter {name!r} has shape {arr.shape}, "
                f"model expects {tensor.values.shape}"
            )
        tensor.values = arr.copy()
    if trainer is None:
        return
    for name, state in trainer.opt_state.items():
        state.accum_grad_sq = ckpt.opt_grad_sq[name].copy()
        state.accum_update_sq = ckpt.opt_update_sq[name].copy()
    trainer.dropout_rng.bit_generator.state = ckpt.rng_state
    trainer.epoch = ckpt.epoch
    trainer.batch_index = ckpt.batch_index


def holdout_split(corpus: Corpus, fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Stratified split: per label class, move ``fraction`` of pairs (at least
    one) into the held-out corpus.  Order within splits follows the original."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"holdout_split: fraction must be in (0, 1), got {fraction}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, _HOLDOUT_STREAM]))
    held_ids: set[int] = set()
    for label in (0, 1):
        indices = [i for i, p in enumerate(corpus.pairs) if p.label == label]
        if not indices:
            continue
        n_held = max(1, round(len(indices) * fraction))
        if n_held >= len(indices):
            raise ValueError(f"holdout_split: class {label} too small to split")
        chosen = rng.permutation(len(indices))[:n_held]
        held_ids.update(indices[i] for i in chosen)
    keep = [p for i, p in enumerate(corpus.pairs) if i not in held_ids]
    held = [p for i, p in enumerate(corpus.pairs) if i in held_ids]
    base = Corpus(split=corpus.split, source=corpus.source, pairs=keep,
                  debatable_excluded=corpus.debatable_excluded)
    dev = Corpus(split="dev", source=corpus.source, pairs=held)
    return base, dev


def stratified_subsample(corpus: Corpus, fraction: float, seed: int) -> Corpus:
    """Seeded per-class subsample used by the learning curve."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"stratified_subsample: fraction must be in (0, 1], got {fraction}")
    if fraction == 1.0:
        return corpus
    rng = np.random.default_rng(np.random.SeedSequence([seed, _SUBSAMPLE_STREAM]))
    kept: set[int] = set()
    for label in (0, 1):
        indices = [i for i, p in enumerate(corpus.pairs) if p.label == label]
        n_keep = round(len(indices) * fraction)
        if indices and n_keep == 0:
            raise ValueError(
                f"stratified_subsample: fraction {fraction} empties label class {label}"
            )
        chosen = rng.permutation(len(indices))[:n_keep]
        kept.update(indices[i] for i in chosen)
    pairs = [p for i, p in enumerate(corpus.pairs) if i in kept]
    return Corpus(split=corpus.split, source=corpus.source, pairs=pairs,
                  debatable_excluded=corpus.debatable_excluded)


def train(
    train_corpus: Corpus,
    dev_corpus: Corpus | None,
    config: ModelConfig,
    table,
    provider=None,
) -> tuple[PairModel, Trainer]:
    """Build a model and train it; returns (model with best-dev parameters, trainer).

    With no dev corpus (MSRP has none), a stratified seeded 10% of train is
    held out for model selection.  With ``config.augment`` the training pairs
    are doubled by sentence swapping after the holdout is taken, so dev stays
    untouched.  Zero configured epochs leave the initialized parameters as
    they are and produce an empty history.
    """
    from .features import build_idf  # local import keeps module load light

    if dev_corpus is None:
        train_corpus, dev_corpus = holdout_split(train_corpus, 0.1, config.seed)
        log.info("no dev corpus: held out %d training pairs for selection", len(dev_corpus))

    idf = None
    if config.dataset_profile == "msrp":
        idf = build_idf(
            [p.tokens1 for p in train_corpus.pairs] + [p.tokens2 for p in train_corpus.pairs]
        )

    fit_corpus = augment_swap(train_corpus) if config.augment else train_corpus

    model = PairModel.build(config, table, provider=provider, idf=idf)
    trainer = Trainer(model, fit_corpus, dev_corpus)
    trainer.train()
    trainer.restore_best()
    return model, trainer


def learning_curve(
    train_corpus: Corpus,
    dev_corpus: Corpus | None,
    config: ModelConfig,
    table,
    fractions=(0.25, 0.5, 1.0),
    provider=None,
) -> list[dict]:
    """Train at increasing training-set fractions; one metrics row per fraction."""
    rows = []
    for fraction in fractions:
        subset = stratified_subsample(train_corpus, float(fraction), config.seed)
        cfg = copy.deepcopy(config)
        model, trainer = train(subset, dev_corpus, cfg, table, provider=provider)
        report = evaluate(model, trainer.dev_corpus)
        rows.append({"fraction": float(fraction), "train_pairs": len(subset), **report.metrics()})
    return rows
