"""Training loop, k-fold cross-validation, metrics and ablation runner."""

import math
from dataclasses import dataclass, replace

import numpy as np

from .features import MinMax, extract_metadata, parse_selection
from .model import EmbeddingProvider, EncodedSample, ModelConfig, SentimentModel
from .optim import adam_step
from .rng import Rng


class TrainingError(RuntimeError):
    pass


@dataclass
class FoldPlan:
    """Deterministic shuffle + contiguous slicing into k near-equal folds."""

    n: int
    k: int
    seed: int
    order: list
    bounds: list  # k+1 cut points into `order`

    def test_indices(self, fold):
        return self.order[self.bounds[fold]:self.bounds[fold + 1]]

    def train_indices(self, fold):
        return self.order[:self.bounds[fold]] + self.order[self.bounds[fold + 1]:]


def kfold_split(n, k=10, seed=0):
    if n < k:
        raise ValueError(f"cannot split {n} samples into {k} folds")
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    rng = Rng(seed)
    order = rng.permutation(n)
    base, extra = divmod(n, k)
    bounds = [0]
    for i in range(k):
        bounds.append(bounds[-1] + base + (1 if i < extra else 0))
    return FoldPlan(n=n, k=k, seed=seed, order=order, bounds=bounds)


@dataclass
class Metrics:
    confusion: np.ndarray  # (3, 3), rows = gold, cols = predicted
    accuracy: float
    precision_macro: float
    precision_weighted: float
    recall_macro: float
    recall_weighted: float
    f1_macro: float
    f1_weighted: float

    FIELDS = ("accuracy", "f1_macro", "f1_weighted", "precision_macro",
              "precision_weighted", "recall_macro", "recall_weighted")

    def as_dict(self):
        return {name: getattr(self, name) for name in self.FIELDS}


def _safe_div(a, b):
    return a / b if b else 0.0


def metrics_from_confusion(confusion):
    cm = np.asarray(confusion, dtype=np.int64)
    if cm.shape != (3, 3):
        raise ValueError(f"confusion matrix must be 3x3, got {cm.shape}")
    total = int(cm.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    support = cm.sum(axis=1)
    precision = np.array([_safe_div(cm[i, i], cm[:, i].sum()) for i in range(3)])
    recall = np.array([_safe_div(cm[i, i], support[i]) for i in range(3)])
    f1 = np.array([_safe_div(2 * precision[i] * recall[i], precision[i] + recall[i])
                   for i in range(3)])
    return Metrics(
        confusion=cm,
        accuracy=_safe_div(np.trace(cm), total),
        precision_macro=float(precision.mean()),
        precision_weighted=float(precision @ support / total),
        recall_macro=float(recall.mean()),
        recall_weighted=float(recall @ support / total),
        f1_macro=float(f1.mean()),
        f1_weighted=float(f1 @ support / total),
    )


@dataclass
class Variant:
    """One ablation setting; the default is the full model."""

    name: str = "full"
    concept_mode: str = "full"   # full | no_vectors | zeroed
    use_vad: bool = True
    use_attention: bool = True
    use_metadata: bool = True
    selection_override: str | None = None


def apply_switch(switch):
    """Map an ablation switch string to a Variant."""
    switch = switch.strip()
    if switch == "no_concepts":
        return Variant(name=switch, concept_mode="no_vectors")
    if switch == "plain_bigru":
        return Variant(name=switch, concept_mode="zeroed")
    if switch == "no_vad":
        return Variant(name=switch, use_vad=False)
    if switch == "no_metadata":
        return Variant(name=switch, use_metadata=False)
    if switch == "no_attention":
        return Variant(name=switch, use_attention=False)
    if switch.startswith("metadata_selection(") and switch.endswith(")"):
        spec = switch[len("metadata_selection("):-1]
        parse_selection(spec)  # validate now, fail fast
        return Variant(name=switch, selection_override=spec)
    raise ValueError(f"unknown ablation switch {switch!r}")


class Fitted:
    """A trained model plus the fold-local state needed to encode samples."""

    def __init__(self, model, embedding, selection, scaler, loss_curve, cfg, variant):
        self.model = model
        self.embedding = embedding
        self.selection = selection
        self.scaler = scaler
        self.loss_curve = loss_curve
        self.cfg = cfg
        self.variant = variant

    def encode(self, prepared):
        meta = extract_metadata_matrix([prepared], self.selection)
        meta = self.scaler.transform(meta)[0] if self.selection else np.empty(0)
        return EncodedSample(
            sample_id=prepared.tweet_id,
            tokens=prepared.tokens,
            token_ids=self.embedding.ids(prepared.tokens),
            onehot=prepared.onehot,
            alphas=prepared.alphas,
            vad=prepared.vad,
            meta=meta,
            label=prepared.label,
        )

    def predictions(self, samples):
        return [self.model.predict(self.encode(p))[0] for p in samples]

    def evaluate(self, samples):
        cm = np.zeros((3, 3), dtype=np.int64)
        for p in samples:
            pred = self.model.predict(self.encode(p))[0]
            cm[p.label, pred] += 1
        return metrics_from_confusion(cm)


def extract_metadata_matrix(prepared, selection):
    if not selection:
        return np.empty((len(prepared), 0))
    idx = np.asarray(selection, dtype=np.intp)
    return np.stack([p.meta_full[idx] for p in prepared])


def _model_config(cfg, variant, n_meta):
    return ModelConfig(
        d_w=cfg.d_w, d_c=cfg.d_c, h=cfg.h, d_red=cfg.d_red,
        gcm_iterations=cfg.gcm_iterations, gcm_residual=cfg.gcm_residual,
        candidate_combine=cfg.candidate_combine, dropout=cfg.dropout,
        pos_size=cfg.pos_size, dep_size=cfg.dep_size,
        use_attention=variant.use_attention, use_vad=variant.use_vad,
        n_meta=n_meta, concept_mode=variant.concept_mode,
    )


def fit(train_samples, cfg, variant=None, seed=None, file_embeddings=None,
        scaler=None):
    """Train a fresh model on `train_samples`.

    Distinct RNG streams (same seed) drive init, dropout and shuffling, so
    a run is reproduced exactly by (samples, cfg, variant, seed).
    """
    if not train_samples:
        raise TrainingError("empty training set")
    variant = variant or Variant()
    seed = cfg.seed if seed is None else seed
    rng_init = Rng(seed, stream=1)
    rng_drop = Rng(seed, stream=2)
    rng_shuffle = Rng(seed, stream=3)

    selection = parse_selection(variant.selection_override or cfg.metadata_selection)
    if not variant.use_metadata:
        selection = []
    if file_embeddings is not None:
        embedding = file_embeddings
    else:
        embedding = EmbeddingProvider.build(
            (p.tokens for p in train_samples), cfg.d_w, rng_init)
    if scaler is None:
        meta = extract_metadata_matrix(train_samples, selection)
        scaler = MinMax.fit(meta) if selection else MinMax(np.empty(0), np.empty(0))

    model = SentimentModel(_model_config(cfg, variant, len(selection)), embedding, rng_init)
    fitted = Fitted(model, embedding, selection, scaler, [], cfg, variant)
    encoded = [fitted.encode(p) for p in train_samples]

    n = len(encoded)
    order = list(range(n))
    for epoch in range(cfg.epochs):
        rng_shuffle.shuffle(order)
        epoch_loss = 0.0
        for batch_no, start in enumerate(range(0, n, cfg.batch)):
            batch = order[start:start + cfg.batch]
            model.params.zero_grad()
            batch_loss = 0.0
            inv = 1.0 / len(batch)
            for idx in batch:
                loss = model.loss(encoded[idx], training=True, rng=rng_drop)
                batch_loss += loss.item()
                (loss * inv).backward()
            if not math.isfinite(batch_loss):
                raise TrainingError(
                    f"non-finite loss in epoch {epoch + 1}, batch {batch_no + 1}")
            adam_step(model.params, cfg.lr, cfg.l2)
            epoch_loss += batch_loss
        fitted.loss_curve.append(epoch_loss / n)
    return fitted


@dataclass
class CvResult:
    variant: str
    per_fold: list
    mean: dict

    @staticmethod
    def aggregate(variant, per_fold):
        mean = {name: float(np.mean([getattr(m, name) for m in per_fold]))
                for name in Metrics.FIELDS}
        return CvResult(variant=variant, per_fold=per_fold, mean=mean)


def cross_validate(prepared, cfg, variant=None, folds=10, file_embeddings=None):
    """Per-fold fresh training (seed = base seed + fold index), feature
    scaling fit on each fold's training split unless the config opts into
    the leaky global scope."""
    variant = variant or Variant()
    plan = kfold_split(len(prepared), folds, cfg.seed)
    scaler = None
    if cfg.normalize_scope == "global":
        selection = parse_selection(variant.selection_override or cfg.metadata_selection)
        if not variant.use_metadata:
            selection = []
        if selection:
            scaler = MinMax.fit(extract_metadata_matrix(prepared, selection))
    per_fold = []
    for fold in range(folds):
        train_set = [prepared[i] for i in plan.train_indices(fold)]
        test_set = [prepared[i] for i in plan.test_indices(fold)]
        fitted = fit(train_set, cfg, variant, seed=cfg.seed + fold,
                     file_embeddings=file_embeddings, scaler=scaler)
        per_fold.append(fitted.evaluate(test_set))
    return CvResult.aggregate(variant.name, per_fold)


def ablate(prepared, cfg, switches, folds=10, file_embeddings=None):
    """Cross-validate the full model plus one variant per switch."""
    results = [cross_validate(prepared, cfg, Variant(), folds, file_embeddings)]
    for switch in switches:
        variant = apply_switch(switch)
        results.append(cross_validate(prepared, cfg, variant, folds, file_embeddings))
    return results
