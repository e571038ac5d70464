"""Evaluation metrics, region statistics, and end-to-end protocol runs.

Covers per-domain and pooled ("extended") accuracy, per-image box sizes
with per-class rankings, and seeded protocol runs (standard, few-shot,
imbalanced) for the three methods: zero-shot, plain linear probe, and
the probe trained on box-augmented data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .boxnet import BoxNetModel, Stage1Config, image_boxes, train_stage1
from .errors import ValidationError
from .probe import ProbeConfig, predict, train_probe, zero_shot_predict
from .sampler import AugmentationConfig, augment_dataset
from .seeding import derive_seed
from .store import ClassTextEmbeddings, DatasetBundle, EmbeddingSet

METHODS = ("zero_shot", "probe", "augmented")


def accuracy(predictions: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of matching entries."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValidationError(
            f"length mismatch: {predictions.shape} vs {labels.shape}"
        )
    if predictions.size == 0:
        raise ValidationError("cannot compute accuracy of an empty set")
    return float((predictions.astype(np.int64) == labels.astype(np.int64)).mean())


def extended_accuracy(per_domain: list[tuple[int, int]]) -> float:
    """Pooled correct/total over several domains (not the mean of accuracies)."""
    if not per_domain:
        raise ValidationError("need at least one domain")
    correct = 0
    total = 0
    for c, t in per_domain:
        if t <= 0:
            raise ValidationError("each domain must have a positive total")
        correct += int(c)
        total += int(t)
    return correct / total


@dataclass
class RegionStats:
    """Per-image box sizes and their per-class aggregates."""

    log_volumes: np.ndarray
    side_lengths: np.ndarray
    labels: np.ndarray
    n_classes: int
    class_ids: np.ndarray
    class_mean_log_volume: np.ndarray
    class_mean_side_lengths: np.ndarray


def region_stats(
    model: BoxNetModel,
    embeddings: EmbeddingSet,
    epsilon: float = 1e-12,
    n_classes: int | None = None,
) -> RegionStats:
    """Box side lengths and log-volumes (sum of log sides, eps-clamped).

    Log-volume stands in for the raw side-length product: it is
    order-isomorphic to it and does not underflow at realistic dims.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    if embeddings.dim != model.dim:
        raise ValidationError(f"set dim {embeddings.dim} != model dim {model.dim}")
    if embeddings.count == 0:
        raise ValidationError("cannot compute region stats of an empty set")
    lower, upper = image_boxes(model, embeddings.data)
    sides = upper - lower
    log_volumes = np.log(np.maximum(sides, epsilon)).sum(axis=1)

    labels = embeddings.labels.astype(np.intp)
    total_classes = n_classes if n_classes is not None else int(labels.max()) + 1
    class_ids = np.unique(labels)
    mean_vol = np.array([log_volumes[labels == c].mean() for c in class_ids])
    mean_sides = np.stack([sides[labels == c].mean(axis=0) for c in class_ids])
    return RegionStats(
        log_volumes=log_volumes,
        side_lengths=sides,
        labels=labels,
        n_classes=total_classes,
        class_ids=class_ids,
        class_mean_log_volume=mean_vol,
        class_mean_side_lengths=mean_sides,
    )


def _ranked(class_ids: np.ndarray, statistic: np.ndarray) -> list[int]:
    # descending statistic, ties broken toward the lower class index
    order = np.lexsort((class_ids, -statistic))
    return [int(class_ids[i]) for i in order]


def _warn_missing(stats: RegionStats) -> None:
    missing = sorted(set(range(stats.n_classes)) - set(stats.class_ids.tolist()))
    if missing:
        warnings.warn(f"classes without images skipped from ranking: {missing}")


def rank_classes_by_volume(stats: RegionStats) -> list[int]:
    """Class ids in descending mean log-volume order."""
    _warn_missing(stats)
    return _ranked(stats.class_ids, stats.class_mean_log_volume)


def rank_classes_by_dimension(stats: RegionStats, dim_index: int) -> list[int]:
    """Class ids in descending mean side-length order for one dimension."""
    if not 0 <= dim_index < stats.side_lengths.shape[1]:
        raise ValidationError(
            f"dim_index {dim_index} out of range for d={stats.side_lengths.shape[1]}"
        )
    _warn_missing(stats)
    return _ranked(stats.class_ids, stats.class_mean_side_lengths[:, dim_index])


@dataclass
class Protocol:
    """Which training subset an evaluation run sees."""

    name: str = "standard"
    few_shot_n: int | None = None
    imbalanced_percent: float | None = None
    imbalanced_n: int | None = None

    @classmethod
    def standard(cls) -> "Protocol":
        return cls(name="standard")

    @classmethod
    def few_shot(cls, n: int) -> "Protocol":
        return cls(name="few_shot", few_shot_n=int(n))

    @classmethod
    def imbalanced(cls, percent: float, n: int) -> "Protocol":
        return cls(name="imbalanced", imbalanced_percent=float(percent), imbalanced_n=int(n))

    def validate(self) -> None:
        if self.name not in ("standard", "few_shot", "imbalanced"):
            raise ValidationError(f"unknown protocol {self.name!r}")
        if self.name == "few_shot" and (self.few_shot_n is None or self.few_shot_n < 1):
            raise ValidationError("few_shot needs a positive per-class count")
        if self.name == "imbalanced":
            if self.imbalanced_percent is None or not 0 <= self.imbalanced_percent <= 100:
                raise ValidationError("imbalanced percent must be in [0, 100]")
            if self.imbalanced_n is None or self.imbalanced_n < 1:
                raise ValidationError("imbalanced needs a positive reduced count")

    def to_dict(self) -> dict:
        out: dict = {"name": self.name}
        if self.name == "few_shot":
            out["n"] = self.few_shot_n
        elif self.name == "imbalanced":
            out["percent"] = self.imbalanced_percent
            out["n"] = self.imbalanced_n
        return out


def _take_per_class(
    train: EmbeddingSet, class_ids: np.ndarray, keep: dict[int, int], rng
) -> EmbeddingSet:
    labels = train.labels.astype(np.intp)
    chosen: list[np.ndarray] = []
    for c in class_ids:
        idx = np.flatnonzero(labels == c)
        want = keep.get(int(c))
        if want is None:
            chosen.append(idx)
            continue
        if want > idx.size:
            raise ValidationError(
                f"class {int(c)} has {idx.size} items, cannot keep {want}"
            )
        chosen.append(rng.choice(idx, size=want, replace=False))
    order = np.sort(np.concatenate(chosen))
    return EmbeddingSet(train.data[order], train.labels[order])


def apply_protocol(
    train: EmbeddingSet, protocol: Protocol, n_classes: int, seed: int
) -> EmbeddingSet:
    """Materialize the protocol's training subset (deterministic per seed)."""
    protocol.validate()
    if protocol.name == "standard":
        return train
    rng = np.random.default_rng(derive_seed(seed, "protocol"))
    class_ids = np.arange(n_classes)
    if protocol.name == "few_shot":
        keep = {int(c): int(protocol.few_shot_n) for c in class_ids}
        return _take_per_class(train, class_ids, keep, rng)
    n_reduced = int(round(protocol.imbalanced_percent / 100.0 * n_classes))
    reduced = rng.choice(n_classes, size=n_reduced, replace=False)
    keep = {int(c): int(protocol.imbalanced_n) for c in reduced}
    return _take_per_class(train, class_ids, keep, rng)


@dataclass
class EvalReport:
    """Per-seed accuracies plus their mean and standard deviation.

    ``std`` is the population standard deviation of the per-seed values;
    both aggregates are recomputable from ``per_seed``.
    """

    method: str
    protocol: dict
    seeds: list[int]
    per_seed: list[dict] = field(default_factory=list)
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)

    def finalize(self) -> None:
        for key in ("in_domain", "out_domain", "extended"):
            values = [row[key] for row in self.per_seed]
            if any(v is None for v in values):
                self.mean[key] = None
                self.std[key] = None
            else:
                self.mean[key] = float(np.mean(values))
                self.std[key] = float(np.std(values))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "protocol": self.protocol,
            "seeds": self.seeds,
            "per_seed": self.per_seed,
            "mean": self.mean,
            "std": self.std,
        }


def _evaluate_domains(
    predict_fn, bundle: DatasetBundle
) -> tuple[dict, list[tuple[int, int]]]:
    counts: list[tuple[int, int]] = []
    row: dict = {}
    domains = [("in_domain", bundle.test_in_domain)]
    domains.append(("out_domain", bundle.test_out_domain))
    for key, part in domains:
        if part is None:
            row[key] = None
            row[f"{key}_counts"] = None
            continue
        preds = predict_fn(part)
        correct = int((preds == part.labels.astype(np.intp)).sum())
        counts.append((correct, part.count))
        row[key] = correct / part.count
        row[f"{key}_counts"] = [correct, part.count]
    row["extended"] = extended_accuracy(counts)
    return row, counts


def run_method_once(
    bundle: DatasetBundle,
    train: EmbeddingSet,
    method: str,
    seed: int,
    stage1_config: Stage1Config,
    augment_config: AugmentationConfig,
    probe_config: ProbeConfig,
) -> dict:
    """One end-to-end run of a method; returns the per-domain accuracy row."""
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; options: {METHODS}")
    n_classes = bundle.class_text.n_classes
    if method == "zero_shot":
        row, _ = _evaluate_domains(
            lambda part: zero_shot_predict(bundle.class_text, part), bundle
        )
        return row

    probe_train = train
    if method == "augmented":
        stage1 = replace(stage1_config, seed=derive_seed(seed, "stage1"))
        model, _ = train_stage1(train, bundle.val, bundle.class_text, stage1)
        augment = replace(augment_config, seed=derive_seed(seed, "augment"))
        probe_train = augment_dataset(train, model, augment)

    probe_cfg = replace(probe_config, seed=derive_seed(seed, "probe"))
    probe = train_probe(probe_train, bundle.val, n_classes, probe_cfg)
    row, _ = _evaluate_domains(lambda part: predict(probe, part), bundle)
    return row


def run_protocol(
    bundle: DatasetBundle,
    protocol: Protocol,
    method: str,
    seeds: list[int],
    stage1_config: Stage1Config | None = None,
    augment_config: AugmentationConfig | None = None,
    probe_config: ProbeConfig | None = None,
) -> EvalReport:
    """Run a method under a protocol for every seed and aggregate."""
    if not seeds:
        raise ValidationError("seeds must be nonempty")
    protocol.validate()
    stage1_config = stage1_config or Stage1Config()
    augment_config = augment_config or AugmentationConfig()
    probe_config = probe_config or ProbeConfig()

    report = EvalReport(method=method, protocol=protocol.to_dict(), seeds=list(seeds))
    for seed in seeds:
        train = apply_protocol(
            bundle.train, protocol, bundle.class_text.n_classes, seed
        )
        row = run_method_once(
            bundle, train, method, seed, stage1_config, augment_config, probe_config
        )
        row = {"seed": seed, **row}
        report.per_seed.append(row)
    report.finalize()
    return report
