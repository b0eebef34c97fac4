"""End-to-end orchestration shared by the CLI subcommands.

Resolves configuration (flags over config file over defaults), wires
split -> fuse -> normalize -> train -> evaluate, and produces the paired
with/without-severity ablation. All outputs are deterministic for a fixed
seed; report JSON is rendered with sorted keys so identical runs are
byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from .dataset import (
    DEFAULT_FIB,
    DatasetSplit,
    FibClassMap,
    SeverityScale,
    StoryRecord,
    stratified_split,
)
from .evaluation import AblationDiff, EvalReport, ablation_compare, evaluate
from .fusion import (
    EmbeddingRecord,
    apply_normalizer,
    correlation_matrix,
    fit_normalizer,
    fuse,
)
from .gbt import GbtModel, TrainConfig, TrainReport, train


@dataclass
class PipelineConfig:
    """Resolved run configuration; echoed into every report for auditability."""

    records: str | None = None
    embeddings: str | None = None
    model: str | None = None
    out: str | None = None
    seed: int = 0
    test_fraction: float = 0.2
    validation_fraction: float = 0.2
    include_severity: bool = True
    severity_scale: SeverityScale = field(default_factory=SeverityScale.numeric)
    fib_classes: FibClassMap = DEFAULT_FIB
    base_url: str | None = None
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        paths = [p for p in (self.records, self.embeddings, self.model, self.out) if p]
        if len(paths) != len(set(paths)):
            raise ValueError(f"configured paths must be distinct, got {paths}")
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must be in (0, 1)")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must be in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "records": self.records,
            "embeddings": self.embeddings,
            "model": self.model,
            "out": self.out,
            "seed": self.seed,
            "test_fraction": self.test_fraction,
            "validation_fraction": self.validation_fraction,
            "include_severity": self.include_severity,
            "severity_scale": "numeric" if self.severity_scale.is_numeric else list(self.severity_scale.labels),
            "fib_classes": list(self.fib_classes.values),
            "base_url": self.base_url,
            "train": self.train.to_dict(),
        }


_CONFIG_KEYS = {
    "records",
    "embeddings",
    "model",
    "out",
    "seed",
    "test_fraction",
    "validation_fraction",
    "include_severity",
    "severity_scale",
    "fib_classes",
    "base_url",
    "train",
}


def resolve_config(file_config: dict | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Merge defaults, config-file values, and explicit flag overrides in
    ascending precedence. Only keys actually provided override."""
    merged: dict = {}
    for source in (file_config or {}, overrides or {}):
        unknown = set(source) - _CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key, value in source.items():
            if value is None:
                continue
            if key == "train":
                base = dict(merged.get("train", {}))
                base.update(value)
                merged["train"] = base
            else:
                merged[key] = value

    scale_spec = merged.pop("severity_scale", "numeric")
    scale = SeverityScale.numeric() if scale_spec == "numeric" else SeverityScale.named(scale_spec)
    fib_spec = merged.pop("fib_classes", None)
    fib = FibClassMap(tuple(int(v) for v in fib_spec)) if fib_spec else DEFAULT_FIB

    train_spec = dict(merged.pop("train", {}))
    seed = int(merged.get("seed", 0))
    train_spec.setdefault("seed", seed)
    train_config = TrainConfig.from_dict(train_spec)

    return PipelineConfig(
        severity_scale=scale, fib_classes=fib, train=train_config, **merged
    )


def dump_json(obj: dict) -> str:
    """Canonical report rendering: sorted keys, stable float repr."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(obj: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_json(obj))


def _records_by_id(records: Sequence[StoryRecord]) -> dict[str, StoryRecord]:
    return {r.story_id: r for r in records}


@dataclass
class TrainedArm:
    model: GbtModel
    train_report: TrainReport
    validation_ids: list[str]


def train_arm(
    records: Sequence[StoryRecord],
    embeddings: Sequence[EmbeddingRecord],
    split: DatasetSplit,
    include_severity: bool,
    cfg: PipelineConfig,
) -> TrainedArm:
    """Train one ablation arm on the split's training rows.

    Normalization is fit on the full training split. When early stopping is
    enabled, a stratified validation slice (validation_fraction of the
    training rows) is carved out and only the remainder grows trees, so the
    held-out test rows never influence stopping.
    """
    by_id = _records_by_id(records)
    train_records = [by_id[i] for i in split.train]

    full = fuse(train_records, embeddings, include_severity, cfg.severity_scale, cfg.fib_classes)
    stats = fit_normalizer(full)
    normalized = apply_normalizer(stats, full)

    valid_ids: list[str] = []
    if cfg.train.early_stopping_rounds > 0 and cfg.validation_fraction > 0:
        carve = stratified_split(train_records, cfg.validation_fraction, cfg.seed, cfg.fib_classes)
        if carve.test:
            valid_ids = carve.test

    position = {rec.story_id: i for i, rec in enumerate(train_records)}
    if valid_ids:
        valid_set = set(valid_ids)
        inner = normalized.take([position[i] for i in split.train if i not in valid_set])
        valid = normalized.take([position[i] for i in valid_ids])
    else:
        inner, valid = normalized, None

    model, report = train(
        inner, valid, cfg.train, fib_classes=cfg.fib_classes, normalization=stats
    )
    return TrainedArm(model=model, train_report=report, validation_ids=valid_ids)


def predict_records(
    model: GbtModel,
    records: Sequence[StoryRecord],
    embeddings: Sequence[EmbeddingRecord],
    scale: SeverityScale | None = None,
) -> list[dict]:
    """Story-point predictions in record order, using the model's stored
    normalization and class map."""
    matrix = fuse(records, embeddings, model.include_severity, scale, model.fib_classes)
    if model.normalization is not None:
        matrix = apply_normalizer(model.normalization, matrix)
    scores = model.predict_scores_matrix(matrix.rows)
    classes = scores.argmax(axis=1)
    return [
        {
            "story_id": rec.story_id,
            "predicted_sp": model.fib_classes.class_to_sp(int(cls)),
            "scores": [float(s) for s in row],
        }
        for rec, cls, row in zip(records, classes, scores)
    ]


def evaluate_model(
    model: GbtModel,
    records: Sequence[StoryRecord],
    embeddings: Sequence[EmbeddingRecord],
    scale: SeverityScale | None = None,
) -> EvalReport:
    """Evaluate the model against the records' actual story points."""
    matrix = fuse(records, embeddings, model.include_severity, scale, model.fib_classes)
    if model.normalization is not None:
        normalized = apply_normalizer(model.normalization, matrix)
    else:
        normalized = matrix
    preds = model.predict_class_matrix(normalized.rows)
    return evaluate(
        matrix.labels, preds, include_severity=model.include_severity, classes=model.fib_classes
    )


@dataclass
class AblationResult:
    split: DatasetSplit
    diff: AblationDiff
    train_reports: dict[str, TrainReport]
    models: dict[str, GbtModel]

    def to_dict(self, cfg: PipelineConfig) -> dict:
        return {
            "config": cfg.to_dict(),
            "split": {**self.split.to_dict(), "test_fraction": cfg.test_fraction},
            "arms_share_split": True,
            "train_reports": {name: rep.to_dict() for name, rep in self.train_reports.items()},
            "ablation": self.diff.to_dict(),
        }


def run_ablation(
    records: Sequence[StoryRecord],
    embeddings: Sequence[EmbeddingRecord],
    cfg: PipelineConfig,
) -> AblationResult:
    """Train and evaluate both severity arms over one shared split."""
    split = stratified_split(records, cfg.test_fraction, cfg.seed, cfg.fib_classes)
    by_id = _records_by_id(records)
    test_records = [by_id[i] for i in split.test]

    reports: dict[str, EvalReport] = {}
    train_reports: dict[str, TrainReport] = {}
    models: dict[str, GbtModel] = {}
    for name, flag in (("with_severity", True), ("without_severity", False)):
        arm = train_arm(records, embeddings, split, flag, cfg)
        models[name] = arm.model
        train_reports[name] = arm.train_report
        reports[name] = evaluate_model(arm.model, test_records, embeddings, cfg.severity_scale)

    diff = ablation_compare(reports["with_severity"], reports["without_severity"])
    return AblationResult(split=split, diff=diff, train_reports=train_reports, models=models)


def run_correlations(
    records: Sequence[StoryRecord],
    embeddings: Sequence[EmbeddingRecord],
    cfg: PipelineConfig,
) -> dict:
    """Mean-of-embedding correlation matrices, with and without severity."""
    out = {}
    for name, flag in (("without_severity", False), ("with_severity", True)):
        matrix = correlation_matrix(records, embeddings, flag, cfg.severity_scale, cfg.fib_classes)
        out[name] = matrix.to_dict()
    return out
