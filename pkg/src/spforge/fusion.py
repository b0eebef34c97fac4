"""Embedding fusion, normalization, and correlation analysis.

Joins story records with their text/image embedding vectors into a single
numeric feature matrix (text columns, then image columns, then optionally
the severity rank), z-scores the embedding columns against training
statistics, and computes the mean-of-embedding correlation matrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dataset import DEFAULT_FIB, FibClassMap, SeverityScale, StoryRecord, encode_severity

SEVERITY_COLUMN = "severity"

# Columns with std below this are treated as constant and normalize to 0.
DEGENERATE_STD = 1e-12


class ConstantInputError(ValueError):
    """Pearson correlation is undefined for a zero-variance input."""


@dataclass
class EmbeddingRecord:
    story_id: str
    story_embedding: np.ndarray
    image_embedding: np.ndarray


@dataclass
class FeatureMatrix:
    """Fused numeric rows with aligned class labels.

    rows[i] = concat(story_embedding, image_embedding, [severity rank]) for
    record i; labels[i] is the story-point class index.
    """

    rows: np.ndarray
    labels: np.ndarray
    column_names: list[str]
    include_severity: bool

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    def take(self, positions: Sequence[int]) -> "FeatureMatrix":
        """Row subset in the given order (labels stay aligned)."""
        idx = np.asarray(positions, dtype=int)
        return FeatureMatrix(
            rows=self.rows[idx],
            labels=self.labels[idx],
            column_names=list(self.column_names),
            include_severity=self.include_severity,
        )


@dataclass
class NormalizationStats:
    """Per-column mean/std fit on training rows (population std, ddof=0).

    The severity column, when present, is deliberately left at (0, 1): the
    ordinal rank enters the model unscaled.
    """

    mean: np.ndarray
    std: np.ndarray

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "NormalizationStats":
        return cls(mean=np.asarray(obj["mean"], dtype=float), std=np.asarray(obj["std"], dtype=float))


@dataclass
class CorrelationMatrix:
    variables: list[str]
    matrix: np.ndarray

    def to_dict(self) -> dict:
        return {"variables": list(self.variables), "matrix": self.matrix.tolist()}


def _as_vector(values, story_id: str, key: str, line_number: int | None = None) -> np.ndarray:
    where = f"line {line_number}" if line_number is not None else f"story {story_id!r}"
    if not isinstance(values, (list, tuple)):
        raise ValueError(f"{where}: {key} must be an array of numbers")
    vec = np.asarray(values, dtype=float)
    if vec.ndim != 1 or vec.size == 0:
        raise ValueError(f"{where}: {key} must be a nonempty 1-D array")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"{where}: {key} contains non-finite entries")
    return vec


def parse_embeddings(stream: Iterable[str]) -> tuple[list[EmbeddingRecord], dict | None]:
    """Parse a line-delimited embeddings file.

    Each line is {"story_id": ..., "story_embedding": [...], "image_embedding": [...]}.
    A leading header object ({"header": {...}}) is allowed and returned as
    metadata. Dimensions must be constant across the file.
    """
    records: list[EmbeddingRecord] = []
    header: dict | None = None
    seen: set[str] = set()
    text_dim = image_dim = None
    for line_number, line in enumerate(stream, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            raw = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {line_number}: invalid JSON: {exc.msg}") from exc
        if isinstance(raw, dict) and "header" in raw and "story_id" not in raw:
            if records or header is not None:
                raise ValueError(f"line {line_number}: header must be the first line")
            header = raw["header"]
            continue
        if not isinstance(raw, dict) or "story_id" not in raw:
            raise ValueError(f"line {line_number}: expected an object with story_id")
        story_id = str(raw["story_id"])
        if story_id in seen:
            raise ValueError(f"line {line_number}: duplicate story_id {story_id!r}")
        seen.add(story_id)
        story_vec = _as_vector(raw.get("story_embedding"), story_id, "story_embedding", line_number)
        image_vec = _as_vector(raw.get("image_embedding"), story_id, "image_embedding", line_number)
        if text_dim is None:
            text_dim, image_dim = story_vec.size, image_vec.size
        elif story_vec.size != text_dim or image_vec.size != image_dim:
            raise ValueError(
                f"line {line_number}: dimension mismatch for story {story_id!r}: "
                f"got ({story_vec.size}, {image_vec.size}), expected ({text_dim}, {image_dim})"
            )
        records.append(EmbeddingRecord(story_id, story_vec, image_vec))
    return records, header


def load_embeddings(path) -> tuple[list[EmbeddingRecord], dict | None]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_embeddings(fh)


def mean_pool(v: Sequence[float] | np.ndarray) -> float:
    """Arithmetic mean of a nonempty finite vector."""
    vec = np.asarray(v, dtype=float)
    if vec.size == 0:
        raise ValueError("cannot mean-pool an empty vector")
    if not np.all(np.isfinite(vec)):
        raise ValueError("cannot mean-pool non-finite entries")
    return float(vec.mean())


def fuse(
    records: Sequence[StoryRecord],
    embeddings: Sequence[EmbeddingRecord],
    include_severity: bool,
    scale: SeverityScale | None = None,
    classes: FibClassMap = DEFAULT_FIB,
) -> FeatureMatrix:
    """Join records with embeddings into a feature matrix, rows in record order."""
    scale = scale if scale is not None else SeverityScale.numeric()
    by_id = {e.story_id: e for e in embeddings}
    missing = [r.story_id for r in records if r.story_id not in by_id]
    if missing:
        raise ValueError(f"records without embeddings: {missing}")
    if not records:
        raise ValueError("cannot fuse an empty corpus")

    first = by_id[records[0].story_id]
    d_t, d_i = first.story_embedding.size, first.image_embedding.size
    rows = np.empty((len(records), d_t + d_i + (1 if include_severity else 0)), dtype=float)
    labels = np.empty(len(records), dtype=int)
    for i, rec in enumerate(records):
        emb = by_id[rec.story_id]
        if emb.story_embedding.size != d_t or emb.image_embedding.size != d_i:
            raise ValueError(
                f"dimension mismatch for story {rec.story_id!r}: "
                f"got ({emb.story_embedding.size}, {emb.image_embedding.size}), expected ({d_t}, {d_i})"
            )
        rows[i, :d_t] = emb.story_embedding
        rows[i, d_t : d_t + d_i] = emb.image_embedding
        if include_severity:
            rows[i, -1] = encode_severity(rec.severity, scale)
        labels[i] = classes.sp_to_class(rec.story_point)

    column_names = [f"text_{j}" for j in range(d_t)] + [f"image_{j}" for j in range(d_i)]
    if include_severity:
        column_names.append(SEVERITY_COLUMN)
    return FeatureMatrix(rows=rows, labels=labels, column_names=column_names, include_severity=include_severity)


def fit_normalizer(train: FeatureMatrix) -> NormalizationStats:
    """Per-column mean/std from training rows; the severity column stays raw."""
    mean = train.rows.mean(axis=0)
    std = train.rows.std(axis=0)
    if train.include_severity:
        mean[-1] = 0.0
        std[-1] = 1.0
    return NormalizationStats(mean=mean, std=std)


def apply_normalizer(stats: NormalizationStats, matrix: FeatureMatrix) -> FeatureMatrix:
    """Z-score columns against fitted stats; degenerate columns map to 0."""
    if stats.mean.size != matrix.n_features:
        raise ValueError(
            f"normalizer has {stats.mean.size} columns but matrix has {matrix.n_features}"
        )
    safe = np.where(stats.std < DEGENERATE_STD, 1.0, stats.std)
    rows = (matrix.rows - stats.mean) / safe
    rows[:, stats.std < DEGENERATE_STD] = 0.0
    return FeatureMatrix(
        rows=rows,
        labels=matrix.labels.copy(),
        column_names=list(matrix.column_names),
        include_severity=matrix.include_severity,
    )


def pearson(x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray) -> float:
    """Pearson product-moment correlation of two equal-length vectors."""
    xv = np.asarray(x, dtype=float)
    yv = np.asarray(y, dtype=float)
    if xv.size != yv.size:
        raise ValueError(f"length mismatch: {xv.size} vs {yv.size}")
    if xv.size < 2:
        raise ValueError("need at least two observations")
    dx = xv - xv.mean()
    dy = yv - yv.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ConstantInputError("correlation undefined for a constant input")
    # single sqrt of the product: exact +/-1 on perfectly collinear input
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def correlation_matrix(
    records: Sequence[StoryRecord],
    embeddings: Sequence[EmbeddingRecord],
    include_severity: bool,
    scale: SeverityScale | None = None,
    classes: FibClassMap = DEFAULT_FIB,
) -> CorrelationMatrix:
    """Pairwise Pearson matrix over mean-pooled embeddings, target rank, and
    optionally the severity rank."""
    scale = scale if scale is not None else SeverityScale.numeric()
    by_id = {e.story_id: e for e in embeddings}
    missing = [r.story_id for r in records if r.story_id not in by_id]
    if missing:
        raise ValueError(f"records without embeddings: {missing}")

    columns: list[tuple[str, np.ndarray]] = [
        ("Story_Embedding_Mean", np.array([mean_pool(by_id[r.story_id].story_embedding) for r in records])),
        ("Image_Feature_Embedding_Mean", np.array([mean_pool(by_id[r.story_id].image_embedding) for r in records])),
    ]
    if include_severity:
        columns.append(
            ("Severity_Encoded", np.array([float(encode_severity(r.severity, scale)) for r in records]))
        )
    columns.append(
        ("StoryPoint_Encoded", np.array([float(classes.sp_to_class(r.story_point)) for r in records]))
    )

    names = [name for name, _ in columns]
    k = len(columns)
    matrix = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            r = pearson(columns[i][1], columns[j][1])
            matrix[i, j] = matrix[j, i] = r
    return CorrelationMatrix(variables=names, matrix=matrix)
