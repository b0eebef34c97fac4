"""Story corpus parsing, encoding, and splitting.

A corpus is a UTF-8 file with one JSON object per line:

    {"story_id": "620552", "story_text": "...", "severity": 2,
     "story_point": 2, "image_ref": "images/620552.png"}

`image_ref` is optional, unknown keys are ignored. Story points are
restricted to a Fibonacci class set (default 1, 2, 3, 5, 8).
"""

from __future__ import annotations

import json
import math
import random
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

DEFAULT_FIB_VALUES = (1, 2, 3, 5, 8)

SeverityLabel = Union[str, int]


class ParseError(ValueError):
    """Raised for a malformed or invalid corpus line; carries the line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class FibClassMap:
    """Ordered story-point values; class index is the 0-based position."""

    values: tuple[int, ...] = DEFAULT_FIB_VALUES

    def __post_init__(self):
        if not self.values:
            raise ValueError("class set must be nonempty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError(f"class values must be strictly increasing: {self.values}")

    @property
    def n_classes(self) -> int:
        return len(self.values)

    def sp_to_class(self, sp: int) -> int:
        try:
            return self.values.index(sp)
        except ValueError:
            raise ValueError(
                f"story point {sp!r} is not a Fibonacci class (expected one of {list(self.values)})"
            ) from None

    def class_to_sp(self, index: int) -> int:
        if not 0 <= index < len(self.values):
            raise ValueError(f"class index {index} out of range 0..{len(self.values) - 1}")
        return self.values[index]


DEFAULT_FIB = FibClassMap()


def sp_to_class(sp: int, classes: FibClassMap = DEFAULT_FIB) -> int:
    return classes.sp_to_class(sp)


def class_to_sp(index: int, classes: FibClassMap = DEFAULT_FIB) -> int:
    return classes.class_to_sp(index)


@dataclass(frozen=True)
class SeverityScale:
    """Ordered severity categories, lowest first; rank of a label is its 1-based position.

    ``labels=None`` is the numeric pass-through scale: integer labels are
    already ranks and are returned unchanged.
    """

    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.labels is not None:
            if not self.labels:
                raise ValueError("severity scale must be nonempty")
            if len(set(self.labels)) != len(self.labels):
                raise ValueError(f"severity labels must be unique: {self.labels}")

    @classmethod
    def numeric(cls) -> "SeverityScale":
        return cls(labels=None)

    @classmethod
    def named(cls, labels: Sequence[str]) -> "SeverityScale":
        return cls(labels=tuple(labels))

    @property
    def is_numeric(self) -> bool:
        return self.labels is None

    def rank(self, label: SeverityLabel) -> int:
        if self.labels is None:
            if isinstance(label, bool) or not isinstance(label, int):
                raise ValueError(
                    f"severity {label!r} is not an integer; the numeric scale passes "
                    "integer ranks through (configure a named scale for text labels)"
                )
            return label
        if label not in self.labels:
            raise ValueError(f"severity {label!r} not in scale {list(self.labels)}")
        return self.labels.index(label) + 1


def encode_severity(label: SeverityLabel, scale: SeverityScale) -> int:
    """Ordinal rank of a severity label under the given scale."""
    return scale.rank(label)


@dataclass(frozen=True)
class StoryRecord:
    story_id: str
    story_text: str
    severity: SeverityLabel
    story_point: int
    image_ref: str | None = None


@dataclass
class DatasetSplit:
    """Train/test membership by story id, with the seed and strategy that produced it."""

    train: list[str]
    test: list[str]
    seed: int
    strategy: str = "stratified"

    def to_dict(self) -> dict:
        return {
            "train": list(self.train),
            "test": list(self.test),
            "seed": self.seed,
            "strategy": self.strategy,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DatasetSplit":
        return cls(
            train=list(obj["train"]),
            test=list(obj["test"]),
            seed=int(obj["seed"]),
            strategy=obj.get("strategy", "stratified"),
        )


def _parse_line(raw: dict, line_number: int, classes: FibClassMap) -> StoryRecord:
    if not isinstance(raw, dict):
        raise ParseError(line_number, f"expected a JSON object, got {type(raw).__name__}")
    for key in ("story_id", "story_text", "severity", "story_point"):
        if key not in raw:
            raise ParseError(line_number, f"missing required key {key!r}")

    story_id = raw["story_id"]
    if not isinstance(story_id, str) or not story_id:
        raise ParseError(line_number, f"story_id must be a nonempty string, got {story_id!r}")

    story_text = raw["story_text"]
    if not isinstance(story_text, str) or not story_text.strip():
        raise ParseError(line_number, f"story_text must be a nonempty string (story {story_id})")

    severity = raw["severity"]
    if isinstance(severity, bool) or not isinstance(severity, (str, int)):
        raise ParseError(
            line_number, f"severity must be an integer or string, got {severity!r} (story {story_id})"
        )

    story_point = raw["story_point"]
    if isinstance(story_point, bool) or not isinstance(story_point, int):
        raise ParseError(line_number, f"story_point must be an integer, got {story_point!r}")
    if story_point not in classes.values:
        raise ParseError(
            line_number,
            f"story_point {story_point} is not a Fibonacci class "
            f"(expected one of {list(classes.values)}; story {story_id})",
        )

    image_ref = raw.get("image_ref")
    if image_ref is not None and not isinstance(image_ref, str):
        raise ParseError(line_number, f"image_ref must be a string, got {image_ref!r}")

    return StoryRecord(
        story_id=story_id,
        story_text=story_text,
        severity=severity,
        story_point=story_point,
        image_ref=image_ref,
    )


def parse_records(stream: Iterable[str], classes: FibClassMap = DEFAULT_FIB) -> list[StoryRecord]:
    """Parse line-delimited story records, preserving order.

    Blank lines are skipped. Raises ParseError with the 1-based line number
    for malformed lines, duplicate ids, and out-of-set story points.
    """
    records: list[StoryRecord] = []
    seen: set[str] = set()
    for line_number, line in enumerate(stream, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            raw = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ParseError(line_number, f"invalid JSON: {exc.msg}") from exc
        record = _parse_line(raw, line_number, classes)
        if record.story_id in seen:
            raise ParseError(line_number, f"duplicate story_id {record.story_id!r}")
        seen.add(record.story_id)
        records.append(record)
    return records


def load_records(path, classes: FibClassMap = DEFAULT_FIB) -> list[StoryRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_records(fh, classes=classes)


def write_records(records: Iterable[StoryRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            obj = {
                "story_id": rec.story_id,
                "story_text": rec.story_text,
                "severity": rec.severity,
                "story_point": rec.story_point,
            }
            if rec.image_ref is not None:
                obj["image_ref"] = rec.image_ref
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def stratified_split(
    records: Sequence[StoryRecord],
    test_fraction: float,
    seed: int,
    classes: FibClassMap = DEFAULT_FIB,
) -> DatasetSplit:
    """Seeded, class-stratified train/test split.

    |test| = floor(test_fraction * N) overall; per-class test counts are the
    largest-remainder apportionment of the proportional quotas, so each stays
    within one record of proportional. Identical inputs and seed give an
    identical split. Classes left empty on either side produce a warning,
    not an error: with a tiny corpus the requested proportions may simply
    not be attainable.
    """
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    if not records:
        raise ValueError("cannot split an empty corpus")

    n_test = math.floor(test_fraction * len(records))
    by_class: dict[int, list[int]] = {}
    for pos, rec in enumerate(records):
        by_class.setdefault(classes.sp_to_class(rec.story_point), []).append(pos)

    # Largest-remainder apportionment of n_test across the classes present.
    quotas = {c: test_fraction * len(idx) for c, idx in by_class.items()}
    counts = {c: math.floor(q) for c, q in quotas.items()}
    leftover = n_test - sum(counts.values())
    for c in sorted(by_class, key=lambda c: (-(quotas[c] - counts[c]), c)):
        if leftover <= 0:
            break
        if counts[c] < len(by_class[c]):
            counts[c] += 1
            leftover -= 1

    rng = random.Random(seed)
    test_positions: set[int] = set()
    for c in sorted(by_class):
        positions = list(by_class[c])
        rng.shuffle(positions)
        test_positions.update(positions[: counts[c]])

    starved = [
        classes.class_to_sp(c)
        for c in sorted(by_class)
        if counts[c] == 0 or counts[c] == len(by_class[c])
    ]
    if starved:
        warnings.warn(
            f"classes {starved} have zero train or zero test records; "
            f"requested proportions cannot be met on this corpus",
            stacklevel=2,
        )

    train_ids = [records[i].story_id for i in range(len(records)) if i not in test_positions]
    test_ids = [records[i].story_id for i in range(len(records)) if i in test_positions]
    return DatasetSplit(train=train_ids, test=test_ids, seed=seed)
