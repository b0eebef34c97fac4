"""Seeded synthetic corpus for demos and end-to-end tests.

Mimics the shape of a small bug-tracker corpus: 113 stories, Fibonacci
story points with most mass on classes 2 and 3 and only a handful of 8s,
severity ranks positively associated with story points, and embedding
vectors carrying a moderate class signal.
"""

from __future__ import annotations

import argparse
import json
import math
from pathlib import Path

import numpy as np

from .dataset import DEFAULT_FIB, FibClassMap, StoryRecord, write_records
from .fusion import EmbeddingRecord

# Test-set-like imbalance scaled to the corpus: heavy 2s/3s, rare 8s.
CLASS_WEIGHTS = (10, 41, 46, 10, 6)

_ACTIONS = (
    "connect to the database",
    "log in with short passwords",
    "render the dashboard",
    "upload attachments",
    "search across products",
    "export reports",
    "update dependencies",
    "migrate legacy settings",
)
_AREAS = (
    "the quicksearch box",
    "the admin panel",
    "email notifications",
    "the REST endpoint",
    "the login form",
    "the component picker",
)


def _class_counts(n: int, weights=CLASS_WEIGHTS) -> list[int]:
    total = sum(weights)
    quotas = [n * w / total for w in weights]
    counts = [math.floor(q) for q in quotas]
    leftover = n - sum(counts)
    order = sorted(range(len(weights)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:leftover]:
        counts[i] += 1
    return counts


def make_synthetic_corpus(
    n: int = 113,
    seed: int = 20240,
    text_dim: int = 16,
    image_dim: int = 16,
    classes: FibClassMap = DEFAULT_FIB,
) -> tuple[list[StoryRecord], list[EmbeddingRecord]]:
    rng = np.random.default_rng(seed)
    counts = _class_counts(n, CLASS_WEIGHTS[: classes.n_classes])

    labels: list[int] = []
    for cls_index, count in enumerate(counts):
        labels.extend([cls_index] * count)
    rng.shuffle(labels)

    severity_base = (1, 1, 2, 2, 3)
    records: list[StoryRecord] = []
    embeddings: list[EmbeddingRecord] = []
    for i, cls_index in enumerate(labels):
        story_id = str(600000 + 97 * i)
        action = _ACTIONS[int(rng.integers(len(_ACTIONS)))]
        area = _AREAS[int(rng.integers(len(_AREAS)))]
        text = f"Users cannot {action} from {area} (report {story_id})"

        # half the rows get their rank nudged: keeps the severity/story-point
        # correlation moderate (~0.55) instead of giving the ablation a
        # free deterministic feature
        severity = severity_base[cls_index]
        if rng.random() < 0.5:
            severity = int(np.clip(severity + rng.choice((-1, 1)), 1, 3))

        image_ref = f"images/{story_id}.png" if rng.random() < 0.8 else None
        records.append(
            StoryRecord(
                story_id=story_id,
                story_text=text,
                severity=severity,
                story_point=classes.class_to_sp(cls_index),
                image_ref=image_ref,
            )
        )

        text_center = np.zeros(text_dim)
        text_center[cls_index % text_dim] = 0.9
        text_center[(cls_index + 5) % text_dim] = -0.6
        image_center = np.zeros(image_dim)
        image_center[cls_index % image_dim] = 0.35
        embeddings.append(
            EmbeddingRecord(
                story_id=story_id,
                story_embedding=text_center + 0.7 * rng.standard_normal(text_dim),
                image_embedding=image_center + 0.9 * rng.standard_normal(image_dim),
            )
        )
    return records, embeddings


def write_embeddings(embeddings: list[EmbeddingRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for emb in embeddings:
            fh.write(
                json.dumps(
                    {
                        "story_id": emb.story_id,
                        "story_embedding": list(emb.story_embedding),
                        "image_embedding": list(emb.image_embedding),
                    }
                )
                + "\n"
            )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Regenerate the bundled synthetic corpus.")
    parser.add_argument("--out-dir", type=Path, default=Path("."))
    parser.add_argument("--n", type=int, default=113)
    parser.add_argument("--seed", type=int, default=20240)
    args = parser.parse_args(argv)

    records, embeddings = make_synthetic_corpus(n=args.n, seed=args.seed)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_records(records, args.out_dir / "synthetic_records.jsonl")
    write_embeddings(embeddings, args.out_dir / "synthetic_embeddings.jsonl")
    print(f"wrote {len(records)} records to {args.out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
