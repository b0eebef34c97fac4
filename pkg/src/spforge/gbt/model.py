"""Boosted multiclass ensemble: training loop, prediction, JSON persistence.

Each boosting round fits one regression tree per class on that class's
softmax gradients; per-class ensemble scores are eta times the sum of tree
outputs over the rounds up to best_round. Early stopping watches validation
log-loss and halts after a configured number of rounds without improvement.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from ..dataset import DEFAULT_FIB, FibClassMap
from ..fusion import FeatureMatrix, NormalizationStats
from .objective import grad_hess_matrix, log_loss, softmax
from .tree import TreeNode, grow_tree, tree_predict


@dataclass(frozen=True)
class TrainConfig:
    """Boosting hyperparameters (defaults follow the tuned desk-scale setup)."""

    n_estimators: int = 75
    max_depth: int = 4
    learning_rate: float = 0.1
    subsample: float = 1.0
    colsample_bytree: float = 1.0
    gamma: float = 1.0
    min_child_weight: float = 3.0
    reg_lambda: float = 1.0
    early_stopping_rounds: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample must be in (0, 1]")
        if not 0 < self.colsample_bytree <= 1:
            raise ValueError("colsample_bytree must be in (0, 1]")
        if self.gamma < 0 or self.reg_lambda < 0 or self.min_child_weight < 0:
            raise ValueError("gamma, reg_lambda, and min_child_weight must be >= 0")
        if self.early_stopping_rounds < 0:
            raise ValueError("early_stopping_rounds must be >= 0 (0 disables)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        known = {f: obj[f] for f in cls.__dataclass_fields__ if f in obj}
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown training parameters: {sorted(unknown)}")
        return cls(**known)


@dataclass
class TrainReport:
    train_loss: list[float]
    valid_loss: list[float]
    stopped_early: bool
    best_round: int

    @property
    def rounds_completed(self) -> int:
        return len(self.train_loss)

    def to_dict(self) -> dict:
        return {
            "train_loss": list(self.train_loss),
            "valid_loss": list(self.valid_loss),
            "stopped_early": self.stopped_early,
            "best_round": self.best_round,
            "rounds_completed": self.rounds_completed,
        }


@dataclass
class GbtModel:
    """Immutable trained ensemble; safe for concurrent prediction.

    trees[r][c] is the class-c tree from round r+1; prediction sums rounds
    1..best_round only.
    """

    n_classes: int
    n_features: int
    rounds: int
    trees: list[list[TreeNode]]
    learning_rate: float
    best_round: int
    config: TrainConfig
    column_names: list[str] = field(default_factory=list)
    normalization: Optional[NormalizationStats] = None
    fib_classes: FibClassMap = DEFAULT_FIB

    @property
    def include_severity(self) -> bool:
        return bool(self.column_names) and self.column_names[-1] == "severity"

    def _check_width(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ValueError(f"row has {X.shape[1]} features, model expects {self.n_features}")
        return X

    def predict_scores_matrix(self, X: np.ndarray) -> np.ndarray:
        X = self._check_width(X)
        scores = np.zeros((X.shape[0], self.n_classes))
        for round_trees in self.trees[: self.best_round]:
            for c, tree in enumerate(round_trees):
                scores[:, c] += tree_predict(tree, X)
        return self.learning_rate * scores

    def predict_scores(self, row: np.ndarray) -> np.ndarray:
        return self.predict_scores_matrix(row)[0]

    def predict_class_matrix(self, X: np.ndarray) -> np.ndarray:
        # argmax returns the first maximum: ties break to the lowest class index
        return np.argmax(self.predict_scores_matrix(X), axis=1)

    def predict_class(self, row: np.ndarray) -> int:
        return int(self.predict_class_matrix(row)[0])

    def predict_proba_matrix(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.predict_scores_matrix(X))


def predict_scores(model: GbtModel, row: np.ndarray) -> np.ndarray:
    return model.predict_scores(row)


def predict_class(model: GbtModel, row: np.ndarray) -> int:
    return model.predict_class(row)


def train(
    train_matrix: FeatureMatrix,
    valid_matrix: FeatureMatrix | None,
    config: TrainConfig,
    *,
    fib_classes: FibClassMap = DEFAULT_FIB,
    normalization: NormalizationStats | None = None,
) -> tuple[GbtModel, TrainReport]:
    """Boost up to n_estimators rounds with optional early stopping.

    Early stopping needs a validation matrix; it halts once validation
    log-loss has not improved for early_stopping_rounds consecutive rounds,
    and best_round marks the argmin round. Fully deterministic for a fixed
    config (subsampling draws come from a seeded generator).
    """
    X = train_matrix.rows
    y = train_matrix.labels
    if X.shape[0] == 0:
        raise ValueError("training set is empty")
    n_classes = fib_classes.n_classes
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError(f"labels must be in 0..{n_classes - 1}, got range {y.min()}..{y.max()}")

    early_stopping = config.early_stopping_rounds > 0 and valid_matrix is not None
    if config.early_stopping_rounds > 0 and valid_matrix is not None and valid_matrix.n_rows == 0:
        raise ValueError("validation set is empty")

    rng = np.random.default_rng(config.seed)
    n, d = X.shape
    scores = np.zeros((n, n_classes))
    valid_scores = np.zeros((valid_matrix.n_rows, n_classes)) if valid_matrix is not None else None

    trees: list[list[TreeNode]] = []
    train_loss: list[float] = []
    valid_loss: list[float] = []
    best_loss = np.inf
    best_round = 0
    rounds_since_best = 0
    stopped_early = False

    for round_index in range(1, config.n_estimators + 1):
        probs = softmax(scores)
        g, h = grad_hess_matrix(probs, y)

        round_trees: list[TreeNode] = []
        for c in range(n_classes):
            rows = np.arange(n)
            if config.subsample < 1.0:
                k = max(1, int(round(config.subsample * n)))
                rows = np.sort(rng.choice(n, size=k, replace=False))
            features = None
            if config.colsample_bytree < 1.0:
                k = max(1, int(round(config.colsample_bytree * d)))
                features = np.sort(rng.choice(d, size=k, replace=False))

            tree = grow_tree(
                X[rows],
                g[rows, c],
                h[rows, c],
                max_depth=config.max_depth,
                reg_lambda=config.reg_lambda,
                gamma=config.gamma,
                min_child_weight=config.min_child_weight,
                feature_indices=features,
            )
            round_trees.append(tree)
            scores[:, c] += config.learning_rate * tree_predict(tree, X)
            if valid_scores is not None:
                valid_scores[:, c] += config.learning_rate * tree_predict(tree, valid_matrix.rows)

        trees.append(round_trees)
        train_loss.append(log_loss(scores, y))

        if valid_scores is not None:
            vl = log_loss(valid_scores, valid_matrix.labels)
            valid_loss.append(vl)
        if early_stopping:
            if valid_loss[-1] < best_loss:
                best_loss = valid_loss[-1]
                best_round = round_index
                rounds_since_best = 0
            else:
                rounds_since_best += 1
                if rounds_since_best >= config.early_stopping_rounds:
                    stopped_early = True
                    break
        else:
            best_round = round_index

    model = GbtModel(
        n_classes=n_classes,
        n_features=d,
        rounds=len(trees),
        trees=trees,
        learning_rate=config.learning_rate,
        best_round=best_round,
        config=config,
        column_names=list(train_matrix.column_names),
        normalization=normalization,
        fib_classes=fib_classes,
    )
    report = TrainReport(
        train_loss=train_loss,
        valid_loss=valid_loss,
        stopped_early=stopped_early,
        best_round=best_round,
    )
    return model, report


def model_to_dict(model: GbtModel) -> dict:
    return {
        "format": "spforge-gbt",
        "version": 1,
        "config": model.config.to_dict(),
        "n_classes": model.n_classes,
        "n_features": model.n_features,
        "column_names": list(model.column_names),
        "fib_class_values": list(model.fib_classes.values),
        "normalization": model.normalization.to_dict() if model.normalization else None,
        "learning_rate": model.learning_rate,
        "rounds": model.rounds,
        "best_round": model.best_round,
        "trees": [[tree.to_dict() for tree in round_trees] for round_trees in model.trees],
    }


def model_from_dict(obj: dict) -> GbtModel:
    if obj.get("format") != "spforge-gbt":
        raise ValueError("not a spforge model file")
    normalization = obj.get("normalization")
    return GbtModel(
        n_classes=int(obj["n_classes"]),
        n_features=int(obj["n_features"]),
        rounds=int(obj["rounds"]),
        trees=[[TreeNode.from_dict(t) for t in round_trees] for round_trees in obj["trees"]],
        learning_rate=float(obj["learning_rate"]),
        best_round=int(obj["best_round"]),
        config=TrainConfig.from_dict(obj["config"]),
        column_names=list(obj["column_names"]),
        normalization=NormalizationStats.from_dict(normalization) if normalization else None,
        fib_classes=FibClassMap(tuple(int(v) for v in obj["fib_class_values"])),
    )


def save_model(model: GbtModel, path) -> None:
    # json round-trips floats exactly (repr is shortest-exact), so a
    # load/save cycle preserves every threshold and leaf weight bit for bit
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> GbtModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
