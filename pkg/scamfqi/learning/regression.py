# scamfqi/learning/regression.py - Extra-Trees and exact tabular regressors
import logging
from typing import Protocol

import numpy as np
from sklearn.ensemble import ExtraTreesRegressor

from scamfqi.core.errors import ArgumentError
from scamfqi.schemas.training import ExtraTreesParams

logger = logging.getLogger(__name__)


class Regressor(Protocol):
    def fit(self, X: np.ndarray, y: np.ndarray) -> "Regressor": ...

    def predict(self, X: np.ndarray) -> np.ndarray: ...

    def clone_unfitted(self) -> "Regressor": ...

    def to_dump(self) -> dict: ...


def _check_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or len(X) == 0:
        raise ArgumentError("regression needs a non-empty 2-d feature matrix")
    if len(X) != len(y):
        raise ArgumentError(f"{len(X)} feature rows but {len(y)} targets")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise ArgumentError("features and targets must be finite")
    return X, y


def _tree_dump(tree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.children_left.tolist(),
        "right": tree.children_right.tolist(),
        "value": tree.value[:, 0, 0].tolist(),
    }


class ExtraTreesModel:
    """Wrapper class of scikit-learn's Extra-Trees.

    Trees see the full sample (no bootstrap) and every feature is a split
    candidate with one uniformly drawn cut point; the best candidate by
    variance reduction wins.
    """

    def __init__(self, params: ExtraTreesParams | None = None):
        self.params = params or ExtraTreesParams()
        self.model: ExtraTreesRegressor | None = None

    def _initialize(self) -> ExtraTreesRegressor:
        p = self.params
        return ExtraTreesRegressor(
            n_estimators=p.n_trees,
            max_features=1.0,
            min_samples_split=p.min_samples_split,
            max_depth=p.max_depth,
            bootstrap=False,
            random_state=p.seed,
            n_jobs=p.n_jobs,
        )

    def fit(self, X, y) -> "ExtraTreesModel":
        X, y = _check_xy(X, y)
        self.model = self._initialize()
        self.model.fit(X, y)
        return self

    def _fitted(self) -> ExtraTreesRegressor:
        if self.model is None:
            raise ArgumentError("model is not fitted")
        return self.model

    def predict(self, X) -> np.ndarray:
        return self._fitted().predict(np.atleast_2d(np.asarray(X, dtype=float))).ravel()

    def tree_predictions(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.stack([est.predict(X) for est in self._fitted().estimators_])

    def clone_unfitted(self) -> "ExtraTreesModel":
        return ExtraTreesModel(self.params)

    def to_dump(self) -> dict:
        return {
            "kind": "extra_trees",
            "params": self.params.model_dump(),
            "trees": [_tree_dump(est.tree_) for est in self._fitted().estimators_],
        }


class TabularMeanRegressor:
    """Exact empirical conditional mean per distinct feature row."""

    def __init__(self, default: float = 0.0):
        self.default = float(default)
        self.table: dict[tuple, float] | None = None

    def fit(self, X, y) -> "TabularMeanRegressor":
        X, y = _check_xy(X, y)
        keys, inverse = np.unique(X, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        sums = np.bincount(inverse, weights=y, minlength=len(keys))
        counts = np.bincount(inverse, minlength=len(keys))
        means = sums / counts
        self.table = {tuple(row): float(m) for row, m in zip(keys.tolist(), means)}
        return self

    def predict(self, X) -> np.ndarray:
        if self.table is None:
            raise ArgumentError("model is not fitted")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.table.get(tuple(row), self.default) for row in X.tolist()])

    def clone_unfitted(self) -> "TabularMeanRegressor":
        return TabularMeanRegressor(self.default)

    def to_dump(self) -> dict:
        if self.table is None:
            raise ArgumentError("model is not fitted")
        return {
            "kind": "tabular",
            "default": self.default,
            "keys": [list(k) for k in self.table],
            "values": list(self.table.values()),
        }

    @classmethod
    def from_dump(cls, dump: dict) -> "TabularMeanRegressor":
        model = cls(dump.get("default", 0.0))
        model.table = {tuple(float(x) for x in k): float(v) for k, v in zip(dump["keys"], dump["values"])}
        return model


class DumpedForest:
    """Predicts from a JSON tree dump without refitting."""

    def __init__(self, dump: dict):
        self.dump = dump
        self.trees = [
            {key: np.asarray(tree[key]) for key in ("feature", "threshold", "left", "right", "value")}
            for tree in dump["trees"]
        ]
        if not self.trees:
            raise ArgumentError("tree dump holds no trees")

    @staticmethod
    def _predict_tree(tree: dict, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=int)
        rows = np.arange(len(X))
        while True:
            inner = tree["left"][node] >= 0
            if not inner.any():
                return tree["value"][node]
            feat = tree["feature"][node[inner]]
            go_left = X[rows[inner], feat] <= tree["threshold"][node[inner]]
            node[inner] = np.where(go_left, tree["left"][node[inner]], tree["right"][node[inner]])

    def predict(self, X) -> np.ndarray:
        # trees compare float32 features against float64 thresholds
        X = np.atleast_2d(np.asarray(X, dtype=np.float32)).astype(float)
        return np.mean([self._predict_tree(tree, X) for tree in self.trees], axis=0)

    def clone_unfitted(self) -> ExtraTreesModel:
        return ExtraTreesModel(ExtraTreesParams(**self.dump.get("params", {})))

    def fit(self, X, y) -> ExtraTreesModel:
        return self.clone_unfitted().fit(X, y)

    def to_dump(self) -> dict:
        return self.dump


def make_regressor(kind: str, params: ExtraTreesParams | None = None) -> Regressor:
    if kind == "extra_trees":
        return ExtraTreesModel(params)
    if kind == "tabular":
        return TabularMeanRegressor()
    raise ArgumentError(f"unknown regressor kind {kind!r}")


def load_model(dump: dict) -> Regressor:
    kind = dump.get("kind")
    if kind == "extra_trees":
        return DumpedForest(dump)
    if kind == "tabular":
        return TabularMeanRegressor.from_dump(dump)
    raise ArgumentError(f"unknown model dump kind {kind!r}")
