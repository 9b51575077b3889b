"""Tree-ensemble selector between the two objectives, built from scratch.

Rows are anything with .id, .features (length-5 array), .label (Objective)
and .weight (the relative score gap); the dataset module's DatasetRow fits.
Class 0 is the modularity objective, class 1 the closure objective.

Training oversamples the minority class to exact parity by duplication,
then grows trees on Gini impurity weighted by the network weights. The
extra-trees learner draws one uniform-random threshold per candidate
feature on the full sample; the random-forest learner searches the best
midpoint threshold on a bootstrap sample. Both pick sqrt(5) = 2 candidate
features per split. Everything is deterministic per seed.
"""

from __future__ import annotations

import enum
import hashlib
import math
import random
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .graph import FEATURE_NAMES, FeatureVector
from .objectives import Objective

N_FEATURES = 5
_SPLIT_CANDIDATES = 2  # floor(sqrt(N_FEATURES))

# hyperparameter values considered during model selection; train() rejects
# anything outside these
GRID_VALUES = {
    "n_estimators": (100, 200, 250, 300, 350, 400),
    "max_depth": (3, 4, 5, 8, 10, 15, 20, 25, 30, 35, 40),
    "min_samples_split": (2, 3, 4, 5, 10),
    "min_samples_leaf": (2, 3, 5, 10),
}


class LearnerKind(str, enum.Enum):
    EXTRA_TREES = "extra_trees"
    RANDOM_FOREST = "random_forest"


@dataclass(frozen=True, order=True)
class Hyperparams:
    n_estimators: int = 100
    max_depth: int = 5
    min_samples_split: int = 2
    min_samples_leaf: int = 2

    def validate(self) -> None:
        for name, allowed in GRID_VALUES.items():
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name}={getattr(self, name)} outside the tested grid {allowed}")


@dataclass
class TreeNode:
    node_id: int
    feature: int = -1  # -1 marks a leaf
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    p_qe: float = 0.0
    p_wocc: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class ModelEnsemble:
    metric: str
    learner_kind: LearnerKind
    hyperparams: Hyperparams
    trees: list[list[TreeNode]]
    train_fingerprint: str

    @property
    def n_estimators(self) -> int:
        return self.hyperparams.n_estimators


@dataclass
class EvalReport:
    balanced_accuracy: float
    recall_qe: float | None
    recall_wocc: float | None
    weighted: bool
    fold_scores: list[float] | None = None
    fold_std: float | None = None


@dataclass
class CVResult:
    best: Hyperparams
    fold_reports: list[EvalReport]
    mean_ba: float
    std_ba: float


class ModelFileError(ValueError):
    pass


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def _as_arrays(rows) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.array([np.asarray(r.features, dtype=np.float64) for r in rows])
    y = np.array([1 if r.label is Objective.WOCC else 0 for r in rows], dtype=np.int64)
    w = np.array([float(r.weight) for r in rows], dtype=np.float64)
    return x, y, w


def oversample_indices(y: np.ndarray, rng: random.Random) -> np.ndarray:
    """Indices with the minority class duplicated to exact parity."""
    idx0 = np.flatnonzero(y == 0)
    idx1 = np.flatnonzero(y == 1)
    if len(idx0) == len(idx1):
        return np.arange(len(y))
    minority, majority = (idx0, idx1) if len(idx0) < len(idx1) else (idx1, idx0)
    deficit = len(majority) - len(minority)
    copies, remainder = divmod(deficit, len(minority))
    extra = list(np.tile(minority, copies))
    if remainder:
        extra.extend(rng.sample(sorted(int(i) for i in minority), remainder))
    return np.concatenate([np.arange(len(y)), np.array(extra, dtype=np.int64)])


def _gini(w0: float, w1: float) -> float:
    tot = w0 + w1
    if tot <= 0.0:
        return 0.0
    p0 = w0 / tot
    p1 = w1 / tot
    return 1.0 - p0 * p0 - p1 * p1


def _split_score(y, w, mask) -> float:
    """Weighted Gini decrease of a boolean left/right split."""
    wl0 = float(w[mask & (y == 0)].sum())
    wl1 = float(w[mask & (y == 1)].sum())
    wr0 = float(w[~mask & (y == 0)].sum())
    wr1 = float(w[~mask & (y == 1)].sum())
    tot = wl0 + wl1 + wr0 + wr1
    if tot <= 0.0:
        return 0.0
    parent = _gini(wl0 + wr0, wl1 + wr1)
    left = (wl0 + wl1) / tot * _gini(wl0, wl1)
    right = (wr0 + wr1) / tot * _gini(wr0, wr1)
    return parent - left - right


def _best_threshold(values: np.ndarray, y, w) -> tuple[float, float] | None:
    """Best midpoint threshold for one feature (exhaustive search)."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    uniq = np.unique(v)
    if len(uniq) < 2:
        return None
    best = None
    for lo, hi in zip(uniq[:-1], uniq[1:]):
        thr = (float(lo) + float(hi)) / 2.0
        score = _split_score(y, w, values <= thr)
        if best is None or score > best[1]:
            best = (thr, score)
    return best


def _grow_tree(x, y, w, hp: Hyperparams, learner: LearnerKind, rng: random.Random) -> list[TreeNode]:
    nodes: list[TreeNode] = []

    def leaf(idx) -> int:
        nid = len(nodes)
        w0 = float(w[idx][y[idx] == 0].sum())
        w1 = float(w[idx][y[idx] == 1].sum())
        if w0 + w1 <= 0.0:  # weight mass can vanish in a branch; fall back to counts
            w0 = float((y[idx] == 0).sum())
            w1 = float((y[idx] == 1).sum())
        tot = w0 + w1
        nodes.append(TreeNode(node_id=nid, p_qe=w0 / tot, p_wocc=w1 / tot))
        return nid

    def build(idx: np.ndarray, depth: int) -> int:
        ys = y[idx]
        if (
            depth >= hp.max_depth
            or len(idx) < hp.min_samples_split
            or ys.min() == ys.max()
        ):
            return leaf(idx)
        feats = rng.sample(range(N_FEATURES), _SPLIT_CANDIDATES)
        best = None  # (score, feature, threshold)
        for f in feats:
            vals = x[idx, f]
            lo, hi = float(vals.min()), float(vals.max())
            if lo == hi:
                continue
            if learner is LearnerKind.EXTRA_TREES:
                thr = rng.uniform(lo, hi)
                if thr >= hi:  # degenerate float draw would empty one side
                    continue
                cand = (thr, _split_score(ys, w[idx], vals <= thr))
            else:
                cand = _best_threshold(vals, ys, w[idx])
                if cand is None:
                    continue
            thr, score = cand
            n_left = int((vals <= thr).sum())
            if n_left < hp.min_samples_leaf or len(idx) - n_left < hp.min_samples_leaf:
                continue
            if best is None or score > best[0]:
                best = (score, f, thr)
        if best is None:
            return leaf(idx)
        _, f, thr = best
        nid = len(nodes)
        nodes.append(TreeNode(node_id=nid, feature=f, threshold=thr))
        mask = x[idx, f] <= thr
        nodes[nid].left = build(idx[mask], depth + 1)
        nodes[nid].right = build(idx[~mask], depth + 1)
        return nid

    root = build(np.arange(len(y)), 0)
    assert root == 0
    return nodes


def _fingerprint(rows) -> str:
    h = hashlib.sha256()
    for r in rows:
        feats = ",".join(repr(float(v)) for v in np.asarray(r.features))
        h.update(f"{r.id}|{feats}|{r.label.value}|{float(r.weight)!r}\n".encode("utf-8"))
    return h.hexdigest()


def train(
    rows: Sequence,
    hyperparams: Hyperparams,
    seed: int,
    learner: LearnerKind = LearnerKind.EXTRA_TREES,
    metric: str = "average",
    weighted: bool = True,
) -> ModelEnsemble:
    """Fit an ensemble on labeled rows; see module docstring for semantics."""
    if not rows:
        raise ValueError("cannot train on an empty dataset")
    hyperparams.validate()
    x, y, w = _as_arrays(rows)
    if y.min() == y.max():
        raise ValueError("training rows contain a single class")
    if not weighted or float(w.sum()) == 0.0:
        if weighted:
            warnings.warn("all sample weights are zero; training with uniform weights")
        w = np.ones_like(w)

    rng = random.Random(seed)
    idx = oversample_indices(y, rng)
    x, y, w = x[idx], y[idx], w[idx]

    trees = []
    for t in range(hyperparams.n_estimators):
        tree_rng = random.Random(_tree_seed(seed, t))
        if learner is LearnerKind.RANDOM_FOREST:
            boot = np.array([tree_rng.randrange(len(y)) for _ in range(len(y))], dtype=np.int64)
            trees.append(_grow_tree(x[boot], y[boot], w[boot], hyperparams, learner, tree_rng))
        else:
            trees.append(_grow_tree(x, y, w, hyperparams, learner, tree_rng))
    return ModelEnsemble(
        metric=metric,
        learner_kind=learner,
        hyperparams=hyperparams,
        trees=trees,
        train_fingerprint=_fingerprint(rows),
    )


def _tree_seed(seed: int, t: int) -> int:
    digest = hashlib.sha256(f"tree:{seed}:{t}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------

def _features_array(features) -> np.ndarray:
    if isinstance(features, FeatureVector):
        return features.as_array()
    arr = np.asarray(features, dtype=np.float64)
    if arr.shape != (N_FEATURES,):
        raise ValueError(f"expected {N_FEATURES} features, got shape {arr.shape}")
    return arr


def predict(model: ModelEnsemble, features) -> tuple[Objective, float]:
    """Mean leaf probability across trees; closure objective iff P > 0.5.

    The returned probability is P(closure objective), not the probability of
    the returned class.
    """
    arr = _features_array(features)
    total = 0.0
    for tree in model.trees:
        node = tree[0]
        while not node.is_leaf:
            node = tree[node.left] if arr[node.feature] <= node.threshold else tree[node.right]
        total += node.p_wocc
    p_wocc = total / len(model.trees)
    return (Objective.WOCC if p_wocc > 0.5 else Objective.QE), p_wocc


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate(model: ModelEnsemble, rows: Sequence, weighted: bool = False) -> EvalReport:
    """Per-class recall and balanced accuracy, optionally weight-scaled."""
    if not rows:
        raise ValueError("cannot evaluate on an empty dataset")
    num = {0: 0.0, 1: 0.0}
    den = {0: 0.0, 1: 0.0}
    for r in rows:
        cls = 1 if r.label is Objective.WOCC else 0
        wt = float(r.weight) if weighted else 1.0
        pred, _ = predict(model, r.features)
        pred_cls = 1 if pred is Objective.WOCC else 0
        den[cls] += wt
        if pred_cls == cls:
            num[cls] += wt
    recalls = {c: (num[c] / den[c] if den[c] > 0 else None) for c in (0, 1)}
    present = [v for v in recalls.values() if v is not None]
    return EvalReport(
        balanced_accuracy=sum(present) / len(present),
        recall_qe=recalls[0],
        recall_wocc=recalls[1],
        weighted=weighted,
    )


def cross_validate(
    rows: Sequence,
    grid: Iterable[Hyperparams],
    seed: int,
    learner: LearnerKind = LearnerKind.EXTRA_TREES,
    metric: str = "average",
    weighted_train: bool = True,
    n_folds: int = 5,
) -> CVResult:
    """Stratified k-fold selection over a hyperparameter grid.

    Folds are dealt round-robin per class after a seeded shuffle, keeping
    per-fold class ratios within one sample of the global ratio. Grid points
    are scored by mean fold balanced accuracy; ties pick the
    lexicographically smallest point.
    """
    rows = list(rows)
    if len(rows) < 2 * n_folds:
        raise ValueError(f"need at least {2 * n_folds} rows for {n_folds}-fold stratification")
    labels = [1 if r.label is Objective.WOCC else 0 for r in rows]
    if len(set(labels)) < 2:
        raise ValueError("cross-validation requires both classes")

    folds = stratified_folds(labels, n_folds, seed)

    points = sorted(set(grid))
    if not points:
        raise ValueError("empty hyperparameter grid")

    best_point = None
    best_mean = -1.0
    best_reports: list[EvalReport] = []
    for hp in points:
        reports = []
        for k in range(n_folds):
            hold = set(folds[k])
            train_rows = [rows[i] for i in range(len(rows)) if i not in hold]
            test_rows = [rows[i] for i in sorted(hold)]
            model = train(
                train_rows, hp,
                seed=_point_seed(seed, hp, k),
                learner=learner, metric=metric, weighted=weighted_train,
            )
            reports.append(evaluate(model, test_rows, weighted=False))
        mean = sum(r.balanced_accuracy for r in reports) / n_folds
        if mean > best_mean:
            best_point, best_mean, best_reports = hp, mean, reports
    assert best_point is not None
    scores = [r.balanced_accuracy for r in best_reports]
    std = float(np.std(scores))
    for r in best_reports:
        r.fold_scores = list(scores)
        r.fold_std = std
    return CVResult(best=best_point, fold_reports=best_reports, mean_ba=best_mean, std_ba=std)


def stratified_folds(labels: Sequence[int], n_folds: int, seed: int) -> list[list[int]]:
    """Round-robin deal per class after a seeded shuffle.

    Keeps each fold's class counts within one sample of an even split.
    """
    rng = random.Random(seed)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for cls in sorted(set(labels)):
        members = [i for i, c in enumerate(labels) if c == cls]
        rng.shuffle(members)
        for pos, i in enumerate(members):
            folds[pos % n_folds].append(i)
    return folds


def _point_seed(base: int, hp: Hyperparams, fold: int) -> int:
    text = f"{base}:{hp.n_estimators}:{hp.max_depth}:{hp.min_samples_split}:{hp.min_samples_leaf}:{fold}"
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


# ---------------------------------------------------------------------------
# information gain
# ---------------------------------------------------------------------------

def _entropy(counts: dict) -> float:
    total = sum(counts.values())
    if total == 0:
        return 0.0
    h = 0.0
    for c in counts.values():
        if c:
            p = c / total
            h -= p * math.log2(p)
    return h


def information_gain(rows: Sequence, bins: int = 20) -> dict[str, float]:
    """Per-feature IG of the label under equal-width discretization (bits)."""
    if not rows:
        raise ValueError("information_gain requires rows")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    x, y, _ = _as_arrays(rows)
    base = _entropy({0: int((y == 0).sum()), 1: int((y == 1).sum())})
    out: dict[str, float] = {}
    for f, name in enumerate(FEATURE_NAMES):
        vals = x[:, f]
        lo, hi = float(vals.min()), float(vals.max())
        if lo == hi:
            out[name] = 0.0
            continue
        width = (hi - lo) / bins
        ids = np.minimum(((vals - lo) / width).astype(np.int64), bins - 1)
        cond = 0.0
        for b in np.unique(ids):
            mask = ids == b
            n_b = int(mask.sum())
            cond += (n_b / len(y)) * _entropy({0: int((y[mask] == 0).sum()), 1: int((y[mask] == 1).sum())})
        out[name] = base - cond
    return out


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------

def save_model(path, model: ModelEnsemble, header_lines: Sequence[str] = ()) -> None:
    """Versioned structured text; floats via repr() for exact round-trips."""
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        hp = model.hyperparams
        fh.write(f"nectar-ml-model v1 {model.metric} {model.learner_kind.value} {hp.n_estimators}\n")
        fh.write(
            f"params max_depth {hp.max_depth} min_samples_split {hp.min_samples_split} "
            f"min_samples_leaf {hp.min_samples_leaf}\n"
        )
        fh.write(f"fingerprint {model.train_fingerprint}\n")
        for t, tree in enumerate(model.trees):
            fh.write(f"tree {t}\n")
            for node in tree:
                if node.is_leaf:
                    fh.write(f"leaf {node.node_id} p_qe {node.p_qe!r} p_wocc {node.p_wocc!r}\n")
                else:
                    fh.write(
                        f"node {node.node_id} feat {node.feature} thr {node.threshold!r} "
                        f"left {node.left} right {node.right}\n"
                    )


def load_model(path) -> ModelEnsemble:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    except OSError as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from exc
    if not lines:
        raise ModelFileError(f"{path}: empty model file")

    def fail(i, msg):
        raise ModelFileError(f"{path}:{i + 1}: {msg}")

    head = lines[0].split()
    if len(head) != 5 or head[0] != "nectar-ml-model" or head[1] != "v1":
        fail(0, f"bad header {lines[0]!r}")
    metric, learner_tok, n_estimators = head[2], head[3], head[4]
    try:
        learner = LearnerKind(learner_tok)
    except ValueError:
        fail(0, f"unknown learner {learner_tok!r}")

    params: dict[str, int] = {}
    fingerprint = ""
    trees: list[list[TreeNode]] = []
    current: list[TreeNode] | None = None
    for i, line in enumerate(lines[1:], start=1):
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "params":
            params = {tok[j]: int(tok[j + 1]) for j in range(1, len(tok), 2)}
        elif tok[0] == "fingerprint":
            fingerprint = tok[1] if len(tok) > 1 else ""
        elif tok[0] == "tree":
            current = []
            trees.append(current)
        elif tok[0] == "node":
            if current is None or len(tok) != 10:
                fail(i, f"bad node line {line!r}")
            current.append(TreeNode(
                node_id=int(tok[1]), feature=int(tok[3]), threshold=float(tok[5]),
                left=int(tok[7]), right=int(tok[9]),
            ))
        elif tok[0] == "leaf":
            if current is None or len(tok) != 6:
                fail(i, f"bad leaf line {line!r}")
            current.append(TreeNode(node_id=int(tok[1]), p_qe=float(tok[3]), p_wocc=float(tok[5])))
        else:
            fail(i, f"unknown directive {tok[0]!r}")

    if len(trees) != int(n_estimators):
        raise ModelFileError(f"{path}: header promises {n_estimators} trees, found {len(trees)}")
    for t, tree in enumerate(trees):
        tree.sort(key=lambda nd: nd.node_id)
        for pos, node in enumerate(tree):
            if node.node_id != pos:
                raise ModelFileError(f"{path}: tree {t} has non-contiguous node ids")
            if not node.is_leaf:
                if not (0 <= node.left < len(tree) and 0 <= node.right < len(tree)):
                    raise ModelFileError(f"{path}: tree {t} node {pos} has dangling children")
                if not (0 <= node.feature < N_FEATURES):
                    raise ModelFileError(f"{path}: tree {t} node {pos} bad feature index")
            else:
                if abs(node.p_qe + node.p_wocc - 1.0) > 1e-9:
                    raise ModelFileError(f"{path}: tree {t} leaf {pos} probabilities do not sum to 1")
    hp = Hyperparams(
        n_estimators=int(n_estimators),
        max_depth=params.get("max_depth", 5),
        min_samples_split=params.get("min_samples_split", 2),
        min_samples_leaf=params.get("min_samples_leaf", 2),
    )
    return ModelEnsemble(
        metric=metric, learner_kind=learner, hyperparams=hp,
        trees=trees, train_fingerprint=fingerprint,
    )


def parse_grid_file(path) -> list[Hyperparams]:
    """CSV grid: columns n_estimators,max_depth,min_samples_split,min_samples_leaf."""
    import csv

    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(filter(lambda ln: not ln.startswith("#"), fh))
            points = []
            for row in reader:
                points.append(Hyperparams(
                    n_estimators=int(row["n_estimators"]),
                    max_depth=int(row["max_depth"]),
                    min_samples_split=int(row["min_samples_split"]),
                    min_samples_leaf=int(row["min_samples_leaf"]),
                ))
    except OSError as exc:
        raise ModelFileError(f"cannot read grid file {path}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"bad grid file {path}: {exc}") from exc
    if not points:
        raise ModelFileError(f"grid file {path} lists no points")
    for p in points:
        p.validate()
    return points
