"""Dysarthric-vs-healthy classification on prosodic features.

Gradient-boosted depth-limited regression trees on the logistic loss, with
second-order (Newton) leaf values and exact greedy splits on raw feature
values. Speaker-grouped splitting keeps every speaker on one side.
"""

from __future__ import annotations

import csv
import itertools
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .prosody import FEATURE_NAMES
from .seeding import stream

DYSARTHRIC = "dysarthric"
HEALTHY = "healthy"
LABELS = (DYSARTHRIC, HEALTHY)
N_FEATURES = len(FEATURE_NAMES)

REGIMES = ("all", "word", "sentence")

DEFAULT_HYPER = {"rounds": 200, "depth": 2, "lr": 0.1}
GRID = {"rounds": (100, 200), "depth": (1, 2), "lr": (0.1, 0.3)}
L2 = 1.0
MIN_CHILD_WEIGHT = 1e-6


@dataclass(frozen=True)
class FeatureRow:
    utt_id: str
    speaker_id: str
    label: str
    features: tuple
    level: str = ""
    severity: str = ""
    method: str = ""

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValidationError(f"{self.utt_id}: label {self.label!r} not in {LABELS}")
        if len(self.features) != N_FEATURES:
            raise ValidationError(f"{self.utt_id}: expected {N_FEATURES} features, got {len(self.features)}")


def matrix(rows):
    X = np.array([r.features for r in rows], dtype=np.float64).reshape(len(rows), N_FEATURES)
    y = np.array([r.label == DYSARTHRIC for r in rows], dtype=np.float64)
    return X, y


# ---------------------------------------------------------------- splitting

@dataclass(frozen=True)
class SplitSpec:
    train_speakers: frozenset
    test_speakers: frozenset
    seed: int

    def partition(self, rows):
        train = [r for r in rows if r.speaker_id in self.train_speakers]
        test = [r for r in rows if r.speaker_id in self.test_speakers]
        return train, test


def _speaker_table(rows):
    """speaker -> (label, n_utts); a speaker's label is its majority label."""
    counts = {}
    for r in rows:
        c = counts.setdefault(r.speaker_id, {DYSARTHRIC: 0, HEALTHY: 0})
        c[r.label] += 1
    return {s: (max(LABELS, key=lambda lab: (c[lab], lab == DYSARTHRIC)), c[DYSARTHRIC] + c[HEALTHY])
            for s, c in counts.items()}


def group_stratified_split(rows, test_fraction=0.2, seed=0) -> SplitSpec:
    """Greedy speaker-level split balancing each label's test share.

    Speakers of each label are visited in a seeded random order and moved to
    the test side whenever that brings the label's test utterance count
    closer to ``test_fraction`` of its total. At least one speaker per label
    lands on each side.
    """
    rows = list(rows)
    if not 0 < test_fraction < 1:
        raise ValidationError("test_fraction must lie in (0, 1)")
    table = _speaker_table(rows)
    test = set()
    for label in LABELS:
        speakers = sorted(s for s, (lab, _) in table.items() if lab == label)
        if not speakers:
            continue
        if len(speakers) < 2:
            raise ValidationError(f"label {label!r} has a single speaker; cannot split by speaker")
        order = [speakers[i] for i in stream(seed, "split", label).permutation(len(speakers))]
        total = sum(table[s][1] for s in speakers)
        goal = test_fraction * total
        chosen, got = [], 0
        for s in order:
            n = table[s][1]
            if abs(got + n - goal) < abs(got - goal) and len(chosen) < len(speakers) - 1:
                chosen.append(s)
                got += n
        if not chosen:
            chosen = [min(order, key=lambda s: table[s][1])]
        test.update(chosen)
    return SplitSpec(frozenset(table) - frozenset(test), frozenset(test), seed)


def group_kfold(rows, k=5, seed=0):
    """Speaker-grouped folds, label-stratified by dealing speakers round-robin."""
    table = _speaker_table(rows)
    fold_of = {}
    offset = 0
    for label in LABELS:
        speakers = sorted(s for s, (lab, _) in table.items() if lab == label)
        perm = stream(seed, "kfold", label).permutation(len(speakers))
        for i, j in enumerate(perm):
            fold_of[speakers[j]] = (i + offset) % k
        offset += len(speakers)
    return [([r for r in rows if fold_of[r.speaker_id] != f], [r for r in rows if fold_of[r.speaker_id] == f])
            for f in range(k)]


# ---------------------------------------------------------------- trees

def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _logloss(y, z):
    # log(1 + exp(-z)) for y=1, log(1 + exp(z)) for y=0
    return np.logaddexp(0.0, np.where(y > 0, -z, z))


def _best_split(X, g, h, idx):
    G, H = g[idx].sum(), h[idx].sum()
    parent = G * G / (H + L2)
    Xn = X[idx]
    order = np.argsort(Xn, axis=0, kind="stable")  # (n, features)
    xs = np.take_along_axis(Xn, order, axis=0)
    gl = np.cumsum(g[idx][order], axis=0)[:-1]
    hl = np.cumsum(h[idx][order], axis=0)[:-1]
    gr, hr = G - gl, H - hl
    ok = (xs[:-1] < xs[1:]) & (hl >= MIN_CHILD_WEIGHT) & (hr >= MIN_CHILD_WEIGHT)
    if not ok.any():
        return 0.0, None, None
    with np.errstate(invalid="ignore"):
        gain = np.where(ok, gl * gl / (hl + L2) + gr * gr / (hr + L2) - parent, -np.inf)
    # first maximum in feature-major order
    flat = int(np.argmax(gain.T))
    f, i = divmod(flat, gain.shape[0])
    if not gain[i, f] > 1e-12:
        return 0.0, None, None
    return float(gain[i, f]), f, 0.5 * (xs[i, f] + xs[i + 1, f])


def _grow(X, g, h, idx, depth):
    if depth > 0 and len(idx) > 1:
        gain, f, thr = _best_split(X, g, h, idx)
        if f is not None:
            go_left = X[idx, f] <= thr
            return {"feature": f, "threshold": thr,
                    "left": _grow(X, g, h, idx[go_left], depth - 1),
                    "right": _grow(X, g, h, idx[~go_left], depth - 1)}
    return {"leaf": -g[idx].sum() / (h[idx].sum() + L2), "idx": idx}


def _leaves(node):
    if "leaf" in node:
        yield node
    else:
        yield from _leaves(node["left"])
        yield from _leaves(node["right"])


def tree_predict(node, X):
    out = np.empty(len(X))
    stack = [(node, np.arange(len(X)))]
    while stack:
        nd, idx = stack.pop()
        if "leaf" in nd:
            out[idx] = nd["leaf"]
            continue
        left = X[idx, nd["feature"]] <= nd["threshold"]
        stack.append((nd["left"], idx[left]))
        stack.append((nd["right"], idx[~left]))
    return out


@dataclass
class GbtModel:
    base_score: float
    learning_rate: float
    trees: list = field(default_factory=list)
    depth: int = 2
    train_loss: list = field(default_factory=list)

    def decision_function(self, X):
        X = np.asarray(X, dtype=np.float64)
        z = np.full(len(X), self.base_score)
        for t in self.trees:
            z += self.learning_rate * tree_predict(t, X)
        return z

    def predict_proba(self, X):
        return _sigmoid(self.decision_function(X))

    def predict(self, X):
        """Boolean array: True where the model says dysarthric (p >= 0.5)."""
        return self.predict_proba(X) >= 0.5

    def to_dict(self):
        return {"base_score": self.base_score, "learning_rate": self.learning_rate, "depth": self.depth,
                "trees": self.trees, "train_loss": self.train_loss}

    @classmethod
    def from_dict(cls, d):
        return cls(d["base_score"], d["learning_rate"], d["trees"], d.get("depth", 2), d.get("train_loss", []))


def train_gbt(X, y, rounds=200, depth=2, lr=0.1) -> GbtModel:
    """Boost ``rounds`` trees on the logistic loss.

    Leaf values are Newton steps; a leaf whose shrunken step would raise
    the training loss on its own points is halved until it does not, so the
    training loss never increases from one round to the next.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] == 0 or len(X) == 0:
        raise ValidationError("empty feature matrix")
    if len(X) != len(y):
        raise ValidationError("feature/label length mismatch")
    if not (y.min() == 0 and y.max() == 1):
        raise ValidationError("training set must contain both labels")
    if not np.all(np.isfinite(X)):
        raise ValidationError("feature matrix has missing values; impute first")

    prior = float(np.clip(y.mean(), 1e-6, 1 - 1e-6))
    model = GbtModel(math.log(prior / (1 - prior)), lr, depth=depth)
    z = np.full(len(y), model.base_score)
    model.train_loss.append(float(_logloss(y, z).mean()))
    all_idx = np.arange(len(y))
    for _ in range(rounds):
        p = _sigmoid(z)
        g, h = p - y, p * (1 - p)
        tree = _grow(X, g, h, all_idx, depth)
        for leaf in _leaves(tree):
            idx = leaf.pop("idx")
            w = leaf["leaf"]
            before = _logloss(y[idx], z[idx]).sum()
            for _ in range(60):
                if _logloss(y[idx], z[idx] + lr * w).sum() <= before:
                    break
                w *= 0.5
            else:
                w = 0.0
            leaf["leaf"] = float(w)
            z[idx] += lr * w
        model.trees.append(tree)
        model.train_loss.append(float(_logloss(y, z).mean()))
    return model


# ---------------------------------------------------------------- metrics

def f1(predictions, labels, positive=DYSARTHRIC) -> float:
    predictions, labels = list(predictions), list(labels)
    if len(predictions) != len(labels):
        raise ValidationError(f"length mismatch: {len(predictions)} predictions vs {len(labels)} labels")
    tp = sum(p == positive and t == positive for p, t in zip(predictions, labels))
    fp = sum(p == positive and t != positive for p, t in zip(predictions, labels))
    fn = sum(p != positive and t == positive for p, t in zip(predictions, labels))
    if tp == 0:
        return 0.0
    precision, recall = tp / (tp + fp), tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def as_labels(mask):
    return [DYSARTHRIC if m else HEALTHY for m in mask]


# ---------------------------------------------------------------- classifier

@dataclass
class Classifier:
    """A boosted model plus the per-feature medians used for imputation."""

    model: GbtModel
    impute: np.ndarray
    hyper: dict
    test_f1: float | None = None
    cv_f1: float | None = None

    def prepare(self, X):
        X = np.array(X, dtype=np.float64)
        missing = ~np.isfinite(X)
        X[missing] = np.broadcast_to(self.impute, X.shape)[missing]
        return X

    def predict(self, rows):
        X, _ = matrix(rows)
        return self.model.predict(self.prepare(X))

    def to_dict(self):
        return {"hyper": self.hyper, "impute": self.impute.tolist(), "test_f1": self.test_f1,
                "cv_f1": self.cv_f1, "model": self.model.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(GbtModel.from_dict(d["model"]), np.asarray(d["impute"], dtype=np.float64), d["hyper"],
                   d.get("test_f1"), d.get("cv_f1"))


def feature_medians(X):
    with np.errstate(all="ignore"):
        med = np.array([np.median(c[np.isfinite(c)]) if np.isfinite(c).any() else 0.0 for c in X.T])
    return med


def fit(rows, hyper=None) -> Classifier:
    """Impute with training medians, then boost."""
    rows = list(rows)
    hyper = {**DEFAULT_HYPER, **(hyper or {})}
    X, y = matrix(rows)
    if len(rows) == 0:
        raise ValidationError("no training rows")
    med = feature_medians(X)
    clf = Classifier(None, med, hyper)
    clf.model = train_gbt(clf.prepare(X), y, **hyper)
    return clf


def grid_search(rows, grid=None, folds=5, seed=0):
    """Pick hyperparameters by mean speaker-grouped CV F1; ties go to the earlier grid point."""
    grid = grid or GRID
    points = [dict(zip(grid, vals)) for vals in itertools.product(*grid.values())]
    splits = [(tr, te) for tr, te in group_kfold(rows, folds, seed)
              if te and len({r.label for r in tr}) == 2]
    if not splits:
        return dict(DEFAULT_HYPER), None
    best, best_score = None, -1.0
    for hp in points:
        scores = []
        for tr, te in splits:
            clf = fit(tr, hp)
            scores.append(f1(as_labels(clf.predict(te)), [r.label for r in te]))
        score = float(np.mean(scores))
        if score > best_score + 1e-12:
            best, best_score = hp, score
    return best, best_score


def dysarthric_ratio(model, rows) -> float:
    """Percentage of rows predicted dysarthric at threshold 0.5."""
    rows = list(rows)
    if not rows:
        raise ValidationError("no rows to classify")
    pred = model.predict(rows)
    return 100.0 * float(np.count_nonzero(pred)) / len(rows)


def regime_rows(rows, regime):
    return list(rows) if regime == "all" else [r for r in rows if r.level == regime]


def _trainable(rows):
    table = _speaker_table(rows)
    return all(sum(1 for lab, _ in table.values() if lab == label) >= 2 for label in LABELS)


def train_regimes(rows, test_fraction=0.2, seed=0, use_grid=False):
    """Fit one classifier per training regime (all / word / sentence rows).

    Each regime gets its own group-stratified split; the model kept is the
    one fitted on the training side, and its held-out F1 is recorded.
    Regimes without two speakers per label are skipped (None).
    """
    out = {}
    for regime in REGIMES:
        sub = regime_rows(rows, regime)
        if not sub or not _trainable(sub):
            out[regime] = None
            continue
        split = group_stratified_split(sub, test_fraction, seed)
        train, test = split.partition(sub)
        hyper, cv = grid_search(train, seed=seed) if use_grid else (dict(DEFAULT_HYPER), None)
        clf = fit(train, hyper)
        clf.cv_f1 = cv
        clf.test_f1 = f1(as_labels(clf.predict(test)), [r.label for r in test]) if test else None
        out[regime] = clf
    if all(v is None for v in out.values()):
        raise ValidationError("no training regime has two speakers of each label")
    return out


def ratio_table(classifiers, rows):
    """method -> regime -> percentage classified dysarthric (None if not computable).

    Evaluation rows are filtered by level the same way training rows were.
    """
    methods = list(dict.fromkeys(r.method for r in rows))
    table = {}
    for m in methods:
        mrows = [r for r in rows if r.method == m]
        table[m] = {}
        for regime in REGIMES:
            clf = classifiers.get(regime)
            sub = regime_rows(mrows, regime)
            table[m][regime] = dysarthric_ratio(clf, sub) if clf is not None and sub else None
    return table


# ---------------------------------------------------------------- feature CSV

META_COLUMNS = ("utt_id", "label", "speaker", "severity")
TRAILING_COLUMNS = ("level", "method")
FEATURE_CSV_COLUMNS = META_COLUMNS + FEATURE_NAMES + TRAILING_COLUMNS


def _fmt(v):
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def write_features(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FEATURE_CSV_COLUMNS)
        for r in rows:
            w.writerow([r.utt_id, r.label, r.speaker_id, r.severity, *map(_fmt, r.features), r.level, r.method])
    return path


def read_features(path):
    path = os.fspath(path)
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in META_COLUMNS + FEATURE_NAMES if c not in (reader.fieldnames or [])]
        if missing:
            raise ValidationError(f"{path}: missing column(s): {', '.join(missing)}")
        for row in reader:
            feats = tuple(float(row[c]) if row[c] not in ("", None) else math.nan for c in FEATURE_NAMES)
            rows.append(FeatureRow(row["utt_id"], row["speaker"], row["label"], feats,
                                   row.get("level") or "", row.get("severity") or "", row.get("method") or ""))
    if not rows:
        raise ValidationError(f"{path}: no feature rows")
    return rows
