import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dysaug import classify as clf
from dysaug.errors import ValidationError

D, H = clf.DYSARTHRIC, clf.HEALTHY


def _rows(n_speakers=10, per_speaker=100, shift=1.0, seed=0, level="word"):
    rng = np.random.default_rng(seed)
    rows = []
    for s in range(n_speakers):
        label = D if s % 2 else H
        for u in range(per_speaker):
            feats = tuple(rng.normal(shift * (label == D), 1.0, clf.N_FEATURES))
            rows.append(clf.FeatureRow(f"s{s}_{u}", f"s{s}", label, feats, level=level))
    return rows


def test_split_constructed_corpus():
    rows = _rows()
    for seed in range(20):
        split = clf.group_stratified_split(rows, 0.2, seed)
        train, test = split.partition(rows)
        assert not split.train_speakers & split.test_speakers
        assert 0.15 <= len(test) / len(rows) <= 0.25
        assert {r.label for r in test} == {D, H}
        assert len(train) + len(test) == len(rows)


def test_split_deterministic():
    rows = _rows(n_speakers=16, per_speaker=5)
    assert clf.group_stratified_split(rows, 0.2, 3) == clf.group_stratified_split(rows, 0.2, 3)


@settings(max_examples=30)
@given(st.lists(st.integers(1, 30), min_size=4, max_size=30), st.integers(0, 10 ** 6))
def test_split_never_leaks_speakers(sizes, seed):
    rows = [clf.FeatureRow(f"s{s}_{u}", f"s{s}", D if s % 2 else H, (0.0,) * clf.N_FEATURES)
            for s, n in enumerate(sizes) for u in range(n)]
    split = clf.group_stratified_split(rows, 0.2, seed)
    train, test = split.partition(rows)
    assert not {r.speaker_id for r in train} & {r.speaker_id for r in test}
    assert train and test


def test_split_errors():
    rows = [clf.FeatureRow("a", "s0", D, (0.0,) * clf.N_FEATURES), clf.FeatureRow("b", "s1", H, (0.0,) * clf.N_FEATURES)]
    with pytest.raises(ValidationError):
        clf.group_stratified_split(rows, 0.2, 0)
    with pytest.raises(ValidationError):
        clf.group_stratified_split(_rows(4, 2), 1.5, 0)


def test_group_kfold_disjoint_and_covering():
    rows = _rows(n_speakers=12, per_speaker=3)
    folds = clf.group_kfold(rows, 5, 0)
    seen = []
    for train, val in folds:
        assert not {r.speaker_id for r in train} & {r.speaker_id for r in val}
        seen += [r.utt_id for r in val]
    assert sorted(seen) == sorted(r.utt_id for r in rows)


def test_well_separated_clusters_train_f1_one():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(0, 0.1, (50, 3)), rng.normal(3.0, 0.1, (50, 3))])
    y = np.r_[np.zeros(50), np.ones(50)]
    m = clf.train_gbt(X, y)
    assert clf.f1(clf.as_labels(m.predict(X)), clf.as_labels(y > 0)) == 1.0


@pytest.mark.parametrize("prior", [0.3, 0.7])
def test_constant_features_predict_majority(prior):
    n = 100
    y = (np.arange(n) < prior * n).astype(float)
    m = clf.train_gbt(np.ones((n, 4)), y, rounds=20)
    pred = m.predict(np.random.default_rng(0).normal(size=(10, 4)))
    assert (pred == (prior > 0.5)).all()
    assert all(t.keys() == {"leaf"} for t in m.trees)


def test_zero_rounds_is_prior():
    y = np.r_[np.ones(30), np.zeros(70)]
    X = np.random.default_rng(1).normal(size=(100, 2))
    m = clf.train_gbt(X, y, rounds=0)
    p = m.predict_proba(X)
    assert np.allclose(p, 1 / (1 + math.exp(-m.base_score))) and p[0] == pytest.approx(0.3)


def test_training_loss_monotone_even_with_large_lr():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(200, 5))
    y = (X[:, 0] + 0.8 * rng.normal(size=200) > 0).astype(float)
    for lr in (0.1, 1.0, 3.0):
        loss = np.asarray(clf.train_gbt(X, y, rounds=40, lr=lr).train_loss)
        assert np.all(np.diff(loss) <= 1e-12)


@settings(max_examples=15)
@given(st.floats(0.01, 100), st.floats(-50, 50), st.integers(0, 1000))
def test_predictions_invariant_to_affine_feature_scaling(a, b, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(60, 3))
    y = (X[:, 0] + X[:, 1] > 0).astype(float)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    m1 = clf.train_gbt(X, y, rounds=15)
    m2 = clf.train_gbt(a * X + b, y, rounds=15)
    assert np.array_equal(m1.predict(X), m2.predict(a * X + b))


def test_train_errors():
    with pytest.raises(ValidationError):
        clf.train_gbt(np.zeros((4, 2)), np.zeros(4))
    with pytest.raises(ValidationError):
        clf.train_gbt(np.array([[np.nan], [1.0]]), np.array([0.0, 1.0]))


def test_f1_examples():
    assert clf.f1([D, H, D], [D, H, D]) == 1.0
    assert clf.f1([H, D], [D, H]) == 0.0
    # TP=1, FP=1, FN=1
    assert clf.f1([D, D, H], [D, H, D]) == pytest.approx(0.5)
    with pytest.raises(ValidationError):
        clf.f1([D], [D, H])


@given(st.lists(st.tuples(st.sampled_from([D, H]), st.sampled_from([D, H])), min_size=1))
def test_f1_bounded(pairs):
    p, t = zip(*pairs)
    assert 0.0 <= clf.f1(p, t) <= 1.0


class _Const:
    def __init__(self, mask):
        self.mask = np.asarray(mask)

    def predict(self, rows):
        return self.mask[:len(rows)]


def test_dysarthric_ratio_examples():
    rows = _rows(n_speakers=2, per_speaker=5)
    assert clf.dysarthric_ratio(_Const([True] * 10), rows) == 100.0
    assert clf.dysarthric_ratio(_Const([False] * 10), rows) == 0.0
    assert clf.dysarthric_ratio(_Const([True] * 3 + [False] * 7), rows) == pytest.approx(30.0)


def test_fit_imputes_missing_with_training_medians():
    rows = _rows(n_speakers=6, per_speaker=10)
    holed = [clf.FeatureRow(r.utt_id, r.speaker_id, r.label, (math.nan,) + r.features[1:]) for r in rows]
    model = clf.fit(holed, {"rounds": 10, "depth": 2, "lr": 0.3})
    assert np.isfinite(model.impute).all() and model.impute[0] == 0.0
    assert model.predict(holed).shape == (len(rows),)


def test_classifier_serialization_round_trip():
    rows = _rows(n_speakers=6, per_speaker=10)
    model = clf.fit(rows, {"rounds": 10, "depth": 2, "lr": 0.3})
    back = clf.Classifier.from_dict(model.to_dict())
    assert np.array_equal(back.predict(rows), model.predict(rows))


def test_regimes_filter_by_level_and_ratio_table():
    rows = _rows(n_speakers=10, per_speaker=8, shift=2.0, level="word")
    rows += _rows(n_speakers=10, per_speaker=4, shift=2.0, seed=1, level="sentence")
    models = clf.train_regimes(rows, 0.2, 0)
    assert set(models) == set(clf.REGIMES) and all(m is not None for m in models.values())
    gen = [clf.FeatureRow(f"g{i}", "g", H, tuple(np.full(clf.N_FEATURES, 2.0)), level="sentence", method="speed")
           for i in range(5)]
    table = clf.ratio_table(models, gen)
    assert table["speed"]["word"] is None
    assert table["speed"]["all"] == 100.0 and table["speed"]["sentence"] == 100.0


def test_feature_csv_round_trip(tmp_path):
    rows = _rows(n_speakers=2, per_speaker=2)
    rows[0] = clf.FeatureRow("x", "s0", H, (math.nan,) * clf.N_FEATURES, level="word", severity="healthy", method="none")
    clf.write_features(rows, tmp_path / "f.csv")
    header = (tmp_path / "f.csv").read_text().splitlines()[0].split(",")
    assert header[-2:] == ["level", "method"] and len(header) == 4 + 14 + 2
    back = clf.read_features(tmp_path / "f.csv")
    assert back[1] == rows[1] and math.isnan(back[0].features[0]) and back[0].method == "none"
