import numpy as np
import pytest

from shotsense.errors import (
    DimensionMismatchError,
    EmptyClassError,
    KTooLargeError,
    NotBinaryError,
    TooFewExamplesError,
)
from shotsense.models import FeatureVector, LabeledDataset
from shotsense.services.classify import (
    AlgorithmSpec,
    cross_validate,
    predict,
    resolve_positive,
    stratified_folds,
    train_knn,
    train_linear_svm,
)
from shotsense.services.corpus import make_trial
from shotsense.services.detector import analyze_window
from shotsense.services.features import hf_amplitude, mfcc


def _dataset(points, labels, kind="mfcc"):
    return LabeledDataset.from_vectors(
        [FeatureVector(tuple(np.atleast_1d(p)), kind, lab) for p, lab in zip(points, labels)]
    )


def _blobs(seed, n=200):
    rng = np.random.default_rng(seed)
    half = n // 2
    a = rng.uniform(-1, 1, (half, 2))
    b = rng.uniform(-1, 1, (half, 2)) + np.array([6.0, 0.0])
    return _dataset(np.vstack([a, b]), ["a"] * half + ["b"] * half)


def _separable16():
    rng = np.random.default_rng(0)
    a = rng.uniform(0, 1, (8, 2))
    b = rng.uniform(3, 4, (8, 2))
    return _dataset(np.vstack([a, b]), ["background"] * 8 + ["gunshot"] * 8)


def _accuracy(model, data):
    return np.mean([predict(model, v) == v.label for v in data.vectors])


def test_svm_separates_a_pair():
    data = _dataset([[0.0], [1.0]], ["A", "B"])
    model = train_linear_svm(data)
    assert predict(model, FeatureVector((0.0,), "mfcc")) == "A"
    assert predict(model, FeatureVector((1.0,), "mfcc")) == "B"
    assert model.weights.shape == (1,)


def test_svm_blobs_training_accuracy():
    data = _blobs(3)
    model = train_linear_svm(data, seed=1)
    assert _accuracy(model, data) == 1.0


def test_svm_duplicated_data_same_decisions():
    data = _blobs(4)
    doubled = LabeledDataset(vectors=data.vectors + data.vectors, class_names=data.class_names)
    m1 = train_linear_svm(data)
    m2 = train_linear_svm(doubled)
    queries = np.random.default_rng(5).uniform([-2, -2], [8, 2], (100, 2))
    assert np.array_equal(m1.predict_indices(queries), m2.predict_indices(queries))


def test_svm_errors():
    three = _dataset([[0.0], [1.0], [2.0]], ["a", "b", "c"])
    with pytest.raises(NotBinaryError):
        train_linear_svm(three)
    lonely = LabeledDataset.from_vectors([FeatureVector((0.0,), "mfcc", "a")], class_names=["a", "b"])
    with pytest.raises(EmptyClassError):
        train_linear_svm(lonely)


def test_knn_basics():
    data = _dataset([[0.0], [1.0], [5.0], [6.0]], ["a", "a", "b", "b"])
    m1 = train_knn(data, k=1)
    assert predict(m1, FeatureVector((5.0,), "mfcc")) == "b"
    m_all = train_knn(data, k=4)
    # 2-2 tie resolves to class index 0
    assert predict(m_all, FeatureVector((6.0,), "mfcc")) == "a"
    with pytest.raises(KTooLargeError):
        train_knn(data, k=5)
    with pytest.raises(DimensionMismatchError):
        predict(m1, FeatureVector((1.0, 2.0), "mfcc"))


def test_knn_matches_brute_force():
    data = _blobs(6, n=60)
    model = train_knn(data, k=3)
    x, y = data.matrix()
    lo, hi = x.min(axis=0), x.max(axis=0)
    xs = (x - lo) / (hi - lo)
    queries = np.random.default_rng(7).uniform([-2, -2], [8, 2], (50, 2))
    for q in queries:
        qs = (q - lo) / (hi - lo)
        dist = [float(np.sqrt(np.sum((row - qs) ** 2))) for row in xs]
        order = sorted(range(len(dist)), key=lambda i: (dist[i], i))[:3]
        votes = [0, 0]
        for i in order:
            votes[y[i]] += 1
        expected = data.class_names[0 if votes[0] >= votes[1] else 1]
        assert predict(model, FeatureVector(tuple(q), "mfcc")) == expected


def test_knn_ignores_feature_scale():
    data = _blobs(8, n=40)
    stretched = _dataset([np.array(v.values) * [1000.0, 1.0] for v in data.vectors],
                         [v.label for v in data.vectors])
    queries = np.random.default_rng(9).uniform([-2, -2], [8, 2], (30, 2))
    m1, m2 = train_knn(data, 5), train_knn(stretched, 5)
    assert np.array_equal(m1.predict_indices(queries), m2.predict_indices(queries * [1000.0, 1.0]))


def test_folds_partition_and_stratify():
    y = np.array([0] * 13 + [1] * 22)
    folds = stratified_folds(y, 8, seed=3)
    sizes = np.bincount(folds, minlength=8)
    assert sizes.sum() == 35 and sizes.max() - sizes.min() <= 1
    for c in (0, 1):
        per_class = np.bincount(folds[y == c], minlength=8)
        assert per_class.max() - per_class.min() <= 1
    assert np.array_equal(folds, stratified_folds(y, 8, seed=3))


@pytest.mark.parametrize("algo", ["svm", "knn"])
def test_cross_validate_separable_fixture(algo):
    report = cross_validate(_separable16(), AlgorithmSpec(name=algo, k=3), folds=8, seed=0)
    assert report.tpr == 1.0 and report.fpr == 0.0 and report.accuracy == 1.0
    assert report.positive_label == "gunshot"
    assert len(report.per_fold) == 8
    for tp, fp, tn, fn in report.per_fold:
        assert tp + fp + tn + fn == 2
    assert report.averaging == "micro"


def test_cross_validate_is_deterministic():
    data = _blobs(10, n=48)
    a = cross_validate(data, "knn", folds=8, seed=1)
    b = cross_validate(data, "knn", folds=8, seed=1)
    assert a == b
    assert sum(sum(f) for f in a.per_fold) == 48


def test_permutation_baseline_is_chance():
    data = _blobs(11, n=64)
    labels = [v.label for v in data.vectors]
    accs = []
    for seed in range(20):
        shuffled = list(np.random.default_rng(seed).permutation(labels))
        report = cross_validate(data.relabel(shuffled), "knn", folds=8, seed=seed)
        accs.append(report.accuracy)
    assert 0.35 <= np.mean(accs) <= 0.65


def test_cross_validate_needs_enough_examples():
    data = _dataset(np.arange(10.0).reshape(-1, 1), ["a"] * 5 + ["b"] * 5)
    with pytest.raises(TooFewExamplesError):
        cross_validate(data, "svm", folds=8)
    with pytest.raises(TooFewExamplesError):
        cross_validate(data, "svm", folds=1)


def test_positive_class_rule():
    assert resolve_positive(("background", "gunshot"), None) == 1
    assert resolve_positive(("gunshot", "pseudo_gunshot"), None) == 0
    assert resolve_positive(("a", "b"), None) == 1
    assert resolve_positive(("a", "b"), "a") == 0


def test_mfcc_outranks_hf_on_burst_vs_tonal_corpus():
    hf, mf = [], []
    for i in range(200):
        label = "gunshot" if i < 100 else "pseudo_gunshot"
        mixture, trial = make_trial(label, i, snr_db=0.0, seed=21)
        window = analyze_window(mixture, trial.offset)
        hf.append(hf_amplitude(window, label=label))
        mf.append(mfcc(mixture, trial.offset + 49, label=label))
    spec = AlgorithmSpec(name="svm")
    hf_report = cross_validate(LabeledDataset.from_vectors(hf), spec, folds=8, seed=0)
    mf_report = cross_validate(LabeledDataset.from_vectors(mf), spec, folds=8, seed=0)
    assert mf_report.tpr >= 0.90
    assert mf_report.tpr >= hf_report.tpr
