import numpy as np
import pytest

from rfidsense.domain import ALL_CLASSES, FeatureMode, FeatureVector, LabeledSample, MaterialClass as M
from rfidsense.evaluation import ConfusionMatrix, evaluate, metrics_dict, per_class_report, render_report
from rfidsense.features import StandardizationParams
from rfidsense.mlp import ClassifierModel, Network, NetworkSpec




def test_matrix_from_labels_and_accuracy():
    cm = ConfusionMatrix.from_labels([0, 0, 1, 1, 1], [0, 1, 1, 1, 0], (M.Control, M.Backpack))
    assert cm.counts.tolist() == [[1, 1], [1, 2]]
    assert cm.total == 5 and cm.accuracy == pytest.approx(0.6)


def test_per_class_hand_matrix():
    cm = ConfusionMatrix(np.array([[5, 1], [2, 4]]), (M.Control, M.Backpack))
    rep = per_class_report(cm)
    assert rep[0].recall == pytest.approx(5 / 6) and rep[0].precision == pytest.approx(5 / 7)
    assert rep[1].recall == pytest.approx(4 / 6) and rep[1].precision == pytest.approx(4 / 5)
    assert rep[0].f1 == pytest.approx(2 * (5 / 7) * (5 / 6) / (5 / 7 + 5 / 6))


def test_diagonal_perfect():
    cm = ConfusionMatrix(np.diag([3, 4, 5]), (M.Control, M.PlasticBox, M.Backpack))
    assert cm.accuracy == 1.0
    assert all(m.precision == m.recall == m.f1 == 1.0 for m in per_class_report(cm))


def test_never_predicted_flag():
    cm = ConfusionMatrix(np.array([[4, 0], [3, 0]]), (M.Control, M.Backpack))
    rep = per_class_report(cm)
    assert rep[1].precision == 0.0 and rep[1].precision_undefined
    assert not rep[0].precision_undefined
    assert metrics_dict(cm.accuracy, cm)["per_class"][1]["undefined"] == ["precision", "f1"]


def test_accuracy_equals_mean_recall_on_balanced(rng):
    for _ in range(200):
        k = int(rng.integers(2, 8))
        n = int(rng.integers(1, 30))
        rows = [rng.multinomial(n, rng.dirichlet(np.ones(k))) for _ in range(k)]
        cm = ConfusionMatrix(np.array(rows), ALL_CLASSES[:k])
        recalls = [m.recall for m in per_class_report(cm)]
        assert cm.accuracy == pytest.approx(np.mean(recalls), abs=1e-12)


def _constant_model(k_out, classes, bias_class=0):
    net = Network(NetworkSpec(4, (3,), k_out))
    net.biases[-1][bias_class] = 5.0
    std = StandardizationParams(np.zeros(4), np.ones(4), FeatureMode.WindowStats)
    return ClassifierModel(net, std, classes, FeatureMode.WindowStats)


def _balanced_samples(rng, per=10):
    return [
        LabeledSample(FeatureVector(np.abs(rng.normal(size=4)), FeatureMode.WindowStats), c)
        for c in ALL_CLASSES for _ in range(per)
    ]


def test_constant_predictor(rng):
    acc, cm = evaluate(_constant_model(7, ALL_CLASSES), _balanced_samples(rng))
    assert acc == pytest.approx(1 / 7)
    assert cm.counts[:, 0].tolist() == [10] * 7
    assert cm.counts.sum(axis=1).tolist() == [10] * 7


def test_perfect_predictor():
    # hidden unit j fires for feature j-ish; here use a model reading a one-hot of class index from bias path
    classes = (M.Control, M.Backpack)
    net = Network(NetworkSpec(4, (2,), 2))
    net.weights[0][0, 0] = 1.0
    net.weights[0][0, 1] = -1.0
    net.weights[1][0, 0] = 10.0
    net.weights[1][1, 1] = 10.0
    model = ClassifierModel(net, StandardizationParams(np.zeros(4), np.ones(4)), classes, FeatureMode.WindowStats)
    samples = [LabeledSample(FeatureVector([1.0, 0, 0, 0], FeatureMode.WindowStats), M.Control)] * 3 + \
              [LabeledSample(FeatureVector([-1.0, 0, 0, 0], FeatureMode.WindowStats), M.Backpack)] * 4
    acc, cm = evaluate(model, samples)
    assert acc == 1.0 and cm.counts.tolist() == [[3, 0], [0, 4]]


def test_permutation_invariance(rng):
    net = Network(NetworkSpec(4, (6,), 7))
    net.flat[:] = rng.normal(size=net.param_count)
    std = StandardizationParams(np.zeros(4), np.ones(4), FeatureMode.WindowStats)
    model = ClassifierModel(net, std, ALL_CLASSES, FeatureMode.WindowStats)
    samples = _balanced_samples(rng)
    a = evaluate(model, samples)
    order = rng.permutation(len(samples))
    b = evaluate(model, [samples[i] for i in order])
    assert a[0] == b[0] and a[1] == b[1]
    assert np.trace(a[1].counts) / a[1].total == a[0]


def test_dimension_mismatch(rng):
    model = _constant_model(7, ALL_CLASSES)
    bad = [LabeledSample(FeatureVector([1.0, 2.0], FeatureMode.SinglePoint), M.Control)]
    with pytest.raises(ValueError):
        evaluate(model, bad)
    with pytest.raises(ValueError):
        evaluate(model, [])


def test_exports(tmp_path):
    cm = ConfusionMatrix(np.array([[5, 1], [2, 4]]), (M.FabricBag, M.Backpack))
    cm.to_csv(tmp_path / "cm.csv")
    assert (tmp_path / "cm.csv").read_text().splitlines() == ["true\\pred,FabricBag,Backpack", "FabricBag,5,1", "Backpack,2,4"]
    text = render_report(cm.accuracy, cm)
    assert "83.3%" in text and "accuracy: 0.7500" in text
    assert cm.most_confused_pair() == (M.FabricBag, M.Backpack, 3)
    assert np.allclose(cm.row_normalized().sum(axis=1), 1.0)
