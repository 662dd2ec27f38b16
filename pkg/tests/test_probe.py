import numpy as np
import pytest

from soundtex.exceptions import InvalidInputError
from soundtex.labeling import assign, kmeans_fit
from soundtex.probe import (
    LinearModel,
    baselines,
    evaluate,
    evaluate_predictions,
    format_report,
    predict,
    softmax,
    softmax_cross_entropy,
    train,
)


def blob_data(seed=0, n_per=60, d=20, k=4):
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((k, d)) * 10
    y = np.repeat(np.arange(k), n_per)
    return centers[y] + rng.standard_normal((k * n_per, d)), y


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    eps = 1e-5
    for _ in range(20):
        k, d, n = 3, 4, 5
        W = rng.standard_normal((k, d))
        b = rng.standard_normal(k)
        X = rng.standard_normal((n, d))
        y = rng.integers(0, k, size=n)
        _, grad_W, grad_b = softmax_cross_entropy(W, b, X, y, l2=0.1)

        numeric = np.zeros_like(W)
        for idx in np.ndindex(*W.shape):
            step = np.zeros_like(W)
            step[idx] = eps
            up = softmax_cross_entropy(W + step, b, X, y, l2=0.1)[0]
            down = softmax_cross_entropy(W - step, b, X, y, l2=0.1)[0]
            numeric[idx] = (up - down) / (2 * eps)
        numeric_b = np.array([
            (softmax_cross_entropy(W, b + eps * e, X, y, 0.1)[0]
             - softmax_cross_entropy(W, b - eps * e, X, y, 0.1)[0]) / (2 * eps)
            for e in np.eye(k)
        ])

        assert np.linalg.norm(grad_W - numeric) / np.linalg.norm(numeric) < 1e-4
        assert np.linalg.norm(grad_b - numeric_b) / max(np.linalg.norm(numeric_b), 1e-12) < 1e-4


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(1)
    p = softmax(rng.standard_normal((50, 7)) * 30)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_two_separable_points():
    X = np.array([[1.0, 0.0], [-1.0, 0.0]])
    y = np.array([0, 1])
    model = train(X, y, epochs=50)
    np.testing.assert_array_equal(predict(model, X), y)


def test_single_class_predicts_that_class():
    X = np.random.default_rng(2).standard_normal((10, 3))
    y = np.full(10, 2)
    model = train(X, y, epochs=100, l2=1e-4)
    np.testing.assert_array_equal(predict(model, X), 2)
    assert model.training_log[-1] < model.training_log[0]


def test_loss_log_nonincreasing():
    X, y = blob_data(3)
    model = train(X, y, epochs=60)
    log = np.array(model.training_log)
    assert np.all(np.diff(log) <= 1e-9)
    assert np.all(np.isfinite(model.weights))


def test_blob_accuracy():
    X, y = blob_data(4)
    model = train(X, y, epochs=200)
    assert evaluate(model, X, y)["accuracy"] > 0.99


def test_probe_learns_cluster_labels():
    X, _ = blob_data(5, k=6, d=30)
    cluster_model = kmeans_fit(X, 6, seed=0)
    labels, _ = assign(cluster_model, X)
    model = train(X, labels, epochs=200, n_classes=6)
    assert evaluate(model, X, labels)["accuracy"] >= 0.95


def test_train_rejects_out_of_range_labels():
    with pytest.raises(InvalidInputError):
        train(np.zeros((3, 2)), np.array([0, 1, 5]), n_classes=3)
    with pytest.raises(InvalidInputError):
        train(np.zeros((3, 2)), np.array([0, -1, 1]))


def test_evaluate_perfect_predictions():
    y = np.array([0, 1, 2, 2, 1])
    report = evaluate_predictions(y, y, 3)
    assert report["accuracy"] == 1.0
    np.testing.assert_array_equal(report["confusion"], np.diag([1, 2, 2]))


def test_evaluate_absent_class_is_nan():
    report = evaluate_predictions(np.array([0, 0, 1]), np.array([0, 1, 1]), 3)
    assert report["accuracy"] == pytest.approx(2 / 3)
    assert report["per_class"][0] == 1.0
    assert report["per_class"][1] == 0.5
    assert np.isnan(report["per_class"][2])


def test_evaluate_breaks_logit_ties_by_lowest_class():
    model = LinearModel(weights=np.zeros((3, 2)), bias=np.zeros(3), classes=3, feature_dim=2)
    np.testing.assert_array_equal(predict(model, np.ones((4, 2))), 0)


def test_evaluate_shape_mismatch():
    model = LinearModel(weights=np.zeros((2, 2)), bias=np.zeros(2), classes=2, feature_dim=2)
    with pytest.raises(InvalidInputError):
        evaluate(model, np.zeros((3, 2)), np.array([0, 1]))
    with pytest.raises(InvalidInputError):
        evaluate(model, np.zeros((2, 5)), np.array([0, 1]))


def test_majority_predictor_accuracy():
    # the modal class holds 33 of 500 labels
    y = np.concatenate([np.zeros(33, dtype=int), np.resize(np.arange(1, 30), 467)])
    report = evaluate_predictions(np.zeros_like(y), y, 30)
    assert report["accuracy"] == pytest.approx(0.066)


@pytest.mark.parametrize("y,expected", [
    ([0, 0, 1], (0.5, 2 / 3)),
    (list(range(30)) * 3, (1 / 30, 1 / 30)),
])
def test_baselines(y, expected):
    chance, majority = baselines(np.array(y))
    assert chance == pytest.approx(expected[0])
    assert majority == pytest.approx(expected[1])


def test_baselines_in_reported_regime():
    y = np.concatenate([np.zeros(33, dtype=int), np.resize(np.arange(1, 30), 467)])
    chance, majority = baselines(y)
    lines = format_report(len(y), 30, 0.2, chance, majority)
    assert "chance: 3.3%" in lines
    assert "majority: 6.6%" in lines


def test_baselines_empty():
    with pytest.raises(InvalidInputError):
        baselines(np.array([]))
