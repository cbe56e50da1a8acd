from __future__ import annotations

import numpy as np
import pytest
from scipy import optimize

from cilrec.linear_svm import LinearFit, fit_one_vs_rest, train_linear_ovr


def primal_objective(X, y, w, bias, c):
    hinge = np.clip(1.0 - y * (X @ w + bias), 0.0, None).sum()
    return 0.5 * (w @ w + bias * bias) + c * hinge


def reference_fit(positives, negatives, c):
    """Solve the same problem through the box-constrained dual.

    With the bias regularized like a weight there is no equality
    constraint, so the dual is a concave quadratic over [0, C]^n and
    L-BFGS-B solves it to high precision. Strong duality then pins the
    primal optimum.
    """
    X = np.vstack([positives, negatives])
    y = np.concatenate([np.ones(len(positives)), -np.ones(len(negatives))])
    gram = (X @ X.T + 1.0) * np.outer(y, y)

    def negated_dual(alpha):
        return 0.5 * alpha @ gram @ alpha - alpha.sum(), gram @ alpha - 1.0

    result = optimize.minimize(
        negated_dual, np.zeros(len(X)), jac=True, method="L-BFGS-B",
        bounds=[(0.0, c)] * len(X),
        options={"maxiter": 2000, "ftol": 1e-14, "gtol": 1e-12})
    alpha = result.x
    w = (alpha * y) @ X
    bias = float((alpha * y).sum())
    return w, bias, primal_objective(X, y, w, bias, c)


def random_problem(seed, *, rows=24, dimension=3, gap=1.2):
    rng = np.random.default_rng(seed)
    positives = rng.normal(size=(rows // 2, dimension)) + gap
    negatives = rng.normal(size=(rows - rows // 2, dimension)) - gap
    return positives, negatives


@pytest.mark.parametrize("seed", range(10))
def test_matches_independent_dual_solver(seed):
    c = 1.0
    positives, negatives = random_problem(seed, gap=0.8)
    fit = train_linear_ovr(positives, negatives, c=c, tol=1e-9,
                           max_epochs=20000, seed=seed)
    assert fit.converged
    w_ref, b_ref, objective_ref = reference_fit(positives, negatives, c)
    assert fit.objective == pytest.approx(objective_ref, rel=1e-4)
    assert np.allclose(fit.weights, w_ref, atol=1e-3)
    assert fit.bias == pytest.approx(b_ref, abs=1e-3)


def test_objective_formula_is_reported():
    positives, negatives = random_problem(3)
    fit = train_linear_ovr(positives, negatives)
    X = np.vstack([positives, negatives])
    y = np.concatenate([np.ones(len(positives)), -np.ones(len(negatives))])
    assert fit.objective == pytest.approx(
        primal_objective(X, y, fit.weights, fit.bias, 1.0), abs=1e-12)


def test_label_swap_negates_the_separator():
    positives, negatives = random_problem(5)
    ahead = train_linear_ovr(positives, negatives, tol=1e-9, max_epochs=20000)
    swapped = train_linear_ovr(negatives, positives, tol=1e-9, max_epochs=20000)
    assert np.allclose(swapped.weights, -ahead.weights, atol=1e-3)
    assert swapped.bias == pytest.approx(-ahead.bias, abs=1e-3)


def test_separable_line_is_classified_by_sign():
    positives = np.array([[2.0], [2.5], [3.0]])
    negatives = np.array([[-2.0], [-2.5], [-3.0]])
    fit = train_linear_ovr(positives, negatives)
    assert fit.weights[0] > 0
    assert float(positives[0] @ fit.weights + fit.bias) > 0
    assert float(negatives[0] @ fit.weights + fit.bias) < 0


def test_same_seed_reproduces_bitwise():
    positives, negatives = random_problem(7)
    a = train_linear_ovr(positives, negatives, seed=11)
    b = train_linear_ovr(positives, negatives, seed=11)
    assert np.array_equal(a.weights, b.weights)
    assert a.bias == b.bias
    assert a.epochs == b.epochs


def test_epoch_cap_sets_flag_and_warns():
    rng = np.random.default_rng(0)
    positives = rng.normal(size=(20, 4))
    negatives = rng.normal(size=(20, 4))  # heavy overlap
    with pytest.warns(RuntimeWarning):
        fit = train_linear_ovr(positives, negatives, max_epochs=1)
    assert isinstance(fit, LinearFit)
    assert not fit.converged
    assert fit.epochs == 1


def test_trained_objective_beats_the_zero_solution():
    # At (w, b) = 0 every margin is violated: objective = C * rows.
    positives, negatives = random_problem(9)
    fit = train_linear_ovr(positives, negatives)
    assert 0.0 <= fit.objective < 1.0 * (len(positives) + len(negatives))


@pytest.mark.parametrize("kwargs", [
    {"c": 0.0}, {"c": -1.0}, {"tol": 0.0}, {"max_epochs": 0},
])
def test_invalid_hyperparameters(kwargs):
    positives, negatives = random_problem(0)
    with pytest.raises(ValueError):
        train_linear_ovr(positives, negatives, **kwargs)


def test_shape_validation():
    with pytest.raises(ValueError):
        train_linear_ovr(np.zeros((2, 3)), np.zeros((2, 4)))
    with pytest.raises(ValueError):
        train_linear_ovr(np.zeros((0, 3)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        train_linear_ovr(np.zeros(3), np.zeros((2, 3)))


def test_one_vs_rest_stacks_individual_fits():
    rng = np.random.default_rng(2)
    features = np.vstack([rng.normal(size=(8, 3)) + offset
                          for offset in (-2.0, 0.0, 2.0)])
    labels = np.repeat([4, 7, 9], 8)
    model = fit_one_vs_rest(features, labels, c=1.0, tol=1e-4, seed=31)
    assert model.class_ids == (4, 7, 9)
    for row, class_id in enumerate(model.class_ids):
        mask = labels == class_id
        single = train_linear_ovr(features[mask], features[~mask],
                                  c=1.0, tol=1e-4, seed=31 + row)
        assert np.array_equal(model.weights[row], single.weights)
        assert model.biases[row] == single.bias


def test_one_vs_rest_scores_pick_the_right_class():
    rng = np.random.default_rng(4)
    features = np.vstack([rng.normal(scale=0.2, size=(10, 2)) + center
                          for center in ([3, 0], [0, 3], [-3, -3])])
    labels = np.repeat([0, 1, 2], 10)
    model = fit_one_vs_rest(features, labels, c=1.0, tol=1e-4, seed=0)
    predicted = np.array(model.class_ids)[
        np.argmax(model.scores(features), axis=1)]
    assert np.array_equal(predicted, labels)


def test_one_vs_rest_needs_two_classes():
    with pytest.raises(ValueError):
        fit_one_vs_rest(np.zeros((3, 2)), np.zeros(3), c=1.0, tol=1e-4, seed=0)
