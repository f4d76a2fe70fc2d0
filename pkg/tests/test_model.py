"""Model forward pass, loss gradients, and the training loop."""

import numpy as np
import pytest

from tmpnn import (Dataset, DivergenceError, TmpnnModel, TrainConfig,
                   TrainingDivergedError, eval_monomials, fit, forward,
                   identity_weights, loss_and_gradient, metric_mse, predict)
from tmpnn.model import _loss_grad_arrays


def random_model(rng, n, m, l=0, k=2, p=3, scale=0.1, **kw):
    model = TmpnnModel.create(n, m, n_latent=l, order=k, steps=p,
                              standardize=False, **kw)
    model.map.delta = model.map.delta + rng.normal(0, scale,
                                                   model.map.delta.shape)
    return model


def test_identity_model_predicts_zero():
    model = TmpnnModel.create(3, 2, order=2, steps=4, standardize=False)
    X = np.random.default_rng(0).normal(size=(10, 3))
    np.testing.assert_array_equal(predict(model, X), np.zeros((10, 2)))
    pred, trajectory = forward(model, X[0])
    np.testing.assert_array_equal(pred, np.zeros(2))
    assert len(trajectory) == 5
    for state in trajectory:
        np.testing.assert_array_equal(state, trajectory[0])


def test_trajectory_starts_from_extended_state():
    model = TmpnnModel.create(2, 1, n_latent=1, order=2, steps=2,
                              standardize=False)
    model.init_state = np.array([0.5, -0.25])
    _, trajectory = forward(model, [3.0, 4.0])
    np.testing.assert_array_equal(trajectory[0], [3.0, 4.0, 0.5, -0.25])


def test_single_step_equals_direct_polynomial():
    # with p=1 the target output is literally one polynomial in (x, 0)
    rng = np.random.default_rng(1)
    model = random_model(rng, 1, 1, k=2, p=1, scale=0.5)
    basis = model.basis
    W = model.map.W
    for _ in range(20):
        x = rng.uniform(-2, 2)
        phi = eval_monomials(basis, np.array([x, 0.0]))
        expected = float(phi @ W[:, 1])
        got = float(predict(model, np.array([[x]]))[0, 0])
        assert abs(got - expected) <= 1e-12 * max(1.0, abs(expected))


def test_order1_model_satisfies_superposition():
    rng = np.random.default_rng(2)
    model = random_model(rng, 3, 2, k=1, p=4, scale=0.3)
    f0 = predict(model, np.zeros((1, 3)))[0]
    for _ in range(10):
        a, b = rng.normal(size=3), rng.normal(size=3)
        lhs = predict(model, (a + b)[None, :])[0] - f0
        rhs = (predict(model, a[None, :])[0] - f0) + (predict(model, b[None, :])[0] - f0)
        np.testing.assert_allclose(lhs, rhs, atol=1e-8)


def test_predict_rows_match_forward():
    rng = np.random.default_rng(3)
    model = random_model(rng, 2, 2, l=1, k=3, p=3)
    X = rng.normal(size=(7, 2))
    batch = predict(model, X)
    for i in range(7):
        single, _ = forward(model, X[i])
        np.testing.assert_allclose(batch[i], single, rtol=1e-13, atol=1e-15)


def test_identity_zero_targets_zero_loss_and_gradient():
    model = TmpnnModel.create(2, 1, order=2, steps=3, standardize=False)
    data = Dataset(np.random.default_rng(0).normal(size=(8, 2)),
                   np.zeros((8, 1)), ["a", "b"], ["y"])
    loss, grads = loss_and_gradient(model, data)
    assert loss == 0.0
    np.testing.assert_array_equal(grads["delta"], np.zeros_like(grads["delta"]))


def test_hand_gradient_single_affine_sample():
    # p=1, k=1, n=m=1: prediction = d0 + d1 x, loss = (pred - y)^2
    rng = np.random.default_rng(4)
    model = random_model(rng, 1, 1, k=1, p=1, scale=0.4)
    x, y = 0.7, -0.3
    d = model.map.delta
    pred = d[0, 1] + d[1, 1] * x
    data = Dataset(np.array([[x]]), np.array([[y]]), ["x"], ["y"])
    loss, grads = loss_and_gradient(model, data)
    np.testing.assert_allclose(loss, (pred - y) ** 2, rtol=1e-14)
    np.testing.assert_allclose(grads["delta"][0, 1], 2 * (pred - y), rtol=1e-13)
    np.testing.assert_allclose(grads["delta"][1, 1], 2 * (pred - y) * x, rtol=1e-13)
    np.testing.assert_allclose(grads["delta"][2, 1], 0.0, atol=1e-18)
    np.testing.assert_allclose(grads["delta"][:, 0], 0.0, atol=1e-18)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    h = 1e-6
    for _ in range(10):
        n = int(rng.integers(1, 3))
        m = int(rng.integers(1, 3))
        l = int(rng.integers(0, 2))
        model = random_model(rng, n, m, l=l, k=int(rng.integers(1, 4)),
                             p=int(rng.integers(1, 4)), init_trainable=True)
        model.init_state = rng.normal(0, 0.1, m + l)
        model.reg_l1 = float(rng.uniform(0, 0.01))
        model.reg_l2 = float(rng.uniform(0, 0.01))
        X = rng.normal(0, 0.6, size=(5, n))
        Y = rng.normal(0, 0.6, size=(5, m))
        _, d_delta, d_init = _loss_grad_arrays(model, X, Y)
        for arr, ana in ((model.map.delta, d_delta),
                         (model.init_state, d_init)):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + h
                lp = _loss_grad_arrays(model, X, Y)[0]
                arr[idx] = orig - h
                lm = _loss_grad_arrays(model, X, Y)[0]
                arr[idx] = orig
                fd = (lp - lm) / (2 * h)
                denom = max(1.0, abs(fd), abs(ana[idx]))
                assert abs(ana[idx] - fd) / denom < 1e-5


def test_multi_target_width_is_structural():
    rng = np.random.default_rng(6)
    model = random_model(rng, 2, 2, k=2, p=2)
    assert predict(model, rng.normal(size=(5, 2))).shape == (5, 2)


def test_fit_constant_target_converges():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(64, 2))
    data = Dataset(X, np.full((64, 1), 0.7), ["a", "b"], ["y"])
    model = TmpnnModel.create(2, 1, order=2, steps=2)
    report = fit(model, data, config=TrainConfig(epochs=1200, batch_size="full",
                                                 shuffle_seed=0))
    assert report.final_train_mse < 1e-4


def test_fit_deterministic():
    data_rng = np.random.default_rng(8)
    X = data_rng.uniform(-1, 1, size=(60, 2))
    Y = (X[:, :1] * X[:, 1:]) + 0.5
    data = Dataset(X, Y, ["a", "b"], ["y"])

    def run():
        model = TmpnnModel.create(2, 1, order=2, steps=3)
        report = fit(model, data, config=TrainConfig(epochs=40, batch_size=16,
                                                     shuffle_seed=3))
        return report.train_losses, model.map.delta

    losses1, delta1 = run()
    losses2, delta2 = run()
    assert losses1 == losses2
    np.testing.assert_array_equal(delta1, delta2)


def test_standardization_round_trip():
    rng = np.random.default_rng(9)
    X = rng.uniform(5.0, 9.0, size=(50, 2))
    Y = X[:, :1] - 2 * X[:, 1:]
    data = Dataset(X, Y, ["a", "b"], ["y"])
    config = TrainConfig(epochs=30, batch_size=16, shuffle_seed=1)

    model_a = TmpnnModel.create(2, 1, order=2, steps=2, standardize=True)
    fit(model_a, data, config=config)

    mean, scale = X.mean(axis=0), X.std(axis=0)
    Xs = (X - mean) / scale
    model_b = TmpnnModel.create(2, 1, order=2, steps=2, standardize=False)
    fit(model_b, Dataset(Xs, Y, ["a", "b"], ["y"]), config=config)

    Xnew = rng.uniform(5.0, 9.0, size=(10, 2))
    np.testing.assert_array_equal(predict(model_a, Xnew),
                                  predict(model_b, (Xnew - mean) / scale))


def test_init_state_training():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(40, 1))
    data = Dataset(X, X + 1.0, ["x"], ["y"])
    model = TmpnnModel.create(1, 1, order=1, steps=2, init_trainable=True)
    before = model.init_state.copy()
    loss, grads = loss_and_gradient(model, data)
    assert "init_state" in grads
    assert np.any(grads["init_state"] != 0)
    fit(model, data, config=TrainConfig(epochs=50, batch_size="full"))
    assert np.any(model.init_state != before)


def test_early_stopping_restores_best_weights():
    rng = np.random.default_rng(11)
    X = rng.uniform(-1, 1, size=(24, 1))
    Y = np.sin(3 * X) + 0.3 * rng.normal(size=(24, 1))
    train = Dataset(X[:16], Y[:16], ["x"], ["y"])
    valid = Dataset(X[16:], Y[16:], ["x"], ["y"])
    model = TmpnnModel.create(1, 1, order=3, steps=3)
    config = TrainConfig(epochs=400, batch_size="full", learning_rate=0.02,
                         early_stop=(20, 0.0))
    report = fit(model, train, valid=valid, config=config)
    assert report.valid_losses is not None
    assert report.final_valid_mse == min(report.valid_losses)
    assert report.valid_losses[report.best_epoch] == min(report.valid_losses)


def test_divergence_error_carries_location():
    # the offending row must be named: row 0 stays finite for 5 cubic
    # steps while row 1 overflows
    model = TmpnnModel.create(1, 1, order=3, steps=5, standardize=False)
    model.map.delta = model.map.delta + 1.0
    with pytest.raises(DivergenceError) as err:
        predict(model, np.array([[0.1], [50.0]]))
    assert err.value.step is not None
    assert err.value.row == 1


def test_training_divergence_aborts_with_guidance():
    rng = np.random.default_rng(12)
    X = rng.uniform(50.0, 100.0, size=(32, 1))
    data = Dataset(X, X, ["x"], ["y"])
    model = TmpnnModel.create(1, 1, order=3, steps=5, standardize=False)
    model.map.delta = model.map.delta + 100.0
    with pytest.raises(TrainingDivergedError) as err:
        fit(model, data, config=TrainConfig(epochs=3, batch_size="full"))
    assert "learning rate" in str(err.value)


def test_divergence_recovery_halves_rate_and_continues():
    # one poisoned outlier row diverges some batches; training must survive
    rng = np.random.default_rng(13)
    X = rng.uniform(-1, 1, size=(63, 1))
    X[0, 0] = 1e8
    data = Dataset(X, np.zeros((63, 1)), ["x"], ["y"])
    model = TmpnnModel.create(1, 1, order=3, steps=4, standardize=False)
    model.map.delta[:, :] = model.map.delta + 0.5
    report = fit(model, data, config=TrainConfig(epochs=2, batch_size=21,
                                                 shuffle_seed=0))
    assert report.diverged_steps > 0
    assert report.epochs_run == 2
    # the poisoned row still diverges on the final full pass; the report
    # says so instead of the fit call failing
    assert np.isinf(report.final_train_mse)


def test_validation_errors():
    model = TmpnnModel.create(2, 1, order=2, steps=2)
    data = Dataset(np.zeros((4, 3)), np.zeros((4, 1)), list("abc"), ["y"])
    with pytest.raises(ValueError):
        fit(model, data)
    with pytest.raises(ValueError):
        loss_and_gradient(model, data)
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size="half")
    with pytest.raises(ValueError):
        TrainConfig(loss="mae")
    with pytest.raises(ValueError):
        TmpnnModel.create(2, 1, order=2, steps=2, init="random")
    with pytest.raises(ValueError):
        TmpnnModel(n_features=2, n_targets=1, n_latent=0, order=2, steps=2,
                   map=identity_weights(4, 2), init_state=np.zeros(1))
    with pytest.raises(ValueError):
        TmpnnModel(n_features=2, n_targets=1, n_latent=0, order=2, steps=2,
                   map=identity_weights(3, 2), init_state=np.zeros(2))


def test_perturbed_init_is_seeded_noise_around_identity():
    a = TmpnnModel.create(2, 1, order=2, steps=2, init="perturbed", seed=5)
    b = TmpnnModel.create(2, 1, order=2, steps=2, init="perturbed", seed=5)
    c = TmpnnModel.create(2, 1, order=2, steps=2, init="perturbed", seed=6)
    np.testing.assert_array_equal(a.map.delta, b.map.delta)
    assert np.any(a.map.delta != c.map.delta)
    spread = np.abs(a.map.delta)
    assert 0 < spread.max() < 0.1


def test_fit_reports_losses_per_epoch():
    rng = np.random.default_rng(14)
    X = rng.uniform(-1, 1, size=(32, 1))
    data = Dataset(X, 0.5 * X, ["x"], ["y"])
    model = TmpnnModel.create(1, 1, order=2, steps=2)
    report = fit(model, data, valid=data,
                 config=TrainConfig(epochs=25, batch_size="full"))
    assert len(report.train_losses) == 25
    assert len(report.valid_losses) == 25
    assert report.epochs_run == 25
    assert report.final_valid_mse == metric_mse(data.Y, predict(model, data.X))
