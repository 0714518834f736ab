import numpy as np
import pytest

from gridcast.data import WindowSet
from gridcast.model import BlockConfig, ForecastModel
from gridcast.optim import (AdagradState, TrainConfig, adagrad_step, fit,
                            mse_loss, validation_loss)

from oracles import central_differences


def test_mse_zero():
    loss, grad = mse_loss([0.3, 0.4], [0.3, 0.4])
    assert loss == 0 and not grad.any()


def test_mse_hand_values():
    loss, grad = mse_loss([1.0, 1.0], [0.0, 2.0])
    assert loss == 1.0
    np.testing.assert_array_equal(grad, [1.0, -1.0])


def test_mse_gradient_finite_differences():
    rng = np.random.default_rng(0)
    pred, target = rng.normal(size=5), rng.normal(size=5)
    _, grad = mse_loss(pred, target)
    (numeric,) = central_differences(lambda: mse_loss(pred, target)[0], [pred])
    np.testing.assert_allclose(grad, numeric, rtol=0, atol=1e-8)


def test_mse_length_mismatch():
    with pytest.raises(ValueError):
        mse_loss([1.0, 2.0], [1.0])


def test_adagrad_zero_gradient():
    state = AdagradState([np.array([[0.5]])])
    params, new = adagrad_step(state, [np.array([[1.0]])], [np.zeros((1, 1))])
    assert params[0][0, 0] == 1.0 and new.accum[0][0, 0] == 0.5


def test_adagrad_two_step_trace():
    theta = [np.array([[1.0]])]
    g = [np.array([[2.0]])]
    state = AdagradState.fresh(theta, lr=0.1)
    theta, state = adagrad_step(state, theta, g)
    assert state.accum[0][0, 0] == 4.0
    assert theta[0][0, 0] == pytest.approx(0.9, abs=1e-6)
    theta, state = adagrad_step(state, theta, g)
    assert state.accum[0][0, 0] == 8.0
    first = 1.0 - 0.2 / (2.0 + 1e-8)
    assert theta[0][0, 0] == pytest.approx(first - 0.2 / (np.sqrt(8) + 1e-8), abs=1e-15)
    assert theta[0][0, 0] == pytest.approx(0.82929, abs=1e-5)


def test_adagrad_shape_mismatch():
    with pytest.raises(ValueError):
        adagrad_step(AdagradState.fresh([np.zeros((2, 1))]), [np.zeros((2, 1))], [np.zeros((3, 1))])


def test_adagrad_step_sizes_shrink():
    rng = np.random.default_rng(1)
    theta = [np.zeros((3, 1))]
    state = AdagradState.fresh(theta, lr=0.1)
    prev_acc = state.accum[0].copy()
    for _ in range(50):
        g = [rng.normal(size=(3, 1))]
        new_theta, state = adagrad_step(state, theta, g)
        step = np.abs(new_theta[0] - theta[0])
        assert (step <= 0.1 + 1e-12).all()
        assert (state.accum[0] >= prev_acc).all()
        prev_acc = state.accum[0].copy()
        theta = new_theta


def test_adagrad_quadratic_converges():
    theta = [np.zeros((1, 1))]
    state = AdagradState.fresh(theta, lr=0.1)
    for step in range(10000):
        g = [2.0 * (theta[0] - 3.0)]
        theta, state = adagrad_step(state, theta, g)
        if abs(theta[0][0, 0] - 3.0) < 1e-2:
            break
    assert abs(theta[0][0, 0] - 3.0) < 1e-2


def _toy_windows(n=40, k=4, l=2, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.1, 0.9, size=(n, k))
    return WindowSet(k, l, x, np.repeat(x[:, -1:], l, axis=1))


def test_batch_gradient_is_mean_of_example_gradients():
    m = ForecastModel.init(BlockConfig(k=4, l=2, units_r=3), seed=2)
    w = _toy_windows(7)
    _, batch = m.loss_and_grads(w.inputs, w.targets)
    singles = [m.loss_and_grads(w.inputs[i:i + 1], w.targets[i:i + 1])[1] for i in range(7)]
    for b, *per in zip(batch, *singles):
        np.testing.assert_allclose(b, np.mean(per, axis=0), rtol=0, atol=1e-12)


def test_fit_zero_epochs():
    m = ForecastModel.init(BlockConfig(k=4, l=2, units_r=3), seed=2)
    before = [p.copy() for p in m.params()]
    fit(m, _toy_windows(), TrainConfig(epochs=0))
    assert all((a == b).all() for a, b in zip(before, m.params()))
    assert m.optimizer is None


def test_fit_empty_windows():
    m = ForecastModel.init(BlockConfig(k=4, l=2), seed=0)
    with pytest.raises(ValueError):
        fit(m, WindowSet(4, 2, np.zeros((0, 4)), np.zeros((0, 2))), TrainConfig())


def test_fit_constant_target_converges():
    m = ForecastModel.init(BlockConfig(k=3, l=1, units_r=1), seed=0)
    w = WindowSet(3, 1, np.array([[0.2, 0.5, 0.4]]), np.array([[0.7]]))
    _, hist = fit(m, w, TrainConfig(epochs=3000, batch_size=1))
    losses = np.array(hist.train_loss)
    assert (np.diff(losses[10:]) <= 0).all()
    assert losses[-1] < 1e-4


def test_fit_deterministic():
    w = _toy_windows(60)
    runs = []
    for _ in range(2):
        m = ForecastModel.init(BlockConfig(k=4, l=2, units_r=3), seed=4)
        fit(m, w, TrainConfig(epochs=3, batch_size=16, seed=9), _toy_windows(20, seed=1))
        runs.append(b"".join(p.tobytes() for p in m.params()))
    assert runs[0] == runs[1]


def test_fit_keeps_best_validation_epoch():
    w, v = _toy_windows(60), _toy_windows(20, seed=1)
    m = ForecastModel.init(BlockConfig(k=4, l=2, units_r=3), seed=4)
    _, hist = fit(m, w, TrainConfig(epochs=8, batch_size=16, patience=None), v)
    best = int(np.argmin(hist.val_loss)) + 1
    assert hist.best_epoch == best and m.epoch == best
    assert validation_loss(m, v) == min(hist.val_loss)


def test_fit_resume_equals_uninterrupted():
    w = _toy_windows(50)
    a = ForecastModel.init(BlockConfig(k=4, l=2, units_r=3), seed=1)
    fit(a, w, TrainConfig(epochs=3, batch_size=16, seed=3))
    b = ForecastModel.init(BlockConfig(k=4, l=2, units_r=3), seed=1)
    fit(b, w, TrainConfig(epochs=2, batch_size=16, seed=3))
    fit(b, w, TrainConfig(epochs=1, batch_size=16, seed=3))
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a.params(), b.params()))


def test_fit_keeps_start_when_no_epoch_improves():
    v = _toy_windows(30, seed=1)
    m = ForecastModel.init(BlockConfig(k=4, l=2, units_r=3), seed=4)
    fit(m, _toy_windows(60), TrainConfig(epochs=30, batch_size=16, patience=None))
    before = [p.copy() for p in m.params()]
    start_loss = validation_loss(m, v)
    # targets far from the validation relation pull every epoch away from it
    bad = WindowSet(4, 2, v.inputs, np.full((30, 2), 0.9))
    _, hist = fit(m, bad, TrainConfig(epochs=5, batch_size=16, patience=None), v)
    assert min(hist.val_loss) > start_loss
    assert hist.best_epoch == 30 and m.epoch == 30
    assert all(a.tobytes() == b.tobytes() for a, b in zip(before, m.params()))
