import numpy as np
import pytest

from chokit.channels import (
    AeHyperparams,
    ae_loss_and_grad,
    fit_linear_ae,
    train_ae_channels,
)
from chokit.datasets import LabeledDataset
from chokit.errors import TrainingDivergedError
from chokit.imaging import SignalEstimate
from chokit.rng import substream


def finite_difference_grad(w, images, targets, step=1e-6):
    """Independent oracle: central differences on every weight."""
    grad = np.zeros_like(w)
    for i in range(w.shape[0]):
        for j in range(w.shape[1]):
            forward = w.copy()
            forward[i, j] += step
            backward = w.copy()
            backward[i, j] -= step
            lf, _ = ae_loss_and_grad(forward, images, targets)
            lb, _ = ae_loss_and_grad(backward, images, targets)
            grad[i, j] = (lf - lb) / (2 * step)
    return grad


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(17)
    images = rng.normal(size=(12, 16))
    labels = rng.integers(0, 2, size=12)
    delta = rng.normal(size=16)
    targets = labels[:, None] * delta[None, :]
    for point in range(5):
        w = rng.normal(scale=0.5, size=(16, 3))
        _, analytic = ae_loss_and_grad(w, images, targets)
        numeric = finite_difference_grad(w, images, targets)
        rel = np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric)
        assert rel < 1e-5


def _always_present_toy():
    # Every image is (1, 0) and signal-present; the optimum is W W^T e1 = e1.
    images = np.tile([1.0, 0.0], (4, 1))
    labels = np.ones(4, dtype=np.uint8)
    return images, labels


def test_toy_problem_reaches_closed_form_minimum():
    images, labels = _always_present_toy()
    targets = images.copy()  # I(g) * delta with delta = (1, 0)
    hp = AeHyperparams(m=1, learning_rate=1e-4, epochs=12_000, minibatch_size=4, init_std=0.01, seed=1)
    w, losses = fit_linear_ae(images, labels, targets, hp, substream(1, "fit"))
    assert losses[-1] < 1e-6
    # Channel is proportional to (+-1, 0).
    direction = w[:, 0] / np.linalg.norm(w[:, 0])
    assert abs(abs(direction[0]) - 1.0) < 1e-3
    assert abs(direction[1]) < 1e-3


def test_train_ae_channels_task_shape_and_tag():
    rng = np.random.default_rng(3)
    images = rng.normal(size=(40, 16))
    labels = np.tile([0, 1], 20).astype(np.uint8)
    ds = LabeledDataset(images, labels, 4)
    sig = SignalEstimate(rng.normal(size=16))
    hp = AeHyperparams(m=3, learning_rate=1e-3, epochs=20, minibatch_size=10, seed=0)
    cm = train_ae_channels(ds, sig, hp)
    assert cm.matrix.shape == (3, 16)
    assert cm.method == "ae_task"
    again = train_ae_channels(ds, sig, hp)
    assert np.array_equal(cm.matrix, again.matrix)


def test_train_ae_channels_traditional_ignores_signal():
    rng = np.random.default_rng(4)
    images = rng.normal(size=(20, 16))
    labels = np.tile([0, 1], 10).astype(np.uint8)
    ds = LabeledDataset(images, labels, 4)
    hp = AeHyperparams(m=2, learning_rate=1e-3, epochs=20, minibatch_size=10, loss_kind="traditional")
    cm = train_ae_channels(ds, None, hp)
    assert cm.method == "ae_traditional"


def test_task_loss_rejects_zero_signal_estimate():
    rng = np.random.default_rng(5)
    ds = LabeledDataset(rng.normal(size=(10, 16)), np.tile([0, 1], 5).astype(np.uint8), 4)
    hp = AeHyperparams(m=2, learning_rate=1e-3, epochs=5, minibatch_size=4)
    with pytest.raises(ValueError):
        train_ae_channels(ds, SignalEstimate(np.zeros(16)), hp)


def test_divergence_reports_epoch():
    images, labels = _always_present_toy()
    hp = AeHyperparams(m=1, learning_rate=1.0, epochs=10, minibatch_size=4, init_std=1e80)
    with pytest.raises(TrainingDivergedError) as err:
        fit_linear_ae(images, labels, images.copy(), hp, substream(0, "fit"))
    assert err.value.epoch == 0


def test_loss_moving_average_non_increasing_late():
    # Reduced version of the training-loss sanity property in the protocol
    # regime (tiny init, small step size, fixed epoch budget): the 50-epoch
    # moving average does not increase over the final 200 epochs.
    rng = np.random.default_rng(6)
    n = 64
    images = rng.normal(size=(100, n)) + 3.0
    labels = np.tile([0, 1], 50).astype(np.uint8)
    delta = np.zeros(n)
    delta[20:26] = 1.0
    targets = labels[:, None] * delta[None, :]
    hp = AeHyperparams(
        m=4, learning_rate=1e-4, epochs=400, minibatch_size=20, init_std=1e-5, seed=2
    )
    _, losses = fit_linear_ae(images, labels, targets, hp, substream(2, "fit"))
    assert np.all(np.isfinite(losses))
    ma = np.convolve(losses, np.ones(50) / 50, mode="valid")
    tail = ma[-200:]
    assert np.all(np.diff(tail) <= 1e-8 * ma[0])


def test_scale_covariance_of_learned_channel():
    # Scaling data and target together rescales the objective by alpha^2;
    # the learned channel spans the same direction on the toy problem.
    images, labels = _always_present_toy()
    targets = images.copy()
    hp = AeHyperparams(m=1, learning_rate=1e-4, epochs=4000, minibatch_size=4, init_std=0.01, seed=3)
    alpha = 2.0
    w1, loss1 = fit_linear_ae(images, labels, targets, hp, substream(3, "fit"))
    w2, loss2 = fit_linear_ae(alpha * images, labels, alpha * targets, hp, substream(3, "fit"))
    assert loss2[-1] == pytest.approx(alpha**2 * loss1[-1], rel=1e-2)
    cos = abs(float(w1[:, 0] @ w2[:, 0]) / (np.linalg.norm(w1) * np.linalg.norm(w2)))
    assert np.arccos(min(cos, 1.0)) < 1e-3


def test_pretrain_phase_runs_and_changes_result():
    from chokit.channels import PretrainConfig

    rng = np.random.default_rng(8)
    images = rng.normal(size=(40, 16))
    labels = np.tile([0, 1], 20).astype(np.uint8)
    ds = LabeledDataset(images, labels, 4)
    sig = SignalEstimate(rng.normal(size=16))
    base = AeHyperparams(m=2, learning_rate=1e-3, epochs=10, minibatch_size=10, seed=4)
    pre = AeHyperparams(
        m=2, learning_rate=1e-3, epochs=10, minibatch_size=10, seed=4,
        pretrain=PretrainConfig(enabled=True, subset_size=20, epochs=10),
    )
    cm_base = train_ae_channels(ds, sig, base)
    cm_pre = train_ae_channels(ds, sig, pre)
    assert not np.array_equal(cm_base.matrix, cm_pre.matrix)


def test_hyperparameter_validation():
    with pytest.raises(ValueError):
        AeHyperparams(m=0, learning_rate=1e-3)
    with pytest.raises(ValueError):
        AeHyperparams(m=2, learning_rate=-1.0)
    with pytest.raises(ValueError):
        AeHyperparams(m=2, learning_rate=1e-3, minibatch_size=5)  # odd
    with pytest.raises(ValueError):
        AeHyperparams(m=2, learning_rate=1e-3, loss_kind="other")
