"""MSE loss, Adagrad and the mini-batch training loop."""

from dataclasses import dataclass, field

import numpy as np


def mse_loss(pred, target):
    """Return ``(mean((pred - target)**2), d loss / d pred)``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape or pred.size == 0:
        raise ValueError(f"pred shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


@dataclass
class AdagradState:
    accum: list
    lr: float = 0.1
    eps: float = 1e-8

    @classmethod
    def fresh(cls, params, lr=0.1, eps=1e-8):
        return cls([np.zeros_like(p) for p in params], lr, eps)

    def copy(self):
        return AdagradState([a.copy() for a in self.accum], self.lr, self.eps)


def adagrad_step(state, params, grads):
    """One Adagrad update.

    ``accum += g**2`` then ``theta -= lr * g / (sqrt(accum) + eps)``, per
    coordinate.  Returns ``(new_params, new_state)``; the inputs are left
    untouched.
    """
    if not (len(params) == len(grads) == len(state.accum)):
        raise ValueError(f"{len(params)} params, {len(grads)} grads, "
                         f"{len(state.accum)} accumulators")
    new_params, new_accum = [], []
    for p, g, a in zip(params, grads, state.accum):
        if not (p.shape == g.shape == a.shape):
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}, "
                             f"accumulator {a.shape}")
        a = a + g * g
        new_accum.append(a)
        new_params.append(p - state.lr * g / (np.sqrt(a) + state.eps))
    return new_params, AdagradState(new_accum, state.lr, state.eps)


@dataclass
class TrainConfig:
    batch_size: int = 100
    epochs: int = 200
    seed: int = 0
    shuffle: bool = True
    lr: float = 0.1
    eps: float = 1e-8
    patience: int | None = 20

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")


@dataclass
class FitHistory:
    train_loss: list = field(default_factory=list)  # one entry per batch
    val_loss: list = field(default_factory=list)    # one entry per epoch
    best_epoch: int | None = None


def train_step(model, inputs, targets):
    """Apply one Adagrad step on a batch; returns the batch loss.

    The model's optimizer state is created on first use.
    """
    params = model.params()
    loss, grads = model.loss_and_grads(inputs, targets)
    if model.optimizer is None:
        raise ValueError("model has no optimizer state; call fit first or "
                         "attach an AdagradState")
    new_params, model.optimizer = adagrad_step(model.optimizer, params, grads)
    model.set_params(new_params)
    return loss


def epoch_order(seed, epoch, n, shuffle=True):
    """Window visiting order for one epoch, keyed on ``(seed, epoch)`` so a
    resumed run replays exactly the same order."""
    if not shuffle:
        return np.arange(n)
    return np.random.default_rng([seed, epoch]).permutation(n)


def validation_loss(model, windows):
    pred = model.forward_batch(windows.inputs)
    return mse_loss(pred, windows.targets)[0]


def fit(model, windows, cfg, validation=None):
    """Mini-batch Adagrad training; mutates and returns ``model``.

    Batch gradients are averaged over the batch.  With a validation set the
    parameters (and optimizer state) with the lowest validation loss are kept,
    counting the starting point as a candidate, and training stops after ``cfg.patience`` epochs without
    improvement.  Without one the final parameters are kept.

    Returns ``(model, FitHistory)``.
    """
    if len(windows) == 0:
        raise ValueError("cannot fit on an empty window set")
    if (windows.k, windows.l) != (model.config.k, model.config.l):
        raise ValueError(f"windows have k={windows.k}, l={windows.l}; model "
                         f"expects k={model.config.k}, l={model.config.l}")
    history = FitHistory()
    if cfg.epochs == 0:
        return model, history
    if model.optimizer is None:
        model.optimizer = AdagradState.fresh(model.params(), cfg.lr, cfg.eps)

    best, best_loss, stale = None, np.inf, 0
    if validation is not None and len(validation) > 0:
        best, best_loss = model.snapshot(), validation_loss(model, validation)
        history.best_epoch = model.epoch
    n = len(windows)
    for _ in range(cfg.epochs):
        order = epoch_order(cfg.seed, model.epoch, n, cfg.shuffle)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            history.train_loss.append(
                train_step(model, windows.inputs[idx], windows.targets[idx]))
        model.epoch += 1
        if validation is None or len(validation) == 0:
            continue
        vloss = validation_loss(model, validation)
        history.val_loss.append(vloss)
        if vloss < best_loss:
            best, best_loss, stale = model.snapshot(), vloss, 0
            history.best_epoch = model.epoch
        else:
            stale += 1
            if cfg.patience is not None and stale >= cfg.patience:
                break
    if best is not None:
        model.restore(best)
    return model, history
