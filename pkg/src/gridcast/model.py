"""Forecast block (stacked LSTM + dense head) and the per-cell model grid.

A block reads ``k`` normalized daily values, runs them through ``l_r`` LSTM
layers, takes the last hidden vector of the top layer and maps it through
``l_fc`` sigmoid dense layers to ``l`` normalized outputs.  A
:class:`GridForecaster` holds one independent block per sea cell.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
import os

import numpy as np

from .data import denormalize, normalize, split, window_series
from .lstm import LstmParams, LstmState, VARIANTS, init_params, lstm_backward, lstm_forward
from .optim import TrainConfig, fit, mse_loss
from .tensor import sigmoid


@dataclass
class BlockConfig:
    k: int
    l: int
    l_r: int = 1
    units_r: int = 6
    l_fc: int = 1
    fc_units: list | None = None
    variant: str = "paper"

    def __post_init__(self):
        if self.fc_units is None:
            self.fc_units = [self.l] * self.l_fc
        self.fc_units = [int(u) for u in self.fc_units]
        problems = []
        if not self.k >= self.l >= 1:
            problems.append(f"need k >= l >= 1 (k={self.k}, l={self.l})")
        if self.l_r < 1:
            problems.append(f"l_r must be >= 1 (got {self.l_r})")
        if self.units_r < 1:
            problems.append(f"units_r must be >= 1 (got {self.units_r})")
        if self.l_fc < 1:
            problems.append(f"l_fc must be >= 1 (got {self.l_fc})")
        if len(self.fc_units) != self.l_fc:
            problems.append(f"fc_units has {len(self.fc_units)} entries, "
                            f"l_fc is {self.l_fc}")
        elif self.fc_units and self.fc_units[-1] != self.l:
            problems.append(f"last fc_units entry must equal l={self.l}")
        if self.variant not in VARIANTS:
            problems.append(f"variant must be one of {VARIANTS}")
        if problems:
            raise ValueError("; ".join(problems))

    def to_dict(self):
        return asdict(self)


def _init_dense(n_out, n_in, rng):
    s = 1.0 / np.sqrt(n_in)
    return rng.uniform(-s, s, size=(n_out, n_in)), np.zeros((n_out, 1))


@dataclass
class ForecastModel:
    config: BlockConfig
    lstm_layers: list
    fc_weights: list          # [(W, b), ...]
    norm: tuple = (0.0, 1.0)
    seed: int = 0
    epoch: int = 0
    optimizer: object = None  # AdagradState once training starts

    def __post_init__(self):
        lo, hi = self.norm
        if not lo < hi:
            raise ValueError(f"norm min must be < max, got {self.norm}")
        self.norm = (float(lo), float(hi))

    @classmethod
    def init(cls, config, seed=0, norm=(0.0, 1.0)):
        ss = np.random.SeedSequence(seed)
        children = ss.spawn(config.l_r + 1)
        layers = []
        for j in range(config.l_r):
            n_in = 1 if j == 0 else config.units_r
            layers.append(init_params(config.units_r, n_in, children[j]))
        rng = np.random.default_rng(children[-1])
        fc, n_in = [], config.units_r
        for n_out in config.fc_units:
            fc.append(_init_dense(n_out, n_in, rng))
            n_in = n_out
        return cls(config, layers, fc, norm, seed)

    # Packing order: every LSTM layer's (W, b), then every dense layer's (W, b).
    def params(self):
        out = []
        for p in self.lstm_layers:
            out.extend((p.W, p.b))
        for W, b in self.fc_weights:
            out.extend((W, b))
        return out

    def param_names(self):
        names = []
        for j in range(len(self.lstm_layers)):
            names += [f"lstm{j}.W", f"lstm{j}.b"]
        for j in range(len(self.fc_weights)):
            names += [f"fc{j}.W", f"fc{j}.b"]
        return names

    def set_params(self, arrays):
        arrays = list(arrays)
        expected = self.params()
        if len(arrays) != len(expected) or any(
                a.shape != e.shape for a, e in zip(arrays, expected)):
            raise ValueError("parameter list does not match model layout")
        it = iter(arrays)
        self.lstm_layers = [LstmParams(p.d, p.input_dim, next(it), next(it))
                            for p in self.lstm_layers]
        self.fc_weights = [(next(it), next(it)) for _ in self.fc_weights]

    def snapshot(self):
        opt = self.optimizer.copy() if self.optimizer is not None else None
        return [a.copy() for a in self.params()], opt, self.epoch

    def restore(self, snap):
        arrays, opt, epoch = snap
        self.set_params([a.copy() for a in arrays])
        self.optimizer = opt.copy() if opt is not None else None
        self.epoch = epoch

    def copy(self):
        m = replace(self, config=replace(self.config))
        m.restore(self.snapshot())
        return m

    # -- forward / backward -------------------------------------------------

    def _forward(self, inputs):
        X = np.asarray(inputs, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.config.k:
            raise ValueError(f"expected windows of length {self.config.k}, "
                             f"got shape {X.shape}")
        variant = self.config.variant
        seq = [X[:, t][None, :] for t in range(X.shape[1])]
        caches = []
        for p in self.lstm_layers:
            _, cache = lstm_forward(p, seq, LstmState.zeros(p.d, X.shape[0]), variant)
            caches.append(cache)
            seq = [r.h for r in cache.steps]
        acts = [seq[-1]]
        for W, b in self.fc_weights:
            acts.append(sigmoid(W @ acts[-1] + b))
        return acts, caches

    def forward_batch(self, inputs):
        """``(B, k)`` normalized windows -> ``(B, l)`` normalized outputs."""
        acts, _ = self._forward(inputs)
        return acts[-1].T

    def loss_and_grads(self, inputs, targets):
        """Batch-mean MSE and its gradient, packed like :meth:`params`."""
        acts, caches = self._forward(inputs)
        targets = np.asarray(targets, dtype=np.float64)
        loss, dpred = mse_loss(acts[-1].T, targets)
        grad_out = dpred.T
        fc_grads = []
        for (W, b), a_in, a_out in zip(reversed(self.fc_weights),
                                       reversed(acts[:-1]), reversed(acts[1:])):
            dz = grad_out * a_out * (1.0 - a_out)
            fc_grads.append((dz @ a_in.T, dz.sum(axis=1, keepdims=True)))
            grad_out = W.T @ dz
        fc_grads.reverse()

        variant = self.config.variant
        lstm_grads = [None] * len(self.lstm_layers)
        grad_seq = None
        for j in range(len(self.lstm_layers) - 1, -1, -1):
            final = grad_out if j == len(self.lstm_layers) - 1 else None
            g, dxs = lstm_backward(self.lstm_layers[j], caches[j], final,
                                   variant, grad_h_seq=grad_seq)
            lstm_grads[j] = g
            grad_seq = dxs
        grads = []
        for g in lstm_grads:
            grads.extend((g.W, g.b))
        for gW, gb in fc_grads:
            grads.extend((gW, gb))
        return loss, grads


def block_forward(m, window):
    """Length-``k`` normalized window -> length-``l`` normalized prediction."""
    window = np.asarray(window, dtype=np.float64)
    if window.shape != (m.config.k,):
        raise ValueError(f"window has shape {window.shape}, expected ({m.config.k},)")
    return m.forward_batch(window[None, :])[0]


def predict(m, raw_window):
    """Forecast the next ``l`` days in physical units from ``k`` raw values."""
    return denormalize(block_forward(m, normalize(raw_window, m.norm)), m.norm)


def predict_batch(m, raw_windows):
    return denormalize(m.forward_batch(normalize(raw_windows, m.norm)), m.norm)


@dataclass
class GridForecaster:
    nlat: int
    nlon: int
    models: list               # models[i][j]: ForecastModel or None (land)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.models) != self.nlat or any(len(r) != self.nlon for r in self.models):
            raise ValueError(f"models grid does not match shape "
                             f"({self.nlat}, {self.nlon})")

    @classmethod
    def empty(cls, nlat, nlon, meta=None):
        return cls(nlat, nlon, [[None] * nlon for _ in range(nlat)], dict(meta or {}))

    def cells(self):
        """``(i, j, model)`` for every sea cell, row-major."""
        return [(i, j, m) for i, row in enumerate(self.models)
                for j, m in enumerate(row) if m is not None]

    def sea_mask(self):
        return np.array([[m is not None for m in row] for row in self.models],
                        dtype=bool).reshape(self.nlat, self.nlon)

    def predict(self, raw_windows):
        """``raw_windows[:, i, j]`` holds the k-day history of each cell.

        Returns ``(l, nlat, nlon)``; land cells are NaN.
        """
        raw_windows = np.asarray(raw_windows, dtype=np.float64)
        l = next(m.config.l for _, _, m in self.cells())
        out = np.full((l, self.nlat, self.nlon), np.nan)
        for i, j, m in self.cells():
            out[:, i, j] = predict(m, raw_windows[:, i, j])
        return out

    def copy(self):
        return GridForecaster(self.nlat, self.nlon,
                              [[m.copy() if m is not None else None for m in row]
                               for row in self.models], dict(self.meta))


def cell_seed(seed, i, j):
    """Seed for cell ``(i, j)``; independent of which other cells exist."""
    return int(np.random.SeedSequence([int(seed), int(i), int(j)]).generate_state(1)[0])


def cell_windows(series, k, l, norm):
    return window_series(normalize(series, norm), k, l)


def _fit_cell(args):
    i, j, config, cfg, seed, train_series, val_series = args
    norm = (float(np.min(train_series)), float(np.max(train_series)))
    model = ForecastModel.init(config, seed=cell_seed(seed, i, j), norm=norm)
    windows = cell_windows(train_series, config.k, config.l, norm)
    validation = None
    if val_series is not None and val_series.size >= config.k + config.l:
        validation = cell_windows(val_series, config.k, config.l, norm)
    cell_cfg = replace(cfg, seed=model.seed)
    model, history = fit(model, windows, cell_cfg, validation)
    return i, j, model, history


def _continue_cell(args):
    i, j, model, cfg, series, val_series = args
    k, l = model.config.k, model.config.l
    windows = cell_windows(series, k, l, model.norm)
    validation = None
    if val_series is not None and val_series.size >= k + l:
        validation = cell_windows(val_series, k, l, model.norm)
    model, history = fit(model, windows, replace(cfg, seed=model.seed), validation)
    return i, j, model, history


def worker_count(workers=None):
    if workers is None:
        workers = int(os.environ.get("GRIDCAST_THREADS", "1") or 1)
    return max(1, min(int(workers), os.cpu_count() or 1))


def _run_cells(fn, jobs, workers):
    workers = worker_count(workers)
    if workers == 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def train_grid(dataset, split_spec, config, cfg=None, seed=0, cells=None, workers=None):
    """Train one block per sea cell on the training split.

    Each cell's normalization range is the min/max of its training split and
    its initialization and shuffling derive only from ``(seed, i, j)``.
    Returns ``(GridForecaster, {(i, j): FitHistory})``.
    """
    cfg = cfg or TrainConfig()
    train, val, _ = split(dataset, split_spec)
    chosen = dataset.sea_cells() if cells is None else [tuple(c) for c in cells]
    jobs = [(i, j, config, cfg, seed, train.series(i, j), val.series(i, j))
            for i, j in chosen]
    meta = {"split": split_spec.to_dict(), "seed": int(seed),
            "data_start": dataset.start_date.isoformat()}
    grid = GridForecaster.empty(dataset.nlat, dataset.nlon, meta)
    histories = {}
    for i, j, model, history in _run_cells(_fit_cell, jobs, workers):
        grid.models[i][j] = model
        histories[(i, j)] = history
    return grid, histories


def update_online(g, new_data, epochs, cfg=None, workers=None, validation=None):
    """Continue training every cell's block on windows from ``new_data``.

    Training resumes from the stored Adagrad state and epoch counter, reusing
    each cell's normalization constants, so updating with the original
    training data for one epoch equals one more epoch of the original run.
    If ``validation`` (a dataset on the same grid) is given, each cell keeps
    whichever of its starting parameters and its per-epoch parameters scores
    best on it.  Returns a new :class:`GridForecaster`; ``g`` is not modified.
    """
    for name, data in (("new data", new_data), ("validation", validation)):
        if data is not None and (data.nlat, data.nlon) != (g.nlat, g.nlon):
            raise ValueError(f"{name} grid ({data.nlat}, {data.nlon}) does "
                             f"not match model grid ({g.nlat}, {g.nlon})")
    sea = new_data.sea_mask()
    cfg = replace(cfg or TrainConfig(), epochs=int(epochs))
    updated = g.copy()
    jobs = []
    for i, j, model in updated.cells():
        if not sea[i, j]:
            raise ValueError(f"cell ({i}, {j}) has a model but is land in the new data")
        val = validation.series(i, j) if validation is not None else None
        jobs.append((i, j, model, cfg, new_data.series(i, j), val))
    if epochs == 0:
        return updated
    for i, j, model, _ in _run_cells(_continue_cell, jobs, workers):
        updated.models[i][j] = model
    return updated
