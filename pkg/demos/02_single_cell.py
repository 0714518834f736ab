"""Train one block on one synthetic cell and compare it with persistence."""

import numpy as np

from gridcast.data import SplitSpec, split, synth_generate
from gridcast.evaluation import lstm_cell_forecast, metric_report, persistence_cell_forecast
from gridcast.model import BlockConfig, train_grid
from gridcast.optim import TrainConfig

g = synth_generate(1, 1, 7305, seed=3)
spec = SplitSpec.from_fractions(g)
for name, (a, b) in spec.ranges().items():
    print(f"{name:>10}: {a} .. {b}")

config = BlockConfig(k=10, l=1)
grid, histories = train_grid(g, spec, config, TrainConfig())  # 200 epochs, patience 20
history = histories[(0, 0)]
print(f"best epoch {history.best_epoch}, validation mse {min(history.val_loss):.2e}")

test = split(g, spec)[2].series(0, 0)
model = grid.models[0][0]
lstm = metric_report(*lstm_cell_forecast(model, test))
pers = metric_report(*persistence_cell_forecast(test, config.k, config.l))
print(f"lstm        rmse {lstm.rmse:.4f}  acc {lstm.acc:.4f}")
print(f"persistence rmse {pers.rmse:.4f}  acc {pers.acc:.4f}")

pred, truth = lstm_cell_forecast(model, test)
for t in np.arange(0, 50, 10):
    print(f"day {t:>3}: observed {truth[t, 0]:6.2f}  forecast {pred[t, 0]:6.2f}")
