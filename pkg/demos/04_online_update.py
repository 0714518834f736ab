"""Shift the climate after training, then feed the new observations back."""

import dataclasses

from gridcast.data import SplitSpec, synth_generate
from gridcast.evaluation import lstm_cell_forecast, rmse
from gridcast.model import BlockConfig, train_grid, update_online
from gridcast.optim import TrainConfig

base = synth_generate(1, 2, 5479, seed=5)
values = base.values.copy()
values[3653:] += 2.0  # the mean jumps after year 10
g = dataclasses.replace(base, values=values)
d = g.date_of

spec = SplitSpec((d(0), d(3287)), (d(3288), d(3652)), (d(5114), d(5478)))
new, val, test = g.between(d(3653), d(4748)), g.between(d(4749), d(5113)), g.between(d(5114), d(5478))

grid, _ = train_grid(g, spec, BlockConfig(k=10, l=1), TrainConfig(epochs=100, patience=20))
updated = update_online(grid, new, 20, TrainConfig(patience=None), validation=val)

for (i, j, old), (_, _, new_model) in zip(grid.cells(), updated.cells()):
    s = test.series(i, j)
    print(f"cell ({i},{j}): original rmse {rmse(*lstm_cell_forecast(old, s)):.4f}  "
          f"updated rmse {rmse(*lstm_cell_forecast(new_model, s)):.4f}  "
          f"(+{new_model.epoch - old.epoch} epochs kept)")
