"""A small grid with a land cell: LSTM against persistence and SVR."""

import numpy as np

from gridcast.data import GridDataset, SplitSpec, split, synth_generate
from gridcast.evaluation import (area_average, lstm_cell_forecast, metric_report,
                                 persistence_cell_forecast, svr_cell_forecast)
from gridcast.model import BlockConfig, train_grid
from gridcast.optim import TrainConfig

base = synth_generate(2, 3, 2922, seed=8)
values = base.values.copy()
values[:, 1, 2] = np.nan  # land
g = GridDataset(values, base.start_date, base.lat0, base.lon0, base.dlat, base.dlon)
spec = SplitSpec.from_fractions(g)
train, _, test = split(g, spec)

for l, k in ((1, 10), (7, 30)):
    grid, _ = train_grid(g, spec, BlockConfig(k=k, l=l), TrainConfig())
    scores = {"lstm": {}, "persistence": {}, "svr": {}}
    for i, j, m in grid.cells():
        s = test.series(i, j)
        scores["lstm"][(i, j)] = metric_report(*lstm_cell_forecast(m, s))
        scores["persistence"][(i, j)] = metric_report(*persistence_cell_forecast(s, k, l))
        scores["svr"][(i, j)] = metric_report(*svr_cell_forecast(
            train.series(i, j), s, k, l, m.norm, max_train=600))
    print(f"horizon {l} day(s), {len(grid.cells())} sea cells")
    for name, per_cell in scores.items():
        avg = area_average(per_cell, grid.sea_mask())
        print(f"  {name:<12} rmse {avg.rmse:.4f}  acc {avg.acc:.4f}")
