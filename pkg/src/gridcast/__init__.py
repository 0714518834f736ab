"""Per-cell LSTM forecasting of gridded daily sea surface temperature."""

__version__ = "0.1.0"

from .checkpoint import load_checkpoint, save_checkpoint
from .data import (GridDataset, SplitSpec, WindowSet, convert_csv, denormalize,
                   load_grid, normalize, save_grid, split, synth_generate,
                   window_series)
from .evaluation import (MetricReport, acc, area_average, metric_report,
                         persistence_forecast, rmse)
from .lstm import LstmParams, LstmState, init_params, lstm_backward, lstm_forward, lstm_step
from .model import (BlockConfig, ForecastModel, GridForecaster, block_forward,
                    predict, train_grid, update_online)
from .optim import AdagradState, TrainConfig, adagrad_step, fit, mse_loss
from .svr import rbf_kernel, svr_fit, svr_predict
