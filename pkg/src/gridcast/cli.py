"""``gridcast`` command-line interface.

Settings resolve in three layers: built-in defaults, then an optional TOML
file given with ``--config`` (keys spelled like the long flags, with or
without dashes), then flags on the command line.  The resolved settings are
printed as one ``config {...}`` line before any work starts.
"""

import argparse
import datetime as dt
import json
import os
import sys

import numpy as np
import tomli

from . import __version__
from ._io import atomic_open
from .checkpoint import load_checkpoint, save_checkpoint
from .data import (SplitSpec, convert_csv, load_grid, parse_date, save_grid,
                   split, synth_generate)
from .errors import FormatError
from .evaluation import (area_average, lstm_cell_forecast, metric_report,
                         persistence_cell_forecast, svr_cell_forecast, write_report)
from .model import BlockConfig, train_grid, update_online, predict
from .optim import TrainConfig
from .svr import SvrConvergenceError

# prediction length -> history length used for the Bohai experiments
DEFAULT_K = {1: 10, 3: 15, 7: 30, 30: 120}


class UsageError(Exception):
    pass


def _int_list(text):
    return [int(v) for v in str(text).replace(" ", "").split(",") if v]


def _cell_list(text):
    cells = []
    for part in str(text).replace(" ", "").split(";"):
        if part:
            i, j = part.split(",")
            cells.append((int(i), int(j)))
    return cells


def _date_range(text):
    a, b = str(text).split(":")
    return parse_date(a), parse_date(b)


class Options:
    """Declares one subcommand's settings and resolves them."""

    def __init__(self, parser):
        self.parser = parser
        self.specs = {}
        parser.add_argument("--config", help="TOML file with default settings")

    def add(self, name, type=str, default=None, help=None, required=False):
        self.specs[name] = (type, default, required)
        self.parser.add_argument("--" + name, type=str, default=argparse.SUPPRESS,
                                 help=help, metavar=name.upper().replace("-", "_"))

    def resolve(self, ns):
        values = {k: d for k, (_, d, _) in self.specs.items()}
        if getattr(ns, "config", None):
            with open(ns.config, "rb") as fh:
                data = tomli.load(fh)
            for key, val in data.items():
                name = key.replace("_", "-")
                if name not in self.specs:
                    raise UsageError(f"unknown config key {key!r}")
                values[name] = val
        for name in self.specs:
            attr = name.replace("-", "_")
            if hasattr(ns, attr):
                values[name] = getattr(ns, attr)
        out = {}
        for name, (conv, _, required) in self.specs.items():
            val = values[name]
            if val is None:
                if required:
                    raise UsageError(f"missing required setting {name!r}")
                out[name] = None
                continue
            try:
                out[name] = conv(val) if not isinstance(val, bool) else val
            except (TypeError, ValueError) as exc:
                raise UsageError(f"invalid value for {name!r}: {val!r} ({exc})") from None
        return out


def _flag(text):
    if isinstance(text, bool):
        return text
    t = str(text).lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _add_block(opts):
    opts.add("k", int, help="history length in days (default: 10, 15, 30, 120 for l = 1, 3, 7, 30, else 4*l)")
    opts.add("l", int, 7, help="prediction length in days")
    opts.add("units-r", int, 6, help="LSTM hidden units")
    opts.add("l-r", int, 1, help="number of LSTM layers")
    opts.add("l-fc", int, 1, help="number of dense layers")
    opts.add("fc-units", _int_list, help="dense layer sizes, comma separated")
    opts.add("variant", str, "paper", help="cell output rule: paper or standard")


def _add_training(opts):
    opts.add("lr", float, 0.1)
    opts.add("batch-size", int, 100)
    opts.add("epochs", int, 200)
    opts.add("patience", int, 20, help="early stopping patience; 0 disables")
    opts.add("seed", int, 0)


def _add_split(opts):
    opts.add("split-preset", str, "fractions", help="fractions or reference")
    opts.add("train-frac", float, 0.8)
    opts.add("val-frac", float, 0.05)
    opts.add("train-range", _date_range, help="START:END, inclusive ISO dates")
    opts.add("val-range", _date_range)
    opts.add("test-range", _date_range)


def _block_config(cfg):
    l = cfg["l"]
    k = cfg["k"] if cfg["k"] is not None else DEFAULT_K.get(l, 4 * l)
    cfg["k"] = k
    try:
        return BlockConfig(k=k, l=l, l_r=cfg["l-r"], units_r=cfg["units-r"],
                           l_fc=cfg["l-fc"], fc_units=cfg["fc-units"],
                           variant=cfg["variant"])
    except ValueError as exc:
        raise UsageError(f"invalid block settings (k, l, units-r, l-r, l-fc, "
                         f"fc-units, variant): {exc}") from None


def _train_config(cfg):
    if cfg["batch-size"] < 1:
        raise UsageError("'batch-size' must be >= 1")
    if cfg["epochs"] < 0:
        raise UsageError("'epochs' must be >= 0")
    if cfg["lr"] <= 0:
        raise UsageError("'lr' must be positive")
    patience = cfg["patience"] if cfg["patience"] else None
    return TrainConfig(batch_size=cfg["batch-size"], epochs=cfg["epochs"],
                       seed=cfg["seed"], lr=cfg["lr"], patience=patience)


def _split_spec(cfg, g, fallback=None):
    ranges = [cfg["train-range"], cfg["val-range"], cfg["test-range"]]
    if any(r is not None for r in ranges):
        if not all(r is not None for r in ranges):
            raise UsageError("'train-range', 'val-range' and 'test-range' must be given together")
        return SplitSpec(*ranges)
    if fallback is not None:
        return SplitSpec.from_dict(fallback)
    if cfg["split-preset"] == "reference":
        return SplitSpec.reference()
    if cfg["split-preset"] != "fractions":
        raise UsageError(f"'split-preset' must be fractions or reference, got {cfg['split-preset']!r}")
    try:
        return SplitSpec.from_fractions(g, cfg["train-frac"], cfg["val-frac"])
    except ValueError as exc:
        raise UsageError(f"invalid 'train-frac'/'val-frac': {exc}") from None


def _show(name, cfg):
    printable = {k: (v.isoformat() if isinstance(v, dt.date) else
                     [x.isoformat() for x in v] if isinstance(v, tuple) and v and isinstance(v[0], dt.date)
                     else v) for k, v in cfg.items()}
    print(f"config {json.dumps({'command': name, **printable}, sort_keys=True, default=str)}")


# -- commands ---------------------------------------------------------------

def cmd_synth(cfg):
    g = synth_generate(cfg["nlat"], cfg["nlon"], cfg["ntime"], cfg["seed"],
                       start_date=parse_date(cfg["start-date"]))
    save_grid(g, cfg["out"])
    print(f"wrote {cfg['out']}: shape {g.shape}, {len(g.sea_cells())} sea cells")


def cmd_convert_csv(cfg):
    geo = [cfg[k] for k in ("lat0", "lon0", "dlat", "dlon")]
    if any(v is not None for v in geo) and not all(v is not None for v in geo):
        raise UsageError("'lat0', 'lon0', 'dlat' and 'dlon' must be given together")
    g = convert_csv(cfg["input"], geo if geo[0] is not None else None)
    save_grid(g, cfg["out"])
    print(f"wrote {cfg['out']}: shape {g.shape}, start {g.start_date}")


def cmd_train(cfg):
    config = _block_config(cfg)
    tcfg = _train_config(cfg)
    g = load_grid(cfg["data"])
    spec = _split_spec(cfg, g)
    grid, histories = train_grid(g, spec, config, tcfg, seed=cfg["seed"])
    grid.meta["data"] = os.path.basename(cfg["data"])
    save_checkpoint(grid, cfg["out"])
    if cfg["history"]:
        with atomic_open(cfg["history"], "w") as fh:
            fh.write("cell_lat_idx,cell_lon_idx,epoch,val_loss\n")
            for (i, j), h in sorted(histories.items()):
                for e, v in enumerate(h.val_loss, start=1):
                    fh.write(f"{i},{j},{e},{v!r}\n")
    print(f"trained {len(histories)} cells; wrote {cfg['out']}")


def cmd_predict(cfg):
    g = load_grid(cfg["data"])
    grid = load_checkpoint(cfg["model"])
    if (g.nlat, g.nlon) != (grid.nlat, grid.nlon):
        raise ValueError(f"data grid ({g.nlat}, {g.nlon}) does not match model "
                         f"grid ({grid.nlat}, {grid.nlon})")
    end = g.index_of(cfg["date"]) if cfg["date"] else g.ntime - 1
    with atomic_open(cfg["out"], "w") as fh:
        fh.write("cell_lat_idx,cell_lon_idx,lead,date,sst\n")
        for i in range(grid.nlat):
            for j in range(grid.nlon):
                m = grid.models[i][j]
                if m is None:
                    continue
                start = end - m.config.k + 1
                if start < 0 or end >= g.ntime:
                    raise ValueError(f"need {m.config.k} days ending at "
                                     f"{g.date_of(end)} inside the data")
                pred = predict(m, g.series(i, j)[start:end + 1])
                for lead, v in enumerate(pred, start=1):
                    fh.write(f"{i},{j},{lead},{g.date_of(end + lead).isoformat()},{v!r}\n")
    print(f"wrote {cfg['out']}")


def _svg(path, truth, series, title):
    width, height, pad = 800, 300, 30
    lo = min(np.nanmin(truth), *(np.nanmin(s) for _, _, s in series))
    hi = max(np.nanmax(truth), *(np.nanmax(s) for _, _, s in series))
    hi = hi if hi > lo else lo + 1.0
    n = len(truth)

    def points(y):
        xs = pad + (width - 2 * pad) * np.arange(n) / max(n - 1, 1)
        ys = height - pad - (height - 2 * pad) * (np.asarray(y) - lo) / (hi - lo)
        return " ".join(f"{x:.2f},{v:.2f}" for x, v in zip(xs, ys))

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<text x="{pad}" y="18" font-size="13">{title}</text>',
             f'<polyline fill="none" stroke="green" stroke-width="1" points="{points(truth)}"/>']
    for name, colour, y in series:
        lines.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1" '
                     f'points="{points(y)}"><title>{name}</title></polyline>')
    lines.append("</svg>")
    with atomic_open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _sibling(path, tag):
    root, ext = os.path.splitext(path)
    return f"{root}.{tag}{ext or '.csv'}"


def cmd_eval(cfg):
    g = load_grid(cfg["data"])
    grid = load_checkpoint(cfg["model"])
    if (g.nlat, g.nlon) != (grid.nlat, grid.nlon):
        raise ValueError(f"data grid ({g.nlat}, {g.nlon}) does not match model "
                         f"grid ({grid.nlat}, {grid.nlon})")
    spec = _split_spec(cfg, g, fallback=grid.meta.get("split"))
    parts = dict(zip(("train", "validation", "test"), split(g, spec)))
    if cfg["split"] not in parts:
        raise UsageError(f"'split' must be train, validation or test, got {cfg['split']!r}")
    part = parts[cfg["split"]]
    baselines = [b for b in (cfg["baseline"] or "").split(",") if b and b != "none"]
    for b in baselines:
        if b not in ("persistence", "svr"):
            raise UsageError(f"unknown 'baseline' {b!r}")

    results = {"lstm": {}, **{b: {} for b in baselines}}
    curves = {}
    for i, j, m in grid.cells():
        k, l = m.config.k, m.config.l
        series = part.series(i, j)
        pred, truth = lstm_cell_forecast(m, series)
        results["lstm"][(i, j)] = metric_report(pred, truth)
        curves[(i, j)] = {"truth": truth[:, 0], "lstm": pred[:, 0]}
        if "persistence" in baselines:
            p, t = persistence_cell_forecast(series, k, l)
            results["persistence"][(i, j)] = metric_report(p, t)
        if "svr" in baselines:
            p, t = svr_cell_forecast(parts["train"].series(i, j), series, k, l, m.norm,
                                     C=cfg["svr-c"], epsilon=cfg["svr-epsilon"],
                                     sigma=cfg["svr-sigma"], max_train=cfg["svr-max-train"])
            results["svr"][(i, j)] = metric_report(p, t)
            curves[(i, j)]["svr"] = p[:, 0]

    mask = grid.sea_mask()
    for name, per_cell in results.items():
        path = cfg["report"] if name == "lstm" else _sibling(cfg["report"], name)
        rows = [(i, j, grid.models[i][j].config.l, r) for (i, j), r in sorted(per_cell.items())]
        write_report(path, rows)
        avg = area_average(per_cell, mask)
        print(f"{name}: area-average rmse {avg.rmse:.4f} acc {avg.acc:.4f} -> {path}")

    if cfg["plot"]:
        cell = _cell_list(cfg["plot-cell"])[0] if cfg["plot-cell"] else grid.cells()[0][:2]
        if cell not in curves:
            raise ValueError(f"plot cell {cell} is not a sea cell")
        c = curves[cell]
        series = [("lstm", "red", c["lstm"])]
        if "svr" in c:
            series.append(("svr", "blue", c["svr"]))
        _svg(cfg["plot"], c["truth"], series, f"cell {cell}: lead-1 forecast vs observed")


def cmd_sweep(cfg):
    param = cfg["param"].replace("-", "_")
    if param not in ("units_r", "l_r", "l_fc"):
        raise UsageError(f"'param' must be units_r, l_r or l_fc, got {cfg['param']!r}")
    values = cfg["values"]
    if not values:
        raise UsageError("'values' must list at least one candidate")
    tcfg = _train_config(cfg)
    for v in values:
        _block_config({**cfg, param.replace("_", "-"): v})
    g = load_grid(cfg["data"])
    spec = _split_spec(cfg, g)
    if cfg["cells"]:
        cells = cfg["cells"]
        sea = g.sea_mask()
        for i, j in cells:
            if not (0 <= i < g.nlat and 0 <= j < g.nlon) or not sea[i, j]:
                raise UsageError(f"'cells' entry ({i}, {j}) is not a sea cell")
    else:
        sea = g.sea_cells()
        rng = np.random.default_rng(cfg["seed"])
        pick = sorted(rng.choice(len(sea), size=min(cfg["n-cells"], len(sea)), replace=False))
        cells = [sea[p] for p in pick]

    _, _, test = split(g, spec)
    table = {}
    for v in values:
        block = dict(cfg)
        block[param.replace("_", "-")] = v
        if param == "l_fc" and cfg["fc-units"] is None:
            block["fc-units"] = [block["l"]] * v
        config = _block_config(block)
        grid, _ = train_grid(g, spec, config, tcfg, seed=cfg["seed"], cells=cells)
        for i, j in cells:
            pred, truth = lstm_cell_forecast(grid.models[i][j], test.series(i, j))
            table[(v, (i, j))] = metric_report(pred, truth)

    labels = [f"c{i}_{j}" for i, j in cells]
    with atomic_open(cfg["report"], "w") as fh:
        fh.write(",".join(["param", "value", "metric", *labels]) + "\n")
        for v in values:
            for metric in ("rmse", "acc"):
                row = [repr(getattr(table[(v, c)], metric)) for c in cells]
                fh.write(",".join([param, str(v), metric, *row]) + "\n")
        best_rmse = [str(min(values, key=lambda v: table[(v, c)].rmse)) for c in cells]
        best_acc = [str(max(values, key=lambda v: table[(v, c)].acc)) for c in cells]
        fh.write(",".join([param, "best", "rmse", *best_rmse]) + "\n")
        fh.write(",".join([param, "best", "acc", *best_acc]) + "\n")
    print(f"swept {param} over {values} on {len(cells)} cells; wrote {cfg['report']}")


def cmd_update(cfg):
    if cfg["epochs"] < 0:
        raise UsageError("'epochs' must be >= 0")
    if cfg["batch-size"] < 1:
        raise UsageError("'batch-size' must be >= 1")
    data = load_grid(cfg["data"])
    g = data.between(*cfg["range"]) if cfg["range"] else data
    val = data.between(*cfg["val-range"]) if cfg["val-range"] else None
    grid = load_checkpoint(cfg["model"])
    tcfg = TrainConfig(batch_size=cfg["batch-size"], epochs=cfg["epochs"])
    updated = update_online(grid, g, cfg["epochs"], tcfg, validation=val)
    save_checkpoint(updated, cfg["out"])
    print(f"updated {len(updated.cells())} cells for {cfg['epochs']} epochs; wrote {cfg['out']}")


def build_parser():
    parser = argparse.ArgumentParser(prog="gridcast",
                                     description="Per-cell LSTM forecasting of gridded daily SST.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    commands = {}

    def command(name, fn, help):
        opts = Options(sub.add_parser(name, help=help))
        commands[name] = (fn, opts)
        return opts

    o = command("synth", cmd_synth, "generate a synthetic SSTG grid")
    o.add("out", required=True)
    o.add("nlat", int, 4)
    o.add("nlon", int, 4)
    o.add("ntime", int, 7305)
    o.add("seed", int, 0)
    o.add("start-date", str, "2000-01-01")

    o = command("convert-csv", cmd_convert_csv, "convert date,lat,lon,sst CSV to SSTG")
    o.add("input", required=True)
    o.add("out", required=True)
    for name in ("lat0", "lon0", "dlat", "dlon"):
        o.add(name, float)

    o = command("train", cmd_train, "train one block per sea cell")
    o.add("data", required=True)
    o.add("out", required=True)
    o.add("history", help="optional CSV of per-epoch validation loss")
    _add_block(o)
    _add_training(o)
    _add_split(o)

    o = command("predict", cmd_predict, "forecast the days after a date")
    o.add("data", required=True)
    o.add("model", required=True)
    o.add("out", required=True)
    o.add("date", help="last observed day (default: end of data)")

    o = command("eval", cmd_eval, "score a model on one split")
    o.add("data", required=True)
    o.add("model", required=True)
    o.add("report", required=True)
    o.add("split", str, "test")
    o.add("baseline", str, "none", help="comma list of persistence, svr")
    o.add("svr-c", float, 10.0)
    o.add("svr-epsilon", float, 0.01)
    o.add("svr-sigma", float, 1.6)
    o.add("svr-max-train", int, 1500)
    o.add("plot", help="write an SVG of lead-1 forecasts for one cell")
    o.add("plot-cell", help="I,J of the plotted cell (default: first sea cell)")
    _add_split(o)

    o = command("sweep", cmd_sweep, "compare candidate values of one hyperparameter")
    o.add("data", required=True)
    o.add("report", required=True)
    o.add("param", str, "units_r")
    o.add("values", _int_list, [3, 4, 5, 6, 7])
    o.add("cells", _cell_list, help="I,J;I,J;... (default: random sea cells)")
    o.add("n-cells", int, 5)
    _add_block(o)
    _add_training(o)
    _add_split(o)

    o = command("update", cmd_update, "continue training a model on new observations")
    o.add("data", required=True)
    o.add("model", required=True)
    o.add("out", required=True)
    o.add("range", _date_range, help="START:END subset of the data to train on")
    o.add("val-range", _date_range,
          help="START:END subset used to pick the best epoch (default: keep the last)")
    o.add("epochs", int, 10)
    o.add("batch-size", int, 100)
    return parser, commands


def main(argv=None):
    parser, commands = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    fn, opts = commands[ns.command]
    try:
        cfg = opts.resolve(ns)
        _show(ns.command, cfg)
        fn(cfg)
    except UsageError as exc:
        print(f"gridcast {ns.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FormatError, OSError, SvrConvergenceError, tomli.TOMLDecodeError) as exc:
        print(f"gridcast {ns.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
