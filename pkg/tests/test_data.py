import datetime as dt

import numpy as np
import pytest

from gridcast.data import (GridDataset, SplitSpec, convert_csv, denormalize,
                           load_grid, normalize, save_grid, split,
                           synth_generate, window_series)
from gridcast.errors import (BadMagicError, CsvFormatError, MixedCellError,
                             SizeMismatchError, VersionError)


@pytest.fixture
def random_grid():
    rng = np.random.default_rng(0)
    values = rng.normal(15, 5, size=(30, 4, 4)).astype(np.float32)
    values[:, 0, 3] = np.nan
    return GridDataset(values, dt.date(2001, 3, 1), 37.0, 117.0, 0.25, 0.25)


def test_sstg_round_trip(tmp_path, random_grid):
    path = tmp_path / "g.sstg"
    save_grid(random_grid, path)
    back = load_grid(path)
    assert back.values.tobytes() == random_grid.values.tobytes()
    assert back.shape == (4, 4, 30)
    assert (back.start_date, back.lat0, back.lon0, back.dlat, back.dlon) == (
        dt.date(2001, 3, 1), 37.0, 117.0, 0.25, 0.25)
    raw = path.read_bytes()
    assert raw[:4] == b"SSTG"
    assert int.from_bytes(raw[4:8], "little") == 1


def test_sstg_errors(tmp_path, random_grid):
    path = tmp_path / "g.sstg"
    save_grid(random_grid, path)
    raw = path.read_bytes()
    (tmp_path / "short.sstg").write_bytes(raw[:-10])
    with pytest.raises(SizeMismatchError):
        load_grid(tmp_path / "short.sstg")
    (tmp_path / "magic.sstg").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(BadMagicError):
        load_grid(tmp_path / "magic.sstg")
    (tmp_path / "ver.sstg").write_bytes(raw[:4] + (7).to_bytes(4, "little") + raw[8:])
    with pytest.raises(VersionError):
        load_grid(tmp_path / "ver.sstg")
    with pytest.raises(FileNotFoundError):
        load_grid(tmp_path / "missing.sstg")


def test_mixed_cell_rejected(tmp_path, random_grid):
    values = random_grid.values.copy()
    values[5, 1, 1] = np.nan
    with pytest.raises(MixedCellError):
        GridDataset(values, random_grid.start_date)


def test_bohai_shaped_grid(tmp_path):
    # 16 x 15 cells, 12868 daily values
    values = np.zeros((12868, 16, 15), dtype=np.float32)
    save_grid(GridDataset(values, dt.date(1981, 9, 1)), tmp_path / "bohai.sstg")
    g = load_grid(tmp_path / "bohai.sstg")
    assert g.shape == (16, 15, 12868)
    assert g.end_date == dt.date(2016, 11, 23)


def test_window_counts():
    assert len(window_series(np.arange(2.0), 1, 1)) == 1
    w = window_series(np.arange(40.0), 10, 7)
    assert len(w) == 24
    np.testing.assert_array_equal(w.inputs[3], np.arange(3, 13))
    np.testing.assert_array_equal(w.targets[3], np.arange(13, 20))


@pytest.mark.parametrize("k, l", [(10, 1), (15, 3), (30, 7), (120, 30)])
def test_standard_horizons(k, l):
    w = window_series(np.arange(400.0), k, l)
    assert w.inputs.shape == (400 - k - l + 1, k)
    assert w.targets.shape == (400 - k - l + 1, l)


def test_window_too_short():
    with pytest.raises(ValueError):
        window_series(np.arange(5.0), 4, 2)


def test_normalize():
    assert normalize(3.0, (3.0, 8.0)) == pytest.approx(0.1)
    assert normalize(5.0, (0.0, 10.0)) == pytest.approx(0.5)
    x = np.random.default_rng(1).normal(10, 8, 100)
    np.testing.assert_allclose(denormalize(normalize(x, (-2, 30)), (-2, 30)), x,
                               rtol=0, atol=1e-12)
    with pytest.raises(ValueError):
        normalize(x, (4.0, 4.0))


def test_reference_split_day_counts():
    g = GridDataset(np.zeros((12868, 1, 1), dtype=np.float32), dt.date(1981, 9, 1))
    train, val, test = split(g, SplitSpec.reference())
    assert (train.ntime, val.ntime, test.ntime) == (11323, 122, 1095)
    assert test.start_date == dt.date(2013, 1, 1)


def test_split_errors():
    g = GridDataset(np.zeros((100, 1, 1), dtype=np.float32), dt.date(2000, 1, 1))
    d = g.date_of
    with pytest.raises(ValueError, match="empty"):
        split(g, SplitSpec((d(0), d(49)), (d(51), d(50)), (d(60), d(99))))
    with pytest.raises(ValueError, match="outside"):
        split(g, SplitSpec((d(0), d(49)), (d(50), d(59)), (d(60), d(120))))
    with pytest.raises(ValueError, match="overlap"):
        split(g, SplitSpec((d(0), d(55)), (d(50), d(59)), (d(60), d(99))))


def test_adjacent_split_preserves_days():
    g = GridDataset(np.zeros((731, 2, 2), dtype=np.float32), dt.date(2000, 1, 1))
    spec = SplitSpec((dt.date(2000, 1, 1), dt.date(2000, 12, 31)),
                     (dt.date(2001, 1, 1), dt.date(2001, 2, 28)),
                     (dt.date(2001, 3, 1), dt.date(2001, 12, 31)))
    parts = split(g, spec)
    # 2000 is a leap year: 366 + 59 + 306
    assert [p.ntime for p in parts] == [366, 59, 306]
    assert sum(p.ntime for p in parts) == g.ntime


def test_split_keeps_land_mask(random_grid):
    spec = SplitSpec.from_fractions(random_grid, 0.6, 0.2)
    masks = [p.sea_mask() for p in split(random_grid, spec)]
    assert all((m == random_grid.sea_mask()).all() for m in masks)


def test_synth_deterministic():
    a = synth_generate(3, 2, 400, seed=5)
    b = synth_generate(3, 2, 400, seed=5)
    assert a.values.tobytes() == b.values.tobytes()
    assert a.values.tobytes() != synth_generate(3, 2, 400, seed=6).values.tobytes()


def test_synth_value_bounds():
    g = synth_generate(4, 4, 3000, seed=1)
    # mean in [10, 16], amplitude in [8, 14], noise sd 0.4
    lo, hi = 10 - 14 - 5 * 0.4, 16 + 14 + 5 * 0.4
    assert np.nanmin(g.values) >= lo and np.nanmax(g.values) <= hi
    for i, j in g.sea_cells():
        s = g.series(i, j)
        assert s.max() - s.min() >= 2 * 8 - 5 * 0.4


def test_synth_annual_autocorrelation():
    g = synth_generate(3, 3, 3000, seed=2)
    for i, j in g.sea_cells():
        s = g.series(i, j)
        r = np.corrcoef(s[:-365], s[365:])[0, 1]
        assert r > 0.9


def test_convert_csv(tmp_path):
    path = tmp_path / "in.csv"
    path.write_text("date,lat,lon,sst\n"
                    "2016-01-01,38.125,119.125,5.5\n"
                    "2016-01-01,38.125,119.375,-9999\n"
                    "2016-01-02,38.125,119.125,5.25\n"
                    "2016-01-02,38.125,119.375,-9999\n"
                    "2016-01-03,38.125,119.125,5.0\n"
                    "2016-01-03,38.125,119.375,-9999\n")
    g = convert_csv(path)
    assert g.shape == (1, 2, 3)
    assert np.isnan(g.values[:, 0, 1]).all()
    np.testing.assert_array_equal(g.values[:, 0, 0], [5.5, 5.25, 5.0])
    assert g.start_date == dt.date(2016, 1, 1) and g.dlon == 0.25


def test_convert_csv_ragged_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("date,lat,lon,sst\n2016-01-01,38.0,119.0,5.5\n2016-01-02,38.0,119.0\n")
    with pytest.raises(CsvFormatError, match="row 3") as err:
        convert_csv(path)
    assert err.value.row == 3


def test_convert_csv_bad_number(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("date,lat,lon,sst\n2016-01-01,38.0,119.0,warm\n")
    with pytest.raises(CsvFormatError, match="row 2, column sst"):
        convert_csv(path)
