"""Gridded daily SST datasets: storage, splits, windowing and scaling.

Datasets are time-major ``(ntime, nlat, nlon)`` float32 arrays with NaN marking
land.  Days are plain integer offsets from ``start_date``; calendar dates only
appear when splitting and when reading or writing files.

SSTG layout (all integers little-endian)::

    b"SSTG" | u32 version | u64 header length | UTF-8 JSON header |
    ntime*nlat*nlon float32 values, time-major, then lat, then lon
"""

import csv
import datetime as dt
import json
import math
import struct
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import lfilter

from ._io import atomic_open
from .errors import (BadMagicError, CsvFormatError, FormatError,
                     MixedCellError, SizeMismatchError, VersionError)

SSTG_MAGIC = b"SSTG"
SSTG_VERSION = 1
MISSING_SENTINEL = -9999.0
NORM_LOW, NORM_HIGH = 0.1, 0.9


def parse_date(value):
    if isinstance(value, dt.date):
        return value
    return dt.date.fromisoformat(str(value).strip())


@dataclass
class GridDataset:
    values: np.ndarray
    start_date: dt.date
    lat0: float = 0.0
    lon0: float = 0.0
    dlat: float = 0.25
    dlon: float = 0.25

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 3:
            raise ValueError(f"values must be (ntime, nlat, nlon), got {v.shape}")
        self.values = v
        self.start_date = parse_date(self.start_date)
        nan = np.isnan(v)
        mixed = nan.any(axis=0) & ~nan.all(axis=0)
        if mixed.any():
            i, j = np.argwhere(mixed)[0]
            raise MixedCellError(f"cell ({i}, {j}) is missing on some days "
                                 f"only; {int(mixed.sum())} mixed cells")

    @property
    def ntime(self):
        return self.values.shape[0]

    @property
    def nlat(self):
        return self.values.shape[1]

    @property
    def nlon(self):
        return self.values.shape[2]

    @property
    def shape(self):
        return (self.nlat, self.nlon, self.ntime)

    @property
    def end_date(self):
        return self.date_of(self.ntime - 1)

    def sea_mask(self):
        return ~np.isnan(self.values[0]) if self.ntime else np.zeros(
            (self.nlat, self.nlon), dtype=bool)

    def sea_cells(self):
        """Sea cell indices in row-major order."""
        return [tuple(int(a) for a in ij) for ij in np.argwhere(self.sea_mask())]

    def series(self, i, j):
        return self.values[:, i, j].astype(np.float64)

    def date_of(self, t):
        return self.start_date + dt.timedelta(days=int(t))

    def index_of(self, date):
        return (parse_date(date) - self.start_date).days

    def days(self, first, last):
        """Sub-dataset covering day indices ``first..last`` inclusive."""
        if not 0 <= first <= last < self.ntime:
            raise ValueError(f"day range [{first}, {last}] outside "
                             f"[0, {self.ntime - 1}]")
        return replace(self, values=self.values[first:last + 1],
                       start_date=self.date_of(first))

    def between(self, start, end):
        return self.days(self.index_of(start), self.index_of(end))


def _sstg_header(g):
    return {
        "nlat": g.nlat, "nlon": g.nlon, "ntime": g.ntime,
        "start_date": g.start_date.isoformat(),
        "lat0": g.lat0, "lon0": g.lon0, "dlat": g.dlat, "dlon": g.dlon,
        "missing": "nan",
    }


def save_grid(g, path):
    header = json.dumps(_sstg_header(g)).encode("utf-8")
    with atomic_open(path, "wb") as fh:
        fh.write(SSTG_MAGIC)
        fh.write(struct.pack("<IQ", SSTG_VERSION, len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(g.values, dtype="<f4").tobytes())


def load_grid(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != SSTG_MAGIC:
        raise BadMagicError(f"{path}: bad magic {raw[:4]!r}, expected {SSTG_MAGIC!r}")
    if len(raw) < 16:
        raise SizeMismatchError(f"{path}: truncated preamble ({len(raw)} bytes)")
    version, hlen = struct.unpack_from("<IQ", raw, 4)
    if version != SSTG_VERSION:
        raise VersionError(f"{path}: unsupported SSTG version {version}")
    if len(raw) < 16 + hlen:
        raise SizeMismatchError(f"{path}: truncated header")
    try:
        header = json.loads(raw[16:16 + hlen].decode("utf-8"))
        nlat, nlon, ntime = (int(header[k]) for k in ("nlat", "nlon", "ntime"))
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: unreadable header: {exc}") from exc
    expected = 16 + hlen + 4 * nlat * nlon * ntime
    if len(raw) != expected:
        raise SizeMismatchError(f"{path}: {len(raw)} bytes on disk, header "
                                f"implies {expected}")
    values = np.frombuffer(raw, dtype="<f4", offset=16 + hlen)
    return GridDataset(values.reshape(ntime, nlat, nlon).astype(np.float32),
                       parse_date(header["start_date"]),
                       float(header["lat0"]), float(header["lon0"]),
                       float(header["dlat"]), float(header["dlon"]))


@dataclass
class WindowSet:
    k: int
    l: int
    inputs: np.ndarray   # (n, k)
    targets: np.ndarray  # (n, l)

    def __len__(self):
        return self.inputs.shape[0]

    def map(self, fn):
        return WindowSet(self.k, self.l, fn(self.inputs), fn(self.targets))


def window_series(series, k, l):
    """Stride-1 supervised pairs: days ``[j, j+k)`` predict ``[j+k, j+k+l)``."""
    series = np.asarray(series, dtype=np.float64)
    if k < 1 or l < 1:
        raise ValueError(f"k and l must be >= 1, got k={k}, l={l}")
    if series.ndim != 1 or series.size < k + l:
        raise ValueError(f"series of length {series.size} too short for "
                         f"k={k}, l={l}")
    n = series.size - k - l + 1
    view = np.lib.stride_tricks.sliding_window_view(series, k + l)[:n]
    return WindowSet(k, l, view[:, :k].copy(), view[:, k:].copy())


def _check_range(train_range):
    lo, hi = (float(v) for v in train_range)
    if not lo < hi:
        raise ValueError(f"degenerate normalization range ({lo}, {hi})")
    return lo, hi


def normalize(series, train_range):
    """Affine map sending ``[min, max]`` onto ``[0.1, 0.9]``."""
    lo, hi = _check_range(train_range)
    return NORM_LOW + (NORM_HIGH - NORM_LOW) * (np.asarray(series) - lo) / (hi - lo)


def denormalize(series, train_range):
    lo, hi = _check_range(train_range)
    return lo + (np.asarray(series) - NORM_LOW) * (hi - lo) / (NORM_HIGH - NORM_LOW)


@dataclass(frozen=True)
class SplitSpec:
    """Inclusive ``(start, end)`` date ranges for the three splits."""

    train: tuple
    validation: tuple
    test: tuple

    def ranges(self):
        return {"train": self.train, "validation": self.validation,
                "test": self.test}

    def to_dict(self):
        return {k: [parse_date(a).isoformat(), parse_date(b).isoformat()]
                for k, (a, b) in self.ranges().items()}

    @classmethod
    def from_dict(cls, d):
        return cls(*(tuple(parse_date(x) for x in d[k])
                     for k in ("train", "validation", "test")))

    @classmethod
    def reference(cls):
        """Fixed split of the 1981-2016 daily record: train to Aug 2012, validate
        Sep-Dec 2012, test 2013-2015."""
        return cls((dt.date(1981, 9, 1), dt.date(2012, 8, 31)),
                   (dt.date(2012, 9, 1), dt.date(2012, 12, 31)),
                   (dt.date(2013, 1, 1), dt.date(2015, 12, 31)))

    @classmethod
    def from_fractions(cls, g, train=0.8, validation=0.05):
        """Contiguous split of the whole span; the test split gets the rest."""
        n_train = int(round(g.ntime * train))
        n_val = int(round(g.ntime * validation))
        if n_train < 1 or n_val < 1 or n_train + n_val >= g.ntime:
            raise ValueError(f"fractions {train}/{validation} leave an empty "
                             f"split for {g.ntime} days")
        d = g.date_of
        return cls((d(0), d(n_train - 1)),
                   (d(n_train), d(n_train + n_val - 1)),
                   (d(n_train + n_val), d(g.ntime - 1)))


def split(g, spec):
    """Return ``(train, validation, test)`` sub-datasets for ``spec``."""
    bounds = []
    for name, (start, end) in spec.ranges().items():
        a, b = g.index_of(start), g.index_of(end)
        if b < a:
            raise ValueError(f"{name} range {start}..{end} is empty")
        if a < 0 or b >= g.ntime:
            raise ValueError(f"{name} range {start}..{end} outside dataset "
                             f"span {g.start_date}..{g.end_date}")
        bounds.append((name, a, b))
    for (n1, _, b1), (n2, a2, _) in zip(bounds, bounds[1:]):
        if a2 <= b1:
            raise ValueError(f"{n1} and {n2} ranges overlap or are out of order")
    return tuple(g.days(a, b) for _, a, b in bounds)


def synth_generate(nlat, nlon, ntime, seed, start_date=dt.date(2000, 1, 1),
                   noise_sigma=0.4, noise_coef=0.8, noise_step=7):
    """Temperature-like synthetic grid.

    Each cell carries an annual sinusoid (period 365.25 days) whose mean
    (10-16 degC), amplitude (8-14 degC) and phase vary smoothly across the
    grid.  On top sits AR(1) noise stepped every ``noise_step`` days with
    coefficient ``noise_coef`` and stationary standard deviation
    ``noise_sigma``, linearly interpolated to daily values.
    """
    if min(nlat, nlon, ntime) < 1:
        raise ValueError("grid dimensions must be positive")
    rng = np.random.default_rng(seed)
    a = np.linspace(0.0, 1.0, nlat)[:, None] * np.ones((1, nlon))
    b = np.ones((nlat, 1)) * np.linspace(0.0, 1.0, nlon)[None, :]

    def smooth_field():
        theta, shift = rng.uniform(0, 2 * np.pi, size=2)
        return 0.5 + 0.5 * np.sin(1.5 * (np.cos(theta) * a + np.sin(theta) * b) + shift)

    mean = 10.0 + 6.0 * smooth_field()
    amp = 8.0 + 6.0 * smooth_field()
    phase = 2 * np.pi * (0.15 + 0.1 * smooth_field())

    day0 = (start_date - dt.date(start_date.year, 1, 1)).days
    t = (day0 + np.arange(ntime, dtype=np.float64))[:, None, None]
    seasonal = mean + amp * np.sin(2 * np.pi * t / 365.25 - phase)

    nknots = (ntime - 1) // noise_step + 2
    innov = rng.standard_normal((nknots, nlat, nlon))
    innov[0] *= noise_sigma
    innov[1:] *= noise_sigma * math.sqrt(1.0 - noise_coef ** 2)
    knots = lfilter([1.0], [1.0, -noise_coef], innov, axis=0)
    pos = np.arange(ntime) / noise_step
    lo = np.floor(pos).astype(int)
    w = (pos - lo)[:, None, None]
    noise = (1.0 - w) * knots[lo] + w * knots[lo + 1]
    return GridDataset((seasonal + noise).astype(np.float32), start_date,
                       lat0=37.125, lon0=117.375, dlat=0.25, dlon=0.25)


def _axis_index(value, origin, step, row, column):
    pos = (value - origin) / step
    idx = int(round(pos))
    if idx < 0 or abs(pos - idx) > 1e-6:
        raise CsvFormatError(f"row {row}: {column}={value} is not on the grid "
                             f"(origin {origin}, spacing {step})", row, column)
    return idx


def convert_csv(path_in, geometry=None):
    """Read ``date,lat,lon,sst`` rows into a :class:`GridDataset`.

    ``geometry`` is an optional ``(lat0, lon0, dlat, dlon)`` tuple; when omitted
    the grid is inferred from the distinct coordinates in the file.  Rows
    equal to the -9999 sentinel, and (day, cell) pairs absent from the file,
    become NaN.
    """
    records = []
    with open(path_in, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["date", "lat", "lon", "sst"]:
            raise CsvFormatError(f"row 1: expected header date,lat,lon,sst, "
                                 f"got {header}", 1)
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise CsvFormatError(f"row {row_no}: expected 4 fields, got "
                                     f"{len(row)}", row_no)
            try:
                day = parse_date(row[0])
            except ValueError:
                raise CsvFormatError(f"row {row_no}, column date: cannot parse "
                                     f"{row[0]!r}", row_no, "date") from None
            nums = []
            for col, text in zip(("lat", "lon", "sst"), row[1:]):
                try:
                    val = float(text)
                except ValueError:
                    raise CsvFormatError(f"row {row_no}, column {col}: cannot "
                                         f"parse {text!r}", row_no, col) from None
                if not math.isfinite(val):
                    raise CsvFormatError(f"row {row_no}, column {col}: "
                                         f"non-finite value", row_no, col)
                nums.append(val)
            records.append((row_no, day, *nums))
    if not records:
        raise CsvFormatError("no data rows", 2)

    if geometry is None:
        lats = np.unique([r[2] for r in records])
        lons = np.unique([r[3] for r in records])
        dlat = float(np.min(np.diff(lats))) if lats.size > 1 else 0.25
        dlon = float(np.min(np.diff(lons))) if lons.size > 1 else 0.25
        geometry = (float(lats[0]), float(lons[0]), dlat, dlon)
    lat0, lon0, dlat, dlon = (float(v) for v in geometry)

    start = min(r[1] for r in records)
    cells = []
    for row_no, day, lat, lon, sst in records:
        cells.append(((day - start).days,
                      _axis_index(lat, lat0, dlat, row_no, "lat"),
                      _axis_index(lon, lon0, dlon, row_no, "lon"),
                      np.nan if sst == MISSING_SENTINEL else sst))
    idx = np.array([c[:3] for c in cells], dtype=np.int64)
    shape = tuple(int(v) + 1 for v in idx.max(axis=0))
    values = np.full(shape, np.nan, dtype=np.float32)
    values[idx[:, 0], idx[:, 1], idx[:, 2]] = [c[3] for c in cells]
    return GridDataset(values, start, lat0, lon0, dlat, dlon)
