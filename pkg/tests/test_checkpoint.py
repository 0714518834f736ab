import json
import struct

import numpy as np
import pytest

from gridcast.checkpoint import load_checkpoint, save_checkpoint
from gridcast.errors import BadMagicError, SizeMismatchError, VersionError
from gridcast.model import BlockConfig, ForecastModel, GridForecaster
from gridcast.optim import AdagradState, train_step


def random_grid(with_optimizer=True):
    rng = np.random.default_rng(7)
    g = GridForecaster.empty(2, 2, {"note": "test"})
    for i in range(2):
        for j in range(2):
            m = ForecastModel.init(BlockConfig(k=5, l=2, units_r=3), seed=10 * i + j,
                                   norm=(rng.normal(5), rng.normal(20)))
            m.set_params([rng.normal(size=p.shape) for p in m.params()])
            if with_optimizer:
                m.optimizer = AdagradState([rng.uniform(size=p.shape) for p in m.params()])
            m.epoch = int(rng.integers(0, 50))
            g.models[i][j] = m
    g.models[1][0] = None
    return g


def assert_same(a, b):
    assert (a.nlat, a.nlon, a.meta) == (b.nlat, b.nlon, b.meta)
    assert [c[:2] for c in a.cells()] == [c[:2] for c in b.cells()]
    for (_, _, x), (_, _, y) in zip(a.cells(), b.cells()):
        assert x.config == y.config and x.norm == y.norm
        assert (x.seed, x.epoch) == (y.seed, y.epoch)
        assert all(p.tobytes() == q.tobytes() for p, q in zip(x.params(), y.params()))
        if x.optimizer is None:
            assert y.optimizer is None
        else:
            assert (x.optimizer.lr, x.optimizer.eps) == (y.optimizer.lr, y.optimizer.eps)
            assert all(p.tobytes() == q.tobytes()
                       for p, q in zip(x.optimizer.accum, y.optimizer.accum))


@pytest.mark.parametrize("with_optimizer", [True, False])
def test_round_trip_bitwise(tmp_path, with_optimizer):
    g = random_grid(with_optimizer)
    save_checkpoint(g, tmp_path / "m.gckp")
    assert_same(g, load_checkpoint(tmp_path / "m.gckp"))


def test_file_layout(tmp_path):
    g = random_grid()
    save_checkpoint(g, tmp_path / "m.gckp")
    raw = (tmp_path / "m.gckp").read_bytes()
    assert raw[:4] == b"GCKP"
    version, hlen = struct.unpack_from("<IQ", raw, 4)
    manifest = json.loads(raw[16:16 + hlen])
    assert version == 1 and manifest["nlat"] == 2 and len(manifest["cells"]) == 3
    blob = raw[16 + hlen:]
    cell = manifest["cells"][0]
    first = cell["tensors"][0]
    assert first["name"] == "lstm0.W" and first["offset"] == 0
    W = np.frombuffer(blob, "<f8", count=12 * 4).reshape(12, 4)
    assert W.tobytes() == g.models[0][0].params()[0].tobytes()


def test_load_errors(tmp_path):
    save_checkpoint(random_grid(), tmp_path / "m.gckp")
    raw = (tmp_path / "m.gckp").read_bytes()
    (tmp_path / "magic").write_bytes(b"GCKX" + raw[4:])
    with pytest.raises(BadMagicError, match="bad magic"):
        load_checkpoint(tmp_path / "magic")
    (tmp_path / "ver").write_bytes(raw[:4] + struct.pack("<I", 2) + raw[8:])
    with pytest.raises(VersionError):
        load_checkpoint(tmp_path / "ver")
    (tmp_path / "trunc").write_bytes(raw[:-8])
    with pytest.raises(SizeMismatchError):
        load_checkpoint(tmp_path / "trunc")
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "nope")


def test_resume_one_batch_equals_uninterrupted(tmp_path):
    rng = np.random.default_rng(0)
    X, Y = rng.uniform(size=(10, 5)), rng.uniform(0.1, 0.9, size=(10, 2))
    g = random_grid()
    straight = load_checkpoint_copy(g, tmp_path / "a.gckp")
    for _, _, m in straight.cells():
        train_step(m, X, Y)
        train_step(m, X, Y)
    resumed = load_checkpoint_copy(g, tmp_path / "b.gckp")
    for _, _, m in resumed.cells():
        train_step(m, X, Y)
    save_checkpoint(resumed, tmp_path / "c.gckp")
    resumed = load_checkpoint(tmp_path / "c.gckp")
    for _, _, m in resumed.cells():
        train_step(m, X, Y)
    assert_same(straight, resumed)


def load_checkpoint_copy(g, path):
    save_checkpoint(g, path)
    return load_checkpoint(path)
