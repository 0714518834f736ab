"""Binary checkpoints for a :class:`GridForecaster`.

Layout (integers little-endian)::

    b"GCKP" | u32 version | u64 manifest length | UTF-8 JSON manifest | blob

The manifest lists every sea cell with its block configuration,
normalization range, seed, epoch counter and Adagrad settings, plus one entry
per stored array giving its name, shape and byte offset into the blob.  For
each cell the blob holds the parameters in packing order (every LSTM layer's
``W`` then ``b``, then every dense layer's ``W`` then ``b``) followed by the
Adagrad accumulators in the same order.  Arrays are row-major little-endian
float64.
"""

import json
import struct

import numpy as np

from ._io import atomic_open
from .errors import BadMagicError, FormatError, SizeMismatchError, VersionError
from .model import BlockConfig, ForecastModel, GridForecaster
from .optim import AdagradState

MAGIC = b"GCKP"
VERSION = 1


def _entries(model, offset):
    tensors, chunks = [], []
    groups = [("param", model.params())]
    if model.optimizer is not None:
        groups.append(("accum", model.optimizer.accum))
    for kind, arrays in groups:
        for name, a in zip(model.param_names(), arrays):
            data = np.ascontiguousarray(a, dtype="<f8").tobytes()
            tensors.append({"name": name, "kind": kind, "shape": list(a.shape),
                            "offset": offset})
            chunks.append(data)
            offset += len(data)
    return tensors, chunks, offset


def save_checkpoint(g, path):
    cells, chunks, offset = [], [], 0
    for i, j, m in g.cells():
        tensors, cell_chunks, offset = _entries(m, offset)
        opt = m.optimizer
        cells.append({
            "lat": i, "lon": j,
            "config": m.config.to_dict(),
            "norm": list(m.norm),
            "seed": m.seed,
            "epoch": m.epoch,
            "optimizer": None if opt is None else {"lr": opt.lr, "eps": opt.eps},
            "tensors": tensors,
        })
        chunks.extend(cell_chunks)
    manifest = {"nlat": g.nlat, "nlon": g.nlon, "meta": g.meta,
                "blob_bytes": offset, "cells": cells}
    head = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with atomic_open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(head)))
        fh.write(head)
        for c in chunks:
            fh.write(c)


def _read_array(blob, entry, path):
    shape = tuple(entry["shape"])
    nbytes = 8 * int(np.prod(shape))
    start = entry["offset"]
    if start + nbytes > len(blob):
        raise SizeMismatchError(f"{path}: tensor {entry['name']} runs past end of file")
    return np.frombuffer(blob, dtype="<f8", count=nbytes // 8,
                         offset=start).reshape(shape).astype(np.float64)


def load_checkpoint(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    if len(raw) < 16:
        raise SizeMismatchError(f"{path}: truncated preamble")
    version, hlen = struct.unpack_from("<IQ", raw, 4)
    if version != VERSION:
        raise VersionError(f"{path}: unsupported checkpoint version {version}")
    if len(raw) < 16 + hlen:
        raise SizeMismatchError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(raw[16:16 + hlen].decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: unreadable manifest: {exc}") from exc
    blob = raw[16 + hlen:]
    if len(blob) != manifest["blob_bytes"]:
        raise SizeMismatchError(f"{path}: blob has {len(blob)} bytes, manifest "
                                f"declares {manifest['blob_bytes']}")

    g = GridForecaster.empty(manifest["nlat"], manifest["nlon"], manifest.get("meta"))
    for cell in manifest["cells"]:
        config = BlockConfig(**cell["config"])
        m = ForecastModel.init(config, seed=cell["seed"], norm=tuple(cell["norm"]))
        m.epoch = cell["epoch"]
        params = [_read_array(blob, e, path) for e in cell["tensors"] if e["kind"] == "param"]
        accum = [_read_array(blob, e, path) for e in cell["tensors"] if e["kind"] == "accum"]
        m.set_params(params)
        if cell["optimizer"] is not None:
            m.optimizer = AdagradState(accum, cell["optimizer"]["lr"],
                                       cell["optimizer"]["eps"])
        g.models[cell["lat"]][cell["lon"]] = m
    return g
