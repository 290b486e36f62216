"""``CNPW`` checkpoint files.

Layout (little-endian): magic ``CNPW``, u32 format version, u32 header length,
UTF-8 JSON header (architecture, builder arguments, parameter shapes, training
config echo, seed), then every parameter as float64 in header order. PCA
arrays of a PCA+ANN model follow the trainable parameters.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CorruptFileError
from ..kernel import PcaFit
from .graph import ModelGraph, build_model

MAGIC = b"CNPW"
VERSION = 1


def _arrays(model: ModelGraph):
    arrays = list(model.params())
    if model.pca is not None:
        arrays += [model.pca.mean, model.pca.components, model.pca.explained_variance]
    return arrays


def checkpoint_bytes(model: ModelGraph, train_config: dict | None = None) -> bytes:
    header = {
        "arch": model.arch,
        "build_args": model.build_args,
        "input_shape": list(model.input_shape),
        "param_shapes": [list(p.shape) for p in model.params()],
        "pca_shapes": None if model.pca is None else [list(a.shape) for a in _arrays(model)[-3:]],
        "train_config": train_config or {},
        "seed": (train_config or {}).get("seed"),
    }
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in _arrays(model))
    return MAGIC + struct.pack("<II", VERSION, len(raw)) + raw + payload


def save_checkpoint(model: ModelGraph, path, train_config: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(checkpoint_bytes(model, train_config))


def read_checkpoint_header(path) -> dict:
    return _parse(Path(path))[0]


def load_checkpoint(path) -> ModelGraph:
    return _parse(Path(path))[1]


def _parse(path: Path):
    if not path.is_file():
        raise CorruptFileError(f"{path}: checkpoint not found")
    data = path.read_bytes()
    if len(data) < 12:
        raise CorruptFileError(f"{path}: truncated checkpoint ({len(data)} bytes)")
    if data[:4] != MAGIC:
        raise CorruptFileError(f"{path}: not a checkpoint (magic {data[:4]!r})")
    version, hlen = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise CorruptFileError(f"{path}: checkpoint version {version}, this build reads {VERSION}")
    if len(data) < 12 + hlen:
        raise CorruptFileError(f"{path}: truncated checkpoint header")
    try:
        header = json.loads(data[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptFileError(f"{path}: unreadable checkpoint header ({exc})") from None
    shapes = [tuple(s) for s in header["param_shapes"]]
    pca_shapes = [tuple(s) for s in header["pca_shapes"]] if header.get("pca_shapes") else []
    expected = 8 * sum(int(np.prod(s)) for s in shapes + pca_shapes)
    payload = data[12 + hlen:]
    if len(payload) != expected:
        raise CorruptFileError(f"{path}: payload is {len(payload)} bytes, header implies {expected}")
    model = build_model(header["arch"], **header["build_args"])
    if [p.shape for p in model.params()] != shapes:
        raise CorruptFileError(f"{path}: parameter shapes do not match architecture {header['arch']}")
    pos = 0
    arrays = []
    for s in shapes + pca_shapes:
        count = int(np.prod(s))
        arrays.append(np.frombuffer(payload, dtype="<f8", count=count, offset=pos)
                      .reshape(s).astype(np.float64))
        pos += 8 * count
    model.set_params(arrays[:len(shapes)])
    if pca_shapes:
        model.pca = PcaFit(*arrays[len(shapes):])
    return header, model
