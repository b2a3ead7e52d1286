"""Binary checkpoint files.

Layout (all integers uint32 little-endian)::

    b"XDIMCKPT" | version | len | config text (UTF-8 "key=value" lines)
    | n_params | per param: len | name | rank | dims... | float32 LE data

Parameters are stored row-major as 32-bit floats, so float32 networks
round-trip bit-exactly.
"""

from __future__ import annotations

import io
import os
import struct
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from catan_xdim.network import NetworkConfig, NetworkParams, param_shapes

MAGIC = b"XDIMCKPT"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _config_text(config: NetworkConfig, meta: dict) -> str:
    lines = [f"{k}={v}" for k, v in asdict(config).items()]
    lines += [f"meta.{k}={v}" for k, v in meta.items()]
    return "\n".join(lines)


def _parse_config(text: str) -> tuple[NetworkConfig, dict]:
    kwargs, meta = {}, {}
    types = {f.name: f.type for f in fields(NetworkConfig)}
    for line in text.splitlines():
        if not line:
            continue
        key, _, value = line.partition("=")
        if key.startswith("meta."):
            meta[key[5:]] = value
        elif key in types:
            default = getattr(NetworkConfig(), key)
            if isinstance(default, bool):
                kwargs[key] = value == "True"
            else:
                kwargs[key] = type(default)(value)
        else:
            raise CheckpointError(f"unknown config key {key!r} in checkpoint")
    return NetworkConfig(**kwargs), meta


def dumps(params: NetworkParams, meta: dict | None = None) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    text = _config_text(params.config, meta or {}).encode("utf-8")
    buf.write(struct.pack("<I", len(text)))
    buf.write(text)
    buf.write(struct.pack("<I", len(params.arrays)))
    for name, arr in params.arrays.items():
        raw = name.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return buf.getvalue()


def loads(data: bytes) -> tuple[NetworkParams, dict]:
    view = memoryview(data)
    pos = 0

    def take(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointError("truncated checkpoint")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    def u32() -> int:
        return struct.unpack("<I", take(4))[0]

    if bytes(take(len(MAGIC))) != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    version = u32()
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    config, meta = _parse_config(bytes(take(u32())).decode("utf-8"))
    expected = param_shapes(config)
    arrays = {}
    for _ in range(u32()):
        name = bytes(take(u32())).decode("utf-8")
        rank = u32()
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        count = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(take(4 * count), dtype="<f4").reshape(dims)
        arrays[name] = arr.astype(np.float32)
    if {k: v.shape for k, v in arrays.items()} != expected:
        raise CheckpointError("parameter names/shapes do not match the stored config")
    if pos != len(view):
        raise CheckpointError("trailing bytes after checkpoint")
    return NetworkParams(config, {k: arrays[k] for k in expected}), meta


def save(path: str | os.PathLike, params: NetworkParams, meta: dict | None = None) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(dumps(params, meta))
    os.replace(tmp, path)


def load(path: str | os.PathLike) -> tuple[NetworkParams, dict]:
    return loads(Path(path).read_bytes())
