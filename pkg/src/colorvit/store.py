"""Named-tensor binary container for checkpoints and preprocessed archives.

Layout, all integers little-endian:

    magic   b"CVTF"          4 bytes
    version uint32           container format version
    hlen    uint64           byte length of the UTF-8 header text
    header  hlen bytes       structured text, see below
    payload                  raw tensor bytes, contiguous, little-endian

Header text is line-oriented with ``[section]`` markers. Sections:
``[container]`` (kind), ``[config]`` (free key = value strings),
``[classes]`` (index = name, in label order), ``[meta]`` (free key = value
strings), and ``[tensors]`` whose lines are

    <name> = <dtype> <dim0,dim1,...> <offset>

with offsets relative to the start of the payload. Writes go to a
temporary file in the target directory and are renamed into place, so a
reader never observes a half-written container.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

MAGIC = b"CVTF"
VERSION = 1

_DTYPES = {"f4": np.dtype("<f4"), "f8": np.dtype("<f8")}
_DTYPE_NAMES = {np.dtype(np.float32): "f4", np.dtype(np.float64): "f8"}


class StoreError(Exception):
    """Base class for container format errors."""


class MagicError(StoreError):
    """File does not start with the container magic bytes."""


class VersionError(StoreError):
    """Container was written with an unsupported format version."""


class TruncatedError(StoreError):
    """File ends before the declared header or payload does."""


class UnknownTensorError(StoreError):
    """A tensor name does not match the consumer's expectations."""


@dataclass
class Container:
    """Parsed container header plus access to the tensor payload."""

    path: str
    version: int
    kind: str
    config: dict[str, str] = field(default_factory=dict)
    class_names: tuple[str, ...] = ()
    meta: dict[str, str] = field(default_factory=dict)
    directory: dict[str, tuple[str, tuple[int, ...], int]] = field(default_factory=dict)
    _payload_start: int = 0

    def tensor_names(self) -> list[str]:
        return list(self.directory)

    def tensor(self, name: str) -> np.ndarray:
        """Read one tensor from the payload."""
        if name not in self.directory:
            raise UnknownTensorError(f"{self.path}: no tensor named {name!r}")
        dtype_name, shape, offset = self.directory[name]
        dtype = _DTYPES[dtype_name]
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * dtype.itemsize
        with open(self.path, "rb") as f:
            f.seek(self._payload_start + offset)
            raw = f.read(nbytes)
        if len(raw) != nbytes:
            raise TruncatedError(f"{self.path}: tensor {name!r} payload is truncated")
        return np.frombuffer(raw, dtype=dtype).reshape(shape).copy()

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: self.tensor(name) for name in self.directory}


def _format_header(kind, config, class_names, meta, directory) -> str:
    lines = ["[container]", f"kind = {kind}"]
    if config:
        lines.append("[config]")
        for key, value in config.items():
            lines.append(f"{key} = {value}")
    if class_names:
        lines.append("[classes]")
        for i, name in enumerate(class_names):
            lines.append(f"{i} = {name}")
    if meta:
        lines.append("[meta]")
        for key, value in meta.items():
            lines.append(f"{key} = {value}")
    lines.append("[tensors]")
    lines.extend(directory)
    return "\n".join(lines) + "\n"


def write_container(
    path,
    tensors: Mapping[str, np.ndarray],
    *,
    kind: str,
    config: Mapping[str, str] | None = None,
    class_names=(),
    meta: Mapping[str, str] | None = None,
) -> None:
    """Write a container atomically (temp file in the same directory, then rename)."""
    path = os.fspath(path)
    entries = []
    payload = []
    offset = 0
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        if arr.dtype not in _DTYPE_NAMES:
            raise StoreError(f"unsupported tensor dtype {arr.dtype} for {name!r}")
        dtype_name = _DTYPE_NAMES[arr.dtype]
        raw = np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes()
        shape_text = ",".join(str(d) for d in arr.shape) if arr.ndim else "scalar"
        entries.append(f"{name} = {dtype_name} {shape_text} {offset}")
        payload.append(raw)
        offset += len(raw)

    header = _format_header(kind, dict(config or {}), tuple(class_names), dict(meta or {}), entries)
    header_bytes = header.encode("utf-8")

    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        for raw in payload:
            f.write(raw)
    os.replace(tmp, path)


def _parse_header(path: str, text: str) -> tuple[str, dict, tuple, dict, dict]:
    kind = ""
    config: dict[str, str] = {}
    classes: dict[int, str] = {}
    meta: dict[str, str] = {}
    directory: dict[str, tuple[str, tuple[int, ...], int]] = {}
    section = None
    for line in text.splitlines():
        line = line.rstrip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            continue
        if " = " not in line:
            raise StoreError(f"{path}: malformed header line {line!r}")
        key, value = line.split(" = ", 1)
        if section == "container":
            if key == "kind":
                kind = value
        elif section == "config":
            config[key] = value
        elif section == "classes":
            classes[int(key)] = value
        elif section == "meta":
            meta[key] = value
        elif section == "tensors":
            parts = value.rsplit(" ", 2)
            if len(parts) != 3:
                raise StoreError(f"{path}: malformed tensor entry {line!r}")
            dtype_name, shape_text, offset_text = parts
            if dtype_name not in _DTYPES:
                raise StoreError(f"{path}: unknown tensor dtype {dtype_name!r}")
            shape = () if shape_text == "scalar" else tuple(int(d) for d in shape_text.split(","))
            directory[key] = (dtype_name, shape, int(offset_text))
        else:
            raise StoreError(f"{path}: line outside any known section: {line!r}")
    class_names = tuple(classes[i] for i in sorted(classes))
    if list(sorted(classes)) != list(range(len(classes))):
        raise StoreError(f"{path}: class indices are not contiguous from 0")
    return kind, config, class_names, meta, directory


def read_container(path) -> Container:
    """Parse a container header; tensor payloads are read lazily."""
    path = os.fspath(path)
    file_size = os.path.getsize(path)
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise MagicError(f"{path}: not a tensor container (bad magic {magic!r})")
        raw = f.read(12)
        if len(raw) != 12:
            raise TruncatedError(f"{path}: truncated before header")
        (version,) = struct.unpack("<I", raw[:4])
        if version != VERSION:
            raise VersionError(f"{path}: format version {version}, expected {VERSION}")
        (hlen,) = struct.unpack("<Q", raw[4:])
        header_bytes = f.read(hlen)
        if len(header_bytes) != hlen:
            raise TruncatedError(f"{path}: truncated header")
        payload_start = f.tell()

    kind, config, class_names, meta, directory = _parse_header(
        path, header_bytes.decode("utf-8")
    )
    for name, (dtype_name, shape, offset) in directory.items():
        count = int(np.prod(shape)) if shape else 1
        end = payload_start + offset + count * _DTYPES[dtype_name].itemsize
        if end > file_size:
            raise TruncatedError(f"{path}: tensor {name!r} extends past end of file")
    return Container(
        path=path,
        version=version,
        kind=kind,
        config=config,
        class_names=class_names,
        meta=meta,
        directory=directory,
        _payload_start=payload_start,
    )
