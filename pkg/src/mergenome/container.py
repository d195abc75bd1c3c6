"""Single-file tensor container: load, validate, write, and diff checkpoints.

File layout (bit-exact): bytes 0-7 hold a little-endian u64 header length N;
bytes 8..8+N hold a UTF-8 JSON object mapping tensor name to
{"dtype": "F32"|"F16", "shape": [...], "data_offsets": [start, end]} with
offsets relative to byte 8+N; tensor data follows row-major little-endian.
Sorted non-empty ranges must tile the data region exactly (no gaps, no
overlaps, no trailing bytes).  16-bit floats are upcast to 32-bit at load;
everything downstream is float32.
"""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ContainerHeaderError,
    ContainerRangeError,
    DuplicateTensorError,
    NoSharedTensorsError,
    UnsupportedDtypeError,
)

ATTENTION = "attention"
FFN = "ffn"
EMBEDDING = "embedding"
NORM = "norm"
OTHER = "other"
COMPONENT_CLASSES = (ATTENTION, FFN, EMBEDDING, NORM, OTHER)

_DTYPES = {"F32": np.dtype("<f4"), "F16": np.dtype("<f2")}
_LAYER_RE = re.compile(r"\.layers\.(\d+)\.(.*)$")


@dataclass(frozen=True)
class TensorEntry:
    """One named float32 tensor."""

    name: str
    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def numel(self) -> int:
        return int(self.data.size)


def classify_name(name: str) -> tuple[str, int | None]:
    """Map a tensor name to (component class, layer index or None)."""
    m = _LAYER_RE.search(name)
    if m:
        layer = int(m.group(1))
        sub = m.group(2)
        if "attn" in sub or "attention" in sub:
            return ATTENTION, layer
        if "mlp" in sub or "ffn" in sub:
            return FFN, layer
        if "norm" in sub:
            return NORM, layer
        if "embed" in name:
            return EMBEDDING, layer
        return OTHER, layer
    if "embed" in name:
        return EMBEDDING, None
    return OTHER, None


@dataclass(frozen=True)
class ModelTopology:
    """Per-tensor component classification derived from tensor names."""

    layer_count: int
    classes: dict[str, tuple[str, int | None]]

    def component_of(self, name: str) -> str:
        return self.classes[name][0]

    def layer_of(self, name: str) -> int | None:
        return self.classes[name][1]


def derive_topology(names) -> ModelTopology:
    classes = {name: classify_name(name) for name in sorted(names)}
    layers = [layer for _, layer in classes.values() if layer is not None]
    return ModelTopology(layer_count=max(layers) + 1 if layers else 0, classes=classes)


class Checkpoint:
    """Immutable collection of named tensors; iteration is lexicographic by name."""

    def __init__(self, entries):
        if isinstance(entries, dict):
            entries = entries.values()
        by_name: dict[str, TensorEntry] = {}
        for entry in entries:
            if entry.name in by_name:
                raise DuplicateTensorError(f"duplicate tensor name: {entry.name}")
            by_name[entry.name] = entry
        self._entries = {name: by_name[name] for name in sorted(by_name)}
        self._topology: ModelTopology | None = None

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray]) -> "Checkpoint":
        return cls([TensorEntry(name, arr) for name, arr in arrays.items()])

    def names(self) -> list[str]:
        return list(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __iter__(self):
        return iter(self._entries.values())

    def __getitem__(self, name: str) -> TensorEntry:
        return self._entries[name]

    def tensor(self, name: str) -> np.ndarray:
        return self._entries[name].data

    @property
    def topology(self) -> ModelTopology:
        if self._topology is None:
            self._topology = derive_topology(self._entries)
        return self._topology


def read_checkpoint(path) -> Checkpoint:
    """Decode a container file into a Checkpoint (F16 tensors upcast to F32)."""
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise ContainerHeaderError(f"{path}: file too short for header length field")
    (header_len,) = struct.unpack("<Q", raw[:8])
    if 8 + header_len > len(raw):
        raise ContainerHeaderError(
            f"{path}: declared header length {header_len} exceeds file size"
        )

    def reject_duplicates(pairs):
        seen = set()
        for key, _ in pairs:
            if key in seen:
                raise DuplicateTensorError(f"{path}: duplicate tensor name: {key}")
            seen.add(key)
        return dict(pairs)

    try:
        header = json.loads(
            raw[8 : 8 + header_len].decode("utf-8"), object_pairs_hook=reject_duplicates
        )
    except DuplicateTensorError:
        raise
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerHeaderError(f"{path}: header is not valid JSON ({exc})") from exc
    if not isinstance(header, dict):
        raise ContainerHeaderError(f"{path}: header must be a JSON object")

    data = raw[8 + header_len :]
    entries = []
    ranges = []
    for name, meta in header.items():
        if not isinstance(meta, dict) or not {"dtype", "shape", "data_offsets"} <= set(meta):
            raise ContainerHeaderError(f"{path}: malformed entry for tensor {name!r}")
        dtype_tag = meta["dtype"]
        if dtype_tag not in _DTYPES:
            raise UnsupportedDtypeError(f"{path}: tensor {name!r} has dtype {dtype_tag!r}")
        shape = meta["shape"]
        offsets = meta["data_offsets"]
        if (
            not isinstance(shape, list)
            or any(not isinstance(e, int) or e < 0 for e in shape)
            or not isinstance(offsets, list)
            or len(offsets) != 2
            or any(not isinstance(o, int) for o in offsets)
        ):
            raise ContainerHeaderError(f"{path}: malformed entry for tensor {name!r}")
        start, end = offsets
        if not 0 <= start <= end <= len(data):
            raise ContainerRangeError(
                f"{path}: tensor {name!r} range [{start}, {end}) outside data region"
            )
        dtype = _DTYPES[dtype_tag]
        numel = int(np.prod(shape, dtype=np.int64)) if shape else 1
        if end - start != numel * dtype.itemsize:
            raise ContainerRangeError(
                f"{path}: tensor {name!r} range length {end - start} != "
                f"{numel} x {dtype.itemsize} bytes"
            )
        ranges.append((start, end, name))
        values = np.frombuffer(data, dtype=dtype, count=numel, offset=start)
        entries.append(TensorEntry(name, values.astype(np.float32).reshape(shape)))

    covered = 0
    for start, end, name in sorted(r for r in ranges if r[0] != r[1]):
        if start < covered:
            raise ContainerRangeError(f"{path}: tensor {name!r} overlaps a previous range")
        if start > covered:
            raise ContainerRangeError(f"{path}: gap before tensor {name!r} at byte {start}")
        covered = end
    if covered != len(data):
        raise ContainerRangeError(
            f"{path}: data region has {len(data) - covered} trailing bytes not covered"
        )
    return Checkpoint(entries)


def write_checkpoint(ckpt: Checkpoint, path) -> None:
    """Write a container file; output bytes are a pure function of the checkpoint."""
    header = {}
    offset = 0
    buffers = []
    for entry in ckpt:
        blob = np.ascontiguousarray(entry.data, dtype="<f4").tobytes()
        header[entry.name] = {
            "dtype": "F32",
            "shape": list(entry.shape),
            "data_offsets": [offset, offset + len(blob)],
        }
        buffers.append(blob)
        offset += len(blob)
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for blob in buffers:
            fh.write(blob)


@dataclass
class DeltaMap:
    """Per-tensor parent-minus-base differences (float64 for exact reconstruction)."""

    deltas: dict[str, np.ndarray]
    only_parent: list[str] = field(default_factory=list)
    only_base: list[str] = field(default_factory=list)
    shape_mismatched: list[str] = field(default_factory=list)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.deltas[name]

    def __contains__(self, name: str) -> bool:
        return name in self.deltas

    def names(self) -> list[str]:
        return list(self.deltas)


def tensor_delta(parent: Checkpoint, base: Checkpoint) -> DeltaMap:
    """Elementwise parent - base over shared, shape-equal tensor names.

    Deltas are float64 so that base + delta reproduces the float32 parent
    exactly after rounding back to float32.
    """
    deltas = {}
    mismatched = []
    for name in parent.names():
        if name not in base:
            continue
        p, b = parent.tensor(name), base.tensor(name)
        if p.shape != b.shape:
            mismatched.append(name)
            continue
        deltas[name] = p.astype(np.float64) - b.astype(np.float64)
    if not deltas:
        raise NoSharedTensorsError("parent and base share no tensors of equal shape")
    return DeltaMap(
        deltas=deltas,
        only_parent=[n for n in parent.names() if n not in base],
        only_base=[n for n in base.names() if n not in parent],
        shape_mismatched=mismatched,
    )


@dataclass
class CompatReport:
    """Structural comparison of two checkpoints."""

    shared: list[str]
    shape_mismatched: list[tuple[str, tuple, tuple]]
    only_a: list[str]
    only_b: list[str]
    homologous: bool


def validate_pair(a: Checkpoint, b: Checkpoint) -> CompatReport:
    """Report shared names, shape mismatches, and one-sided tensors."""
    shared, mismatched = [], []
    for name in a.names():
        if name not in b:
            continue
        if a[name].shape == b[name].shape:
            shared.append(name)
        else:
            mismatched.append((name, a[name].shape, b[name].shape))
    return CompatReport(
        shared=shared,
        shape_mismatched=mismatched,
        only_a=[n for n in a.names() if n not in b],
        only_b=[n for n in b.names() if n not in a],
        homologous=not mismatched,
    )
