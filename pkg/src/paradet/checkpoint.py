"""Binary checkpoints: magic ``DPPM``, version 1, little-endian float64.

Layout: 4-byte magic, uint32 version, uint32 section count, then sections.
Each section is a length-prefixed UTF-8 name, a one-byte kind (0 = JSON
payload, 1 = float64 array), and a uint64 payload length.  Array payloads
start with uint32 ndim and uint32 dims, then row-major float64 data.

A checkpoint captures everything a resumed run needs to continue
bit-identically: the config snapshot, every named parameter array, both
Adadelta accumulators per parameter, the dropout generator state, the
epoch and batch counters, and the IDF table when the profile uses one.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError
from .model import ModelConfig

MAGIC = b"DPPM"
VERSION = 1

_KIND_JSON = 0
_KIND_ARRAY = 1


def _pack_array(arr: np.ndarray) -> bytes:
    # asarray keeps 0-d shapes intact where ascontiguousarray would not
    arr = np.asarray(arr, dtype="<f8", order="C")
    head = struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + arr.tobytes()


def _unpack_array(payload: bytes, name: str) -> np.ndarray:
    if len(payload) < 4:
        raise CheckpointError(f"section {name!r}: truncated array header")
    (ndim,) = struct.unpack_from("<I", payload, 0)
    if len(payload) < 4 + 4 * ndim:
        raise CheckpointError(f"section {name!r}: truncated dimension list")
    dims = struct.unpack_from(f"<{ndim}I", payload, 4)
    data = payload[4 + 4 * ndim :]
    expected = int(np.prod(dims, dtype=np.int64)) * 8 if ndim else 8
    if len(data) != expected:
        raise CheckpointError(
            f"section {name!r}: array data is {len(data)} bytes, expected {expected}"
        )
    return np.frombuffer(data, dtype="<f8").reshape(dims).astype(np.float64)


def _write_section(fh, name: str, kind: int, payload: bytes) -> None:
    encoded = name.encode("utf-8")
    fh.write(struct.pack("<I", len(encoded)))
    fh.write(encoded)
    fh.write(struct.pack("<B", kind))
    fh.write(struct.pack("<Q", len(payload)))
    fh.write(payload)


@dataclass
class Checkpoint:
    """Parsed checkpoint contents."""

    version: int
    config: dict
    params: dict[str, np.ndarray]
    opt_grad_sq: dict[str, np.ndarray]
    opt_update_sq: dict[str, np.ndarray]
    rng_state: dict
    epoch: int
    batch_index: int
    idf: dict[str, float] | None = None

    def model_config(self) -> ModelConfig:
        return ModelConfig.from_dict(self.config)


def save_checkpoint(
    path,
    config: ModelConfig,
    params: dict[str, "np.ndarray | object"],
    opt_state: dict,
    rng_state: dict,
    epoch: int,
    batch_index: int = 0,
    idf: dict[str, float] | None = None,
) -> None:
    """Write a checkpoint; ``params`` maps names to tensors or arrays."""
    sections: list[tuple[str, int, bytes]] = []

    def as_json(obj) -> bytes:
        return json.dumps(obj, sort_keys=True).encode("utf-8")

    sections.append(("config", _KIND_JSON, as_json(config.to_dict())))
    sections.append(("counters", _KIND_JSON, as_json({"epoch": epoch, "batch_index": batch_index})))
    sections.append(("rng", _KIND_JSON, as_json(rng_state)))
    if idf is not None:
        sections.append(("idf", _KIND_JSON, as_json(idf)))
    for name in sorted(params):
        values = getattr(params[name], "values", params[name])
        sections.append((f"param/{name}", _KIND_ARRAY, _pack_array(values)))
    for name in sorted(opt_state):
        state = opt_state[name]
        sections.append((f"opt/{name}/grad_sq", _KIND_ARRAY, _pack_array(state.accum_grad_sq)))
        sections.append((f"opt/{name}/update_sq", _KIND_ARRAY, _pack_array(state.accum_update_sq)))

    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(sections)))
        for name, kind, payload in sections:
            _write_section(fh, name, kind, payload)


def load_checkpoint(path) -> Checkpoint:
    """Read and validate a checkpoint written by :func:`save_checkpoint`."""
    with open(path, "rb") as fh:
        blob = fh.read()

    view = memoryview(blob)
    if len(view) < 12:
        raise CheckpointError(f"{path}: truncated header")
    if bytes(view[:4]) != MAGIC:
        raise CheckpointError(f"{path}: bad magic {bytes(view[:4])!r}, expected {MAGIC!r}")
    (version,) = struct.unpack_from("<I", view, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: version {version} unsupported, expected {VERSION}")
    (n_sections,) = struct.unpack_from("<I", view, 8)

    offset = 12
    raw: dict[str, tuple[int, bytes]] = {}
    for _ in range(n_sections):
        if offset + 4 > len(view):
            raise CheckpointError(f"{path}: truncated section header")
        (name_len,) = struct.unpack_from("<I", view, offset)
        offset += 4
        if offset + name_len + 9 > len(view):
            raise CheckpointError(f"{path}: truncated section")
        name = bytes(view[offset : offset + name_len]).decode("utf-8")
        offset += name_len
        kind = view[offset]
        offset += 1
        (payload_len,) = struct.unpack_from("<Q", view, offset)
        offset += 8
        if offset + payload_len > len(view):
            raise CheckpointError(f"{path}: section {name!r} truncated")
        raw[name] = (kind, bytes(view[offset : offset + payload_len]))
        offset += payload_len
    if offset != len(view):
        raise CheckpointError(f"{path}: {len(view) - offset} trailing bytes after last section")

    def json_section(name: str, required: bool = True):
        if name not in raw:
            if required:
                raise CheckpointError(f"{path}: missing section {name!r}")
            return None
        kind, payload = raw[name]
        if kind != _KIND_JSON:
            raise CheckpointError(f"{path}: section {name!r} has kind {kind}, expected JSON")
        return json.loads(payload.decode("utf-8"))

    config = json_section("config")
    counters = json_section("counters")
    rng_state = json_section("rng")
    idf = json_section("idf", required=False)

    params: dict[str, np.ndarray] = {}
    grad_sq: dict[str, np.ndarray] = {}
    update_sq: dict[str, np.ndarray] = {}
    for name, (kind, payload) in raw.items():
        if kind != _KIND_ARRAY:
            continue
        arr = _unpack_array(payload, name)
        if name.startswith("param/"):
            params[name[len("param/") :]] = arr
        elif name.startswith("opt/") and name.endswith("/grad_sq"):
            grad_sq[name[len("opt/") : -len("/grad_sq")]] = arr
        elif name.startswith("opt/") and name.endswith("/update_sq"):
            update_sq[name[len("opt/") : -len("/update_sq")]] = arr
        else:
            raise CheckpointError(f"{path}: unrecognized array section {name!r}")

    return Checkpoint(
        version=version,
        config=config,
        params=params,
        opt_grad_sq=grad_sq,
        opt_update_sq=update_sq,
        rng_state=rng_state,
        epoch=int(counters["epoch"]),
        batch_index=int(counters.get("batch_index", 0)),
        idf=idf,
    )
