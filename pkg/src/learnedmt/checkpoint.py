"""Single-file checkpoints: a text header followed by raw float64 arrays.

Layout::

    learnedmt-checkpoint <version>\\n
    <one-line JSON header: kind, config, seed, array names and shapes>\\n
    <little-endian float64 arrays in header order>

Parameters come first, then Adam state (first moment, second moment, step
count) for each parameter in the same order.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .estimator import Estimator, EstimatorConfig
from .ranker import Ranker, RankerConfig

MAGIC = "learnedmt-checkpoint"
FORMAT_VERSION = 1
_DTYPE = np.dtype("<f8")


class CheckpointError(ValueError):
    pass


def to_bytes(model: Estimator | Ranker) -> bytes:
    named = model.named_params()
    params = [p for _, p in named]
    opt = model.optimizer.state_arrays(params)
    arrays = [(name, p.values) for name, p in named]
    for i, (name, _) in enumerate(named):
        m, v, t = opt[3 * i: 3 * i + 3]
        arrays += [(f"adam.m/{name}", m), (f"adam.v/{name}", v), (f"adam.t/{name}", t)]
    header = {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "seed": model.config.seed,
        "config": model.config.to_dict(),
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
    }
    blob = b"".join(np.ascontiguousarray(a, dtype=_DTYPE).tobytes() for _, a in arrays)
    head = f"{MAGIC} {FORMAT_VERSION}\n{json.dumps(header, sort_keys=True)}\n"
    return head.encode("utf-8") + blob


def save(model: Estimator | Ranker, path: str | Path) -> None:
    Path(path).write_bytes(to_bytes(model))


def from_bytes(raw: bytes) -> Estimator | Ranker:
    first, _, rest = raw.partition(b"\n")
    parts = first.decode("utf-8", errors="replace").split()
    if len(parts) != 2 or parts[0] != MAGIC:
        raise CheckpointError("not a learnedmt checkpoint")
    if int(parts[1]) != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {parts[1]}")
    line, _, blob = rest.partition(b"\n")
    header = json.loads(line.decode("utf-8"))
    kind = header["kind"]
    if kind == "estimator":
        model = Estimator(EstimatorConfig.from_dict(header["config"]))
    elif kind == "ranker":
        model = Ranker(RankerConfig.from_dict(header["config"]))
    else:
        raise CheckpointError(f"unknown model kind {kind!r}")

    named = model.named_params()
    specs = header["arrays"]
    if len(specs) != 4 * len(named):
        raise CheckpointError("checkpoint arrays do not match the model layout")
    arrays, offset = [], 0
    for spec in specs:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape))
        end = offset + count * _DTYPE.itemsize
        if end > len(blob):
            raise CheckpointError("checkpoint is truncated")
        arrays.append(np.frombuffer(blob, dtype=_DTYPE, count=count, offset=offset).reshape(shape))
        offset = end
    if offset != len(blob):
        raise CheckpointError("trailing bytes after checkpoint arrays")

    for (name, p), spec, arr in zip(named, specs, arrays):
        if spec["name"] != name or arr.shape != p.shape:
            raise CheckpointError(f"parameter mismatch at {name!r}")
        p.values = arr.astype(np.float64)
    model.optimizer.load_state_arrays([p for _, p in named], arrays[len(named):])
    return model


def load(path: str | Path) -> Estimator | Ranker:
    return from_bytes(Path(path).read_bytes())
