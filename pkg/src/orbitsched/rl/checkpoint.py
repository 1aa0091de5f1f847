"""
Checkpoint and learning-curve files.

Checkpoint layout (little endian)::

    b"ORBSCKPT"  magic
    uint32       format version
    uint32       header length in bytes
    header       UTF-8 JSON: version, config, config_hash, arrays
    payload      raw array bytes, concatenated in header order

``config_hash`` is the SHA-256 of the canonical JSON of ``config``; loading
recomputes it and refuses a mismatch. The file holds no timestamps, so a
seed-fixed training run writes identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import struct
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
import torch

from .nets import NetConfig, PolicyValueNet

MAGIC = b"ORBSCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def checkpoint_bytes(net: PolicyValueNet, extra: dict = None) -> bytes:
    config = {"net": net.config.to_dict(), "extra": extra or {}}
    arrays = []
    payload = io.BytesIO()
    offset = 0
    for name, t in net.state_dict().items():
        a = np.ascontiguousarray(t.detach().cpu().numpy()).astype("<f4" if t.dtype == torch.float32 else "<f8")
        data = a.tobytes()
        arrays.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape),
                       "offset": offset, "nbytes": len(data)})
        payload.write(data)
        offset += len(data)
    header = json.dumps({"version": VERSION, "config": config, "config_hash": config_hash(config),
                         "arrays": arrays}, sort_keys=True).encode()
    return MAGIC + struct.pack("<II", VERSION, len(header)) + header + payload.getvalue()


def save_checkpoint(path, net: PolicyValueNet, extra: dict = None) -> None:
    Path(path).write_bytes(checkpoint_bytes(net, extra))


def parse_checkpoint(blob: bytes) -> Tuple[PolicyValueNet, dict]:
    if blob[:len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file")
    version, hlen = struct.unpack_from("<II", blob, len(MAGIC))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    start = len(MAGIC) + 8
    header = json.loads(blob[start:start + hlen].decode())
    if config_hash(header["config"]) != header["config_hash"]:
        raise CheckpointError("config hash mismatch")
    body = blob[start + hlen:]
    net = PolicyValueNet(NetConfig.from_dict(header["config"]["net"]))
    state = {}
    for spec in header["arrays"]:
        raw = body[spec["offset"]:spec["offset"] + spec["nbytes"]]
        if len(raw) != spec["nbytes"]:
            raise CheckpointError(f"truncated array {spec['name']}")
        a = np.frombuffer(raw, dtype=np.dtype(spec["dtype"])).reshape(spec["shape"])
        state[spec["name"]] = torch.from_numpy(a.copy())
    net.load_state_dict(state)
    return net, header["config"]


def load_checkpoint(path) -> Tuple[PolicyValueNet, dict]:
    return parse_checkpoint(Path(path).read_bytes())


def curve_csv(curve: Sequence[Tuple[int, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "mean_reward"])
    for step, r in curve:
        w.writerow([int(step), repr(float(r))])
    return buf.getvalue()


def write_curve(path, curve) -> None:
    Path(path).write_text(curve_csv(curve))


def read_curve(path) -> List[Tuple[int, float]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [(int(r["step"]), float(r["mean_reward"])) for r in rows]
