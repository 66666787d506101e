"""Binary checkpoint files.

Layout (little-endian): magic ``PLM1``, u32 header length, header JSON, then
one record per tensor (u32 name length, utf-8 name, u32 rank, u32 dims,
float32 data), then a u32 CRC32 of every preceding byte.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from patternlm.model import ModelConfig, PatternLM

MAGIC = b"PLM1"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    header: dict
    tensors: dict[str, np.ndarray]

    @property
    def model_config(self) -> ModelConfig:
        return ModelConfig.from_dict(self.header["model_config"])

    @property
    def step(self) -> int:
        return int(self.header.get("step", 0))


def _optimizer_tensors(model: PatternLM, optimizer: torch.optim.Optimizer) -> tuple[dict, dict[str, np.ndarray]]:
    names = {id(p): n for n, p in model.named_parameters()}
    steps, tensors = {}, {}
    for group in optimizer.param_groups:
        for p in group["params"]:
            state = optimizer.state.get(p)
            if not state:
                continue
            n = names[id(p)]
            steps[n] = float(state["step"])
            tensors[f"optim.{n}.exp_avg"] = state["exp_avg"].detach().cpu().numpy()
            tensors[f"optim.{n}.exp_avg_sq"] = state["exp_avg_sq"].detach().cpu().numpy()
    return {"steps": steps}, tensors


def save_checkpoint(
    path: str | Path,
    model: PatternLM,
    optimizer: torch.optim.Optimizer | None = None,
    step: int = 0,
    extra: dict | None = None,
) -> None:
    header = {"format_version": FORMAT_VERSION, "model_config": model.cfg.to_dict(), "step": step, "extra": extra or {}}
    tensors = {f"model.{n}": t.detach().cpu().numpy() for n, t in model.state_dict().items()}
    if optimizer is not None:
        header["optimizer"], opt = _optimizer_tensors(model, optimizer)
        tensors.update(opt)
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", len(hb)), hb]
    for name, arr in tensors.items():
        nb = name.encode("utf-8")
        arr = np.ascontiguousarray(arr, dtype="<f4")
        parts.append(struct.pack("<I", len(nb)) + nb)
        parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


def read_checkpoint(path: str | Path) -> Checkpoint:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic {data[:4]!r})")
    if len(data) < 8:
        raise CheckpointError(f"{path}: truncated in header")
    (hlen,) = struct.unpack_from("<I", data, 4)
    if 8 + hlen > len(data):
        raise CheckpointError(f"{path}: truncated in header")
    header = json.loads(data[8:8 + hlen].decode("utf-8"))
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: format version {version} not supported (expected {FORMAT_VERSION})")
    pos = 8 + hlen
    end = len(data) - 4  # trailing CRC
    tensors: dict[str, np.ndarray] = {}
    while pos < end:
        name = "<unknown>"
        try:
            (nlen,) = struct.unpack_from("<I", data, pos)
            if pos + 4 + nlen > end:
                raise struct.error
            name = data[pos + 4:pos + 4 + nlen].decode("utf-8")
            pos += 4 + nlen
            (rank,) = struct.unpack_from("<I", data, pos)
            if pos + 4 + 4 * rank > end:
                raise struct.error
            shape = struct.unpack_from(f"<{rank}I", data, pos + 4)
            pos += 4 + 4 * rank
            size = 4 * int(np.prod(shape, dtype=np.int64))
            if pos + size > end:
                raise struct.error
        except (struct.error, UnicodeDecodeError):
            raise CheckpointError(f"{path}: truncated at tensor {name}") from None
        tensors[name] = np.frombuffer(data, dtype="<f4", count=size // 4, offset=pos).reshape(shape).copy()
        pos += size
    if end < pos or len(data) < 4:
        raise CheckpointError(f"{path}: truncated at tensor {name}")
    (crc,) = struct.unpack_from("<I", data, end)
    if zlib.crc32(data[:end]) != crc:
        raise CheckpointError(f"{path}: CRC mismatch (file corrupted or truncated)")
    return Checkpoint(header, tensors)


def load_model(ckpt: Checkpoint, config: ModelConfig | None = None) -> PatternLM:
    """Build a model from ``ckpt``; with ``config`` given, shapes must match it."""
    cfg = config or ckpt.model_config
    model = PatternLM(cfg)
    state = model.state_dict()
    for name, target in state.items():
        key = f"model.{name}"
        if key not in ckpt.tensors:
            raise CheckpointError(f"checkpoint is missing tensor {name}")
        arr = ckpt.tensors[key]
        if tuple(arr.shape) != tuple(target.shape):
            raise CheckpointError(
                f"shape mismatch for {name}: checkpoint {tuple(arr.shape)} vs model {tuple(target.shape)}"
            )
        target.copy_(torch.from_numpy(arr))
    model.eval()
    return model


def load_optimizer(ckpt: Checkpoint, model: PatternLM, optimizer: torch.optim.Optimizer) -> None:
    steps = ckpt.header.get("optimizer", {}).get("steps", {})
    for name, p in model.named_parameters():
        if name not in steps:
            continue
        optimizer.state[p] = {
            "step": torch.tensor(steps[name]),
            "exp_avg": torch.from_numpy(ckpt.tensors[f"optim.{name}.exp_avg"].copy()),
            "exp_avg_sq": torch.from_numpy(ckpt.tensors[f"optim.{name}.exp_avg_sq"].copy()),
        }


def load_checkpoint(path: str | Path, config: ModelConfig | None = None) -> tuple[PatternLM, Checkpoint]:
    ckpt = read_checkpoint(path)
    return load_model(ckpt, config), ckpt
