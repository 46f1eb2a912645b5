"""Checkpoint archive: named parameter arrays plus a JSON header.

Parameter names are stored with their partition as a path prefix
(``gen/...`` or ``cls/...``).
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .config import ModelConfig
from .svc import SVCModel

META_KEY = "__meta__"


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    model: SVCModel
    step: int = 0
    meta: dict = field(default_factory=dict)


def _archive_name(param_name: str) -> str:
    head, rest = param_name.split(".", 1)
    return f"{head}/{rest}"


def save_checkpoint(path: str | os.PathLike, model: SVCModel, step: int, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = dict(meta or {})
    header["model_config"] = model.cfg.to_dict()
    header["step"] = int(step)
    header["dtype"] = str(next(model.parameters()).dtype).replace("torch.", "")
    arrays = {_archive_name(n): t.detach().cpu().numpy() for n, t in model.state_dict().items()}
    arrays[META_KEY] = np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    os.replace(tmp, path)
    return path


def load_checkpoint(path: str | os.PathLike) -> Checkpoint:
    try:
        archive = np.load(os.fspath(path))
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot open checkpoint {path}: {exc}") from exc
    with archive:
        if META_KEY not in archive:
            raise CheckpointError(f"{path} has no header")
        header = json.loads(archive[META_KEY].tobytes().decode())
        model = SVCModel(ModelConfig.from_dict(header["model_config"]))
        if header.get("dtype") == "float64":
            model = model.double()
        expected = {_archive_name(n) for n in model.state_dict()}
        stored = set(archive.files) - {META_KEY}
        if expected != stored:
            missing, extra = sorted(expected - stored), sorted(stored - expected)
            raise CheckpointError(f"{path}: parameter mismatch (missing {missing[:3]}, unexpected {extra[:3]})")
        state = {n: torch.from_numpy(archive[_archive_name(n)].copy()) for n in model.state_dict()}
    model.load_state_dict(state)
    step = int(header.pop("step"))
    header.pop("model_config")
    return Checkpoint(model=model, step=step, meta=header)
