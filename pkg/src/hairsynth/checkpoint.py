"""Self-describing checkpoint archives.

A checkpoint is a .npz (zip of raw arrays, no pickling) holding:
  __meta__                      JSON: format tag, model config, extra metadata
  param.<network>.<layer>...    every named model parameter/buffer
  opt_<group>.<idx>.<slot>      optimizer moments (training checkpoints only)
  rng.<name>                    generator states (training checkpoints only)
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from .models import HairSynthesisModel, ModelConfig

FORMAT_TAG = "hairsynth-checkpoint-v1"


def _config_from_dict(payload: dict) -> ModelConfig:
    payload = dict(payload)
    payload["stage_resolutions"] = tuple(payload["stage_resolutions"])
    return ModelConfig(**payload)


def save_checkpoint(path: Path | str, model: HairSynthesisModel,
                    meta: dict | None = None,
                    arrays: dict[str, np.ndarray] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"format": FORMAT_TAG,
               "model_config": asdict(model.config),
               "meta": meta or {}}
    out: dict[str, np.ndarray] = {"__meta__": np.array(json.dumps(payload))}
    for name, tensor in model.state_dict().items():
        out[f"param.{name}"] = tensor.detach().cpu().numpy()
    for name, array in (arrays or {}).items():
        out[name] = np.asarray(array)
    with open(path, "wb") as f:
        np.savez(f, **out)
    return path


def load_checkpoint(path: Path | str) -> tuple[HairSynthesisModel, dict, dict[str, np.ndarray]]:
    """Returns (model, meta, auxiliary arrays such as optimizer state)."""
    with np.load(path, allow_pickle=False) as archive:
        payload = json.loads(str(archive["__meta__"]))
        if payload.get("format") != FORMAT_TAG:
            raise ValueError(f"{path} is not a {FORMAT_TAG} archive")
        params = {}
        extras = {}
        for name in archive.files:
            if name == "__meta__":
                continue
            if name.startswith("param."):
                params[name[len("param."):]] = torch.from_numpy(archive[name].copy())
            else:
                extras[name] = archive[name].copy()
    model = HairSynthesisModel(_config_from_dict(payload["model_config"]))
    model.load_state_dict(params)
    return model, payload["meta"], extras


def flatten_optimizer(optimizer: torch.optim.Optimizer, prefix: str) -> tuple[dict, dict]:
    """Optimizer state -> (named arrays, JSON-able param_groups)."""
    sd = optimizer.state_dict()
    arrays = {}
    for idx, slots in sd["state"].items():
        for key, value in slots.items():
            array = value.detach().cpu().numpy() if torch.is_tensor(value) else np.asarray(value)
            arrays[f"{prefix}.{idx}.{key}"] = array
    return arrays, {"param_groups": sd["param_groups"]}


def restore_optimizer(optimizer: torch.optim.Optimizer, arrays: dict, meta: dict,
                      prefix: str) -> None:
    state: dict[int, dict] = {}
    marker = prefix + "."
    for name, array in arrays.items():
        if not name.startswith(marker):
            continue
        idx_str, key = name[len(marker):].split(".", 1)
        slots = state.setdefault(int(idx_str), {})
        slots[key] = torch.from_numpy(np.asarray(array).copy())
    optimizer.load_state_dict({"state": state, "param_groups": meta["param_groups"]})
