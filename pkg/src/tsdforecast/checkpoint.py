"""Checkpoint I/O: flat binary tensor blob with a JSON manifest.

The binary file concatenates every named tensor as little-endian 32-bit
floats. The sibling manifest (same path with a ``.json`` suffix) lists, per
tensor, its name, shape, and byte offset into the blob, plus the model
hyperparameters needed to rebuild the module tree. Writes are atomic
(temp file then rename).
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
import torch


def manifest_path(ckpt_path) -> Path:
    p = Path(ckpt_path)
    return p.with_suffix(".json")


def save_checkpoint(named_tensors: dict[str, torch.Tensor], ckpt_path,
                    model_config: dict | None = None) -> None:
    ckpt_path = Path(ckpt_path)
    ckpt_path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    chunks = []
    for name, tensor in named_tensors.items():
        arr = tensor.detach().cpu().numpy().astype("<f4")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.nbytes

    tmp_bin = ckpt_path.with_name(ckpt_path.name + ".tmp")
    with open(tmp_bin, "wb") as f:
        for chunk in chunks:
            f.write(chunk)
    os.replace(tmp_bin, ckpt_path)

    manifest = {"dtype": "float32", "byte_order": "little", "tensors": entries}
    if model_config is not None:
        manifest["model"] = model_config
    mpath = manifest_path(ckpt_path)
    tmp_json = mpath.with_name(mpath.name + ".tmp")
    with open(tmp_json, "w") as f:
        json.dump(manifest, f, indent=1)
    os.replace(tmp_json, mpath)


def load_checkpoint(ckpt_path) -> tuple[dict[str, torch.Tensor], dict]:
    """Returns (named tensors, manifest)."""
    ckpt_path = Path(ckpt_path)
    mpath = manifest_path(ckpt_path)
    if not ckpt_path.exists() or not mpath.exists():
        raise FileNotFoundError(f"checkpoint or manifest missing for {ckpt_path}")
    with open(mpath) as f:
        manifest = json.load(f)
    blob = ckpt_path.read_bytes()
    tensors = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=entry["offset"])
        tensors[entry["name"]] = torch.from_numpy(arr.copy().reshape(shape))
    return tensors, manifest


def parameter_count(manifest: dict) -> int:
    return int(sum(int(np.prod(e["shape"])) if e["shape"] else 1
                   for e in manifest["tensors"]))
