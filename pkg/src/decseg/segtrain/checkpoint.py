"""Checkpoint directories: flat tensor blobs, a text index and a JSON manifest."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .nets import SegNet, build_model

WEIGHTS = "weights.bin"
INDEX = "weights.index"
MANIFEST = "manifest.json"


@dataclass
class ModelCheckpoint:
    state: dict[str, np.ndarray]
    manifest: dict = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: SegNet, **manifest) -> "ModelCheckpoint":
        state = {k: v.detach().cpu().numpy().copy() for k, v in model.state_dict().items()}
        man = {"arch": dict(model.arch), **dict(model.meta), **manifest}
        return cls(state, man)

    def to_model(self) -> SegNet:
        model = build_model(self.manifest["arch"])
        model.load_state_dict({k: torch.from_numpy(np.array(v)) for k, v in self.state.items()})
        model.meta = {k: self.manifest[k] for k in ("strategy_hash", "category_index", "taxonomy_hash")
                      if k in self.manifest}
        model.eval()
        return model

    def weights_hash(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self.state):
            arr = np.ascontiguousarray(self.state[name])
            h.update(name.encode())
            h.update(str(arr.dtype).encode())
            h.update(str(arr.shape).encode())
            h.update(arr.tobytes())
        return h.hexdigest()[:16]

    def save(self, path) -> Path:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        offset = 0
        lines = []
        with open(path / WEIGHTS, "wb") as fh:
            for name, arr in self.state.items():
                arr = np.ascontiguousarray(arr)
                blob = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
                fh.write(blob)
                shape = ",".join(str(s) for s in arr.shape)
                lines.append(f"{name}\t{shape}\t{arr.dtype.name}\t{offset}\t{len(blob)}")
                offset += len(blob)
        (path / INDEX).write_text("\n".join(lines) + "\n")
        manifest = dict(self.manifest)
        manifest["weights_hash"] = self.weights_hash()
        (path / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "ModelCheckpoint":
        path = Path(path)
        for fname in (WEIGHTS, INDEX, MANIFEST):
            if not (path / fname).exists():
                raise OSError(f"checkpoint file missing: {path / fname}")
        raw = (path / WEIGHTS).read_bytes()
        state = {}
        for line in (path / INDEX).read_text().splitlines():
            if not line.strip():
                continue
            name, shape, dtype, offset, nbytes = line.split("\t")
            shape = tuple(int(s) for s in shape.split(",")) if shape else ()
            dt = np.dtype(dtype).newbyteorder("<")
            chunk = raw[int(offset) : int(offset) + int(nbytes)]
            state[name] = np.frombuffer(chunk, dtype=dt).reshape(shape).astype(np.dtype(dtype)).copy()
        manifest = json.loads((path / MANIFEST).read_text())
        return cls(state, manifest)
