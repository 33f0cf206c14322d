"""Checkpoint archives: a zip holding ``config.json``, ``state.json`` and one ``.npy`` per tensor.

Entries carry a fixed timestamp so identical contents give identical bytes.
Tensor entries live under ``params/<name>.npy`` (model state, names as in
:class:`~ftin.model.network.Ftin`) and ``optim/<name>.npy`` (optimizer state).
"""
from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

import numpy as np
import torch

from .config import FtinConfig

_EPOCH = (1980, 1, 1, 0, 0, 0)


def _write(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def _npy_bytes(t) -> bytes:
    arr = t.detach().cpu().numpy() if isinstance(t, torch.Tensor) else np.asarray(t)
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.array(arr, order="C"), allow_pickle=False)
    return buf.getvalue()


def save_checkpoint(path, config: FtinConfig, params: dict, state: dict | None = None, optim: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with zipfile.ZipFile(tmp, "w") as zf:
        _write(zf, "config.json", json.dumps(config.to_dict(), indent=2, sort_keys=True).encode())
        _write(zf, "state.json", json.dumps(state or {}, indent=2, sort_keys=True).encode())
        for name, t in params.items():
            _write(zf, f"params/{name}.npy", _npy_bytes(t))
        for name, t in (optim or {}).items():
            _write(zf, f"optim/{name}.npy", _npy_bytes(t))
    tmp.replace(path)
    return path


def load_checkpoint(path):
    """Return ``(config, params, state, optim)``; tensors come back as torch tensors."""
    params, optim = {}, {}
    with zipfile.ZipFile(path) as zf:
        config = FtinConfig.from_dict(json.loads(zf.read("config.json")))
        state = json.loads(zf.read("state.json"))
        for name in zf.namelist():
            if not name.endswith(".npy"):
                continue
            arr = np.lib.format.read_array(io.BytesIO(zf.read(name)), allow_pickle=False)
            key = name.split("/", 1)[1][: -len(".npy")]
            (params if name.startswith("params/") else optim)[key] = torch.from_numpy(arr)
    return config, params, state, optim
