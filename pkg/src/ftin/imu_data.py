"""IMU data model, canonical on-disk format, frame rotation, windowing and splitting.

Sequences are stored columnar (one array per quantity) rather than as a list of
per-sample records; :attr:`ImuSequence.samples` materialises the record view
when it is wanted.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import IntegrityError, PreconditionError, SchemaError, SizeError

GYRO_COLS = ("gx", "gy", "gz")
ACCE_COLS = ("ax", "ay", "az")
QUAT_COLS = ("qw", "qx", "qy", "qz")
POS_COLS = ("px", "py", "pz")
N_CHANNELS = 6

DEFAULT_WINDOW = 200
DEFAULT_STRIDE = 10


@dataclass(frozen=True)
class ImuSample:
    t: float
    gyro: np.ndarray
    acce: np.ndarray
    quat: np.ndarray | None = None
    pos: np.ndarray | None = None


@dataclass
class ImuSequence:
    """A timestamped IMU stream with optional orientation and ground-truth position.

    ``gyro`` and ``acce`` are ``(N, 3)``; ``quat`` is ``(N, 4)`` in ``w, x, y, z``
    order (body to world); ``pos`` is ``(N, 3)`` in the world frame.
    """

    t: np.ndarray
    gyro: np.ndarray
    acce: np.ndarray
    rate: float
    quat: np.ndarray | None = None
    pos: np.ndarray | None = None
    frame: str = "body"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.gyro = np.asarray(self.gyro, dtype=np.float64).reshape(-1, 3)
        self.acce = np.asarray(self.acce, dtype=np.float64).reshape(-1, 3)
        if self.quat is not None:
            self.quat = np.asarray(self.quat, dtype=np.float64).reshape(-1, 4)
        if self.pos is not None:
            self.pos = np.asarray(self.pos, dtype=np.float64).reshape(-1, 3)
        if self.frame not in ("body", "world"):
            raise PreconditionError(f"frame must be 'body' or 'world', got {self.frame!r}")
        self.validate()

    def __len__(self) -> int:
        return len(self.t)

    def validate(self) -> None:
        n = len(self.t)
        if n < 2:
            raise SizeError(f"a sequence needs at least 2 samples, got {n}")
        for name in ("gyro", "acce", "quat", "pos"):
            arr = getattr(self, name)
            if arr is not None and len(arr) != n:
                raise SizeError(f"{name} has {len(arr)} rows, expected {n}")
        bad = np.flatnonzero(np.diff(self.t) <= 0)
        if bad.size:
            raise IntegrityError(
                f"timestamps not strictly increasing at index {bad[0] + 1}", index=int(bad[0] + 1)
            )
        if self.rate <= 0:
            raise IntegrityError(f"rate must be positive, got {self.rate}")
        period = 1.0 / self.rate
        if abs(np.median(np.diff(self.t)) - period) / period >= 0.05:
            raise IntegrityError(
                f"median sample spacing {np.median(np.diff(self.t)):.6g}s disagrees with rate {self.rate} Hz"
            )
        if self.quat is not None:
            norm_err = np.abs(np.linalg.norm(self.quat, axis=1) - 1.0)
            bad = np.flatnonzero(norm_err > 1e-6)
            if bad.size:
                raise IntegrityError(f"quaternion at index {bad[0]} is not unit norm", index=int(bad[0]))

    @property
    def samples(self) -> list[ImuSample]:
        return [
            ImuSample(
                t=float(self.t[i]),
                gyro=self.gyro[i],
                acce=self.acce[i],
                quat=None if self.quat is None else self.quat[i],
                pos=None if self.pos is None else self.pos[i],
            )
            for i in range(len(self))
        ]

    @classmethod
    def from_samples(cls, samples, rate, frame="body", meta=None) -> "ImuSequence":
        samples = list(samples)
        has_quat = all(s.quat is not None for s in samples)
        has_pos = all(s.pos is not None for s in samples)
        return cls(
            t=[s.t for s in samples],
            gyro=[s.gyro for s in samples],
            acce=[s.acce for s in samples],
            quat=[s.quat for s in samples] if has_quat else None,
            pos=[s.pos for s in samples] if has_pos else None,
            rate=rate,
            frame=frame,
            meta=dict(meta or {}),
        )


@dataclass(frozen=True)
class LabeledWindow:
    x: np.ndarray  # (6, L): acce x,y,z then gyro x,y,z
    v: np.ndarray  # (2,) mean horizontal velocity over the window
    t_start: float


# --------------------------------------------------------------------------- io


def save_canonical(seq: ImuSequence, path) -> Path:
    """Write ``seq`` as a canonical dataset directory (``meta.json`` + ``data.csv``)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    cols = ["t", *GYRO_COLS, *ACCE_COLS]
    blocks = [seq.t[:, None], seq.gyro, seq.acce]
    if seq.quat is not None:
        cols += QUAT_COLS
        blocks.append(seq.quat)
    if seq.pos is not None:
        cols += POS_COLS
        blocks.append(seq.pos)
    meta = {
        "rate_hz": seq.rate,
        "frame": seq.frame,
        "has_quat": seq.quat is not None,
        "has_pos": seq.pos is not None,
        "units": {"t": "s", "gyro": "rad/s", "acce": "m/s^2", "pos": "m"},
        "meta": seq.meta,
    }
    (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    # %.17g round-trips every float64 exactly
    np.savetxt(
        path / "data.csv",
        np.hstack(blocks),
        fmt="%.17g",
        delimiter=",",
        header=",".join(cols),
        comments="",
        newline="\n",
        encoding="utf-8",
    )
    return path


def load_canonical(path) -> ImuSequence:
    path = Path(path)
    meta_file, data_file = path / "meta.json", path / "data.csv"
    if not meta_file.is_file():
        raise SchemaError("meta.json", f"{meta_file} not found")
    if not data_file.is_file():
        raise SchemaError("data.csv", f"{data_file} not found")
    meta = json.loads(meta_file.read_text(encoding="utf-8"))
    for key in ("rate_hz", "frame", "has_quat", "has_pos"):
        if key not in meta:
            raise SchemaError(key, f"meta.json lacks required key {key!r}")

    with open(data_file, encoding="utf-8") as fh:
        header = [h.strip() for h in fh.readline().strip().split(",")]
    required = ["t", *GYRO_COLS, *ACCE_COLS]
    if meta["has_quat"]:
        required += QUAT_COLS
    if meta["has_pos"]:
        required += POS_COLS
    for name in required:
        if name not in header:
            raise SchemaError(name)

    raw = np.loadtxt(data_file, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
    if raw.shape[0] and raw.shape[1] != len(header):
        raise SchemaError("data.csv", f"rows have {raw.shape[1]} fields, header has {len(header)}")
    col = {name: raw[:, i] for i, name in enumerate(header)}

    def stack(names):
        return np.column_stack([col[n] for n in names])

    return ImuSequence(
        t=col["t"],
        gyro=stack(GYRO_COLS),
        acce=stack(ACCE_COLS),
        quat=stack(QUAT_COLS) if meta["has_quat"] else None,
        pos=stack(POS_COLS) if meta["has_pos"] else None,
        rate=float(meta["rate_hz"]),
        frame=meta["frame"],
        meta=meta.get("meta", {}),
    )


# ---------------------------------------------------------------- transforms


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vectors ``v`` (N, 3) by unit quaternions ``q`` (N, 4, w-first)."""
    w = q[:, :1]
    u = q[:, 1:]
    uv = np.cross(u, v)
    return v + 2.0 * w * uv + 2.0 * np.cross(u, uv)


def rotate_to_world(seq: ImuSequence) -> ImuSequence:
    if seq.quat is None:
        raise PreconditionError("rotate_to_world needs an orientation for every sample")
    if seq.frame == "world":
        return replace(seq)
    return replace(
        seq,
        gyro=quat_rotate(seq.quat, seq.gyro),
        acce=quat_rotate(seq.quat, seq.acce),
        frame="world",
        meta=dict(seq.meta),
    )


def window_offsets(n_samples: int, L: int, stride: int) -> np.ndarray:
    """Start indices of labelable windows.

    A window covers samples ``[s, s + L)`` and its label needs the position at
    ``s + L``, so the last usable start is ``n_samples - 1 - L``.
    """
    if stride < 1 or L < 1:
        raise PreconditionError("window length and stride must be positive")
    return np.arange(0, n_samples - L, stride)


def window_labels(pos: np.ndarray, rate: float, L: int, offsets: np.ndarray) -> np.ndarray:
    offsets = np.asarray(offsets, dtype=int)
    return (pos[offsets + L, :2] - pos[offsets, :2]) * (rate / L)


def make_windows(seq: ImuSequence, L: int = DEFAULT_WINDOW, stride: int = DEFAULT_STRIDE) -> list[LabeledWindow]:
    if seq.pos is None:
        raise PreconditionError("make_windows needs ground-truth positions for labels")
    if seq.frame != "world":
        raise PreconditionError("make_windows expects a world-frame sequence; call rotate_to_world first")
    if L > len(seq) - 1:
        raise SizeError(f"window length {L} does not fit a sequence of {len(seq)} samples")
    offsets = window_offsets(len(seq), L, stride)
    feats = np.hstack([seq.acce, seq.gyro]).T  # (6, N)
    labels = window_labels(seq.pos, seq.rate, L, offsets)
    return [
        LabeledWindow(x=feats[:, s : s + L].copy(), v=labels[k], t_start=float(seq.t[s]))
        for k, s in enumerate(offsets)
    ]


def windows_to_arrays(windows) -> tuple[np.ndarray, np.ndarray]:
    """Stack windows into ``(B, 6, L)`` inputs and ``(B, 2)`` targets."""
    windows = list(windows)
    if not windows:
        return np.zeros((0, N_CHANNELS, 0)), np.zeros((0, 2))
    return np.stack([w.x for w in windows]), np.stack([w.v for w in windows])


def split_dataset(seqs, seed: int):
    """Shuffle by ``seed`` and split 8:1:1 into ``(train, val, test)``.

    Sizes are ``ceil(0.8 n)`` / ``floor(0.1 n)`` / remainder, which keeps every
    bucket non-empty for ``n >= 10``.
    """
    seqs = list(seqs)
    n = len(seqs)
    if n < 10:
        raise SizeError(f"an 8:1:1 split needs at least 10 sequences, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    n_train = math.ceil(0.8 * n)
    n_val = math.floor(0.1 * n)
    parts = (order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :])
    return tuple([seqs[i] for i in idx] for idx in parts)


def load_dataset_dir(path) -> list[tuple[str, ImuSequence]]:
    """Load every canonical sequence directory directly under ``path``, sorted by name."""
    path = Path(path)
    if not path.is_dir():
        raise SchemaError(str(path), f"dataset directory {path} not found")
    dirs = sorted(p for p in path.iterdir() if (p / "meta.json").is_file())
    if not dirs:
        raise SizeError(f"no canonical sequences under {path}")
    return [(d.name, load_canonical(d)) for d in dirs]
