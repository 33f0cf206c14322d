"""Trajectory reconstruction from window velocities and ATE / RTE / PDE / CDF metrics."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .errors import PreconditionError, SizeError
from .imu_data import ImuSequence, rotate_to_world, window_offsets
from .synth_world import Trajectory

RTE_INTERVAL = 60.0


class OverlapError(PreconditionError):
    pass


def ground_truth(seq: ImuSequence) -> Trajectory:
    if seq.pos is None:
        raise PreconditionError("sequence has no ground-truth positions")
    return Trajectory(t=seq.t, pos=seq.pos[:, :2])


def window_inputs(seq: ImuSequence, L: int, stride: int):
    """World-frame ``(K, 6, L)`` inputs and their start offsets."""
    world = rotate_to_world(seq) if seq.frame == "body" else seq
    if len(world) < L + 1:
        raise SizeError(f"sequence of {len(world)} samples is shorter than one window of {L}")
    offsets = window_offsets(len(world), L, stride)
    feats = np.hstack([world.acce, world.gyro]).T
    idx = offsets[:, None] + np.arange(L)[None, :]
    return np.transpose(feats[:, idx], (1, 0, 2)), offsets


def _as_predictor(predictor):
    if isinstance(predictor, torch.nn.Module):
        from .training import predict

        return lambda x: predict(predictor, x)
    return predictor


def reconstruct_trajectory(predictor, seq: ImuSequence, L: int, stride: int) -> Trajectory:
    """Integrate predicted window velocities into a 2-D path.

    Window ``k`` (samples ``[s_k, s_k + L)``) contributes ``v_k * stride / rate``
    over the stride-wide interval centred on the window. With ``stride == L``
    the output points are exactly the window boundaries, starting at the
    ground-truth position of the first window start.
    """
    x, offsets = window_inputs(seq, L, stride)
    v = np.asarray(_as_predictor(predictor)(x), dtype=np.float64).reshape(len(offsets), 2)
    rate = seq.rate
    steps = v * (stride / rate)
    idx = np.concatenate([[offsets[0] + (L - stride) / 2.0], offsets + (L + stride) / 2.0])
    t = np.interp(idx, np.arange(len(seq)), seq.t)
    start = np.zeros(2)
    if seq.pos is not None:
        start = np.array([np.interp(idx[0], np.arange(len(seq)), seq.pos[:, k]) for k in range(2)])
    pos = start + np.vstack([np.zeros((1, 2)), np.cumsum(steps, axis=0)])
    return Trajectory(t=t, pos=pos)


def _sorted(traj: Trajectory):
    order = np.argsort(traj.t, kind="stable")
    return traj.t[order], traj.pos[order, :2]


def align(pred: Trajectory, gt: Trajectory):
    """Common timestamps (the predicted ones inside the overlap) and both positions there."""
    tp, pp = _sorted(pred)
    tg, pg = _sorted(gt)
    lo, hi = max(tp[0], tg[0]), min(tp[-1], tg[-1])
    keep = (tp >= lo) & (tp <= hi)
    if lo > hi or not keep.any():
        raise OverlapError("predicted and ground-truth trajectories do not overlap in time")
    t = tp[keep]
    g = np.column_stack([np.interp(t, tg, pg[:, k]) for k in range(2)])
    return t, pp[keep], g


def ate(pred: Trajectory, gt: Trajectory) -> float:
    _, p, g = align(pred, gt)
    return float(np.sqrt(np.mean(np.sum((p - g) ** 2, axis=1))))


def rte(pred: Trajectory, gt: Trajectory, interval: float = RTE_INTERVAL) -> float:
    t, p, g = align(pred, gt)
    span = t[-1] - t[0]
    if span <= 0:
        raise SizeError("RTE needs at least two distinct timestamps")
    if span < interval:
        e = np.linalg.norm((p[-1] - p[0]) - (g[-1] - g[0])) * (interval / span)
        return float(e)
    starts = t[t + interval <= t[-1] + 1e-12]
    ends = np.minimum(starts + interval, t[-1])
    p_end = np.column_stack([np.interp(ends, t, p[:, k]) for k in range(2)])
    g_end = np.column_stack([np.interp(ends, t, g[:, k]) for k in range(2)])
    n = len(starts)
    err = (p_end - p[:n]) - (g_end - g[:n])
    return float(np.sqrt(np.mean(np.sum(err**2, axis=1))))


def pde(pred: Trajectory, gt: Trajectory) -> float:
    _, p, g = align(pred, gt)
    length = float(np.sum(np.linalg.norm(np.diff(g, axis=0), axis=1)))
    if length <= 0:
        raise PreconditionError("ground-truth path has zero length")
    return float(np.linalg.norm(p[-1] - g[-1]) / length)


def cdf(errors) -> list[tuple[float, float]]:
    """Empirical CDF as ``(threshold, fraction <= threshold)`` at each distinct error."""
    e = np.sort(np.asarray(errors, dtype=np.float64).ravel())
    if e.size == 0:
        raise SizeError("cdf of an empty error list")
    thresholds = np.unique(e)
    counts = np.searchsorted(e, thresholds, side="right")
    return [(float(th), float(c) / e.size) for th, c in zip(thresholds, counts)]


@dataclass
class MetricsReport:
    ate: float
    rte: float
    pde: float
    per_sequence: list[dict] = field(default_factory=list)
    cdf: list[tuple[float, float]] = field(default_factory=list)
    cdf_rte: list[tuple[float, float]] = field(default_factory=list)
    rte_interval: float = RTE_INTERVAL

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cdf"] = [list(p) for p in self.cdf]
        d["cdf_rte"] = [list(p) for p in self.cdf_rte]
        return d

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path

    @classmethod
    def read(cls, path) -> "MetricsReport":
        d = json.loads(Path(path).read_text())
        d["cdf"] = [tuple(p) for p in d.get("cdf", [])]
        d["cdf_rte"] = [tuple(p) for p in d.get("cdf_rte", [])]
        return cls(**d)


def evaluate_sequences(predictor, sequences, L: int, stride: int, interval: float = RTE_INTERVAL):
    """Metrics over ``(name, sequence)`` pairs; also returns each ``(pred, gt)`` trajectory pair."""
    predictor = _as_predictor(predictor)
    rows, trajs = [], {}
    for name, seq in sequences:
        pred = reconstruct_trajectory(predictor, seq, L, stride)
        gt = ground_truth(seq)
        row = {
            "id": name,
            "ate": ate(pred, gt),
            "rte": rte(pred, gt, interval),
            "pde": pde(pred, gt),
            "n_points": len(pred),
        }
        rows.append(row)
        trajs[name] = (pred, gt)
    if not rows:
        raise SizeError("no sequences to evaluate")
    report = MetricsReport(
        ate=float(np.mean([r["ate"] for r in rows])),
        rte=float(np.mean([r["rte"] for r in rows])),
        pde=float(np.mean([r["pde"] for r in rows])),
        per_sequence=rows,
        cdf=cdf([r["ate"] for r in rows]),
        cdf_rte=cdf([r["rte"] for r in rows]),
        rte_interval=interval,
    )
    return report, trajs


def zero_velocity(x) -> np.ndarray:
    return np.zeros((len(x), 2))


def write_trajectory_csv(path, pred: Trajectory, gt: Trajectory) -> Path:
    t, p, g = align(pred, gt)
    path = Path(path)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "px_gt", "py_gt", "px_pred", "py_pred"])
        for row in zip(t, g[:, 0], g[:, 1], p[:, 0], p[:, 1]):
            w.writerow([repr(float(v)) for v in row])
    return path


def read_trajectory_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = data[:, 0]
    return Trajectory(t=t, pos=data[:, 3:5]), Trajectory(t=t, pos=data[:, 1:3])
