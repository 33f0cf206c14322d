"""Synthetic planar trajectories and the IMU readings they imply.

Trajectories are a smooth carrier path (speed and yaw rate are bounded sums of
slow sinusoids) plus an optional gait oscillation along the heading. The gait
term makes walking direction and speed observable from world-frame
acceleration, the way real pedestrian data is; without it a constant-velocity
segment produces the same IMU signal in every direction.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import PreconditionError, SizeError
from .imu_data import ImuSequence, rotate_to_world, save_canonical

GRAVITY = 9.81
_OVERSAMPLE = 10
_N_MODES = 3


@dataclass(frozen=True)
class TrajectorySpec:
    duration: float = 60.0
    rate: float = 100.0
    speed_range: tuple[float, float] = (0.5, 1.8)
    turn_rate_max: float = 0.6
    noise_acce: float = 0.05
    noise_gyro: float = 0.005
    seed: int = 0
    # forward/back body oscillation, metres per (m/s) of carrier speed
    gait_amplitude: float = 0.0
    # step frequency = base + slope * speed (Hz)
    step_freq: tuple[float, float] = (1.2, 0.6)

    def __post_init__(self):
        object.__setattr__(self, "speed_range", tuple(float(v) for v in self.speed_range))
        object.__setattr__(self, "step_freq", tuple(float(v) for v in self.step_freq))
        self.validate()

    def validate(self) -> None:
        if not self.duration > 0:
            raise PreconditionError("duration must be > 0")
        if not self.rate > 0:
            raise PreconditionError("rate must be > 0")
        lo, hi = self.speed_range
        if lo < 0 or lo > hi:
            raise PreconditionError("speed_range must satisfy 0 <= min <= max")
        if self.turn_rate_max < 0:
            raise PreconditionError("turn_rate_max must be >= 0")
        if self.noise_acce < 0:
            raise PreconditionError("noise_acce must be >= 0")
        if self.noise_gyro < 0:
            raise PreconditionError("noise_gyro must be >= 0")
        if self.gait_amplitude < 0:
            raise PreconditionError("gait_amplitude must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectorySpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise PreconditionError(f"unknown trajectory spec field(s): {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["speed_range"] = list(self.speed_range)
        d["step_freq"] = list(self.step_freq)
        return d


# The desk-scale corpus: 200 x 60 s x 100 Hz walking-like trajectories.
DEFAULT_CORPUS_SPEC = TrajectorySpec(gait_amplitude=0.01)
DEFAULT_CORPUS_SIZE = 200


@dataclass
class Trajectory:
    t: np.ndarray
    pos: np.ndarray
    yaw: np.ndarray | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.pos = np.asarray(self.pos, dtype=np.float64)
        if self.pos.ndim != 2 or self.pos.shape[1] not in (2, 3):
            raise PreconditionError("pos must be N x 2 or N x 3")
        if len(self.pos) != len(self.t):
            raise SizeError("t and pos lengths differ")
        if self.yaw is not None:
            self.yaw = np.asarray(self.yaw, dtype=np.float64)
            if len(self.yaw) != len(self.t):
                raise SizeError("t and yaw lengths differ")
        # order is free (metrics sort first) but a time may appear only once
        if len(np.unique(self.t)) != len(self.t):
            raise PreconditionError("trajectory timestamps must be distinct")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def xy(self) -> np.ndarray:
        return self.pos[:, :2]


def _mode_sum(rng, f_lo, f_hi):
    """Sum of sinusoids with weights summing to 1, so ``|value| <= 1``."""
    w = rng.dirichlet(np.ones(_N_MODES))
    freq = rng.uniform(f_lo, f_hi, _N_MODES)
    phase = rng.uniform(0, 2 * np.pi, _N_MODES)
    return w, 2 * np.pi * freq, phase


def gen_trajectory(spec: TrajectorySpec) -> Trajectory:
    rng = np.random.default_rng([spec.seed, 0])
    n = int(round(spec.duration * spec.rate))
    if n < 3:
        raise SizeError("duration * rate gives fewer than 3 samples")
    dt_fine = 1.0 / (spec.rate * _OVERSAMPLE)
    tf = np.arange((n - 1) * _OVERSAMPLE + 1) * dt_fine

    lo, hi = spec.speed_range
    w, om, ph = _mode_sum(rng, 0.005, 0.05)
    speed = 0.5 * (lo + hi) + 0.5 * (hi - lo) * (w[:, None] * np.sin(om[:, None] * tf + ph[:, None])).sum(0)

    # yaw integrates the bounded yaw-rate analytically
    w, om, ph = _mode_sum(rng, 0.01, 0.08)
    yaw0 = rng.uniform(-np.pi, np.pi)
    yaw = yaw0 + spec.turn_rate_max * (
        w[:, None] / om[:, None] * (np.cos(ph[:, None]) - np.cos(om[:, None] * tf + ph[:, None]))
    ).sum(0)

    heading = np.column_stack([np.cos(yaw), np.sin(yaw)])
    vel = speed[:, None] * heading
    pos = np.zeros_like(vel)
    pos[1:] = np.cumsum(0.5 * (vel[1:] + vel[:-1]) * dt_fine, axis=0)

    gait_phase0 = rng.uniform(0, 2 * np.pi)
    if spec.gait_amplitude > 0:
        f_step = spec.step_freq[0] + spec.step_freq[1] * speed
        phi = gait_phase0 + 2 * np.pi * np.concatenate([[0.0], np.cumsum(0.5 * (f_step[1:] + f_step[:-1]) * dt_fine)])
        # the even harmonic breaks the forward/backward symmetry of a pure sinusoid
        sway = spec.gait_amplitude * speed * (np.sin(phi) + 0.5 * np.cos(2 * phi))
        pos = pos + sway[:, None] * heading

    keep = slice(None, None, _OVERSAMPLE)
    pos3 = np.column_stack([pos[keep], np.zeros(n)])
    return Trajectory(t=np.arange(n) / spec.rate, pos=pos3, yaw=yaw[keep])


def circle_trajectory(radius: float, speed: float, duration: float, rate: float) -> Trajectory:
    n = int(round(duration * rate))
    t = np.arange(n) / rate
    ang = speed / radius * t
    pos = np.column_stack([radius * np.cos(ang), radius * np.sin(ang), np.zeros(n)])
    return Trajectory(t=t, pos=pos, yaw=ang + np.pi / 2)


def line_trajectory(velocity, duration: float, rate: float) -> Trajectory:
    n = int(round(duration * rate))
    t = np.arange(n) / rate
    vx, vy = velocity
    pos = np.column_stack([vx * t, vy * t, np.zeros(n)])
    return Trajectory(t=t, pos=pos, yaw=np.full(n, math.atan2(vy, vx)))


def world_acceleration(pos: np.ndarray, rate: float) -> np.ndarray:
    """Second difference of positions; end samples copy their neighbour."""
    if len(pos) < 3:
        raise SizeError("second-derivative estimation needs at least 3 samples")
    acc = np.empty_like(pos)
    acc[1:-1] = (pos[2:] - 2 * pos[1:-1] + pos[:-2]) * rate**2
    acc[0] = acc[1]
    acc[-1] = acc[-2]
    return acc


def yaw_quaternion(yaw: np.ndarray) -> np.ndarray:
    return np.column_stack([np.cos(yaw / 2), np.zeros_like(yaw), np.zeros_like(yaw), np.sin(yaw / 2)])


def simulate_imu(traj: Trajectory, spec: TrajectorySpec) -> ImuSequence:
    n = len(traj)
    if n < 3:
        raise SizeError("trajectory too short for second-derivative estimation (< 3 samples)")
    dt = np.diff(traj.t)
    if np.max(np.abs(dt * spec.rate - 1.0)) > 1e-6:
        raise PreconditionError("trajectory is not sampled at spec.rate")
    pos = traj.pos if traj.pos.shape[1] == 3 else np.column_stack([traj.pos, np.zeros(n)])
    yaw = traj.yaw if traj.yaw is not None else np.zeros(n)

    acc_world = world_acceleration(pos, spec.rate)
    force_world = acc_world + np.array([0.0, 0.0, GRAVITY])
    c, s = np.cos(yaw), np.sin(yaw)
    # R(yaw)^T applied row-wise
    acce = np.column_stack(
        [c * force_world[:, 0] + s * force_world[:, 1], -s * force_world[:, 0] + c * force_world[:, 1], force_world[:, 2]]
    )
    gyro = np.zeros((n, 3))
    gyro[:, 2] = np.gradient(np.unwrap(yaw), traj.t)

    rng = np.random.default_rng([spec.seed, 1])
    if spec.noise_acce > 0:
        acce = acce + rng.normal(0.0, spec.noise_acce, acce.shape)
    if spec.noise_gyro > 0:
        gyro = gyro + rng.normal(0.0, spec.noise_gyro, gyro.shape)

    return ImuSequence(
        t=traj.t,
        gyro=gyro,
        acce=acce,
        quat=yaw_quaternion(yaw),
        pos=pos,
        rate=spec.rate,
        frame="body",
        meta={"device": "synthetic", "duration_s": float(traj.t[-1] - traj.t[0]), "seed": int(spec.seed)},
    )


@dataclass(frozen=True)
class ConsistencyReport:
    max_residual: float
    rms_residual: float


def verify_consistency(seq: ImuSequence, traj: Trajectory) -> ConsistencyReport:
    """Double-integrate gravity-free world acceleration and compare with ``traj.pos``.

    Integration uses the exact inverse of the central second difference, seeded
    with the first two ground-truth positions.
    """
    world = rotate_to_world(seq) if seq.frame == "body" else seq
    acc = world.acce - np.array([0.0, 0.0, GRAVITY])
    gt = traj.pos if traj.pos.shape[1] == 3 else np.column_stack([traj.pos, np.zeros(len(traj))])
    n = len(gt)
    dt = 1.0 / seq.rate
    p0, p1 = gt[0], gt[1]
    est = np.empty_like(gt)
    est[0] = p0
    # velocity increments from a[1..n-2]
    dv = np.vstack([np.zeros((1, 3)), np.cumsum(acc[1:-1] * dt * dt, axis=0)])
    steps = (p1 - p0) + dv
    est[1:] = p0 + np.cumsum(steps, axis=0)
    err = np.linalg.norm(est - gt, axis=1)
    return ConsistencyReport(max_residual=float(err.max()), rms_residual=float(np.sqrt(np.mean(err**2))))


# ------------------------------------------------------------------- corpora


def corpus_specs(base: TrajectorySpec, n: int, seed: int) -> list[TrajectorySpec]:
    """Per-trajectory specs whose seeds depend only on ``(seed, index)``."""
    seqs = np.random.SeedSequence(seed).spawn(n)
    return [replace(base, seed=int(ss.generate_state(1, dtype=np.uint32)[0])) for ss in seqs]


@dataclass
class CorpusEntry:
    name: str
    spec: TrajectorySpec
    sequence: ImuSequence = field(repr=False)
    trajectory: Trajectory = field(repr=False)


def generate_corpus(base: TrajectorySpec = DEFAULT_CORPUS_SPEC, n: int = DEFAULT_CORPUS_SIZE, seed: int = 0):
    out = []
    for i, spec in enumerate(corpus_specs(base, n, seed)):
        traj = gen_trajectory(spec)
        out.append(CorpusEntry(f"seq_{i:03d}", spec, simulate_imu(traj, spec), traj))
    return out


def write_corpus(out_dir, base: TrajectorySpec = DEFAULT_CORPUS_SPEC, n: int = DEFAULT_CORPUS_SIZE, seed: int = 0) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"version": 1, "seed": seed, "n": n, "base_spec": base.to_dict(), "trajectories": []}
    for entry in generate_corpus(base, n, seed):
        save_canonical(entry.sequence, out_dir / entry.name)
        manifest["trajectories"].append({"name": entry.name, "seed": entry.spec.seed, "spec": entry.spec.to_dict()})
    (out_dir / "corpus.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out_dir
