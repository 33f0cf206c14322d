"""Training loop, learning-rate schedule and finite-difference gradient checks."""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import NumericError, PreconditionError, ShapeError, SizeError
from .imu_data import windows_to_arrays
from .model import FtinConfig, build_model, load_checkpoint, save_checkpoint
from .model.network import ComplexMLP, FrequencyDomainLearning, Head
from .model.backbone import ResNet1d
from .model.slstm import SLSTM
from .model.spectral import HalfSpectrum

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 512
    max_epochs: int = 100
    lr_init: float = 1e-4
    lr_floor: float = 1e-6
    plateau_patience: int = 10
    lr_decay_factor: float = 0.1
    seed: int = 0
    early_stop: bool = True
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(self.betas))
        if not self.lr_floor < self.lr_init:
            raise PreconditionError("lr_floor must be below lr_init")
        if not 0 < self.lr_decay_factor < 1:
            raise PreconditionError("lr_decay_factor must lie in (0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1 or self.plateau_patience < 1:
            raise PreconditionError("batch_size, max_epochs and plateau_patience must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise PreconditionError(f"unknown train config field(s): {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainHistory:
    epoch: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    wall_time: list[float] = field(default_factory=list)
    best_epoch: int | None = None
    stopped_early: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainHistory":
        return cls(**d)

    def records(self) -> list[dict]:
        return [
            {"epoch": e, "train_loss": tl, "val_loss": vl, "lr": lr, "wall_time": wt}
            for e, tl, vl, lr, wt in zip(self.epoch, self.train_loss, self.val_loss, self.lr, self.wall_time)
        ]


def mse_loss(pred, target) -> torch.Tensor:
    """Mean of squared differences over every element (samples and both components)."""
    pred, target = torch.as_tensor(pred), torch.as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {tuple(pred.shape)} and target {tuple(target.shape)} differ")
    if pred.numel() == 0:
        raise SizeError("mse_loss of an empty batch")
    return ((pred - target) ** 2).mean()


class PlateauSchedule:
    """Multiply the learning rate by ``factor`` after ``patience`` epochs without a new best."""

    def __init__(self, lr: float, factor: float = 0.1, patience: int = 10, floor: float = 1e-6):
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.floor = floor
        self.best = math.inf
        self.bad_epochs = 0

    def step(self, val_loss: float) -> float:
        if val_loss < self.best:
            self.best = val_loss
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.lr *= self.factor
                self.bad_epochs = 0
        return self.lr

    @property
    def exhausted(self) -> bool:
        # slack so that 1e-4 * 0.1 * 0.1 does not count as below 1e-6
        return self.lr < self.floor * (1 - 1e-9)

    def state_dict(self) -> dict:
        return {"lr": self.lr, "best": self.best, "bad_epochs": self.bad_epochs}

    def load_state_dict(self, d: dict) -> None:
        self.lr, self.best, self.bad_epochs = d["lr"], d["best"], d["bad_epochs"]


def _as_arrays(data):
    if isinstance(data, tuple) and len(data) == 2:
        x, y = data
    else:
        x, y = windows_to_arrays(data)
    x = torch.as_tensor(np.asarray(x), dtype=torch.float32)
    y = torch.as_tensor(np.asarray(y), dtype=torch.float32)
    if len(x) == 0:
        raise SizeError("empty dataset")
    if len(x) != len(y):
        raise ShapeError("inputs and targets differ in length")
    return x, y


@torch.no_grad()
def evaluate_loss(model: nn.Module, x: torch.Tensor, y: torch.Tensor, batch_size: int = 1024) -> float:
    model.eval()
    total = 0.0
    for i in range(0, len(x), batch_size):
        pred = model(x[i : i + batch_size])
        total += float(((pred - y[i : i + batch_size]) ** 2).sum())
    return total / y.numel()


@torch.no_grad()
def predict(model: nn.Module, x, batch_size: int = 1024) -> np.ndarray:
    model.eval()
    x = torch.as_tensor(np.asarray(x), dtype=next(model.parameters()).dtype)
    outs = [model(x[i : i + batch_size]) for i in range(0, len(x), batch_size)]
    return torch.cat(outs).numpy().astype(np.float64) if outs else np.zeros((0, 2))


def _optim_arrays(opt: torch.optim.Optimizer) -> dict:
    out = {}
    for idx, st in opt.state_dict()["state"].items():
        for key, val in st.items():
            out[f"{idx}.{key}"] = val if isinstance(val, torch.Tensor) else torch.tensor(val)
    return out


def _load_optim_arrays(opt: torch.optim.Optimizer, arrays: dict) -> None:
    sd = opt.state_dict()
    state: dict = {}
    for name, val in arrays.items():
        idx, key = name.split(".", 1)
        state.setdefault(int(idx), {})[key] = val.clone()
    sd["state"] = state
    opt.load_state_dict(sd)


def _state_to_float(sd: dict) -> dict:
    return {k: v.detach().clone() for k, v in sd.items()}


def train(
    model_cfg: FtinConfig,
    train_cfg: TrainConfig,
    train_set,
    val_set,
    out_dir=None,
    resume: bool = False,
    on_epoch=None,
):
    """Train and return ``(model, history)`` with the best-validation weights loaded.

    ``train_set`` / ``val_set`` are ``(X, Y)`` array pairs or lists of
    :class:`~ftin.imu_data.LabeledWindow`. With ``out_dir`` the loop writes
    ``last.ckpt`` every epoch, ``best.ckpt`` on improvement and ``history.json``.
    """
    x_tr, y_tr = _as_arrays(train_set)
    x_va, y_va = _as_arrays(val_set)
    if x_tr.shape[1:] != (model_cfg.C, model_cfg.L):
        raise ShapeError(f"training windows {tuple(x_tr.shape[1:])} do not match config ({model_cfg.C}, {model_cfg.L})")

    model = build_model(model_cfg, seed=train_cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=train_cfg.lr_init, betas=train_cfg.betas, eps=train_cfg.eps)
    sched = PlateauSchedule(train_cfg.lr_init, train_cfg.lr_decay_factor, train_cfg.plateau_patience, train_cfg.lr_floor)
    history = TrainHistory()
    best_state = _state_to_float(model.state_dict())
    start_epoch = 0

    out_dir = Path(out_dir) if out_dir is not None else None
    if resume:
        if out_dir is None or not (out_dir / "last.ckpt").is_file():
            raise PreconditionError("resume requested but no last.ckpt in the output directory")
        _, params, state, optim = load_checkpoint(out_dir / "last.ckpt")
        model.load_state_dict(params)
        _load_optim_arrays(opt, optim)
        sched.load_state_dict(state["schedule"])
        start_epoch = state["epoch"] + 1
        if (out_dir / "history.json").is_file():
            history = TrainHistory.from_dict(json.loads((out_dir / "history.json").read_text()))
        if (out_dir / "best.ckpt").is_file():
            best_state = load_checkpoint(out_dir / "best.ckpt")[1]

    n = len(x_tr)
    for epoch in range(start_epoch, train_cfg.max_epochs):
        if train_cfg.early_stop and sched.exhausted:
            history.stopped_early = True
            break
        t0 = time.perf_counter()
        for group in opt.param_groups:
            group["lr"] = sched.lr
        gen = torch.Generator().manual_seed(train_cfg.seed * 1_000_003 + epoch)
        perm = torch.randperm(n, generator=gen)
        model.train()
        running, count = 0.0, 0
        for b, i in enumerate(range(0, n, train_cfg.batch_size)):
            idx = perm[i : i + train_cfg.batch_size]
            if len(idx) < 2 and n > 1:
                # batch statistics need two samples; fold the straggler into the next epoch
                continue
            loss = mse_loss(model(x_tr[idx]), y_tr[idx])
            if not torch.isfinite(loss.detach()):
                raise NumericError(f"non-finite training loss at epoch {epoch}, batch {b}")
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            running += loss.item() * len(idx)
            count += len(idx)
        train_loss = running / max(count, 1)
        val_loss = evaluate_loss(model, x_va, y_va)
        if not math.isfinite(val_loss):
            raise NumericError(f"non-finite validation loss at epoch {epoch}")

        lr_used = sched.lr
        improved = val_loss < sched.best
        sched.step(val_loss)
        if improved:
            best_state = _state_to_float(model.state_dict())
            history.best_epoch = epoch
        history.epoch.append(epoch)
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        history.lr.append(lr_used)
        history.wall_time.append(time.perf_counter() - t0)
        log.info("epoch %d train %.6g val %.6g lr %.3g", epoch, train_loss, val_loss, lr_used)

        if out_dir is not None:
            state = {"epoch": epoch, "schedule": sched.state_dict(), "best_epoch": history.best_epoch}
            save_checkpoint(out_dir / "last.ckpt", model_cfg, model.state_dict(), state, _optim_arrays(opt))
            if improved:
                save_checkpoint(out_dir / "best.ckpt", model_cfg, best_state, {"epoch": epoch, "val_loss": val_loss})
            (out_dir / "history.json").write_text(json.dumps(history.to_dict(), indent=2) + "\n")
        if on_epoch is not None:
            on_epoch(epoch, history)
    else:
        if train_cfg.early_stop and sched.exhausted:
            history.stopped_early = True

    model.load_state_dict(best_state)
    model.eval()
    return model, history


# ------------------------------------------------------------ gradient checks


_FD_ULPS = 16


def grad_check(module: nn.Module, inputs, eps: float = 1e-6, n_samples: int = 32, seed: int = 0, target=None) -> float:
    """Max relative error between autograd and central differences.

    The scalar checked is ``mse_loss(module(*inputs), target)`` with a random
    target. Up to ``n_samples`` scalar parameters are sampled. Relative error
    is ``(|a - n| - r) / max(|a|, |n|, 1e-7)`` (clipped at 0), where ``r`` is
    the rounding bound of the difference quotient, ``_FD_ULPS * ulp * |L| / eps``.
    """
    params = [p for p in module.parameters() if p.requires_grad]
    if not params:
        raise PreconditionError("module has no trainable parameters")
    if any(p.dtype != torch.float64 for p in params):
        raise PreconditionError("gradient checks run in double precision")
    inputs = tuple(inputs) if isinstance(inputs, (tuple, list)) else (inputs,)
    rng = np.random.default_rng(seed)

    def output():
        out = module(*inputs)
        return out if isinstance(out, torch.Tensor) else _flatten_output(out)

    with torch.no_grad():
        ref = output()
    if target is None:
        target = torch.as_tensor(rng.standard_normal(tuple(ref.shape)), dtype=torch.float64)

    def loss_value():
        return mse_loss(output(), target)

    module.zero_grad(set_to_none=True)
    loss_value().backward()

    sizes = np.array([p.numel() for p in params])
    flat_choice = rng.choice(sizes.sum(), size=min(n_samples, int(sizes.sum())), replace=False)
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    worst = 0.0
    for j in flat_choice:
        k = int(np.searchsorted(bounds, j, side="right") - 1)
        p, idx = params[k], int(j - bounds[k])
        analytic = float(p.grad.reshape(-1)[idx]) if p.grad is not None else 0.0
        flat = p.data.view(-1)
        orig = float(flat[idx])
        with torch.no_grad():
            flat[idx] = orig + eps
            up = float(loss_value())
            flat[idx] = orig - eps
            down = float(loss_value())
            flat[idx] = orig
        numeric = (up - down) / (2 * eps)
        # rounding in the two loss values alone can move the quotient by this much
        noise = _FD_ULPS * np.finfo(np.float64).eps * (abs(up) + abs(down)) / (2 * eps)
        err = max(abs(analytic - numeric) - noise, 0.0) / max(abs(analytic), abs(numeric), 1e-7)
        worst = max(worst, err)
    return worst


def _flatten_output(out):
    if isinstance(out, HalfSpectrum):
        return torch.cat([out.re.reshape(-1), out.im.reshape(-1)])
    if isinstance(out, tuple):
        return torch.cat([o.reshape(-1) for o in out])
    raise TypeError(f"cannot flatten {type(out).__name__}")


class _SpectrumBlock(nn.Module):
    """Adapter: feeds real/imaginary input tensors to a :class:`ComplexMLP`."""

    def __init__(self, mlp: ComplexMLP, n_full: int):
        super().__init__()
        self.mlp = mlp
        self.n_full = n_full

    def forward(self, re, im):
        return self.mlp(HalfSpectrum(re, im, self.n_full, dim=0))


GRAD_CHECK_BLOCKS = ("head", "backbone", "complex_mlp", "fdl", "slstm", "full_i", "full_ii", "full_iii", "full_iv")


def tiny_config(**overrides) -> FtinConfig:
    from .model.config import BackboneConfig, SlstmConfig

    base = dict(
        L=32,
        backbone=BackboneConfig(channels=(4, 6, 8), strides=(1, 2, 2), blocks_per_stage=1),
        d=4,
        n_freq_layers=2,
        l_fre=6,
        slstm=SlstmConfig(hidden_size=5, num_layers=1),
        head_widths=(6, 4, 2),
    )
    base.update(overrides)
    return FtinConfig(**base)


def block_for_check(block: str, config: FtinConfig | None = None, seed: int = 0, batch: int = 2):
    """Build a double-precision ``(module, inputs)`` pair for :func:`grad_check`.

    Inputs are drawn with a fixed seed; rectifier kinks are measure-zero for
    continuous random data and ``eps`` is far below the typical distance to one.
    """
    cfg = config or tiny_config()
    torch.manual_seed(seed)
    gen = torch.Generator().manual_seed(seed + 1)

    def rand(*shape):
        return torch.randn(*shape, generator=gen, dtype=torch.float64)

    if block == "head":
        mod = Head(7, cfg.head_widths, cfg.activation)
        inputs = (rand(batch, 7),)
    elif block == "backbone":
        mod = ResNet1d(cfg.C, cfg.backbone)
        inputs = (rand(batch, cfg.C, cfg.L),)
    elif block == "complex_mlp":
        mlp = ComplexMLP(cfg.d, cfg.n_freq_layers, cfg.activation)
        for b in list(mlp.b_r) + list(mlp.b_i):
            nn.init.normal_(b, std=0.1)
        mod = _SpectrumBlock(mlp, 9)
        inputs = (rand(5, 3, cfg.d), rand(5, 3, cfg.d))
    elif block == "fdl":
        mod = FrequencyDomainLearning(cfg.c_res, cfg.l_res, cfg.d, cfg.n_freq_layers, cfg.l_fre, cfg.activation)
        inputs = (rand(batch, cfg.c_res, cfg.l_res),)
    elif block == "slstm":
        mod = SLSTM(cfg.c_fre, cfg.slstm.hidden_size, cfg.slstm.num_layers)
        inputs = (rand(batch, cfg.l_fre, cfg.c_fre),)
    elif block.startswith("full_"):
        mod = build_model(cfg.variant(block.split("_", 1)[1]), seed=seed, dtype=torch.float64)
        inputs = (rand(batch, cfg.C, cfg.L),)
    else:
        raise PreconditionError(f"unknown block {block!r}; choose from {GRAD_CHECK_BLOCKS}")
    mod = mod.to(torch.float64)
    mod.train()
    return mod, inputs
