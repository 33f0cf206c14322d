"""FTIN network: residual backbone, frequency-domain stage, sLSTM stage, regression head."""
from __future__ import annotations

import math
from functools import lru_cache

import torch
from torch import nn
from torch.func import functional_call

from ..errors import ShapeError
from .backbone import ResNet1d
from .config import FtinConfig
from .slstm import SLSTM
from .spectral import HalfSpectrum, activation_fn, complex_mlp, dft_half, idft_half, token_embed


def _uniform_(t: torch.Tensor, fan_in: int) -> torch.Tensor:
    bound = 1.0 / math.sqrt(fan_in)
    with torch.no_grad():
        return t.uniform_(-bound, bound)


class ComplexMLP(nn.Module):
    """``n_layers`` complex d x d layers stored as paired real tensors."""

    def __init__(self, d: int, n_layers: int, activation: str = "relu"):
        super().__init__()
        self.activation = activation
        self.w_r = nn.ParameterList(nn.Parameter(_uniform_(torch.empty(d, d), d)) for _ in range(n_layers))
        self.w_i = nn.ParameterList(nn.Parameter(_uniform_(torch.empty(d, d), d)) for _ in range(n_layers))
        self.b_r = nn.ParameterList(nn.Parameter(torch.zeros(d)) for _ in range(n_layers))
        self.b_i = nn.ParameterList(nn.Parameter(torch.zeros(d)) for _ in range(n_layers))

    def layers(self):
        return list(zip(self.w_r, self.w_i, self.b_r, self.b_i))

    def forward(self, spec: HalfSpectrum) -> HalfSpectrum:
        # the training loop guards the loss instead of every intermediate
        return complex_mlp(spec, self.layers(), self.activation, check_finite=not self.training)


class FrequencyDomainLearning(nn.Module):
    """Token embedding, channel-axis and time-axis spectral MLPs, then a per-channel FC.

    Maps ``(B, C_res, L_res)`` to ``(B, C_res, l_fre)``.
    """

    def __init__(self, c_res: int, l_res: int, d: int, n_layers: int, l_fre: int, activation: str = "relu"):
        super().__init__()
        self.c_res, self.l_res, self.d = c_res, l_res, d
        self.activation = activation
        self.w1 = nn.Parameter(torch.full((1, d), 1.0 / math.sqrt(d)))
        self.channel_mlp = ComplexMLP(d, n_layers, activation)
        self.temporal_mlp = ComplexMLP(d, n_layers, activation)
        self.fc = nn.Linear(l_res * d, l_fre)

    def channel_pass(self, emb):
        # emb: (B, C, L, d); transform along C
        return idft_half(self.channel_mlp(dft_half(emb, dim=1)), strict=False)

    def temporal_pass(self, z):
        return idft_half(self.temporal_mlp(dft_half(z, dim=2)), strict=False)

    def forward(self, x_res):
        if x_res.shape[1:] != (self.c_res, self.l_res):
            raise ShapeError(f"expected (B, {self.c_res}, {self.l_res}), got {tuple(x_res.shape)}")
        emb = token_embed(x_res, self.w1)
        z = self.channel_pass(emb)
        x = self.temporal_pass(z)
        x = x.flatten(2)  # (B, C, L*d)
        return activation_fn(self.activation)(self.fc(x))


class Head(nn.Module):
    def __init__(self, in_features: int, widths, activation: str = "relu"):
        super().__init__()
        w1, w2, w3 = widths
        self.fc1 = nn.Linear(in_features, w1)
        self.fc2 = nn.Linear(w1, w2)
        self.fc3 = nn.Linear(w2, w3)
        self.activation = activation

    def forward(self, x):
        act = activation_fn(self.activation)
        return self.fc3(act(self.fc2(act(self.fc1(x)))))


class Ftin(nn.Module):
    """Backbone -> [FDL] -> [TDL] -> head, with both middle stages optional.

    Parameter names follow ``stage.block.tensor``, e.g.
    ``backbone.stages.1.0.conv1.weight`` or ``fdl.channel_mlp.w_r.0``.
    """

    def __init__(self, config: FtinConfig):
        super().__init__()
        self.config = config
        self.backbone = ResNet1d(config.C, config.backbone)
        self.fdl = (
            FrequencyDomainLearning(
                config.c_res, config.l_res, config.d, config.n_freq_layers, config.l_fre, config.activation
            )
            if config.fdl_enabled
            else None
        )
        self.tdl = (
            SLSTM(config.c_fre if config.fdl_enabled else config.c_res, config.slstm.hidden_size, config.slstm.num_layers)
            if config.tdl_enabled
            else None
        )
        head_in = config.slstm.hidden_size if config.tdl_enabled else config.c_res
        self.head = Head(head_in, config.head_widths, config.activation)
        for mod in self.modules():
            if isinstance(mod, (nn.Linear, nn.Conv1d)):
                fan_in = mod.weight[0].numel()
                _uniform_(mod.weight, fan_in)
                if mod.bias is not None:
                    nn.init.zeros_(mod.bias)

    def features(self, x):
        """Everything up to the head input."""
        feats = self.backbone(x)
        if self.fdl is not None:
            feats = self.fdl(feats)
        if self.tdl is not None:
            _, h_last = self.tdl(feats.transpose(1, 2))
            return h_last
        return feats.mean(dim=-1)

    def forward(self, x):
        return self.head(self.features(x))


@lru_cache(maxsize=32)
def _skeleton(config: FtinConfig) -> Ftin:
    model = Ftin(config)
    model.eval()
    return model


def ftin_forward(params: dict, config: FtinConfig, x) -> torch.Tensor:
    """Pure inference: velocities for ``x`` of shape ``(6, L)`` or ``(B, 6, L)``.

    ``params`` is a full state dict (parameters and normalisation buffers).
    """
    x = torch.as_tensor(x)
    single = x.dim() == 2
    if single:
        x = x.unsqueeze(0)
    model = _skeleton(config)
    ref = next(iter(params.values()))
    x = x.to(ref.dtype)
    with torch.no_grad():
        out = functional_call(model.to(ref.dtype), params, (x,), strict=True)
    return out[0] if single else out


def build_model(config: FtinConfig, seed: int | None = None, dtype=torch.float32) -> Ftin:
    if seed is not None:
        torch.manual_seed(seed)
    return Ftin(config).to(dtype)
