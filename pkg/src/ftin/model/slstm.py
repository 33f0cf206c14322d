"""Scalar LSTM with exponential input/forget gates and a log-space stabilizer."""
from __future__ import annotations

import math

import torch
from torch import nn

from ..errors import NumericError

GATES = ("z", "i", "f", "o")


def slstm_scan(x_proj: torch.Tensor, R: torch.Tensor, check_finite: bool = True):
    """Run the recurrence over precomputed input projections.

    ``x_proj`` is ``(B, T, 4H)`` holding ``W x_t + b`` for gates z, i, f, o (in
    that order); ``R`` is ``(4H, H)``. Returns the hidden sequence ``(B, T, H)``.
    """
    B, T, four_h = x_proj.shape
    H = four_h // 4
    h = x_proj.new_zeros(B, H)
    c = x_proj.new_zeros(B, H)
    n = x_proj.new_zeros(B, H)
    m = x_proj.new_zeros(B, H)
    Rt = R.t()
    hs = []
    for t in range(T):
        pre = x_proj[:, t] + h @ Rt
        z_pre, i_pre, f_pre, o_pre = pre.chunk(4, dim=-1)
        z = torch.tanh(z_pre)
        o = torch.sigmoid(o_pre)
        m_new = torch.maximum(f_pre + m, i_pre)
        i_gate = torch.exp(i_pre - m_new)
        f_gate = torch.exp(f_pre + m - m_new)
        c = f_gate * c + i_gate * z
        n = f_gate * n + i_gate
        h = o * (c / n)
        m = m_new
        hs.append(h)
    out = torch.stack(hs, dim=1)
    if check_finite and not torch.isfinite(out).all():
        raise NumericError("non-finite sLSTM hidden state")
    return out


class SLSTMLayer(nn.Module):
    def __init__(self, input_size: int, hidden_size: int):
        super().__init__()
        self.hidden_size = hidden_size
        self.W = nn.Parameter(torch.empty(4 * hidden_size, input_size))
        self.R = nn.Parameter(torch.empty(4 * hidden_size, hidden_size))
        self.b = nn.Parameter(torch.zeros(4 * hidden_size))
        nn.init.uniform_(self.W, -1 / math.sqrt(input_size), 1 / math.sqrt(input_size))
        nn.init.uniform_(self.R, -1 / math.sqrt(hidden_size), 1 / math.sqrt(hidden_size))

    def forward(self, x):
        return slstm_scan(x @ self.W.t() + self.b, self.R, check_finite=not self.training)


class SLSTM(nn.Module):
    """Stack of sLSTM layers over ``(B, T, features)`` input.

    Returns the top layer's hidden sequence and its final hidden state.
    """

    def __init__(self, input_size: int, hidden_size: int, num_layers: int = 1):
        super().__init__()
        sizes = [input_size] + [hidden_size] * (num_layers - 1)
        self.layers = nn.ModuleList(SLSTMLayer(s, hidden_size) for s in sizes)

    def forward(self, x):
        for layer in self.layers:
            x = layer(x)
        return x, x[:, -1]
