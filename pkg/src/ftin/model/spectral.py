"""Half-spectrum transforms and the complex-valued MLP applied between them.

All transforms use the orthonormal convention (``1/sqrt(N)`` both ways) and keep
``floor(N/2) + 1`` bins so that the inverse is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import torch
import torch.nn.functional as F

from ..errors import NumericError, ShapeError


@dataclass
class HalfSpectrum:
    re: torch.Tensor
    im: torch.Tensor
    n_full: int
    dim: int = 0

    @property
    def n_bins(self) -> int:
        return self.re.shape[self.dim]


def _as_tensor(v) -> torch.Tensor:
    if isinstance(v, torch.Tensor):
        return v
    return torch.as_tensor(v, dtype=torch.float64)


def activation_fn(name: str):
    if name == "relu":
        return F.relu
    if name == "gelu":
        return F.gelu
    if name == "tanh":
        return torch.tanh
    if name == "identity":
        return lambda x: x
    raise ValueError(f"unknown activation {name!r}")


def token_embed(x_res, w1) -> torch.Tensor:
    """Lift ``(..., C, L)`` features to ``(..., C, L, d)`` by scaling a learned row."""
    x_res, w1 = _as_tensor(x_res), _as_tensor(w1)
    if w1.dim() != 2 or w1.shape[0] != 1:
        raise ShapeError(f"W1 must be 1 x d, got {tuple(w1.shape)}")
    return x_res.unsqueeze(-1) * w1[0]


# Short axes (everything the network transforms) use cached real DFT matrices,
# which beat FFT calls on non-trailing axes on CPU; long axes go through FFT.
MATRIX_DFT_MAX = 256


@lru_cache(maxsize=64)
def _dft_mats(n: int, dtype: torch.dtype):
    """Forward ``(F, N)`` and inverse ``(N, F)`` real matrices for the half spectrum."""
    n_bins = n // 2 + 1
    # angles only depend on (f * c) mod n, so index a length-n table
    k = torch.outer(torch.arange(n_bins), torch.arange(n)) % n  # (F, N)
    table = 2 * math.pi * torch.arange(n, dtype=torch.float64) / n
    scale = 1.0 / math.sqrt(n)
    cos, sin = torch.cos(table)[k], torch.sin(table)[k]
    fwd_re, fwd_im = cos * scale, -sin * scale
    # hermitian weights: bins with a distinct conjugate partner count twice
    w = torch.full((n_bins, 1), 2.0, dtype=torch.float64)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    inv_re = (fwd_re * w).t().contiguous()
    inv_im = (fwd_im * w).t().contiguous()
    return tuple(m.to(dtype) for m in (fwd_re, fwd_im, inv_re, inv_im))


def _as_3d(v: torch.Tensor, dim: int):
    dim = dim % v.dim()
    shape = v.shape
    pre = math.prod(shape[:dim])
    post = math.prod(shape[dim + 1 :])
    return v.reshape(pre, shape[dim], post), shape, dim


def dft_half(v, dim: int = 0) -> HalfSpectrum:
    """Orthonormal DFT along ``dim`` keeping bins ``0 .. floor(N/2)``."""
    v = _as_tensor(v)
    n = v.shape[dim]
    if n < 2:
        raise ShapeError("transform axis needs at least 2 points")
    if n > MATRIX_DFT_MAX:
        spec = torch.fft.rfft(v, dim=dim, norm="ortho")
        return HalfSpectrum(spec.real.contiguous(), spec.imag.contiguous(), n, dim % v.dim())
    v3, shape, dim = _as_3d(v, dim)
    fwd_re, fwd_im, _, _ = _dft_mats(n, v.dtype)
    out_shape = shape[:dim] + (n // 2 + 1,) + shape[dim + 1 :]
    re = torch.matmul(fwd_re, v3).reshape(out_shape)
    im = torch.matmul(fwd_im, v3).reshape(out_shape)
    return HalfSpectrum(re, im, n, dim)


def expand_full(spec: HalfSpectrum) -> torch.Tensor:
    """Rebuild all ``N`` bins as a complex tensor using ``X[N - f] = conj(X[f])``."""
    half = torch.complex(spec.re, spec.im)
    n, dim = spec.n_full, spec.dim
    tail = half.narrow(dim, 1, (n - 1) // 2).flip(dim).conj()
    return torch.cat([half, tail], dim=dim)


def imaginary_residue(spec: HalfSpectrum) -> float:
    """Largest imaginary part the full inverse would produce.

    Only the self-conjugate bins (DC and, for even ``N``, Nyquist) can carry
    one; it equals ``(|Im X_0| + |Im X_{N/2}|) / sqrt(N)`` at worst.
    """
    im = spec.im.detach()
    res = im.select(spec.dim, 0).abs()
    if spec.n_full % 2 == 0:
        res = res + im.select(spec.dim, spec.n_full // 2).abs()
    return float(res.max()) / math.sqrt(spec.n_full) if res.numel() else 0.0


def idft_half(spec: HalfSpectrum, strict: bool = True, tol: float = 1e-9) -> torch.Tensor:
    """Inverse of :func:`dft_half`, returning the real signal.

    The imaginary parts of the self-conjugate bins (DC and Nyquist) are the
    only possible imaginary residue; with ``strict`` a residue above ``tol``
    raises, otherwise it is discarded. The frequency-domain layers run
    non-strict since their nonlinearities move those bins off the real axis.
    """
    if strict:
        res = imaginary_residue(spec)
        if res > tol:
            raise NumericError(f"inverse transform left imaginary residue {res:.3g} > {tol:g}")
    n = spec.n_full
    if n > MATRIX_DFT_MAX:
        # irfft also ignores the imaginary parts of the DC / Nyquist bins
        return torch.fft.irfft(torch.complex(spec.re, spec.im), n=n, dim=spec.dim, norm="ortho")
    re3, shape, dim = _as_3d(spec.re, spec.dim)
    im3 = spec.im.reshape(re3.shape)
    _, _, inv_re, inv_im = _dft_mats(n, spec.re.dtype)
    out = torch.matmul(inv_re, re3) + torch.matmul(inv_im, im3)
    return out.reshape(shape[:dim] + (n,) + shape[dim + 1 :])


def complex_linear(re, im, w_r, w_i, b_r, b_i):
    """One complex affine map along the last axis, on split real/imaginary parts."""
    out_re = re @ w_r - im @ w_i + b_r
    out_im = re @ w_i + im @ w_r + b_i
    return out_re, out_im


def complex_mlp(spec: HalfSpectrum, layers, activation="relu", check_finite: bool = True) -> HalfSpectrum:
    """Apply complex layers ``(W_r, W_i, B_r, B_i)`` in sequence along the last axis.

    The activation acts on real and imaginary parts separately.
    """
    act = activation_fn(activation) if isinstance(activation, str) else activation
    re, im = spec.re, spec.im
    for n, (w_r, w_i, b_r, b_i) in enumerate(layers, start=1):
        if w_r.shape != w_i.shape or w_r.shape[0] != re.shape[-1]:
            raise ShapeError(f"layer {n}: weight shape {tuple(w_r.shape)} does not fit width {re.shape[-1]}")
        re, im = complex_linear(re, im, w_r, w_i, b_r, b_i)
        re, im = act(re), act(im)
        if check_finite and not (torch.isfinite(re).all() and torch.isfinite(im).all()):
            raise NumericError(f"non-finite value after complex layer {n}")
    return HalfSpectrum(re, im, spec.n_full, spec.dim)
