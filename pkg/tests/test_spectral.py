import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from ftin.errors import NumericError, ShapeError
from ftin.model.spectral import (
    HalfSpectrum,
    complex_mlp,
    dft_half,
    expand_full,
    idft_half,
    token_embed,
)
from oracles import naive_dft_half


def t64(a):
    return torch.as_tensor(np.asarray(a), dtype=torch.float64)


def test_constant_signal():
    spec = dft_half(t64([[1.0], [1.0], [1.0], [1.0]]))
    np.testing.assert_allclose(spec.re[:, 0].numpy(), [2.0, 0, 0], atol=1e-15)
    np.testing.assert_allclose(spec.im[:, 0].numpy(), 0.0, atol=1e-15)


def test_six_channels_keep_four_bins():
    spec = dft_half(t64(np.random.default_rng(0).normal(size=(6, 3))))
    assert spec.n_bins == 4 and spec.re.shape == (4, 3)


def test_matches_naive_summation():
    rng = np.random.default_rng(1)
    for n in range(2, 65):
        v = rng.normal(size=(n, 3))
        spec = dft_half(t64(v))
        ref = naive_dft_half(v)
        assert np.max(np.abs(spec.re.numpy() - ref.real)) < 1e-12
        assert np.max(np.abs(spec.im.numpy() - ref.imag)) < 1e-12


def test_other_axis():
    rng = np.random.default_rng(2)
    v = rng.normal(size=(2, 5, 7, 3))
    spec = dft_half(t64(v), dim=2)
    ref = naive_dft_half(np.moveaxis(v, 2, 0))
    np.testing.assert_allclose(np.moveaxis(spec.re.numpy(), 2, 0), ref.real, atol=1e-12)
    back = idft_half(spec)
    np.testing.assert_allclose(back.numpy(), v, atol=1e-12)


def test_real_bins_have_zero_imag():
    rng = np.random.default_rng(3)
    for n in (7, 8):
        spec = dft_half(t64(rng.normal(size=(n, 4))))
        assert np.max(np.abs(spec.im[0].numpy())) < 1e-14
        if n % 2 == 0:
            assert np.max(np.abs(spec.im[n // 2].numpy())) < 1e-14


@pytest.mark.parametrize("n", [4, 5, 16, 63, 64, 100, 257, 1024])
def test_round_trip_and_parseval(n):
    v = t64(np.random.default_rng(n).normal(size=(n, 3)))
    spec = dft_half(v)
    assert torch.max(torch.abs(idft_half(spec) - v)) < 1e-10
    energy = torch.sum(torch.abs(expand_full(spec)) ** 2, dim=0)
    assert torch.max(torch.abs(energy - torch.sum(v**2, dim=0))) < 1e-10


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 1024), seed=st.integers(0, 10_000))
def test_unitarity_property(n, seed):
    v = t64(np.random.default_rng(seed).normal(size=(n, 2)))
    spec = dft_half(v)
    assert torch.max(torch.abs(idft_half(spec) - v)) < 1e-10
    full = expand_full(spec)
    assert torch.allclose(torch.sum(torch.abs(full) ** 2), torch.sum(v**2), rtol=0, atol=1e-10 * max(1.0, n / 100))


def test_full_expansion_matches_numpy_fft():
    v = np.random.default_rng(4).normal(size=(9, 2))
    full = expand_full(dft_half(t64(v))).numpy()
    np.testing.assert_allclose(full, np.fft.fft(v, axis=0, norm="ortho"), atol=1e-12)


def test_dc_only_inverse():
    n = 9
    re = torch.zeros(n // 2 + 1, 1, dtype=torch.float64)
    re[0] = np.sqrt(n)
    out = idft_half(HalfSpectrum(re, torch.zeros_like(re), n))
    np.testing.assert_allclose(out.numpy(), 1.0, atol=1e-14)


def test_strict_inverse_rejects_asymmetric_spectrum():
    n = 8
    re = torch.zeros(5, 1, dtype=torch.float64)
    im = torch.zeros_like(re)
    im[0] = 1.0
    with pytest.raises(NumericError):
        idft_half(HalfSpectrum(re, im, n))
    # non-strict drops the self-conjugate imaginary parts
    np.testing.assert_allclose(idft_half(HalfSpectrum(re, im, n), strict=False).numpy(), 0.0, atol=1e-15)


def test_too_short_axis():
    with pytest.raises(ShapeError):
        dft_half(t64([[1.0]]))


# ------------------------------------------------------------- token embed


def test_token_embed_identity():
    x = t64(np.random.default_rng(5).normal(size=(4, 3)))
    out = token_embed(x, t64([[1.0]]))
    assert out.shape == (4, 3, 1)
    assert torch.equal(out[..., 0], x)


def test_token_embed_scalar():
    out = token_embed(t64([[5.0]]), t64([[2.0, 3.0]]))
    np.testing.assert_array_equal(out[0, 0].numpy(), [10.0, 15.0])


def test_token_embed_shape():
    out = token_embed(torch.zeros(256, 25), torch.ones(1, 32))
    assert out.shape == (256, 25, 32)


def test_token_embed_rejects_bad_w1():
    with pytest.raises(ShapeError):
        token_embed(torch.zeros(3, 4), torch.ones(2, 3))


# ------------------------------------------------------------- complex MLP


def random_layer(rng, d, scale=1.0):
    return tuple(t64(rng.normal(size=s) * scale) for s in [(d, d), (d, d), (d,), (d,)])


def test_decoupled_case():
    rng = np.random.default_rng(6)
    d = 5
    w_r = t64(rng.normal(size=(d, d)))
    spec = HalfSpectrum(t64(rng.normal(size=(4, d))), t64(rng.normal(size=(4, d))), 6)
    zeros = torch.zeros(d, dtype=torch.float64)
    out = complex_mlp(spec, [(w_r, torch.zeros(d, d, dtype=torch.float64), zeros, zeros)], "identity")
    np.testing.assert_allclose(out.re.numpy(), (spec.re @ w_r).numpy(), atol=1e-13)
    np.testing.assert_allclose(out.im.numpy(), (spec.im @ w_r).numpy(), atol=1e-13)


def test_complex_affine_oracle():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 65))
        rows = int(rng.integers(1, 9))
        layer = random_layer(rng, d)
        re, im = rng.normal(size=(rows, d)), rng.normal(size=(rows, d))
        out = complex_mlp(HalfSpectrum(t64(re), t64(im), 2 * rows - 1), [layer], "identity")
        w = layer[0].numpy() + 1j * layer[1].numpy()
        b = layer[2].numpy() + 1j * layer[3].numpy()
        ref = (re + 1j * im) @ w + b
        worst = max(worst, np.max(np.abs(out.re.numpy() - ref.real)), np.max(np.abs(out.im.numpy() - ref.imag)))
    assert worst < 1e-10


def test_relu_keeps_zero_imaginary():
    rng = np.random.default_rng(8)
    d = 6
    w_r = t64(rng.normal(size=(d, d)))
    zeros_w = torch.zeros(d, d, dtype=torch.float64)
    layer = (w_r, zeros_w, t64(rng.normal(size=d)), torch.zeros(d, dtype=torch.float64))
    spec = HalfSpectrum(t64(rng.normal(size=(3, d))), torch.zeros(3, d, dtype=torch.float64), 5)
    out = complex_mlp(spec, [layer, layer], "relu")
    assert torch.count_nonzero(out.im) == 0
    assert torch.count_nonzero(out.re) > 0


def test_non_finite_reports_layer():
    d = 2
    ok = tuple(torch.eye(d, dtype=torch.float64) if i == 0 else torch.zeros(s, dtype=torch.float64) for i, s in enumerate([(d, d), (d, d), (d,), (d,)]))
    bad = (torch.full((d, d), float("inf"), dtype=torch.float64),) + ok[1:]
    spec = HalfSpectrum(torch.ones(2, d, dtype=torch.float64), torch.zeros(2, d, dtype=torch.float64), 3)
    with pytest.raises(NumericError, match="layer 2"):
        complex_mlp(spec, [ok, bad], "identity")


def test_layer_width_mismatch():
    spec = HalfSpectrum(torch.ones(2, 3, dtype=torch.float64), torch.zeros(2, 3, dtype=torch.float64), 3)
    layer = tuple(torch.zeros(s, dtype=torch.float64) for s in [(4, 4), (4, 4), (4,), (4,)])
    with pytest.raises(ShapeError):
        complex_mlp(spec, [layer])


@pytest.mark.parametrize("n", [255, 256, 257, 300, 512, 1023])
def test_both_transform_paths_match_numpy(n):
    v = np.random.default_rng(n).normal(size=(3, n, 2))
    spec = dft_half(t64(v), dim=1)
    ref = np.fft.rfft(v, axis=1, norm="ortho")
    assert np.max(np.abs(spec.re.numpy() - ref.real)) < 1e-12
    assert np.max(np.abs(spec.im.numpy() - ref.imag)) < 1e-12
    np.testing.assert_allclose(idft_half(spec).numpy(), v, atol=1e-12)
    bad = HalfSpectrum(spec.re, spec.im + 1.0, n, 1)
    with pytest.raises(NumericError):
        idft_half(bad)
