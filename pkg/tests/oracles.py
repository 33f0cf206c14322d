"""Independent brute-force references used across the test suite."""
import bisect
import math

import numpy as np

from ftin.synth_world import Trajectory


def naive_dft_half(v):
    """O(N^2) orthonormal DFT of each column of ``v`` (N x d), bins 0..N//2."""
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    out = np.zeros((n // 2 + 1,) + v.shape[1:], dtype=np.complex128)
    for f in range(n // 2 + 1):
        for c in range(n):
            out[f] += v[c] * complex(math.cos(-2 * math.pi * c * f / n), math.sin(-2 * math.pi * c * f / n))
    return out / math.sqrt(n)


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def naive_slstm(x_proj, R):
    """Raw-exponential recurrence without the stabilizer state."""
    B, T, H4 = x_proj.shape
    H = H4 // 4
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    n = np.zeros((B, H))
    hs = []
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T):
            pre = x_proj[:, t] + h @ R.T
            z, i, f, o = np.split(pre, 4, axis=-1)
            c = np.exp(f) * c + np.exp(i) * np.tanh(z)
            n = np.exp(f) * n + np.exp(i)
            h = sigmoid(o) * c / n
            hs.append(h)
    return np.stack(hs, axis=1)


def naive_conv1d(x, w, stride, pad):
    """x: (C_in, L), w: (C_out, C_in, K) -> (C_out, L_out) by explicit loops."""
    c_in, L = x.shape
    c_out, _, K = w.shape
    xp = np.zeros((c_in, L + 2 * pad))
    xp[:, pad : pad + L] = x
    l_out = (L + 2 * pad - K) // stride + 1
    out = np.zeros((c_out, l_out))
    for o in range(c_out):
        for j in range(l_out):
            acc = 0.0
            for i in range(c_in):
                for k in range(K):
                    acc += w[o, i, k] * xp[i, j * stride + k]
            out[o, j] = acc
    return out


def naive_bn_eval(x, mean, var, gamma, beta, eps):
    out = np.empty_like(x)
    for ch in range(x.shape[0]):
        out[ch] = (x[ch] - mean[ch]) / math.sqrt(var[ch] + eps) * gamma[ch] + beta[ch]
    return out


# ---------------------------------------------------------------- metrics


def interp_loop(t, ts, ps):
    """Linear interpolation on the segment found by bisection."""
    if not ts[0] <= t <= ts[-1]:
        raise AssertionError("outside range")
    j = min(bisect.bisect_right(ts, t), len(ts) - 1) - 1
    w = (t - ts[j]) / (ts[j + 1] - ts[j])
    return ps[j] + w * (ps[j + 1] - ps[j])


def common(pred, gt):
    lo, hi = max(pred.t[0], gt.t[0]), min(pred.t[-1], gt.t[-1])
    rows = []
    for i in range(len(pred.t)):
        if lo <= pred.t[i] <= hi:
            rows.append((pred.t[i], pred.pos[i], interp_loop(pred.t[i], gt.t, gt.pos)))
    return rows


def ate_oracle(pred, gt):
    rows = common(pred, gt)
    return math.sqrt(sum(float(np.sum((p - g) ** 2)) for _, p, g in rows) / len(rows))


def rte_oracle(pred, gt, delta=60.0):
    rows = common(pred, gt)
    ts = np.array([r[0] for r in rows])
    ps = np.array([r[1] for r in rows])
    gs = np.array([r[2] for r in rows])
    errs = []
    for i in range(len(ts)):
        if ts[i] + delta <= ts[-1]:
            dp = interp_loop(ts[i] + delta, ts, ps) - ps[i]
            dg = interp_loop(ts[i] + delta, ts, gs) - gs[i]
            errs.append(float(np.sum((dp - dg) ** 2)))
    return math.sqrt(sum(errs) / len(errs))


def pde_oracle(pred, gt):
    rows = common(pred, gt)
    length = 0.0
    for k in range(1, len(rows)):
        length += math.hypot(*(rows[k][2] - rows[k - 1][2]))
    return math.hypot(*(rows[-1][1] - rows[-1][2])) / length


def random_pair(rng):
    tg = np.cumsum(rng.uniform(0.05, 0.2, size=int(rng.integers(800, 1500))))
    gt = Trajectory(t=tg, pos=np.cumsum(rng.normal(size=(len(tg), 2)), axis=0))
    tp = np.sort(rng.uniform(tg[0] - 3, tg[-1] + 3, size=int(rng.integers(300, 700))))
    pred = Trajectory(t=tp, pos=np.cumsum(rng.normal(size=(len(tp), 2)), axis=0))
    return pred, gt
