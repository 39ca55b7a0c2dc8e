"""Independent reference implementations used as test oracles.

These are deliberately naive (nested loops, direct summation, central
finite differences) and share no code with the library paths they check.
"""

import numpy as np


def conv2d_direct(x, w, b=None, stride=1, pad=0):
    """Quadruple-nested-loop cross-correlation, float64."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, cin, h, wid = x.shape
    cout, _, k, _ = w.shape
    xp = np.zeros((n, cin, h + 2 * pad, wid + 2 * pad))
    xp[:, :, pad:pad + h, pad:pad + wid] = x
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wid + 2 * pad - k) // stride + 1
    out = np.zeros((n, cout, ho, wo))
    for ni in range(n):
        for co in range(cout):
            for y in range(ho):
                for xx in range(wo):
                    acc = 0.0
                    for ci in range(cin):
                        for i in range(k):
                            for j in range(k):
                                acc += xp[ni, ci, y * stride + i, xx * stride + j] * w[co, ci, i, j]
                    out[ni, co, y, xx] = acc + (b[co] if b is not None else 0.0)
    return out


def pixel_shuffle_direct(x, r):
    """Index-formula rearrangement: out[n,c,rh+i,rw+j] = x[n, c*r^2+i*r+j, h, w]."""
    x = np.asarray(x)
    n, crr, h, w = x.shape
    c = crr // (r * r)
    out = np.zeros((n, c, h * r, w * r), dtype=x.dtype)
    for ni in range(n):
        for ci in range(c):
            for i in range(r):
                for j in range(r):
                    for y in range(h):
                        for xx in range(w):
                            out[ni, ci, r * y + i, r * xx + j] = x[ni, ci * r * r + i * r + j, y, xx]
    return out


def finite_diff_grad(f, x, h=1e-5):
    """Central-difference gradient of scalar f w.r.t. ndarray x (float64)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = x[i]
        x[i] = orig + h
        fp = f(x)
        x[i] = orig - h
        fm = f(x)
        x[i] = orig
        g[i] = (fp - fm) / (2.0 * h)
    return g


def max_rel_error(a, b, floor=1.0):
    """max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / denom).max())


def keys_cubic(x):
    ax = abs(float(x))
    if ax <= 1:
        return 1.5 * ax ** 3 - 2.5 * ax ** 2 + 1.0
    if ax < 2:
        return -0.5 * ax ** 3 + 2.5 * ax ** 2 - 4.0 * ax + 2.0
    return 0.0


def bicubic_direct(plane, ratio):
    """Direct-summation separable bicubic resize of a 2-d plane.

    Antialias kernel widening for ratio < 1, edge replication, weights
    normalized per output sample. Matches the documented resize contract but
    computed sample-by-sample.
    """
    plane = np.asarray(plane, dtype=np.float64)

    def axis_pass(arr, n_out, ratio):
        n_in = arr.shape[-1]
        kscale = min(ratio, 1.0)
        support = 2.0 / kscale
        out = np.zeros(arr.shape[:-1] + (n_out,))
        for o in range(n_out):
            u = (o + 0.5) / ratio - 0.5
            lo = int(np.floor(u - support)) + 1
            hi = int(np.ceil(u + support))
            wsum = 0.0
            acc = np.zeros(arr.shape[:-1])
            for s in range(lo, hi + 1):
                wgt = keys_cubic((u - s) * kscale)
                wsum += wgt
                acc += wgt * arr[..., min(max(s, 0), n_in - 1)]
            out[..., o] = acc / wsum
        return out

    h, w = plane.shape
    out = axis_pass(plane.T, int(np.ceil(h * ratio)), ratio).T
    return axis_pass(out, int(np.ceil(w * ratio)), ratio)


def count_parameters(cfg):
    """Closed-form parameter count for a model config (independent tally)."""
    c, k, ic = cfg.channels, cfg.kernel_size, cfg.image_channels
    conv = lambda cout, cin: cout * cin * k * k + cout
    block = 2 * conv(c, c)
    kind, kk = cfg._placement_k()
    n_coupled = kk
    total = conv(c, ic)                      # head
    total += cfg.num_modules * block         # main blocks
    total += conv(ic, c)                     # tail
    total += n_coupled * block               # tuning blocks
    n_heads = n_coupled
    if cfg.task == "sr":
        from controlres.model import sr_stages
        for f in sr_stages(cfg.sr_scale):
            total += 2 * conv(c * f * f, c)  # main + tuning upscalers
        n_heads += 1
    h1, h2, h3 = cfg.mapper_hidden
    total += h1 * cfg.control_dim + h2 * h1 + h3 * h2   # shared trunk, bias-free
    total += n_heads * (c * h3 + c * c)                 # per-module heads
    return total
