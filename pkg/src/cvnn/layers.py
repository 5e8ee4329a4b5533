"""Complex-valued network layers, all recorded on the autodiff tape.

Convolution follows the cross-correlation convention (no kernel flip).
Batch normalization whitens the per-channel 2x2 covariance of (Re, Im) by
its closed-form inverse principal square root.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Var
from .tensor import ComplexTensor


@dataclass
class Conv2dParams:
    """Complex kernel stack (out_ch, in_ch, kh, kw) plus per-channel bias."""
    weight: ComplexTensor
    bias: ComplexTensor
    stride: tuple = (1, 1)
    padding: tuple = (0, 0)


@dataclass
class PoolSpec:
    kernel: tuple
    stride: tuple


@dataclass
class BatchNormState:
    """Running whitening statistics for one complex batch-norm layer."""
    channels: int
    lam: float = 1e-5
    momentum: float = 0.1
    running_mean: ComplexTensor = None
    running_vrr: np.ndarray = None
    running_vri: np.ndarray = None
    running_vii: np.ndarray = None

    def __post_init__(self):
        c = self.channels
        if self.running_mean is None:
            self.running_mean = ComplexTensor.zeros((c,))
        if self.running_vrr is None:
            # fresh stats describe a circular unit-variance distribution
            self.running_vrr = np.full(c, 0.5)
            self.running_vri = np.zeros(c)
            self.running_vii = np.full(c, 0.5)

    def update(self, stats):
        m = self.momentum
        self.running_mean = ComplexTensor(
            (1 - m) * self.running_mean.real + m * stats["mean_x"],
            (1 - m) * self.running_mean.imag + m * stats["mean_y"],
        )
        self.running_vrr = (1 - m) * self.running_vrr + m * stats["vrr"]
        self.running_vri = (1 - m) * self.running_vri + m * stats["vri"]
        self.running_vii = (1 - m) * self.running_vii + m * stats["vii"]


def conv_output_hw(h, w, kh, kw, sh, sw, ph, pw):
    return (h + 2 * ph - kh) // sh + 1, (w + 2 * pw - kw) // sw + 1


def pool_output_hw(h, w, kh, kw, sh, sw):
    return (h - kh) // sh + 1, (w - kw) // sw + 1


def _chan(vec, ndim):
    """View a per-channel vector broadcastable over an (N, C, ...) array."""
    return vec.reshape((1, -1) + (1,) * (ndim - 2))


# ---------------------------------------------------------------------------
# Convolution

def _im2col(x, kh, kw, sh, sw):
    """(N, C, H, W) -> (N, C*kh*kw, Ho*Wo) patch matrix."""
    n, c, h, w = x.shape
    ho = (h - kh) // sh + 1
    wo = (w - kw) // sw + 1
    cols = np.empty((n, c, kh, kw, ho, wo), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = x[:, :, i:i + sh * ho:sh, j:j + sw * wo:sw]
    return cols.reshape(n, c * kh * kw, ho * wo), ho, wo


def _col2im(cols, x_shape, kh, kw, sh, sw, ho, wo):
    n, c, h, w = x_shape
    cols = cols.reshape(n, c, kh, kw, ho, wo)
    out = np.zeros(x_shape, dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i:i + sh * ho:sh, j:j + sw * wo:sw] += cols[:, :, i, j]
    return out


def _check_conv_shapes(x_shape, w_shape, stride, padding):
    if len(x_shape) != 4 or len(w_shape) != 4:
        raise ValueError("conv2d expects NCHW input and OIHW kernel")
    n, c, h, w = x_shape
    o, ci, kh, kw = w_shape
    if c != ci:
        raise ValueError(f"channel mismatch: input has {c}, kernel expects {ci}")
    ph, pw = padding
    if h + 2 * ph < kh or w + 2 * pw < kw:
        raise ValueError(
            f"kernel {kh}x{kw} larger than padded input {h + 2 * ph}x{w + 2 * pw}"
        )


def complex_conv2d(x: Var, w: Var, b: Var | None = None,
                   stride=(1, 1), padding=(0, 0)) -> Var:
    """Complex 2D convolution:
    Re = conv(Re x, Re w) - conv(Im x, Im w),
    Im = conv(Im x, Re w) + conv(Re x, Im w).
    """
    sh, sw = stride
    ph, pw = padding
    _check_conv_shapes(x.value.shape, w.value.shape, stride, padding)
    o, c, kh, kw = w.value.shape
    n = x.value.shape[0]

    pad = ((0, 0), (0, 0), (ph, ph), (pw, pw))
    xr = np.pad(x.value.real, pad)
    xi = np.pad(x.value.imag, pad)
    cols_r, ho, wo = _im2col(xr, kh, kw, sh, sw)
    cols_i, _, _ = _im2col(xi, kh, kw, sh, sw)
    wr = w.value.real.reshape(o, c * kh * kw)
    wi = w.value.imag.reshape(o, c * kh * kw)

    yr = np.matmul(wr, cols_r) - np.matmul(wi, cols_i)
    yi = np.matmul(wi, cols_r) + np.matmul(wr, cols_i)
    if b is not None:
        yr += b.value.real.reshape(1, o, 1)
        yi += b.value.imag.reshape(1, o, 1)
    out = ComplexTensor(yr.reshape(n, o, ho, wo), yi.reshape(n, o, ho, wo))

    padded_shape = xr.shape

    def bwd(gx, gy):
        gr = gx.reshape(n, o, ho * wo)
        gi = gy.reshape(n, o, ho * wo)
        gcols_r = np.matmul(wr.T, gr) + np.matmul(wi.T, gi)
        gcols_i = np.matmul(wr.T, gi) - np.matmul(wi.T, gr)
        gxr = _col2im(gcols_r, padded_shape, kh, kw, sh, sw, ho, wo)
        gxi = _col2im(gcols_i, padded_shape, kh, kw, sh, sw, ho, wo)
        h, wdt = x.value.shape[2:]
        gxr = gxr[:, :, ph:ph + h, pw:pw + wdt]
        gxi = gxi[:, :, ph:ph + h, pw:pw + wdt]
        gwr = (np.einsum("nol,nkl->ok", gr, cols_r)
               + np.einsum("nol,nkl->ok", gi, cols_i))
        gwi = (np.einsum("nol,nkl->ok", gi, cols_r)
               - np.einsum("nol,nkl->ok", gr, cols_i))
        grads = [(gxr, gxi),
                 (gwr.reshape(o, c, kh, kw), gwi.reshape(o, c, kh, kw))]
        if b is not None:
            grads.append((gr.sum(axis=(0, 2)), gi.sum(axis=(0, 2))))
        return grads

    inputs = [x, w] if b is None else [x, w, b]
    return x.tape.record(inputs, out, bwd)


def complex_linear(x: Var, w: Var, b: Var | None = None) -> Var:
    """y = x W^T + b with complex arithmetic; x is (N, d_in), w (d_out, d_in)."""
    if x.value.shape[-1] != w.value.shape[1]:
        raise ValueError(
            f"inner dim mismatch: x has {x.value.shape[-1]}, w expects {w.value.shape[1]}"
        )
    xr, xi = x.value.real, x.value.imag
    wr, wi = w.value.real, w.value.imag
    yr = xr @ wr.T - xi @ wi.T
    yi = xr @ wi.T + xi @ wr.T
    if b is not None:
        yr = yr + b.value.real
        yi = yi + b.value.imag
    out = ComplexTensor(yr, yi)

    def bwd(gx, gy):
        gxr = gx @ wr + gy @ wi
        gxi = gy @ wr - gx @ wi
        gwr = gx.T @ xr + gy.T @ xi
        gwi = gy.T @ xr - gx.T @ xi
        grads = [(gxr, gxi), (gwr, gwi)]
        if b is not None:
            grads.append((gx.sum(axis=0), gy.sum(axis=0)))
        return grads

    inputs = [x, w] if b is None else [x, w, b]
    return x.tape.record(inputs, out, bwd)


# ---------------------------------------------------------------------------
# Pooling

def _window_index(h, w, kh, kw, sh, sw):
    """Flat spatial indices of each pooling window, row-major within window."""
    if h < kh or w < kw:
        raise ValueError(f"pool window {kh}x{kw} larger than input {h}x{w}")
    ho = (h - kh) // sh + 1
    wo = (w - kw) // sw + 1
    rows = (np.arange(ho) * sh)[:, None] + np.arange(kh)[None, :]   # (Ho, kh)
    cols = (np.arange(wo) * sw)[:, None] + np.arange(kw)[None, :]   # (Wo, kw)
    idx = (rows[:, None, :, None] * w + cols[None, :, None, :])
    return idx.reshape(ho * wo, kh * kw), ho, wo


def complex_maxpool_mag(x: Var, kernel, stride) -> Var:
    """Per window, select the complex element of maximal magnitude.

    Ties break toward the lowest row-major index; the winning value is
    copied bit-for-bit, so phase is preserved exactly.
    """
    n, c, h, w = x.value.shape
    kh, kw = kernel
    sh, sw = stride
    win, ho, wo = _window_index(h, w, kh, kw, sh, sw)
    xr = x.value.real.reshape(n, c, h * w)
    xi = x.value.imag.reshape(n, c, h * w)
    mag2 = xr * xr + xi * xi
    gathered = mag2[:, :, win]                       # (N, C, L, K)
    amax = np.argmax(gathered, axis=-1)              # first max wins ties
    chosen = win[np.arange(win.shape[0])[None, None, :], amax]  # (N, C, L)
    our = np.take_along_axis(xr, chosen.reshape(n, c, -1), axis=-1)
    oui = np.take_along_axis(xi, chosen.reshape(n, c, -1), axis=-1)
    out = ComplexTensor(our.reshape(n, c, ho, wo), oui.reshape(n, c, ho, wo))

    def bwd(gx, gy):
        gr = np.zeros((n, c, h * w))
        gi = np.zeros((n, c, h * w))
        nidx = np.arange(n)[:, None, None]
        cidx = np.arange(c)[None, :, None]
        np.add.at(gr, (nidx, cidx, chosen), gx.reshape(n, c, -1))
        np.add.at(gi, (nidx, cidx, chosen), gy.reshape(n, c, -1))
        return [(gr.reshape(n, c, h, w), gi.reshape(n, c, h, w))]

    return x.tape.record([x], out, bwd)


def complex_avgpool(x: Var, kernel, stride) -> Var:
    """Per window, average the real and imaginary planes separately."""
    n, c, h, w = x.value.shape
    kh, kw = kernel
    sh, sw = stride
    win, ho, wo = _window_index(h, w, kh, kw, sh, sw)
    k = kh * kw
    xr = x.value.real.reshape(n, c, h * w)
    xi = x.value.imag.reshape(n, c, h * w)
    our = xr[:, :, win].mean(axis=-1)
    oui = xi[:, :, win].mean(axis=-1)
    out = ComplexTensor(our.reshape(n, c, ho, wo), oui.reshape(n, c, ho, wo))

    def bwd(gx, gy):
        gr = np.zeros((n, c, h * w))
        gi = np.zeros((n, c, h * w))
        nidx = np.arange(n)[:, None, None, None]
        cidx = np.arange(c)[None, :, None, None]
        widx = win[None, None, :, :]
        np.add.at(gr, (nidx, cidx, widx), gx.reshape(n, c, -1, 1) / k)
        np.add.at(gi, (nidx, cidx, widx), gy.reshape(n, c, -1, 1) / k)
        return [(gr.reshape(n, c, h, w), gi.reshape(n, c, h, w))]

    return x.tape.record([x], out, bwd)


def flatten(x: Var) -> Var:
    """(N, ...) -> (N, D)."""
    n = x.value.shape[0]
    shape = x.value.shape
    out = ComplexTensor(x.value.real.reshape(n, -1),
                        x.value.imag.reshape(n, -1))

    def bwd(gx, gy):
        return [(gx.reshape(shape), gy.reshape(shape))]

    return x.tape.record([x], out, bwd)


# ---------------------------------------------------------------------------
# Batch normalization (whitening form)

def _inv_sqrt_2x2(a, bb, cc):
    """Closed-form inverse principal square root of [[a, bb], [bb, cc]].

    With s = sqrt(det) and t = sqrt(trace + 2s), M^(1/2) = (M + sI)/t, so
    M^(-1/2) = adj(M + sI)/(s t).
    """
    s = np.sqrt(a * cc - bb * bb)
    t = np.sqrt(a + cc + 2.0 * s)
    den = s * t
    return (cc + s) / den, -bb / den, (a + s) / den, s, t, den


def complex_batchnorm_train(x: Var, grr: Var, gri: Var | None, gii: Var | None,
                            beta: Var, lam: float, gamma_mode: str = "matrix"):
    """Training batch norm: center, whiten by (V + lam*I)^(-1/2), affine.

    Returns (out, stats) where stats holds the batch mean and covariance for
    the caller's running-average update. gamma_mode "matrix" uses the 2x2
    symmetric affine (grr, gri, gii); "scalar" uses grr alone.
    """
    shape = x.value.shape
    if len(shape) < 2:
        raise ValueError("batchnorm expects (N, C, ...) input")
    axes = (0,) + tuple(range(2, len(shape)))
    ncount = int(np.prod([shape[i] for i in axes]))
    if ncount < 2:
        raise ValueError("batchnorm train mode needs at least 2 samples per channel")
    if lam <= 0:
        raise ValueError("Tikhonov lambda must be positive")
    nd = len(shape)

    xr, xi = x.value.real, x.value.imag
    mean_x = xr.mean(axis=axes)
    mean_y = xi.mean(axis=axes)
    cx = xr - _chan(mean_x, nd)
    cy = xi - _chan(mean_y, nd)
    vrr = (cx * cx).mean(axis=axes)
    vri = (cx * cy).mean(axis=axes)
    vii = (cy * cy).mean(axis=axes)

    a = vrr + lam
    bb = vri
    cc = vii + lam
    wrr, wri, wii, s, t, den = _inv_sqrt_2x2(a, bb, cc)

    xt_x = _chan(wrr, nd) * cx + _chan(wri, nd) * cy
    xt_y = _chan(wri, nd) * cx + _chan(wii, nd) * cy

    scalar = gamma_mode == "scalar"
    if scalar:
        g = grr.value.real
        ox = _chan(g, nd) * xt_x + _chan(beta.value.real, nd)
        oy = _chan(g, nd) * xt_y + _chan(beta.value.imag, nd)
    else:
        g_rr, g_ri, g_ii = grr.value.real, gri.value.real, gii.value.real
        ox = _chan(g_rr, nd) * xt_x + _chan(g_ri, nd) * xt_y + _chan(beta.value.real, nd)
        oy = _chan(g_ri, nd) * xt_x + _chan(g_ii, nd) * xt_y + _chan(beta.value.imag, nd)
    out = ComplexTensor(ox, oy)
    stats = {"mean_x": mean_x, "mean_y": mean_y,
             "vrr": vrr, "vri": vri, "vii": vii}

    def bwd(px, py):
        gbeta = (px.sum(axis=axes), py.sum(axis=axes))
        if scalar:
            gg = ((px * xt_x + py * xt_y).sum(axis=axes), None)
            qx = _chan(g, nd) * px
            qy = _chan(g, nd) * py
        else:
            ggrr = (px * xt_x).sum(axis=axes)
            ggri = (px * xt_y + py * xt_x).sum(axis=axes)
            ggii = (py * xt_y).sum(axis=axes)
            qx = _chan(g_rr, nd) * px + _chan(g_ri, nd) * py
            qy = _chan(g_ri, nd) * px + _chan(g_ii, nd) * py

        gwrr = (qx * cx).sum(axis=axes)
        gwri = (qx * cy + qy * cx).sum(axis=axes)
        gwii = (qy * cy).sum(axis=axes)

        gc_x = _chan(wrr, nd) * qx + _chan(wri, nd) * qy
        gc_y = _chan(wri, nd) * qx + _chan(wii, nd) * qy

        # chain through W = adj(M + sI)/(s t) back to M = V + lam*I
        s_a = cc / (2 * s)
        s_b = -bb / s
        s_c = a / (2 * s)
        t_a = (1 + 2 * s_a) / (2 * t)
        t_b = s_b / t
        t_c = (1 + 2 * s_c) / (2 * t)
        den_a = s_a * t + s * t_a
        den_b = s_b * t + s * t_b
        den_c = s_c * t + s * t_c
        den2 = den * den
        ga = (gwrr * (s_a / den - (cc + s) * den_a / den2)
              + gwri * (bb * den_a / den2)
              + gwii * ((1 + s_a) / den - (a + s) * den_a / den2))
        gb = (gwrr * (s_b / den - (cc + s) * den_b / den2)
              + gwri * (-1.0 / den + bb * den_b / den2)
              + gwii * (s_b / den - (a + s) * den_b / den2))
        gc = (gwrr * ((1 + s_c) / den - (cc + s) * den_c / den2)
              + gwri * (bb * den_c / den2)
              + gwii * (s_c / den - (a + s) * den_c / den2))

        gc_x = gc_x + (2 * cx * _chan(ga, nd) + cy * _chan(gb, nd)) / ncount
        gc_y = gc_y + (2 * cy * _chan(gc, nd) + cx * _chan(gb, nd)) / ncount

        gx = gc_x - _chan(gc_x.mean(axis=axes), nd)
        gy = gc_y - _chan(gc_y.mean(axis=axes), nd)

        zeros = np.zeros_like(gbeta[0])
        if scalar:
            return [(gx, gy), (gg[0], zeros), (gbeta[0], gbeta[1])]
        return [(gx, gy), (ggrr, zeros), (ggri, zeros.copy()),
                (ggii, zeros.copy()), (gbeta[0], gbeta[1])]

    if scalar:
        inputs = [x, grr, beta]
    else:
        inputs = [x, grr, gri, gii, beta]
    return x.tape.record(inputs, out, bwd), stats


def complex_batchnorm_eval(x: Var, state: BatchNormState,
                           grr: Var, gri: Var | None, gii: Var | None,
                           beta: Var, gamma_mode: str = "matrix") -> Var:
    """Inference batch norm using the stored running statistics."""
    nd = len(x.value.shape)
    a = state.running_vrr + state.lam
    bb = state.running_vri
    cc = state.running_vii + state.lam
    wrr, wri, wii, _, _, _ = _inv_sqrt_2x2(a, bb, cc)

    cx = x.value.real - _chan(state.running_mean.real, nd)
    cy = x.value.imag - _chan(state.running_mean.imag, nd)
    xt_x = _chan(wrr, nd) * cx + _chan(wri, nd) * cy
    xt_y = _chan(wri, nd) * cx + _chan(wii, nd) * cy

    scalar = gamma_mode == "scalar"
    if scalar:
        g = grr.value.real
        ox = _chan(g, nd) * xt_x + _chan(beta.value.real, nd)
        oy = _chan(g, nd) * xt_y + _chan(beta.value.imag, nd)
    else:
        g_rr, g_ri, g_ii = grr.value.real, gri.value.real, gii.value.real
        ox = _chan(g_rr, nd) * xt_x + _chan(g_ri, nd) * xt_y + _chan(beta.value.real, nd)
        oy = _chan(g_ri, nd) * xt_x + _chan(g_ii, nd) * xt_y + _chan(beta.value.imag, nd)
    out = ComplexTensor(ox, oy)
    axes = (0,) + tuple(range(2, nd))

    def bwd(px, py):
        gbeta = (px.sum(axis=axes), py.sum(axis=axes))
        zeros = np.zeros_like(gbeta[0])
        if scalar:
            gg = (px * xt_x + py * xt_y).sum(axis=axes)
            qx = _chan(g, nd) * px
            qy = _chan(g, nd) * py
        else:
            ggrr = (px * xt_x).sum(axis=axes)
            ggri = (px * xt_y + py * xt_x).sum(axis=axes)
            ggii = (py * xt_y).sum(axis=axes)
            qx = _chan(g_rr, nd) * px + _chan(g_ri, nd) * py
            qy = _chan(g_ri, nd) * px + _chan(g_ii, nd) * py
        gx = _chan(wrr, nd) * qx + _chan(wri, nd) * qy
        gy = _chan(wri, nd) * qx + _chan(wii, nd) * qy
        if scalar:
            return [(gx, gy), (gg, zeros), (gbeta[0], gbeta[1])]
        return [(gx, gy), (ggrr, zeros), (ggri, zeros.copy()),
                (ggii, zeros.copy()), (gbeta[0], gbeta[1])]

    inputs = [x, grr, beta] if scalar else [x, grr, gri, gii, beta]
    return x.tape.record(inputs, out, bwd)


# ---------------------------------------------------------------------------
# Classifier head and loss

def abs_logsoftmax_head(x: Var) -> Var:
    """Rowwise log-softmax of |z| for (N, K) inputs; output is real-valued."""
    if x.value.shape[-1] < 2:
        raise ValueError("head expects at least 2 classes")
    xr, xi = x.value.real, x.value.imag
    m = np.hypot(xr, xi)
    mx = m.max(axis=-1, keepdims=True)
    lse = mx + np.log(np.exp(m - mx).sum(axis=-1, keepdims=True))
    lp = m - lse
    out = ComplexTensor(lp, np.zeros_like(lp))

    def bwd(gx, gy):
        p = np.exp(lp)
        gm = gx - p * gx.sum(axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(m > 0, 1.0 / np.where(m > 0, m, 1.0), 0.0)
        return [(gm * xr * inv, gm * xi * inv)]

    return x.tape.record([x], out, bwd)


def real_logsoftmax(x: Var) -> Var:
    """Rowwise log-softmax on the real plane (real-valued networks)."""
    xr = x.value.real
    mx = xr.max(axis=-1, keepdims=True)
    lse = mx + np.log(np.exp(xr - mx).sum(axis=-1, keepdims=True))
    lp = xr - lse
    out = ComplexTensor(lp, np.zeros_like(lp))

    def bwd(gx, gy):
        p = np.exp(lp)
        gr = gx - p * gx.sum(axis=-1, keepdims=True)
        return [(gr, np.zeros_like(gr))]

    return x.tape.record([x], out, bwd)


def nll_loss(logp: Var, labels) -> Var:
    """Mean negative log-likelihood of integer class labels."""
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logp.value.shape
    if labels.shape != (n,):
        raise ValueError(f"labels must have shape ({n},), got {labels.shape}")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"label out of range [0, {k})")
    lp = logp.value.real
    val = -lp[np.arange(n), labels].mean()
    out = ComplexTensor(np.array([val]), np.zeros(1))

    def bwd(gx, gy):
        glp = np.zeros_like(lp)
        glp[np.arange(n), labels] = -gx[0] / n
        return [(glp, np.zeros_like(glp))]

    return logp.tape.record([logp], out, bwd)


def accuracy(logp: ComplexTensor | np.ndarray, labels) -> float:
    lp = logp.real if isinstance(logp, ComplexTensor) else np.asarray(logp)
    pred = lp.argmax(axis=-1)
    return float((pred == np.asarray(labels)).mean())


# ---------------------------------------------------------------------------
# Real-valued counterparts (baseline CNN and GNN plumbing). These operate
# on the real plane only and keep the imag plane at zero.

def real_conv2d(x: Var, w: Var, b: Var | None = None,
                stride=(1, 1), padding=(0, 0)) -> Var:
    sh, sw = stride
    ph, pw = padding
    _check_conv_shapes(x.value.shape, w.value.shape, stride, padding)
    o, c, kh, kw = w.value.shape
    n = x.value.shape[0]
    xr = np.pad(x.value.real, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    cols, ho, wo = _im2col(xr, kh, kw, sh, sw)
    wr = w.value.real.reshape(o, c * kh * kw)
    yr = np.matmul(wr, cols)
    if b is not None:
        yr += b.value.real.reshape(1, o, 1)
    out = ComplexTensor(yr.reshape(n, o, ho, wo),
                        np.zeros((n, o, ho, wo)))
    padded_shape = xr.shape

    def bwd(gx, gy):
        gr = gx.reshape(n, o, ho * wo)
        gcols = np.matmul(wr.T, gr)
        gxr = _col2im(gcols, padded_shape, kh, kw, sh, sw, ho, wo)
        h, wdt = x.value.shape[2:]
        gxr = gxr[:, :, ph:ph + h, pw:pw + wdt]
        gwr = np.einsum("nol,nkl->ok", gr, cols)
        grads = [(gxr, np.zeros_like(gxr)),
                 (gwr.reshape(o, c, kh, kw), np.zeros((o, c, kh, kw)))]
        if b is not None:
            grads.append((gr.sum(axis=(0, 2)), np.zeros(o)))
        return grads

    inputs = [x, w] if b is None else [x, w, b]
    return x.tape.record(inputs, out, bwd)


def real_linear(x: Var, w: Var, b: Var | None = None) -> Var:
    xr = x.value.real
    wr = w.value.real
    yr = xr @ wr.T
    if b is not None:
        yr = yr + b.value.real
    out = ComplexTensor(yr, np.zeros_like(yr))

    def bwd(gx, gy):
        grads = [(gx @ wr, np.zeros_like(xr)), (gx.T @ xr, np.zeros_like(wr))]
        if b is not None:
            grads.append((gx.sum(axis=0), np.zeros_like(b.value.real)))
        return grads

    inputs = [x, w] if b is None else [x, w, b]
    return x.tape.record(inputs, out, bwd)


def relu(x: Var) -> Var:
    xr = x.value.real
    mask = xr > 0
    out = ComplexTensor(np.where(mask, xr, 0.0), np.zeros_like(xr))

    def bwd(gx, gy):
        return [(gx * mask, np.zeros_like(gx))]

    return x.tape.record([x], out, bwd)


def real_maxpool(x: Var, kernel, stride) -> Var:
    n, c, h, w = x.value.shape
    kh, kw = kernel
    sh, sw = stride
    win, ho, wo = _window_index(h, w, kh, kw, sh, sw)
    xr = x.value.real.reshape(n, c, h * w)
    gathered = xr[:, :, win]
    amax = np.argmax(gathered, axis=-1)
    chosen = win[np.arange(win.shape[0])[None, None, :], amax]
    our = np.take_along_axis(xr, chosen.reshape(n, c, -1), axis=-1)
    out = ComplexTensor(our.reshape(n, c, ho, wo), np.zeros((n, c, ho, wo)))

    def bwd(gx, gy):
        gr = np.zeros((n, c, h * w))
        nidx = np.arange(n)[:, None, None]
        cidx = np.arange(c)[None, :, None]
        np.add.at(gr, (nidx, cidx, chosen), gx.reshape(n, c, -1))
        gr = gr.reshape(n, c, h, w)
        return [(gr, np.zeros_like(gr))]

    return x.tape.record([x], out, bwd)


def real_batchnorm_train(x: Var, gamma: Var, beta: Var, lam: float):
    """Standard per-channel batch norm on the real plane."""
    shape = x.value.shape
    axes = (0,) + tuple(range(2, len(shape)))
    ncount = int(np.prod([shape[i] for i in axes]))
    if ncount < 2:
        raise ValueError("batchnorm train mode needs at least 2 samples per channel")
    nd = len(shape)
    xr = x.value.real
    mu = xr.mean(axis=axes)
    cxp = xr - _chan(mu, nd)
    var = (cxp * cxp).mean(axis=axes)
    istd = 1.0 / np.sqrt(var + lam)
    xt = cxp * _chan(istd, nd)
    g = gamma.value.real
    ox = _chan(g, nd) * xt + _chan(beta.value.real, nd)
    out = ComplexTensor(ox, np.zeros_like(ox))
    stats = {"mean": mu, "var": var}

    def bwd(px, py):
        ggamma = (px * xt).sum(axis=axes)
        gbeta = px.sum(axis=axes)
        q = _chan(g, nd) * px
        dvar = (q * cxp).sum(axis=axes) * (-0.5) * istd ** 3
        dmu = (-(q.sum(axis=axes)) * istd
               + dvar * (-2.0) * cxp.sum(axis=axes) / ncount)
        gx = (q * _chan(istd, nd)
              + _chan(dvar, nd) * 2.0 * cxp / ncount
              + _chan(dmu, nd) / ncount)
        z = np.zeros_like(gbeta)
        return [(gx, np.zeros_like(gx)), (ggamma, z), (gbeta, z.copy())]

    return x.tape.record([x, gamma, beta], out, bwd), stats


def real_batchnorm_eval(x: Var, mean, var, gamma: Var, beta: Var, lam: float) -> Var:
    nd = len(x.value.shape)
    axes = (0,) + tuple(range(2, nd))
    istd = 1.0 / np.sqrt(var + lam)
    xt = (x.value.real - _chan(mean, nd)) * _chan(istd, nd)
    g = gamma.value.real
    ox = _chan(g, nd) * xt + _chan(beta.value.real, nd)
    out = ComplexTensor(ox, np.zeros_like(ox))

    def bwd(px, py):
        ggamma = (px * xt).sum(axis=axes)
        gbeta = px.sum(axis=axes)
        gx = _chan(g, nd) * px * _chan(istd, nd)
        z = np.zeros_like(gbeta)
        return [(gx, np.zeros_like(gx)), (ggamma, z), (gbeta, z.copy())]

    return x.tape.record([x, gamma, beta], out, bwd)


def real_matmul_const(m: np.ndarray, x: Var) -> Var:
    """Left-multiply the real plane by a constant matrix (graph aggregation)."""
    out = ComplexTensor(m @ x.value.real, np.zeros((m.shape[0], x.value.shape[1])))

    def bwd(gx, gy):
        return [(m.T @ gx, np.zeros_like(x.value.imag))]

    return x.tape.record([x], out, bwd)


def real_mean_rows(x: Var) -> Var:
    """(R, F) -> (1, F) mean over rows, real plane."""
    r = x.value.shape[0]
    out = ComplexTensor(x.value.real.mean(axis=0, keepdims=True),
                        np.zeros((1, x.value.shape[1])))

    def bwd(gx, gy):
        gr = np.repeat(gx, r, axis=0) / r
        return [(gr, np.zeros_like(gr))]

    return x.tape.record([x], out, bwd)
