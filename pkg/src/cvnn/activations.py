"""Complex activation functions, recorded on the autodiff tape.

All six map 0 to 0. modReLU and cardioid preserve phase wherever the output
is nonzero. Gradients at the non-differentiable sets (quadrant boundaries,
the circle |z| = -b, the origin) take the subgradient with the inactive
branch contributing zero; gradient checks stay away from those sets.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Var
from .tensor import ComplexTensor

ACTIVATIONS = ("crelu", "modrelu", "zrelu", "smooth_zrelu", "split_tanh", "cardioid")


def crelu(z: Var) -> Var:
    """ReLU applied independently to the real and imaginary parts."""
    xr, xi = z.value.real, z.value.imag
    mr = xr > 0
    mi = xi > 0
    out = ComplexTensor(np.where(mr, xr, 0.0), np.where(mi, xi, 0.0))

    def bwd(gx, gy):
        return [(gx * mr, gy * mi)]

    return z.tape.record([z], out, bwd)


def modrelu(z: Var, b: Var) -> Var:
    """ReLU(|z| + b) * z/|z|; b is a real per-channel bias (broadcast on axis 1).

    Output (and gradient) is zero at z = 0 and wherever |z| + b < 0.
    """
    xr, xi = z.value.real, z.value.imag
    nd = xr.ndim
    bvec = b.value.real.reshape((1, -1) + (1,) * (nd - 2))
    m = np.hypot(xr, xi)
    active = (m + bvec >= 0) & (m > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_m = np.where(m > 0, 1.0 / np.where(m > 0, m, 1.0), 0.0)
    scale = np.where(active, 1.0 + bvec * inv_m, 0.0)
    out = ComplexTensor(xr * scale, xi * scale)

    def bwd(gx, gy):
        inv3 = inv_m ** 3
        bx = np.where(active, bvec, 0.0)
        dxx = scale - bx * xr * xr * inv3
        dxy = -bx * xr * xi * inv3
        dyy = scale - bx * xi * xi * inv3
        gzr = gx * dxx + gy * dxy
        gzi = gx * dxy + gy * dyy
        gb = np.where(active, (gx * xr + gy * xi) * inv_m, 0.0)
        axes = (0,) + tuple(range(2, nd))
        return [(gzr, gzi), (gb.sum(axis=axes), np.zeros(b.value.shape))]

    return z.tape.record([z, b], out, bwd)


def zrelu(z: Var) -> Var:
    """Pass z through only in the closed first quadrant (Re >= 0 and Im >= 0)."""
    xr, xi = z.value.real, z.value.imag
    mask = (xr >= 0) & (xi >= 0)
    out = ComplexTensor(np.where(mask, xr, 0.0), np.where(mask, xi, 0.0))

    def bwd(gx, gy):
        return [(gx * mask, gy * mask)]

    return z.tape.record([z], out, bwd)


def smooth_zrelu(z: Var, alpha: float = 1.0) -> Var:
    """z * sigmoid(alpha Re z) * sigmoid(alpha Im z), smooth everywhere."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    xr, xi = z.value.real, z.value.imag
    p = 1.0 / (1.0 + np.exp(-alpha * xr))
    q = 1.0 / (1.0 + np.exp(-alpha * xi))
    pq = p * q
    out = ComplexTensor(xr * pq, xi * pq)

    def bwd(gx, gy):
        dp = alpha * p * (1.0 - p) * q     # d(pq)/dRe
        dq = alpha * q * (1.0 - q) * p     # d(pq)/dIm
        gzr = gx * (pq + xr * dp) + gy * (xi * dp)
        gzi = gx * (xr * dq) + gy * (pq + xi * dq)
        return [(gzr, gzi)]

    return z.tape.record([z], out, bwd)


def split_tanh(z: Var) -> Var:
    """tanh applied independently to the real and imaginary parts."""
    tr = np.tanh(z.value.real)
    ti = np.tanh(z.value.imag)
    out = ComplexTensor(tr, ti)

    def bwd(gx, gy):
        return [(gx * (1.0 - tr * tr), gy * (1.0 - ti * ti))]

    return z.tape.record([z], out, bwd)


def cardioid(z: Var) -> Var:
    """(z/2)(1 + cos phi): phase-preserving magnitude attenuation.

    Computed as 0.5*(z + z*Re(z)/|z|) with a zero guard at the origin.
    """
    xr, xi = z.value.real, z.value.imag
    m = np.hypot(xr, xi)
    safe = m > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_m = np.where(safe, 1.0 / np.where(safe, m, 1.0), 0.0)
    cosphi = xr * inv_m
    factor = 0.5 * (1.0 + cosphi)
    out = ComplexTensor(xr * factor, xi * factor)

    def bwd(gx, gy):
        inv3 = inv_m ** 3
        # partials of (x*(1+x/m)/2, y*(1+x/m)/2)
        dxx = 0.5 + xr * inv_m - 0.5 * xr ** 3 * inv3
        dxy = -0.5 * xr * xr * xi * inv3
        dyx = 0.5 * xi * inv_m - 0.5 * xr * xr * xi * inv3
        dyy = 0.5 + 0.5 * xr * inv_m - 0.5 * xr * xi * xi * inv3
        gzr = np.where(safe, gx * dxx + gy * dyx, 0.0)
        gzi = np.where(safe, gx * dxy + gy * dyy, 0.0)
        return [(gzr, gzi)]

    return z.tape.record([z], out, bwd)


def apply_activation(kind: str, z: Var, b: Var | None = None,
                     alpha: float = 1.0) -> Var:
    """Dispatch by config name (crelu|modrelu|zrelu|smooth_zrelu|split_tanh|cardioid)."""
    if kind == "crelu":
        return crelu(z)
    if kind == "modrelu":
        if b is None:
            raise ValueError("modrelu requires its per-channel bias")
        return modrelu(z, b)
    if kind == "zrelu":
        return zrelu(z)
    if kind == "smooth_zrelu":
        return smooth_zrelu(z, alpha)
    if kind == "split_tanh":
        return split_tanh(z)
    if kind == "cardioid":
        return cardioid(z)
    raise ValueError(f"unknown activation '{kind}' (expected one of {ACTIVATIONS})")
