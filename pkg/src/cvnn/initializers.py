"""Complex weight initialization schemes.

Three isotropic schemes plus the split-plane Xavier variant. All sampling is
inverse-CDF on the deterministic PCG32 stream, so a given seed reproduces
tensors exactly.
"""

from __future__ import annotations

import numpy as np

from .tensor import ComplexTensor, Rng

SCHEMES = ("xavier_circular", "he_circular", "rayleigh_phase", "xavier_split")


def _check_shape(shape):
    shape = tuple(int(d) for d in shape)
    if not shape or int(np.prod(shape)) == 0:
        raise ValueError(f"empty init shape {shape}")
    return shape


def xavier_circular_uniform(n: int, m: int, shape, rng: Rng) -> ComplexTensor:
    """Uniform on the complex disk of radius sqrt(6/(n+m)).

    Radius via r = R*sqrt(u) (inverse CDF), angle uniform on [-pi, pi).
    Second moment E|z|^2 = R^2/2 = 3/(n+m).
    """
    if n + m < 1:
        raise ValueError("fan_in + fan_out must be >= 1")
    shape = _check_shape(shape)
    radius = np.sqrt(6.0 / (n + m))
    r = radius * np.sqrt(rng.uniform(shape))
    theta = rng.uniform(shape, -np.pi, np.pi)
    return ComplexTensor(r * np.cos(theta), r * np.sin(theta))


def he_circular_normal(n: int, shape, rng: Rng) -> ComplexTensor:
    """Circular-symmetric Gaussian: Re, Im i.i.d. N(0, 2/n), E|z|^2 = 4/n."""
    if n < 1:
        raise ValueError("fan_in must be >= 1")
    shape = _check_shape(shape)
    std = np.sqrt(2.0 / n)
    return ComplexTensor(rng.normal(shape, std), rng.normal(shape, std))


def rayleigh_phase_init(criterion: str, fan_in: int, fan_out: int,
                        shape, rng: Rng) -> ComplexTensor:
    """Rayleigh magnitude times a uniform phasor.

    The mode sigma targets Var(W) = E|W|^2 = 2*sigma^2 equal to 2/fan_in
    (criterion "he") or 2/(fan_in+fan_out) (criterion "glorot"), matching
    the deep-complex-networks convention.
    """
    if fan_in < 1 or fan_out < 1:
        raise ValueError("fans must be >= 1")
    shape = _check_shape(shape)
    if criterion == "he":
        sigma = 1.0 / np.sqrt(fan_in)
    elif criterion == "glorot":
        sigma = 1.0 / np.sqrt(fan_in + fan_out)
    else:
        raise ValueError(f"unknown criterion '{criterion}' (he|glorot)")
    u = rng.uniform(shape)
    r = sigma * np.sqrt(-2.0 * np.log1p(-u))   # Rayleigh inverse CDF
    theta = rng.uniform(shape, -np.pi, np.pi)
    return ComplexTensor(r * np.cos(theta), r * np.sin(theta))


def xavier_split(n: int, m: int, shape, rng: Rng) -> ComplexTensor:
    """Independent per-plane uniform with the real Xavier bounds."""
    shape = _check_shape(shape)
    bound = np.sqrt(6.0 / (n + m))
    return ComplexTensor(rng.uniform(shape, -bound, bound),
                         rng.uniform(shape, -bound, bound))


def init_tensor(scheme: str, shape, fan_in: int, fan_out: int, rng: Rng,
                criterion: str = "he") -> ComplexTensor:
    """Dispatch by config name."""
    if scheme == "xavier_circular":
        return xavier_circular_uniform(fan_in, fan_out, shape, rng)
    if scheme == "he_circular":
        return he_circular_normal(fan_in, shape, rng)
    if scheme == "rayleigh_phase":
        return rayleigh_phase_init(criterion, fan_in, fan_out, shape, rng)
    if scheme == "xavier_split":
        return xavier_split(fan_in, fan_out, shape, rng)
    raise ValueError(f"unknown init scheme '{scheme}' (expected one of {SCHEMES})")


def conv_fans(out_ch: int, in_ch: int, kh: int, kw: int):
    """fan_in = in_ch*kh*kw, fan_out = out_ch*kh*kw."""
    return in_ch * kh * kw, out_ch * kh * kw
