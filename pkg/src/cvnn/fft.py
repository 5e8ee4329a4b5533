"""Radix-2 FFT, a naive DFT reference, and the orthonormal DCT-II.

The iterative radix-2 transform is the production path (lengths must be
powers of two); dft_direct is the O(N^2) sum kept as an independent oracle.
"""

from __future__ import annotations

import numpy as np

_REV_CACHE = {}
_TWIDDLE_CACHE = {}


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _bit_reverse_indices(n: int) -> np.ndarray:
    rev = _REV_CACHE.get(n)
    if rev is None:
        bits = n.bit_length() - 1
        rev = np.zeros(n, dtype=np.int64)
        for i in range(1, n):
            rev[i] = (rev[i >> 1] >> 1) | ((i & 1) << (bits - 1))
        _REV_CACHE[n] = rev
    return rev


def fft_radix2(x: np.ndarray) -> np.ndarray:
    """Decimation-in-time FFT along the last axis (power-of-two length)."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise ValueError(f"fft length must be a power of two, got {n}")
    out = x[..., _bit_reverse_indices(n)].copy()
    size = 2
    while size <= n:
        half = size // 2
        tw = _TWIDDLE_CACHE.get(size)
        if tw is None:
            tw = np.exp(-2j * np.pi * np.arange(half) / size)
            _TWIDDLE_CACHE[size] = tw
        view = out.reshape(out.shape[:-1] + (n // size, size))
        odd = view[..., half:] * tw
        even = view[..., :half].copy()
        view[..., :half] = even + odd
        view[..., half:] = even - odd
        size *= 2
    return out


def rfft_radix2(x: np.ndarray) -> np.ndarray:
    """FFT of a real signal keeping bins 0..N/2 (last axis)."""
    full = fft_radix2(x)
    n = x.shape[-1]
    return full[..., : n // 2 + 1]


def dft_direct(x: np.ndarray) -> np.ndarray:
    """Naive O(N^2) DFT along the last axis; the test oracle."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    out = np.empty_like(x)
    idx = np.arange(n)
    for k in range(n):
        out[..., k] = (x * np.exp(-2j * np.pi * k * idx / n)).sum(axis=-1)
    return out


def dct2_matrix(m: int) -> np.ndarray:
    """Orthonormal DCT-II matrix: C[q, j] = s_q cos(pi (j + 1/2) q / m)."""
    q = np.arange(m)[:, None]
    j = np.arange(m)[None, :]
    mat = np.cos(np.pi * (j + 0.5) * q / m)
    mat[0] *= np.sqrt(1.0 / m)
    mat[1:] *= np.sqrt(2.0 / m)
    return mat
