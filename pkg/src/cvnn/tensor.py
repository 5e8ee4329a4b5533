"""Complex tensor storage, a portable PRNG, and flat binary serialization.

Tensors hold separate contiguous float64 real/imag planes so each plane can
be handed directly to real-valued kernels. Rank is limited to 1..4.
"""

from __future__ import annotations

import struct

import numpy as np

# Real-valued data is carried as plain float64 ndarrays.
RealTensor = np.ndarray

TENSOR_MAGIC = b"CVTNSR01"
MAX_RANK = 4


def _validate_shape(shape):
    if not 1 <= len(shape) <= MAX_RANK:
        raise ValueError(f"tensor rank must be 1..{MAX_RANK}, got shape {shape}")
    if any(d < 1 for d in shape):
        raise ValueError(f"all dims must be >= 1, got shape {shape}")


def as_plane(data) -> np.ndarray:
    """Coerce array-like data to a contiguous float64 plane."""
    return np.ascontiguousarray(data, dtype=np.float64)


class ComplexTensor:
    """Dense complex array stored as split float64 real/imag planes."""

    __slots__ = ("real", "imag")

    def __init__(self, real, imag):
        real = as_plane(real)
        imag = as_plane(imag)
        if real.shape != imag.shape:
            raise ValueError(
                f"real/imag shape mismatch: {real.shape} vs {imag.shape}"
            )
        _validate_shape(real.shape)
        self.real = real
        self.imag = imag

    @property
    def shape(self):
        return self.real.shape

    @property
    def size(self):
        return self.real.size

    @property
    def rank(self):
        return self.real.ndim

    @classmethod
    def zeros(cls, shape):
        return cls(np.zeros(shape), np.zeros(shape))

    @classmethod
    def full(cls, shape, value):
        value = complex(value)
        return cls(np.full(shape, value.real), np.full(shape, value.imag))

    @classmethod
    def from_complex(cls, z):
        """Build from a numpy complex (or real) array."""
        z = np.asarray(z)
        return cls(z.real, z.imag if np.iscomplexobj(z) else np.zeros_like(z, dtype=np.float64))

    def to_complex(self) -> np.ndarray:
        return self.real + 1j * self.imag

    def copy(self):
        return ComplexTensor(self.real.copy(), self.imag.copy())

    def reshape(self, shape):
        return ComplexTensor(self.real.reshape(shape), self.imag.reshape(shape))

    def __add__(self, other):
        other = _coerce(other, self.shape)
        return ComplexTensor(self.real + other.real, self.imag + other.imag)

    def __sub__(self, other):
        other = _coerce(other, self.shape)
        return ComplexTensor(self.real - other.real, self.imag - other.imag)

    def __mul__(self, other):
        other = _coerce(other, self.shape)
        return cmul(self, other)

    def __neg__(self):
        return ComplexTensor(-self.real, -self.imag)

    def __repr__(self):
        return f"ComplexTensor(shape={self.shape})"


def _coerce(value, shape):
    if isinstance(value, ComplexTensor):
        return value
    return ComplexTensor.full(shape, value)


def from_parts(real: RealTensor, imag: RealTensor) -> ComplexTensor:
    """Assemble a complex tensor from same-shape real and imaginary planes."""
    real = as_plane(real)
    imag = as_plane(imag)
    if real.shape != imag.shape:
        raise ValueError(f"real/imag shape mismatch: {real.shape} vs {imag.shape}")
    return ComplexTensor(real, imag)


def cmul(a: ComplexTensor, b: ComplexTensor) -> ComplexTensor:
    """Elementwise complex product (ac - bd) + i(ad + bc)."""
    if a.shape != b.shape:
        raise ValueError(f"cmul shape mismatch: {a.shape} vs {b.shape}")
    return ComplexTensor(
        a.real * b.real - a.imag * b.imag,
        a.real * b.imag + a.imag * b.real,
    )


def magnitude(t: ComplexTensor) -> RealTensor:
    """Elementwise |z|."""
    return np.hypot(t.real, t.imag)


def phase(t: ComplexTensor) -> RealTensor:
    """Elementwise principal argument in (-pi, pi]; phase(0) := 0.

    Adding 0.0 to the imag plane folds -0.0 into +0.0 so that values on the
    negative real axis report +pi, never -pi.
    """
    return np.arctan2(t.imag + 0.0, t.real)


# ---------------------------------------------------------------------------
# Serialization: magic "CVTNSR01", u32 rank, u32 dims (LE), then the real
# plane followed by the imag plane as little-endian f64.

def write_tensor(fh, t: ComplexTensor) -> None:
    fh.write(TENSOR_MAGIC)
    fh.write(struct.pack("<I", t.rank))
    fh.write(struct.pack(f"<{t.rank}I", *t.shape))
    fh.write(np.ascontiguousarray(t.real, dtype="<f8").tobytes())
    fh.write(np.ascontiguousarray(t.imag, dtype="<f8").tobytes())


def read_tensor(fh) -> ComplexTensor:
    magic = fh.read(8)
    if magic != TENSOR_MAGIC:
        raise ValueError(f"bad tensor magic: {magic!r}")
    (rank,) = struct.unpack("<I", fh.read(4))
    if not 1 <= rank <= MAX_RANK:
        raise ValueError(f"bad tensor rank: {rank}")
    shape = struct.unpack(f"<{rank}I", fh.read(4 * rank))
    n = int(np.prod(shape))
    raw = fh.read(16 * n)
    if len(raw) != 16 * n:
        raise ValueError("truncated tensor payload")
    flat = np.frombuffer(raw, dtype="<f8")
    real = flat[:n].reshape(shape)
    imag = flat[n:].reshape(shape)
    return ComplexTensor(real, imag)


def save_tensor(path, t: ComplexTensor) -> None:
    with open(path, "wb") as fh:
        write_tensor(fh, t)


def load_tensor(path) -> ComplexTensor:
    with open(path, "rb") as fh:
        return read_tensor(fh)


# ---------------------------------------------------------------------------
# PRNG. The generator is PCG32 (XSH-RR variant, 64-bit LCG state, 32-bit
# output) with the reference seeding procedure, so identical seeds give
# bitwise-identical streams on every platform. Floating-point derivations
# (uniform, Box-Muller normals) are fixed formulas on the u32 stream.

_PCG_MULT = np.uint64(6364136223846793005)


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


class Rng:
    """Deterministic PCG32 stream.

    `seed` picks the state, `stream` the increment (distinct streams are
    statistically independent). `split(k)` derives a child stream for
    per-parameter or per-clip use.
    """

    def __init__(self, seed: int, stream: int = 0):
        self._seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._stream = int(stream) & 0xFFFFFFFFFFFFFFFF
        inc = ((self._stream << 1) | 1) & 0xFFFFFFFFFFFFFFFF
        self._inc = np.uint64(inc)
        state = 0
        state = (state * 6364136223846793005 + inc) & 0xFFFFFFFFFFFFFFFF
        state = (state + self._seed) & 0xFFFFFFFFFFFFFFFF
        state = (state * 6364136223846793005 + inc) & 0xFFFFFFFFFFFFFFFF
        self._state = np.uint64(state)

    def split(self, k: int) -> "Rng":
        """Independent child generator; deterministic in (seed, stream, k)."""
        child_seed = _splitmix64(self._seed ^ _splitmix64(k + 1))
        child_stream = _splitmix64(self._stream + 2 * k + 1)
        return Rng(child_seed, child_stream)

    def u32(self, n: int) -> np.ndarray:
        """Next n raw 32-bit outputs."""
        n = int(n)
        if n == 0:
            return np.empty(0, dtype=np.uint32)
        with np.errstate(over="ignore"):
            powers = np.empty(n, dtype=np.uint64)
            powers[0] = np.uint64(1)
            if n > 1:
                powers[1:] = np.cumprod(
                    np.full(n - 1, _PCG_MULT, dtype=np.uint64)
                )
            # geometric partial sums: sums[i] = 1 + a + ... + a^(i-1)
            sums = np.empty(n, dtype=np.uint64)
            sums[0] = np.uint64(0)
            if n > 1:
                sums[1:] = np.cumsum(powers[:-1])
            states = powers * self._state + sums * self._inc
            self._state = np.uint64(
                (int(_PCG_MULT) * int(states[-1]) + int(self._inc))
                & 0xFFFFFFFFFFFFFFFF
            )
            xorshifted = (((states >> np.uint64(18)) ^ states)
                          >> np.uint64(27)).astype(np.uint32)
            rot = (states >> np.uint64(59)).astype(np.uint32)
            out = (xorshifted >> rot) | (
                xorshifted << ((np.uint32(32) - rot) & np.uint32(31))
            )
        return out

    def uniform(self, shape, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """Uniform f64 samples in [low, high) derived as u32 / 2^32."""
        shape = _normalize_shape(shape)
        n = int(np.prod(shape))
        u = self.u32(n).astype(np.float64) / 4294967296.0
        return (low + (high - low) * u).reshape(shape)

    def uniform_open(self, shape) -> np.ndarray:
        """Uniform f64 in the open interval (0, 1): (u32 + 0.5) / 2^32."""
        shape = _normalize_shape(shape)
        n = int(np.prod(shape))
        u = (self.u32(n).astype(np.float64) + 0.5) / 4294967296.0
        return u.reshape(shape)

    def normal(self, shape, std: float = 1.0) -> np.ndarray:
        """Gaussian samples via the trigonometric Box-Muller transform."""
        shape = _normalize_shape(shape)
        n = int(np.prod(shape))
        pairs = (n + 1) // 2
        u1 = self.uniform_open((pairs,))
        u2 = self.uniform((pairs,))
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return (std * z).reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of arange(n)."""
        perm = np.arange(n)
        if n < 2:
            return perm
        u = self.uniform((n - 1,))
        for j in range(n - 1, 0, -1):
            k = int(u[n - 1 - j] * (j + 1))
            perm[j], perm[k] = perm[k], perm[j]
        return perm

    def integers(self, n: int, bound: int) -> np.ndarray:
        """n integers in [0, bound) (floor of uniform scaling)."""
        return np.minimum(
            (self.uniform((n,)) * bound).astype(np.int64), bound - 1
        )


def _normalize_shape(shape):
    if isinstance(shape, (int, np.integer)):
        return (int(shape),)
    return tuple(int(d) for d in shape)
