"""Model checkpoint container.

Layout: magic "CVNNCKPT", u32 version, then ordered records of
(u32 name length, UTF-8 name, tensor in CVTNSR01 format) until EOF.
Round trips are bit-exact.
"""

from __future__ import annotations

import struct

from .tensor import ComplexTensor, read_tensor, write_tensor

CKPT_MAGIC = b"CVNNCKPT"
CKPT_VERSION = 1


def save_checkpoint(path, items) -> None:
    """items: ordered iterable of (name, ComplexTensor)."""
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<I", CKPT_VERSION))
        for name, tensor in items:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            write_tensor(fh, tensor)


def load_checkpoint(path) -> list:
    """Returns the ordered list of (name, ComplexTensor) records."""
    items = []
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != CKPT_MAGIC:
            raise ValueError(f"bad checkpoint magic: {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != CKPT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        while True:
            head = fh.read(4)
            if not head:
                break
            if len(head) != 4:
                raise ValueError("truncated checkpoint record header")
            (nlen,) = struct.unpack("<I", head)
            name = fh.read(nlen).decode("utf-8")
            items.append((name, read_tensor(fh)))
    return items
