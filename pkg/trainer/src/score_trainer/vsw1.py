"""Reader/writer for the VSW1 weight container.

Independent implementation of the documented format (little-endian: magic
"VSW1", u32 tensor count, then per tensor u16 name length + UTF-8 name,
u8 rank, rank x u32 dims, float32 row-major data).  The segmentation
toolkit validates these files against its published tensor table, so this
module is the only coupling surface between trainer and consumer.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"VSW1"


def save(tensors: dict[str, np.ndarray], path: str | Path) -> None:
    chunks = [MAGIC, struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"tensor {name!r} contains non-finite values")
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.astype("<f4", copy=False).tobytes(order="C"))
    Path(path).write_bytes(b"".join(chunks))


def load(path: str | Path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise ValueError(f"not a VSW1 file: {path}")
    off = 4
    (count,) = struct.unpack_from("<I", blob, off)
    off += 4
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        name = blob[off:off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<B", blob, off)
        off += 1
        dims = struct.unpack_from(f"<{rank}I", blob, off) if rank else ()
        off += 4 * rank
        n = int(np.prod(dims, dtype=np.int64)) if rank else 1
        out[name] = np.frombuffer(blob, dtype="<f4", count=n,
                                  offset=off).reshape(dims).copy()
        off += 4 * n
    if off != len(blob):
        raise ValueError("trailing bytes in weight file")
    return out
