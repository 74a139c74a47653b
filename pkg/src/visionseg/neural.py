"""Forward passes for the reduced U-Net and the profile refinement net.

The U-Net is the standard encoder/decoder with skip connections, cut down
to 3 levels of 8/16/32 channels, emitting one logit map the size of its
input.  The refinement net runs in two stages on that map: first an
adaptive scalar subtraction ``y = sigmoid(x - relu(rowsums(x) . w1 + b1))``
that counteracts sigmoid flattening, then a 1-D encoder/decoder over the
row sums of y that classifies every row as cut/non-cut, producing a profile
the threshold selection from :mod:`visionseg.profileseg` can consume.

Everything here is plain numpy and deterministic; training happens
elsewhere and communicates exclusively through the VSW1 weight file format
documented at :func:`save_weights`.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit as sigmoid

from .imaging import invert, resize_gray
from .profileseg import (
    PageSegmentation,
    ThresholdParams,
    critical_points,
    extract_regions,
    select_cuts,
)


class WeightFormatError(Exception):
    """Raised for malformed, truncated or inconsistent weight files."""


class NetSpecError(Exception):
    """Raised when tensors do not line up with the network specification."""


# ---------------------------------------------------------------------------
# Network specification
# ---------------------------------------------------------------------------

UNET_CHANNELS = (8, 16, 32)


@dataclass(frozen=True)
class NetSpec:
    """Canonical input size plus the derived tensor-name/shape table.

    The 1-D refinement stage halves the profile three times, so
    ``input_height`` must be divisible by 8 (the U-Net alone only needs 4).
    """

    input_height: int = 512
    input_width: int = 384

    def __post_init__(self):
        if self.input_height % 8 or self.input_height < 8:
            raise ValueError("input_height must be a positive multiple of 8")
        if self.input_width % 4 or self.input_width < 4:
            raise ValueError("input_width must be a positive multiple of 4")

    def unet_shapes(self) -> dict[str, tuple[int, ...]]:
        c1, c2, c3 = UNET_CHANNELS
        shapes: dict[str, tuple[int, ...]] = {}

        def double_conv(prefix, cin, cout):
            shapes[f"{prefix}.conv1.weight"] = (cout, cin, 3, 3)
            shapes[f"{prefix}.conv1.bias"] = (cout,)
            shapes[f"{prefix}.conv2.weight"] = (cout, cout, 3, 3)
            shapes[f"{prefix}.conv2.bias"] = (cout,)

        double_conv("unet.enc1", 1, c1)
        double_conv("unet.enc2", c1, c2)
        double_conv("unet.enc3", c2, c3)
        shapes["unet.up2.weight"] = (c3, c2, 2, 2)   # transposed: [in, out, kh, kw]
        shapes["unet.up2.bias"] = (c2,)
        double_conv("unet.dec2", 2 * c2, c2)
        shapes["unet.up1.weight"] = (c2, c1, 2, 2)
        shapes["unet.up1.bias"] = (c1,)
        double_conv("unet.dec1", 2 * c1, c1)
        shapes["unet.out.weight"] = (1, c1, 1, 1)
        shapes["unet.out.bias"] = (1,)
        return shapes

    def cutnet_shapes(self) -> dict[str, tuple[int, ...]]:
        return {
            "cutnet.w1": (self.input_height,),
            "cutnet.b1": (1,),
            # 1-D convolutions, bias-free: [out, in, k]
            "cutnet.v1.weight": (8, 1, 5),
            "cutnet.v2.weight": (16, 8, 5),
            "cutnet.v3.weight": (32, 16, 5),
            "cutnet.v4.weight": (32, 32, 5),
            "cutnet.w2": (32, 32),   # channel mix: h_out = h_in^T @ w2 + b2
            "cutnet.b2": (32,),
            "cutnet.v5.weight": (32, 32, 3),
            # 1-D transposed convolutions, bias-free: [in, out, k]
            "cutnet.u1.weight": (32, 16, 4),
            "cutnet.u2.weight": (16, 8, 4),
            "cutnet.u3.weight": (8, 1, 4),
        }

    def tensor_shapes(self) -> dict[str, tuple[int, ...]]:
        return {**self.unet_shapes(), **self.cutnet_shapes()}

    def to_json(self) -> str:
        doc = {
            "input_height": self.input_height,
            "input_width": self.input_width,
            "unet_channels": list(UNET_CHANNELS),
            "tensors": {k: list(v) for k, v in self.tensor_shapes().items()},
            "groups": {
                "unet": sorted(self.unet_shapes()),
                "cutnet": sorted(self.cutnet_shapes()),
            },
            "conventions": {
                "conv.weight": "[out_channels, in_channels, *kernel]",
                "conv_transpose.weight": "[in_channels, out_channels, *kernel]",
                "cutnet.w2": "[in_channels, out_channels]; rows of the profile "
                             "feature map are mixed as h_out = h_in^T @ w2 + b2",
                "dtype": "float32 little-endian, row-major",
            },
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "NetSpec":
        doc = json.loads(text)
        spec = cls(doc["input_height"], doc["input_width"])
        ours = {k: list(v) for k, v in spec.tensor_shapes().items()}
        if doc.get("tensors", ours) != ours:
            raise NetSpecError("tensor table in document does not match this build")
        return spec


# ---------------------------------------------------------------------------
# Weight storage and the VSW1 file format
# ---------------------------------------------------------------------------

class WeightStore:
    """Ordered name -> float32 tensor map that round-trips bit-exactly."""

    def __init__(self, entries: dict[str, np.ndarray] | None = None):
        self._entries: dict[str, np.ndarray] = {}
        for name, arr in (entries or {}).items():
            self[name] = arr

    def __setitem__(self, name: str, arr: np.ndarray) -> None:
        if not name:
            raise ValueError("tensor names must be non-empty")
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"tensor {name!r} contains non-finite values")
        self._entries[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._entries[name]
        except KeyError:
            raise KeyError(f"weight store is missing tensor {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightStore):
            return NotImplemented
        if self.names() != other.names():
            return False
        return all(
            a.shape == other._entries[n].shape
            and a.tobytes() == other._entries[n].tobytes()
            for n, a in self._entries.items()
        )


MAGIC = b"VSW1"


def save_weights(store: WeightStore, path: str | Path) -> None:
    """Write a store in the VSW1 format.

    Layout, all little-endian: magic ``VSW1``, u32 tensor count, then per
    tensor: u16 name length, UTF-8 name, u8 rank, rank x u32 dims, and
    prod(dims) float32 values in row-major order.
    """
    chunks = [MAGIC, struct.pack("<I", len(store))]
    for name, arr in store.items():
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.astype("<f4", copy=False).tobytes(order="C"))
    Path(path).write_bytes(b"".join(chunks))


def load_weights(path: str | Path) -> WeightStore:
    """Read a VSW1 file; any structural defect raises before a store exists."""
    blob = Path(path).read_bytes()
    off = 0

    def take(n: int, what: str) -> bytes:
        nonlocal off
        if off + n > len(blob):
            raise WeightFormatError(f"truncated weight file while reading {what}")
        piece = blob[off:off + n]
        off += n
        return piece

    if take(4, "magic") != MAGIC:
        raise WeightFormatError("bad magic: not a VSW1 weight file")
    (count,) = struct.unpack("<I", take(4, "tensor count"))
    entries: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        name = take(name_len, "name").decode("utf-8")
        if not name:
            raise WeightFormatError("empty tensor name")
        if name in entries:
            raise WeightFormatError(f"duplicate tensor name {name!r}")
        (rank,) = struct.unpack("<B", take(1, "rank"))
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "dims")) if rank else ()
        n_values = int(np.prod(dims, dtype=np.int64)) if rank else 1
        data = np.frombuffer(take(4 * n_values, f"data of {name!r}"), dtype="<f4")
        arr = data.reshape(dims).astype(np.float32)
        if not np.all(np.isfinite(arr)):
            raise WeightFormatError(f"tensor {name!r} contains non-finite values")
        entries[name] = arr
    if off != len(blob):
        raise WeightFormatError(f"{len(blob) - off} trailing bytes after last tensor")
    return WeightStore(entries)


def validate_store(store: WeightStore, spec: NetSpec,
                   groups: tuple[str, ...] = ("unet", "cutnet"),
                   strict: bool = True) -> None:
    """Check a store against the NetSpec tensor table.

    Every tensor of the named groups must be present with the exact shape;
    with ``strict`` any tensor outside those groups is rejected by name.
    """
    table: dict[str, tuple[int, ...]] = {}
    for g in groups:
        if g == "unet":
            table.update(spec.unet_shapes())
        elif g == "cutnet":
            table.update(spec.cutnet_shapes())
        else:
            raise ValueError(f"unknown group {g!r}")
    for name, shape in table.items():
        if name not in store:
            raise NetSpecError(f"missing tensor {name!r}")
        got = store[name].shape
        if got != shape:
            raise NetSpecError(f"tensor {name!r} has shape {got}, expected {shape}")
    if strict:
        for name in store.names():
            if name not in table:
                raise NetSpecError(f"unknown tensor {name!r} not in NetSpec")


# ---------------------------------------------------------------------------
# numpy layer primitives
# ---------------------------------------------------------------------------

def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None,
           stride: int = 1, pad: int = 0) -> np.ndarray:
    """Cross-correlation of (C,H,W) input with (O,C,kh,kw) weights."""
    o_ch, c_ch, kh, kw = w.shape
    if x.shape[0] != c_ch:
        raise NetSpecError(f"conv2d expects {c_ch} input channels, got {x.shape[0]}")
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    h_out = (xp.shape[1] - kh) // stride + 1
    w_out = (xp.shape[2] - kw) // stride + 1
    out = np.zeros((o_ch, h_out, w_out))
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, i:i + stride * h_out:stride, j:j + stride * w_out:stride]
            out += np.tensordot(w[:, :, i, j], patch, axes=([1], [0]))
    if b is not None:
        out += b[:, None, None]
    return out


def conv_transpose2d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None,
                     stride: int = 2, pad: int = 0) -> np.ndarray:
    """Transposed convolution via zero-stuffing + flipped-kernel conv."""
    c_in, c_out, kh, kw = w.shape
    if x.shape[0] != c_in:
        raise NetSpecError(f"conv_transpose2d expects {c_in} channels, got {x.shape[0]}")
    xd = np.zeros((c_in, (x.shape[1] - 1) * stride + 1,
                   (x.shape[2] - 1) * stride + 1))
    xd[:, ::stride, ::stride] = x
    flipped = w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    return conv2d(xd, flipped, b, stride=1, pad=kh - 1 - pad)


def max_pool2(x: np.ndarray) -> np.ndarray:
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise NetSpecError(f"max_pool2 needs even dims, got {h}x{w}")
    return x.reshape(c, h // 2, 2, w // 2, 2).max(axis=(2, 4))


def conv1d(x: np.ndarray, w: np.ndarray, stride: int = 1, pad: int = 0) -> np.ndarray:
    """Cross-correlation of (C,L) input with (O,C,k) weights (no bias)."""
    o_ch, c_ch, k = w.shape
    if x.shape[0] != c_ch:
        raise NetSpecError(f"conv1d expects {c_ch} input channels, got {x.shape[0]}")
    xp = np.pad(x, ((0, 0), (pad, pad)))
    l_out = (xp.shape[1] - k) // stride + 1
    out = np.zeros((o_ch, l_out))
    for i in range(k):
        out += np.tensordot(w[:, :, i], xp[:, i:i + stride * l_out:stride],
                            axes=([1], [0]))
    return out


def conv_transpose1d(x: np.ndarray, w: np.ndarray, stride: int = 2,
                     pad: int = 1) -> np.ndarray:
    c_in, c_out, k = w.shape
    if x.shape[0] != c_in:
        raise NetSpecError(f"conv_transpose1d expects {c_in} channels, got {x.shape[0]}")
    xd = np.zeros((c_in, (x.shape[1] - 1) * stride + 1))
    xd[:, ::stride] = x
    flipped = w[:, :, ::-1].transpose(1, 0, 2)
    return conv1d(xd, flipped, stride=1, pad=k - 1 - pad)


# ---------------------------------------------------------------------------
# Forward passes
# ---------------------------------------------------------------------------

def _tensor(store: WeightStore, spec: NetSpec, name: str) -> np.ndarray:
    expected = spec.tensor_shapes().get(name)
    if name not in store:
        raise NetSpecError(f"missing tensor {name!r}")
    arr = store[name]
    if expected is not None and arr.shape != expected:
        raise NetSpecError(f"tensor {name!r} has shape {arr.shape}, expected {expected}")
    return np.asarray(arr, dtype=np.float64)


def unet_forward(img: np.ndarray, store: WeightStore,
                 spec: NetSpec | None = None) -> np.ndarray:
    """Run the 3-level U-Net on one grayscale image, returning raw logits.

    Input height and width must be divisible by 4; output spatial dims
    equal input dims.
    """
    spec = spec or NetSpec()
    x = np.asarray(img, dtype=np.float64)
    if x.ndim != 2:
        raise NetSpecError("unet_forward expects a single 2-D grayscale image")
    if x.shape[0] % 4 or x.shape[1] % 4:
        raise NetSpecError(f"input dims must be divisible by 4, got {x.shape}")

    def double_conv(t: np.ndarray, prefix: str) -> np.ndarray:
        t = relu(conv2d(t, _tensor(store, spec, f"{prefix}.conv1.weight"),
                        _tensor(store, spec, f"{prefix}.conv1.bias"), pad=1))
        return relu(conv2d(t, _tensor(store, spec, f"{prefix}.conv2.weight"),
                           _tensor(store, spec, f"{prefix}.conv2.bias"), pad=1))

    e1 = double_conv(x[None, :, :], "unet.enc1")
    e2 = double_conv(max_pool2(e1), "unet.enc2")
    e3 = double_conv(max_pool2(e2), "unet.enc3")
    u2 = conv_transpose2d(e3, _tensor(store, spec, "unet.up2.weight"),
                          _tensor(store, spec, "unet.up2.bias"), stride=2)
    d2 = double_conv(np.concatenate([u2, e2], axis=0), "unet.dec2")
    u1 = conv_transpose2d(d2, _tensor(store, spec, "unet.up1.weight"),
                          _tensor(store, spec, "unet.up1.bias"), stride=2)
    d1 = double_conv(np.concatenate([u1, e1], axis=0), "unet.dec1")
    logits = conv2d(d1, _tensor(store, spec, "unet.out.weight"),
                    _tensor(store, spec, "unet.out.bias"))
    return logits[0]


def cutnet_subtract(x: np.ndarray, store: WeightStore,
                    spec: NetSpec | None = None) -> tuple[np.ndarray, float]:
    """Adaptive scalar subtraction: y = sigmoid(x - relu(rowsums(x).w1 + b1)).

    The subtracted value s is a single non-negative scalar, returned
    alongside y.  Since s >= 0, y <= sigmoid(x) holds elementwise.
    """
    spec = spec or NetSpec()
    x = np.asarray(x, dtype=np.float64)
    w1 = _tensor(store, spec, "cutnet.w1")
    b1 = _tensor(store, spec, "cutnet.b1")
    if x.ndim != 2 or x.shape[0] != w1.shape[0]:
        raise NetSpecError(
            f"input must be 2-D with {w1.shape[0]} rows, got shape {x.shape}")
    row_sums = x.sum(axis=1)
    s = float(max(0.0, float(row_sums @ w1) + float(b1[0])))
    return sigmoid(x - s), s


def cutnet_classify(y: np.ndarray, store: WeightStore,
                    spec: NetSpec | None = None) -> np.ndarray:
    """Classify every profile row as cut/non-cut, in (0, 1), length preserved."""
    spec = spec or NetSpec()
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2:
        raise NetSpecError("cutnet_classify expects a 2-D map")
    if y.shape[0] % 8:
        raise NetSpecError(f"profile length must be divisible by 8, got {y.shape[0]}")
    h = y.sum(axis=1)[None, :]
    h = conv1d(h, _tensor(store, spec, "cutnet.v1.weight"), stride=2, pad=2)
    h = conv1d(h, _tensor(store, spec, "cutnet.v2.weight"), stride=2, pad=2)
    h = conv1d(h, _tensor(store, spec, "cutnet.v3.weight"), stride=2, pad=2)
    h = conv1d(h, _tensor(store, spec, "cutnet.v4.weight"), stride=1, pad=2)
    h = np.tanh(h)
    w2 = _tensor(store, spec, "cutnet.w2")
    b2 = _tensor(store, spec, "cutnet.b2")
    h = w2.T @ h + b2[:, None]
    h = conv1d(h, _tensor(store, spec, "cutnet.v5.weight"), stride=1, pad=1)
    h = conv_transpose1d(h, _tensor(store, spec, "cutnet.u1.weight"), stride=2, pad=1)
    h = conv_transpose1d(h, _tensor(store, spec, "cutnet.u2.weight"), stride=2, pad=1)
    h = conv_transpose1d(h, _tensor(store, spec, "cutnet.u3.weight"), stride=2, pad=1)
    if h.shape != (1, y.shape[0]):
        raise NetSpecError(f"decoder produced shape {h.shape}, expected (1, {y.shape[0]})")
    return sigmoid(h[0])


def segment_from_profile(page: np.ndarray, profile: np.ndarray,
                         params: ThresholdParams,
                         source: str = "") -> PageSegmentation:
    """Apply the minima analysis to a network profile and extract regions.

    The profile is high inside systems and low at cut rows, so the
    threshold selection applies directly; cut and maxima rows found at
    network resolution are rescaled to page rows with round(r * H / Hn).
    """
    page = np.asarray(page, dtype=np.float64)
    height = page.shape[0]
    cp = critical_points(profile)
    sel = select_cuts(profile, cp, params)
    scale = height / len(profile)
    cuts = sorted({int(round(r * scale)) for r in sel.cuts})
    cuts = [c for c in cuts if 0 < c < height]
    maxima = sorted({int(round(r * scale)) for r in sel.selected_maxima_rows})
    maxima = [m for m in maxima if m < height]
    return extract_regions(invert(page), cuts, params, maxima, source=source)


def cutnet_segment(page: np.ndarray, store: WeightStore,
                   params: ThresholdParams | None = None,
                   spec: NetSpec | None = None,
                   source: str = "") -> PageSegmentation:
    """Neural path: U-Net, adaptive subtraction, row classification, minima."""
    spec = spec or NetSpec()
    params = params or ThresholdParams()
    page = np.asarray(page, dtype=np.float64)
    resized = resize_gray(page, spec.input_height, spec.input_width)
    logits = unet_forward(resized, store, spec)
    y, _ = cutnet_subtract(logits, store, spec)
    z = cutnet_classify(y, store, spec)
    return segment_from_profile(page, z, params, source=source)
