"""Dense tensors, NPY file I/O and intensity normalization.

The on-disk interchange format is NPY v1.0 restricted to little-endian
float32/float64/uint8, C order. Voxel spacing (mm) travels in a sidecar
JSON file ``<name>.meta.json`` with a single key ``spacing_mm``.
"""

import ast
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from segguard.errors import (
    DegenerateImage,
    IoFailure,
    MalformedFile,
    TruncatedPayload,
    UnsupportedDtype,
    ValidationError,
)

_MAGIC = b"\x93NUMPY"
_SUPPORTED_DESCR = {"<f4": np.float32, "<f8": np.float64, "|u1": np.uint8}
_DESCR_FOR_DTYPE = {np.dtype(np.float32): "<f4", np.dtype(np.float64): "<f8", np.dtype(np.uint8): "|u1"}


@dataclass(frozen=True)
class Tensor:
    """N-d array plus optional per-axis voxel spacing in mm.

    data is kept C-contiguous; dtype must be float32, float64 or uint8.
    Scalars (shape ()) are rejected: every tensor has at least one axis.
    """

    data: np.ndarray
    spacing: tuple | None = None

    def __post_init__(self):
        if np.asarray(self.data).ndim == 0:
            raise ValidationError("scalar (shape ()) tensors are not allowed")
        arr = np.ascontiguousarray(self.data)
        if arr.dtype not in _DESCR_FOR_DTYPE:
            raise UnsupportedDtype(f"unsupported dtype {arr.dtype}")
        object.__setattr__(self, "data", arr)
        if self.spacing is not None:
            sp = tuple(float(s) for s in self.spacing)
            if len(sp) != arr.ndim and len(sp) != 3:
                raise ValidationError(f"spacing has {len(sp)} entries for a {arr.ndim}-d tensor")
            if any(s <= 0 for s in sp):
                raise ValidationError("spacing entries must be positive")
            object.__setattr__(self, "spacing", sp)

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return (
            self.data.dtype == other.data.dtype
            and self.data.shape == other.data.shape
            and np.array_equal(self.data, other.data)
            and self.spacing == other.spacing
        )


def check_volume(t: Tensor) -> Tensor:
    """A Volume is a 3-axis scalar tensor with required positive spacing."""
    if t.data.ndim != 3:
        raise ValidationError(f"volume must have 3 axes, got {t.data.ndim}")
    if t.spacing is None:
        raise ValidationError("volume requires spacing")
    return t


def check_prob_map(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValidationError("probability map voxels must lie in [0, 1]")
    return arr


def check_binary_mask(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.dtype != bool and not np.isin(arr, (0, 1)).all():
        raise ValidationError("binary mask voxels must be 0 or 1")
    return arr.astype(bool)


def check_feature_map(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.ndim != 4:
        raise ValidationError(f"feature map must have shape (w, h, d, n), got ndim={arr.ndim}")
    if arr.size == 0:
        raise ValidationError("feature map must be non-empty")
    return arr


def _meta_path(path: Path) -> Path:
    return path.with_name(path.stem + ".meta.json")


def _build_header(descr: str, shape: tuple) -> bytes:
    shape_repr = "(%s)" % (", ".join(str(int(d)) for d in shape) + ("," if len(shape) == 1 else ""))
    header = "{'descr': '%s', 'fortran_order': False, 'shape': %s, }" % (descr, shape_repr)
    # magic(6) + version(2) + hlen(2) + header + pad + '\n' must be 64-aligned
    base = 6 + 2 + 2
    total = base + len(header) + 1
    pad = (64 - total % 64) % 64
    header = header + " " * pad + "\n"
    return _MAGIC + bytes((1, 0)) + struct.pack("<H", len(header)) + header.encode("latin1")


def save_tensor(t: Tensor, path) -> None:
    """Write a tensor as NPY v1.0; spacing, if any, goes to the sidecar."""
    path = Path(path)
    descr = _DESCR_FOR_DTYPE[t.data.dtype]
    payload = np.ascontiguousarray(t.data)
    if payload.dtype.byteorder == ">":  # pragma: no cover - big-endian hosts only
        payload = payload.astype(payload.dtype.newbyteorder("<"))
    try:
        with open(path, "wb") as fh:
            fh.write(_build_header(descr, t.data.shape))
            fh.write(payload.tobytes(order="C"))
        if t.spacing is not None:
            with open(_meta_path(path), "w") as fh:
                json.dump({"spacing_mm": list(t.spacing)}, fh)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_tensor(path) -> Tensor:
    """Read an NPY v1.0 file written by :func:`save_tensor` (or numpy)."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if len(raw) < 10 or raw[:6] != _MAGIC:
        raise MalformedFile(f"{path}: bad magic bytes")
    major, minor = raw[6], raw[7]
    if (major, minor) != (1, 0):
        raise MalformedFile(f"{path}: unsupported NPY version {major}.{minor}")
    (hlen,) = struct.unpack("<H", raw[8:10])
    header_end = 10 + hlen
    if len(raw) < header_end:
        raise TruncatedPayload(f"{path}: truncated header")
    try:
        header = ast.literal_eval(raw[10:header_end].decode("latin1"))
        descr = header["descr"]
        fortran = header["fortran_order"]
        shape = tuple(header["shape"])
    except (ValueError, SyntaxError, KeyError, TypeError) as exc:
        raise MalformedFile(f"{path}: unparsable header") from exc
    if fortran is not False:
        raise MalformedFile(f"{path}: fortran_order must be False")
    if descr not in _SUPPORTED_DESCR:
        raise UnsupportedDtype(f"{path}: dtype {descr!r} not supported")
    dtype = np.dtype(_SUPPORTED_DESCR[descr])
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    expected = count * dtype.itemsize
    body = raw[header_end:]
    if len(body) < expected:
        raise TruncatedPayload(f"{path}: payload holds {len(body)} bytes, expected {expected}")
    arr = np.frombuffer(body[:expected], dtype=dtype).reshape(shape)

    spacing = None
    meta = _meta_path(path)
    if meta.exists():
        try:
            with open(meta) as fh:
                spacing = tuple(json.load(fh)["spacing_mm"])
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise MalformedFile(f"{meta}: bad sidecar") from exc
    return Tensor(arr.copy(), spacing=spacing)


def normalize_ct(v: np.ndarray) -> np.ndarray:
    """Map Hounsfield units linearly from [-1000, 1000] onto [0, 1].

    Values outside the HU range are clamped so the output honors [0, 1].
    """
    hu = np.asarray(v, dtype=np.float64)
    return np.clip((hu + 1000.0) / 2000.0, 0.0, 1.0)


def normalize_mr(v: np.ndarray) -> np.ndarray:
    """Divide by the population standard deviation of the voxel intensities."""
    img = np.asarray(v, dtype=np.float64)
    std = float(img.std())  # population convention (ddof=0)
    if std == 0.0:
        raise DegenerateImage("all voxels equal; std is zero")
    return img / std
