"""Minimal dense-array substrate shared by every stage of the pipeline.

Tensors are row-major float64 ``numpy.ndarray`` values of rank 1 to 4.
All operations are pure: they never mutate their inputs and, given finite
inputs, produce finite outputs.

The on-disk tensor format is: magic bytes ``VCRT``, u32 rank, rank u64
extents, then the little-endian f64 payload in row-major order.
"""

from __future__ import annotations

import struct

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .errors import FileFormatError, ValidationError

TENSOR_MAGIC = b"VCRT"
MAX_RANK = 4


def as_tensor(data, name: str = "tensor") -> np.ndarray:
    """Coerce to a float64 array of rank 1..4 and check finiteness."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0 or arr.ndim > MAX_RANK:
        raise ValidationError(f"{name}: rank must be 1..{MAX_RANK}, got {arr.ndim}")
    require_finite(arr, name)
    return arr


def require_finite(arr: np.ndarray, name: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or Inf values")
    return arr


def inverse_permutation(axes) -> tuple[int, ...]:
    """The permutation that undoes ``axes``."""
    return tuple(int(i) for i in np.argsort(axes))


def permute(t: np.ndarray, axes) -> np.ndarray:
    """Reorder tensor axes.

    ``out[i[axes[0]], ..., i[axes[r-1]]] == t[i]`` for every index tuple
    ``i``; applying the inverse permutation afterwards restores the input
    exactly.
    """
    axes = tuple(int(a) for a in axes)
    if sorted(axes) != list(range(t.ndim)):
        raise ValidationError(
            f"axes {axes} is not a permutation of 0..{t.ndim - 1}"
        )
    return np.ascontiguousarray(np.transpose(t, axes))


def gb_pool(t: np.ndarray) -> np.ndarray:
    """Collapse the leading axis of a rank-3 tensor to extent 2.

    Slice 0 is the elementwise maximum over axis 0, slice 1 the elementwise
    mean, so ``out`` has shape ``(2, d1, d2)``.
    """
    if t.ndim != 3:
        raise ValidationError(f"gb_pool expects a rank-3 tensor, got rank {t.ndim}")
    return np.stack([t.max(axis=0), t.mean(axis=0)])


def conv2d(t: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Same-padded 2-D cross-correlation.

    ``t`` is ``(Cin, H, W)``, ``kernel`` is ``(Cout, Cin, k, k)`` with odd
    ``k``; the output is ``(Cout, H, W)`` with zero padding of ``k // 2``
    on both spatial borders.
    """
    if t.ndim != 3 or kernel.ndim != 4:
        raise ValidationError(
            f"conv2d expects input rank 3 and kernel rank 4, got {t.ndim}/{kernel.ndim}"
        )
    cout, cin, kh, kw = kernel.shape
    if kh != kw:
        raise ValidationError(f"kernel must be square, got {kh}x{kw}")
    if kh % 2 == 0:
        raise ValidationError(f"kernel size must be odd, got {kh}")
    if cin != t.shape[0]:
        raise ValidationError(
            f"kernel expects {cin} input channels, tensor has {t.shape[0]}"
        )
    pad = kh // 2
    padded = np.pad(t, ((0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(padded, (kh, kw), axis=(1, 2))
    return np.einsum("chwij,ocij->ohw", windows, kernel)


def instance_norm(t: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Normalize each channel of a ``(C, H, W)`` tensor to zero mean, unit std.

    Uses population (biased) variance with ``eps`` inside the square root,
    so a constant channel maps to all zeros instead of dividing by zero.
    """
    if t.ndim != 3:
        raise ValidationError(
            f"instance_norm expects a rank-3 tensor, got rank {t.ndim}"
        )
    if eps <= 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    mean = t.mean(axis=(1, 2), keepdims=True)
    var = t.var(axis=(1, 2), keepdims=True)
    return (t - mean) / np.sqrt(var + eps)


def sigmoid(t: np.ndarray) -> np.ndarray:
    """Elementwise logistic function, overflow-safe."""
    return expit(np.asarray(t, dtype=np.float64))


def softmax_temp(v: np.ndarray, tau: float) -> np.ndarray:
    """Temperature-scaled softmax of a vector.

    The maximum entry is subtracted before exponentiation so arbitrarily
    large inputs cannot overflow; the output sums to 1.
    """
    if tau <= 0:
        raise ValidationError(f"softmax temperature must be positive, got {tau}")
    v = np.asarray(v, dtype=np.float64)
    z = (v - v.max()) / tau
    e = np.exp(z)
    return e / e.sum()


def save_tensor(path, arr: np.ndarray) -> None:
    """Write a rank-1..4 float64 tensor in the binary tensor format."""
    arr = as_tensor(arr)
    arr = np.ascontiguousarray(arr)
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(arr.astype("<f8", copy=False).tobytes(order="C"))


def load_tensor(path) -> np.ndarray:
    """Read a tensor written by :func:`save_tensor`."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise FileFormatError(f"cannot read tensor file {path}: {exc}") from exc
    if len(blob) < 8 or blob[:4] != TENSOR_MAGIC:
        raise FileFormatError(f"{path}: not a tensor file (bad magic)")
    (rank,) = struct.unpack_from("<I", blob, 4)
    if rank == 0 or rank > MAX_RANK:
        raise FileFormatError(f"{path}: unsupported tensor rank {rank}")
    header_end = 8 + 8 * rank
    if len(blob) < header_end:
        raise FileFormatError(f"{path}: truncated tensor header")
    shape = struct.unpack_from(f"<{rank}Q", blob, 8)
    count = int(np.prod(shape))
    if len(blob) != header_end + 8 * count:
        raise FileFormatError(
            f"{path}: payload size mismatch for shape {tuple(shape)}"
        )
    data = np.frombuffer(blob, dtype="<f8", count=count, offset=header_end)
    arr = data.reshape(shape).astype(np.float64)
    require_finite(arr, f"tensor file {path}")
    return arr
