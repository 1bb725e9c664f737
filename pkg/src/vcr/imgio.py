"""Image and fixture file I/O.

PNG (8- and 16-bit) values are mapped linearly to [0, 1] on load and back
on save. PFM carries float32 planes losslessly for fixtures. HVI images
serialize as a ``(3, H, W)`` tensor ordered (hhat, vhat, imax) in the
binary tensor format, with a plain-text sidecar (``<path>.meta``) that
records the transform parameters.
"""

from __future__ import annotations

import os

import cv2
import numpy as np

from .colorspace import HviImage, HviParams, RgbImage
from .errors import FileFormatError, ValidationError
from .tensor import load_tensor, save_tensor

PFM_LITTLE_ENDIAN_SCALE = -1.0


def read_image(path) -> RgbImage:
    """Load a PNG or PFM image as an RgbImage in [0, 1].

    Grayscale files are replicated across the three channels; an alpha
    channel, if present, is dropped.
    """
    path = os.fspath(path)
    if path.lower().endswith(".pfm"):
        return RgbImage(read_pfm(path))
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise FileFormatError(f"cannot read image file {path}")
    if raw.dtype == np.uint8:
        arr = raw.astype(np.float64) / 255.0
    elif raw.dtype == np.uint16:
        arr = raw.astype(np.float64) / 65535.0
    else:
        raise FileFormatError(f"{path}: unsupported PNG sample type {raw.dtype}")
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=2)
    elif arr.shape[2] == 4:
        arr = arr[:, :, :3][:, :, ::-1]
    else:
        arr = arr[:, :, ::-1]
    return RgbImage(np.ascontiguousarray(arr))


def write_image(path, img: RgbImage, bit_depth: int = 8) -> None:
    """Write an RgbImage as an 8/16-bit PNG or a PFM, chosen by extension."""
    path = os.fspath(path)
    if path.lower().endswith(".pfm"):
        write_pfm(path, img.planes)
        return
    if bit_depth == 8:
        scale, dtype = 255.0, np.uint8
    elif bit_depth == 16:
        scale, dtype = 65535.0, np.uint16
    else:
        raise ValidationError(f"bit depth must be 8 or 16, got {bit_depth}")
    quantized = np.rint(img.planes * scale).astype(dtype)
    ok = cv2.imwrite(path, quantized[:, :, ::-1])
    if not ok:
        raise FileFormatError(f"cannot write image file {path}")


def read_pfm(path) -> np.ndarray:
    """Read a binary PFM file into an (H, W, 3) float64 array."""
    try:
        with open(path, "rb") as fh:
            header = fh.readline().strip()
            if header not in (b"PF", b"Pf"):
                raise FileFormatError(f"{path}: not a PFM file")
            dims = fh.readline().split()
            if len(dims) != 2:
                raise FileFormatError(f"{path}: malformed PFM dimensions")
            width, height = int(dims[0]), int(dims[1])
            scale = float(fh.readline())
            channels = 3 if header == b"PF" else 1
            count = width * height * channels
            endian = "<" if scale < 0 else ">"
            payload = fh.read(count * 4)
    except OSError as exc:
        raise FileFormatError(f"cannot read PFM file {path}: {exc}") from exc
    if len(payload) != count * 4:
        raise FileFormatError(f"{path}: truncated PFM payload")
    data = np.frombuffer(payload, dtype=f"{endian}f4")
    arr = data.reshape(height, width, channels).astype(np.float64)
    arr = arr[::-1]  # PFM scanlines are stored bottom-up
    if channels == 1:
        arr = np.repeat(arr, 3, axis=2)
    return np.ascontiguousarray(arr)


def write_pfm(path, planes: np.ndarray) -> None:
    """Write an (H, W, 3) array as a little-endian color PFM."""
    arr = np.asarray(planes, dtype=np.float32)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValidationError(f"PFM writer expects (H, W, 3), got {arr.shape}")
    height, width = arr.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"PF\n")
        fh.write(f"{width} {height}\n".encode("ascii"))
        fh.write(f"{PFM_LITTLE_ENDIAN_SCALE}\n".encode("ascii"))
        fh.write(arr[::-1].astype("<f4").tobytes(order="C"))


def sidecar_path(tensor_path) -> str:
    return os.fspath(tensor_path) + ".meta"


def save_hvi(path, hvi: HviImage, params: HviParams) -> None:
    """Write an HVI image as a (3, H, W) tensor plus its parameter sidecar."""
    save_tensor(path, np.stack([hvi.hhat, hvi.vhat, hvi.imax]))
    with open(sidecar_path(path), "w", encoding="ascii") as fh:
        for key, value in (
            ("k", params.k),
            ("eps", params.eps),
            ("alpha_s", params.alpha_s),
            ("alpha_i", params.alpha_i),
        ):
            fh.write(f"{key} = {value!r}\n")


def load_hvi(path) -> tuple[HviImage, HviParams]:
    """Read an HVI tensor and its sidecar back into typed values."""
    planes = load_tensor(path)
    if planes.ndim != 3 or planes.shape[0] != 3:
        raise FileFormatError(
            f"{path}: HVI tensor must have shape (3, H, W), got {planes.shape}"
        )
    meta = sidecar_path(path)
    if not os.path.exists(meta):
        raise FileFormatError(f"missing HVI sidecar file: expected {meta}")
    values: dict[str, float] = {}
    with open(meta, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FileFormatError(f"{meta}: malformed sidecar line {line!r}")
            key, _, raw = line.partition("=")
            try:
                values[key.strip()] = float(raw.strip())
            except ValueError as exc:
                raise FileFormatError(f"{meta}: bad value in line {line!r}") from exc
    missing = {"k", "eps", "alpha_s", "alpha_i"} - values.keys()
    if missing:
        raise FileFormatError(f"{meta}: sidecar missing keys {sorted(missing)}")
    params = HviParams(
        k=values["k"], eps=values["eps"],
        alpha_s=values["alpha_s"], alpha_i=values["alpha_i"],
    )
    hvi = HviImage(planes[0], planes[1], planes[2], k=params.k, eps=params.eps)
    return hvi, params
