"""sRGB <-> HSV <-> HVI color-space transforms.

Images are ``(H, W, 3)`` float64 plane stacks. Hue is stored normalized to
``[0, 1)`` everywhere (the polar angle is ``2*pi*H``), which makes the
forward polarization and the perceptual inverse mutually consistent.

The HVI representation holds two polarized chromaticity planes and the
max-RGB intensity plane. Chroma is scaled by the intensity-collapse factor
``C_k = k * sqrt(sin(pi * I_max / 2) + eps)``, which crushes the chroma of
near-black pixels; those pixels are therefore excluded from round-trip
guarantees (see :func:`hvi_to_rgb`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class HviParams:
    """Parameters of the forward/inverse HVI transform.

    ``k`` scales the intensity collapse, ``eps`` stabilizes it, and
    ``alpha_s`` / ``alpha_i`` linearly rescale saturation and brightness
    on the way back to HSV.
    """

    k: float = 1.0
    eps: float = 1e-8
    alpha_s: float = 1.0
    alpha_i: float = 1.0

    def __post_init__(self):
        for name in ("k", "eps", "alpha_s", "alpha_i"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValidationError(f"HviParams.{name} must be positive, got {value}")


def _check_planes(planes, name: str) -> np.ndarray:
    arr = np.asarray(planes, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValidationError(f"{name} planes must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"{name} must contain at least one pixel")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or Inf values")
    return arr


@dataclass(frozen=True)
class RgbImage:
    """sRGB image with channels (R, G, B), each in [0, 1]."""

    planes: np.ndarray

    def __post_init__(self):
        arr = _check_planes(self.planes, "RgbImage")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValidationError(
                f"RgbImage channels must lie in [0, 1], got range "
                f"[{arr.min():.6g}, {arr.max():.6g}]"
            )
        object.__setattr__(self, "planes", arr)

    @property
    def height(self) -> int:
        return self.planes.shape[0]

    @property
    def width(self) -> int:
        return self.planes.shape[1]

    @property
    def r(self) -> np.ndarray:
        return self.planes[:, :, 0]

    @property
    def g(self) -> np.ndarray:
        return self.planes[:, :, 1]

    @property
    def b(self) -> np.ndarray:
        return self.planes[:, :, 2]


@dataclass(frozen=True)
class HsvImage:
    """HSV image with H in [0, 1), S and V in [0, 1]; achromatic hue is 0."""

    planes: np.ndarray

    def __post_init__(self):
        arr = _check_planes(self.planes, "HsvImage")
        h, s, v = arr[:, :, 0], arr[:, :, 1], arr[:, :, 2]
        if h.min() < 0.0 or h.max() >= 1.0:
            raise ValidationError("HsvImage hue must lie in [0, 1)")
        if s.min() < 0.0 or s.max() > 1.0 or v.min() < 0.0 or v.max() > 1.0:
            raise ValidationError("HsvImage S and V must lie in [0, 1]")
        if np.any((s == 0.0) & (h != 0.0)):
            raise ValidationError("HsvImage hue must be 0 for achromatic pixels")
        object.__setattr__(self, "planes", arr)

    @property
    def h(self) -> np.ndarray:
        return self.planes[:, :, 0]

    @property
    def s(self) -> np.ndarray:
        return self.planes[:, :, 1]

    @property
    def v(self) -> np.ndarray:
        return self.planes[:, :, 2]


@dataclass(frozen=True)
class HviImage:
    """Polarized chroma planes plus the max-RGB intensity plane.

    ``hhat``/``vhat`` are the Cartesian chroma coordinates (may be
    negative); ``imax`` lies in [0, 1]. The per-pixel chroma magnitude is
    bounded by the intensity-collapse factor ``C_k`` computed from ``imax``
    with the stored ``k`` and ``eps``.
    """

    hhat: np.ndarray
    vhat: np.ndarray
    imax: np.ndarray
    k: float = 1.0
    eps: float = 1e-8

    def __post_init__(self):
        hhat = np.asarray(self.hhat, dtype=np.float64)
        vhat = np.asarray(self.vhat, dtype=np.float64)
        imax = np.asarray(self.imax, dtype=np.float64)
        if not (hhat.shape == vhat.shape == imax.shape) or hhat.ndim != 2:
            raise ValidationError(
                "HviImage planes must be 2-D and share one shape, got "
                f"{hhat.shape}/{vhat.shape}/{imax.shape}"
            )
        for name, arr in (("hhat", hhat), ("vhat", vhat), ("imax", imax)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"HviImage.{name} contains NaN or Inf values")
        if self.k <= 0 or self.eps <= 0:
            raise ValidationError("HviImage k and eps must be positive")
        if imax.min() < 0.0 or imax.max() > 1.0:
            raise ValidationError("HviImage intensity must lie in [0, 1]")
        ck = intensity_collapse(imax, self.k, self.eps)
        if np.any(hhat**2 + vhat**2 > (ck**2) * 1.000001):
            raise ValidationError("HviImage chroma magnitude exceeds the C_k bound")
        object.__setattr__(self, "hhat", hhat)
        object.__setattr__(self, "vhat", vhat)
        object.__setattr__(self, "imax", imax)

    @property
    def shape(self) -> tuple[int, int]:
        return self.hhat.shape


def intensity_collapse(imax: np.ndarray, k: float, eps: float) -> np.ndarray:
    """Per-pixel chroma scale ``k * sqrt(sin(pi * imax / 2) + eps)``."""
    return k * np.sqrt(np.sin(np.pi * np.asarray(imax, dtype=np.float64) / 2.0) + eps)


def rgb_to_hsv(img: RgbImage) -> HsvImage:
    """Max-RGB HSV decomposition with hue stored in [0, 1).

    Saturation is 0 at black pixels and hue is 0 wherever saturation is 0.
    """
    r, g, b = img.r, img.g, img.b
    imax = img.planes.max(axis=2)
    imin = img.planes.min(axis=2)
    delta = imax - imin

    s = np.zeros_like(imax)
    np.divide(delta, imax, out=s, where=imax > 0)

    chromatic = delta > 0
    safe = np.where(chromatic, delta, 1.0)
    h_r = np.mod((g - b) / safe, 6.0)
    h_g = 2.0 + (b - r) / safe
    h_b = 4.0 + (r - g) / safe
    h = np.select([~chromatic, imax == r, imax == g], [0.0, h_r, h_g], default=h_b)
    # mod can land exactly on 6.0 for tiny negative arguments
    h = np.where(h >= 6.0, 0.0, h)
    return HsvImage(np.stack([h / 6.0, s, imax], axis=2))


def hsv_to_rgb(img: HsvImage) -> RgbImage:
    """Standard six-sector HSV to sRGB conversion."""
    h6 = img.h * 6.0
    sector = np.floor(h6).astype(np.int64) % 6
    f = h6 - np.floor(h6)
    v = img.v
    p = v * (1.0 - img.s)
    q = v * (1.0 - f * img.s)
    t = v * (1.0 - (1.0 - f) * img.s)

    conds = [sector == 0, sector == 1, sector == 2, sector == 3, sector == 4]
    r = np.select(conds, [v, q, p, p, t], default=v)
    g = np.select(conds, [t, v, v, q, p], default=p)
    b = np.select(conds, [p, p, t, v, v], default=q)
    return RgbImage(np.stack([r, g, b], axis=2))


def hvt(hsv: HsvImage, p: HviParams | None = None) -> HviImage:
    """Polarize hue/saturation into Cartesian chroma scaled by ``C_k``."""
    p = p or HviParams()
    ck = intensity_collapse(hsv.v, p.k, p.eps)
    angle = TWO_PI * hsv.h
    hhat = ck * hsv.s * np.cos(angle)
    vhat = ck * hsv.s * np.sin(angle)
    return HviImage(hhat, vhat, hsv.v.copy(), k=p.k, eps=p.eps)


def phvit(hvi: HviImage, p: HviParams | None = None) -> HsvImage:
    """Perceptual inverse of :func:`hvt`.

    The chroma coordinates are divided by ``C_k + eps`` before the
    quadrant-aware arctangent recovers hue; saturation and value pick up
    the ``alpha_s`` / ``alpha_i`` scalings and are clamped to [0, 1].
    Zero-chroma pixels map to hue 0 by convention.
    """
    p = p or HviParams()
    ck = intensity_collapse(hvi.imax, p.k, p.eps)
    hnorm = hvi.hhat / (ck + p.eps)
    vnorm = hvi.vhat / (ck + p.eps)
    mag = np.sqrt(hnorm**2 + vnorm**2)

    h = np.mod(np.arctan2(vnorm, hnorm) / TWO_PI, 1.0)
    h = np.where(h >= 1.0, 0.0, h)
    h = np.where(mag == 0.0, 0.0, h)
    s = np.clip(p.alpha_s * mag, 0.0, 1.0)
    v = np.clip(p.alpha_i * hvi.imax, 0.0, 1.0)
    h = np.where(s == 0.0, 0.0, h)
    return HsvImage(np.stack([h, s, v], axis=2))


def rgb_to_hvi(img: RgbImage, p: HviParams | None = None) -> HviImage:
    """Forward composition sRGB -> HSV -> HVI."""
    return hvt(rgb_to_hsv(img), p)


def hvi_to_rgb(hvi: HviImage, p: HviParams | None = None) -> RgbImage:
    """Inverse composition HVI -> HSV -> sRGB.

    With default params this undoes :func:`rgb_to_hvi` to better than 1e-5
    per channel for every pixel with intensity above ~1e-4; darker pixels
    have their chroma crushed by the intensity collapse and cannot be
    recovered accurately.
    """
    return hsv_to_rgb(phvit(hvi, p))
