"""Full-reference (PSNR, SSIM) and no-reference (BRISQUE features, NIQE)
image-quality metrics.

All metrics operate on float64 arrays. Color inputs are reduced to
luminance with Y = 0.299 R + 0.587 G + 0.114 B before the structural and
natural-scene-statistics metrics. The no-reference pipeline follows the
classic construction: mean-subtracted contrast-normalized (MSCN)
coefficients, asymmetric generalized Gaussian (AGGD) moment-matching fits,
orientation-paired coefficient products, and, for NIQE, a Mahalanobis
distance between patch-feature statistics and a multivariate Gaussian
model of pristine images.

The NIQE model file format is: magic ``VCRQ``, u32 feature dimension d,
d little-endian f64 mean entries, then d*d f64 covariance entries.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import correlate
from scipy.special import gamma as gamma_fn

from .errors import FileFormatError, ValidationError

NIQE_MAGIC = b"VCRQ"
FEATURE_DIM = 36
AGGD_GRID = np.arange(0.2, 10.001, 0.001)
_AGGD_RATIO = gamma_fn(2.0 / AGGD_GRID) ** 2 / (
    gamma_fn(1.0 / AGGD_GRID) * gamma_fn(3.0 / AGGD_GRID)
)

GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])


def to_gray(planes: np.ndarray) -> np.ndarray:
    """Luminance plane of an (H, W, 3) RGB array (2-D input passes through)."""
    arr = np.asarray(planes, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] == 3:
        return arr @ GRAY_WEIGHTS
    raise ValidationError(f"expected (H, W) or (H, W, 3) image, got {arr.shape}")


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    """Normalized 2-D Gaussian window (weights sum to 1)."""
    if size < 1 or size % 2 == 0:
        raise ValidationError(f"window size must be odd and positive, got {size}")
    half = size // 2
    coords = np.arange(-half, half + 1, dtype=np.float64)
    kernel_1d = np.exp(-(coords**2) / (2.0 * sigma**2))
    window = np.outer(kernel_1d, kernel_1d)
    return window / window.sum()


def psnr(out: np.ndarray, gt: np.ndarray, dynamic_range: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs return +inf."""
    out = np.asarray(out, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if out.shape != gt.shape:
        raise ValidationError(f"image shapes differ: {out.shape} vs {gt.shape}")
    if dynamic_range <= 0:
        raise ValidationError(f"dynamic range must be positive, got {dynamic_range}")
    mse = float(np.mean((out - gt) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(dynamic_range**2 / mse)


@dataclass(frozen=True)
class SsimParams:
    """Stabilizers, exponents, and window of the structural similarity index.

    Unset stabilizers derive from the dynamic range L as C1 = (0.01 L)^2,
    C2 = (0.03 L)^2, C3 = C2 / 2.
    """

    dynamic_range: float = 1.0
    c1: float | None = None
    c2: float | None = None
    c3: float | None = None
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    window_size: int = 11
    window_sigma: float = 1.5

    def __post_init__(self):
        if self.dynamic_range <= 0:
            raise ValidationError("dynamic range must be positive")
        if self.window_size < 1 or self.window_size % 2 == 0:
            raise ValidationError("SSIM window size must be odd and positive")
        if self.c1 is None:
            object.__setattr__(self, "c1", (0.01 * self.dynamic_range) ** 2)
        if self.c2 is None:
            object.__setattr__(self, "c2", (0.03 * self.dynamic_range) ** 2)
        if self.c3 is None:
            object.__setattr__(self, "c3", self.c2 / 2.0)


def _filter_valid(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    windows = sliding_window_view(img, window.shape)
    return np.einsum("xyij,ij->xy", windows, window)


def ssim(x: np.ndarray, y: np.ndarray, params: SsimParams | None = None) -> float:
    """Mean local structural similarity of two grayscale images.

    Local means, variances, and covariance are Gaussian-weighted over
    fully contained windows; each window contributes the product of the
    luminance, contrast, and structure terms raised to their exponents.
    """
    params = params or SsimParams()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 2:
        raise ValidationError(f"SSIM needs equal 2-D images, got {x.shape} vs {y.shape}")
    if min(x.shape) < params.window_size:
        raise ValidationError(
            f"image {x.shape} is smaller than the {params.window_size}-pixel window"
        )
    window = gaussian_window(params.window_size, params.window_sigma)
    mu_x = _filter_valid(x, window)
    mu_y = _filter_valid(y, window)
    var_x = np.maximum(_filter_valid(x * x, window) - mu_x**2, 0.0)
    var_y = np.maximum(_filter_valid(y * y, window) - mu_y**2, 0.0)
    cov_xy = _filter_valid(x * y, window) - mu_x * mu_y
    sd_x = np.sqrt(var_x)
    sd_y = np.sqrt(var_y)

    lum = (2.0 * mu_x * mu_y + params.c1) / (mu_x**2 + mu_y**2 + params.c1)
    con = (2.0 * sd_x * sd_y + params.c2) / (var_x + var_y + params.c2)
    struct_term = (cov_xy + params.c3) / (sd_x * sd_y + params.c3)
    ssim_map = lum**params.alpha * con**params.beta * struct_term**params.gamma
    return float(ssim_map.mean())


def _local_moments(img: np.ndarray, size: int = 7, sigma: float = 7.0 / 6.0):
    window = gaussian_window(size, sigma)
    mu = correlate(img, window, mode="nearest")
    second = correlate(img * img, window, mode="nearest")
    sd = np.sqrt(np.abs(second - mu * mu))
    return mu, sd


def mscn(img: np.ndarray) -> np.ndarray:
    """Mean-subtracted contrast-normalized coefficients.

    Local moments use a 7x7 Gaussian window with sigma 7/6; the +1 in the
    denominator keeps flat regions finite, so a constant image maps to
    all zeros.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or min(img.shape) < 7:
        raise ValidationError(f"MSCN needs a grayscale image of at least 7x7, got {img.shape}")
    mu, sd = _local_moments(img)
    return (img - mu) / (sd + 1.0)


@dataclass(frozen=True)
class AggdFit:
    """Asymmetric generalized Gaussian parameters from moment matching."""

    gamma_hat: float
    sigma_l: float
    sigma_r: float
    eta: float


def aggd_fit(samples: np.ndarray) -> AggdFit:
    """Fit an asymmetric generalized Gaussian to a sample vector.

    The left and right second moments fix the two scales; the shape is
    recovered by inverting the generalized Gaussian moment-ratio function
    r(g) = gamma(2/g)^2 / (gamma(1/g) * gamma(3/g)) over a dense grid on
    [0.2, 10] (step 1e-3). The mean parameter follows from the fitted
    shape and scales.
    """
    samples = np.asarray(samples, dtype=np.float64).ravel()
    if samples.size < 32:
        raise ValidationError(f"AGGD fit needs at least 32 samples, got {samples.size}")
    left = samples[samples < 0]
    right = samples[samples > 0]
    if left.size == 0 or right.size == 0:
        raise ValidationError("AGGD fit needs samples of both signs")
    left_std = math.sqrt(float(np.mean(left**2)))
    right_std = math.sqrt(float(np.mean(right**2)))
    if left_std == 0.0 or right_std == 0.0:
        raise ValidationError("degenerate sample set: one-sided second moment is zero")

    gamma_ratio = left_std / right_std
    r_hat = float(np.mean(np.abs(samples))) ** 2 / float(np.mean(samples**2))
    r_norm = (r_hat * (gamma_ratio**3 + 1.0) * (gamma_ratio + 1.0)) / (
        (gamma_ratio**2 + 1.0) ** 2
    )
    shape = float(AGGD_GRID[np.argmin((_AGGD_RATIO - r_norm) ** 2)])

    scale_factor = math.sqrt(gamma_fn(1.0 / shape) / gamma_fn(3.0 / shape))
    sigma_l = left_std * scale_factor
    sigma_r = right_std * scale_factor
    eta = (sigma_r - sigma_l) * gamma_fn(2.0 / shape) / gamma_fn(1.0 / shape)
    return AggdFit(gamma_hat=shape, sigma_l=sigma_l, sigma_r=sigma_r, eta=eta)


# Orientation shifts for paired coefficient products: horizontal, vertical,
# main diagonal, anti-diagonal.
PAIR_SHIFTS = ((0, 1), (1, 0), (1, 1), (1, -1))


def _nss_features(coeffs: np.ndarray) -> np.ndarray:
    """18 AGGD statistics of one MSCN map: (shape, mean scale) of the
    coefficients themselves plus (shape, eta, sigma_l, sigma_r) for each
    orientation-paired product."""
    fit = aggd_fit(coeffs)
    feats = [fit.gamma_hat, (fit.sigma_l + fit.sigma_r) / 2.0]
    for shift in PAIR_SHIFTS:
        pair = coeffs * np.roll(coeffs, shift, axis=(0, 1))
        fit = aggd_fit(pair)
        feats.extend([fit.gamma_hat, fit.eta, fit.sigma_l, fit.sigma_r])
    return np.array(feats)


def half_resolution(img: np.ndarray) -> np.ndarray:
    """Downscale by 2 with a box filter (odd trailing rows/columns dropped)."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    img = img[:h, :w]
    return img.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def brisque_features(img: np.ndarray) -> np.ndarray:
    """36-dimensional NSS feature vector of a grayscale image.

    Features 1-18 come from the full-resolution MSCN map, 19-36 from the
    half-resolution one, each scale contributing the fit of the MSCN
    coefficients (2 values) and of the four orientation-paired products
    (4 values each) in the order horizontal, vertical, diagonal,
    anti-diagonal.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or min(img.shape) < 64:
        raise ValidationError(
            f"BRISQUE needs a grayscale image of at least 64x64, got {img.shape}"
        )
    feats = []
    current = img
    for _ in range(2):
        feats.append(_nss_features(mscn(current)))
        current = half_resolution(current)
    return np.concatenate(feats)


def load_svr_coefficients(path) -> tuple[float, np.ndarray]:
    """Read a linear regressor file: bias followed by 36 weights."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            values = [float(tok) for tok in fh.read().split()]
    except OSError as exc:
        raise FileFormatError(f"cannot read regressor file {path}: {exc}") from exc
    except ValueError as exc:
        raise FileFormatError(f"{path}: non-numeric regressor entry") from exc
    if len(values) != FEATURE_DIM + 1:
        raise FileFormatError(
            f"{path}: expected 1 bias + {FEATURE_DIM} weights, got {len(values)} values"
        )
    return values[0], np.array(values[1:])


def brisque_score(features: np.ndarray, coefficients: tuple[float, np.ndarray]) -> float:
    """Apply an externally trained linear regressor to a feature vector."""
    bias, weights = coefficients
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (FEATURE_DIM,):
        raise ValidationError(f"expected a {FEATURE_DIM}-vector, got {features.shape}")
    return float(bias + features @ weights)


@dataclass(frozen=True)
class NiqeModel:
    """Multivariate Gaussian over pristine-image patch features."""

    mu: np.ndarray
    sigma: np.ndarray
    patch_size: int = 96
    scales: int = 2

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if mu.ndim != 1 or sigma.shape != (mu.size, mu.size):
            raise ValidationError(
                f"model shapes inconsistent: mu {mu.shape}, sigma {sigma.shape}"
            )
        if not np.allclose(sigma, sigma.T, atol=1e-10):
            raise ValidationError("model covariance must be symmetric")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)


def save_niqe_model(path, model: NiqeModel) -> None:
    with open(path, "wb") as fh:
        fh.write(NIQE_MAGIC)
        fh.write(struct.pack("<I", model.mu.size))
        fh.write(model.mu.astype("<f8").tobytes())
        fh.write(model.sigma.astype("<f8").tobytes(order="C"))


def load_niqe_model(path) -> NiqeModel:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise FileFormatError(f"cannot read NIQE model {path}: {exc}") from exc
    if len(blob) < 8 or blob[:4] != NIQE_MAGIC:
        raise FileFormatError(f"{path}: not a NIQE model file (bad magic)")
    (dim,) = struct.unpack_from("<I", blob, 4)
    expected = 8 + 8 * dim + 8 * dim * dim
    if len(blob) != expected:
        raise FileFormatError(f"{path}: model payload size mismatch for dim {dim}")
    mu = np.frombuffer(blob, dtype="<f8", count=dim, offset=8).astype(np.float64)
    sigma = (
        np.frombuffer(blob, dtype="<f8", count=dim * dim, offset=8 + 8 * dim)
        .reshape(dim, dim)
        .astype(np.float64)
    )
    return NiqeModel(mu=mu, sigma=sigma)


def patch_features(
    gray: np.ndarray,
    patch_size: int = 96,
    sharpness_threshold: float = 0.75,
) -> np.ndarray:
    """Per-patch 36-dim NSS features of the sharpest patches of an image.

    The image is cropped to whole patches, MSCN maps are computed at full
    and half resolution, and a patch is kept when its mean local contrast
    reaches ``sharpness_threshold`` times the sharpest patch's. Patches
    with degenerate statistics are skipped.
    """
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2:
        raise ValidationError(f"expected a grayscale image, got shape {gray.shape}")
    if patch_size < 32 or patch_size % 2 != 0:
        # patches must split exactly in two at the half-resolution scale
        raise ValidationError(f"patch size must be even and >= 32, got {patch_size}")
    num_h = gray.shape[0] // patch_size
    num_w = gray.shape[1] // patch_size
    if num_h * num_w < 4:
        raise ValidationError(
            f"image {gray.shape} holds only {num_h * num_w} patches of "
            f"{patch_size}px; at least 4 are needed"
        )
    gray = gray[: num_h * patch_size, : num_w * patch_size]

    mu, sd = _local_moments(gray)
    coeffs_full = (gray - mu) / (sd + 1.0)
    coeffs_half = mscn(half_resolution(gray))
    half_size = patch_size // 2

    sharpness = np.array(
        [
            [
                sd[i * patch_size : (i + 1) * patch_size, j * patch_size : (j + 1) * patch_size].mean()
                for j in range(num_w)
            ]
            for i in range(num_h)
        ]
    )
    cutoff = sharpness_threshold * sharpness.max()

    rows = []
    for i in range(num_h):
        for j in range(num_w):
            if sharpness[i, j] < cutoff:
                continue
            block_full = coeffs_full[
                i * patch_size : (i + 1) * patch_size, j * patch_size : (j + 1) * patch_size
            ]
            block_half = coeffs_half[
                i * half_size : (i + 1) * half_size, j * half_size : (j + 1) * half_size
            ]
            try:
                rows.append(
                    np.concatenate([_nss_features(block_full), _nss_features(block_half)])
                )
            except ValidationError:
                continue
    if not rows:
        raise ValidationError("no usable patches: all patch statistics degenerate")
    return np.stack(rows)


def fit_niqe_model(grays, patch_size: int = 96) -> NiqeModel:
    """Build the pristine-image Gaussian model from a set of grayscale images."""
    all_rows = [patch_features(g, patch_size) for g in grays]
    if not all_rows:
        raise ValidationError("model fitting needs at least one image")
    feats = np.concatenate(all_rows)
    if feats.shape[0] < 2:
        raise ValidationError("model fitting needs at least two patches in total")
    mu = feats.mean(axis=0)
    sigma = np.cov(feats, rowvar=False)
    return NiqeModel(mu=mu, sigma=sigma, patch_size=patch_size)


def mahalanobis_score(f: np.ndarray, mu: np.ndarray, combined_cov: np.ndarray) -> float:
    """sqrt((f - mu)^T pinv(cov) (f - mu)), clamped at 0 for rounding."""
    diff = np.asarray(f, dtype=np.float64) - np.asarray(mu, dtype=np.float64)
    quad = float(diff @ np.linalg.pinv(combined_cov) @ diff)
    return math.sqrt(max(quad, 0.0))


def niqe(gray: np.ndarray, model: NiqeModel) -> float:
    """Distance of an image's NSS statistics from the pristine model.

    Patch features are aggregated into their mean and covariance; the
    score is the Mahalanobis distance under the average of the model and
    image covariances, with a pseudo-inverse covering rank deficiency.
    Lower is better.
    """
    feats = patch_features(gray, model.patch_size)
    mu_img = feats.mean(axis=0)
    if feats.shape[0] > 1:
        cov_img = np.cov(feats, rowvar=False)
    else:
        cov_img = np.zeros_like(model.sigma)
    return mahalanobis_score(mu_img, model.mu, (model.sigma + cov_img) / 2.0)
