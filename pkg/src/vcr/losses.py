"""Distribution-alignment and reconstruction losses with analytic gradients.

The alignment loss turns each channel of a ``(2C, H, W)`` feature map into
a probability distribution over its spatial positions via a
temperature-scaled softmax and sums the per-channel KL divergence against
the reference. The reconstruction loss is an element-mean L1 in both the
sRGB and HVI domains (mean rather than sum, so values are resolution
independent).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .colorspace import HviImage, RgbImage
from .errors import ValidationError


@dataclass(frozen=True)
class LossWeights:
    """Loss mixing weights; the warm-up flag zeroes the auxiliary terms."""

    lambda_hvi: float = 1.0
    lambda_vcf: float = 0.5
    lambda_cda: float = 0.5
    warmup: bool = False

    def __post_init__(self):
        for name in ("lambda_hvi", "lambda_vcf", "lambda_cda"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")

    @property
    def effective_vcf(self) -> float:
        return 0.0 if self.warmup else self.lambda_vcf

    @property
    def effective_cda(self) -> float:
        return 0.0 if self.warmup else self.lambda_cda


@dataclass(frozen=True)
class LossBundle:
    l_rec: float
    l_vcf: float
    l_cda: float
    l_total: float
    grads: dict[str, np.ndarray] = field(default_factory=dict, repr=False)


def _check_channel_input(f: np.ndarray, tau: float) -> np.ndarray:
    if tau <= 0:
        raise ValidationError(f"softmax temperature must be positive, got {tau}")
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 3:
        raise ValidationError(f"expected a (channels, H, W) tensor, got rank {f.ndim}")
    return f


def _log_softmax_rows(flat: np.ndarray, tau: float) -> np.ndarray:
    z = (flat - flat.max(axis=1, keepdims=True)) / tau
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def channel_softmax(f: np.ndarray, tau: float = 1.0) -> np.ndarray:
    """Per-channel spatial probability rows of shape (channels, H*W).

    Each row is a max-subtracted temperature softmax over the flattened
    spatial positions and sums to 1 even for inputs of magnitude 1e6.
    """
    f = _check_channel_input(f, tau)
    flat = f.reshape(f.shape[0], -1)
    return np.exp(_log_softmax_rows(flat, tau))


def cda_loss(f_pred: np.ndarray, f_gt: np.ndarray, tau: float = 1.0):
    """Summed per-channel KL divergence between spatial distributions.

    Returns ``(loss, grad)`` with the gradient taken w.r.t. ``f_pred``.
    The loss is invariant to per-channel additive shifts of either input
    (softmax shift invariance) and non-negative by Gibbs' inequality.
    """
    f_pred = _check_channel_input(f_pred, tau)
    f_gt = np.asarray(f_gt, dtype=np.float64)
    if f_pred.shape != f_gt.shape:
        raise ValidationError(
            f"feature shapes differ: {f_pred.shape} vs {f_gt.shape}"
        )
    pred_flat = f_pred.reshape(f_pred.shape[0], -1)
    gt_flat = f_gt.reshape(f_gt.shape[0], -1)
    log_p = _log_softmax_rows(pred_flat, tau)
    log_q = _log_softmax_rows(gt_flat, tau)
    p = np.exp(log_p)
    ratio = log_p - log_q
    per_channel = (p * ratio).sum(axis=1, keepdims=True)
    loss = float(per_channel.sum())
    grad = (p * (ratio - per_channel) / tau).reshape(f_pred.shape)
    return loss, grad


def _hvi_planes(hvi: HviImage) -> np.ndarray:
    return np.stack([hvi.hhat, hvi.vhat, hvi.imax])


def rec_loss(
    out_rgb: RgbImage,
    gt_rgb: RgbImage,
    out_hvi: HviImage,
    gt_hvi: HviImage,
    lambda_hvi: float = 1.0,
):
    """Element-mean L1 in sRGB plus ``lambda_hvi`` times the HVI-plane L1.

    Returns ``(loss, grads)`` with gradients keyed ``out_rgb`` and
    ``out_hvi``; the L1 subgradient at exact zeros is taken as 0.
    """
    if out_rgb.planes.shape != gt_rgb.planes.shape:
        raise ValidationError(
            f"RGB shapes differ: {out_rgb.planes.shape} vs {gt_rgb.planes.shape}"
        )
    if out_hvi.shape != gt_hvi.shape:
        raise ValidationError(
            f"HVI shapes differ: {out_hvi.shape} vs {gt_hvi.shape}"
        )
    diff_rgb = out_rgb.planes - gt_rgb.planes
    diff_hvi = _hvi_planes(out_hvi) - _hvi_planes(gt_hvi)
    loss = float(np.mean(np.abs(diff_rgb)) + lambda_hvi * np.mean(np.abs(diff_hvi)))
    grads = {
        "out_rgb": np.sign(diff_rgb) / diff_rgb.size,
        "out_hvi": lambda_hvi * np.sign(diff_hvi) / diff_hvi.size,
    }
    return loss, grads


def total_loss(rec: float, vcf: float, cda: float, w: LossWeights) -> float:
    """Weighted combination of the three components."""
    for name, value in (("rec", rec), ("vcf", vcf), ("cda", cda)):
        if not np.isfinite(value):
            raise ValidationError(f"{name} loss must be finite, got {value}")
    return rec + w.effective_vcf * vcf + w.effective_cda * cda


def make_bundle(
    rec: float,
    vcf: float,
    cda: float,
    w: LossWeights,
    grads: dict[str, np.ndarray] | None = None,
) -> LossBundle:
    return LossBundle(
        l_rec=rec,
        l_vcf=vcf,
        l_cda=cda,
        l_total=total_loss(rec, vcf, cda, w),
        grads=grads or {},
    )


def loss_record(bundle: LossBundle, w: LossWeights, tau: float) -> str:
    """Human-readable key-value record for line-oriented logging."""
    lines = [
        f"l_rec = {bundle.l_rec:.12g}",
        f"l_vcf = {bundle.l_vcf:.12g}",
        f"l_cda = {bundle.l_cda:.12g}",
        f"l_total = {bundle.l_total:.12g}",
        f"tau = {tau:.12g}",
        f"lambda_hvi = {w.lambda_hvi:.12g}",
        f"lambda_vcf = {w.effective_vcf:.12g}",
        f"lambda_cda = {w.effective_cda:.12g}",
    ]
    return "\n".join(lines)
