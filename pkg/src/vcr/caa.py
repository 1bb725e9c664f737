"""Channel Adaptive Adjustment pipeline.

Per layer the two feature streams (intensity and chroma, both ``(H, W, C)``)
are instance-normalized, their channel second-moment matrices compared to
produce a variance map, the highest-variance strict-upper-triangle entries
masked, the streams gated and fused from the mask, and finally each stream
passes through the triplet channel enhancement block.

The masked second moments also define the filtering loss, whose analytic
gradient treats the mask as a constant: the selection step is discrete, so
only the masked L1 magnitude is differentiated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ValidationError
from .tensor import (
    conv2d,
    gb_pool,
    instance_norm,
    inverse_permutation,
    permute,
    sigmoid,
)

# Views interacting (C, W), (C, H), and (H, W) respectively; the third
# branch is the untouched spatial view.
BRANCH_AXES = ((1, 0, 2), (2, 0, 1), (0, 1, 2))

DEFAULT_MASK_RATIO = 1.0 / 3.0
DEFAULT_NUM_LAYERS = 3
DEFAULT_TCE_KERNEL = 7

# Pluggable post-recalibration enhancer slot. The default is the identity:
# distribution alignment then operates on the recalibrated features directly.
Enhancer = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


def identity_enhancer(f_i: np.ndarray, f_hv: np.ndarray):
    return f_i, f_hv


@dataclass(frozen=True)
class CaaConfig:
    mask_ratio: float = DEFAULT_MASK_RATIO
    num_layers: int = DEFAULT_NUM_LAYERS
    tce_kernel: int = DEFAULT_TCE_KERNEL
    fusion_strength: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.mask_ratio < 1.0:
            raise ValidationError(f"mask_ratio must be in (0, 1), got {self.mask_ratio}")
        if self.num_layers < 1:
            raise ValidationError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.tce_kernel < 1 or self.tce_kernel % 2 == 0:
            raise ValidationError(
                f"tce_kernel must be odd and positive, got {self.tce_kernel}"
            )
        if not 0.0 <= self.fusion_strength <= 1.0:
            raise ValidationError(
                f"fusion_strength must be in [0, 1], got {self.fusion_strength}"
            )


@dataclass(frozen=True)
class CovReport:
    """Per-layer channel statistics plus the features they came from.

    ``f_i`` / ``f_hv`` are the normalized ``(H, W, C)`` features whose
    second moments are ``d_i`` / ``d_hv``; they are kept so the filtering
    loss can be differentiated back to the features.
    """

    layer_index: int
    d_i: np.ndarray
    d_hv: np.ndarray
    cov: np.ndarray
    mask: np.ndarray
    f_i: np.ndarray = field(repr=False)
    f_hv: np.ndarray = field(repr=False)


def second_moment(f: np.ndarray) -> np.ndarray:
    """Channel Gram matrix ``F^T F / (H*W)`` of an (H, W, C) feature map."""
    if f.ndim != 3:
        raise ValidationError(f"second_moment expects (H, W, C), got rank {f.ndim}")
    h, w, c = f.shape
    flat = f.reshape(h * w, c)
    return flat.T @ flat / (h * w)


def variance_map(d_i: np.ndarray, d_hv: np.ndarray) -> np.ndarray:
    """Elementwise spread of the two moment matrices around their mean.

    Algebraically equals ``((d_i - d_hv) / 2) ** 2``.
    """
    if d_i.shape != d_hv.shape:
        raise ValidationError(
            f"moment matrices must share a shape, got {d_i.shape} vs {d_hv.shape}"
        )
    mu = 0.5 * (d_i + d_hv)
    return 0.5 * ((d_i - mu) ** 2 + (d_hv - mu) ** 2)


def build_mask(cov: np.ndarray, ratio: float) -> np.ndarray:
    """Select the highest-variance strict-upper-triangle entries.

    Of the ``T = C*(C-1)/2`` candidate entries, exactly ``ceil(ratio * T)``
    are set, largest values first; ties break toward smaller ``(i, j)`` in
    lexicographic order so the mask is deterministic.
    """
    c = cov.shape[0]
    if cov.ndim != 2 or cov.shape[1] != c:
        raise ValidationError(f"cov must be square, got {cov.shape}")
    if c < 2:
        raise ValidationError("mask construction needs at least 2 channels")
    if not 0.0 < ratio < 1.0:
        raise ValidationError(f"mask ratio must be in (0, 1), got {ratio}")
    rows, cols = np.triu_indices(c, k=1)
    values = cov[rows, cols]
    count = math.ceil(ratio * values.size)
    order = np.lexsort((cols, rows, -values))
    chosen = order[:count]
    mask = np.zeros((c, c))
    mask[rows[chosen], cols[chosen]] = 1.0
    return mask


def vcf_loss(reports: list[CovReport], num_layers: int | None = None):
    """Masked-L1 filtering loss over all layers, with feature gradients.

    Returns ``(loss, grads)`` where ``grads[x]`` is the pair of gradient
    arrays w.r.t. the layer's ``f_i`` and ``f_hv``. The mask is treated as
    a constant during differentiation.
    """
    if not reports:
        raise ValidationError("vcf_loss needs at least one covariance report")
    if num_layers is None:
        num_layers = len(reports)
    if num_layers != len(reports):
        raise ValidationError(
            f"layer count {num_layers} does not match {len(reports)} reports"
        )
    loss = 0.0
    grads: list[tuple[np.ndarray, np.ndarray]] = []
    for rep in reports:
        pair = []
        for f, d in ((rep.f_i, rep.d_i), (rep.f_hv, rep.d_hv)):
            loss += np.sum(rep.mask * np.abs(d))
            h, w, c = f.shape
            g = rep.mask * np.sign(d)
            flat = f.reshape(h * w, c)
            grad = (flat @ (g + g.T)) / (h * w) / num_layers
            pair.append(grad.reshape(f.shape))
        grads.append((pair[0], pair[1]))
    return loss / num_layers, grads


def vcf_filter_fuse(
    f_i: np.ndarray,
    f_hv: np.ndarray,
    mask: np.ndarray,
    strength: float = 1.0,
):
    """Gate channels by their mask involvement and fuse with the originals.

    A channel's involvement is its row-plus-column count in the mask over
    ``C - 1``; the gate scales the channel down by ``strength * involvement``
    (capped at full suppression) and the result is averaged with the input,
    so a zero mask or zero strength returns the inputs unchanged.
    """
    if f_i.shape != f_hv.shape or f_i.ndim != 3:
        raise ValidationError(
            f"feature streams must share an (H, W, C) shape, got {f_i.shape} vs {f_hv.shape}"
        )
    c = f_i.shape[2]
    if mask.shape != (c, c):
        raise ValidationError(f"mask shape {mask.shape} does not match {c} channels")
    involvement = (mask.sum(axis=1) + mask.sum(axis=0)) / max(c - 1, 1)
    gates = 1.0 - strength * np.minimum(1.0, involvement)
    out = []
    for f in (f_i, f_hv):
        gated = f * gates
        out.append(0.5 * (f + gated))
    return out[0], out[1]


@dataclass(frozen=True)
class TceWeights:
    """Per-branch convolution kernels and normalization affine parameters.

    Kernels are ``(1, 2, k, k)`` (the pooled view has two channels); gains
    and biases are scalars stored as shape-(1,) arrays.
    """

    kernels: tuple[np.ndarray, np.ndarray, np.ndarray]
    norm_gains: tuple[np.ndarray, np.ndarray, np.ndarray]
    norm_biases: tuple[np.ndarray, np.ndarray, np.ndarray]

    def __post_init__(self):
        if len(self.kernels) != 3 or len(self.norm_gains) != 3 or len(self.norm_biases) != 3:
            raise ValidationError("TCE weights need exactly three branches")
        k = self.kernels[0].shape[-1]
        for kern in self.kernels:
            if kern.shape != (1, 2, k, k) or k % 2 == 0:
                raise ValidationError(
                    f"TCE kernel must be (1, 2, k, k) with odd k, got {kern.shape}"
                )
        for arr in (*self.norm_gains, *self.norm_biases):
            if np.shape(arr) != (1,):
                raise ValidationError("TCE norm parameters must have shape (1,)")

    @property
    def kernel_size(self) -> int:
        return self.kernels[0].shape[-1]


def tce(f: np.ndarray, weights: TceWeights, eps: float = 1e-8) -> np.ndarray:
    """Triplet channel enhancement of a (C, H, W) feature map.

    Each branch permutes the tensor, pools the leading axis to (max, mean),
    convolves down to one channel, normalizes, and gates the permuted view
    with a sigmoid attention map; the branch outputs are inverse-permuted,
    averaged, and added residually onto the input.
    """
    if f.ndim != 3:
        raise ValidationError(f"tce expects a (C, H, W) tensor, got rank {f.ndim}")
    total = np.zeros_like(f)
    for axes, kern, gain, bias in zip(
        BRANCH_AXES, weights.kernels, weights.norm_gains, weights.norm_biases
    ):
        view = permute(f, axes)
        pooled = gb_pool(view)
        response = conv2d(pooled, kern)
        normed = instance_norm(response, eps) * gain.reshape(-1, 1, 1) + bias.reshape(-1, 1, 1)
        attention = sigmoid(normed)
        total += permute(view * attention, inverse_permutation(axes))
    return f + total / 3.0


@dataclass(frozen=True)
class LayerWeights:
    tce_i: TceWeights
    tce_hv: TceWeights


@dataclass(frozen=True)
class CaaWeights:
    layers: tuple[LayerWeights, ...]

    def __post_init__(self):
        if not self.layers:
            raise ValidationError("CAA weights need at least one layer")


def _norm_hwc(f: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    return instance_norm(f.transpose(2, 0, 1), eps).transpose(1, 2, 0)


def _tce_hwc(f: np.ndarray, w: TceWeights) -> np.ndarray:
    return tce(np.ascontiguousarray(f.transpose(2, 0, 1)), w).transpose(1, 2, 0)


def caa_forward(
    f_i: np.ndarray,
    f_hv: np.ndarray,
    cfg: CaaConfig,
    weights: CaaWeights,
):
    """Run the stacked filter-then-enhance layers on both feature streams.

    Returns the transformed ``(H, W, C)`` streams and one :class:`CovReport`
    per layer for downstream loss computation.
    """
    if f_i.shape != f_hv.shape or f_i.ndim != 3:
        raise ValidationError(
            f"feature streams must share an (H, W, C) shape, got {f_i.shape} vs {f_hv.shape}"
        )
    if len(weights.layers) != cfg.num_layers:
        raise ValidationError(
            f"weight bundle has {len(weights.layers)} layers, config wants {cfg.num_layers}"
        )
    reports: list[CovReport] = []
    for x, layer in enumerate(weights.layers, start=1):
        norm_i = _norm_hwc(f_i)
        norm_hv = _norm_hwc(f_hv)
        d_i = second_moment(norm_i)
        d_hv = second_moment(norm_hv)
        cov = variance_map(d_i, d_hv)
        mask = build_mask(cov, cfg.mask_ratio)
        fused_i, fused_hv = vcf_filter_fuse(norm_i, norm_hv, mask, cfg.fusion_strength)
        f_i = _tce_hwc(fused_i, layer.tce_i)
        f_hv = _tce_hwc(fused_hv, layer.tce_hv)
        reports.append(
            CovReport(
                layer_index=x,
                d_i=d_i,
                d_hv=d_hv,
                cov=cov,
                mask=mask,
                f_i=norm_i,
                f_hv=norm_hv,
            )
        )
    return f_i, f_hv, reports
