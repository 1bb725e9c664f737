"""Low-light enhancement operators and image-quality metrics.

The package bundles the polarized HVI color space with its perceptual
inverse, the variance-driven channel recalibration pipeline (covariance
filtering plus triplet channel enhancement), distribution-alignment and
reconstruction losses with analytic gradients, and a PSNR/SSIM/NIQE/BRISQUE
metric suite, all backed by a small float64 tensor substrate and a CLI.
"""

from .caa import (
    CaaConfig,
    CaaWeights,
    CovReport,
    LayerWeights,
    TceWeights,
    build_mask,
    caa_forward,
    identity_enhancer,
    second_moment,
    tce,
    variance_map,
    vcf_filter_fuse,
    vcf_loss,
)
from .colorspace import (
    HsvImage,
    HviImage,
    HviParams,
    RgbImage,
    hsv_to_rgb,
    hvi_to_rgb,
    hvt,
    phvit,
    rgb_to_hsv,
    rgb_to_hvi,
)
from .errors import FileFormatError, NumericCheckError, ValidationError, VcrError
from .losses import (
    LossBundle,
    LossWeights,
    cda_loss,
    channel_softmax,
    loss_record,
    make_bundle,
    rec_loss,
    total_loss,
)
from .metrics import (
    AggdFit,
    NiqeModel,
    SsimParams,
    aggd_fit,
    brisque_features,
    brisque_score,
    fit_niqe_model,
    load_niqe_model,
    mscn,
    niqe,
    psnr,
    save_niqe_model,
    ssim,
    to_gray,
)
from .tensor import (
    conv2d,
    gb_pool,
    instance_norm,
    load_tensor,
    permute,
    save_tensor,
    sigmoid,
    softmax_temp,
)

__version__ = "0.1.0"
