"""Command-line surface wiring all modules together.

One ``vcr`` binary with subcommands for color-space conversion, channel
recalibration demos, loss evaluation, metric computation, NIQE model
fitting, and the built-in numeric self-check. Exit codes are stable for
scripting: 0 success, 2 validation error, 3 I/O error, 4 numeric check
failure. Set ``VCR_LOG`` (debug/info/warning/error) for log verbosity.
"""

from __future__ import annotations

import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__
from .caa import CaaConfig, caa_forward, identity_enhancer, vcf_loss
from .colorspace import HviParams, hvi_to_rgb, rgb_to_hvi
from .errors import FileFormatError, NumericCheckError, ValidationError, VcrError
from .imgio import load_hvi, read_image, save_hvi, write_image
from .losses import LossWeights, cda_loss, loss_record, make_bundle, rec_loss
from .metrics import (
    brisque_features,
    brisque_score,
    fit_niqe_model,
    load_niqe_model,
    load_svr_coefficients,
    niqe,
    psnr,
    save_niqe_model,
    ssim,
    to_gray,
)
from .selfcheck import format_report, run_selfcheck
from .tensor import conv2d, save_tensor
from .weights import load_caa_weights, random_caa_weights, save_caa_weights

log = logging.getLogger("vcr")

DEFAULT_SEED = 42


def _setup_logging():
    name = os.environ.get("VCR_LOG", "warning").upper()
    level = getattr(logging, name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def hvi_params_options(fn):
    fn = click.option("--alpha-i", type=float, default=None,
                      help="Brightness rescale on inversion [default: 1.0].")(fn)
    fn = click.option("--alpha-s", type=float, default=None,
                      help="Saturation rescale on inversion [default: 1.0].")(fn)
    fn = click.option("--eps", type=float, default=None,
                      help="Intensity-collapse stability constant [default: 1e-8].")(fn)
    fn = click.option("--k", type=float, default=None,
                      help="Intensity-collapse scale, must be positive [default: 1.0].")(fn)
    return fn


def _resolve_params(base: HviParams, k, eps, alpha_s, alpha_i) -> HviParams:
    return HviParams(
        k=base.k if k is None else k,
        eps=base.eps if eps is None else eps,
        alpha_s=base.alpha_s if alpha_s is None else alpha_s,
        alpha_i=base.alpha_i if alpha_i is None else alpha_i,
    )


@click.group()
@click.version_option(__version__, prog_name="vcr")
def cli():
    """HVI color-space tools, channel recalibration, losses, and IQA metrics."""
    _setup_logging()


@cli.command("hvi-convert")
@click.argument("input_path", type=click.Path())
@click.argument("output_path", type=click.Path())
@hvi_params_options
def cmd_hvi_convert(input_path, output_path, k, eps, alpha_s, alpha_i):
    """Convert an image file to an HVI tensor with a parameter sidecar."""
    params = _resolve_params(HviParams(), k, eps, alpha_s, alpha_i)
    img = read_image(input_path)
    hvi = rgb_to_hvi(img, params)
    save_hvi(output_path, hvi, params)
    for name, plane in (("hhat", hvi.hhat), ("vhat", hvi.vhat), ("imax", hvi.imax)):
        click.echo(f"{name}: min {plane.min():.6g} max {plane.max():.6g}")
    log.info("wrote %s (+ sidecar)", output_path)


@cli.command("hvi-invert")
@click.argument("input_path", type=click.Path())
@click.argument("output_path", type=click.Path())
@hvi_params_options
@click.option("--bit-depth", type=click.Choice(["8", "16"]), default="8",
              show_default=True, help="PNG output depth.")
def cmd_hvi_invert(input_path, output_path, k, eps, alpha_s, alpha_i, bit_depth):
    """Invert an HVI tensor back to an image.

    Parameters default to the values recorded in the sidecar at conversion
    time; flags override them.
    """
    hvi, stored = load_hvi(input_path)
    params = _resolve_params(stored, k, eps, alpha_s, alpha_i)
    rgb = hvi_to_rgb(hvi, params)
    write_image(output_path, rgb, bit_depth=int(bit_depth))
    log.info("wrote %s", output_path)


def _lift_demo_features(hvi, channels: int, rng: np.random.Generator):
    """Expand the HVI planes into two C-channel feature stacks.

    The intensity stream filters the intensity plane with seeded 3x3
    kernels; the chroma stream alternates between the two chroma planes.
    Demo plumbing only: the recalibration operators take any features.
    """
    kernels = rng.standard_normal((channels, 1, 3, 3))
    f_i = conv2d(hvi.imax[None, :, :], kernels).transpose(1, 2, 0)
    chroma = np.stack([hvi.hhat, hvi.vhat])
    half = (channels + 1) // 2
    kern_h = rng.standard_normal((half, 1, 3, 3))
    kern_v = rng.standard_normal((channels - half, 1, 3, 3))
    parts = [conv2d(chroma[0:1], kern_h)]
    if channels - half > 0:
        parts.append(conv2d(chroma[1:2], kern_v))
    f_hv = np.concatenate(parts).transpose(1, 2, 0)
    return f_i, f_hv


@cli.command("caa-demo")
@click.argument("input_path", type=click.Path())
@click.option("--out", "out_dir", type=click.Path(), required=True,
              help="Directory for output tensors and per-layer statistics.")
@click.option("--weights", "weights_dir", type=click.Path(), default=None,
              help="Weight bundle directory (its caa.cfg wins over flags).")
@click.option("--random-seed", "--seed", "random_seed", type=int,
              default=DEFAULT_SEED, show_default=True,
              help="Seed for random weights and the channel-lifting kernels.")
@click.option("--channels", type=int, default=6, show_default=True,
              help="Feature channels lifted from the HVI planes.")
@click.option("--mask-ratio", type=float, default=1 / 3, show_default="1/3")
@click.option("--layers", type=int, default=3, show_default=True)
@click.option("--tce-kernel", type=int, default=7, show_default=True)
@click.option("--fusion-strength", type=float, default=1.0, show_default=True)
@click.option("--save-weights", "save_weights_dir", type=click.Path(), default=None,
              help="Also write the weights used as a bundle.")
def cmd_caa_demo(input_path, out_dir, weights_dir, random_seed, channels,
                 mask_ratio, layers, tce_kernel, fusion_strength, save_weights_dir):
    """Run the recalibration pipeline on features lifted from an image.

    Writes the transformed streams as tensors, dumps each layer's variance
    map and mask as text grids, and prints the filtering loss.
    """
    if channels < 2:
        raise ValidationError("caa-demo needs at least 2 channels")
    img = read_image(input_path)
    hvi = rgb_to_hvi(img)
    rng = np.random.default_rng(random_seed)
    f_i, f_hv = _lift_demo_features(hvi, channels, rng)

    if weights_dir is not None:
        weights, cfg = load_caa_weights(weights_dir)
    else:
        cfg = CaaConfig(mask_ratio=mask_ratio, num_layers=layers,
                        tce_kernel=tce_kernel, fusion_strength=fusion_strength)
        weights = random_caa_weights(random_seed, cfg)

    out_i, out_hv, reports = caa_forward(f_i, f_hv, cfg, weights)
    out_i, out_hv = identity_enhancer(out_i, out_hv)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_tensor(out / "f_i.vct", out_i)
    save_tensor(out / "f_hv.vct", out_hv)
    loss, _ = vcf_loss(reports)
    for rep in reports:
        np.savetxt(out / f"cov_layer{rep.layer_index}.txt", rep.cov, fmt="%.9e")
        np.savetxt(out / f"mask_layer{rep.layer_index}.txt", rep.mask, fmt="%d")
        click.echo(f"layer {rep.layer_index}: mask popcount {int(rep.mask.sum())}")
    click.echo(f"vcf_loss = {loss:.12g}")
    if save_weights_dir is not None:
        save_caa_weights(save_weights_dir, weights, cfg)
        log.info("saved weight bundle to %s", save_weights_dir)


@cli.command("loss-eval")
@click.argument("pred_path", type=click.Path())
@click.argument("gt_path", type=click.Path())
@click.option("--tau", type=float, default=1.0, show_default=True,
              help="Softmax temperature of the alignment loss.")
@click.option("--lambda-hvi", type=float, default=1.0, show_default=True)
@click.option("--lambda-vcf", type=float, default=0.5, show_default=True)
@click.option("--lambda-cda", type=float, default=0.5, show_default=True)
@click.option("--warmup", is_flag=True,
              help="Warm-up schedule: drop the filtering and alignment terms.")
@click.option("--vcf", "vcf_value", type=float, default=0.0, show_default=True,
              help="Externally computed filtering loss (e.g. from caa-demo).")
@hvi_params_options
def cmd_loss_eval(pred_path, gt_path, tau, lambda_hvi, lambda_vcf, lambda_cda,
                  warmup, vcf_value, k, eps, alpha_s, alpha_i):
    """Evaluate reconstruction, alignment, and total losses on an image pair.

    The alignment term compares the chroma planes of the two images; the
    filtering term is an input because it is a property of network
    features, not of an image pair.
    """
    params = _resolve_params(HviParams(), k, eps, alpha_s, alpha_i)
    pred = read_image(pred_path)
    gt = read_image(gt_path)
    if pred.planes.shape != gt.planes.shape:
        raise ValidationError(
            f"image dimensions differ: {pred.planes.shape[:2]} vs {gt.planes.shape[:2]}"
        )
    hvi_pred = rgb_to_hvi(pred, params)
    hvi_gt = rgb_to_hvi(gt, params)
    weights = LossWeights(lambda_hvi=lambda_hvi, lambda_vcf=lambda_vcf,
                          lambda_cda=lambda_cda, warmup=warmup)
    rec, rec_grads = rec_loss(pred, gt, hvi_pred, hvi_gt, lambda_hvi)
    chroma_pred = np.stack([hvi_pred.hhat, hvi_pred.vhat])
    chroma_gt = np.stack([hvi_gt.hhat, hvi_gt.vhat])
    cda, _ = cda_loss(chroma_pred, chroma_gt, tau)
    bundle = make_bundle(rec, vcf_value, cda, weights, grads=rec_grads)
    click.echo(loss_record(bundle, weights, tau))


def _metric_row(pred_path, gt_path, model, dynamic_range, svr_coef):
    pred = read_image(pred_path)
    gt = read_image(gt_path)
    if pred.planes.shape != gt.planes.shape:
        raise ValidationError(
            f"{pred_path}: size differs from reference "
            f"({pred.planes.shape[:2]} vs {gt.planes.shape[:2]})"
        )
    gray_pred = to_gray(pred.planes)
    gray_gt = to_gray(gt.planes)
    if min(gray_pred.shape) < 64:
        raise ValidationError(f"{pred_path}: image too small for the metric suite (min 64px)")
    psnr_value = psnr(pred.planes, gt.planes, dynamic_range)
    ssim_value = ssim(gray_pred, gray_gt)
    niqe_text = "na" if model is None else f"{niqe(gray_pred, model):.4f}"
    try:
        feats = brisque_features(gray_pred)
        feat_cells = [f"{v:.6g}" for v in feats]
    except ValidationError:
        # statistically degenerate image (e.g. constant): keep the row shape
        feats = None
        feat_cells = ["na"] * 36
    cells = [
        str(pred_path),
        "inf" if math.isinf(psnr_value) else f"{psnr_value:.4f}",
        f"{ssim_value:.6f}",
        niqe_text,
        *feat_cells,
    ]
    if svr_coef is not None:
        cells.append("na" if feats is None else f"{brisque_score(feats, svr_coef):.4f}")
    return "\t".join(cells)


@cli.command("metrics")
@click.option("--pred", "pred_path", type=click.Path(), default=None,
              help="Image under evaluation (needs --gt).")
@click.option("--gt", "gt_path", type=click.Path(), default=None,
              help="Reference image.")
@click.option("--manifest", "manifest_path", type=click.Path(), default=None,
              help="Batch file: one 'pred<TAB>gt' pair per line, # comments.")
@click.option("--model", "model_path", type=click.Path(), default=None,
              help="NIQE model file; without it the niqe column reads 'na'.")
@click.option("--dynamic-range", type=float, default=1.0, show_default=True,
              help="PSNR peak value L (images are normalized to [0, 1] on load).")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Worker threads for batch evaluation.")
@click.option("--svr", "svr_path", type=click.Path(), default=None,
              help="Linear regressor file; appends a brisque_score column.")
def cmd_metrics(pred_path, gt_path, manifest_path, model_path, dynamic_range,
                jobs, svr_path):
    """Compute the metric table for a pair or a manifest of pairs.

    Output columns: path, psnr, ssim, niqe, brisque_f1..f36 (tab-separated),
    one row per pair in input order.
    """
    if manifest_path is None and (pred_path is None or gt_path is None):
        raise ValidationError("need either --manifest or both --pred and --gt")
    if manifest_path is not None and pred_path is not None:
        raise ValidationError("--manifest and --pred/--gt are mutually exclusive")
    if jobs < 1:
        raise ValidationError(f"--jobs must be >= 1, got {jobs}")

    pairs: list[tuple[str, str]] = []
    if manifest_path is not None:
        if not os.path.exists(manifest_path):
            raise FileFormatError(f"cannot read manifest {manifest_path}")
        with open(manifest_path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise FileFormatError(
                        f"{manifest_path}:{lineno}: expected 'pred<TAB>gt'"
                    )
                pairs.append((parts[0], parts[1]))
    else:
        pairs.append((pred_path, gt_path))

    model = load_niqe_model(model_path) if model_path is not None else None
    svr_coef = load_svr_coefficients(svr_path) if svr_path is not None else None

    def row(pair):
        return _metric_row(pair[0], pair[1], model, dynamic_range, svr_coef)

    if jobs > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(row, pairs))
    else:
        rows = [row(pair) for pair in pairs]
    for line in rows:
        click.echo(line)


@cli.command("fit-niqe")
@click.argument("image_dir", type=click.Path())
@click.option("-o", "--output", "output_path", type=click.Path(), required=True,
              help="Where to write the model file.")
@click.option("--patch-size", type=int, default=96, show_default=True)
def cmd_fit_niqe(image_dir, output_path, patch_size):
    """Fit a NIQE pristine-image model from a folder of images."""
    directory = Path(image_dir)
    if not directory.is_dir():
        raise FileFormatError(f"not a directory: {image_dir}")
    paths = sorted(
        p for p in directory.iterdir()
        if p.suffix.lower() in (".png", ".pfm")
    )
    if not paths:
        raise FileFormatError(f"no PNG or PFM images found in {image_dir}")
    grays = [to_gray(read_image(p).planes) for p in paths]
    model = fit_niqe_model(grays, patch_size=patch_size)
    save_niqe_model(output_path, model)
    click.echo(f"fitted model on {len(paths)} images, feature dim {model.mu.size}")


@cli.command("selfcheck")
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
def cmd_selfcheck(seed):
    """Run the numeric verification suite; exit 0 only if every check passes."""
    results = run_selfcheck(seed=seed)
    click.echo(format_report(results))
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise NumericCheckError(f"{len(failed)} checks failed: {', '.join(failed)}")


def main(argv=None) -> int:
    """Entry point translating errors into the documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    except VcrError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    except OSError as exc:
        # unwritable outputs, permission problems, vanished directories
        click.echo(f"error: {exc}", err=True)
        return FileFormatError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
