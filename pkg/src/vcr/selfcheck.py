"""Built-in numeric verification suite.

Every check recomputes an expected value through an independent route
(brute-force loops, closed forms, finite differences) and compares it
against the library path at a stated tolerance. ``overrides`` lets a test
harness swap individual operations for deliberately broken ones to prove
the checks actually bite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import caa, colorspace, losses, metrics, tensor


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _loop_permute(t, axes):
    out = np.zeros(tuple(t.shape[a] for a in axes))
    for idx in np.ndindex(t.shape):
        out[tuple(idx[a] for a in axes)] = t[idx]
    return out


def _loop_conv2d(t, kernel):
    cin, h, w = t.shape
    cout, _, k, _ = kernel.shape
    pad = k // 2
    out = np.zeros((cout, h, w))
    for o in range(cout):
        for y in range(h):
            for x in range(w):
                acc = 0.0
                for c in range(cin):
                    for dy in range(k):
                        for dx in range(k):
                            yy, xx = y + dy - pad, x + dx - pad
                            if 0 <= yy < h and 0 <= xx < w:
                                acc += t[c, yy, xx] * kernel[o, c, dy, dx]
                out[o, y, x] = acc
    return out


def _loop_second_moment(f):
    h, w, c = f.shape
    out = np.zeros((c, c))
    for i in range(c):
        for j in range(c):
            out[i, j] = sum(
                f[y, x, i] * f[y, x, j] for y in range(h) for x in range(w)
            ) / (h * w)
    return out


def _central_difference(fn, x, step=1e-5):
    grad = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_g = grad.reshape(-1)
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + step
        hi = fn(x)
        flat_x[i] = orig - step
        lo = fn(x)
        flat_x[i] = orig
        flat_g[i] = (hi - lo) / (2.0 * step)
    return grad


def _max_rel_error(a, b, floor=1e-8):
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


def _sample_aggd(rng, shape, sigma_l, sigma_r, n):
    right = rng.random(n) < sigma_r / (sigma_l + sigma_r)
    magnitude = rng.gamma(1.0 / shape, 1.0, size=n) ** (1.0 / shape)
    return np.where(right, 1.0, -1.0) * np.where(right, sigma_r, sigma_l) * magnitude


def run_selfcheck(seed: int = 42, overrides: dict | None = None) -> list[CheckResult]:
    """Run all checks; returns one result per named check."""
    overrides = overrides or {}
    permute = overrides.get("permute", tensor.permute)
    conv2d = overrides.get("conv2d", tensor.conv2d)
    second_moment = overrides.get("second_moment", caa.second_moment)
    variance_map = overrides.get("variance_map", caa.variance_map)

    rng = np.random.default_rng(seed)
    results: list[CheckResult] = []

    def record(name, err, tol):
        results.append(
            CheckResult(name, err <= tol, f"measured {err:.3g} (tolerance {tol:.3g})")
        )

    # --- tensor substrate ------------------------------------------------
    err = 0.0
    for _ in range(10):
        rank = int(rng.integers(2, 5))
        shape = tuple(int(rng.integers(1, 5)) for _ in range(rank))
        axes = tuple(rng.permutation(rank))
        t = rng.standard_normal(shape)
        err = max(err, float(np.max(np.abs(permute(t, axes) - _loop_permute(t, axes)))))
        back = permute(permute(t, axes), tensor.inverse_permutation(axes))
        err = max(err, float(np.max(np.abs(back - t))))
    record("permute_index_oracle", err, 0.0)

    t = np.array([[[0.0, 1.0], [1.0, 0.0]], [[2.0, 3.0], [3.0, 2.0]]])
    pooled = tensor.gb_pool(t)
    err = float(np.max(np.abs(pooled[0] - [[2, 3], [3, 2]])))
    err = max(err, float(np.max(np.abs(pooled[1] - [[1, 2], [2, 1]]))))
    for _ in range(5):
        p = tensor.gb_pool(rng.standard_normal((4, 3, 3)))
        err = max(err, float(np.max(np.maximum(p[1] - p[0], 0.0))))
    record("gb_pool_hand_case", err, 0.0)

    err = 0.0
    for _ in range(5):
        x = rng.standard_normal((2, 5, 5))
        kern = rng.standard_normal((2, 2, 3, 3))
        err = max(err, float(np.max(np.abs(conv2d(x, kern) - _loop_conv2d(x, kern)))))
    record("conv2d_loop_oracle", err, 1e-12)

    x = rng.standard_normal((3, 6, 6))
    err = float(np.max(np.abs(tensor.instance_norm(2.5 * x + 0.7) - tensor.instance_norm(x))))
    record("instance_norm_affine_invariance", err, 1e-6)

    v = rng.standard_normal(16)
    spreads = [np.ptp(tensor.softmax_temp(v, tau)) for tau in (0.5, 1.0, 4.0, 32.0)]
    monotone = all(a > b for a, b in zip(spreads, spreads[1:]))
    sums_err = abs(float(tensor.softmax_temp(v * 1e6, 1.0).sum()) - 1.0)
    results.append(
        CheckResult(
            "softmax_temperature_behavior",
            monotone and sums_err < 1e-9,
            f"spread monotone {monotone}, sum error {sums_err:.3g} (tolerance 1e-09)",
        )
    )

    # --- color space ------------------------------------------------------
    pixels = colorspace.RgbImage(rng.uniform(0.0, 1.0, size=(1, 10_000, 3)))
    back = colorspace.hsv_to_rgb(colorspace.rgb_to_hsv(pixels))
    record("hsv_roundtrip", float(np.max(np.abs(back.planes - pixels.planes))), 1e-9)

    hvi = colorspace.rgb_to_hvi(pixels)
    restored = colorspace.hvi_to_rgb(hvi)
    bright = colorspace.rgb_to_hsv(pixels).v > 1e-4
    err = float(np.max(np.max(np.abs(restored.planes - pixels.planes), axis=2)[bright]))
    record("hvi_roundtrip_bright_pixels", err, 1e-5)

    hsv = colorspace.rgb_to_hsv(pixels)
    ck = colorspace.intensity_collapse(hsv.v, 1.0, 1e-8)
    mag = np.sqrt(hvi.hhat**2 + hvi.vhat**2)
    record("chroma_magnitude_bound", float(np.max(np.abs(mag - ck * hsv.s))), 1e-9)

    # --- channel statistics ------------------------------------------------
    err = 0.0
    for _ in range(100):
        a = rng.standard_normal((5, 5))
        a = (a + a.T) / 2
        b = rng.standard_normal((5, 5))
        b = (b + b.T) / 2
        err = max(err, float(np.max(np.abs(variance_map(a, b) - 0.25 * (a - b) ** 2))))
    record("variance_map_identity", err, 1e-12)

    ok = True
    for c in range(2, 17):
        mask = caa.build_mask(np.abs(rng.standard_normal((c, c))), 1 / 3)
        t_count = c * (c - 1) // 2
        ok &= mask.sum() == math.ceil(t_count / 3)
        ok &= bool(np.all(mask[np.tril_indices(c)] == 0.0))
    results.append(
        CheckResult("mask_popcount_and_support", ok, "C in 2..16 at ratio 1/3")
    )

    err = 0.0
    for _ in range(20):
        f = rng.standard_normal((4, 4, 3))
        err = max(err, float(np.max(np.abs(second_moment(f) - _loop_second_moment(f)))))
    record("second_moment_loop_oracle", err, 1e-12)

    # --- gradients ----------------------------------------------------------
    f_i = rng.standard_normal((4, 3, 3))
    f_hv = rng.standard_normal((4, 3, 3))
    mask = caa.build_mask(
        caa.variance_map(caa.second_moment(f_i), caa.second_moment(f_hv)), 1 / 3
    )

    def vcf_report(fi, fhv):
        return caa.CovReport(
            1, caa.second_moment(fi), caa.second_moment(fhv),
            caa.variance_map(caa.second_moment(fi), caa.second_moment(fhv)),
            mask, f_i=fi, f_hv=fhv,
        )

    _, grads = caa.vcf_loss([vcf_report(f_i, f_hv)])
    fd = _central_difference(lambda f: caa.vcf_loss([vcf_report(f, f_hv)])[0], f_i.copy())
    record("vcf_gradient_check", _max_rel_error(grads[0][0], fd), 1e-4)

    f_pred = rng.standard_normal((4, 3, 3))
    f_gt = rng.standard_normal((4, 3, 3))
    _, grad = losses.cda_loss(f_pred, f_gt, tau=0.9)
    fd = _central_difference(lambda f: losses.cda_loss(f, f_gt, tau=0.9)[0], f_pred.copy())
    record("cda_gradient_check", _max_rel_error(grad, fd), 1e-4)

    bern_pred = np.array([[0.0, math.log(3.0)], [0.0, math.log(3.0)]]).reshape(2, 1, 2)
    bern_gt = np.zeros((2, 1, 2))
    kl, _ = losses.cda_loss(bern_pred, bern_gt)
    closed_form = 2.0 * (0.25 * math.log(0.5) + 0.75 * math.log(1.5))
    shift, _ = losses.cda_loss(f_pred + 4.2, f_pred)
    err = max(abs(kl - closed_form), abs(shift))
    record("cda_closed_form_and_shift", err, 1e-5)

    gt = colorspace.RgbImage(rng.uniform(0.3, 0.7, size=(4, 3, 3)))
    out = colorspace.RgbImage(
        np.clip(gt.planes + rng.choice([-0.1, 0.1], size=gt.planes.shape), 0, 1)
    )
    hvi_out = colorspace.rgb_to_hvi(out)
    hvi_gt = colorspace.rgb_to_hvi(gt)
    _, rec_grads = losses.rec_loss(out, gt, hvi_out, hvi_gt)
    fd = _central_difference(
        lambda p: losses.rec_loss(colorspace.RgbImage(p), gt, hvi_out, hvi_gt)[0],
        out.planes.copy(),
    )
    record("rec_gradient_check", _max_rel_error(rec_grads["out_rgb"], fd), 1e-4)

    # --- enhancement block ---------------------------------------------------
    zero = caa.TceWeights(
        kernels=tuple(np.zeros((1, 2, 3, 3)) for _ in range(3)),
        norm_gains=tuple(np.ones(1) for _ in range(3)),
        norm_biases=tuple(np.zeros(1) for _ in range(3)),
    )
    err = 0.0
    for _ in range(5):
        f = rng.standard_normal((3, 5, 4))
        err = max(err, float(np.max(np.abs(caa.tce(f, zero) - 1.5 * f))))
    record("tce_zero_kernel_closed_form", err, 1e-12)

    # --- metrics ---------------------------------------------------------------
    err = abs(metrics.psnr(np.full((8, 8), 0.5), np.zeros((8, 8))) - 10 * math.log10(4.0))
    record("psnr_closed_form", err, 1e-3)

    x = rng.uniform(0, 1, size=(24, 24))
    y = np.clip(x + 0.05 * rng.standard_normal(x.shape), 0, 1)
    err = abs(metrics.ssim(x, x.copy()) - 1.0)
    err = max(err, abs(metrics.ssim(x, y) - metrics.ssim(y, x)))
    record("ssim_self_and_symmetry", err, 1e-9)

    worst = 0.0
    for shape in (0.8, 1.0, 2.0, 3.0):
        samples = _sample_aggd(rng, shape, 0.8, 1.3, 100_000)
        fit = metrics.aggd_fit(samples)
        worst = max(
            worst,
            abs(fit.gamma_hat - shape) / shape,
            abs(fit.sigma_l - 0.8) / 0.8,
            abs(fit.sigma_r - 1.3) / 1.3,
        )
    record("aggd_parameter_recovery", worst, 0.10)

    return results


def format_report(results: list[CheckResult]) -> str:
    lines = []
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        lines.append(f"{status}  {res.name}: {res.detail}")
    failed = sum(not r.passed for r in results)
    lines.append(f"{len(results) - failed}/{len(results)} checks passed")
    return "\n".join(lines)
