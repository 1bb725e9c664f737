#!/usr/bin/env python3
"""Generate the bundled natural-image fixtures under tests/fixtures/.

The images are procedural but built to carry natural-scene statistics:
piecewise-smooth regions separated by hard edges, broad illumination
gradients, and a little fine texture, which makes their locally
normalized coefficients heavy-tailed the way photographs are, unlike
white noise. Fully seeded, so the files are reproducible byte for byte.
"""

import pathlib
import sys

import numpy as np
from scipy.ndimage import gaussian_filter

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from vcr.colorspace import RgbImage
from vcr.imgio import write_image

SIZE = 288
OUT_DIR = pathlib.Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def smooth_field(rng, size, sigma, amplitude=1.0):
    field = gaussian_filter(rng.standard_normal((size, size)), sigma)
    field -= field.min()
    peak = field.max()
    if peak > 0:
        field /= peak
    return amplitude * field


def add_blobs(rng, lum, count):
    yy, xx = np.mgrid[0:SIZE, 0:SIZE]
    for _ in range(count):
        cy, cx = rng.uniform(0.1 * SIZE, 0.9 * SIZE, size=2)
        ry = rng.uniform(0.05 * SIZE, 0.25 * SIZE)
        rx = rng.uniform(0.05 * SIZE, 0.25 * SIZE)
        angle = rng.uniform(0, np.pi)
        dy, dx = yy - cy, xx - cx
        u = dy * np.cos(angle) + dx * np.sin(angle)
        v = -dy * np.sin(angle) + dx * np.cos(angle)
        inside = (u / ry) ** 2 + (v / rx) ** 2 <= 1.0
        level = rng.uniform(0.15, 0.85)
        lum[inside] = 0.75 * level + 0.25 * lum[inside]
    return lum


def make_fixture(seed):
    rng = np.random.default_rng(seed)
    lum = 0.25 + smooth_field(rng, SIZE, sigma=40.0, amplitude=0.5)
    ramp = np.linspace(0, 1, SIZE)
    lum += rng.uniform(-0.15, 0.15) * ramp[None, :] + rng.uniform(-0.15, 0.15) * ramp[:, None]
    lum = add_blobs(rng, lum, count=int(rng.integers(8, 14)))
    lum += smooth_field(rng, SIZE, sigma=3.0, amplitude=0.08) - 0.04
    lum += 0.012 * rng.standard_normal((SIZE, SIZE))
    lum = np.clip(lum, 0.02, 0.98)

    tint_r = smooth_field(rng, SIZE, sigma=60.0, amplitude=0.12) - 0.06
    tint_b = smooth_field(rng, SIZE, sigma=60.0, amplitude=0.12) - 0.06
    planes = np.stack(
        [
            np.clip(lum + tint_r, 0.0, 1.0),
            lum,
            np.clip(lum + tint_b, 0.0, 1.0),
        ],
        axis=2,
    )
    return RgbImage(planes)


def main():
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    for i in range(6):
        img = make_fixture(seed=1000 + i)
        path = OUT_DIR / f"natural_{i:02d}.png"
        write_image(path, img, bit_depth=8)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
