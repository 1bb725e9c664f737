"""Weight bundle persistence for the recalibration pipeline.

A bundle is a directory holding one tensor file per parameter, a
``manifest.txt`` mapping parameter keys to those file names, and a
``caa.cfg`` with the pipeline configuration. Keys follow
``layer<x>.tce_i.branch<y>.kernel`` (and ``.norm_gain`` / ``.norm_bias``),
with ``tce_hv`` for the chroma stream; ``x`` counts layers from 1 and
``y`` branches from 1.
"""

from __future__ import annotations

import os

import numpy as np

from .caa import CaaConfig, CaaWeights, LayerWeights, TceWeights
from .errors import FileFormatError
from .tensor import load_tensor, save_tensor

MANIFEST_NAME = "manifest.txt"
CONFIG_NAME = "caa.cfg"
STREAMS = ("tce_i", "tce_hv")
PARTS = ("kernel", "norm_gain", "norm_bias")


def random_tce_weights(rng: np.random.Generator, kernel_size: int) -> TceWeights:
    """Draw small Gaussian kernels with unit gains and zero biases."""
    kernels = tuple(
        0.1 * rng.standard_normal((1, 2, kernel_size, kernel_size)) for _ in range(3)
    )
    return TceWeights(
        kernels=kernels,
        norm_gains=tuple(np.ones(1) for _ in range(3)),
        norm_biases=tuple(np.zeros(1) for _ in range(3)),
    )


def random_caa_weights(seed: int, cfg: CaaConfig) -> CaaWeights:
    rng = np.random.default_rng(seed)
    layers = tuple(
        LayerWeights(
            tce_i=random_tce_weights(rng, cfg.tce_kernel),
            tce_hv=random_tce_weights(rng, cfg.tce_kernel),
        )
        for _ in range(cfg.num_layers)
    )
    return CaaWeights(layers=layers)


def zero_caa_weights(cfg: CaaConfig) -> CaaWeights:
    """All-zero kernels and biases: every TCE collapses to f -> 1.5 * f."""
    def zero_tce():
        return TceWeights(
            kernels=tuple(
                np.zeros((1, 2, cfg.tce_kernel, cfg.tce_kernel)) for _ in range(3)
            ),
            norm_gains=tuple(np.ones(1) for _ in range(3)),
            norm_biases=tuple(np.zeros(1) for _ in range(3)),
        )

    return CaaWeights(
        layers=tuple(
            LayerWeights(tce_i=zero_tce(), tce_hv=zero_tce())
            for _ in range(cfg.num_layers)
        )
    )


def save_caa_weights(directory, weights: CaaWeights, cfg: CaaConfig) -> None:
    directory = os.fspath(directory)
    os.makedirs(directory, exist_ok=True)
    manifest_lines = []
    for x, layer in enumerate(weights.layers, start=1):
        for stream_name, stream in (("tce_i", layer.tce_i), ("tce_hv", layer.tce_hv)):
            for y in range(1, 4):
                arrays = {
                    "kernel": stream.kernels[y - 1],
                    "norm_gain": stream.norm_gains[y - 1],
                    "norm_bias": stream.norm_biases[y - 1],
                }
                for part, arr in arrays.items():
                    key = f"layer{x}.{stream_name}.branch{y}.{part}"
                    fname = key.replace(".", "_") + ".vct"
                    save_tensor(os.path.join(directory, fname), arr)
                    manifest_lines.append(f"{key} = {fname}\n")
    with open(os.path.join(directory, MANIFEST_NAME), "w", encoding="ascii") as fh:
        fh.writelines(manifest_lines)
    with open(os.path.join(directory, CONFIG_NAME), "w", encoding="ascii") as fh:
        fh.write(f"mask_ratio = {cfg.mask_ratio!r}\n")
        fh.write(f"num_layers = {cfg.num_layers}\n")
        fh.write(f"tce_kernel = {cfg.tce_kernel}\n")
        fh.write(f"fusion_strength = {cfg.fusion_strength!r}\n")


def _parse_kv_file(path) -> dict[str, str]:
    if not os.path.exists(path):
        raise FileFormatError(f"missing bundle file: expected {path}")
    entries: dict[str, str] = {}
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FileFormatError(f"{path}: malformed line {line!r}")
            key, _, value = line.partition("=")
            entries[key.strip()] = value.strip()
    return entries


def load_caa_weights(directory) -> tuple[CaaWeights, CaaConfig]:
    directory = os.fspath(directory)
    raw_cfg = _parse_kv_file(os.path.join(directory, CONFIG_NAME))
    try:
        cfg = CaaConfig(
            mask_ratio=float(raw_cfg["mask_ratio"]),
            num_layers=int(raw_cfg["num_layers"]),
            tce_kernel=int(raw_cfg["tce_kernel"]),
            fusion_strength=float(raw_cfg["fusion_strength"]),
        )
    except KeyError as exc:
        raise FileFormatError(f"{CONFIG_NAME}: missing key {exc}") from exc
    manifest = _parse_kv_file(os.path.join(directory, MANIFEST_NAME))

    def fetch(key: str) -> np.ndarray:
        if key not in manifest:
            raise FileFormatError(f"{MANIFEST_NAME}: missing key {key}")
        return load_tensor(os.path.join(directory, manifest[key]))

    layers = []
    for x in range(1, cfg.num_layers + 1):
        streams = {}
        for stream_name in STREAMS:
            kernels, gains, biases = [], [], []
            for y in range(1, 4):
                prefix = f"layer{x}.{stream_name}.branch{y}"
                kernels.append(fetch(f"{prefix}.kernel"))
                gains.append(fetch(f"{prefix}.norm_gain"))
                biases.append(fetch(f"{prefix}.norm_bias"))
            streams[stream_name] = TceWeights(
                kernels=tuple(kernels),
                norm_gains=tuple(gains),
                norm_biases=tuple(biases),
            )
        layers.append(LayerWeights(tce_i=streams["tce_i"], tce_hv=streams["tce_hv"]))
    return CaaWeights(layers=tuple(layers)), cfg
