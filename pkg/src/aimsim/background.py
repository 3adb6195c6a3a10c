"""Background extraction from stabilized frames and the image-degradation
procedure used in the map-quality ablation."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .core import InvalidInputError


def extract_background(frames) -> np.ndarray:
    """Average a stack of aligned frames into one background image.

    frames: sequence of (H, W, 3) arrays in [0, 1], or an (N, H, W, 3) array.
    Moving agents wash out into faint ghosts proportional to how often they
    occupy a pixel; that is expected behavior for plain averaging.
    """
    frames = [np.asarray(f, dtype=np.float64) for f in frames]
    if len(frames) == 0:
        raise InvalidInputError("frame stack is empty")
    shape = frames[0].shape
    for i, f in enumerate(frames):
        if f.shape != shape:
            raise InvalidInputError(
                f"frame {i} has shape {f.shape}, expected {shape}"
            )
    mean = np.mean(frames, axis=0)
    return np.clip(mean, 0.0, 1.0)


def degrade(image, blur_sigma: float, noise_std: float, seed: int) -> np.ndarray:
    """Gaussian blur (kernel truncated at 3 sigma, edge-replicated borders)
    followed by additive Gaussian pixel noise, clamped back to [0, 1]."""
    if blur_sigma < 0 or noise_std < 0:
        raise InvalidInputError("blur_sigma and noise_std must be nonnegative")
    out = np.asarray(image, dtype=np.float64).copy()
    if blur_sigma > 0:
        if out.ndim == 3:
            sigma = (blur_sigma, blur_sigma, 0.0)
        else:
            sigma = blur_sigma
        out = ndimage.gaussian_filter(out, sigma=sigma, mode="nearest", truncate=3.0)
    if noise_std > 0:
        rng = np.random.default_rng(seed)
        out = out + rng.normal(0.0, noise_std, size=out.shape)
    return np.clip(out, 0.0, 1.0)
