"""Bicubic resampling and the acquisition (degradation) model.

Sample-position convention: pixel centres, so output sample ``i`` of a
resize by ``scale`` sits at input coordinate ``(i + 0.5) / scale - 0.5``.
Out-of-range taps are edge-replicated.  With this convention an odd
integer upsampling factor puts every ``alpha``-th output sample (starting
at ``(alpha - 1) // 2``) exactly on an input sample.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .lightfield import LightField

CUBIC_A = -0.5


def cubic_kernel(x, a: float = CUBIC_A):
    """Keys cubic convolution kernel; ``a = -0.5`` is Catmull-Rom."""
    x = np.abs(np.asarray(x, dtype=np.float64))
    x2, x3 = x * x, x * x * x
    out = np.zeros_like(x)
    near = x <= 1
    far = (x > 1) & (x < 2)
    out[near] = (a + 2) * x3[near] - (a + 3) * x2[near] + 1
    out[far] = a * x3[far] - 5 * a * x2[far] + 8 * a * x[far] - 4 * a
    return out


@lru_cache(maxsize=64)
def resize_weights(n_in: int, n_out: int, antialias: bool = True) -> np.ndarray:
    """Dense ``(n_out, n_in)`` bicubic resampling matrix.

    When shrinking with ``antialias`` the kernel is stretched by the
    reduction factor so it doubles as the low-pass prefilter.
    """
    scale = n_out / n_in
    stretch = 1.0 / scale if (antialias and scale < 1) else 1.0
    centers = (np.arange(n_out) + 0.5) / scale - 0.5
    half = 2.0 * stretch
    taps = np.arange(-int(np.ceil(half)) - 1, int(np.ceil(half)) + 2)
    first = np.floor(centers).astype(int)
    idx = first[:, None] + taps[None, :]
    w = cubic_kernel((idx - centers[:, None]) / stretch)
    w /= w.sum(axis=1, keepdims=True)
    W = np.zeros((n_out, n_in))
    rows = np.repeat(np.arange(n_out), len(taps))
    np.add.at(W, (rows, np.clip(idx, 0, n_in - 1).ravel()), w.ravel())
    W.setflags(write=False)
    return W


def resize(image: np.ndarray, shape: tuple[int, int], antialias: bool = True) -> np.ndarray:
    """Separable bicubic resize of a ``(Y, X[, C])`` image to ``shape = (Y', X')``."""
    image = np.asarray(image, dtype=np.float64)
    Wy = resize_weights(image.shape[0], shape[0], antialias)
    Wx = resize_weights(image.shape[1], shape[1], antialias)
    if image.ndim == 2:
        return Wy @ image @ Wx.T
    return np.einsum("ij,jk...,lk->il...", Wy, image, Wx)


def upsample(image: np.ndarray, alpha: int, method: str = "bicubic") -> np.ndarray:
    if int(alpha) != alpha or alpha < 2:
        raise ValueError(f"alpha must be an integer >= 2, got {alpha}")
    if method != "bicubic":
        raise ValueError(f"unsupported upsampling method {method!r}")
    image = np.asarray(image, dtype=np.float64)
    return resize(image, (image.shape[0] * alpha, image.shape[1] * alpha))


def upsample_lightfield(lf: LightField, alpha: int) -> LightField:
    v = lf.flat_views()
    return lf.with_views(np.stack([upsample(x, alpha) for x in v]))


@dataclass(frozen=True)
class DegradationParams:
    alpha: int = 3
    blur: str = "none"  # none | box | gaussian
    blur_sigma: float = 1.0
    noise_sigma: float = 0.0
    antialias: bool = True
    seed: int = 0

    def __post_init__(self):
        if int(self.alpha) != self.alpha or self.alpha < 2:
            raise ValueError(f"alpha must be an integer >= 2, got {self.alpha}")
        if self.blur not in ("none", "box", "gaussian"):
            raise ValueError(f"unknown blur {self.blur!r}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def crop_to_multiple(image: np.ndarray, alpha: int) -> np.ndarray:
    """Drop trailing rows/columns so both spatial sizes divide by ``alpha``."""
    Y, X = image.shape[:2]
    return image[: Y - Y % alpha, : X - X % alpha]


def decimate(image: np.ndarray, p: DegradationParams) -> np.ndarray:
    image = crop_to_multiple(np.asarray(image, dtype=np.float64), p.alpha)
    if p.blur != "none":
        size = [p.alpha, p.alpha] + [1] * (image.ndim - 2)
        if p.blur == "box":
            image = ndimage.uniform_filter(image, size=size, mode="nearest")
        else:
            sig = [p.blur_sigma, p.blur_sigma] + [0] * (image.ndim - 2)
            image = ndimage.gaussian_filter(image, sigma=sig, mode="nearest")
    Y, X = image.shape[:2]
    return resize(image, (Y // p.alpha, X // p.alpha), antialias=p.antialias)


def degrade(lf: LightField, p: DegradationParams) -> LightField:
    """Per-view blur, decimation by ``alpha`` and additive Gaussian noise.

    Views whose sides do not divide by ``alpha`` are cropped (trailing
    rows/columns) first.  Output is clamped to [0, 1].
    """
    low = np.stack([decimate(v, p) for v in lf.flat_views()])
    if p.noise_sigma > 0:
        rng = np.random.default_rng(p.seed)
        low = low + rng.normal(0.0, p.noise_sigma, size=low.shape)
    return lf.with_views(np.clip(low, 0.0, 1.0))
