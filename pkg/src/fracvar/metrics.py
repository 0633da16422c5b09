"""PSNR and SSIM against a reference image, dynamic range 1."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .image import ImageGrid

# SSIM defaults from the original reference implementation
_WIN = 11
_SIGMA = 1.5
_K1 = 0.01
_K2 = 0.03


@dataclass(frozen=True)
class ScorePair:
    psnr: float  # dB, math.inf for identical inputs
    ssim: float


def _check_dims(a: ImageGrid, b: ImageGrid):
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError(
            f"dimension mismatch: {(a.width, a.height)} vs {(b.width, b.height)}"
        )


def psnr(a: ImageGrid, b: ImageGrid) -> float:
    """10*log10(1/MSE); +inf when the images are identical."""
    _check_dims(a, b)
    mse = float(np.mean((a.values - b.values) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window() -> np.ndarray:
    r = np.arange(_WIN) - (_WIN - 1) / 2
    g = np.exp(-(r**2) / (2 * _SIGMA**2))
    w = np.outer(g, g)
    return w / w.sum()


_WINDOW = _gaussian_window()


def _filter(img: np.ndarray) -> np.ndarray:
    # 'reflect' is symmetric padding (edge pixel repeated)
    return ndimage.correlate(img, _WINDOW, mode="reflect")


def ssim(a: ImageGrid, b: ImageGrid) -> float:
    """Mean local SSIM, 11x11 Gaussian window (sigma 1.5), L=1."""
    _check_dims(a, b)
    if a.width < _WIN or a.height < _WIN:
        raise ValueError(f"images must be at least {_WIN}x{_WIN} for SSIM")
    x = a.values
    y = b.values
    c1 = _K1**2
    c2 = _K2**2
    mx = _filter(x)
    my = _filter(y)
    mxx = _filter(x * x)
    myy = _filter(y * y)
    mxy = _filter(x * y)
    vx = mxx - mx * mx
    vy = myy - my * my
    cxy = mxy - mx * my
    num = (2 * mx * my + c1) * (2 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num / den))


def score(a: ImageGrid, b: ImageGrid) -> ScorePair:
    return ScorePair(psnr=psnr(a, b), ssim=ssim(a, b))
