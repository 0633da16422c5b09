"""Adaptive variable-order fractional denoising via weighted cylinder
extension problems.

Subpackage map:

- ``image``    grayscale container, PGM I/O, noise, bilinear sampling
- ``tv``       ROF denoising (dual projection) and the fidelity-weight search
- ``metrics``  PSNR / SSIM scoring
- ``mesh``     triangulations, newest-vertex bisection, graded prisms
- ``exponent`` adaptive selection of the per-triangle order field
- ``assemble`` sparse weighted FE assembly on the cylinder
- ``solve``    PCG with a vertical-line preconditioner, trace extraction
- ``analysis`` analytical cross-checks (weights, traces, oracles)
- ``fixtures`` synthetic test images and parameter sets
- ``pipeline`` end-to-end denoising runs
- ``cli``      command line front end
"""

__version__ = "0.1.0"

from .image import ImageGrid, add_gaussian_noise, load_pgm, save_pgm
from .metrics import psnr, ssim
from .pipeline import DenoiseRun, run_denoise
from .tv import TvConfig, tv_denoise

__all__ = [
    "ImageGrid",
    "add_gaussian_noise",
    "load_pgm",
    "save_pgm",
    "psnr",
    "ssim",
    "DenoiseRun",
    "run_denoise",
    "TvConfig",
    "tv_denoise",
    "__version__",
]
