"""Synthetic test images and per-example parameter sets.

Fixture geometry is pinned and versioned: any change to the shapes below
must bump FIXTURE_VERSION so recorded run summaries stay comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import ImageGrid

FIXTURE_VERSION = "1"


@dataclass(frozen=True)
class ExperimentConfig:
    # step-1 TV pre-smoothing
    zeta: float = 0.2
    tol_tv: float = 1e-4
    max_iter_tv: int = 2000
    # exponent selection loop
    n_refine: int = 8
    lam: float = 300.0
    beta: float = 0.99
    nu: float = 200.0
    # cylinder solve
    mu: float = 8050.0
    theta: float = 1e-10
    K: int = 20
    tau_rule: str = "literal"  # "literal", "log", or "fixed"
    tau: float | None = None  # used when tau_rule == "fixed"
    grading_s: float = 0.32
    gamma_margin: float = 1.05
    # noise and mesh
    sigma: float = 0.1
    seed: int = 7
    mesh_m: int = 24
    # solver
    pcg_tol: float = 1e-8
    pcg_max_iter: int | None = None
    # TV baseline
    zeta_grid: tuple = tuple(float(z) for z in (1, 2, 3, 5, 8, 12, 18, 27, 40))
    tol_tv_star: float = 1e-8
    max_iter_tv_star: int = 4000

    @property
    def gamma(self) -> float:
        return self.gamma_margin / self.grading_s

    def resolve_tau(self, num_triangles: int) -> float:
        if self.tau_rule == "fixed":
            if self.tau is None:
                raise ValueError("tau_rule 'fixed' requires an explicit tau")
            return self.tau
        if self.tau_rule == "literal":
            return 1.0 + num_triangles / 3.0
        if self.tau_rule == "log":
            return 1.0 + np.log(num_triangles) / 3.0
        raise ValueError(f"unknown tau_rule {self.tau_rule!r}")


def make_shapes_image(size: int) -> ImageGrid:
    """Circle, axis-aligned square and a triangle whose right-pointing
    edges have slope +-1/3 (not grid aligned), intensity 1 on black."""
    if size < 64:
        raise ValueError("size must be at least 64")
    xs = (np.arange(size) + 0.5) / size
    x, y = np.meshgrid(xs, xs)
    img = np.zeros((size, size))
    # circle
    img[(x - 0.30) ** 2 + (y - 0.30) ** 2 <= 0.15**2] = 1.0
    # square
    img[(x >= 0.55) & (x <= 0.85) & (y >= 0.15) & (y <= 0.45)] = 1.0
    # triangle (0.25,0.60), (0.25,0.90), apex (0.70,0.75)
    inside = (x >= 0.25) & (y - 0.60 >= (x - 0.25) / 3.0) & (
        0.90 - y >= (x - 0.25) / 3.0
    )
    img[inside] = 1.0
    return ImageGrid.from_array(img)


STRIPE_INTENSITIES = (0.8, 0.7, 0.6, 0.5, 0.4, 0.35)


def make_stripes_image(size: int) -> ImageGrid:
    """Six equal-width vertical stripes, left to right; the last stripe
    absorbs any remainder when size is not divisible by 6."""
    img = np.empty((size, size))
    w = size // 6
    for i, val in enumerate(STRIPE_INTENSITIES):
        lo = i * w
        hi = (i + 1) * w if i < 5 else size
        img[:, lo:hi] = val
    return ImageGrid.from_array(img)


_PUBLISHED_PARAMS = {
    "shapes": dict(lam=300.0, nu=200.0, mu=8050.0),
    "stripes": dict(lam=15.0, nu=100.0, mu=2900.0),
    "cameraman": dict(lam=0.7, nu=20.0, mu=1e4),
}

# Parameter sets calibrated for the desk-scale fixture resolutions
# (96-128 px). The published lambda/nu/zeta values presume the gradient
# magnitudes of a much finer unpublished image resolution, and zeta here
# is the per-pixel discrete TV weight; mu carries over unchanged.
_DESK_PARAMS = {
    "shapes": dict(
        zeta=10.0, lam=40.0, nu=50.0, mu=50000.0, mesh_m=32, n_refine=6,
        tau_rule="fixed", tau=4.0,
    ),
    "cameraman": dict(
        zeta=8.0, lam=8.0, nu=6.0, mu=1e4, mesh_m=32,
        tau_rule="fixed", tau=4.0,
    ),
}

# The stripes parameters depend on the noise regime: heavier noise needs a
# stronger pre-smooth (smaller zeta) with a matching estimator scale and a
# weaker trace fidelity, or the exponent field locks onto residual noise.
_STRIPES_DESK_LOW_NOISE = dict(
    zeta=8.0, lam=2.0, nu=9.0, mu=8000.0, mesh_m=48, n_refine=5,
    beta=0.9, tau_rule="fixed", tau=4.0,
)
_STRIPES_DESK_HIGH_NOISE = dict(
    zeta=4.5, lam=2.0, nu=5.5, mu=4000.0, mesh_m=48, n_refine=5,
    beta=0.9, tau_rule="fixed", tau=4.0,
)
_STRIPES_NOISE_SPLIT = 0.125

FIXTURE_SIZES = {"shapes": 128, "stripes": 96}


def experiment_defaults(example_id: str) -> ExperimentConfig:
    """The published parameter set for the given example."""
    if example_id not in _PUBLISHED_PARAMS:
        raise ValueError(f"unknown example id {example_id!r}")
    return ExperimentConfig(**_PUBLISHED_PARAMS[example_id])


def desk_config(example_id: str, **overrides) -> ExperimentConfig:
    """Parameter set calibrated for the shipped fixture resolutions."""
    if example_id == "stripes":
        sigma = overrides.get("sigma", ExperimentConfig.sigma)
        params = dict(
            _STRIPES_DESK_HIGH_NOISE
            if sigma >= _STRIPES_NOISE_SPLIT
            else _STRIPES_DESK_LOW_NOISE
        )
    elif example_id in _DESK_PARAMS:
        params = dict(_DESK_PARAMS[example_id])
    else:
        raise ValueError(f"unknown example id {example_id!r}")
    params.update(overrides)
    return ExperimentConfig(**params)


def make_fixture(example_id: str, size: int | None = None) -> ImageGrid:
    if example_id == "shapes":
        return make_shapes_image(size or FIXTURE_SIZES["shapes"])
    if example_id == "stripes":
        return make_stripes_image(size or FIXTURE_SIZES["stripes"])
    raise ValueError(f"no generated fixture for {example_id!r}")
