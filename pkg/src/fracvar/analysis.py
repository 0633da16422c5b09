"""Numerical checks of the analytical backbone of the model.

Covers the Muckenhoupt A2 quotient blow-up for exponent fields vanishing
at a point, the bounded-trace constant, the finite energy of a field with
a discontinuous cap value, and the cosine-mode oracle tying the truncated
cylinder solve to the constant-order fractional problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import roots_jacobi

from .image import ImageGrid


@dataclass(frozen=True)
class FractionalConstants:
    """Conormal normalization 2^(1-2s) Gamma(1-s)/Gamma(s).

    Uses math.gamma (Lanczos-class, < 1e-13 relative error) so the value
    is reproducible across platforms.
    """

    s: float
    d_s: float

    @staticmethod
    def for_order(s: float) -> "FractionalConstants":
        if not 0 < s < 1:
            raise ValueError("s must lie in (0, 1)")
        return FractionalConstants(
            s=s, d_s=2.0 ** (1.0 - 2.0 * s) * math.gamma(1.0 - s) / math.gamma(s)
        )


def conormal_constant(s: float) -> float:
    return FractionalConstants.for_order(s).d_s


@dataclass(frozen=True)
class ConstantWeight:
    """Weight y^delta with a constant exponent."""

    delta: float

    def __post_init__(self):
        if not -1 < self.delta <= 1:
            raise ValueError("delta must lie in (-1, 1]")


@dataclass(frozen=True)
class PowerLawWeight:
    """Weight y^(1-2s(x)) with s(x) = |x - x0|^q near the zero x0 = 0."""

    q: float

    def __post_init__(self):
        if self.q <= 0:
            raise ValueError("q must be positive")


def _power_law_avg(q: float, R: float, y0: float, inverse: bool) -> float:
    """Average of w^(+-1) over B_R(0) x (0, y0) for s(x) = |x|^q in 2-D.

    The y-integral is closed form per x; the x-integral runs radially in
    polar coordinates, which removes the |x|^(-q) singularity of the
    inverse weight at the origin.
    """

    def radial(r):
        s = np.minimum(r**q, 1.0)
        if inverse:
            expo = 2.0 * s  # exponent of y0 after integrating y^(2s-1)
            return np.where(expo > 0, y0**expo / np.maximum(expo, 1e-300), np.inf)
        expo = 2.0 - 2.0 * s
        return y0**expo / expo

    area_integral, _ = integrate.quad(
        lambda r: radial(r) * r, 0.0, R, epsabs=1e-13, epsrel=1e-9, limit=200
    )
    area_integral *= 2.0 * math.pi
    return area_integral / (math.pi * R * R * y0)


def a2_quotient(w, R: float, y0: float) -> float:
    """(avg of w)(avg of 1/w) over the cylinder B_R(0) x (0, y0)."""
    if not 0 < R < 1 or not 0 < y0 < 1:
        raise ValueError("R and y0 must lie in (0, 1)")
    if isinstance(w, ConstantWeight):
        d = w.delta
        avg_w = y0**d / (1.0 + d)
        avg_inv = y0 ** (-d) / (1.0 - d) if d < 1 else math.inf
        quotient = avg_w * avg_inv
    elif isinstance(w, PowerLawWeight):
        avg_w = _power_law_avg(w.q, R, y0, inverse=False)
        avg_inv = _power_law_avg(w.q, R, y0, inverse=True)
        quotient = avg_w * avg_inv
    else:
        raise TypeError(f"unsupported weight spec {type(w)!r}")
    if quotient < 1.0 - 1e-9:
        raise AssertionError("A2 quotient below 1 violates Cauchy-Schwarz")
    return quotient


@dataclass(frozen=True)
class CylinderField:
    """Smooth scalar field on the cylinder with its analytic gradient."""

    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


def trace_ratio(
    u: CylinderField,
    s_fn: Callable[[np.ndarray], np.ndarray],
    nx: int = 200,
    ny: int = 60,
    tau: float = 1.0,
) -> float:
    """Trace norm over energy norm on (0,1) x (0, tau).

    Numerator: L2 norm of u(., 0) with weight 4 s(x)^2. Denominator: the
    y^(1-2s(x))-weighted H1 norm, integrated per x-node with a Gauss-
    Jacobi rule matched to the y-exponent. Returns 0 for the 0/0 case.
    """
    if tau < 1.0:
        raise ValueError("tau must be at least 1")
    gx, gw = np.polynomial.legendre.leggauss(nx)
    xs = 0.5 * (gx + 1.0)
    xw = 0.5 * gw
    # keep delta = 1 - 2s strictly above -1 for the Jacobi rule
    svals = np.clip(np.asarray(s_fn(xs), dtype=np.float64), 0.0, 1.0 - 1e-6)

    u0 = np.asarray(u.value(xs, np.zeros_like(xs)), dtype=np.float64)
    trace_sq = float(np.sum(xw * 4.0 * svals**2 * u0**2))

    energy_sq = 0.0
    for x, wx, s in zip(xs, xw, svals):
        delta = 1.0 - 2.0 * s
        t, w = roots_jacobi(ny, 0.0, delta)
        yq = tau * 0.5 * (t + 1.0)
        scale = (tau / 2.0) ** (delta + 1.0)
        vv = np.asarray(u.value(np.full_like(yq, x), yq))
        ux, uy = u.grad(np.full_like(yq, x), yq)
        integrand = vv**2 + np.asarray(ux) ** 2 + np.asarray(uy) ** 2
        energy_sq += wx * scale * float(np.sum(w * integrand))
    if trace_sq == 0.0:
        return 0.0
    return math.sqrt(trace_sq) / math.sqrt(energy_sq)


def trace_ratio_battery(seed: int = 12345, n_fields: int = 20) -> list[float]:
    """Randomized trace/energy ratios: Gaussian-bump-times-polynomial
    fields crossed with five exponent profiles (three constants, a clipped
    V shape and a clipped ramp)."""
    rng = np.random.default_rng(seed)
    profiles = [
        lambda x: np.full_like(x, 0.25),
        lambda x: np.full_like(x, 0.5),
        lambda x: np.full_like(x, 0.75),
        lambda x: np.clip(np.abs(x - 0.5), 1e-3, 1.0 - 1e-3),
        lambda x: np.clip(x, 1e-3, 1.0 - 1e-3),
    ]
    ratios = []
    for _ in range(n_fields):
        cx, cy = rng.uniform(0, 1), rng.uniform(0, 1)
        a = rng.uniform(1.0, 8.0)
        c0, c1, c2 = rng.uniform(-1, 1, size=3)

        def val(x, y, cx=cx, cy=cy, a=a, c0=c0, c1=c1, c2=c2):
            return np.exp(-a * ((x - cx) ** 2 + (y - cy) ** 2)) * (
                c0 + c1 * x + c2 * y
            )

        def grd(x, y, cx=cx, cy=cy, a=a, c0=c0, c1=c1, c2=c2):
            e = np.exp(-a * ((x - cx) ** 2 + (y - cy) ** 2))
            poly = c0 + c1 * x + c2 * y
            return (
                e * (c1 - 2 * a * (x - cx) * poly),
                e * (c2 - 2 * a * (y - cy) * poly),
            )

        u = CylinderField(value=val, grad=grd)
        for s_fn in profiles:
            ratios.append(trace_ratio(u, s_fn))
    return ratios


def disc_trace_energy(kappa: float, epsrel: float = 1e-10) -> float:
    """Energy of the canonical discontinuous-trace profile for weight
    exponent 1-2*kappa; finite only for kappa < 1/4.

    The inner transverse integral is analytic, leaving
    int_0^1 y^(-1/2-2k) (y/2 + 1/24) dy.
    """
    if not 0 <= kappa < 0.25:
        raise ValueError("kappa must lie in [0, 1/4); the energy diverges beyond")
    alpha = -0.5 - 2.0 * kappa
    val, _ = integrate.quad(
        lambda y: 0.5 * y + 1.0 / 24.0,
        0.0,
        1.0,
        weight="alg",
        wvar=(alpha, 0.0),
        epsabs=0.0,
        epsrel=epsrel,
    )
    return val


def disc_trace_energy_closed_form(kappa: float) -> float:
    return 0.5 / (1.5 - 2.0 * kappa) + (1.0 / 24.0) / (0.5 - 2.0 * kappa)


def cosine_coefficients(profile: np.ndarray, mode_cap: int) -> np.ndarray:
    """Neumann cosine coefficients of samples at centers (j+0.5)/n."""
    profile = np.asarray(profile, dtype=np.float64)
    n = len(profile)
    j = (np.arange(n) + 0.5) / n
    k = np.arange(mode_cap + 1)
    basis = np.cos(np.pi * np.outer(k, j))  # (modes, n)
    coeff = 2.0 / n * basis @ profile
    coeff[0] *= 0.5
    return coeff


def constant_s_trace_oracle(
    f, s: float, mu: float, mode_cap: int, eval_points: np.ndarray | None = None
) -> np.ndarray:
    """Exact infinite-cylinder trace for a constant exponent on a 1-D
    profile with Neumann cosine modes.

    Mode k of the input is scaled by zeta/(lambda_k^s + zeta) with
    lambda_k = (k pi)^2 and zeta = mu s^2 / d_s. ImageGrid input is
    reduced to its column profile by row averaging.
    """
    if isinstance(f, ImageGrid):
        profile = f.values.mean(axis=0)
    else:
        profile = np.asarray(f, dtype=np.float64)
    n = len(profile)
    zeta = mu * s * s / conormal_constant(s)
    coeff = cosine_coefficients(profile, mode_cap)
    k = np.arange(mode_cap + 1)
    lam = (k * np.pi) ** 2
    gain = np.where(k == 0, 1.0, zeta / (lam**s + zeta))
    if eval_points is None:
        eval_points = (np.arange(n) + 0.5) / n
    basis = np.cos(np.pi * np.outer(k, np.asarray(eval_points)))
    return (coeff * gain) @ basis
