"""Adaptive selection of the per-triangle exponent field.

Pipeline: TV pre-smoothing of the noisy image, then a refinement loop
(interpolate -> elementwise gradients -> edge estimator -> bulk marking
-> bisection), and finally the exponent map s = 1 - E(.; nu) clamped to
(0, 1) on the refined mesh.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .image import ImageGrid, sample_bilinear
from .mesh import TriMesh, bisect
from .tv import TvConfig, TvResult, tv_denoise

S_FLOOR = 1e-3
S_MAX = 1.0 - 1e-3


@dataclass(frozen=True)
class ExponentField:
    """Piecewise-constant exponent values per triangle, in (0, 1)."""

    mesh: TriMesh
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if len(v) != self.mesh.num_triangles:
            raise ValueError("one exponent value per triangle required")
        if np.any(v <= 0) or np.any(v >= 1):
            raise ValueError("exponent values must lie strictly in (0, 1)")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class EstimatorField:
    values: np.ndarray  # per-triangle, in [0, 1)


def interpolate_to_mesh(grid: ImageGrid, mesh: TriMesh) -> np.ndarray:
    """Nodal values of the P1 interpolant: bilinear image samples at the
    mesh vertices."""
    return sample_bilinear(grid, mesh.vertices)


def element_gradients(mesh: TriMesh, nodal: np.ndarray) -> np.ndarray:
    """Constant gradient of the P1 interpolant on each triangle, (nt, 2)."""
    nodal = np.asarray(nodal, dtype=np.float64)
    if len(nodal) != mesh.num_vertices:
        raise ValueError("nodal length must equal the vertex count")
    p = mesh.vertices[mesh.triangles]
    u = nodal[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if np.any(det <= 0):
        raise ValueError("degenerate or misoriented triangle encountered")
    du1 = u[:, 1] - u[:, 0]
    du2 = u[:, 2] - u[:, 0]
    gx = (d2[:, 1] * du1 - d1[:, 1] * du2) / det
    gy = (-d2[:, 0] * du1 + d1[:, 0] * du2) / det
    return np.column_stack([gx, gy])


def edge_estimator(grads: np.ndarray, lam: float) -> EstimatorField:
    """Edge indicator 1 - (1 + |g|^2/lambda^2)^(-1) per triangle."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    mag2 = np.einsum("ij,ij->i", grads, grads)
    return EstimatorField(values=1.0 - 1.0 / (1.0 + mag2 / lam**2))


def dorfler_mark(est: EstimatorField, beta: float) -> set[int]:
    """Minimal-cardinality bulk-chasing set: sort estimators descending
    (ties by ascending index) and accumulate squared values until the
    beta fraction of the total is reached."""
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    sq = np.asarray(est.values, dtype=np.float64) ** 2
    total = float(sq.sum())
    if total == 0.0:
        return set()
    order = np.lexsort((np.arange(len(sq)), -sq))
    csum = np.cumsum(sq[order])
    # accumulate until >= beta * total, robust to roundoff in the cumsum
    need = beta * total * (1.0 - 1e-14)
    count = int(np.searchsorted(csum, need, side="left")) + 1
    count = min(count, len(sq))
    if beta == 1.0:
        count = int(np.count_nonzero(sq))
    return set(int(i) for i in order[:count])


@dataclass(frozen=True)
class SelectParams:
    zeta: float
    tol_tv: float
    n_refine: int
    lam: float
    beta: float
    nu: float
    max_iter_tv: int = 2000

    def __post_init__(self):
        if min(self.zeta, self.tol_tv, self.lam, self.nu) <= 0:
            raise ValueError("zeta, tol_tv, lambda, nu must be positive")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if self.n_refine < 0:
            raise ValueError("n_refine must be nonnegative")


@dataclass
class SelectResult:
    mesh: TriMesh
    exponents: ExponentField
    tv_result: TvResult
    element_counts: list[int] = field(default_factory=list)


def select_s(grid: ImageGrid, params: SelectParams, mesh0: TriMesh) -> SelectResult:
    """Run the full exponent-selection loop on a noisy image.

    The image interpolant is rebuilt from the pixel data after every
    refinement; the final exponents use the nu-scaled indicator on the
    last mesh, clamped to [S_FLOOR, S_MAX].
    """
    tv_res = tv_denoise(
        grid,
        TvConfig(zeta=params.zeta, tol=params.tol_tv, max_iter=params.max_iter_tv),
    )
    u_tv = tv_res.image
    mesh = mesh0
    counts = [mesh.num_triangles]
    for _ in range(params.n_refine):
        nodal = interpolate_to_mesh(u_tv, mesh)
        grads = element_gradients(mesh, nodal)
        est = edge_estimator(grads, params.lam)
        marked = dorfler_mark(est, params.beta)
        mesh = bisect(mesh, marked)
        counts.append(mesh.num_triangles)
    nodal = interpolate_to_mesh(u_tv, mesh)
    grads = element_gradients(mesh, nodal)
    est = edge_estimator(grads, params.nu)
    s_vals = np.clip(1.0 - est.values, S_FLOOR, S_MAX)
    return SelectResult(
        mesh=mesh,
        exponents=ExponentField(mesh=mesh, values=s_vals),
        tv_result=tv_res,
        element_counts=counts,
    )
