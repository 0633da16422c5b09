"""Krylov solution of the prism system, dense oracle, trace extraction.

The preconditioner inverts, independently per surface vertex, the
tridiagonal restriction of the matrix to that vertex's vertical dof line
(all layers); this targets the dominant y-direction anisotropy of the
graded mesh.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .assemble import SparseSystem
from .image import ImageGrid
from .mesh import PrismMesh, TriMesh


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_relative_residual: float
    converged: bool


def pcg(
    system: SparseSystem,
    precond: Callable[[np.ndarray], np.ndarray] | None = None,
    tol: float = 1e-8,
    max_iter: int | None = None,
    record_iterates: list | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Preconditioned conjugate gradients from the zero initial guess,
    stopping on ||r||/||rhs|| <= tol."""
    A = system.matrix
    b = system.rhs
    if max_iter is None:
        max_iter = max(100, int(10 * np.sqrt(system.dimension)))
    if precond is None:
        precond = lambda r: r
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), SolveReport(0, 0.0, True)
    x = np.zeros_like(b)
    r = b.copy()
    z = precond(r)
    d = z.copy()
    rz = float(r @ z)
    rel = float(np.linalg.norm(r)) / bnorm
    it = 0
    while rel > tol and it < max_iter:
        Ad = A @ d
        alpha = rz / float(d @ Ad)
        x += alpha * d
        r -= alpha * Ad
        if record_iterates is not None:
            record_iterates.append(x.copy())
        z = precond(r)
        rz_new = float(r @ z)
        d = z + (rz_new / rz) * d
        rz = rz_new
        rel = float(np.linalg.norm(r)) / bnorm
        it += 1
    return x, SolveReport(iterations=it, final_relative_residual=rel,
                          converged=rel <= tol)


def vertical_line_preconditioner(
    system: SparseSystem, prism: PrismMesh
) -> Callable[[np.ndarray], np.ndarray]:
    """LDL^T-factorized tridiagonal solves on each vertex's layer line.

    Dof (i, k) sits at k*Nv + i, so the line couplings live exactly on the
    Nv-th sparse diagonals. Blocks are principal submatrices of an SPD
    matrix, hence SPD.
    """
    nv = prism.tri.num_vertices
    K = prism.num_layers
    main = system.matrix.diagonal(0).reshape(K + 1, nv).copy()
    off = (
        system.matrix.diagonal(nv).reshape(K, nv).copy()
        if K > 0
        else np.zeros((0, nv))
    )
    # vectorized LDL^T across all vertex lines
    dpiv = np.empty_like(main)
    lfac = np.empty_like(off)
    dpiv[0] = main[0]
    for k in range(K):
        lfac[k] = off[k] / dpiv[k]
        dpiv[k + 1] = main[k + 1] - lfac[k] * off[k]
    if np.any(dpiv <= 0):
        raise ValueError("non-SPD vertical block encountered")

    def apply(r: np.ndarray) -> np.ndarray:
        y = r.reshape(K + 1, nv).copy()
        for k in range(K):
            y[k + 1] -= lfac[k] * y[k]
        y /= dpiv
        for k in range(K - 1, -1, -1):
            y[k] -= lfac[k] * y[k + 1]
        return y.reshape(-1)

    return apply


def jacobi_preconditioner(system: SparseSystem) -> Callable[[np.ndarray], np.ndarray]:
    d = system.matrix.diagonal(0)
    if np.any(d <= 0):
        raise ValueError("non-positive diagonal entry")
    return lambda r: r / d


class NotPositiveDefiniteError(ValueError):
    pass


def dense_solve(system: SparseSystem, cap: int = 2000) -> np.ndarray:
    """Dense Cholesky solve; certifies positive definiteness as a side
    effect (factorization fails iff some pivot is nonpositive)."""
    if system.dimension > cap:
        raise ValueError(f"system dimension {system.dimension} exceeds cap {cap}")
    dense = system.matrix.toarray()
    try:
        c, low = sla.cho_factor(dense)
    except sla.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
    return sla.cho_solve((c, low), system.rhs)


def extract_trace(solution: np.ndarray, prism: PrismMesh) -> np.ndarray:
    """Nodal values of the solution on the y=0 cap (layer-0 dofs)."""
    if len(solution) != prism.num_dofs:
        raise ValueError("solution length must equal the dof count")
    return np.asarray(solution[: prism.tri.num_vertices], dtype=np.float64)


def rasterize_trace(
    trace: np.ndarray, mesh: TriMesh, width: int, height: int
) -> ImageGrid:
    """Evaluate the P1 trace field at every pixel center, clamped to [0,1].

    Point location uses matplotlib's trapezoid-map triangle finder with a
    nearest-vertex fallback for pixels that slip outside the mesh
    numerically.
    """
    import matplotlib.tri as mtri

    triang = mtri.Triangulation(
        mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles
    )
    interp = mtri.LinearTriInterpolator(triang, np.asarray(trace, dtype=np.float64))
    xs = (np.arange(width) + 0.5) / width
    ys = (np.arange(height) + 0.5) / height
    xv, yv = np.meshgrid(xs, ys)
    vals = interp(xv.ravel(), yv.ravel())
    out = np.ma.filled(vals, np.nan)
    missing = np.isnan(out)
    if missing.any():
        px = np.column_stack([xv.ravel()[missing], yv.ravel()[missing]])
        d2 = (
            (px[:, None, 0] - mesh.vertices[None, :, 0]) ** 2
            + (px[:, None, 1] - mesh.vertices[None, :, 1]) ** 2
        )
        out[missing] = np.asarray(trace)[np.argmin(d2, axis=1)]
    return ImageGrid.from_array(
        np.clip(out.reshape(height, width), 0.0, 1.0)
    )
