"""Sparse assembly of the weighted prism system on the cylinder.

Each prism T = E x [a, b] carries the weight y^delta with delta = 1 - 2 s_E
constant on the triangle E, so every element integral factorizes into a
closed-form y-moment times an exact P1 triangle integral. The trace
fidelity and load act on the layer-0 dofs only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exponent import ExponentField
from .image import ImageGrid, sample_bilinear
from .mesh import PrismMesh


@dataclass(frozen=True)
class AssemblyParams:
    theta: float = 1e-10
    mu: float = 1.0

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("theta must be positive (no Poincare inequality)")
        if self.mu <= 0:
            raise ValueError("mu must be positive")


@dataclass(frozen=True)
class SparseSystem:
    dimension: int
    matrix: sp.csr_matrix  # symmetric positive definite
    rhs: np.ndarray


def y_moment(a, b, delta, p):
    """Exact integral of y^(delta+p) over [a, b] for delta + p + 1 > 0."""
    e = np.asarray(delta, dtype=np.float64) + p + 1.0
    if np.any(e <= 0):
        raise ValueError("requires delta + p + 1 > 0")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return (b**e - np.where(a == 0.0, 0.0, a**e)) / e


def _power_difference(a, b, e):
    """(b**e - a**e)/e without cancellation when b - a << a."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    safe_a = np.where(a == 0.0, 1.0, a)
    shifted = safe_a**e * np.expm1(e * np.log1p((b - a) / safe_a)) / e
    return np.where(a == 0.0, b**e / e, shifted)


def _shifted_weight_moments(a, b, delta):
    """J_k = int_a^b (y-a)^k y^delta dy for k = 0, 1, 2.

    Expressed through stable power differences; expanding (b-y) and (y-a)
    hat factors around a (instead of raw y-moments) keeps the layer
    matrices accurate when the interval sits far from the singularity."""
    h = b - a
    d1 = delta + 1.0
    J0 = _power_difference(a, b, d1)
    J1 = (h * b**d1 - _power_difference(a, b, d1 + 1.0)) / d1
    J1_up = (h * b ** (d1 + 1.0) - _power_difference(a, b, d1 + 2.0)) / (d1 + 1.0)
    J2 = (h * h * b**d1 - 2.0 * J1_up) / d1
    return J0, J1, J2


def interval_weight_matrices(a: float, b: float, delta: float):
    """Weighted P1 mass (W0) and stiffness (W2) on [a, b] with weight
    y^delta, for hat functions psi0 = (b-y)/h, psi1 = (y-a)/h."""
    h = b - a
    if h <= 0:
        raise ValueError("requires b > a")
    if delta <= -1.0:
        raise ValueError("requires delta > -1")
    J0, J1, J2 = _shifted_weight_moments(float(a), float(b), float(delta))
    w00 = (h * h * J0 - 2.0 * h * J1 + J2) / h**2
    w01 = (h * J1 - J2) / h**2
    w11 = J2 / h**2
    W0 = np.array([[w00, w01], [w01, w11]])
    W2 = (J0 / h**2) * np.array([[1.0, -1.0], [-1.0, 1.0]])
    return W0, W2


def triangle_matrices(coords: np.ndarray):
    """Exact P1 stiffness and mass matrices of one triangle (3x2 coords)."""
    coords = np.asarray(coords, dtype=np.float64)
    d1 = coords[1] - coords[0]
    d2 = coords[2] - coords[0]
    det = d1[0] * d2[1] - d1[1] * d2[0]
    area = 0.5 * det
    if area <= 0:
        raise ValueError("triangle must have positive (CCW) area")
    # gradients of the barycentric basis
    g = np.array(
        [
            [coords[1, 1] - coords[2, 1], coords[2, 0] - coords[1, 0]],
            [coords[2, 1] - coords[0, 1], coords[0, 0] - coords[2, 0]],
            [coords[0, 1] - coords[1, 1], coords[1, 0] - coords[0, 0]],
        ]
    ) / det
    A = area * (g @ g.T)
    M = (area / 12.0) * np.array([[2.0, 1, 1], [1, 2, 1], [1, 1, 2]])
    return A, M


# classical 7-point degree-5 triangle rule (barycentric points, weights)
_G1 = (6.0 - np.sqrt(15.0)) / 21.0
_G2 = (6.0 + np.sqrt(15.0)) / 21.0
_W1 = (155.0 - np.sqrt(15.0)) / 1200.0
_W2 = (155.0 + np.sqrt(15.0)) / 1200.0
TRI_QUAD_POINTS = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [1 - 2 * _G1, _G1, _G1],
        [_G1, 1 - 2 * _G1, _G1],
        [_G1, _G1, 1 - 2 * _G1],
        [1 - 2 * _G2, _G2, _G2],
        [_G2, 1 - 2 * _G2, _G2],
        [_G2, _G2, 1 - 2 * _G2],
    ]
)
TRI_QUAD_WEIGHTS = np.array([9 / 40, _W1, _W1, _W1, _W2, _W2, _W2])


def _batched_tri_matrices(verts: np.ndarray):
    """Vectorized P1 matrices for all triangles: verts is (nt, 3, 2)."""
    d1 = verts[:, 1] - verts[:, 0]
    d2 = verts[:, 2] - verts[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if np.any(det <= 0):
        raise ValueError("all triangles must have positive (CCW) area")
    area = 0.5 * det
    g = np.empty((len(verts), 3, 2))
    g[:, 0, 0] = verts[:, 1, 1] - verts[:, 2, 1]
    g[:, 0, 1] = verts[:, 2, 0] - verts[:, 1, 0]
    g[:, 1, 0] = verts[:, 2, 1] - verts[:, 0, 1]
    g[:, 1, 1] = verts[:, 0, 0] - verts[:, 2, 0]
    g[:, 2, 0] = verts[:, 0, 1] - verts[:, 1, 1]
    g[:, 2, 1] = verts[:, 1, 0] - verts[:, 0, 0]
    g /= det[:, None, None]
    A = area[:, None, None] * np.einsum("nid,njd->nij", g, g)
    M = (area / 12.0)[:, None, None] * np.array(
        [[2.0, 1, 1], [1, 2, 1], [1, 1, 2]]
    )
    return area, A, M


def _batched_interval_matrices(nodes: np.ndarray, deltas: np.ndarray):
    """W0, W2 for every (triangle delta, interval) pair: (nt, K, 2, 2)."""
    a = nodes[:-1][None, :]  # (1, K)
    b = nodes[1:][None, :]
    d = deltas[:, None]  # (nt, 1)
    h = b - a
    J0, J1, J2 = _shifted_weight_moments(a, b, d)
    W0 = np.empty(J0.shape + (2, 2))
    W0[..., 0, 0] = h * h * J0 - 2.0 * h * J1 + J2
    W0[..., 0, 1] = h * J1 - J2
    W0[..., 1, 0] = W0[..., 0, 1]
    W0[..., 1, 1] = J2
    W0 /= (h**2)[..., None, None]
    W2 = np.empty_like(W0)
    W2[..., 0, 0] = J0 / h**2
    W2[..., 0, 1] = -W2[..., 0, 0]
    W2[..., 1, 0] = -W2[..., 0, 0]
    W2[..., 1, 1] = W2[..., 0, 0]
    return W0, W2


def prism_block(coords: np.ndarray, a: float, b: float, delta: float,
                theta: float) -> np.ndarray:
    """Exact 6x6 weighted block of one prism E x [a,b].

    Local index order is (triangle vertex t, layer end l) -> 2*t + l.
    """
    A, M = triangle_matrices(coords)
    W0, W2 = interval_weight_matrices(a, b, delta)
    block = (
        np.einsum("tu,lm->tlum", A, W0)
        + np.einsum("tu,lm->tlum", M, W2)
        + theta * np.einsum("tu,lm->tlum", M, W0)
    )
    return block.reshape(6, 6)


def assemble_system(
    prism: PrismMesh,
    S: ExponentField,
    params: AssemblyParams,
    f: ImageGrid,
) -> SparseSystem:
    """Assemble the weighted stiffness + theta-mass over the cylinder, the
    trace fidelity matrix and the trace load for the given image."""
    tri = prism.tri
    if S.mesh is not tri and S.mesh.num_triangles != tri.num_triangles:
        raise ValueError("exponent field does not match the prism surface mesh")
    nv = tri.num_vertices
    nt = tri.num_triangles
    K = prism.num_layers
    ndof = prism.num_dofs

    verts = tri.vertices[tri.triangles]  # (nt, 3, 2)
    area, A, M = _batched_tri_matrices(verts)
    deltas = 1.0 - 2.0 * S.values
    W0, W2 = _batched_interval_matrices(prism.interval.nodes, deltas)

    # cylinder blocks: block[n,k,t,l,u,m]
    block = (
        np.einsum("ntu,nklm->nktlum", A, W0)
        + np.einsum("ntu,nklm->nktlum", M, W2)
        + params.theta * np.einsum("ntu,nklm->nktlum", M, W0)
    )
    layer = np.arange(K)[None, :, None, None, None, None]
    gvert = tri.triangles[:, None, :, None, None, None]
    lend = np.arange(2)[None, None, None, :, None, None]
    rows = np.broadcast_to((layer + lend) * nv + gvert, block.shape)
    gvert_c = tri.triangles[:, None, None, None, :, None]
    lend_c = np.arange(2)[None, None, None, None, None, :]
    cols = np.broadcast_to((layer + lend_c) * nv + gvert_c, block.shape)

    # trace fidelity: mu * s_E^2 * M on layer-0 dofs
    tm = (params.mu * S.values**2)[:, None, None] * M
    t_rows = np.broadcast_to(tri.triangles[:, :, None], tm.shape)
    t_cols = np.broadcast_to(tri.triangles[:, None, :], tm.shape)

    mat = sp.coo_matrix(
        (
            np.concatenate([block.ravel(), tm.ravel()]),
            (
                np.concatenate([rows.ravel(), t_rows.ravel()]),
                np.concatenate([cols.ravel(), t_cols.ravel()]),
            ),
        ),
        shape=(ndof, ndof),
    ).tocsr()
    mat.sum_duplicates()
    # duplicate summation order can differ between (i,j) and (j,i);
    # averaging with the transpose restores exact (bitwise) symmetry
    mat = ((mat + mat.T) * 0.5).tocsr()

    # load: mu * s_E^2 * int_E f phi_i, degree-5 quadrature, bilinear f
    qp = np.einsum("qt,ntd->nqd", TRI_QUAD_POINTS, verts)  # (nt, 7, 2)
    fq = sample_bilinear(f, qp.reshape(-1, 2)).reshape(nt, len(TRI_QUAD_WEIGHTS))
    contrib = np.einsum(
        "n,nq,q,qt->nt",
        params.mu * S.values**2 * area,
        fq,
        TRI_QUAD_WEIGHTS,
        TRI_QUAD_POINTS,
    )
    rhs = np.zeros(ndof)
    np.add.at(rhs, tri.triangles.ravel(), contrib.ravel())

    return SparseSystem(dimension=ndof, matrix=mat, rhs=rhs)


def write_matrix_market(system: SparseSystem, path) -> None:
    from scipy.io import mmwrite

    mmwrite(str(path), system.matrix)
