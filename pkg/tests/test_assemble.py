import numpy as np
import pytest
from scipy import integrate

from fracvar.assemble import (
    AssemblyParams,
    TRI_QUAD_POINTS,
    TRI_QUAD_WEIGHTS,
    assemble_system,
    interval_weight_matrices,
    prism_block,
    triangle_matrices,
    write_matrix_market,
    y_moment,
)
from fracvar.exponent import ExponentField
from fracvar.image import ImageGrid
from fracvar.mesh import PrismMesh, graded_interval_mesh, uniform_tri_mesh


def _quad_moment(a, b, delta, p):
    if a == 0.0:
        val, _ = integrate.quad(lambda y: y**p, 0.0, b, weight="alg",
                                wvar=(delta, 0.0), epsabs=0, epsrel=1e-13)
    else:
        val, _ = integrate.quad(lambda y: y ** (delta + p), a, b,
                                epsabs=0, epsrel=1e-13)
    return val


def test_y_moment_against_quadrature():
    rng = np.random.default_rng(0)
    for _ in range(50):
        delta = rng.uniform(-0.99, 1.0)
        p = rng.integers(0, 3)
        b = rng.uniform(0.1, 5.0)
        a = 0.0 if rng.random() < 0.5 else rng.uniform(0.01, 0.9) * b
        assert y_moment(a, b, delta, p) == pytest.approx(
            _quad_moment(a, b, delta, int(p)), rel=1e-10
        )


def test_y_moment_invalid_exponent():
    with pytest.raises(ValueError):
        y_moment(0.0, 1.0, -1.5, 0)


def test_interval_weight_matrices_against_quadrature():
    rng = np.random.default_rng(1)
    for _ in range(20):
        delta = rng.uniform(-0.9, 1.0)
        b = rng.uniform(0.2, 3.0)
        a = 0.0 if rng.random() < 0.5 else rng.uniform(0.05, 0.8) * b
        h = b - a
        W0, W2 = interval_weight_matrices(a, b, delta)
        psi = [lambda y: (b - y) / h, lambda y: (y - a) / h]
        dpsi = [-1.0 / h, 1.0 / h]
        for i in range(2):
            for j in range(2):
                if a == 0.0:
                    m, _ = integrate.quad(lambda y: psi[i](y) * psi[j](y), 0, b,
                                          weight="alg", wvar=(delta, 0.0),
                                          epsabs=0, epsrel=1e-12)
                    k, _ = integrate.quad(lambda y: 1.0, 0, b, weight="alg",
                                          wvar=(delta, 0.0), epsabs=0, epsrel=1e-12)
                    k *= dpsi[i] * dpsi[j]
                else:
                    m, _ = integrate.quad(
                        lambda y: y**delta * psi[i](y) * psi[j](y), a, b,
                        epsabs=0, epsrel=1e-12)
                    k, _ = integrate.quad(
                        lambda y: y**delta * dpsi[i] * dpsi[j], a, b,
                        epsabs=0, epsrel=1e-12)
                assert W0[i, j] == pytest.approx(m, rel=1e-9, abs=1e-13)
                assert W2[i, j] == pytest.approx(k, rel=1e-9, abs=1e-13)


def test_interval_weight_matrices_known_values():
    W0, W2 = interval_weight_matrices(0.0, 1.0, 0.0)
    np.testing.assert_allclose(W0, [[1 / 3, 1 / 6], [1 / 6, 1 / 3]], atol=1e-15)
    np.testing.assert_allclose(W2, [[1, -1], [-1, 1]], atol=1e-15)
    W0, W2 = interval_weight_matrices(0.0, 1.0, 1.0)
    np.testing.assert_allclose(W0, [[1 / 12, 1 / 12], [1 / 12, 1 / 4]], atol=1e-15)
    np.testing.assert_allclose(W2, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)


def test_interval_weight_matrices_definiteness():
    rng = np.random.default_rng(6)
    for _ in range(20):
        delta = rng.uniform(-0.99, 1.0)
        b = rng.uniform(0.1, 2.0)
        a = 0.0 if rng.random() < 0.5 else rng.uniform(0.05, 0.9) * b
        W0, W2 = interval_weight_matrices(a, b, delta)
        assert np.linalg.eigvalsh(W0).min() > 0
        ev = np.linalg.eigvalsh(W2)
        assert ev.min() > -1e-12
        # constants span the kernel of the stiffness part
        np.testing.assert_allclose(W2 @ np.ones(2), 0.0, atol=1e-12)


def test_interval_weight_matrices_requires_positive_length():
    with pytest.raises(ValueError):
        interval_weight_matrices(1.0, 1.0, 0.0)


def _tri_quad(coords, fn, order=24):
    """Dense barycentric-grid quadrature, independent of the assembly rule."""
    # Gauss-Legendre collapsed Duffy transform on the reference triangle
    gx, gw = np.polynomial.legendre.leggauss(order)
    gx = 0.5 * (gx + 1)
    gw = 0.5 * gw
    total = 0.0
    v0, v1, v2 = coords
    for xi, wi in zip(gx, gw):
        for eta, we in zip(gx, gw):
            lam1 = xi * (1 - eta)
            lam2 = xi * eta
            p = v0 + lam1 * (v1 - v0) + lam2 * (v2 - v0)
            total += wi * we * xi * fn(p[0], p[1])
    d1, d2 = v1 - v0, v2 - v0
    det = d1[0] * d2[1] - d1[1] * d2[0]
    return total * det


def _p1_basis(coords):
    ones = np.column_stack([np.ones(3), coords])
    coeffs = np.linalg.inv(ones)  # column j: coefficients of phi_j

    def phi(j, x, y):
        return coeffs[0, j] + coeffs[1, j] * x + coeffs[2, j] * y

    grads = coeffs[1:, :].T  # (3, 2)
    return phi, grads


def test_triangle_matrices_against_quadrature():
    rng = np.random.default_rng(2)
    for _ in range(5):
        coords = rng.random((3, 2))
        d1 = coords[1] - coords[0]
        d2 = coords[2] - coords[0]
        if d1[0] * d2[1] - d1[1] * d2[0] < 0.05:
            continue
        A, M = triangle_matrices(coords)
        phi, grads = _p1_basis(coords)
        for i in range(3):
            for j in range(3):
                m = _tri_quad(coords, lambda x, y: phi(i, x, y) * phi(j, x, y))
                a = _tri_quad(coords, lambda x, y: grads[i] @ grads[j])
                assert M[i, j] == pytest.approx(m, rel=1e-10)
                assert A[i, j] == pytest.approx(a, rel=1e-10)


def test_triangle_matrices_unit_right_triangle():
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    A, M = triangle_matrices(coords)
    np.testing.assert_allclose(
        A, 0.5 * np.array([[2.0, -1, -1], [-1, 1, 0], [-1, 0, 1]]), atol=1e-15
    )
    np.testing.assert_allclose(
        M, np.array([[2.0, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24.0, atol=1e-15
    )


def test_triangle_stiffness_row_sums_vanish():
    rng = np.random.default_rng(3)
    for _ in range(10):
        coords = rng.random((3, 2))
        d1 = coords[1] - coords[0]
        d2 = coords[2] - coords[0]
        if d1[0] * d2[1] - d1[1] * d2[0] < 0.05:
            continue
        A, _ = triangle_matrices(coords)
        np.testing.assert_allclose(A @ np.ones(3), 0.0, atol=1e-12)


def test_triangle_matrices_rejects_clockwise():
    coords = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ValueError):
        triangle_matrices(coords)


def test_tri_quad_rule_is_degree_five():
    import math as _math

    # integrate monomials x^p y^q over the unit reference triangle
    ref = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    pts = TRI_QUAD_POINTS @ ref
    for p in range(6):
        for q in range(6 - p):
            exact = (
                _math.factorial(p) * _math.factorial(q)
                / _math.factorial(p + q + 2)
            )
            approx = 0.5 * np.sum(TRI_QUAD_WEIGHTS * pts[:, 0] ** p * pts[:, 1] ** q)
            assert approx == pytest.approx(exact, rel=1e-13)


def test_prism_block_symmetric_and_consistent():
    coords = np.array([[0.1, 0.2], [0.7, 0.3], [0.4, 0.9]])
    blk = prism_block(coords, 0.0, 0.5, -0.4, theta=1e-3)
    assert np.allclose(blk, blk.T, atol=0)
    # theta enters linearly through the tensor mass term
    blk0 = prism_block(coords, 0.0, 0.5, -0.4, theta=1e-12)
    blk2 = prism_block(coords, 0.0, 0.5, -0.4, theta=2e-3)
    np.testing.assert_allclose(blk2 - blk0, 2.0 * (blk - blk0), rtol=1e-6)


def test_assembly_params_validation():
    with pytest.raises(ValueError):
        AssemblyParams(theta=0.0, mu=1.0)
    with pytest.raises(ValueError):
        AssemblyParams(theta=1e-10, mu=0.0)


def _tiny_system(m=2, K=3, s_val=0.4, mu=10.0, theta=1e-6, f_val=0.7):
    tri = uniform_tri_mesh(m)
    prism = PrismMesh(tri=tri, interval=graded_interval_mesh(K, 2.0, 1.5))
    rng = np.random.default_rng(4)
    s = np.clip(s_val + 0.2 * rng.random(tri.num_triangles), 0.05, 0.95)
    field = ExponentField(mesh=tri, values=s)
    f = ImageGrid.from_array(np.full((8, 8), f_val))
    system = assemble_system(prism, field, AssemblyParams(theta=theta, mu=mu), f)
    return tri, prism, field, system, s, mu, theta


def test_assemble_matches_looped_blocks():
    tri, prism, field, system, s, mu, theta = _tiny_system()
    nv = tri.num_vertices
    nodes = prism.interval.nodes
    dense = np.zeros((prism.num_dofs, prism.num_dofs))
    for n in range(tri.num_triangles):
        coords = tri.vertices[tri.triangles[n]]
        delta = 1.0 - 2.0 * s[n]
        for k in range(prism.num_layers):
            blk = prism_block(coords, nodes[k], nodes[k + 1], delta, theta)
            dofs = [
                (k + l) * nv + tri.triangles[n][t]
                for t in range(3)
                for l in range(2)
            ]
            for ii, di in enumerate(dofs):
                for jj, dj in enumerate(dofs):
                    dense[di, dj] += blk[ii, jj]
        _, M = triangle_matrices(coords)
        tm = mu * s[n] ** 2 * M
        for ii in range(3):
            for jj in range(3):
                dense[tri.triangles[n][ii], tri.triangles[n][jj]] += tm[ii, jj]
    np.testing.assert_allclose(system.matrix.toarray(), dense, atol=1e-12)


def test_assemble_symmetric_and_spd():
    _, _, _, system, _, _, _ = _tiny_system()
    diff = (system.matrix - system.matrix.T).toarray()
    assert np.abs(diff).max() == 0.0
    evals = np.linalg.eigvalsh(system.matrix.toarray())
    assert evals.min() > 0


def test_assemble_rhs_constant_image():
    tri, prism, field, system, s, mu, _ = _tiny_system(f_val=0.7)
    areas = tri.areas()
    expect = np.zeros(prism.num_dofs)
    for n in range(tri.num_triangles):
        contrib = mu * s[n] ** 2 * 0.7 * areas[n] / 3.0
        for v in tri.triangles[n]:
            expect[v] += contrib
    np.testing.assert_allclose(system.rhs, expect, atol=1e-13)
    # only the trace layer is loaded
    assert np.all(system.rhs[tri.num_vertices:] == 0.0)


def test_assemble_mesh_mismatch_raises():
    tri = uniform_tri_mesh(2)
    other = uniform_tri_mesh(3)
    prism = PrismMesh(tri=tri, interval=graded_interval_mesh(3, 2.0, 1.0))
    field = ExponentField(mesh=other, values=np.full(other.num_triangles, 0.5))
    f = ImageGrid.from_array(np.full((8, 8), 0.5))
    with pytest.raises(ValueError):
        assemble_system(prism, field, AssemblyParams(theta=1e-10, mu=1.0), f)


def test_assemble_constant_s_kronecker_identity():
    """For constant S the matrix is a global Kronecker sum of the
    1-D y-matrices and the assembled 2-D P1 matrices."""
    import scipy.sparse as sp

    m, K, s_val, mu, theta = 2, 4, 0.35, 7.0, 1e-4
    tri = uniform_tri_mesh(m)
    interval = graded_interval_mesh(K, 2.5, 2.0)
    prism = PrismMesh(tri=tri, interval=interval)
    field = ExponentField(mesh=tri, values=np.full(tri.num_triangles, s_val))
    f = ImageGrid.from_array(np.full((8, 8), 0.3))
    system = assemble_system(prism, field, AssemblyParams(theta=theta, mu=mu), f)

    nv = tri.num_vertices
    # global 2-D matrices
    Ag = np.zeros((nv, nv))
    Mg = np.zeros((nv, nv))
    for n in range(tri.num_triangles):
        A, M = triangle_matrices(tri.vertices[tri.triangles[n]])
        for ii in range(3):
            for jj in range(3):
                Ag[tri.triangles[n][ii], tri.triangles[n][jj]] += A[ii, jj]
                Mg[tri.triangles[n][ii], tri.triangles[n][jj]] += M[ii, jj]
    # global 1-D matrices
    delta = 1.0 - 2.0 * s_val
    W0g = np.zeros((K + 1, K + 1))
    W2g = np.zeros((K + 1, K + 1))
    for k in range(K):
        W0, W2 = interval_weight_matrices(
            interval.nodes[k], interval.nodes[k + 1], delta
        )
        W0g[k : k + 2, k : k + 2] += W0
        W2g[k : k + 2, k : k + 2] += W2
    full = (
        np.kron(W0g, Ag) + np.kron(W2g, Mg) + theta * np.kron(W0g, Mg)
    )
    full[:nv, :nv] += mu * s_val**2 * Mg
    np.testing.assert_allclose(system.matrix.toarray(), full, atol=1e-13)


def test_constant_image_trace_reproduced():
    """With f constant the solved trace reproduces the constant up to the
    tiny theta leakage."""
    from fracvar.solve import dense_solve, extract_trace

    tri = uniform_tri_mesh(3)
    prism = PrismMesh(tri=tri, interval=graded_interval_mesh(6, 3.0, 2.0))
    field = ExponentField(mesh=tri, values=np.full(tri.num_triangles, 0.5))
    c = 0.62
    f = ImageGrid.from_array(np.full((16, 16), c))
    system = assemble_system(
        prism, field, AssemblyParams(theta=1e-10, mu=100.0), f
    )
    sol = dense_solve(system)
    trace = extract_trace(sol, prism)
    assert np.abs(trace - c).max() < 5e-3


def test_load_quadrature_degree_five_monomials():
    """The 7-point rule integrates mu s^2 f phi_i exactly for f of total
    degree <= 4 (phi is degree 1); check three reference monomials."""
    import math as _math

    ref = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])

    def exact_moment(p, q):
        # integral of x^p y^q over the reference triangle
        return _math.factorial(p) * _math.factorial(q) / _math.factorial(p + q + 2)

    pts = TRI_QUAD_POINTS @ ref
    for p, q in [(2, 3), (4, 0), (0, 5)]:
        approx = 0.5 * np.sum(TRI_QUAD_WEIGHTS * pts[:, 0] ** p * pts[:, 1] ** q)
        assert approx == pytest.approx(exact_moment(p, q), rel=1e-13)


def test_write_matrix_market(tmp_path):
    _, _, _, system, _, _, _ = _tiny_system()
    path = tmp_path / "mat.mtx"
    write_matrix_market(system, path)
    text = path.read_text()
    assert text.startswith("%%MatrixMarket")
