"""Cross-check of the cylinder FE solve against the constant-order
spectral solution.

For a constant exponent s the trace of the extension solve is, mode by
cosine mode, the filter zeta/(lambda_k^s + zeta) with lambda_k = (k pi)^2
and zeta = mu s^2 / d_s. Solving with the single-mode input cos(pi x1)
therefore gives a closed-form target to compare the FE trace against.
"""

from __future__ import annotations

import numpy as np

from .analysis import conormal_constant
from .assemble import AssemblyParams, assemble_system
from .exponent import ExponentField
from .image import ImageGrid
from .mesh import PrismMesh, graded_interval_mesh, uniform_tri_mesh
from .solve import extract_trace, pcg, vertical_line_preconditioner


def fe_vs_oracle_error(
    s: float,
    mu: float | None = None,
    m: int = 16,
    K: int = 40,
    tau: float = 10.0,
    theta: float = 1e-10,
    pixels: int = 256,
    pcg_tol: float = 1e-10,
) -> float:
    """Relative nodal L2 error of the FE trace against the spectral trace
    for input f(x) = cos(pi x1) at constant order s.

    mu defaults to the value giving zeta = mu s^2 / d_s = 10, which keeps
    the spectral filter well away from both the identity and zero limits.
    """
    d_s = conormal_constant(s)
    if mu is None:
        mu = 10.0 * d_s / (s * s)
    zeta = mu * s * s / d_s

    xs = (np.arange(pixels) + 0.5) / pixels
    f = ImageGrid.from_array(np.tile(np.cos(np.pi * xs), (pixels, 1)))

    mesh = uniform_tri_mesh(m)
    field = ExponentField(mesh=mesh, values=np.full(mesh.num_triangles, s))
    gamma = 1.1 / s
    prism = PrismMesh(tri=mesh, interval=graded_interval_mesh(K, gamma, tau))
    system = assemble_system(prism, field, AssemblyParams(theta=theta, mu=mu), f)
    precond = vertical_line_preconditioner(system, prism)
    solution, report = pcg(system, precond, tol=pcg_tol, max_iter=4000)
    if not report.converged:
        raise RuntimeError("PCG failed to converge in the oracle cross-check")
    trace = extract_trace(solution, prism)

    gain = zeta / (np.pi ** (2.0 * s) + zeta)
    target = gain * np.cos(np.pi * mesh.vertices[:, 0])
    return float(np.linalg.norm(trace - target) / np.linalg.norm(target))
