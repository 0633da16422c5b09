"""End-to-end denoising run: exponent selection, cylinder solve, trace
rasterization and scoring."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .assemble import AssemblyParams, assemble_system
from .exponent import SelectParams, SelectResult, select_s
from .fixtures import FIXTURE_VERSION, ExperimentConfig
from .image import ImageGrid
from .mesh import PrismMesh, TriMesh, graded_interval_mesh, uniform_tri_mesh
from .metrics import ScorePair, score
from .solve import (
    SolveReport,
    extract_trace,
    pcg,
    rasterize_trace,
    vertical_line_preconditioner,
)
from .tv import TvConfig, ZetaScore, optimize_zeta


@dataclass
class DenoiseRun:
    config: ExperimentConfig
    noisy: ImageGrid
    u_tv: ImageGrid
    recon: ImageGrid
    mesh: TriMesh
    s_values: np.ndarray
    solver_report: SolveReport
    tau: float
    timings_ms: dict[str, float] = field(default_factory=dict)
    # populated when ground truth is available
    tv_baseline: ImageGrid | None = None
    zeta_star: float | None = None
    zeta_scores: list[ZetaScore] | None = None
    scores: dict[str, ScorePair] = field(default_factory=dict)
    fixture_version: str = FIXTURE_VERSION


def run_denoise(
    noisy: ImageGrid,
    config: ExperimentConfig,
    truth: ImageGrid | None = None,
    mesh0: TriMesh | None = None,
) -> DenoiseRun:
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    if mesh0 is None:
        mesh0 = uniform_tri_mesh(config.mesh_m)
    sel: SelectResult = select_s(
        noisy,
        SelectParams(
            zeta=config.zeta,
            tol_tv=config.tol_tv,
            max_iter_tv=config.max_iter_tv,
            n_refine=config.n_refine,
            lam=config.lam,
            beta=config.beta,
            nu=config.nu,
        ),
        mesh0,
    )
    timings["select_s"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    tau = config.resolve_tau(sel.mesh.num_triangles)
    interval = graded_interval_mesh(config.K, config.gamma, tau)
    prism = PrismMesh(tri=sel.mesh, interval=interval)
    system = assemble_system(
        prism,
        sel.exponents,
        AssemblyParams(theta=config.theta, mu=config.mu),
        noisy,
    )
    timings["assemble"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    precond = vertical_line_preconditioner(system, prism)
    solution, report = pcg(
        system, precond, tol=config.pcg_tol, max_iter=config.pcg_max_iter
    )
    timings["solve"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    trace = extract_trace(solution, prism)
    recon = rasterize_trace(trace, sel.mesh, noisy.width, noisy.height)
    timings["rasterize"] = (time.perf_counter() - t0) * 1e3

    run = DenoiseRun(
        config=config,
        noisy=noisy,
        u_tv=sel.tv_result.image,
        recon=recon,
        mesh=sel.mesh,
        s_values=sel.exponents.values,
        solver_report=report,
        tau=tau,
        timings_ms=timings,
    )

    if truth is not None:
        t0 = time.perf_counter()
        zstar, u_star, zscores = optimize_zeta(
            noisy,
            truth,
            config.zeta_grid,
            TvConfig(
                zeta=1.0,
                tol=config.tol_tv_star,
                max_iter=config.max_iter_tv_star,
            ),
        )
        timings["tv_baseline"] = (time.perf_counter() - t0) * 1e3
        run.tv_baseline = u_star
        run.zeta_star = zstar
        run.zeta_scores = zscores
        run.scores = {
            "noisy": score(noisy, truth),
            "tv": score(u_star, truth),
            "new": score(recon, truth),
        }
    return run
