import numpy as np
import pytest

from fracvar.fixtures import desk_config, make_stripes_image
from fracvar.image import add_gaussian_noise
from fracvar.pipeline import run_denoise


def _small_config(**overrides):
    params = dict(
        sigma=0.08,
        seed=3,
        mesh_m=8,
        n_refine=2,
        K=6,
        nu=4.0,
        mu=4000.0,
        zeta=6.0,
        lam=4.0,
        beta=0.9,
        tau_rule="fixed",
        tau=2.0,
        max_iter_tv=800,
        max_iter_tv_star=800,
        zeta_grid=(2.0, 8.0),
    )
    params.update(overrides)
    return desk_config("stripes", **params)


@pytest.fixture(scope="module")
def small_run():
    truth = make_stripes_image(48)
    cfg = _small_config()
    noisy = add_gaussian_noise(truth, cfg.sigma, cfg.seed)
    return truth, noisy, cfg, run_denoise(noisy, cfg, truth=truth)


def test_run_produces_valid_outputs(small_run):
    truth, noisy, cfg, run = small_run
    assert run.recon.values.shape == truth.values.shape
    assert run.recon.values.min() >= 0.0 and run.recon.values.max() <= 1.0
    assert run.solver_report.converged
    assert run.s_values.shape == (run.mesh.num_triangles,)
    assert np.all(run.s_values > 0) and np.all(run.s_values < 1)
    assert run.tau == 2.0
    assert all(v >= 0 for v in run.timings_ms.values())
    assert set(run.timings_ms) >= {"select_s", "assemble", "solve", "rasterize"}


def test_run_scores_against_truth(small_run):
    truth, noisy, cfg, run = small_run
    assert set(run.scores) == {"noisy", "tv", "new"}
    assert run.zeta_star in cfg.zeta_grid
    assert run.zeta_scores is not None and len(run.zeta_scores) == 2
    # both methods clearly beat the noisy input
    assert run.scores["new"].psnr > run.scores["noisy"].psnr
    assert run.scores["tv"].psnr > run.scores["noisy"].psnr


def test_run_without_truth_skips_baseline():
    truth = make_stripes_image(48)
    cfg = _small_config()
    noisy = add_gaussian_noise(truth, cfg.sigma, cfg.seed)
    run = run_denoise(noisy, cfg)
    assert run.tv_baseline is None
    assert run.zeta_star is None
    assert run.scores == {}


def test_run_deterministic(small_run):
    truth, noisy, cfg, run = small_run
    again = run_denoise(noisy, cfg, truth=truth)
    assert np.array_equal(run.recon.values, again.recon.values)
    assert np.array_equal(run.s_values, again.s_values)
    assert run.solver_report.iterations == again.solver_report.iterations
    assert run.zeta_star == again.zeta_star


def test_run_near_clean_input_passes_through():
    truth = make_stripes_image(48)
    cfg = _small_config(sigma=0.0, mesh_m=12, n_refine=5, K=8, nu=3.0, mu=2e5)
    run = run_denoise(truth, cfg, truth=truth)
    assert run.scores["new"].psnr >= 40.0
