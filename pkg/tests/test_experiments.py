import math

import numpy as np
import pytest

from binreg.model import ModelParams, generate_instance
from binreg.experiments import (
    ExperimentConfig,
    MomentValidationSizes,
    aggregate_sweep,
    derive_trial_seed,
    run_all_or_nothing_sweep,
    run_gamma_validation,
    run_moment_validation,
    run_ogp_probe,
    write_gammaval_csv,
    write_ogp_csv,
    write_sweep_csv,
)
from binreg.solver import BudgetExceededError, overlap_profile, support_objective

DESK = ModelParams(p=60, k=4, n=15, sigma2=1.0, seed=0)
SMALL = ModelParams(p=16, k=3, n=8, sigma2=1.0, seed=0)


def small_config(**kw):
    defaults = dict(params=SMALL, n_grid=(6, 10), trials=4)
    defaults.update(kw)
    return ExperimentConfig(**defaults)


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(trials=0).validate()
    with pytest.raises(ValueError):
        small_config(n_grid=()).validate()
    with pytest.raises(ValueError):
        small_config(n_grid=(0, 5)).validate()
    with pytest.raises(BudgetExceededError):
        small_config(budget=10).validate()


def test_trial_seeds_are_stable_and_distinct():
    seeds = {derive_trial_seed(0, n, t) for n in (6, 10) for t in range(50)}
    assert len(seeds) == 100
    assert derive_trial_seed(0, 6, 3) == derive_trial_seed(0, 6, 3)


def test_sweep_records_and_aggregates():
    cfg = small_config()
    records = run_all_or_nothing_sweep(cfg)
    assert len(records) == 8
    assert [r.n for r in records] == [6, 6, 6, 6, 10, 10, 10, 10]
    for rec in records:
        assert 0.0 <= rec.overlap_fraction <= 1.0
        assert rec.objective >= 0.0
        assert rec.overlap_ell == round(rec.overlap_fraction * SMALL.k)
        assert rec.supports_evaluated == math.comb(16, 3)
        assert not rec.error
    aggs = aggregate_sweep(records, cfg)
    assert [a["n"] for a in aggs] == [6, 10]
    mean = sum(r.overlap_fraction for r in records[:4]) / 4
    assert aggs[0]["mean_overlap_fraction"] == pytest.approx(mean, rel=1e-15)


def test_sweep_reports_desk_scale_threshold():
    cfg = ExperimentConfig(params=DESK, n_grid=(8,), trials=1)
    aggs = aggregate_sweep(run_all_or_nothing_sweep(cfg), cfg)
    assert aggs[0]["n_star"] == pytest.approx(14.9073, abs=2e-3)


def test_sweep_csv_identical_across_parallelism(tmp_path):
    out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
    cfg_serial = small_config(parallelism=1)
    cfg_parallel = small_config(parallelism=3)
    rec_a = run_all_or_nothing_sweep(cfg_serial)
    rec_b = run_all_or_nothing_sweep(cfg_parallel)
    paths_a = write_sweep_csv(rec_a, aggregate_sweep(rec_a, cfg_serial), out_a)
    paths_b = write_sweep_csv(rec_b, aggregate_sweep(rec_b, cfg_parallel), out_b)
    for pa, pb in zip(paths_a, paths_b):
        assert open(pa, "rb").read() == open(pb, "rb").read()


def test_gammaval_csv_identical_across_parallelism(tmp_path):
    cfg = small_config(n_grid=(8,), trials=3)
    rec_a = run_gamma_validation(cfg)
    rec_b = run_gamma_validation(small_config(n_grid=(8,), trials=3, parallelism=2))
    pa = write_gammaval_csv(rec_a, str(tmp_path / "a"))[0]
    pb = write_gammaval_csv(rec_b, str(tmp_path / "b"))[0]
    assert open(pa, "rb").read() == open(pb, "rb").read()


def test_gammaval_record_consistency():
    cfg = small_config(n_grid=(8,), trials=3)
    for rec in run_gamma_validation(cfg):
        assert rec.phi2 == min(rec.min_objectives)
        assert len(rec.min_objectives) == SMALL.k + 1
        # ell = 0 minimum is exactly the planted-support objective
        params = ModelParams(p=SMALL.p, k=SMALL.k, n=rec.n, sigma2=SMALL.sigma2, seed=rec.seed)
        inst = generate_instance(params)
        assert rec.min_objectives[0] == support_objective(inst, inst.planted_support)
        assert rec.min_objectives[0] == pytest.approx(rec.noise_objective, rel=1e-10)
        assert rec.count_at_k >= 0
        assert (rec.count_at_k > 1) == rec.count_at_k_exceeds_one


def test_ogp_records_at_desk_scale(tmp_path):
    cfg = ExperimentConfig(params=DESK, n_grid=(15,), trials=3)
    records = run_ogp_probe(cfg)
    for rec in records:
        assert not rec.window_vacuous  # n = 15 > n_star: the (3/4, 4/5) window
        assert rec.zeta1 == pytest.approx(0.75)
        assert rec.zeta2 == pytest.approx(0.80)
        assert not rec.hypotheses_ok  # desk scale is far from the guarantee regime
        assert rec.radius_r == pytest.approx(3.0 * max(1.0, 3.0 * math.exp(-4 * math.log(60) / 15)))
        occupied = rec.occupied_ells
        assert rec.ell0_in_level_set == (0 in occupied)
        assert rec.band_empty is not None
    write_ogp_csv(records, str(tmp_path))


def test_ogp_window_vacuous_branch_recorded():
    # n below n_star puts the construction on the vacuous low branch at desk scale
    cfg = ExperimentConfig(params=DESK, n_grid=(10,), trials=2)
    for rec in run_ogp_probe(cfg):
        assert rec.window_vacuous
        assert rec.band_empty is None
        assert math.isnan(rec.zeta1)


def test_ogp_counts_match_profile():
    cfg = ExperimentConfig(params=SMALL, n_grid=(8,), trials=2)
    for rec in run_ogp_probe(cfg):
        params = ModelParams(p=SMALL.p, k=SMALL.k, n=rec.n, sigma2=SMALL.sigma2, seed=rec.seed)
        prof = overlap_profile(generate_instance(params), rec.radius_r)
        assert rec.counts_below_r == tuple(r.count_below_r for r in prof.per_ell)


def test_momval_reduced_sizes_all_pass(tmp_path):
    params = ModelParams(p=40, k=3, n=12, sigma2=6.0, seed=0)
    cfg = ExperimentConfig(params=params, n_grid=(12,), trials=50)
    sizes = MomentValidationSizes(
        chi_samples=50_000,
        mc_draws=100_000,
        kernel_y_grid=(-2.0, 0.0, 2.0),
        kernel_rho_grid=(0.0, 0.5, 0.9),
        upsilon_draws=5,
    )
    checks = run_moment_validation(cfg, sizes)
    names = {c.name for c in checks}
    assert names == {
        "pure_noise_lower_bound",
        "chi_square_tail_bound",
        "log_p_lower_bound",
        "q_ratio_bound",
        "cond_first_moment_mc",
        "cond_second_moment_mc",
        "upsilon_at_least_one",
    }
    failed = [c for c in checks if not c.passed]
    assert not failed, failed


def test_momval_warns_on_low_power():
    params = ModelParams(p=20, k=2, n=6, sigma2=4.0, seed=0)
    cfg = ExperimentConfig(params=params, n_grid=(6,), trials=5)
    sizes = MomentValidationSizes(
        chi_samples=1000, mc_draws=1000, kernel_y_grid=(0.0,),
        kernel_rho_grid=(0.5,), upsilon_draws=2,
    )
    with pytest.warns(UserWarning, match="statistical power"):
        run_moment_validation(cfg, sizes)
