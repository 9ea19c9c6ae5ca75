"""Monte Carlo harnesses that turn asymptotic limit statements into desk-scale checks.

Each harness runs trials as independent work units with pre-assigned
derived seeds and gathers results into (n, trial) order before
aggregation, so the emitted CSV bytes do not depend on the parallelism
level. Volatile quantities (wall times) stay on the in-memory records and
out of the CSVs for the same reason.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from ._io import write_csv_atomic
from .model import ModelParams, generate_instance, generate_pure_noise
from .moments import (
    chi_square_tail_bound,
    compute_moment_report,
    cond_first_moment_log,
    cond_second_moment_log,
    log_p_lower_bound,
    log_p_ty,
    p_ty,
    q_ratio_bound,
    q_tyrho_with_error,
)
from .solver import (
    DEFAULT_BUDGET,
    BudgetExceededError,
    NormMode,
    overlap_profile,
    solve_exact,
    solve_pure_noise,
)
from .theory import (
    LOWER_BOUND_FACTOR,
    VacuousWindowError,
    gamma,
    ogp_hypotheses_hold,
    ogp_window,
    thresholds,
)


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    n_grid: tuple[int, ...]
    trials: int = 100
    d0: float = 3.0
    epsilon: float = 0.1
    norm_mode: NormMode = NormMode.L2_SCALED
    out_dir: str | None = None
    parallelism: int = 1
    budget: int = DEFAULT_BUDGET

    def validate(self) -> None:
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not self.n_grid:
            raise ValueError("n_grid must be non-empty")
        if any(n < 1 for n in self.n_grid):
            raise ValueError(f"every n in the grid must be >= 1, got {self.n_grid}")
        if self.d0 <= 1:
            raise ValueError(f"D0 must exceed 1, got {self.d0}")
        if self.parallelism < 1:
            raise ValueError(f"parallelism must be >= 1, got {self.parallelism}")
        required = math.comb(self.params.p, self.params.k)
        if required > self.budget:
            raise BudgetExceededError(required, self.budget, f"C({self.params.p},{self.params.k})")


def derive_trial_seed(master_seed: int, n: int, trial: int) -> int:
    """Deterministic per-trial seed; stable under any execution order."""
    ss = SeedSequence(entropy=master_seed, spawn_key=(int(n), int(trial)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _run_units(worker, args_list, parallelism: int) -> list:
    if parallelism <= 1 or len(args_list) <= 1:
        return [worker(a) for a in args_list]
    workers = min(parallelism, len(args_list))
    chunk = max(1, len(args_list) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, args_list, chunksize=chunk))


# ---------------------------------------------------------------------------
# All-or-nothing sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentRecord:
    n: int
    trial: int
    seed: int
    overlap_ell: int | None
    overlap_fraction: float
    objective: float
    regime: str
    supports_evaluated: int
    wall_time: float
    error: str = ""


def _sweep_trial(args) -> ExperimentRecord:
    p, k, sigma2, n, trial, seed, budget, regime = args
    params = ModelParams(p=p, k=k, n=n, sigma2=sigma2, seed=seed)
    try:
        inst = generate_instance(params)
        res = solve_exact(inst, budget=budget)
    except BudgetExceededError as exc:
        return ExperimentRecord(n, trial, seed, None, math.nan, math.nan, regime, 0, 0.0, str(exc))
    return ExperimentRecord(
        n=n,
        trial=trial,
        seed=seed,
        overlap_ell=res.overlap_ell,
        overlap_fraction=res.overlap_ell / params.k,
        objective=res.objective,
        regime=regime,
        supports_evaluated=res.supports_evaluated,
        wall_time=res.wall_time,
    )


def run_all_or_nothing_sweep(config: ExperimentConfig) -> list[ExperimentRecord]:
    """Per (n, trial): draw a planted instance, solve exactly, record the overlap fraction."""
    config.validate()
    if config.params.sigma2 <= 0:
        raise ValueError("the sweep requires sigma2 > 0 (n_star is undefined otherwise)")
    base = config.params
    args = []
    for n in config.n_grid:
        regime = thresholds(base, n).regime.value
        for trial in range(config.trials):
            seed = derive_trial_seed(base.seed, n, trial)
            args.append((base.p, base.k, base.sigma2, n, trial, seed, config.budget, regime))
    return _run_units(_sweep_trial, args, config.parallelism)


def aggregate_sweep(records: list[ExperimentRecord], config: ExperimentConfig) -> list[dict]:
    """Mean and standard error of the overlap fraction per n (fixed summation order)."""
    rep = thresholds(config.params, config.n_grid[0])
    hyp_lhs = max(config.params.k, 2.0 * config.params.k / config.params.sigma2 + 1.0)
    hyp_c1 = hyp_lhs <= math.exp(math.sqrt(math.log(config.params.p)))
    out = []
    for n in config.n_grid:
        rows = [r for r in records if r.n == n and not r.error]
        fracs = [r.overlap_fraction for r in rows]
        count = len(fracs)
        mean = sum(fracs) / count if count else math.nan
        if count > 1:
            var = sum((f - mean) ** 2 for f in fracs) / (count - 1)
            stderr = math.sqrt(var / count)
        else:
            stderr = math.nan
        objs = [r.objective for r in rows]
        out.append(
            {
                "n": n,
                "trials": count,
                "mean_overlap_fraction": mean,
                "stderr_overlap_fraction": stderr,
                "mean_objective": sum(objs) / count if count else math.nan,
                "n_star": rep.n_star,
                "regime": thresholds(config.params, n).regime.value,
                "asymptotic_hypothesis_c1": hyp_c1,
            }
        )
    return out


def write_sweep_csv(records, aggregates, out_dir: str, prefix: str = "sweep") -> list[str]:
    rec_path = os.path.join(out_dir, f"{prefix}_records.csv")
    agg_path = os.path.join(out_dir, f"{prefix}_aggregate.csv")
    write_csv_atomic(
        rec_path,
        ["n", "trial", "seed", "overlap_ell", "overlap_fraction", "objective",
         "regime", "supports_evaluated", "error"],
        [
            (r.n, r.trial, r.seed, r.overlap_ell, r.overlap_fraction, r.objective,
             r.regime, r.supports_evaluated, r.error)
            for r in records
        ],
    )
    header = list(aggregates[0].keys()) if aggregates else []
    write_csv_atomic(agg_path, header, [tuple(a[h] for h in header) for a in aggregates])
    return [rec_path, agg_path]


# ---------------------------------------------------------------------------
# Curve validation (lower bound, multiplicity, sandwich)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GammaValidationRecord:
    n: int
    trial: int
    seed: int
    radius_r: float
    phi2: float
    noise_objective: float          # n^{-1/2} ||W||_2
    lower_bound_ok: bool            # per-ell minima >= exp(-3/2) gamma(ell/k), all ell
    count_at_k: int
    count_at_k_exceeds_one: bool
    sandwich_lower_ok: bool
    sandwich_upper_ok: bool
    min_objectives: tuple[float, ...]
    counts_below_r: tuple[int, ...]
    theory_lower_bounds: tuple[float, ...]
    wall_time: float
    error: str = ""


def _gammaval_trial(args) -> GammaValidationRecord:
    p, k, sigma2, n, trial, seed, d0, eps, budget = args
    params = ModelParams(p=p, k=k, n=n, sigma2=sigma2, seed=seed)
    g0, g1 = gamma(0.0, params), gamma(1.0, params)
    r = d0 * g1
    try:
        inst = generate_instance(params)
        prof = overlap_profile(inst, r, NormMode.L2_SCALED, budget=budget)
    except BudgetExceededError as exc:
        return GammaValidationRecord(n, trial, seed, r, math.nan, math.nan, False, 0, False,
                                     False, False, (), (), (), 0.0, str(exc))
    mins = tuple(row.min_objective for row in prof.per_ell)
    counts = tuple(row.count_below_r for row in prof.per_ell)
    lbs = tuple(row.theory_lower_bound for row in prof.per_ell)
    phi2 = min(mins)
    noise_obj = float(np.linalg.norm(inst.noise)) / math.sqrt(n)
    lower = LOWER_BOUND_FACTOR * min(g0, g1)
    upper = min((1.0 + eps) * math.sqrt(sigma2), d0 * g1)
    return GammaValidationRecord(
        n=n,
        trial=trial,
        seed=seed,
        radius_r=r,
        phi2=phi2,
        noise_objective=noise_obj,
        lower_bound_ok=all(m >= lb for m, lb in zip(mins, lbs)),
        count_at_k=counts[-1],
        count_at_k_exceeds_one=counts[-1] > 1,
        sandwich_lower_ok=phi2 >= lower,
        sandwich_upper_ok=phi2 <= upper,
        min_objectives=mins,
        counts_below_r=counts,
        theory_lower_bounds=lbs,
        wall_time=prof.wall_time,
    )


def run_gamma_validation(config: ExperimentConfig) -> list[GammaValidationRecord]:
    """Per instance: overlap profile at radius D0*gamma(1) plus the three curve checks."""
    config.validate()
    if config.params.sigma2 <= 0:
        raise ValueError("gamma validation requires sigma2 > 0")
    base = config.params
    args = [
        (base.p, base.k, base.sigma2, n, trial, derive_trial_seed(base.seed, n, trial),
         config.d0, config.epsilon, config.budget)
        for n in config.n_grid
        for trial in range(config.trials)
    ]
    return _run_units(_gammaval_trial, args, config.parallelism)


def write_gammaval_csv(records, out_dir: str, prefix: str = "gammaval") -> list[str]:
    path = os.path.join(out_dir, f"{prefix}_records.csv")
    write_csv_atomic(
        path,
        ["n", "trial", "seed", "radius_r", "phi2", "noise_objective", "lower_bound_ok",
         "count_at_k", "count_at_k_exceeds_one", "sandwich_lower_ok", "sandwich_upper_ok",
         "min_objectives", "counts_below_r", "theory_lower_bounds", "error"],
        [
            (r.n, r.trial, r.seed, r.radius_r, r.phi2, r.noise_objective, r.lower_bound_ok,
             r.count_at_k, r.count_at_k_exceeds_one, r.sandwich_lower_ok, r.sandwich_upper_ok,
             r.min_objectives, r.counts_below_r, r.theory_lower_bounds, r.error)
            for r in records
        ],
    )
    return [path]


# ---------------------------------------------------------------------------
# Overlap-gap probe
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OgpProbeRecord:
    n: int
    trial: int
    seed: int
    radius_r: float
    zeta1: float
    zeta2: float
    window_vacuous: bool
    hypotheses_ok: bool
    occupied_ells: tuple[int, ...]      # L = {ell : count_below_r(ell) > 0}
    ell0_in_level_set: bool
    noise_below_r: bool
    count_at_k: int
    band_empty: bool | None             # no occupied ell/k inside (zeta1, zeta2); None when vacuous
    splits_into_two_blocks: bool
    min_objectives: tuple[float, ...]
    counts_below_r: tuple[int, ...]
    wall_time: float
    error: str = ""


def _ogp_trial(args) -> OgpProbeRecord:
    p, k, sigma2, n, trial, seed, d0, norm_value, budget = args
    params = ModelParams(p=p, k=k, n=n, sigma2=sigma2, seed=seed)
    norm_mode = NormMode(norm_value)
    r_k = d0 * max(gamma(0.0, params), gamma(1.0, params))
    try:
        window = ogp_window(params, D0=d0)
        zeta1, zeta2, vacuous = window.zeta1, window.zeta2, False
    except VacuousWindowError:
        zeta1, zeta2, vacuous = math.nan, math.nan, True
    hyp = ogp_hypotheses_hold(params, D0=d0)
    try:
        inst = generate_instance(params)
        prof = overlap_profile(inst, r_k, norm_mode, budget=budget)
    except BudgetExceededError as exc:
        return OgpProbeRecord(n, trial, seed, r_k, zeta1, zeta2, vacuous, hyp, (), False,
                              False, 0, None, False, (), (), 0.0, str(exc))
    counts = tuple(row.count_below_r for row in prof.per_ell)
    mins = tuple(row.min_objective for row in prof.per_ell)
    occupied = tuple(ell for ell, c in enumerate(counts) if c > 0)
    noise_obj = float(np.linalg.norm(inst.noise)) / math.sqrt(n)
    if vacuous:
        band_empty = None
    else:
        band_empty = not any(zeta1 < ell / k < zeta2 for ell in occupied)
    splits = bool(occupied) and (occupied[-1] - occupied[0] + 1 != len(occupied))
    return OgpProbeRecord(
        n=n,
        trial=trial,
        seed=seed,
        radius_r=r_k,
        zeta1=zeta1,
        zeta2=zeta2,
        window_vacuous=vacuous,
        hypotheses_ok=hyp,
        occupied_ells=occupied,
        ell0_in_level_set=0 in occupied,
        noise_below_r=noise_obj < r_k,
        count_at_k=counts[-1],
        band_empty=band_empty,
        splits_into_two_blocks=splits,
        min_objectives=mins,
        counts_below_r=counts,
        wall_time=prof.wall_time,
    )


def run_ogp_probe(config: ExperimentConfig) -> list[OgpProbeRecord]:
    """Empirical sub-level structure against the theory window at radius D0*max(gamma(0), gamma(1))."""
    config.validate()
    if config.params.sigma2 <= 0:
        raise ValueError("the OGP probe requires sigma2 > 0")
    base = config.params
    args = [
        (base.p, base.k, base.sigma2, n, trial, derive_trial_seed(base.seed, n, trial),
         config.d0, config.norm_mode.value, config.budget)
        for n in config.n_grid
        for trial in range(config.trials)
    ]
    return _run_units(_ogp_trial, args, config.parallelism)


def write_ogp_csv(records, out_dir: str, prefix: str = "ogp") -> list[str]:
    path = os.path.join(out_dir, f"{prefix}_records.csv")
    write_csv_atomic(
        path,
        ["n", "trial", "seed", "radius_r", "zeta1", "zeta2", "window_vacuous", "hypotheses_ok",
         "occupied_ells", "ell0_in_level_set", "noise_below_r", "count_at_k", "band_empty",
         "splits_into_two_blocks", "min_objectives", "counts_below_r", "error"],
        [
            (r.n, r.trial, r.seed, r.radius_r, r.zeta1, r.zeta2, r.window_vacuous,
             r.hypotheses_ok, r.occupied_ells, r.ell0_in_level_set, r.noise_below_r,
             r.count_at_k, r.band_empty, r.splits_into_two_blocks, r.min_objectives,
             r.counts_below_r, r.error)
            for r in records
        ],
    )
    return [path]


# ---------------------------------------------------------------------------
# Moment-formula validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentCheck:
    name: str
    detail: str
    observed: float
    threshold: float
    comparison: str   # "<=" or ">="
    passed: bool


@dataclass(frozen=True)
class MomentValidationSizes:
    """Grid and sample sizes for the moment checks; defaults match the acceptance runs."""

    chi_samples: int = 1_000_000
    chi_n_grid: tuple[int, ...] = (10, 20, 50)
    chi_t0_grid: tuple[float, ...] = (0.3, 0.5, 0.8)
    kernel_t_grid: tuple[float, ...] = (0.1, 0.5, 1.0)
    kernel_y_grid: tuple[float, ...] = tuple(float(v) for v in range(-3, 4))
    kernel_rho_grid: tuple[float, ...] = tuple(v / 10 for v in range(10)) + (0.95,)
    mc_draws: int = 1_000_000
    mc_batch: int = 100_000
    small_p: int = 6
    small_k: int = 2
    small_n_first: int = 3
    small_n_second: int = 2
    mc_t: float = 0.8
    upsilon_draws: int = 20
    pure_noise_pass_rate: float = 0.99


def mc_count_moments(y: np.ndarray, p: int, k: int, t: float, draws: int, seed: int,
                     batch: int = 100_000) -> tuple[float, float, float, float]:
    """Monte Carlo over designs of the count of supports with max-norm residual < t sqrt(k).

    Returns (mean, stderr) for the count and for its square. This is the
    independent oracle for the analytic conditional moment formulas.
    """
    supports = list(combinations(range(p), k))
    thr = t * math.sqrt(k)
    rng = Generator(Philox(SeedSequence(entropy=seed, spawn_key=(901,))))
    n = y.size
    s1 = s2 = s3 = s4 = 0.0
    done = 0
    while done < draws:
        b = min(batch, draws - done)
        X = rng.standard_normal((b, n, p))
        z = np.zeros(b, dtype=np.int64)
        for sup in supports:
            fit = X[:, :, sup].sum(axis=2)
            z += np.all(np.abs(y[None, :] - fit) < thr, axis=1)
        zf = z.astype(float)
        s1 += float(zf.sum())
        s2 += float((zf**2).sum())
        s3 += float((zf**3).sum())
        s4 += float((zf**4).sum())
        done += b
    m1 = s1 / draws
    m2 = s2 / draws
    var1 = max(m2 - m1 * m1, 0.0)
    var2 = max(s4 / draws - m2 * m2, 0.0)
    return m1, math.sqrt(var1 / draws), m2, math.sqrt(var2 / draws)


def run_moment_validation(
    config: ExperimentConfig,
    sizes: MomentValidationSizes = MomentValidationSizes(),
) -> list[MomentCheck]:
    """Pure-noise optimum bound, chi-square tail sweep, kernel inequality grid, and MC oracles."""
    config.validate()
    if config.trials < 30 or sizes.mc_draws < 100_000:
        warnings.warn("few trials/draws: statistical power of the moment checks is limited",
                      stacklevel=2)
    base = config.params
    checks: list[MomentCheck] = []

    # (1) pure-noise first-moment lower bound over seeded trials
    bound = (
        LOWER_BOUND_FACTOR
        * math.sqrt(base.k + base.sigma2)
        * math.exp(-base.k * math.log(base.p) / base.n)
    )
    hits = 0
    for trial in range(config.trials):
        seed = derive_trial_seed(base.seed, base.n, trial)
        inst = generate_pure_noise(replace(base, seed=seed))
        res = solve_pure_noise(inst, budget=config.budget)
        hits += res.objective >= bound
    rate = hits / config.trials
    checks.append(
        MomentCheck(
            name="pure_noise_lower_bound",
            detail=f"p={base.p} k={base.k} sigma2={base.sigma2} n={base.n} "
                   f"trials={config.trials} bound={bound!r}",
            observed=rate,
            threshold=sizes.pure_noise_pass_rate,
            comparison=">=",
            passed=rate >= sizes.pure_noise_pass_rate,
        )
    )

    # (2) chi-square lower-tail bound sweep
    for idx_n, n in enumerate(sizes.chi_n_grid):
        for idx_t, t0 in enumerate(sizes.chi_t0_grid):
            rng = Generator(Philox(SeedSequence(entropy=base.seed, spawn_key=(902, idx_n, idx_t))))
            samples = rng.chisquare(n, sizes.chi_samples)
            emp = float(np.mean(samples <= n * t0 * t0))
            se = math.sqrt(max(emp * (1.0 - emp), 0.0) / sizes.chi_samples)
            limit = chi_square_tail_bound(n, t0) + 3.0 * se
            checks.append(
                MomentCheck(
                    name="chi_square_tail_bound",
                    detail=f"n={n} t0={t0} samples={sizes.chi_samples}",
                    observed=emp,
                    threshold=limit,
                    comparison="<=",
                    passed=emp <= limit,
                )
            )

    # (3) kernel inequality grids
    for t in sizes.kernel_t_grid:
        for y in sizes.kernel_y_grid:
            lhs = log_p_ty(t, y)
            floor = log_p_lower_bound(t, y)
            checks.append(
                MomentCheck(
                    name="log_p_lower_bound",
                    detail=f"t={t} y={y}",
                    observed=lhs,
                    threshold=floor,
                    comparison=">=",
                    passed=lhs >= floor,
                )
            )
            for rho in sizes.kernel_rho_grid:
                q, err = q_tyrho_with_error(t, y, rho)
                ratio = q / p_ty(t, y) ** 2
                limit = q_ratio_bound(y, rho)
                ok = ratio <= limit and err < 1e-10
                checks.append(
                    MomentCheck(
                        name="q_ratio_bound",
                        detail=f"t={t} y={y} rho={rho} quad_err={err!r}",
                        observed=ratio,
                        threshold=limit,
                        comparison="<=",
                        passed=ok,
                    )
                )

    # (4) analytic conditional moments vs Monte Carlo over designs
    rng_y = Generator(Philox(SeedSequence(entropy=base.seed, spawn_key=(903,))))
    sp, sk, t = sizes.small_p, sizes.small_k, sizes.mc_t
    sigma_small = math.sqrt(2.0 * sk)
    for which, n_small in (("first", sizes.small_n_first), ("second", sizes.small_n_second)):
        y = sigma_small * rng_y.standard_normal(n_small)
        params_small = ModelParams(p=sp, k=sk, n=n_small, sigma2=sigma_small**2, seed=base.seed)
        m1, se1, m2, se2 = mc_count_moments(
            y, sp, sk, t, sizes.mc_draws, base.seed, batch=sizes.mc_batch
        )
        if which == "first":
            analytic = math.exp(cond_first_moment_log(y, params_small, t))
            observed, se = abs(analytic - m1) / max(se1, 1e-300), se1
        else:
            analytic = math.exp(cond_second_moment_log(y, params_small, t))
            observed, se = abs(analytic - m2) / max(se2, 1e-300), se2
        checks.append(
            MomentCheck(
                name=f"cond_{which}_moment_mc",
                detail=f"p={sp} k={sk} n={n_small} t={t} draws={sizes.mc_draws} "
                       f"analytic={analytic!r} se={se!r}",
                observed=observed,
                threshold=3.0,
                comparison="<=",
                passed=observed <= 3.0,
            )
        )

    # (5) the moment ratio never drops below 1
    rng_u = Generator(Philox(SeedSequence(entropy=base.seed, spawn_key=(904,))))
    min_upsilon = math.inf
    for _ in range(sizes.upsilon_draws):
        y = math.sqrt(2.0 * sk) * rng_u.standard_normal(4)
        t_draw = 0.3 + 0.9 * rng_u.random()
        rep = compute_moment_report(y, ModelParams(p=sp, k=sk, n=4, sigma2=1.0, seed=0), t_draw)
        min_upsilon = min(min_upsilon, rep.upsilon)
    checks.append(
        MomentCheck(
            name="upsilon_at_least_one",
            detail=f"draws={sizes.upsilon_draws} p={sp} k={sk}",
            observed=min_upsilon,
            threshold=1.0 - 1e-9,
            comparison=">=",
            passed=min_upsilon >= 1.0 - 1e-9,
        )
    )
    return checks


def write_momval_csv(checks, out_dir: str, prefix: str = "momval") -> list[str]:
    path = os.path.join(out_dir, f"{prefix}_checks.csv")
    write_csv_atomic(
        path,
        ["name", "detail", "observed", "threshold", "comparison", "passed"],
        [(c.name, c.detail, c.observed, c.threshold, c.comparison, c.passed) for c in checks],
    )
    return [path]
