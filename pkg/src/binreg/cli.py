"""Command-line entry point binding generation, theory, solving, moments, and experiments.

Every subcommand resolves its configuration (defaults < config file < CLI
flags), runs, writes outputs atomically into the output directory, and
finishes with a run manifest recording the tool version, the resolved
configuration and its hash, the master seed, timestamps, and the list of
written files. Exit codes: 0 success, 1 validation error, 2 enumeration
budget refusal.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from ._io import atomic_write_text, write_csv_atomic
from .experiments import (
    ExperimentConfig,
    aggregate_sweep,
    run_all_or_nothing_sweep,
    run_gamma_validation,
    run_moment_validation,
    run_ogp_probe,
    write_gammaval_csv,
    write_momval_csv,
    write_ogp_csv,
    write_sweep_csv,
)
from .model import ModelParams, generate_instance, generate_pure_noise, load_instance, save_instance
from .moments import compute_moment_report, log_p_lower_bound, log_p_ty, p_ty, q_ratio_bound, q_tyrho_with_error
from .solver import DEFAULT_BUDGET, BudgetExceededError, NormMode, overlap_profile, solve_exact
from .theory import gamma_curve, n_star, thresholds

ENV_OUT_DIR = "BINREG_OUTDIR"


def _utcnow() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(out_dir: str, subcommand: str, config: dict, master_seed: int,
                   started_at: str, outputs: list[str]) -> str:
    manifest = {
        "tool_version": __version__,
        "subcommand": subcommand,
        "config": config,
        "config_sha256": config_hash(config),
        "master_seed": master_seed,
        "started_at": started_at,
        "finished_at": _utcnow(),
        "outputs": outputs,
    }
    path = os.path.join(out_dir, f"{subcommand}_manifest.json")
    atomic_write_text(path, json.dumps(manifest, indent=2) + "\n")
    return path


def _load_config_file(path: str) -> dict:
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _add_model_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--p", type=int, default=None, help="ambient dimension")
    sp.add_argument("--k", type=int, default=None, help="sparsity")
    sp.add_argument("--n", type=int, default=None, help="sample count")
    sp.add_argument("--sigma2", type=float, default=None, help="noise variance")
    sp.add_argument("--seed", type=int, default=None, help="64-bit master seed")


def _add_common_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--out", default=None,
                    help=f"output directory (default: ${ENV_OUT_DIR} or ./binreg-out)")
    sp.add_argument("--threads", type=int, default=None,
                    help="experiment trial workers (default: hardware parallelism); "
                         "enumeration partition width for solve (default: 1)")
    sp.add_argument("--budget", type=int, default=None,
                    help=f"enumeration budget (default: {DEFAULT_BUDGET})")
    sp.add_argument("--norm", choices=["l2", "linf"], default=None,
                    help="objective norm: n^(-1/2) L2 (default) or Linf")
    sp.add_argument("--d0", type=float, default=None, help="radius constant D0 (default: 3)")
    sp.add_argument("--trials", type=int, default=None, help="Monte Carlo trials (default: 100)")


def _resolve(args, file_cfg: dict, key: str, default):
    flag = getattr(args, key.replace("-", "_"), None)
    if flag is not None:
        return flag
    if key in file_cfg:
        return file_cfg[key]
    return default


def _out_dir(args, file_cfg: dict) -> str:
    return _resolve(args, file_cfg, "out", os.environ.get(ENV_OUT_DIR, "binreg-out"))


def _params_from(args, file_cfg: dict, *, p=60, k=4, n=15, sigma2=1.0, seed=0) -> ModelParams:
    return ModelParams(
        p=int(_resolve(args, file_cfg, "p", p)),
        k=int(_resolve(args, file_cfg, "k", k)),
        n=int(_resolve(args, file_cfg, "n", n)),
        sigma2=float(_resolve(args, file_cfg, "sigma2", sigma2)),
        seed=int(_resolve(args, file_cfg, "seed", seed)),
    )


def _norm_mode(args, file_cfg: dict) -> NormMode:
    return NormMode(_resolve(args, file_cfg, "norm", "l2"))


def _params_dict(params: ModelParams) -> dict:
    return {"p": params.p, "k": params.k, "n": params.n,
            "sigma2": params.sigma2, "seed": params.seed}


def _instance_from_args(args, file_cfg: dict, **defaults):
    if getattr(args, "instance", None):
        return load_instance(args.instance)
    params = _params_from(args, file_cfg, **defaults)
    if getattr(args, "pure_noise", False):
        return generate_pure_noise(params)
    return generate_instance(params)


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def _cmd_gen(args) -> int:
    started = _utcnow()
    params = _params_from(args, {})
    out_dir = _out_dir(args, {})
    instance = generate_pure_noise(params) if args.pure_noise else generate_instance(params)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, args.name)
    save_instance(instance, path)
    config = {**_params_dict(params), "pure_noise": bool(args.pure_noise), "name": args.name}
    manifest = write_manifest(out_dir, "gen", config, params.seed, started,
                              [path, path + ".json"])
    print(json.dumps({"instance": path, "sidecar": path + ".json", "manifest": manifest}))
    return 0


def _cmd_theory(args) -> int:
    started = _utcnow()
    out_dir = _out_dir(args, {})
    p = args.p if args.p is not None else 60
    k = args.k if args.k is not None else 4
    sigma2 = args.sigma2 if args.sigma2 is not None else 1.0
    carrier = ModelParams(p=p, k=k, n=max(args.n or 1, 1), sigma2=sigma2, seed=args.seed or 0)
    outputs = []
    os.makedirs(out_dir, exist_ok=True)
    if args.n is not None:
        report = thresholds(carrier, args.n).as_dict()
        curve = gamma_curve(carrier, points=args.points, n=args.n)
        curve_path = os.path.join(out_dir, "gamma_curve.csv")
        write_csv_atomic(
            curve_path,
            ["zeta", "gamma", "log_gamma"],
            [(z, g, math.log(g)) for z, g in zip(curve.zetas, curve.gammas)],
        )
        outputs.append(curve_path)
    else:
        log_p = math.log(p)
        report = {
            "n_inf1": sigma2 * log_p,
            "n_star": n_star(carrier),
            "n_lasso": (2 * k + sigma2) * log_p,
        }
    report_path = os.path.join(out_dir, "theory_report.json")
    atomic_write_text(report_path, json.dumps(report, indent=2) + "\n")
    outputs.append(report_path)
    config = {"p": p, "k": k, "n": args.n, "sigma2": sigma2, "points": args.points}
    write_manifest(out_dir, "theory", config, args.seed or 0, started, outputs)
    print(json.dumps(report, indent=2))
    return 0


def _cmd_solve(args) -> int:
    started = _utcnow()
    out_dir = _out_dir(args, {})
    instance = _instance_from_args(args, {})
    result = solve_exact(
        instance,
        prune=args.prune,
        budget=args.budget if args.budget is not None else DEFAULT_BUDGET,
        threads=args.threads if args.threads is not None else 1,
        norm_mode=_norm_mode(args, {}),
    )
    payload = {
        "support": list(result.support),
        "objective": result.objective,
        "overlap_ell": result.overlap_ell,
        "supports_evaluated": result.supports_evaluated,
        "wall_time": result.wall_time,
        "norm": _norm_mode(args, {}).value,
    }
    os.makedirs(out_dir, exist_ok=True)
    result_path = os.path.join(out_dir, "solve_result.json")
    atomic_write_text(result_path, json.dumps(payload, indent=2) + "\n")
    config = {**_params_dict(instance.params), "instance": args.instance,
              "prune": args.prune, "norm": _norm_mode(args, {}).value}
    write_manifest(out_dir, "solve", config, instance.params.seed, started, [result_path])
    print(json.dumps(payload))
    return 0


def _cmd_profile(args) -> int:
    started = _utcnow()
    out_dir = _out_dir(args, {})
    instance = _instance_from_args(args, {})
    radius = math.inf if args.r.lower() in ("inf", "infinity") else float(args.r)
    prof = overlap_profile(
        instance, radius, _norm_mode(args, {}),
        budget=args.budget if args.budget is not None else DEFAULT_BUDGET,
    )
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "profile.csv")
    write_csv_atomic(
        path,
        ["ell", "min_objective", "count_below_r", "theory_lb"],
        [(row.ell, row.min_objective, row.count_below_r, row.theory_lower_bound)
         for row in prof.per_ell],
    )
    config = {**_params_dict(instance.params), "instance": args.instance,
              "r": radius, "norm": prof.norm_mode.value}
    write_manifest(out_dir, "profile", config, instance.params.seed, started, [path])
    print(json.dumps({"profile": path, "radius_r": radius,
                      "counts": [row.count_below_r for row in prof.per_ell]}))
    return 0


def _cmd_moments(args) -> int:
    started = _utcnow()
    out_dir = _out_dir(args, {})
    if args.instance:
        instance = load_instance(args.instance)
        params, y = instance.params, instance.response
    else:
        if args.y is None:
            raise ValueError("moments needs --instance FILE or an inline --y vector")
        y = np.array([float(v) for v in args.y.split(",")], dtype=float)
        params = _params_from(args, {}, n=max(len(y), 1))
    report = compute_moment_report(y, params, args.t)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "moment_report.json")
    atomic_write_text(path, json.dumps(report.as_dict(), indent=2) + "\n")
    config = {**_params_dict(params), "t": args.t, "instance": args.instance,
              "inline_y": args.y is not None}
    write_manifest(out_dir, "moments", config, params.seed, started, [path])
    print(json.dumps(report.as_dict()))
    return 0


def _parse_grid(text: str, cast=float) -> tuple:
    return tuple(cast(v) for v in text.split(",") if v != "")


def _cmd_kernels(args) -> int:
    started = _utcnow()
    out_dir = _out_dir(args, {})
    t_grid = _parse_grid(args.t_grid)
    y_grid = _parse_grid(args.y_grid)
    rho_grid = _parse_grid(args.rho_grid)
    rows = []
    for t in t_grid:
        for y in y_grid:
            p_val = p_ty(t, y)
            for rho in rho_grid:
                q, err = q_tyrho_with_error(t, y, rho)
                bound = q_ratio_bound(y, rho) if rho < 1 else math.inf
                rows.append((t, y, rho, p_val, q, err, q / (p_val * p_val), bound,
                             log_p_ty(t, y), log_p_lower_bound(t, y)))
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "kernels.csv")
    write_csv_atomic(
        path,
        ["t", "y", "rho", "p_ty", "q_tyrho", "quad_error", "q_over_p2",
         "ratio_bound", "log_p_ty", "log_p_floor"],
        rows,
    )
    config = {"t_grid": list(t_grid), "y_grid": list(y_grid), "rho_grid": list(rho_grid)}
    write_manifest(out_dir, "kernels", config, 0, started, [path])
    print(json.dumps({"kernels": path, "rows": len(rows)}))
    return 0


def _experiment_config(args, *, default_params: dict, default_n_grid=None) -> tuple[ExperimentConfig, dict]:
    file_cfg = _load_config_file(args.config) if args.config else {}
    params = _params_from(args, file_cfg, **default_params)
    n_grid = _resolve(args, file_cfg, "n_grid", None)
    if isinstance(n_grid, str):
        n_grid = _parse_grid(n_grid, int)
    if n_grid is None:
        n_grid = default_n_grid(params) if default_n_grid else (params.n,)
    config = ExperimentConfig(
        params=params,
        n_grid=tuple(int(v) for v in n_grid),
        trials=int(_resolve(args, file_cfg, "trials", 100)),
        d0=float(_resolve(args, file_cfg, "d0", 3.0)),
        epsilon=float(_resolve(args, file_cfg, "epsilon", 0.1)),
        norm_mode=_norm_mode(args, file_cfg),
        out_dir=_out_dir(args, file_cfg),
        parallelism=int(_resolve(args, file_cfg, "threads", os.cpu_count() or 1)),
        budget=int(_resolve(args, file_cfg, "budget", DEFAULT_BUDGET)),
    )
    config.validate()
    as_dict = {
        **_params_dict(params),
        "n_grid": list(config.n_grid),
        "trials": config.trials,
        "d0": config.d0,
        "epsilon": config.epsilon,
        "norm": config.norm_mode.value,
        "parallelism": config.parallelism,
        "budget": config.budget,
    }
    return config, as_dict


def _default_sweep_grid(params: ModelParams) -> tuple[int, ...]:
    star = n_star(params)
    return (math.ceil(star / 2), 2 * math.ceil(star))


def _cmd_sweep(args) -> int:
    started = _utcnow()
    config, cfg_dict = _experiment_config(
        args, default_params=dict(p=60, k=4, n=15, sigma2=1.0, seed=0),
        default_n_grid=_default_sweep_grid,
    )
    records = run_all_or_nothing_sweep(config)
    aggregates = aggregate_sweep(records, config)
    os.makedirs(config.out_dir, exist_ok=True)
    outputs = write_sweep_csv(records, aggregates, config.out_dir)
    manifest = write_manifest(config.out_dir, "sweep", cfg_dict, config.params.seed,
                              started, outputs)
    print(f"n_star = {aggregates[0]['n_star']!r}")
    for agg in aggregates:
        print(f"n={agg['n']}: mean overlap fraction {agg['mean_overlap_fraction']:.4f} "
              f"+/- {agg['stderr_overlap_fraction']:.4f} ({agg['regime']})")
    print(f"manifest: {manifest}")
    return 0


def _cmd_gammaval(args) -> int:
    started = _utcnow()
    config, cfg_dict = _experiment_config(
        args, default_params=dict(p=60, k=4, n=15, sigma2=1.0, seed=0))
    records = run_gamma_validation(config)
    os.makedirs(config.out_dir, exist_ok=True)
    outputs = write_gammaval_csv(records, config.out_dir)
    manifest = write_manifest(config.out_dir, "gammaval", cfg_dict, config.params.seed,
                              started, outputs)
    ok = [r for r in records if not r.error]
    if ok:
        print(f"lower bound pass rate: {sum(r.lower_bound_ok for r in ok) / len(ok):.3f}")
        print(f"sandwich pass rate: "
              f"{sum(r.sandwich_lower_ok and r.sandwich_upper_ok for r in ok) / len(ok):.3f}")
        print(f"multiplicity (count at ell=k > 1) rate: "
              f"{sum(r.count_at_k_exceeds_one for r in ok) / len(ok):.3f}")
    print(f"manifest: {manifest}")
    return 0


def _cmd_ogp(args) -> int:
    started = _utcnow()
    config, cfg_dict = _experiment_config(
        args, default_params=dict(p=60, k=4, n=15, sigma2=1.0, seed=0))
    records = run_ogp_probe(config)
    os.makedirs(config.out_dir, exist_ok=True)
    outputs = write_ogp_csv(records, config.out_dir)
    manifest = write_manifest(config.out_dir, "ogp", cfg_dict, config.params.seed,
                              started, outputs)
    ok = [r for r in records if not r.error]
    if ok:
        print(f"ell=0 in sub-level set rate: {sum(r.ell0_in_level_set for r in ok) / len(ok):.3f}")
        print(f"count at ell=k >= 1 rate: {sum(r.count_at_k >= 1 for r in ok) / len(ok):.3f}")
        vac = sum(r.window_vacuous for r in ok)
        print(f"window vacuous in {vac}/{len(ok)} trials")
        informative = [r for r in ok if not r.window_vacuous]
        if informative:
            rate = sum(bool(r.band_empty) for r in informative) / len(informative)
            print(f"middle band empty rate (reported, not asserted): {rate:.3f}")
    print(f"manifest: {manifest}")
    return 0


def _cmd_momval(args) -> int:
    started = _utcnow()
    config, cfg_dict = _experiment_config(
        args, default_params=dict(p=40, k=3, n=12, sigma2=6.0, seed=0))
    checks = run_moment_validation(config)
    os.makedirs(config.out_dir, exist_ok=True)
    outputs = write_momval_csv(checks, config.out_dir)
    manifest = write_manifest(config.out_dir, "momval", cfg_dict, config.params.seed,
                              started, outputs)
    failed = [c for c in checks if not c.passed]
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"{status} {check.name} [{check.detail}] observed={check.observed!r} "
              f"{check.comparison} {check.threshold!r}")
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    print(f"manifest: {manifest}")
    return 0


# ---------------------------------------------------------------------------
# Parser wiring
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="binreg",
        description="Binary sparse regression: exact solvers, theory curves, Monte Carlo checks.",
    )
    parser.add_argument("--version", action="version", version=f"binreg {__version__}")
    sub = parser.add_subparsers(dest="cmd")

    sp = sub.add_parser("gen", help="generate an instance and write the binary container")
    _add_model_flags(sp)
    _add_common_flags(sp)
    sp.add_argument("--pure-noise", action="store_true", help="draw the pure-noise model")
    sp.add_argument("--name", default="instance.bin", help="output file name")
    sp.set_defaults(func=_cmd_gen)

    sp = sub.add_parser("theory", help="threshold report and limiting-curve CSV")
    _add_model_flags(sp)
    _add_common_flags(sp)
    sp.add_argument("--points", type=int, default=512, help="curve grid points")
    sp.set_defaults(func=_cmd_theory)

    sp = sub.add_parser("solve", help="exact k-sparse solve of an instance")
    _add_model_flags(sp)
    _add_common_flags(sp)
    sp.add_argument("--instance", default=None, help="instance container to load")
    sp.add_argument("--pure-noise", action="store_true",
                    help="generate a pure-noise instance when no file is given")
    sp.add_argument("--prune", action="store_true", help="enable triangle-inequality pruning")
    sp.set_defaults(func=_cmd_solve)

    sp = sub.add_parser("profile", help="per-overlap minima and sub-level counts")
    _add_model_flags(sp)
    _add_common_flags(sp)
    sp.add_argument("--instance", default=None, help="instance container to load")
    sp.add_argument("--r", required=True, help="radius (float or 'inf')")
    sp.set_defaults(func=_cmd_profile)

    sp = sub.add_parser("moments", help="conditional moment report for a response vector")
    _add_model_flags(sp)
    _add_common_flags(sp)
    sp.add_argument("--instance", default=None, help="instance container to load")
    sp.add_argument("--y", default=None, help="inline response vector, comma separated")
    sp.add_argument("--t", type=float, required=True, help="kernel half-width multiplier")
    sp.set_defaults(func=_cmd_moments)

    sp = sub.add_parser("kernels", help="CSV grid of the interval/rectangle kernels and bounds")
    _add_common_flags(sp)
    sp.add_argument("--t-grid", default="0.1,0.5,1.0")
    sp.add_argument("--y-grid", default="-3,-2,-1,0,1,2,3")
    sp.add_argument("--rho-grid", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,0.95")
    sp.set_defaults(func=_cmd_kernels)

    for name, func, helptext in (
        ("sweep", _cmd_sweep, "all-or-nothing overlap sweep over n"),
        ("gammaval", _cmd_gammaval, "limiting-curve bound validation"),
        ("ogp", _cmd_ogp, "overlap-gap structure probe"),
        ("momval", _cmd_momval, "moment formula and tail bound validation"),
    ):
        sp = sub.add_parser(name, help=helptext)
        _add_model_flags(sp)
        _add_common_flags(sp)
        sp.add_argument("--config", default=None, help="TOML or JSON config file")
        sp.add_argument("--n-grid", dest="n_grid", default=None,
                        help="comma-separated sample sizes")
        sp.add_argument("--epsilon", type=float, default=None,
                        help="slack in the upper sandwich bound (default: 0.1)")
        sp.set_defaults(func=func)

    return parser


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if not getattr(args, "cmd", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
