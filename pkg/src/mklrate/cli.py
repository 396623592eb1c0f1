"""Command-line entry point for experiments, solves, and diagnostics.

Commands
--------
solve      one estimator fit at the smallest grid size; prints a solution JSON
sweep      full rate experiment; writes results.csv and summary.json
compare    paired homogeneous vs inhomogeneous sweeps
diagnose   incoherence and norm diagnostics on one generated data set
spectrum   empirical vs configured kernel eigenvalues

Exit codes: 0 success, 1 configuration/validation error (the message names
the offending field), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .diagnostics import build_report
from .harness import (
    ExperimentConfig,
    cell_seed,
    compare_profiles,
    run_sweep,
)
from .kernels import SpectralKernel, assemble_gram, empirical_spectrum
from .solver import solve, theory_plan
from .synthetic import build_truth, sample_data
from .diagnostics import lambda_star, mixed_norm
from ._version import __version__

REQUIRED_FIELDS = ("s", "q", "d", "M")


def _load_config(path: str, seed_override: int | None) -> ExperimentConfig:
    try:
        with open(path) as handle:
            payload = json.load(handle)
    except FileNotFoundError:
        raise ValueError(f"config_path: file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ValueError(f"config_path: invalid JSON in {path}: {exc}")
    if not isinstance(payload, dict):
        raise ValueError("config_path: top-level JSON value must be an object")
    for name in REQUIRED_FIELDS:
        if name not in payload:
            raise ValueError(f"{name}: required field missing from config")
    if seed_override is not None:
        payload["base_seed"] = seed_override
    return ExperimentConfig.from_dict(payload)


def _resolve_seed(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("MKLRATE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"MKLRATE_SEED: not an integer: {env!r}")
    return None


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _prepare_single(config: ExperimentConfig):
    n = config.n_grid[0]
    kernel = SpectralKernel.power_law(config.s, num_terms=config.num_terms)
    kernels = [kernel] * config.M
    truth = build_truth(
        config.M,
        config.d,
        config.q,
        config.s,
        config.profile,
        seed=config.base_seed,
        kernel=kernel,
        noise_bound=config.noise_bound,
    )
    sample = sample_data(
        truth,
        kernels,
        n,
        noise_kind=config.noise_kind,
        seed=cell_seed(config.base_seed, n, 0),
    )
    gram = assemble_gram(kernels, sample.inputs)
    return n, kernel, kernels, truth, sample, gram


def _cmd_solve(args) -> int:
    config = _load_config(args.config, _resolve_seed(args))
    n, _, kernels, truth, sample, gram = _prepare_single(config)
    lam_bar = lambda_star(config.d, n, config.s, config.q, mixed_norm(truth, 2))
    plan = theory_plan(
        n, config.M, config.s, lam_bar, t=config.confidence_t, scale=config.lambda_scale
    )
    solution = solve(sample.labels, gram, plan, tol=config.tol, max_sweeps=config.max_sweeps)
    payload = solution.to_dict(gram)
    text = json.dumps(payload, indent=2)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "solution.json")
        with open(path, "w") as handle:
            handle.write(text + "\n")
        _say(args, f"wrote {path}")
    else:
        print(text)
    _say(
        args,
        f"n={n} active={list(solution.active_estimate)} "
        f"kkt={solution.kkt_residual:.4g} sweeps={solution.sweeps_used}",
    )
    return 0


def _cmd_sweep(args) -> int:
    config = _load_config(args.config, _resolve_seed(args))
    out = args.out or "."
    report = run_sweep(config, jobs=args.jobs)
    os.makedirs(out, exist_ok=True)
    results_path = os.path.join(out, "results.csv")
    summary_path = os.path.join(out, "summary.json")
    report.write_csv(results_path)
    report.write_summary(summary_path)
    _say(args, f"wrote {results_path} and {summary_path}")
    if report.fitted_exponent is not None:
        _say(
            args,
            f"fitted exponent {report.fitted_exponent:.4g} "
            f"(se {report.exponent_se:.4g}) vs reference {report.reference_exponent:.4g}",
        )
    return 0


def _cmd_compare(args) -> int:
    config = _load_config(args.config, _resolve_seed(args))
    from dataclasses import replace

    pair = (
        replace(config, profile="homogeneous"),
        replace(config, profile="inhomogeneous"),
    )
    comparison = compare_profiles(*pair, jobs=args.jobs)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "comparison.json")
    with open(path, "w") as handle:
        json.dump(comparison.summary_dict(), handle, indent=2)
        handle.write("\n")
    _say(args, f"wrote {path}")
    for n, ratio in comparison.per_n_ratio.items():
        _say(args, f"n={n}: inhomogeneous/homogeneous error ratio {ratio:.4g}")
    _say(
        args,
        "reference ratios: "
        f"l2-ball {comparison.reference_ratio_l2ball:.4g}, "
        f"sup-ball {comparison.reference_ratio_linfball:.4g}",
    )
    return 0


def _cmd_diagnose(args) -> int:
    config = _load_config(args.config, _resolve_seed(args))
    _, _, _, truth, _, gram = _prepare_single(config)
    report = build_report(gram, truth, config.s, config.q)
    print(json.dumps(report.to_dict(), indent=2))
    _say(
        args,
        f"kappa_min={report.kappa_min:.4g} rho={report.rho:.4g} "
        f"incoherence_product={report.incoherence_product:.4g}",
    )
    return 0


def _cmd_spectrum(args) -> int:
    config = _load_config(args.config, _resolve_seed(args))
    _, kernel, _, _, _, gram = _prepare_single(config)
    spectrum = empirical_spectrum(gram.matrix(0))
    top = min(10, kernel.num_terms)
    print(f"{'k':>4} {'configured':>14} {'empirical':>14}")
    for k in range(top):
        print(f"{k + 1:>4} {kernel.eigenvalues[k]:>14.6g} {spectrum[k]:>14.6g}")
    return 0


COMMANDS = {
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "compare": _cmd_compare,
    "diagnose": _cmd_diagnose,
    "spectrum": _cmd_spectrum,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mklrate",
        description="Elastic-net multiple kernel learning experiments",
    )
    parser.add_argument("--version", action="version", version=f"mklrate {__version__}")
    sub = parser.add_subparsers(dest="command")
    for name, help_text in (
        ("solve", "run one estimator fit and print the solution"),
        ("sweep", "run a rate experiment and write results.csv + summary.json"),
        ("compare", "run paired profile sweeps"),
        ("diagnose", "print the diagnostics report for one generated data set"),
        ("spectrum", "print empirical vs configured eigenvalues"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="experiment config JSON")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument("--seed", type=int, default=None, help="base seed override")
        cmd.add_argument(
            "--jobs",
            type=int,
            default=os.cpu_count() or 1,
            help="parallel worker count for sweep cells",
        )
        cmd.add_argument("--quiet", action="store_true", help="suppress progress chatter")
    return parser


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; map to the validation exit code.
        return 0 if exc.code in (0, None) else 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())
