"""Sample-size sweeps that measure the empirical learning rate.

A sweep fixes one synthetic truth, then for every (sample size, replication)
cell draws data, assembles Gram matrices, derives a regularization plan, runs
the solver, and records the exact population excess risk.  The risk is
computed in coefficient space: with centered orthonormal features and
independent coordinates, the squared population error is exactly the sum of
squared coefficient differences, so no test-set noise enters the slope fit.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np

from .diagnostics import build_report, lambda_star, mixed_norm, rate_exponent
from .kernels import GramSet, SpectralKernel, assemble_gram
from .solver import MklSolution, SolverError, solve, theory_plan
from .synthetic import RegressionSample, TruthModel, build_truth, sample_data

LAMBDA_POLICIES = ("theory", "pilot")
TEST_POLICIES = ("exact", "monte_carlo")
PILOT_SCALE_GRID = tuple(2.0**k for k in range(-4, 5))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one sweep."""

    s: float
    q: float
    d: int
    M: int
    profile: str = "homogeneous"
    noise_bound: float = 0.1
    n_grid: tuple[int, ...] = (128, 256, 512, 1024, 2048, 4096)
    replications: int = 20
    lambda_policy: str = "theory"
    lambda_scale: float = 1.0
    lambda_bar_scale: float = 1.0
    confidence_t: float = 1.0
    base_seed: int = 0
    test_policy: str = "exact"
    n_test: int = 100_000
    num_terms: int = 128
    noise_kind: str = "uniform"
    tol: float = 1e-6
    max_sweeps: int = 500

    def __post_init__(self) -> None:
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s: must lie in (0, 1), got {self.s}")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"q: must lie in [0, 1], got {self.q}")
        if not 1 <= self.d <= self.M:
            raise ValueError(f"d: must satisfy 1 <= d <= M, got d={self.d}, M={self.M}")
        grid = tuple(int(n) for n in self.n_grid)
        if len(grid) < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError(f"n_grid: must be strictly increasing, got {self.n_grid}")
        object.__setattr__(self, "n_grid", grid)
        if self.replications < 1:
            raise ValueError(f"replications: must be at least 1, got {self.replications}")
        if self.lambda_policy not in LAMBDA_POLICIES:
            raise ValueError(
                f"lambda_policy: must be one of {LAMBDA_POLICIES}, got {self.lambda_policy!r}"
            )
        if self.test_policy not in TEST_POLICIES:
            raise ValueError(
                f"test_policy: must be one of {TEST_POLICIES}, got {self.test_policy!r}"
            )
        if self.lambda_scale <= 0.0:
            raise ValueError(f"lambda_scale: must be positive, got {self.lambda_scale}")
        if self.lambda_bar_scale <= 0.0:
            raise ValueError(
                f"lambda_bar_scale: must be positive, got {self.lambda_bar_scale}"
            )
        if self.confidence_t < 1.0:
            raise ValueError(f"confidence_t: must be at least 1, got {self.confidence_t}")
        if self.noise_bound < 0.0:
            raise ValueError(f"noise_bound: must be nonnegative, got {self.noise_bound}")

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["n_grid"] = list(self.n_grid)
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"{sorted(unknown)[0]}: unknown config field")
        kwargs = dict(payload)
        if "n_grid" in kwargs:
            kwargs["n_grid"] = tuple(int(n) for n in kwargs["n_grid"])
        return cls(**kwargs)


@dataclass(frozen=True)
class CellResult:
    n: int
    rep: int
    seed: int
    err_l2sq: float
    support_ok: bool
    beats_zero: bool
    sweeps: int
    converged: bool
    runtime_ms: float
    lambda_bar: float
    lambda1: float
    failed: bool = False
    error: str = ""


@dataclass(frozen=True)
class RateReport:
    config: ExperimentConfig
    rows: tuple[CellResult, ...]
    per_n_mean: dict
    fitted_exponent: float | None
    exponent_se: float | None
    reference_exponent: float
    secondary_terms: dict
    truncation_tail_bound: float
    diagnostics: dict | None = None

    def summary_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "fitted_exponent": self.fitted_exponent,
            "exponent_se": self.exponent_se,
            "reference_exponent": self.reference_exponent,
            "per_n_mean_error": {str(k): v for k, v in self.per_n_mean.items()},
            "secondary_term_d_logM_over_n": {
                str(k): v for k, v in self.secondary_terms.items()
            },
            "truncation_tail_bound": self.truncation_tail_bound,
            "cells_failed": sum(1 for r in self.rows if r.failed),
            "cells_total": len(self.rows),
            "cells_beating_zero": sum(1 for r in self.rows if r.beats_zero),
            "support_recovery_rate": (
                sum(1 for r in self.rows if r.support_ok and not r.failed)
                / max(1, sum(1 for r in self.rows if not r.failed))
            ),
            "diagnostics": self.diagnostics,
        }

    def write_csv(self, path: str) -> None:
        _atomic_write(path, _rows_to_csv(self))

    def write_summary(self, path: str) -> None:
        _atomic_write(path, json.dumps(self.summary_dict(), indent=2) + "\n")


CSV_COLUMNS = (
    "n",
    "rep",
    "seed",
    "s",
    "q",
    "d",
    "M",
    "profile",
    "lambda_bar",
    "lambda1",
    "err_l2sq",
    "support_ok",
    "sweeps",
    "runtime_ms",
)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _rows_to_csv(report: RateReport) -> str:
    cfg = report.config
    lines = [",".join(CSV_COLUMNS)]
    for row in report.rows:
        values = (
            row.n,
            row.rep,
            row.seed,
            cfg.s,
            cfg.q,
            cfg.d,
            cfg.M,
            cfg.profile,
            row.lambda_bar,
            row.lambda1,
            row.err_l2sq,
            row.support_ok,
            row.sweeps,
            row.runtime_ms,
        )
        lines.append(",".join(_fmt(v) for v in values))
    return "\n".join(lines) + "\n"


def _atomic_write(path: str, content: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cell_seed(base_seed: int, n: int, rep: int) -> int:
    """Deterministic per-cell seed derived from (base seed, n, replication)."""
    entropy = [int(base_seed) % 2**63, int(n) % 2**63, int(rep) % 2**32]
    ss = np.random.SeedSequence(entropy)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def exact_l2_error(
    solution: MklSolution,
    truth: TruthModel,
    kernels: Sequence[SpectralKernel],
    samples,
) -> float:
    """Exact squared population error of the fitted additive function.

    Expands each fitted component into basis coefficients
    ``mu_k * sum_i alpha_i phi_k(x_i)`` and sums squared coefficient
    differences against the truth; cross terms vanish because coordinates are
    independent and the basis is centered.
    """
    inputs = samples.inputs if isinstance(samples, RegressionSample) else np.asarray(samples)
    if len(kernels) != truth.num_kernels or solution.alpha.shape[0] != truth.num_kernels:
        raise ValueError("solution, truth, and kernels must agree on the kernel count")
    total = 0.0
    for m in range(truth.num_kernels):
        kern = kernels[m]
        if kern.num_terms < truth.num_terms:
            raise ValueError(f"kernel {m} truncates below the truth's expansion")
        phi = kern.feature_matrix(inputs[:, m])
        fitted = kern.eigenvalues * (phi.T @ solution.alpha[m])
        delta = fitted[: truth.num_terms] - truth.f_coefficients[m]
        total += float(delta @ delta)
        tail = fitted[truth.num_terms :]
        total += float(tail @ tail)
    return total


def monte_carlo_l2_error(
    solution: MklSolution,
    truth: TruthModel,
    kernels: Sequence[SpectralKernel],
    samples,
    n_test: int,
    seed: int,
) -> tuple[float, float]:
    """Monte Carlo estimate of the squared population error and its std error."""
    inputs = samples.inputs if isinstance(samples, RegressionSample) else np.asarray(samples)
    rng = np.random.default_rng(seed)
    fresh = rng.random((n_test, truth.num_kernels))
    delta = np.zeros(n_test)
    for m in range(truth.num_kernels):
        kern = kernels[m]
        phi_new = kern.feature_matrix(fresh[:, m])
        coeffs = kern.eigenvalues * (kern.feature_matrix(inputs[:, m]).T @ solution.alpha[m])
        coeffs = coeffs.copy()
        coeffs[: truth.num_terms] -= truth.f_coefficients[m]
        delta += phi_new @ coeffs
    sq = delta**2
    return float(np.mean(sq)), float(np.std(sq, ddof=1) / math.sqrt(n_test))


def _plan_for_cell(config: ExperimentConfig, n: int, R2: float, scale: float):
    lam_bar = config.lambda_bar_scale * lambda_star(config.d, n, config.s, config.q, R2)
    return theory_plan(n, config.M, config.s, lam_bar, t=config.confidence_t, scale=scale)


def _run_cell(
    config: ExperimentConfig,
    truth: TruthModel,
    kernels: list[SpectralKernel],
    n: int,
    rep: int,
    scale: float,
    R2: float,
    zero_error: float,
) -> CellResult:
    seed = cell_seed(config.base_seed, n, rep)
    start = time.perf_counter()
    try:
        sample = sample_data(truth, kernels, n, noise_kind=config.noise_kind, seed=seed)
        gram = assemble_gram(kernels, sample.inputs)
        plan = _plan_for_cell(config, n, R2, scale)
        solution = solve(
            sample.labels, gram, plan, tol=config.tol, max_sweeps=config.max_sweeps
        )
        if config.test_policy == "exact":
            err = exact_l2_error(solution, truth, kernels, sample)
        else:
            err, _ = monte_carlo_l2_error(
                solution, truth, kernels, sample, config.n_test, seed + 1
            )
        active = set(solution.active_estimate)
        support_ok = set(truth.active_set).issubset(active) and not (
            active - set(truth.active_set)
        )
        runtime_ms = (time.perf_counter() - start) * 1e3
        return CellResult(
            n=n,
            rep=rep,
            seed=seed,
            err_l2sq=err,
            support_ok=support_ok,
            beats_zero=err <= zero_error,
            sweeps=solution.sweeps_used,
            converged=solution.converged,
            runtime_ms=runtime_ms,
            lambda_bar=plan.lam2,
            lambda1=plan.lam1,
        )
    except (SolverError, np.linalg.LinAlgError) as exc:
        runtime_ms = (time.perf_counter() - start) * 1e3
        return CellResult(
            n=n,
            rep=rep,
            seed=seed,
            err_l2sq=math.nan,
            support_ok=False,
            beats_zero=False,
            sweeps=0,
            converged=False,
            runtime_ms=runtime_ms,
            lambda_bar=math.nan,
            lambda1=math.nan,
            failed=True,
            error=str(exc),
        )


def _pilot_scale(
    config: ExperimentConfig,
    truth: TruthModel,
    kernels: list[SpectralKernel],
    R2: float,
) -> float:
    """Pick the group-penalty scale once on a held-out split at the smallest n."""
    n = config.n_grid[0]
    seed = cell_seed(config.base_seed, n, -1)
    sample = sample_data(truth, kernels, n, noise_kind=config.noise_kind, seed=seed)
    n_train = max(2, int(0.8 * n))
    train_x, val_x = sample.inputs[:n_train], sample.inputs[n_train:]
    train_y, val_y = sample.labels[:n_train], sample.labels[n_train:]
    if val_x.shape[0] == 0:
        return config.lambda_scale
    gram = assemble_gram(kernels, train_x)
    best_scale, best_mse = config.lambda_scale, math.inf
    for scale in PILOT_SCALE_GRID:
        plan = _plan_for_cell(config, n_train, R2, scale)
        solution = solve(train_y, gram, plan, tol=config.tol, max_sweeps=config.max_sweeps)
        preds = np.zeros(val_x.shape[0])
        for m in range(config.M):
            kern = kernels[m]
            coeffs = kern.eigenvalues * (
                kern.feature_matrix(train_x[:, m]).T @ solution.alpha[m]
            )
            preds += kern.feature_matrix(val_x[:, m]) @ coeffs
        mse = float(np.mean((val_y - preds) ** 2))
        if mse < best_mse:
            best_mse, best_scale = mse, scale
    return best_scale


def _fit_slope(ns: np.ndarray, means: np.ndarray) -> tuple[float, float]:
    x = np.log(ns.astype(float))
    y = np.log(means)
    xc = x - x.mean()
    slope = float(np.sum(xc * (y - y.mean())) / np.sum(xc**2))
    resid = y - (y.mean() + slope * xc)
    dof = max(1, len(x) - 2)
    se = float(math.sqrt(np.sum(resid**2) / dof / np.sum(xc**2)))
    return slope, se


def run_sweep(
    config: ExperimentConfig,
    jobs: int = 1,
    with_diagnostics: bool = True,
) -> RateReport:
    """Run the full (n, replication) grid and fit the log-log error slope."""
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
    R2 = mixed_norm(truth, 2)
    zero_error = float(np.sum(truth.component_l2_norms_sq()))
    scale = (
        _pilot_scale(config, truth, kernels, R2)
        if config.lambda_policy == "pilot"
        else config.lambda_scale
    )
    cells = [(n, rep) for n in config.n_grid for rep in range(config.replications)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(
                    _run_cell,
                    *zip(
                        *[
                            (config, truth, kernels, n, rep, scale, R2, zero_error)
                            for n, rep in cells
                        ]
                    ),
                )
            )
    else:
        results = [
            _run_cell(config, truth, kernels, n, rep, scale, R2, zero_error)
            for n, rep in cells
        ]
    rows = tuple(sorted(results, key=lambda r: (r.n, r.rep)))
    failed = sum(1 for r in rows if r.failed)
    if failed > 0.05 * len(rows):
        raise SolverError(f"{failed} of {len(rows)} sweep cells failed; aborting report")
    per_n = {}
    for n in config.n_grid:
        errs = [r.err_l2sq for r in rows if r.n == n and not r.failed]
        per_n[n] = float(np.mean(errs)) if errs else math.nan
    ns = np.array([n for n in config.n_grid if math.isfinite(per_n[n])])
    means = np.array([per_n[n] for n in ns])
    if len(ns) >= 4:
        slope, se = _fit_slope(ns, means)
    else:
        slope, se = None, None
    diagnostics = None
    if with_diagnostics:
        n_diag = config.n_grid[-1]
        sample = sample_data(
            truth,
            kernels,
            n_diag,
            noise_kind=config.noise_kind,
            seed=cell_seed(config.base_seed, n_diag, 0),
        )
        gram = assemble_gram(kernels, sample.inputs)
        diagnostics = build_report(gram, truth, config.s, config.q).to_dict()
    return RateReport(
        config=config,
        rows=rows,
        per_n_mean=per_n,
        fitted_exponent=slope,
        exponent_se=se,
        reference_exponent=-rate_exponent(config.s, config.q),
        secondary_terms={
            n: config.d * math.log(config.M) / n for n in config.n_grid
        },
        truncation_tail_bound=float(kernel.eigenvalues[-1]),
        diagnostics=diagnostics,
    )


@dataclass(frozen=True)
class ProfileComparison:
    """Paired homogeneous/inhomogeneous sweep with per-n error ratios."""

    homogeneous: RateReport
    inhomogeneous: RateReport
    per_n_ratio: dict
    inhomogeneous_no_worse: bool
    reference_ratio_l2ball: float
    reference_ratio_linfball: float

    def summary_dict(self) -> dict:
        return {
            "per_n_ratio": {str(k): v for k, v in self.per_n_ratio.items()},
            "inhomogeneous_no_worse": self.inhomogeneous_no_worse,
            "reference_ratio_l2ball": self.reference_ratio_l2ball,
            "reference_ratio_linfball": self.reference_ratio_linfball,
            "homogeneous": self.homogeneous.summary_dict(),
            "inhomogeneous": self.inhomogeneous.summary_dict(),
        }


def compare_profiles(
    config_a: ExperimentConfig, config_b: ExperimentConfig, jobs: int = 1
) -> ProfileComparison:
    """Run two sweeps that differ only in the norm profile, with paired seeds."""
    if replace(config_a, profile=config_b.profile) != config_b:
        raise ValueError("configs must be identical except for the profile field")
    reports = {}
    for cfg in (config_a, config_b):
        reports[cfg.profile] = run_sweep(cfg, jobs=jobs, with_diagnostics=False)
    if set(reports) != {"homogeneous", "inhomogeneous"}:
        raise ValueError("expected one homogeneous and one inhomogeneous config")
    hom, inhom = reports["homogeneous"], reports["inhomogeneous"]
    ratio = {
        n: inhom.per_n_mean[n] / hom.per_n_mean[n]
        for n in config_a.n_grid
        if hom.per_n_mean[n] > 0
    }
    cfg = config_a
    s_eff = cfg.s / (1.0 + cfg.q)
    inhom_truth = build_truth(cfg.M, cfg.d, cfg.q, cfg.s, "inhomogeneous")
    r2_inhom = mixed_norm(inhom_truth, 2)
    ref_l2 = cfg.d ** (1.0 / (1.0 + s_eff)) * r2_inhom ** (
        2.0 * s_eff / (1.0 + s_eff)
    ) / cfg.d
    return ProfileComparison(
        homogeneous=hom,
        inhomogeneous=inhom,
        per_n_ratio=ratio,
        inhomogeneous_no_worse=all(v <= 1.0 + 1e-12 for v in ratio.values()),
        reference_ratio_l2ball=ref_l2,
        reference_ratio_linfball=1.0,
    )
