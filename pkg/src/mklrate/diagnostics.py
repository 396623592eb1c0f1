"""Structural quantities of a kernel family on a sample.

Implements the empirical analogues of the incoherence quantities that govern
how well an additive estimator can separate components: the minimum
restricted eigenvalue across an index set (kappa), the largest canonical
correlation between an index set and its complement (rho), their product
``(1 - rho^2) * kappa``, exact mixed norms of a synthetic truth, and the
closed-form rate, minimax, and covering-number exponents used as references
by the experiment harness.

Population quantities are defined over whole function spaces; here every norm
is the empirical one and every function is restricted to the range of its
Gram matrix, so kappa and rho are reported as estimates.  They are exact for
the inequality check in :func:`check_incoherence_bound`, which evaluates the
same ranges the estimates were computed from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .kernels import RANK_TOL, GramSet
from .solver import RegularizationPlan, xi_n
from .synthetic import TruthModel

BALLS = ("l2", "linf")


class MinimaxExponents(NamedTuple):
    """Lower-bound exponents on a mixed-norm ball with effective decay s/(1+q)."""

    ball: str
    n_exponent: float
    d_exponent: float
    radius_exponent: float


class FeasibilityProfile(NamedTuple):
    """Constant-free core of the small-sample condition plus the log M flag."""

    value: float
    logm_ok: bool


@dataclass(frozen=True)
class DiagnosticsReport:
    kappa_min: float
    rho: float
    incoherence_product: float
    mixed_norms: dict
    exponents: dict
    index_set: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "kappa_min": self.kappa_min,
            "rho": self.rho,
            "incoherence_product": self.incoherence_product,
            "mixed_norms": self.mixed_norms,
            "exponents": self.exponents,
            "index_set": list(self.index_set),
        }


def _range_basis(gram: GramSet, m: int) -> np.ndarray:
    return gram.factorization(m).vectors


def _orthonormal_span(blocks: Sequence[np.ndarray]) -> np.ndarray:
    """Orthonormal basis of the joint column span of the given bases."""
    stacked = np.hstack([b for b in blocks if b.shape[1] > 0]) if blocks else None
    if stacked is None or stacked.size == 0:
        return np.zeros((blocks[0].shape[0] if blocks else 0, 0))
    u, sing, _ = np.linalg.svd(stacked, full_matrices=False)
    keep = sing > RANK_TOL * sing[0] if sing.size else np.zeros(0, dtype=bool)
    return u[:, keep]


def empirical_kappa_min(gram: GramSet, index_set: Sequence[int]) -> float:
    """Smallest value of ||sum u_m||^2 / sum ||u_m||^2 over the Gram ranges.

    Computed as the smallest eigenvalue of the stacked-basis overlap matrix,
    which is the generalized eigenproblem of the cross-projector block matrix
    against the block-diagonal identity restricted to the joint range.
    Exactly 1 for singleton index sets; clipped to [0, 1].
    """
    idx = sorted(set(index_set))
    if not idx:
        raise ValueError("index_set must be nonempty")
    if min(idx) < 0 or max(idx) >= gram.num_kernels:
        raise ValueError(f"index_set {idx} out of range for {gram.num_kernels} kernels")
    if len(idx) == 1:
        return 1.0
    bases = [_range_basis(gram, m) for m in idx]
    stacked = np.hstack(bases)
    if stacked.shape[1] == 0:
        return 1.0
    overlap = stacked.T @ stacked
    smallest = float(np.linalg.eigvalsh(overlap)[0])
    return float(min(1.0, max(0.0, smallest)))


def empirical_rho(gram: GramSet, index_set: Sequence[int]) -> float:
    """Largest canonical correlation between an index set and its complement.

    The largest singular value of the product of orthogonal projectors onto
    the two joint ranges, under the empirical inner product; clipped to
    [0, 1] against floating-point overshoot.
    """
    idx = sorted(set(index_set))
    comp = [m for m in range(gram.num_kernels) if m not in idx]
    if not idx or not comp:
        raise ValueError("both the index set and its complement must be nonempty")
    if min(idx) < 0 or max(idx) >= gram.num_kernels:
        raise ValueError(f"index_set {idx} out of range for {gram.num_kernels} kernels")
    span_i = _orthonormal_span([_range_basis(gram, m) for m in idx])
    span_c = _orthonormal_span([_range_basis(gram, m) for m in comp])
    if span_i.shape[1] == 0 or span_c.shape[1] == 0:
        return 0.0
    sing = np.linalg.svd(span_i.T @ span_c, compute_uv=False)
    return float(min(1.0, max(0.0, float(sing[0]))))


def check_incoherence_bound(
    gram: GramSet,
    index_set: Sequence[int],
    trials: int = 1000,
    seed: int = 0,
) -> float:
    """Worst normalized slack of the incoherence inequality over random draws.

    Draws random in-range components f_m = K_m beta_m and evaluates

        ||sum_m f_m||_n^2 - (1 - rho^2) * kappa_min * sum_{m in I} ||f_m||_n^2,

    normalized by the magnitude of the two sides.  The empirical inequality
    holds by construction of the estimates, so the return value is
    nonnegative up to roundoff (contract: >= -1e-8).
    """
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    idx = sorted(set(index_set))
    kappa = empirical_kappa_min(gram, idx)
    rho = empirical_rho(gram, idx) if len(idx) < gram.num_kernels else 0.0
    factor = (1.0 - rho**2) * kappa
    rng = np.random.default_rng(seed)
    n, M = gram.num_samples, gram.num_kernels
    eigs = [gram.factorization(m) for m in range(M)]
    worst = math.inf
    for _ in range(trials):
        total = np.zeros(n)
        active_sq = 0.0
        for m in range(M):
            beta = rng.standard_normal(n)
            values = eigs[m].vectors @ (
                eigs[m].eigenvalues * (eigs[m].vectors.T @ beta)
            )
            total += values
            if m in idx:
                active_sq += float(values @ values) / n
        lhs = float(total @ total) / n
        rhs = factor * active_sq
        scale = max(lhs, rhs, 1e-300)
        worst = min(worst, (lhs - rhs) / scale)
    return worst


def mixed_norm(truth: TruthModel, p) -> float:
    """Mixed norm across components of the pre-smoothing RKHS norms."""
    norms = np.asarray(truth.g_rkhs_norms)[list(truth.active_set)]
    if p == 1:
        return float(np.sum(norms))
    if p == 2:
        return float(np.sqrt(np.sum(norms**2)))
    if p in (math.inf, "inf", np.inf):
        return float(np.max(norms))
    raise ValueError(f"p must be 1, 2, or inf, got {p!r}")


def lambda_star(d: int, n: int, s: float, q: float, R2: float) -> float:
    """Risk-minimizing inner regularization scale for a sparse truth.

    Equals ``d^(1/(1+q+s)) * n^(-1/(1+q+s)) * R2^(-2/(1+q+s))``, which
    balances the group-penalty and ridge-bias contributions to the risk.
    """
    if d <= 0 or n <= 0 or R2 <= 0.0:
        raise ValueError(f"d, n, R2 must be positive, got d={d}, n={n}, R2={R2}")
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    power = 1.0 / (1.0 + q + s)
    return d**power * n ** (-power) * R2 ** (-2.0 * power)


def _check_sq(s: float, q: float) -> None:
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")


def rate_exponent(s: float, q: float) -> float:
    """Achievable excess-risk exponent (1+q)/(1+q+s) in the sample size."""
    _check_sq(s, q)
    return (1.0 + q) / (1.0 + q + s)


def minimax_reference(s: float, q: float, ball: str) -> MinimaxExponents:
    """Minimax lower-bound exponents on the chosen mixed-norm ball.

    With the effective decay ``s_eff = s / (1+q)``, both balls share the
    n-exponent ``1/(1+s_eff)`` and radius exponent ``2 s_eff/(1+s_eff)``; the
    d-exponent is ``1/(1+s_eff)`` on the l2 ball and 1 on the sup ball.
    """
    _check_sq(s, q)
    if ball not in BALLS:
        raise ValueError(f"ball must be one of {BALLS}, got {ball!r}")
    s_eff = s / (1.0 + q)
    n_exp = 1.0 / (1.0 + s_eff)
    d_exp = n_exp if ball == "l2" else 1.0
    return MinimaxExponents(
        ball=ball,
        n_exponent=n_exp,
        d_exponent=d_exp,
        radius_exponent=2.0 * s_eff / (1.0 + s_eff),
    )


def entropy_exponent(s: float, q: float) -> float:
    """Covering-number exponent 2s/(1+q) of the smoothness class."""
    _check_sq(s, q)
    return 2.0 * s / (1.0 + q)


def plan_feasibility_profile(
    d: int, n: int, M, plan: RegularizationPlan, R2: float, q: float
) -> FeasibilityProfile:
    """Constant-free core of the plan's small-sample condition.

    Returns ``sqrt(n) * xi_n^2 * (d + lam3^(1+q) * R2^2 / lam1^2)`` together
    with the flag ``log(M)/sqrt(n) <= 1``.  The unknowable theory constants
    are deliberately excluded; this is a feasibility diagnostic, not a
    verification of the condition.
    """
    if plan.theory_params is None:
        raise ValueError("plan must come from theory_plan to evaluate its profile")
    params = plan.theory_params
    xi = xi_n(params["lam_bar"], n, M, params["s"])
    core = math.sqrt(n) * xi**2 * (d + plan.lam3 ** (1.0 + q) * R2**2 / plan.lam1**2)
    return FeasibilityProfile(value=core, logm_ok=math.log(M) / math.sqrt(n) <= 1.0)


def exponent_record(s: float, q: float) -> dict:
    l2 = minimax_reference(s, q, "l2")
    linf = minimax_reference(s, q, "linf")
    return {
        "rate": rate_exponent(s, q),
        "entropy": entropy_exponent(s, q),
        "minimax_l2": l2._asdict(),
        "minimax_linf": linf._asdict(),
    }


def build_report(
    gram: GramSet,
    truth: TruthModel,
    s: float,
    q: float,
    index_set: Sequence[int] | None = None,
) -> DiagnosticsReport:
    """Assemble the full diagnostics record for one data set and truth."""
    idx = tuple(index_set) if index_set is not None else truth.active_set
    kappa = empirical_kappa_min(gram, idx)
    rho = empirical_rho(gram, idx) if len(idx) < gram.num_kernels else 0.0
    return DiagnosticsReport(
        kappa_min=kappa,
        rho=rho,
        incoherence_product=(1.0 - rho**2) * kappa,
        mixed_norms={
            "R1": mixed_norm(truth, 1),
            "R2": mixed_norm(truth, 2),
            "Rinf": mixed_norm(truth, math.inf),
        },
        exponents=exponent_record(s, q),
        index_set=idx,
    )
