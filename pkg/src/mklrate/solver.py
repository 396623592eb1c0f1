"""Block coordinate descent for elastic-net multiple kernel learning.

The estimator minimizes, over one coefficient vector per kernel,

    (1/n) ||y - sum_m K_m a_m||^2
        + lam1 * sum_m sqrt(a_m' A_m a_m)
        + lam3 * sum_m a_m' K_m a_m,        A_m = K_m K_m / n + lam2 K_m,

which is the representer-theorem form of squared loss plus a group penalty
mixing the empirical and RKHS norms of each component plus a ridge term.

Each block subproblem is solved exactly in the eigenbasis of K_m, where the
stationarity system

    ((2/n) K_m^2 + 2 lam3 K_m + (lam1 / t) A_m) a = (2/n) K_m r

becomes diagonal and t solves the scalar fixed point t = sqrt(a(t)' A_m a(t))
by bisection.  A block is set to exact zero when the dual-norm test
sqrt(g' pinv(A_m) g) <= lam1 holds for the block gradient g = (2/n) K_m r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .kernels import EigenGram, GramSet, _eigen_from_dense

BISECT_REL_TOL = 1e-10
BISECT_MAX_ITER = 200


class SolverError(RuntimeError):
    """Numerical failure inside the block solver."""


@dataclass(frozen=True)
class RegularizationPlan:
    """The three regularization scales of one solve.

    ``lam1`` weights the group penalty, ``lam2`` smooths inside it (must be
    strictly positive so the penalty shares the range of each Gram matrix),
    ``lam3`` scales the ridge term.  ``provenance`` records whether the values
    were set manually or derived by :func:`theory_plan`, in which case
    ``theory_params`` keeps the inputs for later feasibility diagnostics.
    """

    lam1: float
    lam2: float
    lam3: float
    provenance: str = "manual"
    theory_params: dict | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.lam1 < 0.0:
            raise ValueError(f"lam1 must be nonnegative, got {self.lam1}")
        if self.lam2 <= 0.0:
            raise ValueError(f"lam2 must be strictly positive, got {self.lam2}")
        if self.lam3 < 0.0:
            raise ValueError(f"lam3 must be nonnegative, got {self.lam3}")


@dataclass(frozen=True, eq=False)
class MklSolution:
    """Solver output: per-kernel coefficient blocks and convergence evidence."""

    alpha: np.ndarray
    component_values: np.ndarray
    objective_history: tuple[float, ...]
    kkt_residual: float
    active_estimate: tuple[int, ...]
    sweeps_used: int
    converged: bool
    plan: RegularizationPlan

    def __post_init__(self) -> None:
        for name in ("alpha", "component_values"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_kernels(self) -> int:
        return int(self.alpha.shape[0])

    def predictions(self) -> np.ndarray:
        return self.component_values.sum(axis=0)

    def block_norms(self, gram: GramSet) -> dict:
        """Empirical and RKHS norms of each fitted component."""
        n = gram.num_samples
        emp = np.sqrt(np.sum(self.component_values**2, axis=1) / n)
        rkhs = np.sqrt(
            np.maximum(
                0.0,
                np.array(
                    [self.alpha[m] @ self.component_values[m] for m in range(self.num_kernels)]
                ),
            )
        )
        return {"empirical": emp.tolist(), "rkhs": rkhs.tolist()}

    def to_dict(self, gram: GramSet | None = None) -> dict:
        payload = {
            "plan": {
                "lam1": self.plan.lam1,
                "lam2": self.plan.lam2,
                "lam3": self.plan.lam3,
                "provenance": self.plan.provenance,
            },
            "active_estimate": list(self.active_estimate),
            "objective_history": list(self.objective_history),
            "kkt_residual": self.kkt_residual,
            "sweeps_used": self.sweeps_used,
            "converged": self.converged,
            "alpha": self.alpha.tolist(),
        }
        if gram is not None:
            payload["block_norms"] = self.block_norms(gram)
        return payload


def eta(t: float, n: int) -> float:
    """Confidence inflation factor max(1, sqrt(t), t / sqrt(n))."""
    if t < 1.0:
        raise ValueError(f"t must be at least 1, got {t}")
    return max(1.0, math.sqrt(t), t / math.sqrt(n))


def xi_n(lam_bar: float, n: int, M, s: float) -> float:
    """Noise-level scale max(lam^-s/2 / sqrt(n), lam^-1/2 / n^(1/(1+s)), sqrt(log M / n))."""
    if lam_bar <= 0.0:
        raise ValueError(f"lam_bar must be positive, got {lam_bar}")
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    if n < 2 or M < 2:
        raise ValueError(f"need n >= 2 and M >= 2, got n = {n}, M = {M}")
    return max(
        lam_bar ** (-s / 2.0) / math.sqrt(n),
        lam_bar ** (-0.5) / n ** (1.0 / (1.0 + s)),
        math.sqrt(math.log(M) / n),
    )


def theory_plan(
    n: int, M, s: float, lam_bar: float, t: float = 1.0, scale: float = 1.0
) -> RegularizationPlan:
    """Regularization plan with lam2 = lam3 = lam_bar and a rate-matched lam1.

    ``lam1 = scale * eta(t) * xi_n(lam_bar)``; the unknown theory constant in
    front is exposed as ``scale`` (default 1) since only the rate, not the
    constant, is testable.
    """
    if scale <= 0.0:
        raise ValueError(f"scale must be positive, got {scale}")
    xi = xi_n(lam_bar, n, M, s)
    inflation = eta(t, n)
    return RegularizationPlan(
        lam1=scale * inflation * xi,
        lam2=lam_bar,
        lam3=lam_bar,
        provenance=f"theory(lam_bar={lam_bar:.6g}, t={t:.6g}, scale={scale:.6g})",
        theory_params={
            "lam_bar": float(lam_bar),
            "t": float(t),
            "scale": float(scale),
            "s": float(s),
            "n": int(n),
            "M": float(M),
            "xi_n": xi,
            "eta": inflation,
        },
    )


def _as_eigen(gram_block, jitter: float = 0.0) -> EigenGram:
    if isinstance(gram_block, EigenGram):
        return gram_block
    mat = np.asarray(gram_block, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square Gram matrix, got shape {mat.shape}")
    if jitter == 0.0:
        jitter = 1e-10 * float(np.trace(mat)) / mat.shape[0]
    try:
        return _eigen_from_dense(mat, jitter)
    except ValueError as exc:
        diag = np.diag(mat)
        raise SolverError(
            f"factorization failed for {mat.shape} Gram matrix "
            f"(diag in [{diag.min():.3g}, {diag.max():.3g}]): {exc}"
        ) from exc


def _zero_statistic(rho: np.ndarray, lam: np.ndarray, lam2: float, n: int) -> float:
    """Dual norm sqrt(g' pinv(A) g) of the block gradient at zero."""
    if lam.size == 0:
        return 0.0
    return math.sqrt(float(np.sum((4.0 / n**2) * lam * rho**2 / (lam / n + lam2))))


def _block_coef(t: float, rho, lam, plan: RegularizationPlan, n: int) -> np.ndarray:
    # Eigen-coordinates of the stationarity solve; the common factor lam_j of
    # numerator and denominator is cancelled for stability at small lam_j.
    denom = (2.0 / n) * lam + 2.0 * plan.lam3 + (plan.lam1 / t) * (lam / n + plan.lam2)
    return (2.0 / n) * rho / denom


def _penalty_eigenvalues(lam: np.ndarray, lam2: float, n: int) -> np.ndarray:
    return lam * (lam / n + lam2)


def _block_objective(
    coef: np.ndarray, rho: np.ndarray, lam: np.ndarray, plan: RegularizationPlan, n: int
) -> float:
    a_eig = _penalty_eigenvalues(lam, plan.lam2, n)
    fit = float(np.sum((rho - lam * coef) ** 2)) / n
    group = plan.lam1 * math.sqrt(max(0.0, float(np.sum(a_eig * coef**2))))
    ridge = plan.lam3 * float(np.sum(lam * coef**2))
    return fit + group + ridge


def _solve_block(
    rho: np.ndarray, lam: np.ndarray, plan: RegularizationPlan, n: int
) -> np.ndarray:
    """Exact minimizer of one block subproblem in eigen-coordinates."""
    if lam.size == 0:
        return np.zeros(0)
    if plan.lam1 == 0.0:
        denom = (2.0 / n) * lam + 2.0 * plan.lam3
        return (2.0 / n) * rho / denom
    a_eig = _penalty_eigenvalues(lam, plan.lam2, n)
    unpen = (2.0 / n) * rho / ((2.0 / n) * lam + 2.0 * plan.lam3)
    t_hi = math.sqrt(float(np.sum(a_eig * unpen**2)))
    if t_hi == 0.0:
        return np.zeros_like(rho)

    def gap(t: float) -> float:
        coef = _block_coef(t, rho, lam, plan, n)
        return t - math.sqrt(float(np.sum(a_eig * coef**2)))

    t_lo = 1e-12 * t_hi
    g_lo, g_hi = gap(t_lo), gap(t_hi)
    if g_lo >= 0.0:
        # Zero is (numerically) optimal; callers normally screen this out.
        return np.zeros_like(rho)
    if g_hi < 0.0:
        return _golden_fallback(rho, lam, plan, n, t_lo, t_hi)
    lo, hi = t_lo, t_hi
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if gap(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= BISECT_REL_TOL * mid:
            break
    return _block_coef(0.5 * (lo + hi), rho, lam, plan, n)


def _golden_fallback(
    rho, lam, plan: RegularizationPlan, n: int, t_lo: float, t_hi: float
) -> np.ndarray:
    """Golden-section search on the 1-D profile objective t -> F(a(t))."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0

    def profile(t: float) -> float:
        return _block_objective(_block_coef(t, rho, lam, plan, n), rho, lam, plan, n)

    lo, hi = t_lo, 2.0 * t_hi
    c = hi - inv_phi * (hi - lo)
    d = lo + inv_phi * (hi - lo)
    fc, fd = profile(c), profile(d)
    for _ in range(400):
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - inv_phi * (hi - lo)
            fc = profile(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + inv_phi * (hi - lo)
            fd = profile(d)
        if hi - lo <= BISECT_REL_TOL * max(hi, 1e-300):
            break
    else:
        raise SolverError("block update failed: bisection and golden section both stalled")
    return _block_coef(0.5 * (lo + hi), rho, lam, plan, n)


def zero_block_test(residual: np.ndarray, gram_block, plan: RegularizationPlan) -> bool:
    """True iff setting the block to zero is optimal for its subproblem."""
    eig = _as_eigen(gram_block)
    n = eig.vectors.shape[0]
    rho = eig.vectors.T @ np.asarray(residual, dtype=float)
    return _zero_statistic(rho, eig.eigenvalues, plan.lam2, n) <= plan.lam1


def block_update(
    residual: np.ndarray,
    gram_block,
    plan: RegularizationPlan,
    warm_start: np.ndarray | None = None,
) -> np.ndarray:
    """Minimize one block subproblem; never worse than the warm start."""
    eig = _as_eigen(gram_block)
    n = eig.vectors.shape[0]
    r = np.asarray(residual, dtype=float)
    rho = eig.vectors.T @ r
    coef = _solve_block(rho, eig.eigenvalues, plan, n)
    if warm_start is not None:
        warm_coef = eig.vectors.T @ np.asarray(warm_start, dtype=float)
        if _block_objective(warm_coef, rho, eig.eigenvalues, plan, n) < _block_objective(
            coef, rho, eig.eigenvalues, plan, n
        ):
            coef = warm_coef
    return eig.vectors @ coef


def objective(
    y: np.ndarray,
    gram: GramSet,
    alpha_blocks: np.ndarray,
    plan: RegularizationPlan,
) -> float:
    """Full objective value at the given coefficient blocks."""
    y = np.asarray(y, dtype=float)
    alpha = np.asarray(alpha_blocks, dtype=float)
    n, M = gram.num_samples, gram.num_kernels
    if y.shape != (n,):
        raise ValueError(f"y must have shape ({n},), got {y.shape}")
    if alpha.shape != (M, n):
        raise ValueError(f"alpha_blocks must have shape ({M}, {n}), got {alpha.shape}")
    fit = np.zeros(n)
    penalty = 0.0
    for m in range(M):
        eig = gram.factorization(m)
        coef = eig.vectors.T @ alpha[m]
        fit += eig.vectors @ (eig.eigenvalues * coef)
        a_eig = _penalty_eigenvalues(eig.eigenvalues, plan.lam2, n)
        penalty += plan.lam1 * math.sqrt(max(0.0, float(np.sum(a_eig * coef**2))))
        penalty += plan.lam3 * float(np.sum(eig.eigenvalues * coef**2))
    return float(np.sum((y - fit) ** 2)) / n + penalty


def compute_lambda_max(y: np.ndarray, gram: GramSet, lam2: float) -> float:
    """Smallest lam1 at which the all-zero solution is optimal."""
    if lam2 <= 0.0:
        raise ValueError(f"lam2 must be strictly positive, got {lam2}")
    y = np.asarray(y, dtype=float)
    n = gram.num_samples
    best = 0.0
    for m in range(gram.num_kernels):
        eig = gram.factorization(m)
        rho = eig.vectors.T @ y
        best = max(best, _zero_statistic(rho, eig.eigenvalues, lam2, n))
    return best


def solve(
    y: np.ndarray,
    gram: GramSet,
    plan: RegularizationPlan,
    tol: float = 1e-8,
    max_sweeps: int = 500,
    shuffle_seed: int | None = None,
) -> MklSolution:
    """Cyclic block coordinate descent with exact zero screening.

    Sweeps blocks in fixed order (or a seeded shuffle), applying the zero test
    and otherwise the exact block update, until the largest block KKT
    residual drops below ``tol * (1 + ||y|| / sqrt(n))`` or the sweep budget
    is exhausted (reported via ``converged``, never silently).
    """
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_sweeps < 1:
        raise ValueError(f"max_sweeps must be at least 1, got {max_sweeps}")
    y = np.asarray(y, dtype=float)
    n, M = gram.num_samples, gram.num_kernels
    if y.shape != (n,):
        raise ValueError(f"y must have shape ({n},), got {y.shape}")
    eigs = [gram.factorization(m) for m in range(M)]
    coefs = [np.zeros(eigs[m].rank) for m in range(M)]
    comps = np.zeros((M, n))
    fit = np.zeros(n)
    scale = 1.0 + float(np.linalg.norm(y)) / math.sqrt(n)
    rng = np.random.default_rng(shuffle_seed) if shuffle_seed is not None else None

    history = [_objective_from_state(y, fit, eigs, coefs, plan, n)]
    kkt = math.inf
    sweeps = 0
    converged = False
    for sweep in range(1, max_sweeps + 1):
        order = rng.permutation(M) if rng is not None else range(M)
        for m in order:
            eig = eigs[m]
            residual = y - fit + comps[m]
            rho = eig.vectors.T @ residual
            stat = _zero_statistic(rho, eig.eigenvalues, plan.lam2, n)
            if stat <= plan.lam1:
                new_coef = np.zeros(eig.rank)
            else:
                new_coef = _solve_block(rho, eig.eigenvalues, plan, n)
                if _block_objective(new_coef, rho, eig.eigenvalues, plan, n) > _block_objective(
                    coefs[m], rho, eig.eigenvalues, plan, n
                ):
                    new_coef = coefs[m]
            coefs[m] = new_coef
            new_comp = eig.vectors @ (eig.eigenvalues * new_coef)
            fit += new_comp - comps[m]
            comps[m] = new_comp
        fit = comps.sum(axis=0)  # refresh against drift
        obj = _objective_from_state(y, fit, eigs, coefs, plan, n)
        if not math.isfinite(obj):
            raise SolverError("objective diverged to a non-finite value; check the Gram set")
        history.append(obj)
        sweeps = sweep
        kkt = _max_kkt_residual(y, fit, comps, eigs, coefs, plan, n)
        if kkt <= tol * scale:
            converged = True
            break

    alpha = np.zeros((M, n))
    for m in range(M):
        alpha[m] = eigs[m].vectors @ coefs[m]
    active = tuple(m for m in range(M) if np.any(coefs[m] != 0.0))
    return MklSolution(
        alpha=alpha,
        component_values=comps,
        objective_history=tuple(history),
        kkt_residual=kkt,
        active_estimate=active,
        sweeps_used=sweeps,
        converged=converged,
        plan=plan,
    )


def _objective_from_state(
    y: np.ndarray,
    fit: np.ndarray,
    eigs: Sequence[EigenGram],
    coefs: Sequence[np.ndarray],
    plan: RegularizationPlan,
    n: int,
) -> float:
    value = float(np.sum((y - fit) ** 2)) / n
    for eig, coef in zip(eigs, coefs):
        a_eig = _penalty_eigenvalues(eig.eigenvalues, plan.lam2, n)
        value += plan.lam1 * math.sqrt(max(0.0, float(np.sum(a_eig * coef**2))))
        value += plan.lam3 * float(np.sum(eig.eigenvalues * coef**2))
    return value


def _max_kkt_residual(
    y: np.ndarray,
    fit: np.ndarray,
    comps: np.ndarray,
    eigs: Sequence[EigenGram],
    coefs: Sequence[np.ndarray],
    plan: RegularizationPlan,
    n: int,
) -> float:
    worst = 0.0
    for m, (eig, coef) in enumerate(zip(eigs, coefs)):
        rho = eig.vectors.T @ (y - fit + comps[m])
        lam = eig.eigenvalues
        if not np.any(coef != 0.0):
            stat = _zero_statistic(rho, lam, plan.lam2, n)
            worst = max(worst, max(0.0, stat - plan.lam1))
            continue
        a_eig = _penalty_eigenvalues(lam, plan.lam2, n)
        t = math.sqrt(float(np.sum(a_eig * coef**2)))
        if t == 0.0:
            stat = _zero_statistic(rho, lam, plan.lam2, n)
            worst = max(worst, max(0.0, stat - plan.lam1))
            continue
        grad = (
            ((2.0 / n) * lam + 2.0 * plan.lam3) * lam * coef
            - (2.0 / n) * lam * rho
            + (plan.lam1 / t) * a_eig * coef
        )
        worst = max(worst, float(np.linalg.norm(grad)))
    return worst
