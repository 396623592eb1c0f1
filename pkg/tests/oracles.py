"""Independent reference implementations used as test oracles.

Everything here is deliberately written with plain dense numpy/scipy
operations and explicit loops, sharing no code path with the package's
solver, so agreement is evidence rather than tautology.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize


def plain_objective(y, gram_matrices, alpha_blocks, lam1, lam2, lam3) -> float:
    """Scalar evaluation of the estimator objective from first principles."""
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    fit = np.zeros(n)
    penalty = 0.0
    for K, a in zip(gram_matrices, alpha_blocks):
        K = np.asarray(K, dtype=float)
        a = np.asarray(a, dtype=float)
        fit = fit + K @ a
        A = K @ K / n + lam2 * K
        penalty += lam1 * np.sqrt(max(0.0, float(a @ (A @ a))))
        penalty += lam3 * float(a @ (K @ a))
    return float(np.sum((y - fit) ** 2)) / n + penalty


def summed_kernel_ridge_predictions(gram_matrices, y, lam3) -> np.ndarray:
    """Joint ridge fit via the single summed kernel closed form."""
    n = len(y)
    K_sum = sum(np.asarray(K, dtype=float) for K in gram_matrices)
    return K_sum @ np.linalg.solve(K_sum + n * lam3 * np.eye(n), np.asarray(y, float))


def single_kernel_ridge_predictions(K, y, lam3) -> np.ndarray:
    n = len(y)
    return K @ np.linalg.solve(K + n * lam3 * np.eye(n), np.asarray(y, float))


def grid_polish_minimum(y, gram_matrices, lam1, lam2, lam3, bound, grid_points=7):
    """Brute-force minimum of the joint objective: coarse grid plus polish.

    Enumerates a full tensor grid over [-bound, bound]^(M*n), evaluates the
    objective vectorized, then polishes the best grid point with Nelder-Mead.
    Only feasible for M*n up to ~6.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    M = len(gram_matrices)
    dim = M * n
    axis = np.linspace(-bound, bound, grid_points)
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)  # (G, dim)

    fit = np.zeros((pts.shape[0], n))
    penalty = np.zeros(pts.shape[0])
    for m, K in enumerate(gram_matrices):
        K = np.asarray(K, dtype=float)
        a = pts[:, m * n : (m + 1) * n]
        fit += a @ K.T
        A = K @ K / n + lam2 * K
        penalty += lam1 * np.sqrt(np.maximum(0.0, np.einsum("gi,ij,gj->g", a, A, a)))
        penalty += lam3 * np.einsum("gi,ij,gj->g", a, K, a)
    values = np.sum((y[None, :] - fit) ** 2, axis=1) / n + penalty
    best = int(np.argmin(values))

    def f(x):
        return plain_objective(
            y, gram_matrices, x.reshape(M, n), lam1, lam2, lam3
        )

    res = minimize(
        f,
        pts[best],
        method="Nelder-Mead",
        options={"maxfev": 40000, "fatol": 1e-13, "xatol": 1e-12},
    )
    return min(float(values[best]), float(res.fun))


def block_minimum_nelder_mead(r, K, lam1, lam2, lam3, starts):
    """Numerical minimum of one block subproblem from several starts."""
    r = np.asarray(r, dtype=float)
    n = r.shape[0]

    def f(a):
        return plain_objective(r, [K], [a], lam1, lam2, lam3)

    best = np.inf
    for x0 in starts:
        res = minimize(
            f,
            np.asarray(x0, dtype=float),
            method="Nelder-Mead",
            options={"maxfev": 60000, "fatol": 1e-14, "xatol": 1e-13},
        )
        best = min(best, float(res.fun))
    return best


def trapezoid_l2_sq(values, grid) -> float:
    """Squared L2 norm of sampled function values by trapezoid quadrature."""
    return float(np.trapezoid(values**2, grid))


def trapezoid_inner(values_a, values_b, grid) -> float:
    return float(np.trapezoid(values_a * values_b, grid))


def random_psd_gram(rng, n, scale=0.9) -> np.ndarray:
    """Random PSD matrix with diagonal bounded by ``scale`` (< 1)."""
    B = rng.standard_normal((n, n + 2))
    K = B @ B.T
    return K * (scale / np.max(np.diag(K)))
