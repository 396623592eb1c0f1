"""Finite-rank kernels with explicitly known spectral expansions.

A kernel here is a truncated orthogonal-series kernel: it is determined by a
nonincreasing positive eigenvalue sequence and an orthonormal basis of the
unit interval, and evaluates as ``sum_k mu_k * phi_k(x) * phi_k(y)``.  Keeping
the expansion explicit makes population quantities (L2 and RKHS norms, Mercer
spectra, fractional operator powers) exactly computable, which the synthetic
models and the experiment harness rely on.

Gram matrices assembled from these kernels are rank-deficient whenever the
sample size exceeds the truncation level, so :class:`GramSet` carries low-rank
factors and hands out rank-truncated eigendecompositions instead of raw
inverses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

# Shared numerical tolerances.  RANK_TOL is the pseudo-inverse cutoff used by
# the solver and the diagnostics alike: eigenvalues below RANK_TOL times the
# largest one are treated as exact zeros.
RANK_TOL = 1e-10
SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-8
DIAG_TOL = 1e-10
NORMALIZATION_GRID = 10_001


def cosine_basis(points: np.ndarray, num_terms: int) -> np.ndarray:
    """Evaluate ``sqrt(2) * cos(pi * k * x)`` for k = 1..num_terms.

    The constant function is excluded, so every basis function integrates to
    zero against the uniform distribution on [0, 1].
    """
    x = np.asarray(points, dtype=float)
    k = np.arange(1, num_terms + 1, dtype=float)
    return math.sqrt(2.0) * np.cos(math.pi * np.multiply.outer(x, k))


BASIS_REGISTRY: dict[str, Callable[[np.ndarray, int], np.ndarray]] = {
    "cosine": cosine_basis,
}


def _check_unit_interval(points: np.ndarray, name: str = "x") -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.size and (np.min(pts) < 0.0 or np.max(pts) > 1.0):
        raise ValueError(f"{name} outside the kernel domain [0, 1]")
    return pts


@dataclass(frozen=True, eq=False)
class SpectralKernel:
    """A kernel given by a truncated orthonormal expansion.

    Attributes
    ----------
    s_exponent:
        Complexity exponent in (0, 1); the eigenvalues decay like
        ``k ** (-1 / s_exponent)`` up to a global normalization.
    eigenvalues:
        Nonincreasing positive sequence, one value per basis term.
    basis_id:
        Key into :data:`BASIS_REGISTRY`; "cosine" by default.
    """

    s_exponent: float
    eigenvalues: np.ndarray
    basis_id: str = "cosine"

    def __post_init__(self) -> None:
        if not 0.0 < self.s_exponent < 1.0:
            raise ValueError(f"s_exponent must lie in (0, 1), got {self.s_exponent}")
        if self.basis_id not in BASIS_REGISTRY:
            raise ValueError(f"unknown basis_id {self.basis_id!r}")
        eig = np.asarray(self.eigenvalues, dtype=float)
        if eig.ndim != 1 or eig.size == 0:
            raise ValueError("eigenvalues must be a nonempty 1-D sequence")
        if np.min(eig) <= 0.0:
            raise ValueError("eigenvalues must be strictly positive")
        if np.any(np.diff(eig) > 0.0):
            raise ValueError("eigenvalues must be nonincreasing")
        eig = eig.copy()
        eig.setflags(write=False)
        object.__setattr__(self, "eigenvalues", eig)

    @classmethod
    def power_law(
        cls,
        s: float,
        num_terms: int = 128,
        basis_id: str = "cosine",
        grid_points: int = NORMALIZATION_GRID,
    ) -> "SpectralKernel":
        """Build the kernel with ``mu_k`` proportional to ``k ** (-1/s)``.

        The eigenvalues are globally rescaled so that ``sup_x k(x, x) <= 1``
        over a dense grid; for the cosine basis the supremum sits at x = 0,
        which the grid contains, so the bound is tight.
        """
        if not 0.0 < s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {s}")
        if num_terms < 1:
            raise ValueError(f"num_terms must be positive, got {num_terms}")
        k = np.arange(1, num_terms + 1, dtype=float)
        raw = k ** (-1.0 / s)
        grid = np.linspace(0.0, 1.0, grid_points)
        features = BASIS_REGISTRY[basis_id](grid, num_terms)
        sup_diag = float(np.max((features**2) @ raw))
        return cls(s_exponent=s, eigenvalues=raw / sup_diag, basis_id=basis_id)

    @property
    def num_terms(self) -> int:
        return int(self.eigenvalues.size)

    def feature_matrix(self, points: np.ndarray) -> np.ndarray:
        """Basis evaluations phi_k(x_i), shape (n_points, num_terms)."""
        pts = _check_unit_interval(points)
        return BASIS_REGISTRY[self.basis_id](pts, self.num_terms)

    def gram_factor(self, points: np.ndarray) -> np.ndarray:
        """Matrix B with B @ B.T equal to the Gram matrix at the points."""
        return self.feature_matrix(points) * np.sqrt(self.eigenvalues)

    def diagonal(self, points: np.ndarray) -> np.ndarray:
        """k(x, x) for each point; bounded by 1 after normalization."""
        phi = self.feature_matrix(points)
        return (phi**2) @ self.eigenvalues

    def to_dict(self) -> dict:
        return {
            "s_exponent": self.s_exponent,
            "eigenvalues": self.eigenvalues.tolist(),
            "basis_id": self.basis_id,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SpectralKernel":
        return cls(
            s_exponent=float(payload["s_exponent"]),
            eigenvalues=np.asarray(payload["eigenvalues"], dtype=float),
            basis_id=str(payload["basis_id"]),
        )


def evaluate_kernel(kernel: SpectralKernel, x, y):
    """Pointwise kernel value ``sum_k mu_k phi_k(x) phi_k(y)``.

    Scalars return a float; equal-shaped arrays are evaluated elementwise.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    if x_arr.shape != y_arr.shape:
        raise ValueError("x and y must have matching shapes")
    phi_x = kernel.feature_matrix(x_arr.ravel())
    phi_y = kernel.feature_matrix(y_arr.ravel())
    values = (phi_x * phi_y) @ kernel.eigenvalues
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(values[0])
    return values.reshape(x_arr.shape)


def apply_operator_power(
    kernel: SpectralKernel, coefficients: Sequence[float], beta: float
) -> np.ndarray:
    """Apply the fractional integral operator power to basis coefficients.

    For f with coefficients ``b_k`` this returns the coefficients of the
    operator power applied to f, i.e. ``mu_k ** beta * b_k``.  beta must lie
    in [0, 1]; beta = 0 is the identity and beta = 1 multiplies by the
    spectrum.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    coeffs = np.asarray(coefficients, dtype=float)
    if coeffs.ndim != 1:
        raise ValueError("coefficients must be 1-D")
    if coeffs.size > kernel.num_terms:
        raise ValueError(
            f"coefficient list of length {coeffs.size} exceeds the kernel's "
            f"{kernel.num_terms} terms"
        )
    return kernel.eigenvalues[: coeffs.size] ** beta * coeffs


def series_l2_norm_sq(coefficients: Sequence[float]) -> float:
    """Squared L2 norm of ``sum_k b_k phi_k`` under the sampling distribution."""
    coeffs = np.asarray(coefficients, dtype=float)
    return float(coeffs @ coeffs)


def series_rkhs_norm_sq(kernel: SpectralKernel, coefficients: Sequence[float]) -> float:
    """Squared RKHS norm ``sum_k b_k**2 / mu_k`` of a basis expansion."""
    coeffs = np.asarray(coefficients, dtype=float)
    if coeffs.size > kernel.num_terms:
        raise ValueError("coefficient list longer than the kernel expansion")
    return float(np.sum(coeffs**2 / kernel.eigenvalues[: coeffs.size]))


class EigenGram(NamedTuple):
    """Rank-truncated eigendecomposition of one Gram matrix.

    ``vectors`` is n-by-r with orthonormal columns and ``eigenvalues`` holds
    the r retained positive eigenvalues in decreasing order; eigenvalues below
    RANK_TOL times the largest are dropped.
    """

    vectors: np.ndarray
    eigenvalues: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.eigenvalues.size)


def _eigen_from_factor(factor: np.ndarray) -> EigenGram:
    u, sing, _ = np.linalg.svd(factor, full_matrices=False)
    lam = sing**2
    if lam.size == 0 or lam[0] <= 0.0:
        return EigenGram(np.zeros((factor.shape[0], 0)), np.zeros(0))
    keep = lam > RANK_TOL * lam[0]
    return EigenGram(np.ascontiguousarray(u[:, keep]), lam[keep])


def _eigen_from_dense(matrix: np.ndarray, jitter: float) -> EigenGram:
    # The jitter acts as an absolute eigenvalue floor during rank truncation;
    # adding it to the diagonal instead would bias every retained eigenvalue.
    try:
        w, v = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise ValueError(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(w)[::-1]
    w = w[order]
    v = v[:, order]
    top = max(w[0], 0.0)
    if top <= 0.0:
        return EigenGram(np.zeros((matrix.shape[0], 0)), np.zeros(0))
    keep = w > max(RANK_TOL * top, jitter)
    return EigenGram(np.ascontiguousarray(v[:, keep]), w[keep])


class GramSet:
    """The per-kernel Gram matrices of one sample, with cached factorizations.

    Instances either wrap explicit dense matrices (the black-box kernel hook,
    :meth:`from_matrices`) or low-rank factors produced by
    :func:`assemble_gram`; dense matrices are materialized lazily in the
    latter case.  All views are read-only once constructed.
    """

    def __init__(
        self,
        *,
        matrices: Sequence[np.ndarray] | None = None,
        factors: Sequence[np.ndarray] | None = None,
        sample_points: np.ndarray | None = None,
        jitter: float | None = None,
    ) -> None:
        if (matrices is None) == (factors is None):
            raise ValueError("provide exactly one of matrices or factors")
        self._factors = [np.asarray(f, dtype=float) for f in factors] if factors else None
        self._dense: dict[int, np.ndarray] = {}
        self._eigen: dict[int, EigenGram] = {}
        if matrices is not None:
            mats = [np.asarray(m, dtype=float) for m in matrices]
            if not mats:
                raise ValueError("at least one Gram matrix is required")
            n = mats[0].shape[0]
            for idx, mat in enumerate(mats):
                self._validate_dense(mat, idx, n)
            self._dense = dict(enumerate(mats))
            self._num_kernels = len(mats)
            self._num_samples = n
        else:
            assert self._factors is not None
            n = self._factors[0].shape[0]
            for idx, fac in enumerate(self._factors):
                if fac.ndim != 2 or fac.shape[0] != n:
                    raise ValueError(f"factor {idx} has inconsistent shape {fac.shape}")
                diag = np.sum(fac**2, axis=1)
                if diag.size and np.max(diag) > 1.0 + DIAG_TOL:
                    raise ValueError(
                        f"Gram diagonal exceeds 1 for kernel {idx}: "
                        f"max k(x,x) = {np.max(diag):.6g}"
                    )
            self._num_kernels = len(self._factors)
            self._num_samples = n
        if sample_points is not None:
            pts = np.asarray(sample_points, dtype=float)
            if pts.ndim != 2 or pts.shape[0] != self._num_samples:
                raise ValueError(
                    f"sample_points shape {pts.shape} does not match n = {self._num_samples}"
                )
            pts = pts.copy()
            pts.setflags(write=False)
            self.sample_points = pts
        else:
            self.sample_points = None
        if jitter is None:
            trace_over_n = max(
                float(np.mean(self.diagonal(m))) for m in range(self._num_kernels)
            )
            jitter = 1e-10 * trace_over_n
        if jitter < 0.0:
            raise ValueError(f"jitter must be nonnegative, got {jitter}")
        self.jitter = float(jitter)

    @staticmethod
    def _validate_dense(mat: np.ndarray, idx: int, n: int) -> None:
        if mat.ndim != 2 or mat.shape != (n, n):
            raise ValueError(f"Gram matrix {idx} has shape {mat.shape}, expected ({n}, {n})")
        asym = float(np.max(np.abs(mat - mat.T))) if n else 0.0
        if asym > SYMMETRY_TOL:
            raise ValueError(f"Gram matrix {idx} is not symmetric (max deviation {asym:.3g})")
        if np.max(np.diag(mat)) > 1.0 + DIAG_TOL:
            raise ValueError(
                f"Gram matrix {idx} has diagonal entries above 1 "
                f"(max {np.max(np.diag(mat)):.6g})"
            )
        w = np.linalg.eigvalsh(mat)
        if w[0] < -PSD_TOL * max(w[-1], 0.0) and w[0] < -1e-14:
            raise ValueError(
                f"Gram matrix {idx} is not positive semidefinite "
                f"(min eigenvalue {w[0]:.3g}, max {w[-1]:.3g})"
            )

    @classmethod
    def from_matrices(
        cls,
        matrices: Sequence[np.ndarray],
        sample_points: np.ndarray | None = None,
        jitter: float | None = None,
    ) -> "GramSet":
        """Wrap externally supplied Gram matrices (black-box kernels)."""
        return cls(matrices=matrices, sample_points=sample_points, jitter=jitter)

    @property
    def num_kernels(self) -> int:
        return self._num_kernels

    @property
    def num_samples(self) -> int:
        return self._num_samples

    def matrix(self, m: int) -> np.ndarray:
        """Dense Gram matrix of kernel m (materialized on first access)."""
        if m not in self._dense:
            assert self._factors is not None
            fac = self._factors[m]
            self._dense[m] = fac @ fac.T
        return self._dense[m]

    @property
    def gram_matrices(self) -> list[np.ndarray]:
        return [self.matrix(m) for m in range(self._num_kernels)]

    def diagonal(self, m: int) -> np.ndarray:
        if self._factors is not None and m not in self._dense:
            return np.sum(self._factors[m] ** 2, axis=1)
        return np.diag(self.matrix(m))

    def factorization(self, m: int) -> EigenGram:
        """Rank-truncated eigendecomposition of Gram matrix m (cached)."""
        if m not in self._eigen:
            if self._factors is not None:
                self._eigen[m] = _eigen_from_factor(self._factors[m])
            else:
                self._eigen[m] = _eigen_from_dense(self.matrix(m), self.jitter)
        return self._eigen[m]


def assemble_gram(
    kernels: Sequence[SpectralKernel],
    samples: np.ndarray,
    jitter: float | None = None,
) -> GramSet:
    """Assemble the per-kernel Gram matrices for a product-design sample.

    ``samples`` has one row per observation and one column per kernel; kernel
    m sees only column m.  The result stores low-rank factors, so dense
    matrices are built only on demand.
    """
    if not kernels:
        raise ValueError("at least one kernel is required")
    pts = np.asarray(samples, dtype=float)
    if pts.ndim != 2:
        raise ValueError(f"samples must be 2-D (n, M), got shape {pts.shape}")
    if pts.shape[0] < 1:
        raise ValueError("at least one sample is required")
    if pts.shape[1] != len(kernels):
        raise ValueError(
            f"sample arity {pts.shape[1]} does not match the {len(kernels)} kernels"
        )
    _check_unit_interval(pts, "samples")
    factors = [kern.gram_factor(pts[:, m]) for m, kern in enumerate(kernels)]
    return GramSet(factors=factors, sample_points=pts, jitter=jitter)


def empirical_spectrum(gram_matrix: np.ndarray) -> np.ndarray:
    """Nonincreasing eigenvalues of (1/n) times one Gram matrix.

    As the sample grows these converge to the kernel's Mercer eigenvalues.
    Raises if the input is not symmetric positive semidefinite within
    tolerance.
    """
    mat = np.asarray(gram_matrix, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    asym = float(np.max(np.abs(mat - mat.T)))
    if asym > SYMMETRY_TOL:
        raise ValueError(f"matrix is not symmetric (max deviation {asym:.3g})")
    n = mat.shape[0]
    w = np.linalg.eigvalsh(mat)
    if w[0] < -PSD_TOL * max(w[-1], 0.0) and w[0] < -1e-14:
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3g})")
    return np.sort(w)[::-1] / n
