"""Sparse additive ground truths and the product-design sampling model.

Targets are built directly in basis coefficients: each active component gets
a fixed coefficient shape with alternating signs, rescaled to hit an exact
RKHS norm target, then smoothed by a fractional operator power.  Inputs are
uniform on the unit cube with independent coordinates and the noise is
bounded, so labels, norms, and population errors are all reproducible
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .kernels import SpectralKernel, apply_operator_power, series_rkhs_norm_sq

PROFILES = ("homogeneous", "inhomogeneous")
NOISE_KINDS = ("uniform", "rademacher")


@dataclass(frozen=True, eq=False)
class TruthModel:
    """Sparse additive ground truth over M coordinates.

    ``g_coefficients`` holds the pre-smoothing basis coefficients, one row
    per component, and ``f_coefficients`` the post-smoothing ones (the rows
    of inactive components are exactly zero).  ``g_rkhs_norms`` records the
    exact per-component RKHS norm targets: all ones for the homogeneous
    profile, ``1/rank`` for the inhomogeneous one.
    """

    num_kernels: int
    active_count: int
    q: float
    profile: str
    noise_bound: float
    g_coefficients: np.ndarray
    f_coefficients: np.ndarray
    g_rkhs_norms: np.ndarray
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("g_coefficients", "f_coefficients", "g_rkhs_norms"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.g_coefficients.shape != self.f_coefficients.shape:
            raise ValueError("g and f coefficient arrays must have equal shapes")
        if self.g_coefficients.shape[0] != self.num_kernels:
            raise ValueError("coefficient arrays must have one row per kernel")

    @property
    def active_set(self) -> tuple[int, ...]:
        return tuple(range(self.active_count))

    @property
    def num_terms(self) -> int:
        return int(self.g_coefficients.shape[1])

    def component_l2_norms_sq(self) -> np.ndarray:
        """Exact squared L2 norms of the smoothed components."""
        return np.sum(self.f_coefficients**2, axis=1)

    def to_dict(self) -> dict:
        return {
            "num_kernels": self.num_kernels,
            "active_count": self.active_count,
            "q": self.q,
            "profile": self.profile,
            "noise_bound": self.noise_bound,
            "g_coefficients": self.g_coefficients.tolist(),
            "f_coefficients": self.f_coefficients.tolist(),
            "g_rkhs_norms": self.g_rkhs_norms.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "TruthModel":
        return cls(
            num_kernels=int(payload["num_kernels"]),
            active_count=int(payload["active_count"]),
            q=float(payload["q"]),
            profile=str(payload["profile"]),
            noise_bound=float(payload["noise_bound"]),
            g_coefficients=np.asarray(payload["g_coefficients"], dtype=float),
            f_coefficients=np.asarray(payload["f_coefficients"], dtype=float),
            g_rkhs_norms=np.asarray(payload["g_rkhs_norms"], dtype=float),
            seed=int(payload["seed"]),
        )


@dataclass(frozen=True, eq=False)
class RegressionSample:
    """One labeled sample from the product-design regression model."""

    inputs: np.ndarray
    labels: np.ndarray
    noise: np.ndarray
    noise_bound: float
    noise_kind: str
    seed: int

    def __post_init__(self) -> None:
        for name in ("inputs", "labels", "noise"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.inputs.ndim != 2:
            raise ValueError("inputs must be 2-D (n, M)")
        n = self.inputs.shape[0]
        if self.labels.shape != (n,) or self.noise.shape != (n,):
            raise ValueError("labels and noise must be length-n vectors")
        if self.noise.size and np.max(np.abs(self.noise)) > self.noise_bound + 1e-15:
            raise ValueError("noise exceeds the configured bound")

    @property
    def num_samples(self) -> int:
        return int(self.inputs.shape[0])

    def to_dict(self) -> dict:
        return {
            "inputs": self.inputs.tolist(),
            "labels": self.labels.tolist(),
            "noise": self.noise.tolist(),
            "noise_bound": self.noise_bound,
            "noise_kind": self.noise_kind,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RegressionSample":
        return cls(
            inputs=np.asarray(payload["inputs"], dtype=float),
            labels=np.asarray(payload["labels"], dtype=float),
            noise=np.asarray(payload["noise"], dtype=float),
            noise_bound=float(payload["noise_bound"]),
            noise_kind=str(payload["noise_kind"]),
            seed=int(payload["seed"]),
        )


def build_truth(
    M: int,
    d: int,
    q: float,
    s: float,
    profile: str,
    seed: int = 0,
    *,
    kernel: SpectralKernel | None = None,
    num_terms: int = 128,
    noise_bound: float = 0.1,
) -> TruthModel:
    """Construct a sparse truth with exact norm profile on components 0..d-1.

    The coefficient shape is ``sign_k * sqrt(mu_k) / k`` with alternating
    signs, which keeps every component strictly inside its RKHS with a
    summable tail; it is then rescaled so the pre-smoothing RKHS norm equals
    1 (homogeneous) or 1/rank (inhomogeneous) exactly.  Construction is
    deterministic; ``seed`` is only recorded for provenance.
    """
    if d < 1 or d > M:
        raise ValueError(f"active count d = {d} must satisfy 1 <= d <= M = {M}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    if profile not in PROFILES:
        raise ValueError(f"profile must be one of {PROFILES}, got {profile!r}")
    if noise_bound < 0.0:
        raise ValueError(f"noise_bound must be nonnegative, got {noise_bound}")
    if kernel is None:
        kernel = SpectralKernel.power_law(s, num_terms=num_terms)
    K = kernel.num_terms
    k = np.arange(1, K + 1, dtype=float)
    signs = np.where(k % 2 == 1, 1.0, -1.0)
    shape = signs * np.sqrt(kernel.eigenvalues) / k
    # RKHS norm of the shape is sqrt(sum k^-2) independently of the spectrum.
    shape_norm = np.sqrt(np.sum(1.0 / k**2))
    g = np.zeros((M, K))
    f = np.zeros((M, K))
    norms = np.zeros(M)
    for m in range(d):
        target = 1.0 if profile == "homogeneous" else 1.0 / (m + 1)
        g[m] = shape * (target / shape_norm)
        f[m] = apply_operator_power(kernel, g[m], q / 2.0)
        norms[m] = target
    return TruthModel(
        num_kernels=M,
        active_count=d,
        q=q,
        profile=profile,
        noise_bound=noise_bound,
        g_coefficients=g,
        f_coefficients=f,
        g_rkhs_norms=norms,
        seed=seed,
    )


def _check_kernels(truth: TruthModel, kernels: Sequence[SpectralKernel]) -> None:
    if len(kernels) != truth.num_kernels:
        raise ValueError(
            f"expected {truth.num_kernels} kernels, got {len(kernels)}"
        )
    for m, kern in enumerate(kernels):
        if kern.num_terms < truth.num_terms:
            raise ValueError(
                f"kernel {m} has {kern.num_terms} terms but the truth uses "
                f"{truth.num_terms}"
            )


def evaluate_truth(truth: TruthModel, kernels: Sequence[SpectralKernel], x):
    """Evaluate the additive truth at one or many points in [0, 1]^M.

    Accepts a length-M point or an (n, M) array; returns a float or a length-n
    vector accordingly.
    """
    _check_kernels(truth, kernels)
    pts = np.asarray(x, dtype=float)
    scalar = pts.ndim == 1
    if scalar:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != truth.num_kernels:
        raise ValueError(f"points must have {truth.num_kernels} coordinates")
    if pts.size and (pts.min() < 0.0 or pts.max() > 1.0):
        raise ValueError("point outside the domain [0, 1]^M")
    values = np.zeros(pts.shape[0])
    for m in truth.active_set:
        phi = kernels[m].feature_matrix(pts[:, m])
        values += phi[:, : truth.num_terms] @ truth.f_coefficients[m]
    return float(values[0]) if scalar else values


def sample_data(
    truth: TruthModel,
    kernels: Sequence[SpectralKernel],
    n: int,
    noise_kind: str = "uniform",
    seed: int = 0,
) -> RegressionSample:
    """Draw n labeled observations: uniform product inputs plus bounded noise.

    The generator draws inputs first and noise second from a single stream,
    so identical seeds give bitwise-identical samples.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if noise_kind not in NOISE_KINDS:
        raise ValueError(f"noise_kind must be one of {NOISE_KINDS}, got {noise_kind!r}")
    _check_kernels(truth, kernels)
    rng = np.random.default_rng(seed)
    inputs = rng.random((n, truth.num_kernels))
    bound = truth.noise_bound
    if bound == 0.0:
        noise = np.zeros(n)
    elif noise_kind == "uniform":
        noise = rng.uniform(-bound, bound, size=n)
    else:
        noise = bound * rng.choice([-1.0, 1.0], size=n)
    signal = evaluate_truth(truth, kernels, inputs)
    return RegressionSample(
        inputs=inputs,
        labels=signal + noise,
        noise=noise,
        noise_bound=bound,
        noise_kind=noise_kind,
        seed=seed,
    )


def truth_rkhs_norms_sq(truth: TruthModel, kernels: Sequence[SpectralKernel]) -> np.ndarray:
    """Recompute the squared RKHS norms of the smoothed components."""
    _check_kernels(truth, kernels)
    return np.array(
        [
            series_rkhs_norm_sq(kernels[m], truth.f_coefficients[m])
            for m in range(truth.num_kernels)
        ]
    )
