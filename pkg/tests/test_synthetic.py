"""Ground-truth construction and the product-design sampling model."""

import math

import numpy as np
import pytest

from mklrate import (
    SpectralKernel,
    TruthModel,
    build_truth,
    evaluate_truth,
    mixed_norm,
    sample_data,
    series_rkhs_norm_sq,
)
from mklrate.synthetic import truth_rkhs_norms_sq


KERNEL = SpectralKernel.power_law(0.5, num_terms=64)


def test_active_count_bounds():
    with pytest.raises(ValueError, match="active count"):
        build_truth(4, 0, 0.0, 0.5, "homogeneous", kernel=KERNEL)
    truth = build_truth(4, 4, 0.0, 0.5, "homogeneous", kernel=KERNEL)
    assert truth.active_set == (0, 1, 2, 3)


def test_homogeneous_norm_profile():
    truth = build_truth(6, 3, 0.0, 0.5, "homogeneous", kernel=KERNEL)
    assert mixed_norm(truth, 2) == pytest.approx(math.sqrt(3), abs=1e-12)
    assert mixed_norm(truth, math.inf) == pytest.approx(1.0, abs=1e-12)
    for m in range(3):
        recomputed = math.sqrt(series_rkhs_norm_sq(KERNEL, truth.g_coefficients[m]))
        assert recomputed == pytest.approx(1.0, abs=1e-12)


def test_inhomogeneous_norm_profile():
    truth = build_truth(6, 3, 0.0, 0.5, "inhomogeneous", kernel=KERNEL)
    assert mixed_norm(truth, math.inf) == pytest.approx(1.0, abs=1e-12)
    assert mixed_norm(truth, 2) == pytest.approx(math.sqrt(1 + 1 / 4 + 1 / 9), abs=1e-12)
    for m in range(3):
        recomputed = math.sqrt(series_rkhs_norm_sq(KERNEL, truth.g_coefficients[m]))
        assert recomputed == pytest.approx(1.0 / (m + 1), abs=1e-12)


@pytest.mark.parametrize("q", [0.0, 0.5, 1.0])
def test_smoothing_links_f_to_g(q):
    truth = build_truth(4, 2, q, 0.5, "homogeneous", kernel=KERNEL)
    for m in range(2):
        expected = KERNEL.eigenvalues ** (q / 2) * truth.g_coefficients[m]
        np.testing.assert_allclose(truth.f_coefficients[m], expected, atol=0)
    # smoothing can only shrink the RKHS norm
    f_norms = truth_rkhs_norms_sq(truth, [KERNEL] * 4)
    for m in range(2):
        assert f_norms[m] <= series_rkhs_norm_sq(KERNEL, truth.g_coefficients[m]) + 1e-12


def test_inactive_components_exactly_zero():
    truth = build_truth(5, 2, 0.5, 0.5, "homogeneous", kernel=KERNEL)
    assert np.all(truth.g_coefficients[2:] == 0.0)
    assert np.all(truth.f_coefficients[2:] == 0.0)


def test_smoothness_ordering_in_q():
    norms, tails = [], []
    for q in (0.0, 0.5, 1.0):
        truth = build_truth(2, 1, q, 0.5, "homogeneous", kernel=KERNEL)
        norms.append(truth_rkhs_norms_sq(truth, [KERNEL] * 2)[0])
        tails.append(float(np.sum(truth.f_coefficients[0][32:] ** 2)))
    assert norms[0] >= norms[1] >= norms[2]
    assert tails[0] >= tails[1] >= tails[2]


def test_noiseless_labels_reproduce_exactly():
    truth = build_truth(3, 2, 0.0, 0.5, "homogeneous", kernel=KERNEL, noise_bound=0.0)
    kernels = [KERNEL] * 3
    sample = sample_data(truth, kernels, 50, seed=21)
    signal = evaluate_truth(truth, kernels, sample.inputs)
    np.testing.assert_allclose(sample.labels, signal, atol=1e-12)
    assert np.all(sample.noise == 0.0)


def test_noise_respects_bound_and_labels_reproduce():
    truth = build_truth(3, 2, 0.0, 0.5, "homogeneous", kernel=KERNEL, noise_bound=0.3)
    kernels = [KERNEL] * 3
    sample = sample_data(truth, kernels, 200, seed=22)
    assert np.max(np.abs(sample.noise)) <= 0.3
    signal = evaluate_truth(truth, kernels, sample.inputs)
    np.testing.assert_allclose(sample.labels, signal + sample.noise, atol=1e-12)


def test_label_mean_is_centered():
    # the truth is centered, so the label mean concentrates at 0
    truth = build_truth(1, 1, 0.0, 0.5, "homogeneous", kernel=KERNEL)
    sample = sample_data(truth, [KERNEL], 10_000, seed=23)
    sd = np.std(sample.labels)
    assert abs(np.mean(sample.labels)) <= 4 * sd / math.sqrt(10_000)


def test_sampling_is_deterministic():
    truth = build_truth(2, 1, 0.0, 0.5, "homogeneous", kernel=KERNEL)
    a = sample_data(truth, [KERNEL] * 2, 64, seed=77)
    b = sample_data(truth, [KERNEL] * 2, 64, seed=77)
    assert np.array_equal(a.inputs, b.inputs)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.noise, b.noise)


def test_sample_validation():
    truth = build_truth(2, 1, 0.0, 0.5, "homogeneous", kernel=KERNEL)
    with pytest.raises(ValueError, match="n must be positive"):
        sample_data(truth, [KERNEL] * 2, 0)
    with pytest.raises(ValueError, match="noise_kind"):
        sample_data(truth, [KERNEL] * 2, 4, noise_kind="gaussian")
    with pytest.raises(ValueError, match="kernels"):
        sample_data(truth, [KERNEL], 4)


def test_evaluate_zero_truth():
    truth = TruthModel(
        num_kernels=2,
        active_count=1,
        q=0.0,
        profile="homogeneous",
        noise_bound=0.0,
        g_coefficients=np.zeros((2, 64)),
        f_coefficients=np.zeros((2, 64)),
        g_rkhs_norms=np.zeros(2),
    )
    x = np.random.default_rng(1).random((10, 2))
    assert np.all(evaluate_truth(truth, [KERNEL] * 2, x) == 0.0)


def test_evaluate_single_term_analytic():
    b = 0.7
    q = 1.0
    g = np.zeros((1, 64))
    g[0, 0] = b
    f = np.zeros((1, 64))
    f[0, 0] = KERNEL.eigenvalues[0] ** (q / 2) * b
    truth = TruthModel(
        num_kernels=1,
        active_count=1,
        q=q,
        profile="homogeneous",
        noise_bound=0.0,
        g_coefficients=g,
        f_coefficients=f,
        g_rkhs_norms=np.array([math.sqrt(b**2 / KERNEL.eigenvalues[0])]),
    )
    x = 0.31
    expected = KERNEL.eigenvalues[0] ** 0.5 * b * math.sqrt(2) * math.cos(math.pi * x)
    assert evaluate_truth(truth, [KERNEL], np.array([x])) == pytest.approx(expected, rel=1e-14)


def test_evaluate_truth_domain_error():
    truth = build_truth(2, 1, 0.0, 0.5, "homogeneous", kernel=KERNEL)
    with pytest.raises(ValueError, match="domain"):
        evaluate_truth(truth, [KERNEL] * 2, np.array([0.5, 1.5]))


def test_truth_squared_integral_matches_coefficients():
    # tensor-grid quadrature of the squared truth over [0,1]^2
    truth = build_truth(2, 2, 0.0, 0.5, "homogeneous", kernel=KERNEL)
    kernels = [KERNEL] * 2
    grid = np.linspace(0.0, 1.0, 801)
    xx, yy = np.meshgrid(grid, grid, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    vals = evaluate_truth(truth, kernels, pts).reshape(len(grid), len(grid))
    integral = np.trapezoid(np.trapezoid(vals**2, grid, axis=1), grid, axis=0)
    expected = float(np.sum(truth.f_coefficients**2))
    assert integral == pytest.approx(expected, rel=2e-3)


def test_parseval_against_monte_carlo():
    truth = build_truth(2, 2, 0.5, 0.5, "homogeneous", kernel=KERNEL)
    rng = np.random.default_rng(31)
    x = rng.random(100_000)
    for m in range(2):
        vals = KERNEL.feature_matrix(x) @ truth.f_coefficients[m]
        sq = vals**2
        mc, se = float(np.mean(sq)), float(np.std(sq, ddof=1) / math.sqrt(len(sq)))
        exact = float(np.sum(truth.f_coefficients[m] ** 2))
        assert abs(mc - exact) <= 3 * se


def test_cross_component_empirical_orthogonality():
    truth = build_truth(2, 2, 0.0, 0.5, "homogeneous", kernel=KERNEL)
    kernels = [KERNEL] * 2
    sample = sample_data(truth, kernels, 10_000, seed=41)
    f0 = kernels[0].feature_matrix(sample.inputs[:, 0]) @ truth.f_coefficients[0]
    f1 = kernels[1].feature_matrix(sample.inputs[:, 1]) @ truth.f_coefficients[1]
    inner = abs(float(np.mean(f0 * f1)))
    norms = math.sqrt(float(np.mean(f0**2)) * float(np.mean(f1**2)))
    assert inner <= 4 / math.sqrt(10_000) * norms


def test_truth_and_sample_serialization_roundtrip():
    truth = build_truth(3, 2, 0.5, 0.5, "inhomogeneous", kernel=KERNEL, seed=9)
    clone = TruthModel.from_dict(truth.to_dict())
    np.testing.assert_allclose(clone.f_coefficients, truth.f_coefficients, atol=0)
    assert clone.profile == truth.profile and clone.seed == truth.seed

    sample = sample_data(truth, [KERNEL] * 3, 16, seed=5)
    from mklrate import RegressionSample

    back = RegressionSample.from_dict(sample.to_dict())
    np.testing.assert_allclose(back.labels, sample.labels, atol=0)
    np.testing.assert_allclose(back.inputs, sample.inputs, atol=0)
