"""Kernel expansions, Gram assembly, spectra, and operator powers."""

import numpy as np
import pytest

from mklrate import (
    GramSet,
    SpectralKernel,
    apply_operator_power,
    assemble_gram,
    empirical_spectrum,
    evaluate_kernel,
    series_rkhs_norm_sq,
)

import oracles


@pytest.fixture(scope="module")
def kernel64():
    return SpectralKernel.power_law(0.5, num_terms=64)


def test_single_term_normalization_is_exact():
    kern = SpectralKernel.power_law(0.5, num_terms=1)
    assert kern.eigenvalues[0] == pytest.approx(0.5, abs=0.0)
    assert evaluate_kernel(kern, 0.0, 0.0) == pytest.approx(1.0, abs=1e-15)


def test_diagonal_nonnegative(kernel64):
    x = np.random.default_rng(1).random(50)
    diag = evaluate_kernel(kernel64, x, x)
    assert np.all(diag >= 0.0)


def test_symmetry_on_random_pairs(kernel64):
    rng = np.random.default_rng(2)
    a, b = rng.random(100), rng.random(100)
    np.testing.assert_allclose(
        evaluate_kernel(kernel64, a, b), evaluate_kernel(kernel64, b, a), rtol=0, atol=0
    )


def test_domain_error(kernel64):
    with pytest.raises(ValueError, match="domain"):
        evaluate_kernel(kernel64, 1.2, 0.5)
    with pytest.raises(ValueError, match="domain"):
        kernel64.feature_matrix(np.array([-0.1]))


def test_power_law_shape_and_sup_bound(kernel64):
    k = np.arange(1, 65)
    ratios = kernel64.eigenvalues / kernel64.eigenvalues[0]
    np.testing.assert_allclose(ratios, k**-2.0, rtol=1e-13)
    grid = np.linspace(0, 1, 20001)
    assert np.max(kernel64.diagonal(grid)) <= 1.0 + 1e-12


def test_kernel_validation():
    with pytest.raises(ValueError, match="s"):
        SpectralKernel.power_law(1.5)
    with pytest.raises(ValueError, match="nonincreasing"):
        SpectralKernel(s_exponent=0.5, eigenvalues=np.array([0.1, 0.2]))
    with pytest.raises(ValueError, match="positive"):
        SpectralKernel(s_exponent=0.5, eigenvalues=np.array([0.1, -0.2]))
    with pytest.raises(ValueError, match="basis"):
        SpectralKernel(s_exponent=0.5, eigenvalues=np.array([0.1]), basis_id="nope")


def test_assemble_single_sample(kernel64):
    gram = assemble_gram([kernel64], np.array([[0.3]]))
    mat = gram.matrix(0)
    assert mat.shape == (1, 1)
    assert mat[0, 0] <= 1.0 + 1e-10


def test_assemble_dimension_mismatch(kernel64):
    with pytest.raises(ValueError, match="arity"):
        assemble_gram([kernel64, kernel64], np.random.default_rng(0).random((4, 3)))


def test_assemble_duplicate_points_give_identical_rows(kernel64):
    x = np.random.default_rng(3).random((6, 2))
    x[4] = x[1]
    gram = assemble_gram([kernel64, kernel64], x)
    for m in range(2):
        np.testing.assert_allclose(gram.matrix(m)[1], gram.matrix(m)[4], atol=0)


def test_assembled_gram_psd_by_full_eigendecomposition():
    kern = SpectralKernel.power_law(0.5, num_terms=32)
    x = np.random.default_rng(4).random((32, 2))
    gram = assemble_gram([kern, kern], x)
    for m in range(2):
        mat = gram.matrix(m)
        np.testing.assert_allclose(mat, mat.T, atol=1e-10)
        w = np.linalg.eigvalsh(mat)
        assert w[0] >= -1e-8 * w[-1]
        assert np.max(np.diag(mat)) <= 1.0 + 1e-10


def test_empirical_spectrum_identity():
    n = 5
    spec = empirical_spectrum(n * np.eye(n))
    np.testing.assert_allclose(spec, np.ones(n), atol=1e-12)


def test_empirical_spectrum_rejects_nonsymmetric():
    mat = np.array([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ValueError, match="symmetric"):
        empirical_spectrum(mat)


def test_empirical_spectrum_rank_bounded_by_truncation():
    kern = SpectralKernel.power_law(0.5, num_terms=16)
    x = np.random.default_rng(5).random((40, 1))
    spec = empirical_spectrum(assemble_gram([kern], x).matrix(0))
    assert np.sum(spec > 1e-12 * spec[0]) <= 16


def test_mercer_consistency_top_eigenvalues(kernel64):
    # Monte Carlo consistency of the sample spectrum; seed documented.
    x = np.random.default_rng(7).random((512, 1))
    spec = empirical_spectrum(assemble_gram([kernel64], x).matrix(0))
    rel = np.abs(spec[:8] - kernel64.eigenvalues[:8]) / kernel64.eigenvalues[:8]
    assert np.max(rel) < 0.10


def test_operator_power_identity_and_full(kernel64):
    coeffs = np.array([1.0, -2.0, 3.0])
    np.testing.assert_allclose(apply_operator_power(kernel64, coeffs, 0.0), coeffs, atol=0)
    e1 = np.array([1.0, 0.0, 0.0])
    out = apply_operator_power(kernel64, e1, 1.0)
    np.testing.assert_allclose(out, [kernel64.eigenvalues[0], 0.0, 0.0], atol=0)


def test_operator_power_semigroup(kernel64):
    rng = np.random.default_rng(8)
    coeffs = rng.standard_normal(20)
    twice_half = apply_operator_power(
        kernel64, apply_operator_power(kernel64, coeffs, 0.5), 0.5
    )
    once = apply_operator_power(kernel64, coeffs, 1.0)
    np.testing.assert_allclose(twice_half, once, atol=1e-12)


def test_operator_power_contracts(kernel64):
    rng = np.random.default_rng(9)
    coeffs = rng.standard_normal(30)
    out = apply_operator_power(kernel64, coeffs, 0.7)
    assert np.all(np.abs(out) <= np.abs(coeffs) + 1e-15)


def test_operator_power_validation(kernel64):
    with pytest.raises(ValueError, match="beta"):
        apply_operator_power(kernel64, np.ones(3), 1.5)
    with pytest.raises(ValueError, match="exceeds"):
        apply_operator_power(kernel64, np.ones(65), 0.5)


def test_norm_identities_against_quadrature():
    kern = SpectralKernel.power_law(0.5, num_terms=6)
    rng = np.random.default_rng(10)
    coeffs = rng.standard_normal(6)
    grid = np.linspace(0.0, 1.0, 40001)
    phi = kern.feature_matrix(grid)
    f_vals = phi @ coeffs
    l2_sq = oracles.trapezoid_l2_sq(f_vals, grid)
    assert l2_sq == pytest.approx(float(coeffs @ coeffs), rel=1e-6)
    # RKHS norm identity via <f, T^{-1} f> evaluated by quadrature.
    g_vals = phi @ (coeffs / kern.eigenvalues)
    rkhs_sq = oracles.trapezoid_inner(f_vals, g_vals, grid)
    assert rkhs_sq == pytest.approx(series_rkhs_norm_sq(kern, coeffs), rel=1e-6)


def test_gramset_from_matrices_validation():
    with pytest.raises(ValueError, match="symmetric"):
        GramSet.from_matrices([np.array([[0.5, 0.3], [0.0, 0.5]])])
    with pytest.raises(ValueError, match="diagonal"):
        GramSet.from_matrices([2.0 * np.eye(2)])
    bad = np.array([[0.5, 0.9], [0.9, 0.5]])  # eigenvalues 1.4, -0.4
    with pytest.raises(ValueError, match="semidefinite"):
        GramSet.from_matrices([bad])


def test_gramset_factorization_reconstructs():
    rng = np.random.default_rng(11)
    mats = [oracles.random_psd_gram(rng, 8) for _ in range(2)]
    gram = GramSet.from_matrices(mats)
    for m in range(2):
        eig = gram.factorization(m)
        approx = eig.vectors @ (eig.eigenvalues[:, None] * eig.vectors.T)
        np.testing.assert_allclose(approx, mats[m], atol=1e-9)


def test_kernel_serialization_roundtrip(kernel64):
    clone = SpectralKernel.from_dict(kernel64.to_dict())
    np.testing.assert_allclose(clone.eigenvalues, kernel64.eigenvalues, atol=0)
    assert clone.s_exponent == kernel64.s_exponent
