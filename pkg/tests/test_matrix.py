import numpy as np
import pytest

from app.core.errors import DomainError
from app.models.matrix import (
    ChannelMode,
    CovarianceModel,
    build_covariance,
    db_to_linear,
    hermitian_eigenvalues,
    hermitian_eigh,
    sample_covariance_matrix,
    sample_standard_complex_gaussian,
)


def test_db_to_linear():
    """Test dB conversion, including silent users."""
    assert db_to_linear(10.0) == pytest.approx(10.0)
    assert db_to_linear(-3.0) == pytest.approx(0.501187, rel=1e-5)
    assert db_to_linear(-np.inf) == 0.0


def test_complex_gaussian_moments():
    """Test CN(0, 1) entries have unit power and circular symmetry."""
    rng = np.random.default_rng(1)
    G = sample_standard_complex_gaussian(2, 3, rng, size=20000)
    assert G.shape == (20000, 2, 3)
    assert G.dtype == np.complex128
    assert np.mean(np.abs(G) ** 2) == pytest.approx(1.0, abs=0.02)
    assert abs(np.mean(G ** 2)) < 0.02


def test_complex_gaussian_prefix_stable():
    """Test leading-axis entries do not depend on the batch length."""
    short = sample_standard_complex_gaussian(3, 4, np.random.default_rng(7), size=10)
    long = sample_standard_complex_gaussian(3, 4, np.random.default_rng(7), size=25)
    assert np.array_equal(short, long[:10])


def test_hermitian_eigenvalues_descending():
    """Test eigenvalues come back in descending order."""
    A = np.array([[2.0, 1j], [-1j, 2.0]])
    assert np.allclose(hermitian_eigenvalues(A), [3.0, 1.0])
    w, Q = hermitian_eigh(A)
    assert np.allclose(w, [3.0, 1.0])
    assert np.allclose(Q @ np.diag(w) @ Q.conj().T, A)


def test_hermitian_eigenvalues_rejects_non_hermitian():
    """Test the Hermitian check."""
    with pytest.raises(DomainError):
        hermitian_eigenvalues(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(DomainError):
        hermitian_eigenvalues(np.ones((2, 3)))


def test_spherical_model():
    """Test the noise-only covariance."""
    model = CovarianceModel.spherical(3, 2.0)
    assert model.P == 0
    assert np.allclose(model.sigma_eigs, 2.0)
    assert np.allclose(model.covariance, 2.0 * np.eye(3))


def test_model_from_eigenvalues():
    """Test a diagonal covariance built from its spectrum."""
    model = CovarianceModel.from_eigenvalues([1.0, 3.0])
    assert model.sigma2 == 1.0
    assert model.P == 1
    assert np.allclose(model.sigma_eigs, [3.0, 1.0])
    assert np.allclose(model.snrs, [2.0])
    with pytest.raises(DomainError):
        CovarianceModel.from_eigenvalues([1.0, 2.0], sigma2=1.5)


def test_build_covariance_eigenvalues():
    """Test one unit-norm user at 0 dB lifts a single eigenvalue to 2σ²."""
    model = build_covariance(4, 1.0, [0.0], np.random.default_rng(3))
    assert np.allclose(np.linalg.norm(model.channels, axis=0), 1.0)
    assert np.allclose(model.sigma_eigs, [2.0, 1.0, 1.0, 1.0])
    assert np.allclose(model.shape_sqrt @ model.shape_sqrt, model.shape)


def test_orthogonal_channels_fix_the_spectrum():
    """Test orthonormal channels give eigenvalues σ²(1 + snrᵢ) for every draw."""
    for seed in (1, 2, 3):
        model = build_covariance(4, 2.0, [-1.0, -3.0], np.random.default_rng(seed), ChannelMode.ORTHOGONAL)
        assert np.allclose(model.channels.conj().T @ model.channels, np.eye(2), atol=1e-12)
        expected = 2.0 * np.array([1 + db_to_linear(-1.0), 1 + db_to_linear(-3.0), 1.0, 1.0])
        assert np.allclose(model.sigma_eigs, expected, rtol=1e-12)


def test_rayleigh_channels_overlap():
    """Test independent channels generally do not give the orthogonal spectrum."""
    model = build_covariance(4, 1.0, [0.0, 0.0], np.random.default_rng(4))
    assert not np.allclose(model.sigma_eigs, [2.0, 2.0, 1.0, 1.0])
    assert model.sigma_eigs.sum() == pytest.approx(6.0)


def test_orthogonal_channels_need_room():
    """Test more users than sensors is rejected in orthogonal mode."""
    with pytest.raises(DomainError):
        build_covariance(2, 1.0, [0.0, 0.0, 0.0], np.random.default_rng(3), ChannelMode.ORTHOGONAL)
    assert build_covariance(2, 1.0, [0.0, 0.0, 0.0], np.random.default_rng(3)).K == 2


def test_build_covariance_rejects_bad_noise():
    """Test noise power must be positive."""
    with pytest.raises(DomainError):
        build_covariance(4, 0.0, [0.0], np.random.default_rng(3))


def test_with_noise_power_keeps_channels():
    """Test rescaling the noise keeps channels and SNRs."""
    model = build_covariance(4, 1.0, [0.0, -3.0], np.random.default_rng(5))
    scaled = model.with_noise_power(0.5)
    assert np.array_equal(scaled.channels, model.channels)
    assert np.allclose(scaled.sigma_eigs, 0.5 * model.sigma_eigs)


def test_sample_covariance_mean():
    """Test E[R] = NΣ over many draws."""
    model = CovarianceModel.from_eigenvalues([3.0, 1.0])
    R = sample_covariance_matrix(model, 5, np.random.default_rng(11), size=20000)
    assert R.shape == (20000, 2, 2)
    assert np.allclose(R, np.conj(np.swapaxes(R, -1, -2)))
    mean = R.mean(axis=0) / 5
    assert np.allclose(mean, np.diag([3.0, 1.0]), atol=0.1)
