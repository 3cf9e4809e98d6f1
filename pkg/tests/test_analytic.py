import numpy as np
import pytest
from pydantic import ValidationError

from app.core.errors import ConvergenceError, DomainError
from app.models.analytic import (
    BetaParams,
    beta_match,
    h0_beta_params,
    h0_cdf_beta,
    h0_cdf_exact_k2,
    h0_cdf_exact_k3,
    h0_moment,
    h0_moment_direct,
    h0_moments,
    h1_beta_params,
    h1_cdf_exact_k2,
    h1_moment,
    k2_series_coefficient,
    pd,
    pfa,
    roc_analytic,
    threshold_for_pfa,
)
from app.models.detectors import DetectorKind
from app.models.matrix import CovarianceModel
from app.models.schemas import CurveSource, Hypothesis, RocCurve


def test_h0_moments_two_sensors():
    """Test M1 and M2 for K=2, N=4 against Beta(3, 3/2)."""
    assert h0_moment(2, 4, 1) == pytest.approx(2.0 / 3.0, abs=1e-12)
    assert h0_moment(2, 4, 2) == pytest.approx(16.0 / 33.0, abs=1e-12)


def test_h0_moment_matches_direct_form():
    """Test the paired-ratio moments against the multivariate-gamma expression."""
    for n in range(1, 5):
        assert h0_moment(4, 20, n) == pytest.approx(h0_moment_direct(4, 20, n), rel=1e-10)


def test_h0_moment_sequence():
    """Test the moment sequence is validated and 1-indexed."""
    moments = h0_moments(4, 50)
    assert len(moments.values) == 4
    assert moments[1] == moments.values[0]
    assert moments.hypothesis is Hypothesis.H0
    with pytest.raises(DomainError):
        h0_moments(1, 50)
    with pytest.raises(DomainError):
        h0_moment(4, 3, 1)


def test_beta_match():
    """Test moment matching recovers Beta(3, 3/2)."""
    alpha, beta = beta_match(2.0 / 3.0, 16.0 / 33.0)
    assert alpha == pytest.approx(3.0)
    assert beta == pytest.approx(1.5)
    with pytest.raises(DomainError):
        beta_match(0.5, 0.2)
    with pytest.raises(DomainError):
        beta_match(1.2, 0.5)


@pytest.mark.parametrize("N", [2, 4, 10, 50, 400])
def test_h0_beta_params_exact_for_two_sensors(N):
    """Test K=2 matching gives (N-1, 3/2)."""
    params = h0_beta_params(2, N, round_params=False)
    assert params.alpha == pytest.approx(N - 1, abs=1e-9)
    assert params.beta == pytest.approx(1.5, abs=1e-9)


def test_h0_beta_params_four_sensors():
    """Test the tabulated α₀ values for K=4."""
    assert h0_beta_params(4, 400, round_params=False).alpha == pytest.approx(395.4, abs=0.05)
    assert h0_beta_params(4, 200, round_params=False).alpha == pytest.approx(195.4, abs=0.05)
    assert h0_beta_params(4, 100, round_params=False).alpha == pytest.approx(95.5, abs=0.05)


def test_beta_params_rounding():
    """Test rounding to integer parameters."""
    params = BetaParams(alpha=395.4, beta=4.6, hypothesis=Hypothesis.H0).rounded()
    assert (params.alpha, params.beta) == (395.0, 5.0)
    rounded = h0_beta_params(4, 100, round_params=True)
    assert rounded.alpha == float(round(rounded.alpha))
    with pytest.raises(ValidationError):
        BetaParams(alpha=-1.0, beta=1.0, hypothesis=Hypothesis.H0)


def test_h1_collapses_to_h0_for_spherical_covariance():
    """Test H1 formulas reduce to H0 when Σ = σ²I."""
    model = CovarianceModel.spherical(4, 2.5)
    for n in range(1, 5):
        assert h1_moment(model, 20, n) == pytest.approx(h0_moment(4, 20, n), rel=1e-12)
    p0, p1 = h0_beta_params(4, 20, False), h1_beta_params(model, 20, False)
    assert p1.alpha == pytest.approx(p0.alpha, rel=1e-12)
    assert p1.beta == pytest.approx(p0.beta, rel=1e-12)
    assert p1.hypothesis is Hypothesis.H1


def test_h1_mean_drops_with_signal():
    """Test a primary user pushes the ST mean down."""
    model = CovarianceModel.from_eigenvalues([4.0, 1.0, 1.0, 1.0])
    assert h1_beta_params(model, 50, False).mean < h0_beta_params(4, 50, False).mean


def test_beta_cdf_is_exact_for_two_sensors():
    """Test the Beta CDF equals the exact K=2 null CDF."""
    y = np.linspace(0.0, 1.0, 201)
    for N in (4, 10, 400):
        assert np.max(np.abs(h0_cdf_beta(y, 2, N, False) - h0_cdf_exact_k2(y, N))) < 1e-12


def test_exact_k3_null_cdf():
    """Test the K=3 series is a CDF close to its Beta approximation."""
    y = np.linspace(0.0, 1.0, 101)
    exact = h0_cdf_exact_k3(y, 10)
    assert exact[0] == pytest.approx(0.0, abs=1e-12)
    assert exact[-1] == pytest.approx(1.0, abs=1e-6)
    assert np.all(np.diff(exact) >= -1e-12)
    assert np.max(np.abs(exact - h0_cdf_beta(y, 3, 10, False))) < 0.02
    assert isinstance(h0_cdf_exact_k3(0.5, 10), float)


def test_exact_k3_small_n():
    """Test the K=3 series rejects N < 3 and reports slow convergence at N = 4."""
    with pytest.raises(DomainError):
        h0_cdf_exact_k3(0.5, 2)
    with pytest.raises(ConvergenceError):
        h0_cdf_exact_k3(0.5, 4)


def test_k2_series_coefficient():
    """Test the first coefficients of the K=2 H1 series."""
    assert k2_series_coefficient(5, 0).sign == 0
    # (3 - 2N - 2)_1 / 1! = 1 - 2N
    assert k2_series_coefficient(2, 1).value == pytest.approx(-3.0)
    # (3 - 2N - 4)_3 / 3! with N = 2: (-5)(-4)(-3)/6
    assert k2_series_coefficient(2, 2).value == pytest.approx(-10.0)


def test_exact_k2_h1_cdf():
    """Test the K=2 H1 CDF is a proper CDF above the null one."""
    y = np.linspace(0.0, 1.0, 101)
    G = h1_cdf_exact_k2(y, 3.0, 1.0, 10)
    assert G[0] == pytest.approx(0.0, abs=1e-8)
    assert G[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(G) >= -1e-10)
    assert np.all(G >= h0_cdf_exact_k2(y, 10) - 1e-10)


def test_exact_k2_h1_cdf_near_spherical():
    """Test equal eigenvalues fall back to the null law."""
    y = np.linspace(0.0, 1.0, 11)
    assert np.allclose(h1_cdf_exact_k2(y, 2.0, 2.0, 6), h0_cdf_exact_k2(y, 6))
    with pytest.raises(DomainError):
        h1_cdf_exact_k2(y, 1.0, 2.0, 6)


def test_threshold_and_pfa():
    """Test the threshold inverts the false-alarm probability."""
    zeta = threshold_for_pfa(0.5, 2, 2)
    assert zeta == pytest.approx(1 - 0.5 ** (2.0 / 3.0), rel=1e-10)
    zeta = threshold_for_pfa(0.01, 4, 100)
    assert pfa(zeta, 4, 100) == pytest.approx(0.01, rel=1e-9)


def test_threshold_rejects_bad_pfa():
    """Test pfa outside (0, 1) is rejected."""
    for p in (0.0, 1.0, -0.1):
        with pytest.raises(DomainError):
            threshold_for_pfa(p, 4, 100)


def test_pd_uses_exact_law_for_two_sensors():
    """Test pd matches the exact K=2 CDF."""
    model = CovarianceModel.from_eigenvalues([3.0, 1.0])
    assert pd(0.8, model, 10) == pytest.approx(h1_cdf_exact_k2(0.8, 3.0, 1.0, 10))


def test_roc_analytic():
    """Test the analytic ROC is monotone and above chance."""
    model = CovarianceModel.from_eigenvalues([4.0, 1.0, 1.0, 1.0])
    grid = np.linspace(0.01, 0.99, 50)
    curve = roc_analytic(model, 4, 50, grid)
    assert curve.detector is DetectorKind.ST
    assert curve.source is CurveSource.ANALYTIC
    assert np.all(np.diff(curve.pd) >= 0)
    assert np.all(curve.pd >= curve.pfa)
    assert curve.auc() > 0.9
    with pytest.raises(DomainError):
        roc_analytic(model, 4, 50, grid[::-1])
    with pytest.raises(DomainError):
        roc_analytic(model, 3, 50, grid)


def test_roc_pd_at_interpolates():
    """Test Pd at an arbitrary false-alarm level is read off the curve."""
    curve = RocCurve(detector=DetectorKind.ST, source=CurveSource.EMPIRICAL,
                     pfa=np.array([0.0, 0.5, 1.0]), pd=np.array([0.0, 0.8, 1.0]))
    assert curve.pd_at(0.25) == pytest.approx(0.4)
    assert curve.pd_at(0.75) == pytest.approx(0.9)
    model = CovarianceModel.from_eigenvalues([4.0, 1.0, 1.0, 1.0])
    analytic = roc_analytic(model, 4, 50, np.linspace(0.01, 0.99, 99))
    assert analytic.pd_at(0.1) == pytest.approx(pd(threshold_for_pfa(0.1, 4, 50), model, 50), abs=1e-9)
