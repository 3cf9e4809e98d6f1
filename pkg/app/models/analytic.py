"""Closed-form performance of the spherical test.

Moments of T_ST under both hypotheses, two-moment Beta matching, the exact
null laws for K = 2 and K = 3, the exact K = 2 law under a correlated
covariance, and the derived false-alarm/detection probabilities, thresholds
and ROC.

Moments are evaluated as products of paired ratios rather than as raw
gamma-function ratios. Pairing the numerator and denominator factors keeps every
ratio close to one, so the H0 and H1 paths share one code path and the Beta
parameters stay accurate to ~1e-11 even when N is in the hundreds.
"""
import logging
import math
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy import special as sp

from app.core.config import settings
from app.core.errors import ConvergenceError, DomainError
from app.models.detectors import DetectorKind
from app.models.matrix import CovarianceModel
from app.models.schemas import CurveSource, Hypothesis, RocCurve
from app.models.special import (
    SignedLogValue,
    inverse_regularized_incomplete_beta,
    log_gamma,
    multivariate_log_gamma,
    pochhammer_signed,
    regularized_incomplete_beta,
)

logger = logging.getLogger(__name__)

MAX_MOMENT_ORDER = 4
_SERIES_CHUNK = 256


class BetaParams(BaseModel):
    """Parameters of a moment-matched Beta law."""
    model_config = ConfigDict(frozen=True)

    alpha: float
    beta: float
    hypothesis: Hypothesis

    @field_validator("alpha", "beta")
    @classmethod
    def _positive_finite(cls, v: float) -> float:
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"Beta parameters must be finite and positive, got {v}")
        return v

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    def cdf(self, y):
        return regularized_incomplete_beta(y, self.alpha, self.beta)

    def ppf(self, p):
        return inverse_regularized_incomplete_beta(p, self.alpha, self.beta)

    def rounded(self) -> "BetaParams":
        """Nearest-integer parameters, which turn the CDF into a polynomial."""
        return BetaParams(
            alpha=float(max(1, round(self.alpha))),
            beta=float(max(1, round(self.beta))),
            hypothesis=self.hypothesis,
        )


class MomentSequence(BaseModel):
    """Moments E[T_ST^n] for n = 1, 2, ... of a [0, 1]-supported statistic."""
    values: List[float]
    hypothesis: Hypothesis

    @model_validator(mode="after")
    def _check_sequence(self):
        v = self.values
        if any(not (0 < x <= 1) for x in v):
            raise ValueError("Moments must lie in (0, 1]")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("Moments must be strictly decreasing")
        if len(v) >= 2 and not v[1] > v[0] ** 2:
            raise ValueError("Second moment must exceed the squared mean")
        return self

    def __getitem__(self, n: int) -> float:
        """1-based access, M[1] is the mean."""
        return self.values[n - 1]


# --- moments --------------------------------------------------------------

def _trace_fit(sigma: np.ndarray) -> Tuple[float, float]:
    """Gamma fit of tr(R): returns (c, b) with a = (N+n)c and scale b."""
    s1 = math.fsum(sigma)
    s2 = math.fsum(sigma * sigma)
    return s1 * s1 / s2, s2 / s1


def _log_moment(sigma: np.ndarray, N: int, n: int) -> float:
    """ln N_n = ln[(K/b)^{Kn} Γ(a−Kn) Γ_K(N+n) det(Σ)^n / (Γ_K(N) Γ(a))].

    Γ_K(N+n)/Γ_K(N) and Γ(a−Kn)/Γ(a) are expanded into Kn factors each and
    paired one-to-one, so no gamma function is ever evaluated. Each pair enters
    as log1p(difference/denominator); under H0 both are exact integers.
    """
    K = sigma.size
    if n < 1:
        raise DomainError(f"Moment order must be at least 1, got {n}")
    if N < K:
        raise DomainError(f"Moments require N >= K, got K={K}, N={N}")
    sigma = sigma / sigma.max()
    c, b = _trace_fit(sigma)
    shifted = (N + n) * c - K * n
    if shifted <= 0:
        raise DomainError(f"Gamma fit undefined: a - Kn = {shifted} <= 0")
    terms = []
    for j in range(K):
        for i in range(n):
            denominator = b * (shifted + j * n + i)
            terms.append(math.log1p((K * sigma[j] * (N - j + i) - denominator) / denominator))
    return math.fsum(terms)


def _log_dispersion(sigma: np.ndarray, N: int) -> float:
    """ln(N_2/N_1²).

    The ratio factorises into K terms (1 + w_j); each w_j is formed as one
    rational expression so that the near-cancellation between the numerator
    and denominator gamma factors happens in exact arithmetic under H0.
    """
    K = sigma.size
    sigma = sigma / sigma.max()
    c, _ = _trace_fit(sigma)
    base = (N + 1) * c - K
    if base + c - K <= 0 or N < K:
        raise DomainError(f"Gamma fit undefined for K={K}, N={N}")
    terms = []
    for j in range(K):
        B = base + j
        remaining = N - j
        numerator = B * (B - remaining * (2 * c - K)) - remaining * c * (c - K)
        denominator = remaining * (B + c - K) * (B + c)
        terms.append(math.log1p(numerator / denominator))
    return math.fsum(terms)


def _spherical(K: int) -> np.ndarray:
    if K < 1:
        raise DomainError(f"K must be at least 1, got {K}")
    return np.ones(K)


def h0_moment(K: int, N: int, n: int) -> float:
    """n-th moment of T_ST under H0 (white Wishart)."""
    return math.exp(_log_moment(_spherical(K), N, n))


def h0_moment_direct(K: int, N: int, n: int) -> float:
    """Same moment through the literal multivariate-gamma expression."""
    if N < K:
        raise DomainError(f"Moments require N >= K, got K={K}, N={N}")
    log_m = (
        log_gamma(K * N)
        - multivariate_log_gamma(K, N)
        + K * n * math.log(K)
        + multivariate_log_gamma(K, N + n)
        - log_gamma(K * (N + n))
    )
    return math.exp(log_m)


def h1_moment(model: CovarianceModel, N: int, n: int) -> float:
    """n-th moment of T_ST under H1 via the Gamma fit of the trace; a is recomputed per n."""
    return math.exp(_log_moment(np.asarray(model.sigma_eigs, dtype=float), N, n))


def h0_moments(K: int, N: int, orders: int = MAX_MOMENT_ORDER) -> MomentSequence:
    if K < 2:
        raise DomainError("T_ST is degenerate for K = 1")
    return MomentSequence(values=[h0_moment(K, N, n) for n in range(1, orders + 1)], hypothesis=Hypothesis.H0)


def h1_moments(model: CovarianceModel, N: int, orders: int = MAX_MOMENT_ORDER) -> MomentSequence:
    if model.K < 2:
        raise DomainError("T_ST is degenerate for K = 1")
    return MomentSequence(values=[h1_moment(model, N, n) for n in range(1, orders + 1)], hypothesis=Hypothesis.H1)


# --- Beta matching ----------------------------------------------------------

def _beta_from_dispersion(log_m1: float, dispersion: float, hypothesis: Hypothesis) -> BetaParams:
    """Solve for (α, β) given ln M1 and v = M2/M1² − 1."""
    m1 = math.exp(log_m1)
    one_minus = -math.expm1(log_m1)
    if not (0 < m1 < 1) or not dispersion > 0:
        raise DomainError(f"Beta matching needs 0 < M1 < 1 and positive variance, got M1={m1}, v={dispersion}")
    total = one_minus / (m1 * dispersion) - 1.0
    if not total > 0:
        raise DomainError(f"Beta matching needs M2 < M1, got M1={m1}, v={dispersion}")
    return BetaParams(alpha=m1 * total, beta=one_minus * total, hypothesis=hypothesis)


def beta_match(M1: float, M2: float, hypothesis: Hypothesis = Hypothesis.H0) -> Tuple[float, float]:
    """(α, β) of the Beta law with mean M1 and second moment M2."""
    if not 0 < M1 < 1:
        raise DomainError(f"M1 must lie in (0, 1), got {M1}")
    if not M1 * M1 < M2 < M1:
        raise DomainError(f"Need M1² < M2 < M1, got M1={M1}, M2={M2}")
    params = _beta_from_dispersion(math.log(M1), M2 / (M1 * M1) - 1.0, hypothesis)
    return params.alpha, params.beta


def _maybe_round(params: BetaParams, round_params: Optional[bool]) -> BetaParams:
    if round_params is None:
        round_params = settings.ROUND_BETA_PARAMS
    return params.rounded() if round_params else params


def _beta_params(sigma: np.ndarray, N: int, hypothesis: Hypothesis, round_params: Optional[bool]) -> BetaParams:
    if sigma.size < 2:
        raise DomainError("T_ST is degenerate for K = 1")
    log_m1 = _log_moment(sigma, N, 1)
    dispersion = math.expm1(_log_dispersion(sigma, N))
    return _maybe_round(_beta_from_dispersion(log_m1, dispersion, hypothesis), round_params)


def h0_beta_params(K: int, N: int, round_params: Optional[bool] = None) -> BetaParams:
    """(α₀, β₀) of the Beta approximation to the null law of T_ST."""
    return _beta_params(_spherical(K), N, Hypothesis.H0, round_params)


def h1_beta_params(model: CovarianceModel, N: int, round_params: Optional[bool] = None) -> BetaParams:
    """(α₁, β₁) of the Beta approximation to the law of T_ST under model."""
    return _beta_params(np.asarray(model.sigma_eigs, dtype=float), N, Hypothesis.H1, round_params)


# --- CDFs ---------------------------------------------------------------------

def h0_cdf_beta(y, K: int, N: int, round_params: Optional[bool] = None):
    """Beta approximation to the CDF of T_ST under H0."""
    return h0_beta_params(K, N, round_params).cdf(y)


def h1_cdf_beta(y, model: CovarianceModel, N: int, round_params: Optional[bool] = None):
    """Beta approximation to the CDF of T_ST under H1."""
    return h1_beta_params(model, N, round_params).cdf(y)


def h0_cdf_exact_k2(y, N: int):
    """Exact null CDF for two sensors: T_ST ~ Beta(N−1, 3/2)."""
    if N < 2:
        raise DomainError(f"K = 2 null law requires N >= 2, got {N}")
    return regularized_incomplete_beta(y, N - 1, 1.5)


def _scalar_or_array(values: np.ndarray, like):
    return float(values[0]) if np.ndim(like) == 0 else values.reshape(np.shape(like))


def _sum_series(log_weight, first, evaluate, y: np.ndarray, rel_tol: float, max_terms: int, label: str) -> np.ndarray:
    """Accumulate Σ_k w_k f_k(y) for positive, eventually decreasing weights.

    ``log_weight(ks)`` returns ln w_k for an array of indices; ``evaluate(ks, y)``
    returns f_k(y) with shape (len(ks), len(y)). Summation stops at the first k past
    the peak whose weight is below rel_tol times the accumulated weight.
    """
    total = np.zeros_like(y)
    mass = 0.0
    previous = np.inf
    start = first
    while start < first + max_terms:
        ks = np.arange(start, min(start + _SERIES_CHUNK, first + max_terms))
        weights = np.exp(log_weight(ks))
        running = mass + np.cumsum(weights)
        before = np.concatenate(([previous], weights[:-1]))
        done = np.flatnonzero((weights < before) & (weights < rel_tol * running))
        stop = done[0] + 1 if done.size else ks.size
        total += weights[:stop] @ evaluate(ks[:stop], y)
        mass = running[stop - 1]
        previous = weights[stop - 1]
        if done.size:
            logger.debug(f"{label}: converged after {ks[stop - 1] - first + 1} terms")
            return total
        start = ks[-1] + 1
    raise ConvergenceError(f"{label}: series did not reach relative tolerance {rel_tol} within {max_terms} terms")


def h0_cdf_exact_k3(y, N: int):
    """Exact null CDF for three sensors, as a series of incomplete Beta functions.

    Terms decay only like k^{−(N−1)}; for N <= 4 the series cannot reach its
    tolerance within the term cap and a ConvergenceError is raised.
    """
    if N < 3:
        raise DomainError(f"K = 3 null law requires N >= 3, got {N}")
    yy = np.clip(np.atleast_1d(np.asarray(y, dtype=float)).ravel(), 0.0, 1.0)
    log_prefactor = (
        sp.gammaln(N + 1.0 / 3) + sp.gammaln(N + 2.0 / 3)
        - math.log(6.0) - sp.gammaln(N - 1) - sp.gammaln(N - 2)
    )

    def log_weight(ks):
        coefficient = (
            sp.gammaln(8.0 / 3 + ks) - sp.gammaln(8.0 / 3)
            + sp.gammaln(7.0 / 3 + ks) - sp.gammaln(7.0 / 3)
            - sp.gammaln(ks + 1.0) - sp.gammaln(ks + 4.0) + sp.gammaln(4.0)
        )
        return log_prefactor + coefficient + sp.betaln(N - 1, ks + 4.0)

    def evaluate(ks, grid):
        return sp.betainc(N - 1, ks[:, None] + 4.0, grid[None, :])

    values = _sum_series(
        log_weight, 0, evaluate, yy,
        settings.K3_SERIES_REL_TOL, settings.K3_SERIES_MAX_TERMS, f"K=3 null CDF (N={N})",
    )
    return _scalar_or_array(np.clip(values, 0.0, 1.0), y)


def k2_series_coefficient(N: int, k: int) -> SignedLogValue:
    """(3−2N−2k)_{2k−1} / (2k−1)! in signed-log form.

    At k = 0 the reciprocal factorial 1/Γ(0) vanishes, so the coefficient is
    exactly zero.
    """
    if k == 0:
        return SignedLogValue(0.0, 0)
    rising = pochhammer_signed(3 - 2 * N - 2 * k, 2 * k - 1)
    return rising * SignedLogValue(float(log_gamma(2 * k)), 1).reciprocal()


@lru_cache(maxsize=256)
def _k2_h1_weights(N: int, r: float, rel_tol: float, max_terms: int) -> Tuple[np.ndarray, np.ndarray]:
    """Indices and magnitudes of the K = 2 H1 series terms (all terms are negative)."""
    log_c = math.log(4.0) + N * math.log1p(-r * r) - N * math.log(4.0) - 2 * math.log(r) - sp.betaln(N, N - 1)
    kept_k: List[np.ndarray] = []
    kept_w: List[np.ndarray] = []

    def log_weight(ks):
        # |(3−2N−2k)_{2k−1}| = Γ(2N+2k−2)/Γ(2N−1)
        coefficient = sp.gammaln(2 * N + 2 * ks - 2.0) - sp.gammaln(2 * N - 1.0) - sp.gammaln(2.0 * ks)
        return log_c + coefficient + 2 * ks * math.log(r) + sp.betaln(ks + 0.5, N - 1)

    def record(ks, _):
        kept_k.append(ks)
        kept_w.append(np.exp(log_weight(ks)))
        return np.ones((ks.size, 1))

    _sum_series(log_weight, 1, record, np.zeros(1), rel_tol, max_terms, f"K=2 H1 CDF (N={N}, r={r:.3g})")
    return np.concatenate(kept_k), np.concatenate(kept_w)


def h1_cdf_exact_k2(y, sigma1: float, sigma2: float, N: int):
    """Exact CDF of T_ST for two sensors with population eigenvalues σ₁ >= σ₂ > 0.

    G(y) = 1 − Σ_{k>=1} w_k I_{1−y}(k + 1/2, N − 1). Near-spherical covariances fall
    back to the null law, which is their limit.
    """
    if N < 2:
        raise DomainError(f"K = 2 law requires N >= 2, got {N}")
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2}")
    if sigma1 < sigma2:
        raise DomainError(f"Expected sigma1 >= sigma2, got {sigma1} < {sigma2}")
    r = (sigma1 - sigma2) / (sigma1 + sigma2)
    if r <= settings.NEAR_SPHERICAL_GAP:
        return h0_cdf_exact_k2(y, N)
    yy = np.clip(np.atleast_1d(np.asarray(y, dtype=float)).ravel(), 0.0, 1.0)
    ks, weights = _k2_h1_weights(N, float(r), settings.K2_SERIES_REL_TOL, settings.K2_SERIES_MAX_TERMS)
    tail = weights @ sp.betainc(ks[:, None] + 0.5, N - 1, 1.0 - yy[None, :])
    return _scalar_or_array(np.clip(1.0 - tail, 0.0, 1.0), y)


# --- detection performance ------------------------------------------------------

def pfa(zeta, K: int, N: int, round_params: Optional[bool] = None):
    """False-alarm probability P(T_ST < ζ | H0)."""
    return h0_cdf_beta(zeta, K, N, round_params)


def threshold_for_pfa(p, K: int, N: int, round_params: Optional[bool] = None):
    """Threshold ζ with pfa(ζ) = p."""
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0) & (arr < 1))):
        raise DomainError(f"pfa must lie in (0,1), got {p}")
    return h0_beta_params(K, N, round_params).ppf(p)


def pd(zeta, model: CovarianceModel, N: int, round_params: Optional[bool] = None):
    """Detection probability P(T_ST < ζ | H1); exact for two sensors."""
    if model.K == 2:
        return h1_cdf_exact_k2(zeta, float(model.sigma_eigs[0]), float(model.sigma_eigs[1]), N)
    return h1_cdf_beta(zeta, model, N, round_params)


def roc_analytic(model: CovarianceModel, K: int, N: int, pfa_grid: Sequence[float],
                 round_params: Optional[bool] = None) -> RocCurve:
    """Analytic ROC Pd = G(F⁻¹(Pfa)) over a strictly increasing Pfa grid."""
    if model.K != K:
        raise DomainError(f"Model has K={model.K}, expected {K}")
    grid = np.asarray(pfa_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise DomainError("pfa grid must be strictly increasing")
    thresholds = np.atleast_1d(threshold_for_pfa(grid, K, N, round_params))
    detection = np.maximum.accumulate(np.atleast_1d(pd(thresholds, model, N, round_params)))
    return RocCurve(detector=DetectorKind.ST, source=CurveSource.ANALYTIC, pfa=grid, pd=detection)
