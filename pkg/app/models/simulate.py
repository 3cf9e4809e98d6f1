"""Monte-Carlo engine for empirical detector performance.

Randomness is organised as independent counter-based streams keyed by
(seed, stream, channel index, block). A block always holds
``settings.BLOCK_SIZE`` trials (the last one may be shorter), so the statistic
of trial t depends only on the seed and t. It does not depend on the total
trial count or on how blocks are scheduled across joblib workers.
"""
import logging
import math
import time
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.config import settings
from app.core.errors import DomainError
from app.core.metrics import record_run
from app.models.detectors import DetectorKind, Direction, evaluate_detectors
from app.models.matrix import (
    ChannelMode,
    CovarianceModel,
    build_covariance,
    hermitian_eigenvalues,
    sample_covariance_matrix,
)
from app.models.schemas import CurveSource, Hypothesis, RocCurve

logger = logging.getLogger(__name__)

STREAM_H0 = 0
STREAM_H1 = 1
STREAM_CHANNEL = 2


class Scenario(BaseModel):
    """Everything needed to reproduce one Monte-Carlo experiment."""
    K: int = Field(ge=2)
    N: int = Field(ge=1)
    sigma2: float = Field(default=1.0, gt=0)
    snrs_db: List[float] = Field(default_factory=list)
    mu_db: float = Field(default=0.0, ge=0)
    trials: int = Field(default_factory=lambda: settings.DEFAULT_TRIALS, ge=1)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED, ge=0, lt=2 ** 64)
    detectors: List[DetectorKind] = Field(default_factory=lambda: [DetectorKind.ST], min_length=1)
    channel_index: int = Field(default=0, ge=0)
    channel_mode: ChannelMode = ChannelMode.RAYLEIGH

    @model_validator(mode="after")
    def _check_channels(self):
        if self.channel_mode is ChannelMode.ORTHOGONAL and self.P > self.K:
            raise ValueError(f"Orthogonal channels need P <= K, got P={self.P}, K={self.K}")
        return self

    @property
    def P(self) -> int:
        return len(self.snrs_db)


class StatisticSample(BaseModel):
    """Simulated values of one detector statistic under one hypothesis."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    detector: DetectorKind
    hypothesis: Hypothesis
    values: np.ndarray

    @model_validator(mode="after")
    def _check_values(self):
        if np.any(np.isneginf(self.values)):
            raise ValueError("Statistic values must not be -inf")
        if self.detector is not DetectorKind.ER and np.any(np.isposinf(self.values)):
            raise ValueError(f"Only ER may carry the +inf sentinel, got one for {self.detector.value}")
        return self

    @property
    def valid(self) -> np.ndarray:
        """Values with NaN sentinels (failed trials) removed."""
        return self.values[~np.isnan(self.values)]


SampleLike = Union[StatisticSample, np.ndarray, Sequence[float]]


def _values(sample: SampleLike) -> np.ndarray:
    if isinstance(sample, StatisticSample):
        return sample.valid
    arr = np.asarray(sample, dtype=float).ravel()
    return arr[~np.isnan(arr)]


def effective_noise_powers(sigma2: float, mu_db: float) -> Tuple[float, float]:
    """Worst-case noise powers (ρσ² under H0, σ²/ρ under H1) for μ dB of uncertainty."""
    if mu_db < 0:
        raise DomainError(f"mu_db must be non-negative, got {mu_db}")
    rho = 10.0 ** (mu_db / 10.0)
    return rho * sigma2, sigma2 / rho


def block_generator(seed: int, stream: int, channel_index: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream, channel_index, block])))


def channel_generator(seed: int, channel_index: int) -> np.random.Generator:
    """Stream for channel draws; independent of μ, SNRs and trial count."""
    return block_generator(seed, STREAM_CHANNEL, channel_index, 0)


def scenario_model(scenario: Scenario, hypothesis: Hypothesis) -> CovarianceModel:
    """Population covariance of one hypothesis under worst-case noise uncertainty."""
    h0_power, h1_power = effective_noise_powers(scenario.sigma2, scenario.mu_db)
    if hypothesis is Hypothesis.H0:
        return CovarianceModel.spherical(scenario.K, h0_power)
    nominal = build_covariance(
        scenario.K, scenario.sigma2, scenario.snrs_db,
        channel_generator(scenario.seed, scenario.channel_index), scenario.channel_mode,
    )
    return nominal.with_noise_power(h1_power)


def _simulate_block(model: CovarianceModel, N: int, seed: int, stream: int, channel_index: int,
                    block: int, count: int, detectors: List[DetectorKind]) -> Dict[DetectorKind, np.ndarray]:
    rng = block_generator(seed, stream, channel_index, block)
    R = sample_covariance_matrix(model, N, rng, size=count)
    eigs = hermitian_eigenvalues(R, check=False)
    return evaluate_detectors(eigs, detectors, strict=False, rank=min(N, model.K))


def run_hypothesis(scenario: Scenario, hypothesis: Hypothesis, model: Optional[CovarianceModel] = None,
                   n_jobs: Optional[int] = None) -> List[StatisticSample]:
    """Simulate every requested detector statistic under one hypothesis."""
    if model is None:
        model = scenario_model(scenario, hypothesis)
    if hypothesis is Hypothesis.H0:
        stream, channel_index = STREAM_H0, 0
    else:
        stream, channel_index = STREAM_H1, scenario.channel_index

    block_size = settings.BLOCK_SIZE
    blocks = math.ceil(scenario.trials / block_size)
    counts = [min(block_size, scenario.trials - b * block_size) for b in range(blocks)]

    started = time.perf_counter()
    results = Parallel(n_jobs=n_jobs or settings.N_JOBS)(
        delayed(_simulate_block)(model, scenario.N, scenario.seed, stream, channel_index, b, count, scenario.detectors)
        for b, count in enumerate(counts)
    )
    elapsed = time.perf_counter() - started

    samples = [
        StatisticSample(
            detector=kind,
            hypothesis=hypothesis,
            values=np.concatenate([block[kind] for block in results]),
        )
        for kind in scenario.detectors
    ]
    record_run(hypothesis.value, scenario.trials, elapsed)
    logger.info(
        f"Simulated {scenario.trials} {hypothesis.value} trials in {blocks} blocks "
        f"(K={scenario.K}, N={scenario.N}, P={scenario.P}, mu={scenario.mu_db} dB) in {elapsed:.2f}s"
    )
    return samples


def by_detector(samples: Sequence[StatisticSample]) -> Dict[DetectorKind, StatisticSample]:
    return {s.detector: s for s in samples}


# --- empirical distribution tools ----------------------------------------------

def empirical_cdf(sample: SampleLike) -> Callable:
    """Right-continuous step CDF of a sample."""
    ordered = np.sort(_values(sample))
    n = ordered.size
    if n == 0:
        raise DomainError("Empirical CDF of an empty sample")

    def cdf(x):
        counts = np.searchsorted(ordered, np.asarray(x, dtype=float), side="right")
        result = counts / n
        return float(result) if np.ndim(x) == 0 else result

    return cdf


def avg_cdf_vertical_difference(F: Callable, F_hat: Callable, lo: float, hi: float, n: int) -> float:
    """Mean |F − F_hat| over n equally spaced points in [lo, hi]."""
    if n < 2:
        raise DomainError(f"Need at least 2 evaluation points, got {n}")
    x = np.linspace(lo, hi, n)
    return float(np.mean(np.abs(np.asarray(F(x)) - np.asarray(F_hat(x)))))


def sup_cdf_distance(F: Callable, sample: SampleLike) -> float:
    """Kolmogorov distance between a continuous CDF and a sample's step CDF."""
    ordered = np.sort(_values(sample))
    n = ordered.size
    model = np.asarray(F(ordered), dtype=float)
    above = np.arange(1, n + 1) / n - model
    below = model - np.arange(n) / n
    return float(max(above.max(), below.max()))


def _fraction_below(ordered: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    return np.searchsorted(ordered, thresholds, side="left") / ordered.size


def _fraction_above(ordered: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    return 1.0 - np.searchsorted(ordered, thresholds, side="right") / ordered.size


def empirical_roc(h0_sample: SampleLike, h1_sample: SampleLike, detector: Optional[DetectorKind] = None,
                  thresholds: Optional[int] = None) -> RocCurve:
    """ROC from a sweep of equally spaced thresholds over the pooled sample range."""
    if detector is None:
        if not isinstance(h0_sample, StatisticSample):
            raise DomainError("detector is required for raw arrays")
        detector = h0_sample.detector
    h0 = np.sort(_values(h0_sample))
    h1 = np.sort(_values(h1_sample))
    if h0.size == 0 or h1.size == 0:
        raise DomainError("ROC needs non-empty samples under both hypotheses")
    pooled = np.concatenate((h0, h1))
    finite = pooled[np.isfinite(pooled)]
    if finite.size == 0:
        raise DomainError("ROC needs at least one finite statistic value")
    grid = np.linspace(finite.min(), finite.max(), thresholds or settings.ROC_THRESHOLDS)

    if detector.h1_direction is Direction.SMALL:
        pfa, pd_ = _fraction_below(h0, grid), _fraction_below(h1, grid)
    else:
        pfa, pd_ = _fraction_above(h0, grid), _fraction_above(h1, grid)
    order = np.lexsort((pd_, pfa))
    return RocCurve(detector=detector, source=CurveSource.EMPIRICAL, pfa=pfa[order], pd=pd_[order])


def empirical_threshold(h0_sample: SampleLike, pfa: float, detector: Optional[DetectorKind] = None) -> float:
    """Threshold whose empirical false-alarm rate does not exceed pfa."""
    if not 0 < pfa < 1:
        raise DomainError(f"pfa must lie in (0,1), got {pfa}")
    if detector is None:
        detector = h0_sample.detector
    values = _values(h0_sample)
    if detector.h1_direction is Direction.SMALL:
        return float(np.quantile(values, pfa, method="lower"))
    return float(np.quantile(values, 1.0 - pfa, method="higher"))


def detection_probability(h1_sample: SampleLike, threshold: float, detector: Optional[DetectorKind] = None) -> float:
    """Fraction of H1 trials on the H1 side of the threshold."""
    if detector is None:
        detector = h1_sample.detector
    values = _values(h1_sample)
    if detector.h1_direction is Direction.SMALL:
        return float(np.mean(values < threshold))
    return float(np.mean(values > threshold))


class DetectionSummary(BaseModel):
    """Pd of one detector averaged over channel draws; per-draw estimates kept for paired comparisons."""
    detector: DetectorKind
    pd: float
    stderr: float
    estimates: List[float]

    @property
    def draws(self) -> int:
        return len(self.estimates)


def _summarise(detector: DetectorKind, estimates: List[float], trials: int) -> DetectionSummary:
    values = np.asarray(estimates)
    mean = float(values.mean())
    if values.size > 1:
        stderr = float(values.std(ddof=1) / math.sqrt(values.size))
    else:
        stderr = math.sqrt(mean * (1 - mean) / trials)
    return DetectionSummary(detector=detector, pd=mean, stderr=stderr, estimates=list(estimates))


def h0_thresholds(scenario: Scenario, pfa_target: float, n_jobs: Optional[int] = None) -> Dict[DetectorKind, float]:
    """Empirical H0 thresholds for every detector of the scenario."""
    return {
        s.detector: empirical_threshold(s, pfa_target)
        for s in run_hypothesis(scenario, Hypothesis.H0, n_jobs=n_jobs)
    }


def detection_at_pfa(scenario: Scenario, pfa_target: float, channel_draws: int = 1,
                     n_jobs: Optional[int] = None,
                     thresholds: Optional[Dict[DetectorKind, float]] = None) -> Dict[DetectorKind, DetectionSummary]:
    """Pd at an empirical-threshold false-alarm level, averaged over independent channel draws."""
    if channel_draws < 1:
        raise DomainError(f"channel_draws must be at least 1, got {channel_draws}")
    if thresholds is None:
        thresholds = h0_thresholds(scenario, pfa_target, n_jobs)
    estimates: Dict[DetectorKind, List[float]] = {kind: [] for kind in scenario.detectors}
    for draw in range(channel_draws):
        drawn = scenario.model_copy(update={"channel_index": scenario.channel_index + draw})
        for sample in run_hypothesis(drawn, Hypothesis.H1, n_jobs=n_jobs):
            estimates[sample.detector].append(detection_probability(sample, thresholds[sample.detector]))
    return {kind: _summarise(kind, values, scenario.trials) for kind, values in estimates.items()}


def pd_vs_snr(scenario_template: Scenario, snr1_grid_db: Sequence[float], snr_offset_db: float,
              pfa_target: float, channel_draws: int = 1, n_jobs: Optional[int] = None) -> pd.DataFrame:
    """Pd against the first user's SNR with a second user snr_offset_db away.

    Thresholds come from one H0 run. Channel draw d uses the same channels and
    trial streams at every SNR point.
    """
    if not 0 < pfa_target < 1:
        raise DomainError(f"pfa must lie in (0,1), got {pfa_target}")
    thresholds = h0_thresholds(scenario_template, pfa_target, n_jobs)
    rows = []
    for snr1 in snr1_grid_db:
        scenario = scenario_template.model_copy(update={"snrs_db": [float(snr1), float(snr1) + snr_offset_db]})
        summary = detection_at_pfa(scenario, pfa_target, channel_draws, n_jobs, thresholds)
        row = {"snr1_db": float(snr1)}
        row.update({kind.value: summary[kind].pd for kind in scenario_template.detectors})
        rows.append(row)
        logger.info(f"SNR1={snr1} dB: " + ", ".join(f"{k}={v:.4f}" for k, v in row.items() if k != "snr1_db"))
    return pd.DataFrame(rows, columns=["snr1_db"] + [kind.value for kind in scenario_template.detectors])
