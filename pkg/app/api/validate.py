"""Acceptance suite: analytic identities plus Monte-Carlo cross-checks.

Every Monte-Carlo criterion runs from ``settings.DEFAULT_SEED`` and is
therefore deterministic. ``--scale`` multiplies the trial counts. Tolerances
that are driven by Monte-Carlo noise widen with 1/sqrt(trials) when the scale
drops below one.
"""
import argparse
import logging
import math
import time
from functools import partial
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from app.core.config import settings
from app.core.errors import EXIT_OK, DomainError, ValidationFailure
from app.models.analytic import (
    h0_beta_params,
    h0_cdf_beta,
    h0_cdf_exact_k2,
    h0_moment,
    h0_moment_direct,
    h1_beta_params,
    h1_cdf_exact_k2,
    h1_moment,
    pd,
    pfa,
    threshold_for_pfa,
)
from app.models.detectors import DetectorKind
from app.models.matrix import ChannelMode, CovarianceModel
from app.models.schemas import Hypothesis
from app.models.simulate import (
    Scenario,
    avg_cdf_vertical_difference,
    by_detector,
    detection_at_pfa,
    detection_probability,
    empirical_cdf,
    h0_thresholds,
    run_hypothesis,
    scenario_model,
    sup_cdf_distance,
)

logger = logging.getLogger(__name__)

SINGLE_USER_SNRS = [-3.0]
THREE_USER_SNRS = [-1.0, -3.0, -10.0]
SIX_USER_SNRS = [0.0, -1.0, -3.0, -8.0, -10.0, -22.0]

# SNR1 (dB) -> (Pd of ST, Pd of John) from the published detection table
PUBLISHED_TABLE = {
    -1.0: (0.3628, 0.3721),
    0.0: (0.5891, 0.5901),
    1.0: (0.8105, 0.8094),
    2.0: (0.9482, 0.9458),
    3.0: (0.9935, 0.9929),
}


class CriterionResult(BaseModel):
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


Outcome = Tuple[bool, str]


def _trials(base: int, scale: float) -> int:
    return max(1000, int(round(base * scale)))


def _mc_tolerance(base: float, trials: int, coefficient: float) -> float:
    return max(base, coefficient / math.sqrt(trials))


def _paired_margin(better: Sequence[float], worse: Sequence[float]) -> Tuple[float, float]:
    """Mean of the paired difference and its standard error."""
    diff = np.asarray(better) - np.asarray(worse)
    se = float(diff.std(ddof=1) / math.sqrt(diff.size)) if diff.size > 1 else 0.0
    return float(diff.mean()), se


# --- criteria -------------------------------------------------------------------

def check_beta_params(scale: float, n_jobs: Optional[int]) -> Outcome:
    expected = {(4, 400): 395.4, (4, 200): 195.4, (4, 100): 95.5}
    parts, ok = [], True
    for (K, N), alpha in expected.items():
        got = h0_beta_params(K, N, round_params=False).alpha
        ok &= abs(got - alpha) <= 0.05
        parts.append(f"alpha0({K},{N})={got:.3f}")
    return ok, ", ".join(parts)


def check_k2_exactness(scale: float, n_jobs: Optional[int]) -> Outcome:
    y = np.linspace(0.0, 1.0, 1000)
    worst_params, worst_cdf = 0.0, 0.0
    for N in (4, 10, 50, 400):
        params = h0_beta_params(2, N, round_params=False)
        worst_params = max(worst_params, abs(params.alpha - (N - 1)), abs(params.beta - 1.5))
        worst_cdf = max(worst_cdf, float(np.max(np.abs(h0_cdf_beta(y, 2, N, False) - h0_cdf_exact_k2(y, N)))))
    ok = worst_params <= 1e-9 and worst_cdf < 1e-12
    return ok, f"max param error {worst_params:.2e}, sup CDF difference {worst_cdf:.2e}"


def check_moments(scale: float, n_jobs: Optional[int]) -> Outcome:
    m1, m2 = h0_moment(2, 4, 1), h0_moment(2, 4, 2)
    analytic_ok = abs(m1 - 2 / 3) <= 1e-12 and abs(m2 - 16 / 33) <= 1e-12
    direct_ok = all(abs(h0_moment_direct(4, 20, n) - h0_moment(4, 20, n)) <= 1e-10 for n in range(1, 5))

    trials = _trials(1_000_000, scale)
    scenario = Scenario(K=2, N=4, trials=trials, seed=settings.DEFAULT_SEED)
    values = run_hypothesis(scenario, Hypothesis.H0, n_jobs=n_jobs)[0].valid
    se1 = values.std(ddof=1) / math.sqrt(values.size)
    se2 = (values ** 2).std(ddof=1) / math.sqrt(values.size)
    z1 = abs(values.mean() - m1) / se1
    z2 = abs((values ** 2).mean() - m2) / se2
    ok = analytic_ok and direct_ok and z1 <= 3 and z2 <= 3
    return ok, f"M1={m1:.12f}, M2={m2:.12f}, MC z-scores {z1:.2f}/{z2:.2f} over {trials} trials"


def check_h1_collapse(scale: float, n_jobs: Optional[int]) -> Outcome:
    worst = 0.0
    for K, N, sigma2 in ((2, 4, 1.0), (4, 20, 2.5), (8, 50, 0.3)):
        model = CovarianceModel.spherical(K, sigma2)
        for n in range(1, 5):
            worst = max(worst, abs(h1_moment(model, N, n) / h0_moment(K, N, n) - 1.0))
        p0, p1 = h0_beta_params(K, N, False), h1_beta_params(model, N, False)
        worst = max(worst, abs(p1.alpha / p0.alpha - 1.0), abs(p1.beta / p0.beta - 1.0))
    return worst <= 1e-12, f"max relative difference {worst:.2e}"


def check_k2_h1_law(scale: float, n_jobs: Optional[int]) -> Outcome:
    trials = _trials(1_000_000, scale)
    model = CovarianceModel.from_eigenvalues([2.0, 1.0])
    scenario = Scenario(K=2, N=10, trials=trials, seed=settings.DEFAULT_SEED)
    sample = run_hypothesis(scenario, Hypothesis.H1, model=model, n_jobs=n_jobs)[0]
    distance = sup_cdf_distance(partial(h1_cdf_exact_k2, sigma1=2.0, sigma2=1.0, N=10), sample)
    tolerance = _mc_tolerance(3e-3, trials, 1.63)
    return distance <= tolerance, f"sup distance {distance:.2e} (tolerance {tolerance:.1e}, {trials} trials)"


def check_h0_fit(scale: float, n_jobs: Optional[int]) -> Outcome:
    trials = _trials(1_000_000, scale)
    tolerance = _mc_tolerance(1e-3, trials, 1.0)
    parts, ok = [], True
    for K, N in ((4, 20), (4, 50), (8, 50)):
        scenario = Scenario(K=K, N=N, trials=trials, seed=settings.DEFAULT_SEED)
        sample = run_hypothesis(scenario, Hypothesis.H0, n_jobs=n_jobs)[0]
        gap = avg_cdf_vertical_difference(
            partial(h0_cdf_beta, K=K, N=N, round_params=False), empirical_cdf(sample), 0.0, 1.0, 10_000
        )
        ok &= gap <= tolerance
        parts.append(f"({K},{N}): {gap:.2e}")
    return ok, ", ".join(parts) + f" (tolerance {tolerance:.1e})"


def check_pd_approximation(scale: float, n_jobs: Optional[int]) -> Outcome:
    trials = _trials(100_000, scale)
    tolerance = _mc_tolerance(0.01, trials, 1.5)
    worst = 0.0
    for K, N in ((4, 100), (4, 200)):
        for channel in range(5):
            scenario = Scenario(K=K, N=N, snrs_db=THREE_USER_SNRS, trials=trials,
                                seed=settings.DEFAULT_SEED, channel_index=channel)
            model = scenario_model(scenario, Hypothesis.H1)
            sample = run_hypothesis(scenario, Hypothesis.H1, model=model, n_jobs=n_jobs)[0]
            zetas = np.atleast_1d(h1_beta_params(model, N, False).ppf(np.linspace(0.05, 0.95, 10)))
            analytic = np.atleast_1d(pd(zetas, model, N, False))
            empirical = np.array([detection_probability(sample, z) for z in zetas])
            worst = max(worst, float(np.max(np.abs(analytic - empirical))))
    return worst <= tolerance, f"max |Pd analytic - simulated| {worst:.4f} (tolerance {tolerance:.3f})"


def _ordering(scenario: Scenario, pairs: List[Tuple[DetectorKind, DetectorKind]], draws: int,
              n_jobs: Optional[int]) -> Tuple[bool, List[str]]:
    summary = detection_at_pfa(scenario, 0.1, channel_draws=draws, n_jobs=n_jobs)
    ok, parts = True, []
    for better, worse in pairs:
        mean, se = _paired_margin(summary[better].estimates, summary[worse].estimates)
        ok &= mean >= -2 * se
        parts.append(f"{better.value}-{worse.value}={mean:+.4f}±{se:.4f}")
    return ok, parts


def check_roc_ordering(scale: float, n_jobs: Optional[int]) -> Outcome:
    trials = _trials(100_000, scale)
    draws = 20
    D = DetectorKind
    cases = [
        (Scenario(K=4, N=400, snrs_db=SINGLE_USER_SNRS, trials=trials,
                  seed=settings.DEFAULT_SEED, detectors=[D.SLE, D.ST, D.ER]),
         [(D.SLE, D.ST), (D.ST, D.ER)]),
        (Scenario(K=4, N=200, snrs_db=THREE_USER_SNRS, trials=trials,
                  seed=settings.DEFAULT_SEED, detectors=[D.ST, D.SLE, D.ER]),
         [(D.ST, D.SLE), (D.ST, D.ER)]),
        (Scenario(K=4, N=100, snrs_db=SIX_USER_SNRS, trials=trials,
                  seed=settings.DEFAULT_SEED, detectors=[D.ST, D.JOHN]),
         [(D.ST, D.JOHN)]),
    ]
    ok, parts = True, []
    for scenario, pairs in cases:
        case_ok, case_parts = _ordering(scenario, pairs, draws, n_jobs)
        ok &= case_ok
        parts.append(f"P={scenario.P}: " + ", ".join(case_parts))
    return ok, "; ".join(parts)


def check_noise_uncertainty(scale: float, n_jobs: Optional[int]) -> Outcome:
    D = DetectorKind
    invariant = [D.ST, D.SLE, D.ER, D.JOHN]
    base = Scenario(K=4, N=200, snrs_db=THREE_USER_SNRS, trials=_trials(10_000, scale),
                    seed=settings.DEFAULT_SEED, detectors=invariant)
    reference = {h: by_detector(run_hypothesis(base, h, n_jobs=n_jobs)) for h in Hypothesis}
    worst = 0.0
    for mu in (0.5, 1.0):
        shifted = base.model_copy(update={"mu_db": mu})
        for h in Hypothesis:
            for kind, sample in by_detector(run_hypothesis(shifted, h, n_jobs=n_jobs)).items():
                ref = reference[h][kind].values
                finite = np.isfinite(ref) & np.isfinite(sample.values)
                rel = np.abs(sample.values[finite] - ref[finite]) / np.abs(ref[finite])
                worst = max(worst, float(rel.max()) if rel.size else 0.0)
    invariant_ok = worst <= 1e-12

    dependent = base.model_copy(update={"detectors": [D.ED, D.LE], "trials": _trials(20_000, scale)})
    pds: Dict[DetectorKind, List[float]] = {D.ED: [], D.LE: []}
    for mu in (0.0, 0.5, 1.0):
        summary = detection_at_pfa(dependent.model_copy(update={"mu_db": mu}), 0.1, channel_draws=10, n_jobs=n_jobs)
        for kind in pds:
            pds[kind].append(summary[kind].pd)
    decreasing = all(a > b for values in pds.values() for a, b in zip(values, values[1:]))
    detail = (f"max relative change {worst:.1e}; "
              + ", ".join(f"{k.value} Pd {[round(v, 4) for v in values]}" for k, values in pds.items()))
    return invariant_ok and decreasing, detail


def check_table_trend(scale: float, n_jobs: Optional[int]) -> Outcome:
    D = DetectorKind
    draws = 200
    # published rows assume orthogonal primary-user channels
    template = Scenario(K=4, N=50, trials=_trials(5_000, scale), seed=settings.DEFAULT_SEED,
                        detectors=[D.ST, D.JOHN], channel_mode=ChannelMode.ORTHOGONAL)
    thresholds = h0_thresholds(template.model_copy(update={"trials": _trials(2_000_000, scale)}), 0.01, n_jobs)
    ok, parts, previous = True, [], None
    for snr1, (st_published, _) in PUBLISHED_TABLE.items():
        scenario = template.model_copy(update={"snrs_db": [snr1, snr1 - 2.0]})
        summary = detection_at_pfa(scenario, 0.01, draws, n_jobs, thresholds)
        st, john = summary[D.ST], summary[D.JOHN]
        ok &= abs(st.pd - st_published) <= 0.1
        if previous is not None:
            ok &= st.pd >= previous.pd - 2 * math.hypot(st.stderr, previous.stderr)
        mean, se = _paired_margin(st.estimates, john.estimates)
        if snr1 < 0:
            ok &= -mean >= -2 * se
        elif snr1 >= 1:
            ok &= mean >= -2 * se
        parts.append(f"{snr1:+.0f} dB: ST={st.pd:.4f} JOHN={john.pd:.4f}")
        previous = st
    return ok, ", ".join(parts)


def check_round_trips(scale: float, n_jobs: Optional[int]) -> Outcome:
    worst = 0.0
    for K, N in ((2, 10), (4, 100), (8, 50)):
        for p in (1e-6, 1e-4, 1e-2, 0.5, 0.99):
            worst = max(worst, abs(pfa(threshold_for_pfa(p, K, N, False), K, N, False) - p))
    return worst <= 1e-10, f"max round-trip error {worst:.2e}"


CRITERIA: List[Tuple[str, Callable[[float, Optional[int]], Outcome]]] = [
    ("beta-params", check_beta_params),
    ("k2-exactness", check_k2_exactness),
    ("moments", check_moments),
    ("h1-collapse", check_h1_collapse),
    ("k2-h1-law", check_k2_h1_law),
    ("h0-fit", check_h0_fit),
    ("pd-approximation", check_pd_approximation),
    ("roc-ordering", check_roc_ordering),
    ("noise-uncertainty", check_noise_uncertainty),
    ("table-trend", check_table_trend),
    ("round-trips", check_round_trips),
]


def select_criteria(only: Optional[Sequence[str]]) -> List[Tuple[str, Callable]]:
    """Pick criteria by name or 1-based number; None selects all."""
    if not only:
        return list(CRITERIA)
    wanted = {token.strip() for item in only for token in item.split(",") if token.strip()}
    selected = [
        (name, check) for index, (name, check) in enumerate(CRITERIA, start=1)
        if name in wanted or str(index) in wanted
    ]
    known = {name for name, _ in CRITERIA} | {str(i) for i in range(1, len(CRITERIA) + 1)}
    unknown = wanted - known
    if unknown:
        raise DomainError(f"Unknown criteria: {sorted(unknown)}")
    return selected


def run_criteria(criteria, scale: float = 1.0, n_jobs: Optional[int] = None) -> List[CriterionResult]:
    results = []
    for name, check in criteria:
        started = time.perf_counter()
        logger.info(f"Running criterion {name}")
        passed, detail = check(scale, n_jobs)
        result = CriterionResult(name=name, passed=bool(passed), detail=detail,
                                 seconds=time.perf_counter() - started)
        print(f"[{'PASS' if result.passed else 'FAIL'}] {result.name}: {result.detail} ({result.seconds:.1f}s)")
        results.append(result)
    return results


def add_parsers(subparsers):
    parser = subparsers.add_parser("validate", help="run the acceptance suite")
    parser.add_argument("--only", action="append", help="criterion names or numbers (repeatable, comma lists)")
    parser.add_argument("--scale", type=float, default=1.0, help="multiplier on Monte-Carlo trial counts")
    parser.add_argument("--n-jobs", type=int, help="joblib workers")
    parser.set_defaults(func=run_validate)


def run_validate(args: argparse.Namespace) -> int:
    if not args.scale > 0:
        raise DomainError(f"--scale must be positive, got {args.scale}")
    criteria = select_criteria(args.only)
    results = run_criteria(criteria, args.scale, args.n_jobs)
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    if failed:
        raise ValidationFailure(f"Failed criteria: {', '.join(failed)}")
    return EXIT_OK
