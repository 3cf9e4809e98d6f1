import argparse
import logging
from functools import partial

import numpy as np
import pandas as pd

from app.api.experiment import ExperimentConfig, add_scenario_arguments, config_from_args, write_frame
from app.core.errors import EXIT_OK, ConvergenceError
from app.models.analytic import (
    h0_cdf_beta,
    h0_cdf_exact_k2,
    h0_cdf_exact_k3,
    h1_cdf_beta,
    h1_cdf_exact_k2,
)
from app.models.detectors import DetectorKind
from app.models.schemas import CurveSource, Hypothesis
from app.models.simulate import avg_cdf_vertical_difference, empirical_cdf, run_hypothesis, scenario_model

logger = logging.getLogger(__name__)

CDF_COLUMNS = ["hypothesis", "source", "y", "cdf"]


def add_parsers(subparsers):
    parser = subparsers.add_parser("cdf", help="analytic, exact and empirical CDFs of the ST statistic")
    add_scenario_arguments(parser)
    parser.add_argument("--n-jobs", type=int, help="joblib workers")
    parser.set_defaults(func=run_cdf)


def _rows(hypothesis: Hypothesis, source: CurveSource, y: np.ndarray, values) -> pd.DataFrame:
    return pd.DataFrame({"hypothesis": hypothesis.value, "source": source.value, "y": y, "cdf": values})


def _exact_h0(y: np.ndarray, K: int, N: int):
    if K == 2:
        return h0_cdf_exact_k2(y, N)
    if K == 3:
        try:
            return h0_cdf_exact_k3(y, N)
        except ConvergenceError as e:
            logger.warning(f"Skipping exact K=3 null CDF: {e}")
    return None


def cdf_frame(config: ExperimentConfig, n_jobs=None) -> pd.DataFrame:
    scenario = config.scenario.model_copy(update={"detectors": [DetectorKind.ST]})
    K, N = scenario.K, scenario.N
    y = config.y_grid.values()
    frames = []

    h0_beta = partial(h0_cdf_beta, K=K, N=N, round_params=config.round_params)
    frames.append(_rows(Hypothesis.H0, CurveSource.ANALYTIC, y, h0_beta(y)))
    exact = _exact_h0(y, K, N)
    if exact is not None:
        frames.append(_rows(Hypothesis.H0, CurveSource.EXACT, y, exact))
    h0_sample = run_hypothesis(scenario, Hypothesis.H0, n_jobs=n_jobs)[0]
    h0_empirical = empirical_cdf(h0_sample)
    frames.append(_rows(Hypothesis.H0, CurveSource.EMPIRICAL, y, h0_empirical(y)))
    gap = avg_cdf_vertical_difference(h0_beta, h0_empirical, y[0], y[-1], y.size)
    logger.info(f"H0 average CDF vertical difference (Beta vs empirical): {gap:.3e}")

    model = scenario_model(scenario, Hypothesis.H1)
    h1_beta = partial(h1_cdf_beta, model=model, N=N, round_params=config.round_params)
    frames.append(_rows(Hypothesis.H1, CurveSource.ANALYTIC, y, h1_beta(y)))
    if K == 2:
        sigma1, sigma2 = (float(v) for v in model.sigma_eigs)
        frames.append(_rows(Hypothesis.H1, CurveSource.EXACT, y, h1_cdf_exact_k2(y, sigma1, sigma2, N)))
    h1_sample = run_hypothesis(scenario, Hypothesis.H1, model=model, n_jobs=n_jobs)[0]
    h1_empirical = empirical_cdf(h1_sample)
    frames.append(_rows(Hypothesis.H1, CurveSource.EMPIRICAL, y, h1_empirical(y)))
    gap = avg_cdf_vertical_difference(h1_beta, h1_empirical, y[0], y[-1], y.size)
    logger.info(f"H1 average CDF vertical difference (Beta vs empirical): {gap:.3e}")

    return pd.concat(frames, ignore_index=True)[CDF_COLUMNS]


def run_cdf(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    write_frame(cdf_frame(config, args.n_jobs), config.out, config.format)
    return EXIT_OK
