import argparse
import logging
from typing import List

import pandas as pd

from app.api.experiment import ExperimentConfig, add_scenario_arguments, config_from_args, write_frame
from app.core.errors import EXIT_OK
from app.models.analytic import roc_analytic
from app.models.detectors import DetectorKind
from app.models.schemas import Hypothesis, RocCurve
from app.models.simulate import by_detector, empirical_roc, run_hypothesis, scenario_model

logger = logging.getLogger(__name__)

ROC_COLUMNS = ["detector", "source", "pfa", "pd"]


def add_parsers(subparsers):
    parser = subparsers.add_parser("roc", help="empirical and analytic ROC curves as CSV")
    add_scenario_arguments(parser)
    parser.add_argument("--n-jobs", type=int, help="joblib workers")
    parser.set_defaults(func=run_roc)


def roc_curves(config: ExperimentConfig, n_jobs=None) -> List[RocCurve]:
    """Empirical curves for every detector, plus the analytic ST curve."""
    scenario = config.scenario
    h0 = by_detector(run_hypothesis(scenario, Hypothesis.H0, n_jobs=n_jobs))
    h1_model = scenario_model(scenario, Hypothesis.H1)
    h1 = by_detector(run_hypothesis(scenario, Hypothesis.H1, model=h1_model, n_jobs=n_jobs))

    curves = [empirical_roc(h0[kind], h1[kind], kind) for kind in scenario.detectors]
    if DetectorKind.ST in scenario.detectors and scenario.N < scenario.K:
        logger.warning(f"No analytic ST curve for N={scenario.N} < K={scenario.K}")
    elif DetectorKind.ST in scenario.detectors:
        curves.append(roc_analytic(h1_model, scenario.K, scenario.N, config.pfa_grid.values(), config.round_params))
    for curve in curves:
        logger.info(f"{curve.detector.value} ({curve.source.value}) AUC = {curve.auc():.6f}, "
                    f"Pd@0.01 = {curve.pd_at(0.01):.4f}, Pd@0.1 = {curve.pd_at(0.1):.4f}")
    return curves


def roc_frame(curves: List[RocCurve]) -> pd.DataFrame:
    frame = pd.concat([curve.to_frame() for curve in curves], ignore_index=True)
    frame = frame.sort_values(ROC_COLUMNS, kind="mergesort").reset_index(drop=True)
    return frame[ROC_COLUMNS]


def run_roc(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    logger.info(f"ROC for {config.scenario.model_dump()}")
    write_frame(roc_frame(roc_curves(config, args.n_jobs)), config.out, config.format)
    return EXIT_OK
