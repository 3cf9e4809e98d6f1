import argparse
import logging
import math
import sys
from enum import Enum
from typing import List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from app.core.config import settings
from app.core.errors import DomainError
from app.models.detectors import DetectorKind, parse_detectors
from app.models.matrix import ChannelMode
from app.models.simulate import Scenario

logger = logging.getLogger(__name__)


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class GridSpec(BaseModel):
    """Equally spaced evaluation grid."""
    start: float
    stop: float
    num: int = Field(ge=2)

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.num)


class ExperimentConfig(BaseModel):
    """A Scenario plus everything a command needs to emit its output."""
    scenario: Scenario
    out: Optional[str] = None
    format: OutputFormat = OutputFormat.CSV
    pfa_grid: GridSpec = GridSpec(start=0.001, stop=0.999, num=100)
    y_grid: GridSpec = GridSpec(start=0.0, stop=1.0, num=1001)
    round_params: bool = False
    # detection-vs-SNR table
    snr1_db: List[float] = Field(default_factory=lambda: [-1.0, 0.0, 1.0, 2.0, 3.0])
    snr_offset_db: float = -2.0
    pfa_target: float = Field(default=0.01, gt=0, lt=1)
    channel_draws: int = Field(default=1, ge=1)


def add_scenario_arguments(parser: argparse.ArgumentParser):
    """Flags shared by every simulation command; each overrides --config."""
    parser.add_argument("--config", help="JSON experiment config")
    parser.add_argument("--k", type=int, help="number of sensors K")
    parser.add_argument("--n", type=int, help="samples per sensor N")
    parser.add_argument("--sigma2", type=float, help="noise power")
    parser.add_argument("--snr-db", type=float, action="append", dest="snr_db",
                        help="primary-user SNR in dB (repeatable)")
    parser.add_argument("--mu-db", type=float, help="noise uncertainty in dB")
    parser.add_argument("--trials", type=int, help="Monte-Carlo trials per hypothesis")
    parser.add_argument("--seed", type=int, help="RNG seed")
    parser.add_argument("--detectors", help="comma-separated detector names")
    parser.add_argument("--channel-index", type=int, help="first channel realisation")
    parser.add_argument("--channel-mode", choices=[m.value for m in ChannelMode],
                        help="independent (rayleigh) or orthonormalised channels")
    parser.add_argument("--out", help="output path (stdout if omitted)")
    parser.add_argument("--format", choices=[f.value for f in OutputFormat], help="output format")
    parser.add_argument("--save-config", help="write the merged config as JSON")
    parser.add_argument("--round-params", action="store_true", default=None,
                        help="round Beta parameters to integers")


_SCENARIO_FLAGS = {
    "k": "K",
    "n": "N",
    "sigma2": "sigma2",
    "snr_db": "snrs_db",
    "mu_db": "mu_db",
    "trials": "trials",
    "seed": "seed",
    "channel_index": "channel_index",
    "channel_mode": "channel_mode",
}

_CONFIG_FLAGS = {
    "out": "out",
    "format": "format",
    "round_params": "round_params",
    "snr1_db": "snr1_db",
    "snr_offset_db": "snr_offset_db",
    "pfa_target": "pfa_target",
    "channel_draws": "channel_draws",
}


def load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as f:
        return ExperimentConfig.model_validate_json(f.read())


def save_config(config: ExperimentConfig, path: str):
    # JSON has no infinities; pydantic would write them as null
    snrs = list(config.scenario.snrs_db) + list(config.snr1_db) + [config.snr_offset_db]
    if not all(math.isfinite(s) for s in snrs):
        raise DomainError(f"Cannot save a config with non-finite SNRs: {snrs}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(config.model_dump_json(indent=2))


def config_from_args(args: argparse.Namespace, default_detectors: Optional[List[DetectorKind]] = None) -> ExperimentConfig:
    """Merge a JSON config (if any) with command-line overrides and validate."""
    if getattr(args, "config", None):
        data = load_config(args.config).model_dump(mode="json")
    else:
        data = {"scenario": {}}
        if default_detectors:
            data["scenario"]["detectors"] = [d.value for d in default_detectors]

    for flag, field in _SCENARIO_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data["scenario"][field] = value
    if getattr(args, "detectors", None) is not None:
        data["scenario"]["detectors"] = [d.value for d in parse_detectors([args.detectors])]
    for flag, field in _CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[field] = value

    config = ExperimentConfig.model_validate(data)
    logger.debug(f"Experiment config: {config.model_dump_json()}")
    if getattr(args, "save_config", None):
        save_config(config, args.save_config)
        logger.info(f"Config saved to {args.save_config}")
    return config


def write_frame(frame: pd.DataFrame, out: Optional[str], fmt: OutputFormat):
    """Emit a table as CSV (LF, fixed float format) or JSON records."""
    target = out if out else sys.stdout
    if fmt is OutputFormat.JSON:
        text = frame.to_json(orient="records", double_precision=15)
        if out:
            with open(out, "w", encoding="utf-8", newline="\n") as f:
                f.write(text + "\n")
        else:
            sys.stdout.write(text + "\n")
    else:
        frame.to_csv(target, index=False, float_format=settings.CSV_FLOAT_FORMAT,
                     lineterminator="\n", encoding="utf-8")
    if out:
        logger.info(f"Wrote {len(frame)} rows to {out}")
