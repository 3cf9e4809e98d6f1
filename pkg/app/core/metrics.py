import logging
from typing import Optional

from prometheus_client import REGISTRY, Counter, Histogram, write_to_textfile

from app.core.config import settings

logger = logging.getLogger(__name__)

SIMULATED_TRIALS = Counter(
    "sensing_simulated_trials",
    "Monte-Carlo trials simulated",
    ["hypothesis"],
)

SIMULATION_SECONDS = Histogram(
    "sensing_simulation_seconds",
    "Wall time of one Monte-Carlo hypothesis run",
    ["hypothesis"],
    buckets=(0.01, 0.1, 0.5, 1, 5, 15, 60, 300, float("inf")),
)


def record_run(hypothesis: str, trials: int, seconds: float):
    """Account one finished hypothesis run."""
    if not settings.ENABLE_METRICS:
        return
    SIMULATED_TRIALS.labels(hypothesis=hypothesis).inc(trials)
    SIMULATION_SECONDS.labels(hypothesis=hypothesis).observe(seconds)


def export_metrics(path: Optional[str] = None):
    """Write the registry in text exposition format, if a target is configured."""
    target = path or settings.METRICS_FILE
    if not target or not settings.ENABLE_METRICS:
        return
    write_to_textfile(target, REGISTRY)
    logger.info(f"Metrics written to {target}")
