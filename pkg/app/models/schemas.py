from enum import Enum
import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator
from sklearn import metrics

from app.models.detectors import DetectorKind


class Hypothesis(str, Enum):
    H0 = "H0"  # noise only
    H1 = "H1"  # at least one primary user transmitting


class CurveSource(str, Enum):
    ANALYTIC = "analytic"
    EMPIRICAL = "empirical"
    EXACT = "exact"


class RocCurve(BaseModel):
    """Ordered (Pfa, Pd) pairs for one detector."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    detector: DetectorKind
    source: CurveSource
    pfa: np.ndarray
    pd: np.ndarray

    @model_validator(mode="after")
    def _check_points(self):
        if self.pfa.shape != self.pd.shape or self.pfa.ndim != 1:
            raise ValueError("pfa and pd must be 1-d arrays of equal length")
        if np.any(np.diff(self.pfa) < 0):
            raise ValueError("pfa must be nondecreasing along the curve")
        if np.any((self.pd < 0) | (self.pd > 1)):
            raise ValueError("pd must lie in [0, 1]")
        return self

    def pd_at(self, pfa: float) -> float:
        """Detection probability at a false-alarm level, linearly interpolated."""
        return float(np.interp(pfa, self.pfa, self.pd))

    def auc(self) -> float:
        """Area under the curve, closed with the (0, 0) and (1, 1) corners."""
        x = np.concatenate(([0.0], self.pfa, [1.0]))
        y = np.concatenate(([0.0], self.pd, [1.0]))
        return float(metrics.auc(x, y))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "detector": self.detector.value,
            "source": self.source.value,
            "pfa": self.pfa,
            "pd": self.pd,
        })
