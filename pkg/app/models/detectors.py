"""Eigenvalue-based test statistics.

Each statistic takes the eigenvalues of R = XX† along the last axis, so a
stack of shape (trials, K) is scored in one call and one eigendecomposition per
trial serves every detector. With ``strict=True`` (the default) a violated
precondition raises; the Monte-Carlo engine passes ``strict=False`` and gets
NaN for the offending rows instead.
"""
from enum import Enum
from typing import Callable, Dict, Iterable, Optional, Union

import numpy as np

from app.core.errors import DomainError


ArrayLike = Union[float, np.ndarray]

# floor below which an eigenvalue counts as exactly zero (relative to λ₁ for ST)
UNDERFLOW_RATIO = 1e-300


def _prepare(eigs, min_dim: int = 1) -> np.ndarray:
    lam = np.asarray(eigs, dtype=float)
    if lam.ndim == 0 or lam.shape[-1] < min_dim:
        raise DomainError(f"Need at least {min_dim} eigenvalues, got shape {lam.shape}")
    return lam


def _finish(values: np.ndarray, eigs) -> ArrayLike:
    return float(values) if np.ndim(eigs) == 1 else values


def _check_trace(total: np.ndarray, strict: bool, name: str):
    if strict and np.any(~(total > 0)):
        raise DomainError(f"{name} statistic undefined for zero trace")


def st_statistic(eigs, strict: bool = True) -> ArrayLike:
    """Spherical test: Πλᵢ / ((1/K)Σλᵢ)^K, in [0, 1]."""
    lam = np.clip(_prepare(eigs, min_dim=2), 0.0, None)
    K = lam.shape[-1]
    total = lam.sum(axis=-1)
    _check_trace(total, strict, "ST")
    largest = lam.max(axis=-1)
    singular = np.any(lam <= UNDERFLOW_RATIO * largest[..., None], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_value = np.log(lam).sum(axis=-1) - K * np.log(total / K)
        value = np.minimum(np.exp(log_value), 1.0)
    value = np.where(singular, 0.0, value)
    value = np.where(total > 0, value, np.nan)
    return _finish(value, eigs)


def er_statistic(eigs, strict: bool = True, rank: Optional[int] = None) -> ArrayLike:
    """Eigenvalue ratio λ₁/λ_K; +inf when λ_K <= 1e-300.

    ``rank`` is the known rank of R (min(N, K) for N samples). Below K the
    smallest eigenvalue is zero in exact arithmetic and the solver only returns
    rounding noise, so every row is +inf.
    """
    lam = _prepare(eigs, min_dim=2)
    K = lam.shape[-1]
    largest = lam.max(axis=-1)
    smallest = lam.min(axis=-1)
    degenerate = smallest <= UNDERFLOW_RATIO
    if rank is not None and rank < K:
        degenerate = np.ones_like(degenerate, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.where(degenerate, np.inf, largest / np.where(degenerate, 1.0, smallest))
    return _finish(value, eigs)


def john_statistic(eigs, strict: bool = True) -> ArrayLike:
    """John's test Σλᵢ²/(Σλᵢ)², in [1/K, 1]."""
    lam = _prepare(eigs)
    total = lam.sum(axis=-1)
    _check_trace(total, strict, "John")
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.where(total > 0, (lam ** 2).sum(axis=-1) / total ** 2, np.nan)
    return _finish(value, eigs)


def le_statistic(eigs, strict: bool = True) -> ArrayLike:
    """Largest eigenvalue λ₁."""
    return _finish(_prepare(eigs).max(axis=-1), eigs)


def sle_statistic(eigs, strict: bool = True) -> ArrayLike:
    """Scaled largest eigenvalue λ₁/tr(R), in [1/K, 1]."""
    lam = _prepare(eigs)
    total = lam.sum(axis=-1)
    _check_trace(total, strict, "SLE")
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.where(total > 0, lam.max(axis=-1) / total, np.nan)
    return _finish(value, eigs)


def ed_statistic(eigs, strict: bool = True) -> ArrayLike:
    """Cooperative energy detector ‖X‖²_F = tr(R)."""
    return _finish(_prepare(eigs).sum(axis=-1), eigs)


class Direction(str, Enum):
    """Side of the threshold on which a detector declares H1."""
    SMALL = "small"
    LARGE = "large"


class DetectorKind(str, Enum):
    ST = "ST"
    ER = "ER"
    JOHN = "JOHN"
    LE = "LE"
    SLE = "SLE"
    ED = "ED"

    @property
    def h1_direction(self) -> Direction:
        # ST declares H0 above the threshold; the others declare H1 above it
        return Direction.SMALL if self is DetectorKind.ST else Direction.LARGE

    @property
    def scale_invariant(self) -> bool:
        return self not in (DetectorKind.LE, DetectorKind.ED)

    @property
    def statistic(self) -> Callable[..., ArrayLike]:
        return STATISTICS[self]


STATISTICS: Dict[DetectorKind, Callable[..., ArrayLike]] = {
    DetectorKind.ST: st_statistic,
    DetectorKind.ER: er_statistic,
    DetectorKind.JOHN: john_statistic,
    DetectorKind.LE: le_statistic,
    DetectorKind.SLE: sle_statistic,
    DetectorKind.ED: ed_statistic,
}


def parse_detectors(names: Iterable[str]) -> list:
    """Map detector names (case-insensitive, comma lists allowed) to kinds, keeping order."""
    kinds = []
    for raw in names:
        for name in str(raw).split(","):
            name = name.strip().upper()
            if not name:
                continue
            try:
                kind = DetectorKind(name)
            except ValueError:
                raise DomainError(f"Unknown detector '{name}', expected one of {[k.value for k in DetectorKind]}")
            if kind not in kinds:
                kinds.append(kind)
    return kinds


def evaluate_detectors(eigs: np.ndarray, detectors: Iterable[DetectorKind], strict: bool = False,
                       rank: Optional[int] = None) -> Dict[DetectorKind, np.ndarray]:
    """Score a (trials, K) eigenvalue stack with every requested detector.

    ``rank`` is forwarded to ER only.
    """
    scores = {}
    for kind in detectors:
        if kind is DetectorKind.ER:
            scores[kind] = np.asarray(er_statistic(eigs, strict=strict, rank=rank))
        else:
            scores[kind] = np.asarray(kind.statistic(eigs, strict=strict))
    return scores
