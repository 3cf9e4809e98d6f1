"""Signal model: complex Gaussian draws, population and sample covariances."""
import logging
from enum import Enum
from typing import Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from app.core.errors import DomainError

logger = logging.getLogger(__name__)

# K x N complex arrays; batched variants carry leading axes
ComplexMatrix = np.ndarray

HERMITIAN_TOL = 1e-10
MAX_DIMENSION = 64
CHANNEL_NORM_TOL = 1e-12


class ChannelMode(str, Enum):
    RAYLEIGH = "rayleigh"  # independent unit-norm directions
    ORTHOGONAL = "orthogonal"  # orthonormalised Rayleigh draws, P <= K


def _as_size(size: Union[int, Sequence[int]]) -> Tuple[int, ...]:
    if isinstance(size, (int, np.integer)):
        return (int(size),)
    return tuple(int(s) for s in size)


def db_to_linear(db):
    """10^{dB/10}; -inf maps to 0."""
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def sample_standard_complex_gaussian(
    K: int, N: int, rng: np.random.Generator, size: Union[int, Sequence[int]] = ()
) -> ComplexMatrix:
    """Draw a K x N matrix of i.i.d. CN(0, 1) entries.

    Real and imaginary parts are N(0, 1/2). Draws are laid out trial-major, so
    the values of leading-axis entry i do not depend on how many entries follow.
    """
    if K < 1 or N < 1:
        raise DomainError(f"K and N must be at least 1, got K={K}, N={N}")
    pairs = rng.standard_normal((*_as_size(size), K, N, 2))
    return pairs.view(np.complex128)[..., 0] / np.sqrt(2.0)


def _check_hermitian(A: np.ndarray, tol: float):
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise DomainError(f"Expected square matrices, got shape {A.shape}")
    if A.shape[-1] > MAX_DIMENSION:
        raise DomainError(f"Matrix dimension {A.shape[-1]} exceeds {MAX_DIMENSION}")
    asymmetry = np.linalg.norm(A - np.conj(np.swapaxes(A, -1, -2)), axis=(-2, -1))
    scale = np.linalg.norm(A, axis=(-2, -1))
    if np.any(asymmetry > tol * np.maximum(scale, np.finfo(float).tiny)):
        raise DomainError("Matrix is not Hermitian within tolerance")


def hermitian_eigenvalues(A: np.ndarray, check: bool = True, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Eigenvalues of one or a stack of Hermitian matrices, in descending order."""
    A = np.asarray(A)
    if check:
        _check_hermitian(A, tol)
    return np.linalg.eigvalsh(A)[..., ::-1]


def hermitian_eigh(A: np.ndarray, tol: float = HERMITIAN_TOL) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and matching unitary eigenvectors as columns."""
    A = np.asarray(A)
    _check_hermitian(A, tol)
    w, Q = np.linalg.eigh(A)
    return w[..., ::-1], Q[..., ::-1]


def _hermitian_sqrt(A: np.ndarray) -> np.ndarray:
    w, Q = hermitian_eigh(A)
    root = np.sqrt(np.clip(w, 0.0, None))
    return (Q * root) @ Q.conj().T


class CovarianceModel(BaseModel):
    """Population covariance Σ = σ²(I + Σᵢ snrᵢ uᵢuᵢ†) with its provenance.

    ``shape`` is Σ/σ²; keeping it separate from the noise power lets the same
    channel realisation be re-used under different noise levels.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    K: int
    sigma2: float
    snrs: np.ndarray       # linear SNRs, length P
    channels: np.ndarray   # K x P, unit-norm columns
    shape: np.ndarray      # K x K Hermitian
    shape_sqrt: np.ndarray
    shape_eigs: np.ndarray  # descending
    sigma_eigs: np.ndarray  # descending eigenvalues of Σ

    @model_validator(mode="after")
    def _check_invariants(self):
        if self.sigma2 <= 0:
            raise DomainError(f"Noise power must be positive, got {self.sigma2}")
        if self.channels.shape[1]:
            norms = np.linalg.norm(self.channels, axis=0)
            if np.any(np.abs(norms - 1.0) > CHANNEL_NORM_TOL):
                raise DomainError("Channel vectors must have unit norm")
        floor = self.sigma2 - 1e-9 * max(1.0, float(self.sigma_eigs[0]))
        if np.any(self.sigma_eigs < floor):
            raise DomainError("Covariance eigenvalues fall below the noise power")
        return self

    @property
    def P(self) -> int:
        return int(self.snrs.size)

    @property
    def covariance(self) -> np.ndarray:
        return self.sigma2 * self.shape

    @classmethod
    def assemble(cls, sigma2: float, snrs: np.ndarray, channels: np.ndarray) -> "CovarianceModel":
        if sigma2 <= 0:
            raise DomainError(f"Noise power must be positive, got {sigma2}")
        snrs = np.asarray(snrs, dtype=float)
        K = channels.shape[0]
        shape = np.eye(K, dtype=complex) + (channels * snrs) @ channels.conj().T
        shape = 0.5 * (shape + shape.conj().T)
        shape_eigs = hermitian_eigenvalues(shape)
        return cls(
            K=K,
            sigma2=float(sigma2),
            snrs=snrs,
            channels=channels,
            shape=shape,
            shape_sqrt=_hermitian_sqrt(shape),
            shape_eigs=shape_eigs,
            sigma_eigs=sigma2 * shape_eigs,
        )

    @classmethod
    def spherical(cls, K: int, sigma2: float = 1.0) -> "CovarianceModel":
        """The noise-only model Σ = σ²I."""
        return cls.assemble(sigma2, np.zeros(0), np.zeros((K, 0), dtype=complex))

    @classmethod
    def from_eigenvalues(cls, eigs: Sequence[float], sigma2: float = None) -> "CovarianceModel":
        """A diagonal Σ with the given eigenvalues; σ² defaults to the smallest one."""
        eigs = np.sort(np.asarray(eigs, dtype=float))[::-1]
        sigma2 = float(eigs[-1]) if sigma2 is None else float(sigma2)
        if sigma2 <= 0 or eigs[-1] < sigma2 * (1 - 1e-12):
            raise DomainError(f"Noise power {sigma2} must be positive and not exceed the smallest eigenvalue")
        K = eigs.size
        excess = eigs / sigma2 - 1.0
        active = np.flatnonzero(excess > 0)
        channels = np.eye(K, dtype=complex)[:, active]
        return cls.assemble(sigma2, excess[active], channels)

    def with_noise_power(self, sigma2: float) -> "CovarianceModel":
        """Same channels and SNRs under a different noise power."""
        if sigma2 <= 0:
            raise DomainError(f"Noise power must be positive, got {sigma2}")
        return self.model_copy(update={"sigma2": float(sigma2), "sigma_eigs": sigma2 * self.shape_eigs})


def build_covariance(K: int, sigma2: float, snrs_db: Sequence[float], rng: np.random.Generator,
                     mode: ChannelMode = ChannelMode.RAYLEIGH) -> CovarianceModel:
    """Draw P Rayleigh channels, normalise them and assemble Σ.

    In orthogonal mode the draws are orthonormalised (QR), so the eigenvalues of
    Σ are exactly σ²(1 + snrᵢ) whatever the realisation.
    """
    if sigma2 <= 0:
        raise DomainError(f"Noise power must be positive, got {sigma2}")
    snrs = db_to_linear(list(snrs_db))
    if mode is ChannelMode.ORTHOGONAL and snrs.size > K:
        raise DomainError(f"Orthogonal channels need P <= K, got P={snrs.size}, K={K}")
    if not snrs.size:
        channels = np.zeros((K, 0), dtype=complex)
    elif mode is ChannelMode.ORTHOGONAL:
        channels, _ = np.linalg.qr(sample_standard_complex_gaussian(K, snrs.size, rng))
    else:
        H = sample_standard_complex_gaussian(K, snrs.size, rng)
        channels = H / np.linalg.norm(H, axis=0)
    model = CovarianceModel.assemble(sigma2, snrs, channels)
    logger.debug(f"Covariance built: K={K}, P={snrs.size}, eigenvalues={model.sigma_eigs}")
    return model


def sample_covariance_matrix(
    model: CovarianceModel, N: int, rng: np.random.Generator, size: Union[int, Sequence[int]] = ()
) -> ComplexMatrix:
    """R = XX† with X = Σ^{1/2} G, G a fresh K x N standard complex Gaussian draw."""
    if N < 1:
        raise DomainError(f"N must be at least 1, got {N}")
    G = sample_standard_complex_gaussian(model.K, N, rng, size)
    X = np.sqrt(model.sigma2) * (model.shape_sqrt @ G)
    return X @ np.conj(np.swapaxes(X, -1, -2))
