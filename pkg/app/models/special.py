"""Scalar special functions used by the analytic performance formulas.

Everything that can overflow is evaluated in the log domain. Gamma-type
quantities come from ``scipy.special``; this module adds argument checking,
the signed-log Pochhammer symbol and a bracketed inverse of the regularized
incomplete Beta function.
"""
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import optimize, special

from app.core.errors import DomainError

ArrayLike = Union[float, np.ndarray]

# Pochhammer symbols with at most this many factors are multiplied out directly
_DIRECT_PRODUCT_MAX = 64


@dataclass(frozen=True)
class SignedLogValue:
    """A real number stored as (log|value|, sign); sign 0 means exactly zero."""
    log_abs: float
    sign: int

    @property
    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_abs)

    def __mul__(self, other: "SignedLogValue") -> "SignedLogValue":
        if self.sign == 0 or other.sign == 0:
            return ZERO
        return SignedLogValue(self.log_abs + other.log_abs, self.sign * other.sign)

    def reciprocal(self) -> "SignedLogValue":
        if self.sign == 0:
            raise DomainError("Reciprocal of zero")
        return SignedLogValue(-self.log_abs, self.sign)


ZERO = SignedLogValue(0.0, 0)
ONE = SignedLogValue(0.0, 1)


def _scalar_or_array(result: np.ndarray, like) -> ArrayLike:
    return float(result) if np.ndim(like) == 0 else result


def log_gamma(x: ArrayLike) -> ArrayLike:
    """Natural log of the Gamma function for positive arguments."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"log_gamma requires x > 0, got {x}")
    return _scalar_or_array(special.gammaln(arr), x)


def multivariate_log_gamma(K: int, N: float) -> float:
    """ln Γ_K(N) for the complex multivariate Gamma function.

    Γ_K(N) = π^{K(K-1)/2} Γ(N) Γ(N-1) ... Γ(N-K+1). Note this is the complex
    normalisation, not the real one implemented by ``scipy.special.multigammaln``.
    """
    if K < 1:
        raise DomainError(f"K must be at least 1, got {K}")
    if N <= K - 1:
        raise DomainError(f"multivariate_log_gamma requires N > K - 1, got K={K}, N={N}")
    shifts = N - np.arange(K)
    return 0.5 * K * (K - 1) * math.log(math.pi) + math.fsum(special.gammaln(shifts))


def _check_beta_shape(a: float, b: float):
    if not (a > 0 and b > 0):
        raise DomainError(f"Beta parameters must be positive, got a={a}, b={b}")


def regularized_incomplete_beta(y: ArrayLike, a: float, b: float) -> ArrayLike:
    """I_y(a, b) = B_y(a, b) / B(a, b), with y clamped to [0, 1]."""
    _check_beta_shape(a, b)
    clamped = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
    return _scalar_or_array(special.betainc(a, b, clamped), y)


def _invert_beta_scalar(p: float, a: float, b: float) -> float:
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return 1.0
    return optimize.brentq(
        lambda y: special.betainc(a, b, y) - p,
        0.0,
        1.0,
        xtol=np.finfo(float).tiny,
        rtol=4 * np.finfo(float).eps,
        maxiter=500,
    )


def inverse_regularized_incomplete_beta(p: ArrayLike, a: float, b: float) -> ArrayLike:
    """Solve I_y(a, b) = p for y by Brent's method on the bracket [0, 1]."""
    _check_beta_shape(a, b)
    arr = np.asarray(p, dtype=float)
    if np.any((arr < 0.0) | (arr > 1.0)) or np.any(np.isnan(arr)):
        raise DomainError(f"Probability must lie in [0, 1], got {p}")
    result = np.array([_invert_beta_scalar(float(v), a, b) for v in arr.ravel()])
    return _scalar_or_array(result.reshape(arr.shape), p)


def pochhammer_signed(x: float, n: int) -> SignedLogValue:
    """Rising factorial (x)_n = Γ(x+n)/Γ(x) with exact sign tracking.

    For n <= -1 the analytic continuation 1/((x-1)(x-2)...(x+n)) is used.
    """
    if int(n) != n:
        raise DomainError(f"Pochhammer index must be an integer, got {n}")
    n = int(n)
    x = float(x)
    if n == 0:
        return ONE
    if n < 0:
        denominator = pochhammer_signed(x + n, -n)
        if denominator.sign == 0:
            raise DomainError(f"Pochhammer ({x})_{n} has a pole")
        return denominator.reciprocal()

    if n <= _DIRECT_PRODUCT_MAX:
        factors = x + np.arange(n)
        if np.any(factors == 0):
            return ZERO
        negatives = int(np.count_nonzero(factors < 0))
        return SignedLogValue(math.fsum(np.log(np.abs(factors))), -1 if negatives % 2 else 1)

    last = x + n - 1
    if x > 0:
        return SignedLogValue(float(special.gammaln(x + n) - special.gammaln(x)), 1)
    if x.is_integer() and last >= 0:
        return ZERO
    if last < 0:
        # every factor negative: (x)_n = (-1)^n (1-x-n)_n
        magnitude = pochhammer_signed(-last, n)
        return SignedLogValue(magnitude.log_abs, -1 if n % 2 else 1)
    sign = special.gammasgn(x + n) * special.gammasgn(x)
    return SignedLogValue(float(special.gammaln(x + n) - special.gammaln(x)), int(sign))
