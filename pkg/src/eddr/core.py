"""Sample summaries, discriminant scores, and the scalar/matrix primitives they need.

The classifier compares squared Euclidean distances to the two group
centroids.  With unequal group sizes the naive sample version of that
score is biased by ``(N1-N2)/(N1*N2) * tr(S)``; ``discriminant_score``
subtracts that term so the score is centred at ``+|mu1-mu2|^2`` under
group 1 and ``-|mu1-mu2|^2`` under group 2.

All cut-offs in this package live on the half scale ``c``: the decision
threshold applied to the score is ``2*c`` (see :func:`classify`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg.lapack import dpstrf
from scipy.special import ndtr, ndtri

from .exceptions import DimensionError, NotPositiveDefiniteError

#: Group labels used throughout.
PI1 = 1
PI2 = 2


@dataclass(frozen=True)
class Dims:
    """Two-group design sizes shared by the moment and variance formulas."""

    n1: int
    n2: int
    p: int

    def __post_init__(self):
        if self.n1 < 2 or self.n2 < 2 or self.p < 1:
            raise DimensionError("need n1, n2 >= 2 and p >= 1")

    @property
    def n_total(self) -> int:
        return self.n1 + self.n2

    @property
    def n(self) -> int:
        return self.n1 + self.n2 - 2

_SYM_RTOL = 1e-12
_PSD_RTOL = 1e-10


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be a 2-d array, got ndim={a.ndim}")
    return a


def _as_vector(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 1:
        raise DimensionError(f"{name} must be a 1-d array, got ndim={a.ndim}")
    return a


def _check_symmetric(a: np.ndarray, name: str, rtol: float = _SYM_RTOL) -> None:
    scale = np.abs(a).max() if a.size else 0.0
    if scale == 0.0:
        return
    if np.abs(a - a.T).max() > rtol * scale:
        raise DimensionError(f"{name} is not symmetric within relative {rtol:g}")


def _check_psd(a: np.ndarray, name: str) -> None:
    """Reject matrices with pivots below ``-1e-10 * tr(a)/p``.

    Uses a pivoted Cholesky factorization on a copy shifted by twice the
    tolerance: positive semidefiniteness within tolerance is equivalent to
    the shifted matrix factorizing completely.
    """
    p = a.shape[0]
    tr = float(np.trace(a))
    if tr <= 0.0:
        # PSD with non-positive trace forces the zero matrix.
        if np.abs(a).max() > 0.0:
            raise NotPositiveDefiniteError(f"{name} has non-positive trace but is not zero")
        return
    shift = 2.0 * _PSD_RTOL * tr / p
    _, _, rank, info = dpstrf(a + shift * np.eye(p), lower=1)
    if info != 0 or rank != p:
        raise NotPositiveDefiniteError(
            f"{name} fails the semidefiniteness check (pivot below -{_PSD_RTOL:g}*tr/p)"
        )


@dataclass(frozen=True)
class LabeledSample:
    """Raw observations for one group: rows are observations, columns features."""

    observations: np.ndarray
    group: int

    def __post_init__(self):
        obs = _as_matrix(self.observations, "observations")
        object.__setattr__(self, "observations", obs)
        if self.group not in (PI1, PI2):
            raise ValueError(f"group must be 1 or 2, got {self.group}")
        if obs.shape[0] < 2:
            raise DimensionError("each group needs at least 2 observations")
        if obs.shape[1] < 1:
            raise DimensionError("need at least one feature column")
        if not np.isfinite(obs).all():
            raise ValueError("observations contain non-finite values")

    @property
    def n_obs(self) -> int:
        return self.observations.shape[0]

    @property
    def p(self) -> int:
        return self.observations.shape[1]


@dataclass(frozen=True)
class TwoSampleSummary:
    """Sufficient statistics of the two training samples.

    ``s`` is the pooled covariance with divisor ``n = n1 + n2 - 2``.  It may
    be singular when p > n; nothing downstream inverts it.
    """

    xbar1: np.ndarray
    xbar2: np.ndarray
    s: np.ndarray
    n1: int
    n2: int

    def __post_init__(self):
        x1 = _as_vector(self.xbar1, "xbar1")
        x2 = _as_vector(self.xbar2, "xbar2")
        s = _as_matrix(self.s, "s")
        object.__setattr__(self, "xbar1", x1)
        object.__setattr__(self, "xbar2", x2)
        object.__setattr__(self, "s", s)
        p = x1.shape[0]
        if x2.shape[0] != p or s.shape != (p, p):
            raise DimensionError("xbar1, xbar2 and s disagree on dimension")
        if self.n < 1:
            raise DimensionError("need n = n1 + n2 - 2 >= 1")
        _check_symmetric(s, "s")
        _check_psd(s, "s")

    @property
    def p(self) -> int:
        return self.xbar1.shape[0]

    @property
    def n(self) -> int:
        return self.n1 + self.n2 - 2

    @property
    def n_total(self) -> int:
        return self.n1 + self.n2

    @property
    def mean_diff(self) -> np.ndarray:
        """xbar1 - xbar2."""
        return self.xbar1 - self.xbar2


@dataclass(frozen=True)
class NormalParams:
    """True population parameters of one group, used by oracles and simulations."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = _as_vector(self.mu, "mu")
        sigma = _as_matrix(self.sigma, "sigma")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        if sigma.shape != (mu.shape[0], mu.shape[0]):
            raise DimensionError("mu and sigma disagree on dimension")
        _check_symmetric(sigma, "sigma")
        cholesky(sigma)  # must be strictly positive definite

    @property
    def p(self) -> int:
        return self.mu.shape[0]


def pooled_summary(s1: LabeledSample, s2: LabeledSample) -> TwoSampleSummary:
    """Column means of both groups and their pooled covariance.

    The pooled covariance sums both groups' centred scatter and divides by
    ``n = N1 + N2 - 2``.
    """
    if s1.p != s2.p:
        raise DimensionError(f"groups disagree on dimension: {s1.p} vs {s2.p}")
    x1, x2 = s1.observations, s2.observations
    xbar1 = x1.mean(axis=0)
    xbar2 = x2.mean(axis=0)
    c1 = x1 - xbar1
    c2 = x2 - xbar2
    n = s1.n_obs + s2.n_obs - 2
    s = (c1.T @ c1 + c2.T @ c2) / n
    s = (s + s.T) / 2.0
    return TwoSampleSummary(xbar1=xbar1, xbar2=xbar2, s=s, n1=s1.n_obs, n2=s2.n_obs)


def oracle_score(x, params1: NormalParams, params2: NormalParams) -> float:
    """Population discriminant score |x-mu2|^2 - |x-mu1|^2."""
    x = _as_vector(x, "x")
    if x.shape[0] != params1.p or params1.p != params2.p:
        raise DimensionError("x and the population parameters disagree on dimension")
    d2 = x - params2.mu
    d1 = x - params1.mu
    return float(d2 @ d2 - d1 @ d1)


def discriminant_score(x, summary: TwoSampleSummary) -> float:
    """Bias-corrected sample discriminant score.

    |x-xbar2|^2 - |x-xbar1|^2 - (n1-n2)/(n1*n2) * tr(s); the correction
    vanishes exactly for balanced designs.
    """
    x = _as_vector(x, "x")
    if x.shape[0] != summary.p:
        raise DimensionError("x and summary disagree on dimension")
    d2 = x - summary.xbar2
    d1 = x - summary.xbar1
    n1, n2 = summary.n1, summary.n2
    bias = 0.0 if n1 == n2 else (n1 - n2) / (n1 * n2) * float(np.trace(summary.s))
    return float(d2 @ d2 - d1 @ d1) - bias


def classify(x, summary: TwoSampleSummary, c: float) -> int:
    """Assign ``x`` to group 1 iff its score exceeds ``2*c``; ties go to group 2.

    ``c`` is the half-scale cut-off produced by the calibration routines.
    """
    if not math.isfinite(c):
        raise ValueError("cut-off must be finite")
    return PI1 if discriminant_score(x, summary) > 2.0 * c else PI2


def std_normal_cdf(x: float) -> float:
    """Standard normal CDF."""
    if not math.isfinite(x):
        raise ValueError("argument must be finite")
    return float(ndtr(x))


def std_normal_pdf(x: float) -> float:
    """Standard normal density."""
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def std_normal_quantile(u: float) -> float:
    """Inverse standard normal CDF on (0, 1)."""
    if not 0.0 < u < 1.0:
        raise ValueError(f"quantile argument must lie strictly in (0,1), got {u}")
    return float(ndtri(u))


def cholesky(a) -> np.ndarray:
    """Lower-triangular Cholesky factor of a symmetric positive definite matrix."""
    a = _as_matrix(a, "a")
    if a.shape[0] != a.shape[1]:
        raise DimensionError("matrix must be square")
    _check_symmetric(a, "a")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"matrix is not positive definite: {exc}") from exc


def sym_sqrt(a) -> np.ndarray:
    """Unique symmetric PSD square root, via a full symmetric eigendecomposition.

    Eigenvalues below ``-1e-10 * |a|`` raise; small negative ones produced by
    round-off are clipped to zero.
    """
    a = _as_matrix(a, "a")
    if a.shape[0] != a.shape[1]:
        raise DimensionError("matrix must be square")
    _check_symmetric(a, "a")
    w, v = np.linalg.eigh(a)
    scale = max(abs(w[0]), abs(w[-1]))
    if w[0] < -_PSD_RTOL * scale:
        raise NotPositiveDefiniteError(
            f"matrix has eigenvalue {w[0]:g} below -{_PSD_RTOL:g}*norm"
        )
    root = v * np.sqrt(np.clip(w, 0.0, None)) @ v.T
    return (root + root.T) / 2.0
