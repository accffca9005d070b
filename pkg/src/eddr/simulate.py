"""Monte Carlo study of the calibrated rule's attained error and confidence.

Each trial draws fresh training data from a two-group Gaussian design
with a banded correlation matrix, calibrates a cut-off from that data
alone, and then evaluates the *exact* conditional misclassification
error of the fitted rule using the true population parameters: given the
training statistics, the score of a new group-1 point is Gaussian, so
the error is Phi((U + bias + c)/sqrt(V)) with

    U    = (xbar1-xbar2)'(xbar1-mu1) - |xbar1-xbar2|^2 / 2,
    V    = (xbar1-xbar2)' Sigma (xbar1-xbar2),
    bias = (1/n2 - 1/n1) * p * a1_hat / 2.

No test points are ever classified.  Aggregating the per-trial errors
gives the attained error rate (for expected-error calibration) and the
attained confidence level (for confidence calibration).

Reproducibility contract: trial i draws all of its randomness from a
substream derived from (seed, i), so results are bit-identical for any
worker count and any scheduling order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse
from scipy.linalg import toeplitz

from .calibration import (
    DEFAULT_LOGIT_SPREAD,
    DEFAULT_M2_ANCHOR,
    CutoffRequest,
    CutoffVariant,
    calibrate,
    m1_cutoff,
)
from .core import Dims, LabeledSample, cholesky, pooled_summary, std_normal_cdf, sym_sqrt
from .error_model import DEFAULT_LOGIT_VARIANCE, LimitParams
from .estimators import (
    a1_from_traces,
    a2_from_traces,
    delta0_from_stats,
    delta1_from_stats,
    estimate_all,
)
from .exceptions import CalibrationInfeasibleError, DimensionError, SimulationError

#: Separation between the group means on the squared-distance scale used
#: by the simulation design: mu1 is placed so that Sigma^{-1/2} mu1 has
#: squared norm 5 regardless of dimension, mu2 at the origin.
DESIGN_SEPARATION = 5.0

#: Largest tolerated fraction of trials lost to calibration infeasibility.
MAX_EXCLUDED_FRACTION = 1e-3


@dataclass(frozen=True)
class SimConfig:
    """Design and execution parameters of one simulation run."""

    p: int
    n1: int
    n2: int
    rho: float
    reps: int
    seed: int
    request: CutoffRequest
    bandwidth: int = 50
    workers: int = 1
    logit_variance: str = DEFAULT_LOGIT_VARIANCE
    anchor: str = DEFAULT_M2_ANCHOR
    theta_source: str = "estimator"
    logit_spread: str = DEFAULT_LOGIT_SPREAD

    def __post_init__(self):
        if self.p < 1 or self.n1 < 2 or self.n2 < 2:
            raise DimensionError("need p >= 1 and n1, n2 >= 2")
        if not abs(self.rho) < 1:
            raise ValueError("rho must satisfy |rho| < 1")
        if self.bandwidth < 0:
            raise ValueError("bandwidth must be nonnegative")
        if self.reps < 1:
            raise ValueError("reps must be positive")
        if self.workers < 1:
            raise ValueError("workers must be positive")

    @property
    def dims(self) -> Dims:
        return Dims(n1=self.n1, n2=self.n2, p=self.p)


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one feasible trial."""

    cond_error: float
    cutoff: float
    fell_back: bool

    def __post_init__(self):
        if not 0.0 < self.cond_error < 1.0:
            raise SimulationError(
                f"conditional error {self.cond_error:g} left the open unit interval"
            )


class AggregateStat(NamedTuple):
    value: float
    se: float


def band_sigma(p: int, rho: float, bandwidth: int = 50) -> np.ndarray:
    """Correlation matrix with entries rho^|i-j| inside the band, 0 outside.

    Unit diagonal by construction; positive definiteness is verified by a
    Cholesky factorization.
    """
    if not abs(rho) < 1:
        raise ValueError("rho must satisfy |rho| < 1")
    first = np.zeros(p)
    k = np.arange(min(bandwidth, p - 1) + 1)
    first[k] = rho ** k.astype(float)
    first[0] = 1.0
    sigma = toeplitz(first)
    cholesky(sigma)  # raises NotPositiveDefiniteError on failure
    return sigma


def design_means(sigma) -> tuple[np.ndarray, np.ndarray]:
    """Group means with whitened separation sqrt(5/p) per coordinate.

    mu1 = sigma^{1/2} (5/p)^{1/2} 1, mu2 = 0; then |mu1 - mu2|^2 equals
    (5/p) 1' sigma 1.
    """
    sigma = np.asarray(sigma, dtype=float)
    p = sigma.shape[0]
    root = sym_sqrt(sigma)
    mu1 = root @ np.full(p, math.sqrt(DESIGN_SEPARATION / p))
    return mu1, np.zeros(p)


@dataclass(frozen=True)
class PopulationDesign:
    """True parameters of the data-generating process, factorized for sampling."""

    mu1: np.ndarray
    mu2: np.ndarray
    sigma: np.ndarray
    chol: np.ndarray
    chol_sparse: object = None  # scipy CSR copy when the factor is mostly zeros

    @classmethod
    def from_sigma(cls, sigma, mu1, mu2) -> "PopulationDesign":
        chol = cholesky(sigma)
        sparse = None
        density = np.count_nonzero(chol) / chol.size
        if density < 0.25:
            sparse = scipy.sparse.csr_matrix(chol)
        return cls(mu1=np.asarray(mu1, float), mu2=np.asarray(mu2, float),
                   sigma=np.asarray(sigma, float), chol=chol, chol_sparse=sparse)

    @classmethod
    def from_params(cls, params1, params2) -> "PopulationDesign":
        """Build from two NormalParams sharing one covariance matrix."""
        if params1.sigma.shape != params2.sigma.shape or not np.array_equal(
            params1.sigma, params2.sigma
        ):
            raise DimensionError("both groups must share the same covariance matrix")
        return cls.from_sigma(params1.sigma, params1.mu, params2.mu)

    @property
    def p(self) -> int:
        return self.mu1.shape[0]

    def sample_group(self, mu: np.ndarray, rows: int, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal((rows, self.p))
        if self.chol_sparse is not None:
            return (self.chol_sparse @ z.T).T + mu
        return z @ self.chol.T + mu


def make_population(cfg: SimConfig) -> PopulationDesign:
    sigma = band_sigma(cfg.p, cfg.rho, cfg.bandwidth)
    mu1, mu2 = design_means(sigma)
    return PopulationDesign.from_sigma(sigma, mu1, mu2)


class ErrorInputs(NamedTuple):
    """Per-trial ingredients of the exact conditional error."""

    u: float
    v: float
    a1: float
    n1: int
    n2: int
    p: int

    @property
    def bias(self) -> float:
        return (1.0 / self.n2 - 1.0 / self.n1) * self.p * self.a1 / 2.0

    @property
    def u_tilde(self) -> float:
        return self.u + self.bias


def error_inputs(x1: np.ndarray, x2: np.ndarray, pop: PopulationDesign) -> ErrorInputs:
    """U, V and the trace estimate entering the conditional-error formula."""
    n1, n2 = x1.shape[0], x2.shape[0]
    p = pop.p
    xbar1 = x1.mean(axis=0)
    xbar2 = x2.mean(axis=0)
    d = xbar1 - xbar2
    u = float(d @ (xbar1 - pop.mu1)) - 0.5 * float(d @ d)
    v = float(d @ (pop.sigma @ d))
    c1 = x1 - xbar1
    c2 = x2 - xbar2
    t1 = (float(np.vdot(c1, c1)) + float(np.vdot(c2, c2))) / (n1 + n2 - 2)
    return ErrorInputs(u=u, v=v, a1=t1 / p, n1=n1, n2=n2, p=p)


def conditional_error(err: ErrorInputs, c: float) -> float:
    """Exact group-1 error probability of the rule with half-scale cut-off c."""
    return std_normal_cdf((err.u_tilde + c) / math.sqrt(err.v))


def _m1_cutoff_fast(x1, x2, alpha: float) -> float:
    """Expected-error cut-off without materializing the p x p covariance.

    tr(S) and tr(S^2) come from Gram matrices of the centred rows, so the
    per-trial cost stays O(N^2 p) even when p is large.
    """
    n1, n2 = x1.shape[0], x2.shape[0]
    p = x1.shape[1]
    n = n1 + n2 - 2
    xbar1 = x1.mean(axis=0)
    xbar2 = x2.mean(axis=0)
    c1 = x1 - xbar1
    c2 = x2 - xbar2
    t1 = (float(np.vdot(c1, c1)) + float(np.vdot(c2, c2))) / n
    g11 = c1 @ c1.T
    g12 = c1 @ c2.T
    g22 = c2 @ c2.T
    t2 = (float(np.vdot(g11, g11)) + 2.0 * float(np.vdot(g12, g12)) + float(np.vdot(g22, g22))) / n**2
    d = xbar1 - xbar2
    q0 = float(d @ d)
    q1 = (float(np.sum((c1 @ d) ** 2)) + float(np.sum((c2 @ d) ** 2))) / n
    a1 = a1_from_traces(t1, p)
    a2 = a2_from_traces(t1, t2, n, p)
    d0 = delta0_from_stats(q0, a1, n1, n2, p)
    d1 = delta1_from_stats(q1, a2, n1, n2, p)
    lp = LimitParams(u0=-d0 / 2.0, v0=d1 + (n1 + n2) * p * a2 / (n1 * n2), dims=Dims(n1, n2, p))
    return m1_cutoff(lp, alpha).c


def run_trial(cfg: SimConfig, pop: PopulationDesign, rng: np.random.Generator) -> TrialRecord:
    """One full trial: sample, calibrate, and evaluate the conditional error.

    Raises :class:`CalibrationInfeasibleError` when the drawn data do not
    admit the requested cut-off; the driver counts such trials separately.
    """
    x1 = pop.sample_group(pop.mu1, cfg.n1, rng)
    x2 = pop.sample_group(pop.mu2, cfg.n2, rng)
    if cfg.request.variant == CutoffVariant.M1:
        c = _m1_cutoff_fast(x1, x2, cfg.request.alpha)
        fell_back = False
    else:
        summary = pooled_summary(
            LabeledSample(observations=x1, group=1),
            LabeledSample(observations=x2, group=2),
        )
        traces, deltas = estimate_all(summary)
        outcome = calibrate(
            traces,
            deltas,
            cfg.dims,
            cfg.request,
            logit_variance=cfg.logit_variance,
            anchor=cfg.anchor,
            theta_source=cfg.theta_source,
            logit_spread=cfg.logit_spread,
        )
        c = outcome.result.c
        fell_back = outcome.result.fell_back
    err = error_inputs(x1, x2, pop)
    ce = conditional_error(err, c)
    # an extreme trial can underflow the error probability to 0.0 or 1.0 in
    # double precision; the mathematical value is strictly interior
    if ce <= 0.0:
        ce = math.nextafter(0.0, 1.0)
    elif ce >= 1.0:
        ce = math.nextafter(1.0, 0.0)
    return TrialRecord(cond_error=ce, cutoff=c, fell_back=fell_back)


def _trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed & (2**64 - 1), index)))


def _run_chunk(cfg: SimConfig, pop: PopulationDesign, start: int, stop: int):
    out = []
    for i in range(start, stop):
        try:
            out.append(run_trial(cfg, pop, _trial_rng(cfg.seed, i)))
        except CalibrationInfeasibleError:
            out.append(None)
    return out


@dataclass(frozen=True)
class SimResult:
    """Feasible trial records (in trial order) plus exclusion accounting."""

    config: SimConfig
    records: tuple
    n_excluded: int

    @property
    def n_fell_back(self) -> int:
        return sum(1 for r in self.records if r.fell_back)


def run_simulation(cfg: SimConfig, pop: PopulationDesign | None = None) -> SimResult:
    """Run ``cfg.reps`` independent trials, optionally across processes.

    Fails with :class:`SimulationError` if more than 0.1% of the trials
    had to be excluded for calibration infeasibility.
    """
    if pop is None:
        pop = make_population(cfg)
    if cfg.workers == 1 or cfg.reps < 4 * cfg.workers:
        raw = _run_chunk(cfg, pop, 0, cfg.reps)
    else:
        chunk = max(1, math.ceil(cfg.reps / (cfg.workers * 8)))
        bounds = [(s, min(s + chunk, cfg.reps)) for s in range(0, cfg.reps, chunk)]
        raw = []
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for part in pool.map(_run_chunk, *zip(*[(cfg, pop, a, b) for a, b in bounds])):
                raw.extend(part)
    records = tuple(r for r in raw if r is not None)
    n_excluded = cfg.reps - len(records)
    if n_excluded > MAX_EXCLUDED_FRACTION * cfg.reps:
        raise SimulationError(
            f"{n_excluded} of {cfg.reps} trials were calibration-infeasible "
            f"(> {MAX_EXCLUDED_FRACTION:.1%} allowed)"
        )
    return SimResult(config=cfg, records=records, n_excluded=n_excluded)


def _errors(records: Sequence[TrialRecord]) -> np.ndarray:
    if len(records) == 0:
        raise ValueError("need at least one trial record")
    return np.array([r.cond_error for r in records])


def attained_error_rate(records: Sequence[TrialRecord]) -> AggregateStat:
    """Mean conditional error across trials, with its Monte Carlo SE."""
    ce = _errors(records)
    se = ce.std(ddof=1) / math.sqrt(len(ce)) if len(ce) > 1 else math.nan
    return AggregateStat(value=float(ce.mean()), se=float(se))


def attained_confidence_level(records: Sequence[TrialRecord], eu: float) -> AggregateStat:
    """Fraction of trials whose conditional error stayed at or below eu."""
    ce = _errors(records)
    frac = float(np.mean(ce <= eu))
    se = math.sqrt(frac * (1.0 - frac) / len(ce))
    return AggregateStat(value=frac, se=se)


def with_request(cfg: SimConfig, request: CutoffRequest) -> SimConfig:
    """Same design and seed, different calibration policy (shared data)."""
    return replace(cfg, request=request)


__all__ = [
    "SimConfig",
    "TrialRecord",
    "SimResult",
    "AggregateStat",
    "PopulationDesign",
    "band_sigma",
    "design_means",
    "make_population",
    "error_inputs",
    "conditional_error",
    "run_trial",
    "run_simulation",
    "attained_error_rate",
    "attained_confidence_level",
    "with_request",
    "DESIGN_SEPARATION",
]
