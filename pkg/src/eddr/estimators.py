"""Consistent estimators of spectral and signal-strength functionals.

Two families are estimated from a :class:`~eddr.core.TwoSampleSummary`:

* ``a_i = tr(Sigma^i) / p`` for i = 1..4, from traces of powers of the
  pooled covariance, with bias corrections that make a1..a4 exactly
  unbiased under Gaussian sampling;
* ``Delta_i = delta' Sigma^i delta`` for i = 0..3 with
  ``delta = mu1 - mu2``, from quadratic forms of the sample mean
  difference, re-centred to remove the inflation caused by the mean
  difference's own sampling noise.

The bias-corrected forms are *not* truncated at zero: in finite samples
a2..a4 and the Delta estimates can come out negative, and downstream
calibration is expected to detect and reject infeasible combinations
rather than have them silently clamped here.

The ``*_from_traces`` kernels operate on plain scalars (or numpy arrays,
elementwise) so that batched Monte Carlo checks can reuse them; the
public ``*_hat`` functions take a summary and match the formulas above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TwoSampleSummary
from .exceptions import DimensionError


@dataclass(frozen=True)
class TraceEstimates:
    """Estimates of tr(Sigma^i)/p for i = 1..4, with (p, n) for provenance."""

    a1: float
    a2: float
    a3: float
    a4: float
    p: int
    n: int


@dataclass(frozen=True)
class DeltaEstimates:
    """Estimates of delta' Sigma^i delta for i = 0..3."""

    d0: float
    d1: float
    d2: float
    d3: float


def _require_n(n: int, minimum: int, what: str) -> None:
    if n < minimum:
        raise DimensionError(f"{what} requires n >= {minimum}, got n = {n}")


# ---------------------------------------------------------------------------
# scalar kernels on traces t_i = tr(S^i) and quadratic forms q_i = d' S^i d
# ---------------------------------------------------------------------------

def a1_from_traces(t1, p):
    return t1 / p


def a2_from_traces(t1, t2, n, p):
    return n**2 / (p * (n + 2) * (n - 1)) * (t2 - t1**2 / n)


def a3_from_traces(t1, t2, t3, n, p):
    return (
        n**2
        / ((n + 4) * (n + 2) * (n - 1) * (n - 2) * p)
        * (n**2 * t3 - 3 * n * t2 * t1 + 2 * t1**3)
    )


def a4_coefficients(n):
    """The five rational coefficients of the fourth-power trace estimator."""
    den = (n + 6) * (n + 4) * (n + 2) * (n + 1) * (n - 1) * (n - 2) * (n - 3)
    b1 = n**5 * (n**2 + n + 2) / den
    b2 = -4 * n**4 * (n**2 + n + 2) / den
    b3 = -(n**4) * (2 * n**2 + 3 * n - 6) / den
    b4 = 2 * n**4 * (5 * n + 6) / den
    b5 = -(n**3) * (5 * n + 6) / den
    return b1, b2, b3, b4, b5


def a4_from_traces(t1, t2, t3, t4, n, p):
    b1, b2, b3, b4, b5 = a4_coefficients(n)
    return (b1 * t4 + b2 * t3 * t1 + b3 * t2**2 + b4 * t1**2 * t2 + b5 * t1**4) / p


def delta0_from_stats(q0, a1, n1, n2, p):
    return q0 - (n1 + n2) * p / (n1 * n2) * a1


def delta1_from_stats(q1, a2, n1, n2, p):
    return q1 - (n1 + n2) * p / (n1 * n2) * a2


def delta2_from_stats(q2, d1, a1, a2, a3, n, n1, n2, p):
    centre = (n1 + n2) * p / (n1 * n2) * ((n + 1) / n * a3 + p / n * a1 * a2)
    return (q2 - p / n * a1 * d1 - centre) / (1 + 1 / n)


def delta3_from_stats(q3, d1, d2, a1, a2, a3, a4, n, n1, n2, p, literal_squared=False):
    # The re-centring construction is linear in d1 and d2; the squared
    # variant breaks the estimator's homogeneity degree and is kept only
    # for comparison (see delta3_hat).
    if literal_squared:
        d1, d2 = d1**2, d2**2
    lead = (n * (n + 3) + 4) / n**2
    centre = (n1 + n2) * p / (n1 * n2) * (
        lead * a4 + (n + 1) * p / n**2 * a2**2 + 2 * (n + 1) * p / n**2 * a1 * a3 + p**2 / n**2 * a1**2 * a2
    )
    num = q3 - (n + 1) * p / n**2 * a2 * d1 - 2 * (n + 1) * p / n**2 * a1 * d2 - p**2 / n**2 * a1**2 * d1 - centre
    return num / lead


# ---------------------------------------------------------------------------
# summary-based operations
# ---------------------------------------------------------------------------

def _trace_power_stats(summary: TwoSampleSummary):
    """(t1, t2, t3, t4, q0, q1, q2, q3) with a single p x p matrix product."""
    s = summary.s
    d = summary.mean_diff
    s2 = s @ s
    t1 = float(np.trace(s))
    t2 = float(np.vdot(s, s))
    t3 = float(np.vdot(s2, s))
    t4 = float(np.vdot(s2, s2))
    sd = s @ d
    q0 = float(d @ d)
    q1 = float(d @ sd)
    q2 = float(sd @ sd)
    q3 = float(sd @ (s @ sd))
    return t1, t2, t3, t4, q0, q1, q2, q3


def a1_hat(summary: TwoSampleSummary) -> float:
    """tr(S)/p."""
    return float(np.trace(summary.s)) / summary.p


def a2_hat(summary: TwoSampleSummary) -> float:
    """Unbiased estimate of tr(Sigma^2)/p from tr(S^2) and (tr S)^2."""
    _require_n(summary.n, 2, "a2_hat")
    t1 = float(np.trace(summary.s))
    t2 = float(np.vdot(summary.s, summary.s))
    return float(a2_from_traces(t1, t2, summary.n, summary.p))


def a3_hat(summary: TwoSampleSummary) -> float:
    """Estimate of tr(Sigma^3)/p from traces of the first three powers of S."""
    _require_n(summary.n, 5, "a3_hat")
    t1, t2, t3, _, *_ = _trace_power_stats(summary)
    return float(a3_from_traces(t1, t2, t3, summary.n, summary.p))


def a4_hat(summary: TwoSampleSummary) -> float:
    """Estimate of tr(Sigma^4)/p from traces of the first four powers of S."""
    _require_n(summary.n, 7, "a4_hat")
    t1, t2, t3, t4, *_ = _trace_power_stats(summary)
    return float(a4_from_traces(t1, t2, t3, t4, summary.n, summary.p))


def delta0_hat(summary: TwoSampleSummary) -> float:
    """Estimate of |mu1-mu2|^2: |xbar1-xbar2|^2 minus its sampling inflation."""
    d = summary.mean_diff
    return float(delta0_from_stats(d @ d, a1_hat(summary), summary.n1, summary.n2, summary.p))


def delta1_hat(summary: TwoSampleSummary) -> float:
    """Estimate of delta' Sigma delta, re-centred with the a2 estimate."""
    d = summary.mean_diff
    q1 = float(d @ (summary.s @ d))
    return float(delta1_from_stats(q1, a2_hat(summary), summary.n1, summary.n2, summary.p))


def delta2_hat(summary: TwoSampleSummary, traces: TraceEstimates, d1: float) -> float:
    """Estimate of delta' Sigma^2 delta given the trace estimates and d1."""
    _require_n(summary.n, 5, "delta2_hat")
    d = summary.mean_diff
    sd = summary.s @ d
    q2 = float(sd @ sd)
    return float(
        delta2_from_stats(
            q2, d1, traces.a1, traces.a2, traces.a3, summary.n, summary.n1, summary.n2, summary.p
        )
    )


def delta3_hat(
    summary: TwoSampleSummary,
    traces: TraceEstimates,
    d1: float,
    d2: float,
    literal_squared: bool = False,
) -> float:
    """Estimate of delta' Sigma^3 delta given the trace estimates, d1 and d2.

    ``literal_squared=True`` switches the d1/d2 re-centring terms to their
    squared variants for comparison; the default linear form is the one
    whose expectation is exactly the target and is degree-8 homogeneous
    under data scaling.
    """
    _require_n(summary.n, 7, "delta3_hat")
    d = summary.mean_diff
    sd = summary.s @ d
    q3 = float(sd @ (summary.s @ sd))
    return float(
        delta3_from_stats(
            q3, d1, d2, traces.a1, traces.a2, traces.a3, traces.a4,
            summary.n, summary.n1, summary.n2, summary.p,
            literal_squared=literal_squared,
        )
    )


def estimate_all(summary: TwoSampleSummary, literal_squared: bool = False):
    """All eight estimates, sharing one S @ S product.

    Returns ``(TraceEstimates, DeltaEstimates)``.
    """
    _require_n(summary.n, 7, "estimate_all")
    n, p, n1, n2 = summary.n, summary.p, summary.n1, summary.n2
    t1, t2, t3, t4, q0, q1, q2, q3 = _trace_power_stats(summary)
    a1 = a1_from_traces(t1, p)
    a2 = a2_from_traces(t1, t2, n, p)
    a3 = a3_from_traces(t1, t2, t3, n, p)
    a4 = a4_from_traces(t1, t2, t3, t4, n, p)
    d0 = delta0_from_stats(q0, a1, n1, n2, p)
    d1 = delta1_from_stats(q1, a2, n1, n2, p)
    d2 = delta2_from_stats(q2, d1, a1, a2, a3, n, n1, n2, p)
    d3 = delta3_from_stats(q3, d1, d2, a1, a2, a3, a4, n, n1, n2, p, literal_squared=literal_squared)
    traces = TraceEstimates(a1=float(a1), a2=float(a2), a3=float(a3), a4=float(a4), p=p, n=n)
    deltas = DeltaEstimates(d0=float(d0), d1=float(d1), d2=float(d2), d3=float(d3))
    return traces, deltas
