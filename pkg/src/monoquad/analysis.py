"""Closed-form error bounds for monotone quadrature.

Worst-case variances over the full monotone class F:

* simple Monte Carlo   1/(4n)        (attained by a unit step at 1/2)
* control variate      1/(12n)       (attained by every unit step)
* stratified           (1/4) max_k w_k^2 / n_k
* Latin design         1/(4 n^2)     (n equal strata, one point each)

against the universal limits: no estimator beats an Lp error of
(1/2)^(2+1/p) / n, and no unbiased one beats a variance of 1/(32 n^2).
The deterministic trapezoid rule has worst error 1/(2(n+1)).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import InvariantError
from .estimators import (ControlVariate, EstimatorSpec, RngStream, SimpleMC,
                         StrataSpec, Stratified, Trapezoid)
from .functions import MonotoneFunction, Staircase, UnitStep, exact_integral

__all__ = [
    "VarianceCertificate",
    "AdversarialPair",
    "BoundReport",
    "BOUND_REPORT_COLUMNS",
    "worst_case_var_mc",
    "worst_case_var_cv",
    "worst_case_var_stratified",
    "worst_case_var_stratified_restricted",
    "worst_case_certificate",
    "optimal_strata",
    "trapezoid_worst_case",
    "lower_bound_lp",
    "variance_lower_bound",
    "adversarial_pair",
    "ratio_table",
    "bound_reports_to_csv",
    "sig12",
]


def _check_n(n: int) -> int:
    if isinstance(n, bool) or not isinstance(n, int):
        raise InvariantError(f"n must be an integer, got {n!r}")
    if n < 1:
        raise InvariantError(f"n must be >= 1, got {n}")
    return n


@dataclass(frozen=True, slots=True)
class VarianceCertificate:
    """A worst-case statement with its attaining witness.

    ``metric`` is "variance" for the randomized estimators and
    "absolute_error" for the deterministic trapezoid rule; ``value`` is the
    closed-form supremum over the monotone class, attained at ``witness``.
    """

    spec: EstimatorSpec
    value: float
    witness: MonotoneFunction
    metric: str = "variance"


@dataclass(frozen=True, slots=True)
class AdversarialPair:
    """Two staircases any fixed sampling design struggles to tell apart.

    f1 and f2 agree outside one cell of the 2n-cell grid and their
    integrals differ by exactly 1/(2n); ``miss_probability`` is the
    empirical chance that the sampler places no point in that cell.
    """

    f1: Staircase
    f2: Staircase
    cell_index: int
    interval: tuple[float, float]
    miss_probability: float
    replications: int

    @property
    def integral_gap(self) -> float:
        return exact_integral(self.f1) - exact_integral(self.f2)


def worst_case_var_mc(n: int) -> float:
    """sup over monotone f of Var(simple MC with n points) = 1/(4n)."""
    return 1.0 / (4.0 * _check_n(n))


def worst_case_var_cv(n: int) -> float:
    """sup over monotone f of Var(control variate with n points) = 1/(12n)."""
    return 1.0 / (12.0 * _check_n(n))


def worst_case_var_stratified(strata: StrataSpec) -> VarianceCertificate:
    """Worst-case variance (1/4) max_k w_k^2/n_k with a unit-step witness.

    The witness steps at the midpoint of the first stratum attaining the
    maximum, where the conditional variance hits Popoviciu's bound 1/4.
    """
    w = strata.weights
    per = [w[k] * w[k] / strata.allocation[k] for k in range(strata.K)]
    k_star = int(np.argmax(per))
    mid = 0.5 * (strata.boundaries[k_star] + strata.boundaries[k_star + 1])
    return VarianceCertificate(spec=Stratified(strata), value=0.25 * per[k_star],
                               witness=UnitStep(mid))


def worst_case_var_stratified_restricted(strata: StrataSpec, deltas) -> float:
    """Worst case (1/4) sum_k w_k^2 delta_k^2 / n_k over monotone f whose
    increase within stratum k is at most deltas[k].

    Attained by a function that jumps by deltas[k] at each stratum
    midpoint.  Requires deltas >= 0 with sum at most 1.
    """
    d = tuple(float(x) for x in deltas)
    if len(d) != strata.K:
        raise InvariantError(f"need one delta per stratum, got {len(d)} for K={strata.K}")
    if any(x < 0.0 for x in d):
        raise InvariantError("deltas must be non-negative")
    if math.fsum(d) > 1.0 + 1e-12:
        raise InvariantError("deltas must sum to at most 1 (total increase of f)")
    w = strata.weights
    terms = [w[k] * w[k] * d[k] * d[k] / strata.allocation[k] for k in range(strata.K)]
    return 0.25 * math.fsum(terms)


def worst_case_certificate(spec: EstimatorSpec) -> VarianceCertificate:
    """Closed-form worst case for any estimator spec, with witness."""
    if isinstance(spec, SimpleMC):
        return VarianceCertificate(spec, worst_case_var_mc(spec.n), UnitStep(0.5))
    if isinstance(spec, ControlVariate):
        return VarianceCertificate(spec, worst_case_var_cv(spec.n), UnitStep(0.5))
    if isinstance(spec, Stratified):
        return worst_case_var_stratified(spec.strata)
    # Trapezoid: the all-zero function attains the worst absolute error
    # 1/(2(n+1)) because the rule assumes f(1) = 1.
    abs_err, _ = trapezoid_worst_case(spec.n)
    return VarianceCertificate(spec, abs_err, Staircase((0.0,)), metric="absolute_error")


def optimal_strata(n: int) -> StrataSpec:
    """The variance-optimal design for budget n: n equal strata, one point
    each (the one-dimensional Latin hypercube)."""
    _check_n(n)
    return StrataSpec(boundaries=tuple(k / n for k in range(n + 1)),
                      allocation=(1,) * n)


def trapezoid_worst_case(n: int) -> tuple[float, float]:
    """(worst |error|, worst squared error) of the n-node trapezoid rule:
    1/(2(n+1)) and its square."""
    _check_n(n)
    e = 1.0 / (2.0 * (n + 1))
    return e, e * e


def lower_bound_lp(n: int, p: float) -> float:
    """No estimator using n function values has worst-case Lp error below
    (1/2)^(2+1/p) / n; p may be math.inf for the limiting 1/(4n)."""
    _check_n(n)
    p = float(p)
    if not p >= 1.0:
        raise InvariantError(f"p must be >= 1, got {p}")
    return 0.5 ** (2.0 + 1.0 / p) / n


def variance_lower_bound(n: int) -> float:
    """No unbiased estimator using n values has worst-case variance below
    1/(32 n^2) (the p=2 lower bound, squared)."""
    return 1.0 / (32.0 * _check_n(n) ** 2)


def adversarial_pair(n: int, sampler: Callable[[np.random.Generator], np.ndarray],
                     replications: int = 4096, seed: int = 0) -> AdversarialPair:
    """Build the hard pair for a sampling design with n points.

    Splits [0,1] into 2n cells, estimates empirically which cell the
    sampler misses most often (one replication = one stream of ``seed``),
    and returns unit-step staircases separated only on that cell.  Any
    estimator reading f solely through the sampled points returns identical
    values for f1 and f2 whenever the cell is missed, yet the true
    integrals differ by 1/(2n).
    """
    _check_n(n)
    if not replications >= 1:
        raise InvariantError(f"replications must be >= 1, got {replications}")
    m = 2 * n
    miss = np.zeros(m, dtype=np.int64)
    ones = np.ones(m, dtype=bool)
    for r in range(replications):
        pts = np.asarray(sampler(RngStream(seed, r).generator()), dtype=np.float64)
        if pts.size and (pts.min() < 0.0 or pts.max() > 1.0):
            raise InvariantError("sampler produced points outside [0, 1]")
        hit = ones.copy()
        idx = np.clip(np.ceil(pts * m).astype(np.int64), 1, m) - 1
        hit[idx] = False
        miss += hit
    k_star = int(np.argmax(miss)) + 1  # 1-based cell, ties -> leftmost
    lo, hi = (k_star - 1) / m, k_star / m
    f1 = Staircase(tuple(0.0 if k < k_star else 1.0 for k in range(1, m + 1)))
    f2 = Staircase(tuple(0.0 if k <= k_star else 1.0 for k in range(1, m + 1)))
    return AdversarialPair(f1=f1, f2=f2, cell_index=k_star, interval=(lo, hi),
                           miss_probability=miss[k_star - 1] / replications,
                           replications=replications)


# ---------------------------------------------------------------------------
# bound table
# ---------------------------------------------------------------------------

BOUND_REPORT_COLUMNS = ("n", "lp_lb_p2", "var_lb", "mc_wc", "cv_wc", "lhs_wc",
                        "best_unbiased", "ratio_unbiased", "trap_sq_err", "ratio_trap")


@dataclass(frozen=True, slots=True)
class BoundReport:
    """One row of the bounds-versus-n table (see BOUND_REPORT_COLUMNS).

    ``best_unbiased`` = min(control-variate, Latin design) worst case;
    ``ratio_unbiased`` divides it by the 1/(32 n^2) lower bound (8/3, 16/3,
    then 8 for n >= 3); ``ratio_trap`` divides it by the trapezoid squared
    error (maximal at n = 3, limit 1).
    """

    n: int
    lp_lb_p2: float
    var_lb: float
    mc_wc: float
    cv_wc: float
    lhs_wc: float
    best_unbiased: float
    ratio_unbiased: float
    trap_sq_err: float
    ratio_trap: float


def ratio_table(n_max: int) -> list[BoundReport]:
    """Bound table for n = 1..n_max, computed in exact rational arithmetic
    (the p=2 Lp bound is the single irrational column)."""
    _check_n(n_max)
    out = []
    for n in range(1, n_max + 1):
        mc = Fraction(1, 4 * n)
        cv = Fraction(1, 12 * n)
        lhs = Fraction(1, 4 * n * n)
        var_lb = Fraction(1, 32 * n * n)
        best = min(cv, lhs)
        trap = Fraction(1, 4 * (n + 1) ** 2)
        out.append(BoundReport(
            n=n,
            lp_lb_p2=0.5 ** 2.5 / n,
            var_lb=float(var_lb),
            mc_wc=float(mc),
            cv_wc=float(cv),
            lhs_wc=float(lhs),
            best_unbiased=float(best),
            ratio_unbiased=float(best / var_lb),
            trap_sq_err=float(trap),
            ratio_trap=float(best / trap),
        ))
    return out


def sig12(x: float) -> str:
    """Render a float with 12 significant digits (the CLI output precision)."""
    return f"{x:.12g}"


def bound_reports_to_csv(reports: list[BoundReport]) -> str:
    """RFC 4180 CSV for a list of bound rows, floats at 12 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BOUND_REPORT_COLUMNS)
    for r in reports:
        writer.writerow([r.n] + [sig12(getattr(r, c)) for c in BOUND_REPORT_COLUMNS[1:]])
    return buf.getvalue()
