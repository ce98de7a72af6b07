"""Verification layer: exact variances, brute-force maximizers, experiments.

Everything here exists to confront the closed forms in ``analysis`` with
independent evidence:

* exact (integral-based) estimator variance at a specific f,
* exhaustive maximization over the grid staircase class (with a
  deterministic coordinate-ascent fallback for grids too large to
  enumerate), and
* replicated sampling experiments with per-replication random streams, so
  empirical results do not depend on worker count or aggregation order.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceededError, InvariantError, ParseError
from .estimators import (ControlVariate, EstimatorSpec, RngStream, SimpleMC,
                         Stratified, Trapezoid, estimate_batch, estimator_from_json,
                         estimator_to_json, sample_size, trapezoid_nodes,
                         uniform_budget)
from .functions import (MonotoneFunction, Staircase, evaluate, exact_integral,
                        function_from_json, function_to_json, moments_on_interval,
                        var_fx_minus_x)

__all__ = [
    "SCHEMA_VERSION",
    "exact_estimator_variance",
    "exact_trapezoid_error",
    "BruteForceResult",
    "brute_force_max_variance",
    "brute_force_max_trapezoid_error",
    "ExperimentConfig",
    "Report",
    "REPORT_CSV_COLUMNS",
    "replicated_estimates",
    "run_experiment",
    "report_to_json_dict",
    "report_to_csv_row",
    "UnbiasednessCheck",
    "verify_unbiasedness",
    "empirical_lp_error",
    "config_to_json_dict",
    "config_from_json_dict",
]

SCHEMA_VERSION = 1

_CHUNK_ROWS = 1 << 16


# ---------------------------------------------------------------------------
# exact variances and errors
# ---------------------------------------------------------------------------

def exact_estimator_variance(spec: EstimatorSpec, f: MonotoneFunction) -> float:
    """Variance of the estimator at f, from exact conditional moments."""
    if isinstance(spec, SimpleMC):
        mean, m2 = moments_on_interval(f, 0.0, 1.0)
        return max(0.0, m2 - mean * mean) / spec.n
    if isinstance(spec, ControlVariate):
        return var_fx_minus_x(f) / spec.n
    if isinstance(spec, Stratified):
        strata = spec.strata
        w = strata.weights
        total = []
        for k in range(strata.K):
            mean, m2 = moments_on_interval(f, strata.boundaries[k], strata.boundaries[k + 1])
            total.append(w[k] * w[k] * max(0.0, m2 - mean * mean) / strata.allocation[k])
        return math.fsum(total)
    raise InvariantError("the trapezoid rule is deterministic; "
                         "use exact_trapezoid_error for its error")


def exact_trapezoid_error(n: int, f: MonotoneFunction) -> float:
    """|S(f) - T_n(f)| for the deterministic trapezoid rule."""
    fx = evaluate(f, trapezoid_nodes(n))
    t = (math.fsum(fx.tolist()) + 0.5) / (n + 1)
    return abs(exact_integral(f) - t)


# ---------------------------------------------------------------------------
# brute force over grid staircases
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class BruteForceResult:
    """Outcome of maximizing an objective over grid staircases.

    ``exhaustive`` is False when the coordinate-ascent fallback was used,
    in which case the value is a certified lower bound on the true maximum
    but not a proof of it.  ``candidates`` counts objective evaluations.
    """

    value: float
    witness: Staircase
    candidates: int
    exhaustive: bool
    method: str


def _check_grid_args(m: int, g: int) -> None:
    for name, v in (("m", m), ("g", g)):
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise InvariantError(f"{name} must be a positive integer, got {v!r}")


def _variance_objective(spec: EstimatorSpec, m: int):
    """Vectorized Var(estimator) over a (C, m) matrix of staircase levels."""
    if isinstance(spec, SimpleMC):
        n = spec.n

        def obj(a: np.ndarray) -> np.ndarray:
            mu = a.mean(axis=1)
            return ((a * a).mean(axis=1) - mu * mu) / n
        return obj
    if isinstance(spec, ControlVariate):
        n = spec.n
        lo = np.arange(m) / m
        hi = np.arange(1, m + 1) / m

        def obj(a: np.ndarray) -> np.ndarray:
            m2 = ((a - lo) ** 3 - (a - hi) ** 3).sum(axis=1) / 3.0
            mu = a.mean(axis=1) - 0.5
            return (m2 - mu * mu) / n
        return obj
    if isinstance(spec, Stratified):
        strata = spec.strata
        w = np.asarray(strata.weights)
        nk = np.asarray(strata.allocation, dtype=np.float64)
        # overlap[j, k] = length of (staircase cell k) inside stratum j
        cell_lo = np.arange(m) / m
        cell_hi = np.arange(1, m + 1) / m
        b = np.asarray(strata.boundaries)
        overlap = np.maximum(
            0.0, np.minimum(cell_hi, b[1:, None]) - np.maximum(cell_lo, b[:-1, None]))

        def obj(a: np.ndarray) -> np.ndarray:
            mean = (a @ overlap.T) / w
            m2 = ((a * a) @ overlap.T) / w
            var = np.maximum(0.0, m2 - mean * mean)
            return var @ (w * w / nk)
        return obj
    raise InvariantError("the trapezoid rule is deterministic; "
                         "use brute_force_max_trapezoid_error for it")


def _trapezoid_objective(n: int, m: int):
    """Vectorized |S - T_n| over a (C, m) matrix of staircase levels."""
    nodes = trapezoid_nodes(n)
    idx = np.clip(np.ceil(nodes * m).astype(np.int64), 1, m) - 1

    def obj(a: np.ndarray) -> np.ndarray:
        t = (a[:, idx].sum(axis=1) + 0.5) / (n + 1)
        return np.abs(a.mean(axis=1) - t)
    return obj


def _maximize_exhaustive(objective, m: int, g: int, cap: int) -> BruteForceResult:
    count = math.comb(g + m, m)
    if count > cap:
        raise BudgetExceededError(
            f"{count} candidate staircases on the (m={m}, g={g}) grid exceed "
            f"the cap of {cap}; raise the cap or use the coordinate-ascent fallback")
    best_val = -math.inf
    best_row: tuple[int, ...] | None = None
    it = itertools.combinations_with_replacement(range(g + 1), m)
    while True:
        chunk = list(itertools.islice(it, _CHUNK_ROWS))
        if not chunk:
            break
        a = np.asarray(chunk, dtype=np.float64) / g
        vals = objective(a)
        j = int(np.argmax(vals))
        if vals[j] > best_val:  # strict: first maximizer in enumeration order wins
            best_val = float(vals[j])
            best_row = chunk[j]
    assert best_row is not None
    witness = Staircase(tuple(v / g for v in best_row))
    return BruteForceResult(value=best_val, witness=witness, candidates=count,
                            exhaustive=True, method="exhaustive")


def _ascent_starts(m: int, g: int) -> list[tuple[int, ...]]:
    starts = [(0,) * m, (g,) * m, tuple(round(g * k / m) for k in range(1, m + 1))]
    for j in range(m + 1):  # every grid unit step, including the constants
        starts.append((0,) * j + (g,) * (m - j))
    seen: dict[tuple[int, ...], None] = {}
    for s in starts:
        seen.setdefault(s, None)
    return list(seen)


def _maximize_ascent(objective, m: int, g: int) -> BruteForceResult:
    """Deterministic multi-start coordinate ascent on the level grid.

    Each sweep re-optimizes one level over the grid values admissible under
    monotonicity.  This is a heuristic: the result is always attained by
    some grid staircase but is not guaranteed to be the global maximum.
    """
    grid = np.arange(g + 1, dtype=np.float64) / g
    evals = 0
    best_val = -math.inf
    best_a: np.ndarray | None = None
    for start in _ascent_starts(m, g):
        a = np.asarray(start, dtype=np.float64) / g
        cur = float(objective(a[None, :])[0])
        evals += 1
        for _ in range(200):  # safety bound; fixpoint is reached much sooner
            improved = False
            for k in range(m):
                lo = a[k - 1] if k > 0 else 0.0
                hi = a[k + 1] if k < m - 1 else 1.0
                vals = grid[(grid >= lo) & (grid <= hi)]
                cand = np.tile(a, (vals.size, 1))
                cand[:, k] = vals
                objs = objective(cand)
                evals += vals.size
                j = int(np.argmax(objs))
                if objs[j] > cur:
                    cur = float(objs[j])
                    a = cand[j]
                    improved = True
            if not improved:
                break
        if cur > best_val:
            best_val = cur
            best_a = a
    assert best_a is not None
    return BruteForceResult(value=best_val, witness=Staircase(tuple(best_a)),
                            candidates=evals, exhaustive=False, method="coordinate_ascent")


def _maximize(objective, m: int, g: int, cap: int, method: str) -> BruteForceResult:
    if method == "exhaustive":
        return _maximize_exhaustive(objective, m, g, cap)
    if method == "ascent":
        return _maximize_ascent(objective, m, g)
    raise ParseError(f"unknown brute-force method {method!r}; expected 'exhaustive' or 'ascent'")


def brute_force_max_variance(spec: EstimatorSpec, m: int, g: int, *,
                             cap: int = 10_000_000,
                             method: str = "exhaustive") -> BruteForceResult:
    """Maximize the exact estimator variance over the staircases with m
    cells and levels on the grid {0, 1/g, ..., 1}.

    Exhaustive enumeration visits all C(g+m, m) non-decreasing level tuples
    in lexicographic order and returns the first maximizer; it refuses to
    start (BudgetExceededError) if that count exceeds ``cap``.
    """
    _check_grid_args(m, g)
    return _maximize(_variance_objective(spec, m), m, g, cap, method)


def brute_force_max_trapezoid_error(n: int, m: int, g: int, *,
                                    cap: int = 10_000_000,
                                    method: str = "exhaustive") -> BruteForceResult:
    """Maximize |S - T_n| over the same grid staircase class."""
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise InvariantError(f"n must be a positive integer, got {n!r}")
    _check_grid_args(m, g)
    return _maximize(_trapezoid_objective(n, m), m, g, cap, method)


# ---------------------------------------------------------------------------
# replicated experiments
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class ExperimentConfig:
    """Fully determines an experiment; equal configs give equal reports."""

    estimator: EstimatorSpec
    function: MonotoneFunction
    replications: int
    seed: int = 0
    p: float = 2.0

    def __post_init__(self) -> None:
        if isinstance(self.replications, bool) or not isinstance(self.replications, int):
            raise ParseError(f"replications must be an integer, got {self.replications!r}")
        if self.replications < 1:
            raise InvariantError(f"replications must be >= 1, got {self.replications}")
        RngStream(self.seed, 0)  # validates the seed range
        object.__setattr__(self, "p", float(self.p))
        if not self.p >= 1.0:
            raise InvariantError(f"p must be >= 1, got {self.p}")


@dataclass(frozen=True, slots=True)
class Report:
    """Summary statistics of one replicated experiment.

    ``empirical_variance`` is the unbiased sample variance (denominator
    R - 1, or 0.0 when R = 1) and ``standard_error`` is its square root
    divided by sqrt(R).  Agreement checks against exact moments use normal
    and chi-square approximations, which are comfortably accurate at the
    replication counts (10^5 and up) used for validation.
    ``exact_variance`` is None for the deterministic trapezoid rule.
    ``wall_time_s`` is informational and deliberately kept out of the
    serialized forms so that reruns are byte-for-byte reproducible.
    """

    config: ExperimentConfig
    empirical_mean: float
    empirical_variance: float
    standard_error: float
    empirical_lp_error: float
    exact_integral: float
    exact_variance: float | None
    wall_time_s: float


def _estimates_range(spec: EstimatorSpec, f: MonotoneFunction, seed: int,
                     lo: int, hi: int) -> np.ndarray:
    """Estimates for replications lo..hi-1; replication r uses stream r."""
    budget = uniform_budget(spec)
    out = np.empty(hi - lo)
    for start in range(lo, hi, _CHUNK_ROWS):
        stop = min(start + _CHUNK_ROWS, hi)
        u = np.empty((stop - start, budget))
        for i, r in enumerate(range(start, stop)):
            u[i] = RngStream(seed, r).generator().random(budget)
        out[start - lo:stop - lo] = estimate_batch(spec, f, u)
    return out


def replicated_estimates(spec: EstimatorSpec, f: MonotoneFunction,
                         replications: int, seed: int = 0, jobs: int = 1) -> np.ndarray:
    """All R estimates, one independent stream per replication.

    The result is identical for every ``jobs`` value: workers fill disjoint
    index ranges of the same array, and each replication's draws depend
    only on (seed, replication index).
    """
    if isinstance(jobs, bool) or not isinstance(jobs, int) or jobs < 1:
        raise InvariantError(f"jobs must be a positive integer, got {jobs!r}")
    if replications < 1:
        raise InvariantError(f"replications must be >= 1, got {replications}")
    if jobs == 1 or replications < 2 * jobs:
        return _estimates_range(spec, f, seed, 0, replications)
    cuts = np.linspace(0, replications, jobs + 1).astype(int)
    out = np.empty(replications)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [(lo, hi, pool.submit(_estimates_range, spec, f, seed, int(lo), int(hi)))
                   for lo, hi in zip(cuts[:-1], cuts[1:]) if hi > lo]
        for lo, hi, fut in futures:
            out[lo:hi] = fut.result()
    return out


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> Report:
    """Replicate the estimator and summarize against the exact answer."""
    t0 = time.perf_counter()
    est = replicated_estimates(config.estimator, config.function,
                               config.replications, config.seed, jobs=jobs)
    r = config.replications
    mean = float(np.mean(est))
    var = float(np.var(est, ddof=1)) if r > 1 else 0.0
    exact = exact_integral(config.function)
    lp = float(np.mean(np.abs(exact - est) ** config.p) ** (1.0 / config.p))
    if isinstance(config.estimator, Trapezoid):
        exact_var = None
    else:
        exact_var = exact_estimator_variance(config.estimator, config.function)
    return Report(config=config, empirical_mean=mean, empirical_variance=var,
                  standard_error=math.sqrt(var / r), empirical_lp_error=lp,
                  exact_integral=exact, exact_variance=exact_var,
                  wall_time_s=time.perf_counter() - t0)


@dataclass(frozen=True, slots=True)
class UnbiasednessCheck:
    """Z-test of the empirical mean against the exact integral."""

    passed: bool
    z_score: float
    empirical_mean: float
    exact_value: float
    standard_error: float
    replications: int


def verify_unbiasedness(spec: EstimatorSpec, f: MonotoneFunction,
                        replications: int = 100_000, seed: int = 0) -> UnbiasednessCheck:
    """Check |empirical mean - S(f)| <= 4 standard errors.

    A deterministic or otherwise zero-variance estimator passes exactly
    when its value equals S(f)."""
    est = replicated_estimates(spec, f, replications, seed)
    mean = float(np.mean(est))
    var = float(np.var(est, ddof=1)) if replications > 1 else 0.0
    se = math.sqrt(var / replications)
    exact = exact_integral(f)
    diff = mean - exact
    if se == 0.0:
        z = 0.0 if diff == 0.0 else math.inf * math.copysign(1.0, diff)
    else:
        z = diff / se
    return UnbiasednessCheck(passed=abs(z) <= 4.0, z_score=z, empirical_mean=mean,
                             exact_value=exact, standard_error=se,
                             replications=replications)


def empirical_lp_error(spec: EstimatorSpec, f: MonotoneFunction, p: float,
                       replications: int = 100_000, seed: int = 0) -> float:
    """Empirical (E|S - estimate|^p)^(1/p) over R replications."""
    value, _ = _lp_error_with_se(spec, f, p, replications, seed)
    return value


def _lp_error_with_se(spec: EstimatorSpec, f: MonotoneFunction, p: float,
                      replications: int, seed: int) -> tuple[float, float]:
    """Lp error plus a delta-method standard error for it."""
    p = float(p)
    if not p >= 1.0:
        raise InvariantError(f"p must be >= 1, got {p}")
    est = replicated_estimates(spec, f, replications, seed)
    v = np.abs(exact_integral(f) - est) ** p
    mv = float(np.mean(v))
    if mv == 0.0:
        return 0.0, 0.0
    lp = mv ** (1.0 / p)
    var_v = float(np.var(v, ddof=1)) if replications > 1 else 0.0
    se_mv = math.sqrt(var_v / replications)
    return lp, se_mv * (1.0 / p) * mv ** (1.0 / p - 1.0)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

REPORT_CSV_COLUMNS = ("schema", "estimator", "function", "replications", "seed", "p",
                      "empirical_mean", "empirical_variance", "standard_error",
                      "empirical_lp_error", "exact_integral", "exact_variance")


def config_to_json_dict(config: ExperimentConfig) -> dict:
    return {
        "estimator": estimator_to_json(config.estimator),
        "function": function_to_json(config.function),
        "replications": config.replications,
        "seed": config.seed,
        "p": config.p,
    }


def config_from_json_dict(obj) -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ParseError(f"experiment config must be a JSON object, got {type(obj).__name__}")
    known = {"estimator", "function", "replications", "seed", "p"}
    extra = obj.keys() - known
    if extra:
        raise ParseError(f"unexpected field(s) {sorted(extra)} in experiment config")
    for key in ("estimator", "function", "replications"):
        if key not in obj:
            raise ParseError(f"experiment config is missing {key!r}")
    kwargs = {}
    if "seed" in obj:
        seed = obj["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ParseError(f"seed must be an integer, got {seed!r}")
        kwargs["seed"] = seed
    if "p" in obj:
        p = obj["p"]
        if isinstance(p, bool) or not isinstance(p, (int, float)):
            raise ParseError(f"p must be a number, got {p!r}")
        kwargs["p"] = float(p)
    reps = obj["replications"]
    if isinstance(reps, bool) or not isinstance(reps, int):
        raise ParseError(f"replications must be an integer, got {reps!r}")
    return ExperimentConfig(estimator=estimator_from_json(obj["estimator"]),
                            function=function_from_json(obj["function"]),
                            replications=reps, **kwargs)


def report_to_json_dict(report: Report) -> dict:
    """JSON form of a report (schema-versioned, no wall time)."""
    out = {"schema": SCHEMA_VERSION}
    out.update(config_to_json_dict(report.config))
    out.update({
        "empirical_mean": report.empirical_mean,
        "empirical_variance": report.empirical_variance,
        "standard_error": report.standard_error,
        "empirical_lp_error": report.empirical_lp_error,
        "exact_integral": report.exact_integral,
        "exact_variance": report.exact_variance,
    })
    return out


def report_to_csv_row(report: Report) -> list[str]:
    """One CSV row per REPORT_CSV_COLUMNS; specs are embedded compact JSON."""
    from .analysis import sig12

    cfg = report.config
    return [
        str(SCHEMA_VERSION),
        json.dumps(estimator_to_json(cfg.estimator), separators=(",", ":"), sort_keys=True),
        json.dumps(function_to_json(cfg.function), separators=(",", ":"), sort_keys=True),
        str(cfg.replications),
        str(cfg.seed),
        sig12(cfg.p),
        sig12(report.empirical_mean),
        sig12(report.empirical_variance),
        sig12(report.standard_error),
        sig12(report.empirical_lp_error),
        sig12(report.exact_integral),
        "" if report.exact_variance is None else sig12(report.exact_variance),
    ]
