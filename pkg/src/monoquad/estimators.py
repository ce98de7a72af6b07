"""Quadrature estimators for monotone functions on [0,1].

Four estimators of S(f) = integral of f, all driven by a shared uniform
budget so that different estimators can be compared on identical draws:

* simple Monte Carlo          mean of f(X_i)
* control variate             mean of (f(X_i) - X_i) + 1/2
* stratified / Latin sampling per-stratum means, weight-combined
* deterministic trapezoid     equispaced nodes with assumed endpoints
                              f(0) = 0 and f(1) = 1

Randomness comes from ``RngStream(seed, stream)``; one stream per
replication makes results independent of how work is chunked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvariantError, ParseError
from .functions import MonotoneFunction, evaluate

__all__ = [
    "RngStream",
    "StrataSpec",
    "SimpleMC",
    "ControlVariate",
    "Stratified",
    "Trapezoid",
    "EstimatorSpec",
    "sample_size",
    "uniform_budget",
    "estimate",
    "estimate_batch",
    "evaluation_points",
    "point_sampler",
    "trapezoid_nodes",
    "estimator_to_json",
    "estimator_from_json",
]

_U64 = 1 << 64


@dataclass(frozen=True, slots=True)
class RngStream:
    """A named, reproducible random stream: (seed, stream) -> Generator.

    Streams with the same seed and different stream indices are
    statistically independent; replication r of an experiment always uses
    stream r, so aggregation order and worker count cannot change results.
    """

    seed: int
    stream: int = 0

    def __post_init__(self) -> None:
        for name, v in (("seed", self.seed), ("stream", self.stream)):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ParseError(f"{name} must be an integer, got {v!r}")
            if not 0 <= v < _U64:
                raise InvariantError(f"{name} must be a 64-bit unsigned integer, got {v}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.PCG64(ss))


def _positive_int(name: str, v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"{name} must be an integer, got {v!r}")
    if v < 1:
        raise InvariantError(f"{name} must be >= 1, got {v}")
    return v


@dataclass(frozen=True, slots=True)
class StrataSpec:
    """Partition of [0,1] into K strata with a per-stratum sample count.

    boundaries = (0 = x_0 < x_1 < ... < x_K = 1); allocation[k] >= 1 is the
    number of points drawn uniformly from stratum k.
    """

    boundaries: tuple[float, ...]
    allocation: tuple[int, ...]

    def __post_init__(self) -> None:
        try:
            bounds = tuple(float(x) for x in self.boundaries)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"stratum boundaries must be numbers: {exc}") from exc
        object.__setattr__(self, "boundaries", bounds)
        object.__setattr__(self, "allocation", tuple(self.allocation))
        if len(bounds) < 2:
            raise InvariantError("need at least one stratum (two boundaries)")
        if bounds[0] != 0.0 or bounds[-1] != 1.0:
            raise InvariantError(f"boundaries must start at 0 and end at 1, got {bounds}")
        if np.any(np.diff(bounds) <= 0.0):
            raise InvariantError("boundaries must be strictly increasing")
        if len(self.allocation) != len(bounds) - 1:
            raise InvariantError(
                f"allocation length {len(self.allocation)} does not match "
                f"{len(bounds) - 1} strata")
        for nk in self.allocation:
            _positive_int("stratum allocation", nk)
        if abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise InvariantError("stratum weights must sum to 1")

    @property
    def K(self) -> int:
        return len(self.allocation)

    @property
    def weights(self) -> tuple[float, ...]:
        b = self.boundaries
        return tuple(b[k + 1] - b[k] for k in range(len(b) - 1))


@dataclass(frozen=True, slots=True)
class SimpleMC:
    """Plain Monte Carlo with n iid uniform points."""

    n: int

    def __post_init__(self) -> None:
        _positive_int("n", self.n)


@dataclass(frozen=True, slots=True)
class ControlVariate:
    """Monte Carlo with X itself as control variate: mean(f(X)-X) + 1/2."""

    n: int

    def __post_init__(self) -> None:
        _positive_int("n", self.n)


@dataclass(frozen=True, slots=True)
class Stratified:
    """Stratified sampling over an explicit partition of [0,1]."""

    strata: StrataSpec


@dataclass(frozen=True, slots=True)
class Trapezoid:
    """Deterministic rule on nodes i/(n+1), i=1..n, assuming f(0)=0, f(1)=1.

    Value = (sum_i f(i/(n+1)) + 1/2) / (n+1).
    """

    n: int

    def __post_init__(self) -> None:
        _positive_int("n", self.n)


EstimatorSpec = SimpleMC | ControlVariate | Stratified | Trapezoid


def sample_size(spec: EstimatorSpec) -> int:
    """Number of function evaluations the estimator uses."""
    if isinstance(spec, Stratified):
        return sum(spec.strata.allocation)
    return spec.n


def uniform_budget(spec: EstimatorSpec) -> int:
    """Number of uniform draws consumed per estimate (0 if deterministic)."""
    return 0 if isinstance(spec, Trapezoid) else sample_size(spec)


def trapezoid_nodes(n: int) -> np.ndarray:
    """The n interior evaluation nodes i/(n+1)."""
    return np.arange(1, n + 1, dtype=np.float64) / (n + 1)


def evaluation_points(spec: EstimatorSpec, u: np.ndarray) -> np.ndarray:
    """Map raw uniforms (last axis = budget) to the points where f is read.

    For the trapezoid rule the points are the fixed nodes, broadcast over
    the leading axes of ``u``.
    """
    u = np.asarray(u, dtype=np.float64)
    if isinstance(spec, Trapezoid):
        nodes = trapezoid_nodes(spec.n)
        return np.broadcast_to(nodes, u.shape[:-1] + nodes.shape).copy()
    if u.shape[-1] != uniform_budget(spec):
        raise InvariantError(
            f"expected {uniform_budget(spec)} uniforms on the last axis, got {u.shape[-1]}")
    if isinstance(spec, (SimpleMC, ControlVariate)):
        return u
    x = np.empty_like(u)
    bounds, alloc = spec.strata.boundaries, spec.strata.allocation
    weights = spec.strata.weights
    offset = 0
    for k, nk in enumerate(alloc):
        sl = slice(offset, offset + nk)
        x[..., sl] = bounds[k] + weights[k] * u[..., sl]
        offset += nk
    return x


def estimate_batch(spec: EstimatorSpec, f: MonotoneFunction, u: np.ndarray) -> np.ndarray:
    """Estimates from pre-drawn uniforms; vectorized over leading axes.

    ``u`` has shape (..., budget); the result drops the last axis.  Feeding
    the same uniforms to SimpleMC and ControlVariate realizes the coupled
    pair used in variance comparisons.
    """
    u = np.asarray(u, dtype=np.float64)
    if isinstance(spec, Trapezoid):
        val = _trapezoid_value(spec.n, f)
        return np.full(u.shape[:-1], val)
    if u.shape[-1] != uniform_budget(spec):
        raise InvariantError(
            f"expected {uniform_budget(spec)} uniforms on the last axis, got {u.shape[-1]}")
    if isinstance(spec, SimpleMC):
        return evaluate(f, u).mean(axis=-1)
    if isinstance(spec, ControlVariate):
        return (evaluate(f, u) - u).mean(axis=-1) + 0.5
    out = np.zeros(u.shape[:-1])
    bounds, alloc = spec.strata.boundaries, spec.strata.allocation
    weights = spec.strata.weights
    offset = 0
    for k, nk in enumerate(alloc):
        xk = bounds[k] + weights[k] * u[..., offset:offset + nk]
        out += weights[k] * evaluate(f, xk).mean(axis=-1)
        offset += nk
    return out


def _trapezoid_value(n: int, f: MonotoneFunction) -> float:
    fx = evaluate(f, trapezoid_nodes(n))
    return (math.fsum(fx.tolist()) + 0.5) / (n + 1)


def estimate(spec: EstimatorSpec, f: MonotoneFunction, rng: RngStream) -> float:
    """One estimate of S(f); deterministic given (spec, f, seed, stream)."""
    u = rng.generator().random(uniform_budget(spec))
    return float(estimate_batch(spec, f, u))


def point_sampler(spec: EstimatorSpec):
    """The design's point set as a function of a generator.

    Draws one batch of uniforms and maps them to the points where the
    estimator reads f; the trapezoid rule returns its fixed nodes.
    """
    budget = uniform_budget(spec)

    def sampler(gen: np.random.Generator) -> np.ndarray:
        return evaluation_points(spec, gen.random(budget))

    return sampler


# ---------------------------------------------------------------------------
# JSON codec
# ---------------------------------------------------------------------------

def estimator_to_json(spec: EstimatorSpec) -> dict:
    """Plain-dict form of an estimator spec, inverse of estimator_from_json."""
    if isinstance(spec, SimpleMC):
        return {"kind": "simple_mc", "n": spec.n}
    if isinstance(spec, ControlVariate):
        return {"kind": "control_variate", "n": spec.n}
    if isinstance(spec, Stratified):
        return {"kind": "stratified",
                "boundaries": list(spec.strata.boundaries),
                "allocation": list(spec.strata.allocation)}
    if isinstance(spec, Trapezoid):
        return {"kind": "trapezoid", "n": spec.n}
    raise ParseError(f"not an estimator spec: {spec!r}")


def estimator_from_json(obj) -> EstimatorSpec:
    """Build an estimator spec from its dict form; see estimator_to_json."""
    if not isinstance(obj, dict):
        raise ParseError(f"estimator spec must be a JSON object, got {type(obj).__name__}")
    kind = obj.get("kind")
    if kind in ("simple_mc", "control_variate", "trapezoid"):
        if obj.keys() != {"kind", "n"}:
            raise ParseError(f"{kind} spec takes exactly the fields 'kind' and 'n'")
        n = obj.get("n")
        if isinstance(n, bool) or not isinstance(n, int):
            raise ParseError(f"field 'n' must be an integer, got {n!r}")
        cls = {"simple_mc": SimpleMC, "control_variate": ControlVariate,
               "trapezoid": Trapezoid}[kind]
        return cls(n=n)
    if kind == "stratified":
        if obj.keys() != {"kind", "boundaries", "allocation"}:
            raise ParseError(
                "stratified spec takes exactly the fields 'kind', 'boundaries', 'allocation'")
        bounds, alloc = obj.get("boundaries"), obj.get("allocation")
        if not isinstance(bounds, (list, tuple)) or not isinstance(alloc, (list, tuple)):
            raise ParseError("stratified spec needs 'boundaries' and 'allocation' arrays")
        for nk in alloc:
            if isinstance(nk, bool) or not isinstance(nk, int):
                raise ParseError(f"allocation entries must be integers, got {nk!r}")
        return Stratified(StrataSpec(boundaries=tuple(bounds), allocation=tuple(alloc)))
    raise ParseError(f"unknown estimator kind {kind!r}")
