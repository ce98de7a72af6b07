"""Model of non-decreasing functions f: [0,1] -> [0,1].

Three representations are supported:

* ``UnitStep``  -- the indicator 1_{[x0, 1]}.
* ``Staircase`` -- piecewise constant on the m half-open cells
  ((k-1)/m, k/m], with f(0) defined as the first level.
* ``Preset``    -- a small family of smooth analytic functions
  (identity, square, sqrt, logistic).

All integrals and conditional moments are computed here, exactly where a
closed form exists and by adaptive quadrature (abs. tolerance well below
1e-10) for the one preset moment that has no convenient antiderivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import expit

from .errors import InvariantError, ParseError

__all__ = [
    "UnitStep",
    "Staircase",
    "Preset",
    "MonotoneFunction",
    "PRESET_IDS",
    "evaluate",
    "exact_integral",
    "project_staircase",
    "moments_on_interval",
    "var_fx_minus_x",
    "function_to_json",
    "function_from_json",
]

PRESET_IDS = ("identity", "square", "sqrt", "logistic")

# Dense grid used to sanity-check that a preset is monotone with range in
# [0,1]; parameterized presets (logistic) can violate this for bad parameters.
_CHECK_GRID = np.linspace(0.0, 1.0, 513)
_GRID_TOL = 1e-12


@dataclass(frozen=True, slots=True)
class UnitStep:
    """Indicator of [x0, 1]: f(x) = 1 if x >= x0 else 0."""

    x0: float

    def __post_init__(self) -> None:
        if not (isinstance(self.x0, (int, float)) and math.isfinite(self.x0)):
            raise ParseError(f"unit step location must be a finite number, got {self.x0!r}")
        object.__setattr__(self, "x0", float(self.x0))
        if not 0.0 <= self.x0 <= 1.0:
            raise InvariantError(f"unit step location must lie in [0, 1], got {self.x0}")


@dataclass(frozen=True, slots=True)
class Staircase:
    """Piecewise-constant non-decreasing function on m equal cells.

    Cell k (1-based) is the half-open interval ((k-1)/m, k/m]; the value
    there is alphas[k-1].  f(0) is defined as alphas[0].
    """

    alphas: tuple[float, ...]

    def __post_init__(self) -> None:
        try:
            levels = tuple(float(a) for a in self.alphas)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"staircase levels must be numbers: {exc}") from exc
        object.__setattr__(self, "alphas", levels)
        if len(levels) < 1:
            raise InvariantError("staircase needs at least one cell")
        arr = np.asarray(levels)
        if not np.all(np.isfinite(arr)):
            raise InvariantError("staircase levels must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise InvariantError("staircase levels must lie in [0, 1]")
        if np.any(np.diff(arr) < 0.0):
            raise InvariantError("staircase levels must be non-decreasing")

    @property
    def m(self) -> int:
        return len(self.alphas)


@dataclass(frozen=True, slots=True)
class Preset:
    """Analytic non-decreasing function on [0,1], selected by id.

    ``rate`` and ``center`` only matter for the logistic preset
    f(x) = expit(rate * (x - center)).
    """

    id: str
    rate: float = 10.0
    center: float = 0.5

    def __post_init__(self) -> None:
        if self.id not in PRESET_IDS:
            raise ParseError(f"unknown preset id {self.id!r}; expected one of {PRESET_IDS}")
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "center", float(self.center))
        if self.id == "logistic":
            if not (math.isfinite(self.rate) and self.rate > 0.0):
                raise InvariantError(f"logistic rate must be positive, got {self.rate}")
            if not 0.0 <= self.center <= 1.0:
                raise InvariantError(f"logistic center must lie in [0, 1], got {self.center}")
        y = evaluate(self, _CHECK_GRID)
        if y.min() < -_GRID_TOL or y.max() > 1.0 + _GRID_TOL:
            raise InvariantError(f"preset {self.id!r} leaves [0, 1] on the check grid")
        if np.any(np.diff(y) < -_GRID_TOL):
            raise InvariantError(f"preset {self.id!r} is not non-decreasing on the check grid")


MonotoneFunction = UnitStep | Staircase | Preset


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate(f: MonotoneFunction, x) -> np.ndarray:
    """Evaluate f at x (scalar or array); domain is [0, 1].

    Staircase cells are half-open on the left: the value at a cell's right
    endpoint k/m belongs to cell k, and f(0) equals the first level.
    """
    xs = np.asarray(x, dtype=np.float64)
    if xs.size and (np.min(xs) < 0.0 or np.max(xs) > 1.0):
        raise InvariantError("evaluation points must lie in [0, 1]")
    if isinstance(f, UnitStep):
        return (xs >= f.x0).astype(np.float64)
    if isinstance(f, Staircase):
        m = f.m
        idx = np.clip(np.ceil(xs * m).astype(np.int64), 1, m)
        return np.asarray(f.alphas, dtype=np.float64)[idx - 1]
    if isinstance(f, Preset):
        if f.id == "identity":
            return xs + 0.0
        if f.id == "square":
            return xs * xs
        if f.id == "sqrt":
            return np.sqrt(xs)
        return expit(f.rate * (xs - f.center))
    raise ParseError(f"not a monotone function: {f!r}")


# ---------------------------------------------------------------------------
# integrals and moments
# ---------------------------------------------------------------------------

def _softplus(z: float) -> float:
    return float(np.logaddexp(0.0, z))


def _preset_antiderivative(f: Preset, x: float) -> float:
    """Antiderivative F of the preset with F(0) chosen arbitrarily."""
    if f.id == "identity":
        return 0.5 * x * x
    if f.id == "square":
        return x ** 3 / 3.0
    if f.id == "sqrt":
        return (2.0 / 3.0) * x ** 1.5
    return _softplus(f.rate * (x - f.center)) / f.rate


def _preset_sq_antiderivative(f: Preset, x: float) -> float:
    """Antiderivative of the squared preset."""
    if f.id == "identity":
        return x ** 3 / 3.0
    if f.id == "square":
        return x ** 5 / 5.0
    if f.id == "sqrt":
        return 0.5 * x * x
    # expit^2 = expit - expit' / rate, so the antiderivative is
    # softplus(z)/rate - expit(z)/rate with z = rate*(x - center).
    z = f.rate * (x - f.center)
    return (_softplus(z) - float(expit(z))) / f.rate


def _staircase_integral_on(levels, m: int, a: float, b: float) -> float:
    """Integral over [a, b] of the staircase with the given cell levels."""
    terms = []
    for k, alpha in enumerate(levels, start=1):
        lo = max(a, (k - 1) / m)
        hi = min(b, k / m)
        if hi > lo:
            terms.append(alpha * (hi - lo))
    return math.fsum(terms)


def _integral_on(f: MonotoneFunction, a: float, b: float) -> float:
    """Integral of f over [a, b] (exact per representation)."""
    if isinstance(f, UnitStep):
        return max(0.0, b - max(a, f.x0))
    if isinstance(f, Staircase):
        return _staircase_integral_on(f.alphas, f.m, a, b)
    return _preset_antiderivative(f, b) - _preset_antiderivative(f, a)


def _sq_integral_on(f: MonotoneFunction, a: float, b: float) -> float:
    """Integral of f^2 over [a, b]."""
    if isinstance(f, UnitStep):
        return max(0.0, b - max(a, f.x0))
    if isinstance(f, Staircase):
        sq = tuple(alpha * alpha for alpha in f.alphas)
        return _staircase_integral_on(sq, f.m, a, b)
    return _preset_sq_antiderivative(f, b) - _preset_sq_antiderivative(f, a)


def exact_integral(f: MonotoneFunction) -> float:
    """S(f) = integral of f over [0, 1]."""
    if isinstance(f, UnitStep):
        return 1.0 - f.x0
    if isinstance(f, Staircase):
        return math.fsum(f.alphas) / f.m
    if f.id == "identity":
        return 0.5
    if f.id == "square":
        return 1.0 / 3.0
    if f.id == "sqrt":
        return 2.0 / 3.0
    r, c = f.rate, f.center
    return (_softplus(r * (1.0 - c)) - _softplus(-r * c)) / r


def moments_on_interval(f: MonotoneFunction, a: float, b: float) -> tuple[float, float]:
    """Mean and second moment of f(U) for U uniform on [a, b] in [0, 1].

    Returns (E f(U), E f(U)^2); the conditional variance is the difference
    m2 - mean^2 and always lies in [0, 1/4].
    """
    if not (0.0 <= a < b <= 1.0):
        raise InvariantError(f"need 0 <= a < b <= 1, got a={a}, b={b}")
    w = b - a
    mean = _integral_on(f, a, b) / w
    m2 = _sq_integral_on(f, a, b) / w
    return mean, m2


def var_fx_minus_x(f: MonotoneFunction) -> float:
    """Variance of f(X) - X for X uniform on [0, 1].

    This is the control-variate residual variance; it is at most 1/12 for
    every non-decreasing f with range in [0, 1].
    """
    if isinstance(f, UnitStep):
        x0 = f.x0
        m2 = x0 ** 3 / 3.0 + (1.0 - x0) ** 3 / 3.0
        mean = 0.5 - x0
        return max(0.0, m2 - mean * mean)
    if isinstance(f, Staircase):
        m = f.m
        terms = []
        for k, alpha in enumerate(f.alphas, start=1):
            lo, hi = (k - 1) / m, k / m
            terms.append((alpha - lo) ** 3 - (alpha - hi) ** 3)
        m2 = math.fsum(terms) / 3.0
        mean = math.fsum(f.alphas) / m - 0.5
        return max(0.0, m2 - mean * mean)
    mean = exact_integral(f) - 0.5
    m2, err = quad(lambda x: (float(evaluate(f, x)) - x) ** 2, 0.0, 1.0,
                   epsabs=1e-13, epsrel=1e-13, limit=200)
    if err > 1e-10:
        raise InvariantError(f"quadrature failed to converge for preset {f.id!r}")
    return max(0.0, m2 - mean * mean)


def project_staircase(f: MonotoneFunction, m: int) -> Staircase:
    """Project f onto the m-cell staircase class by cell averaging.

    The result has level m * integral of f over cell k; the projection
    preserves the integral and is the L2-closest staircase.
    """
    if not (isinstance(m, int) and m >= 1):
        raise InvariantError(f"cell count must be a positive integer, got {m!r}")
    levels = np.array([m * _integral_on(f, (k - 1) / m, k / m) for k in range(1, m + 1)])
    # Guard against ulp-level wobble from the antiderivative differences.
    np.clip(levels, 0.0, 1.0, out=levels)
    np.maximum.accumulate(levels, out=levels)
    return Staircase(tuple(levels))


# ---------------------------------------------------------------------------
# JSON codec
# ---------------------------------------------------------------------------

def function_to_json(f: MonotoneFunction) -> dict:
    """Plain-dict form of a function, inverse of function_from_json."""
    if isinstance(f, UnitStep):
        return {"kind": "unit_step", "x0": f.x0}
    if isinstance(f, Staircase):
        return {"kind": "staircase", "alphas": list(f.alphas)}
    if isinstance(f, Preset):
        out = {"kind": "preset", "id": f.id}
        if f.id == "logistic":
            out["rate"] = f.rate
            out["center"] = f.center
        return out
    raise ParseError(f"not a monotone function: {f!r}")


def function_from_json(obj) -> MonotoneFunction:
    """Build a function from its dict form; see function_to_json."""
    if not isinstance(obj, dict):
        raise ParseError(f"function spec must be a JSON object, got {type(obj).__name__}")
    kind = obj.get("kind")
    if kind == "unit_step":
        _require_keys(obj, {"kind", "x0"})
        return UnitStep(x0=_number(obj, "x0"))
    if kind == "staircase":
        _require_keys(obj, {"kind", "alphas"})
        alphas = obj.get("alphas")
        if not isinstance(alphas, (list, tuple)):
            raise ParseError("staircase spec needs an 'alphas' array")
        return Staircase(alphas=tuple(alphas))
    if kind == "preset":
        _require_keys(obj, {"kind", "id"}, optional={"rate", "center"})
        preset_id = obj.get("id")
        if not isinstance(preset_id, str):
            raise ParseError("preset spec needs a string 'id'")
        kwargs = {}
        if "rate" in obj:
            kwargs["rate"] = _number(obj, "rate")
        if "center" in obj:
            kwargs["center"] = _number(obj, "center")
        return Preset(id=preset_id, **kwargs)
    raise ParseError(f"unknown function kind {kind!r}")


def _require_keys(obj: dict, required: set, optional: set = frozenset()) -> None:
    missing = required - obj.keys()
    if missing:
        raise ParseError(f"missing field(s) {sorted(missing)}")
    extra = obj.keys() - required - optional
    if extra:
        raise ParseError(f"unexpected field(s) {sorted(extra)}")


def _number(obj: dict, key: str) -> float:
    v = obj.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"field {key!r} must be a number, got {v!r}")
    return float(v)
