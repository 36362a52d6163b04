"""Abstract W-hyperbolic space contract, moduli of uniform convexity and
randomized axiom checking.

A space model bundles a metric, a convex combinator ``W(x, y, lam)``
(written ``(1 - lam) x + lam y``), a diameter bound ``b`` and a monotone
modulus of uniform convexity ``eta``.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

Point = Any


class UCWError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(UCWError, ValueError):
    pass


class DomainError(UCWError, ValueError):
    pass


class UsageError(UCWError, TypeError):
    pass


@dataclass(frozen=True)
class Modulus:
    """A modulus of uniform convexity ``eta(r, eps)``.

    ``factor`` is an optional ``eta'`` with ``eta(r, eps) = eps * eta'(r, eps)``
    and ``eta'`` nondecreasing in ``eps``; when present the midpoint-drop
    coefficient may be taken to be ``eta`` itself.
    """

    eval: Callable[[float, float], float]
    monotone_in_r: bool = True
    factor: Callable[[float, float], float] | None = None
    name: str = "custom"

    def __call__(self, r: float, eps: float) -> float:
        return self.eval(r, eps)


def _quad(r, eps):
    return eps * eps / 8.0


def _quad_factor(r, eps):
    return eps / 8.0


def cat0_modulus() -> Modulus:
    """The quadratic modulus ``eps**2 / 8`` valid in every CAT(0) space."""
    return Modulus(_quad, True, _quad_factor, "cat0")


def u_transform(modulus: Modulus) -> Callable[[float, float], float]:
    """Midpoint-drop coefficient ``u`` for ``modulus``.

    For ``d(x,a) <= d(y,a) <= r`` and ``d(x,y) >= eps*r`` one has
    ``d((x+y)/2, a) <= d(y,a) - u(r, eps) * r``.
    """
    if modulus.factor is not None:
        return modulus.eval
    eta = modulus.eval

    def u(r, eps):
        return 0.5 * eps * eta(r, eps)

    return u


class SpaceModel(ABC):
    """A bounded complete UCW-hyperbolic space.

    Subclasses supply the metric, the combinator, a sampler and JSON
    (de)serialization. Instances are immutable.
    """

    name: str = "abstract"
    b: float
    modulus: Modulus
    tol: float = 1e-9

    @abstractmethod
    def metric(self, x: Point, y: Point) -> float: ...

    @abstractmethod
    def combine(self, x: Point, y: Point, lam: float) -> Point: ...

    def midpoint(self, x: Point, y: Point) -> Point:
        return self.combine(x, y, 0.5)

    @abstractmethod
    def sample(self, rng: np.random.Generator) -> Point: ...

    @abstractmethod
    def owns(self, x: Point) -> bool:
        """Cheap structural test that ``x`` is a point of this model."""

    @abstractmethod
    def to_json(self, x: Point) -> Any: ...

    @abstractmethod
    def from_json(self, obj: Any) -> Point: ...

    def sample_point(self, seed: int) -> Point:
        return self.sample(np.random.default_rng(seed))

    def config(self) -> dict:
        return {"model": self.name}

    def __repr__(self):
        params = ", ".join(f"{k}={v!r}" for k, v in self.config().items() if k != "model")
        return f"{type(self).__name__}({params})"


def _check_pair(space: SpaceModel, x, y):
    if not (space.owns(x) and space.owns(y)):
        raise UsageError(f"point does not belong to {space!r}")


def combine(space: SpaceModel, x: Point, y: Point, lam: float) -> Point:
    """Validated ``W(x, y, lam)``."""
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [0, 1], got {lam!r}")
    _check_pair(space, x, y)
    return space.combine(x, y, lam)


def midpoint(space: SpaceModel, x: Point, y: Point) -> Point:
    _check_pair(space, x, y)
    return space.midpoint(x, y)


# --------------------------------------------------------------------------
# randomized axiom checking

AXIOMS = (
    "metric_symmetry",
    "metric_diagonal",
    "triangle",
    "diameter",
    "W1",
    "W2",
    "W3",
    "W4",
    "endpoint_left",
    "endpoint_right",
    "idempotent",
    "distance_from_left",
    "distance_from_right",
    "uniform_convexity",
)


@dataclass
class AxiomResult:
    axiom: str
    trials: int = 0
    worst_value: float = -math.inf
    worst: dict | None = None

    def record(self, violation: float, where: dict):
        self.trials += 1
        if violation > self.worst_value:
            self.worst_value = violation
            self.worst = where

    @property
    def max_violation(self) -> float:
        """Largest excess over the axiom's bound; 0 when never exceeded."""
        return max(self.worst_value, 0.0)

    def to_json(self) -> dict:
        return {
            "axiom": self.axiom,
            "trials": self.trials,
            "maxViolation": self.max_violation,
            "worstSeedInputs": self.worst,
        }


@dataclass
class AxiomReport:
    space: dict
    seed: int
    tol: float
    results: dict[str, AxiomResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.max_violation <= self.tol for r in self.results.values())

    def max_violation(self) -> float:
        return max((r.max_violation for r in self.results.values()), default=0.0)

    def failures(self) -> list[str]:
        return [k for k, r in self.results.items() if r.max_violation > self.tol]

    def to_json(self) -> dict:
        return {
            "space": self.space,
            "seed": self.seed,
            "tol": self.tol,
            "passed": self.passed,
            "axioms": [r.to_json() for r in self.results.values()],
        }


def _lam(rng) -> float:
    c = rng.integers(8)
    if c == 0:
        return 0.0
    if c == 1:
        return 1.0
    if c == 2:
        return 0.5
    return float(rng.random())


def _premise_radius(rng, far: float, sep: float):
    """Radius ``r >= far`` and ``eps > 0`` with ``sep >= eps * r``; tight half the time."""
    r = far if rng.random() < 0.5 else far * (1.0 + 0.5 * rng.random())
    eps = sep / r
    if rng.random() >= 0.5:
        eps *= 1.0 - rng.random()  # in (0, 1]
    return r, eps


def _draw(space: SpaceModel, seed: int, t: int):
    rng = np.random.default_rng([seed, t])
    x, y, z, w, a = (space.sample(rng) for _ in range(5))
    if rng.random() < 0.05:
        y = x
    return rng, x, y, z, w, a, _lam(rng), _lam(rng)


def check_axioms(space: SpaceModel, trials: int = 10_000, seed: int = 0, tol: float | None = None) -> AxiomReport:
    """Sample points and parameters; measure the worst violation of each axiom.

    Violations are reported, never raised. Every trial draws from its own
    generator seeded with ``(seed, trial)`` so the worst case of each axiom
    is replayed at the end to attach its inputs.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    tol = space.tol if tol is None else tol
    report = AxiomReport(space.config(), seed, tol, {a: AxiomResult(a) for a in AXIOMS})
    res = report.results
    d, W, eta = space.metric, space.combine, space.modulus

    for t in range(trials):
        rng, x, y, z, w, a, lam, mu = _draw(space, seed, t)
        where = {"seed": seed, "trial": t}

        dxy = d(x, y)
        res["metric_symmetry"].record(abs(dxy - d(y, x)), where)
        res["metric_diagonal"].record(d(x, x), where)
        res["triangle"].record(d(x, z) - d(x, y) - d(y, z), where)
        res["diameter"].record(dxy - space.b, where)

        wl = W(x, y, lam)
        res["W1"].record(d(z, wl) - ((1 - lam) * d(z, x) + lam * d(z, y)), where)
        res["W2"].record(abs(d(wl, W(x, y, mu)) - abs(lam - mu) * dxy), where)
        res["W3"].record(d(wl, W(y, x, 1.0 - lam)), where)
        res["W4"].record(d(W(x, z, lam), W(y, w, lam)) - ((1 - lam) * dxy + lam * d(z, w)), where)

        res["endpoint_left"].record(d(W(x, y, 0.0), x), where)
        res["endpoint_right"].record(d(W(x, y, 1.0), y), where)
        res["idempotent"].record(d(W(x, x, lam), x), where)
        res["distance_from_left"].record(abs(d(x, wl) - lam * dxy), where)
        res["distance_from_right"].record(abs(d(y, wl) - (1 - lam) * dxy), where)

        if dxy > 0.0:
            r, eps = _premise_radius(rng, max(d(x, a), d(y, a)), dxy)
            viol = d(space.midpoint(x, y), a) - (1.0 - eta(r, eps)) * r
            res["uniform_convexity"].record(viol, {**where, "r": r, "eps": eps})

    j = space.to_json
    for r in res.values():
        if r.worst is not None:
            _, x, y, z, w, a, lam, mu = _draw(space, seed, r.worst["trial"])
            r.worst = {**r.worst, "inputs": {"x": j(x), "y": j(y), "z": j(z), "w": j(w), "a": j(a),
                                             "lambda": lam, "mu": mu}}
    return report


def _drop_sample(space: SpaceModel, seed: int, t: int):
    rng = np.random.default_rng([seed, t, 1])
    x, y, a = (space.sample(rng) for _ in range(3))
    d = space.metric
    dxa, dya, dxy = d(x, a), d(y, a), d(x, y)
    if dxa > dya:
        x, y, dxa, dya = y, x, dya, dxa
    if dxy <= 0.0 or dya <= 0.0:
        return None
    r, eps = _premise_radius(rng, dya, dxy)
    return x, y, a, dya, r, eps


def check_midpoint_drop(space: SpaceModel, trials: int = 10_000, seed: int = 0) -> AxiomResult:
    """Worst violation of ``d((x+y)/2, a) <= d(y,a) - u(r,eps) r`` on
    premise-satisfying samples (``d(x,a) <= d(y,a) <= r``, ``d(x,y) >= eps r``).

    ``trials`` counts premise-satisfying samples; degenerate draws are skipped.
    """
    u = u_transform(space.modulus)
    out = AxiomResult("midpoint_drop")
    t = -1
    while out.trials < trials:
        t += 1
        s = _drop_sample(space, seed, t)
        if s is None:
            continue
        x, y, a, dya, r, eps = s
        viol = space.metric(space.midpoint(x, y), a) - (dya - u(r, eps) * r)
        out.record(viol, {"seed": seed, "trial": t, "r": r, "eps": eps})
    if out.worst is not None:
        x, y, a, *_ = _drop_sample(space, seed, out.worst["trial"])
        j = space.to_json
        out.worst = {**out.worst, "inputs": {"x": j(x), "y": j(y), "a": j(a)}}
    return out


def check_modulus(modulus: Modulus, trials: int = 1000, seed: int = 0, r_max: float = 10.0) -> dict:
    """Sampled checks of the modulus contract on ``eps`` in ``(0, 2]``.

    Returns the worst violation for range, monotonicity in ``r`` and (when a
    factorization is present) the factorization identity and monotonicity of
    ``eta'`` in ``eps``.
    """
    rng = np.random.default_rng(seed)
    worst = {"range": 0.0, "monotone_r": 0.0, "factorization": 0.0, "factor_monotone": 0.0}
    for _ in range(trials):
        lo, hi = sorted(rng.uniform(1e-6, r_max, 2))
        e1, e2 = sorted(rng.uniform(1e-9, 2.0, 2))
        r = lo
        v = modulus(r, e1)
        worst["range"] = max(worst["range"], -v if v <= 0 else max(0.0, v - 1.0))
        worst["monotone_r"] = max(worst["monotone_r"], modulus(hi, e1) - modulus(lo, e1))
        if modulus.factor is not None:
            worst["factorization"] = max(worst["factorization"], abs(v - e1 * modulus.factor(r, e1)))
            worst["factor_monotone"] = max(worst["factor_monotone"], modulus.factor(r, e1) - modulus.factor(r, e2))
    return worst


def isclose(a: float, b: float, tol: float) -> bool:
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)
