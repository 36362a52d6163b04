"""Concrete bounded complete UCW-hyperbolic space models.

All four models are CAT(0), so all carry the quadratic modulus ``eps**2/8``.
Each is a closed bounded geodesically convex piece of a standard space:

* :class:`EuclideanBall` -- closed ball of radius ``R`` in R^n.
* :class:`SparseL2Ball` -- closed ball in l^2 restricted to finitely
  supported sequences (indices start at 1).
* :class:`HyperboloidDisk` -- closed geodesic ball of radius ``rho`` about
  ``(1, 0, 0)`` on the hyperboloid model of the hyperbolic plane.
* :class:`StarTree` -- ``k`` segments of length ``L`` glued at a hub.
"""
from __future__ import annotations

import math
from typing import Any, NamedTuple

import numpy as np

from ucwfp import kernels
from ucwfp._pykernels import DROP
from ucwfp.geometry import ConfigError, SpaceModel, cat0_modulus

# --------------------------------------------------------------------------
# Euclidean ball


class EuclideanBall(SpaceModel):
    name = "euclidean"

    def __init__(self, n: int = 2, R: float = 1.0, tol: float = 1e-9):
        if int(n) != n or n < 1:
            raise ConfigError(f"euclidean: n must be a positive integer, got {n!r}")
        if not R > 0:
            raise ConfigError(f"euclidean: R must be positive, got {R!r}")
        self.n = int(n)
        self.R = float(R)
        self.b = 2.0 * self.R
        self.tol = float(tol)
        self.modulus = cat0_modulus()

    def metric(self, x, y):
        return math.dist(x, y)

    def combine(self, x, y, lam):
        c = 1.0 - lam
        return tuple(c * a + lam * b for a, b in zip(x, y))

    def midpoint(self, x, y):
        return tuple(0.5 * a + 0.5 * b for a, b in zip(x, y))

    def norm(self, x) -> float:
        return math.hypot(*x)

    def sample(self, rng):
        u = rng.random()
        if u < 0.03:
            return (0.0,) * self.n
        g = rng.standard_normal(self.n)
        nrm = float(np.sqrt(g @ g)) or 1.0
        rad = self.R if u < 0.08 else self.R * rng.random() ** (1.0 / self.n)
        return tuple(float(v) for v in g * (rad / nrm))

    def owns(self, x):
        return isinstance(x, tuple) and len(x) == self.n

    def contains(self, x, slack: float = 1e-12) -> bool:
        return self.owns(x) and self.norm(x) <= self.R * (1.0 + slack)

    def origin(self):
        return (0.0,) * self.n

    def to_json(self, x):
        return list(x)

    def from_json(self, obj):
        if not isinstance(obj, (list, tuple)) or len(obj) != self.n:
            raise ConfigError(f"euclidean point must be a list of {self.n} numbers, got {obj!r}")
        x = tuple(float(v) for v in obj)
        if not self.contains(x):
            raise ConfigError(f"point {obj!r} lies outside the ball of radius {self.R}")
        return x

    def config(self):
        return {"model": self.name, "n": self.n, "R": self.R, "tol": self.tol}


# --------------------------------------------------------------------------
# finitely supported l^2


class SparseVector:
    """Finitely supported real sequence, stored as sorted index/value arrays.

    Only entries with magnitude above 1e-300 are stored. Instances are
    immutable; the arrays are flagged read-only.
    """

    __slots__ = ("idx", "val")

    def __init__(self, idx, val):
        idx = np.ascontiguousarray(idx, dtype=np.int64)
        val = np.ascontiguousarray(val, dtype=np.float64)
        idx.flags.writeable = False
        val.flags.writeable = False
        self.idx = idx
        self.val = val

    @classmethod
    def from_dict(cls, mapping) -> "SparseVector":
        items = sorted((int(k), float(v)) for k, v in mapping.items())
        items = [(k, v) for k, v in items if abs(v) > DROP]
        if any(k < 1 for k, _ in items):
            raise ConfigError("sparse indices start at 1")
        return cls([k for k, _ in items], [v for _, v in items])

    @classmethod
    def zero(cls) -> "SparseVector":
        return cls(np.empty(0, np.int64), np.empty(0, np.float64))

    @classmethod
    def unit(cls, i: int) -> "SparseVector":
        return cls([i], [1.0])

    def to_dict(self) -> dict[int, float]:
        return {int(k): float(v) for k, v in zip(self.idx, self.val)}

    def support(self) -> set[int]:
        return set(self.idx.tolist())

    def __len__(self):
        return int(self.idx.size)

    def __getitem__(self, i: int) -> float:
        pos = np.searchsorted(self.idx, i)
        if pos < self.idx.size and self.idx[pos] == i:
            return float(self.val[pos])
        return 0.0

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return np.array_equal(self.idx, other.idx) and np.array_equal(self.val, other.val)

    __hash__ = None

    def __repr__(self):
        if self.idx.size > 6:
            head = ", ".join(f"{k}: {v:.6g}" for k, v in zip(self.idx[:6], self.val[:6]))
            return f"SparseVector({{{head}, ...}}; nnz={self.idx.size})"
        return f"SparseVector({self.to_dict()})"


class SparseL2Ball(SpaceModel):
    name = "sparse_l2"

    def __init__(self, R: float = 1.0, tol: float = 1e-9, sample_dim: int = 12):
        if not R > 0:
            raise ConfigError(f"sparse_l2: R must be positive, got {R!r}")
        self.R = float(R)
        self.b = 2.0 * self.R
        self.tol = float(tol)
        self.sample_dim = int(sample_dim)
        self.modulus = cat0_modulus()

    def metric(self, x, y):
        return kernels.sparse_dist(x.idx, x.val, y.idx, y.val)

    def combine(self, x, y, lam):
        return SparseVector(*kernels.sparse_combine(x.idx, x.val, y.idx, y.val, lam))

    def norm(self, x) -> float:
        return kernels.sparse_norm(x.val)

    def sample(self, rng):
        u = rng.random()
        if u < 0.03:
            return SparseVector.zero()
        s = int(rng.integers(1, 7))
        idx = np.sort(rng.choice(np.arange(1, self.sample_dim + 1), size=s, replace=False))
        g = rng.standard_normal(s)
        nrm = float(np.sqrt(g @ g)) or 1.0
        rad = self.R if u < 0.08 else self.R * rng.random() ** (1.0 / s)
        return SparseVector(idx, g * (rad / nrm))

    def owns(self, x):
        return isinstance(x, SparseVector)

    def contains(self, x, slack: float = 1e-12) -> bool:
        return self.owns(x) and self.norm(x) <= self.R * (1.0 + slack)

    def origin(self):
        return SparseVector.zero()

    def to_json(self, x):
        return {str(k): v for k, v in x.to_dict().items()}

    def from_json(self, obj):
        if not isinstance(obj, dict):
            raise ConfigError(f"sparse point must be an {{index: value}} object, got {obj!r}")
        try:
            x = SparseVector.from_dict(obj)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad sparse point {obj!r}: {exc}") from None
        if not self.contains(x):
            raise ConfigError(f"point lies outside the l2 ball of radius {self.R}")
        return x

    def config(self):
        return {"model": self.name, "R": self.R, "tol": self.tol}


# --------------------------------------------------------------------------
# hyperboloid model of the hyperbolic plane


def _lift(x1: float, x2: float) -> tuple[float, float, float]:
    return (math.sqrt(1.0 + x1 * x1 + x2 * x2), x1, x2)


class HyperboloidDisk(SpaceModel):
    """Closed geodesic disk of radius ``rho`` about ``(1, 0, 0)``.

    Points are triples on the upper sheet ``x0^2 - x1^2 - x2^2 = 1``; the
    time coordinate is always recomputed from the spatial ones, so the sheet
    constraint holds to rounding after every operation.
    """

    name = "hyperboloid"

    def __init__(self, rho: float = 1.0, tol: float = 1e-7):
        if not rho > 0:
            raise ConfigError(f"hyperboloid: rho must be positive, got {rho!r}")
        self.rho = float(rho)
        self.b = 2.0 * self.rho
        self.tol = float(tol)
        self.modulus = cat0_modulus()
        self.center = (1.0, 0.0, 0.0)

    def metric(self, x, y):
        c = x[0] * y[0] - x[1] * y[1] - x[2] * y[2]
        if c > 2.0:
            return math.acosh(c)
        # 4 sinh^2(d/2) = <x-y, x-y>; stable for nearby points
        d0, d1, d2 = x[0] - y[0], x[1] - y[1], x[2] - y[2]
        q = d1 * d1 + d2 * d2 - d0 * d0
        return 2.0 * math.asinh(0.5 * math.sqrt(q)) if q > 0.0 else 0.0

    def combine(self, x, y, lam):
        if lam == 0.0:
            return x
        if lam == 1.0:
            return y
        d = self.metric(x, y)
        if d == 0.0:
            return x
        s = math.sinh(d)
        p = math.sinh((1.0 - lam) * d) / s
        q = math.sinh(lam * d) / s
        return _lift(p * x[1] + q * y[1], p * x[2] + q * y[2])

    def point_at(self, r: float, theta: float):
        """Point at geodesic distance ``r`` from the center in direction ``theta``."""
        sr = math.sinh(r)
        return _lift(sr * math.cos(theta), sr * math.sin(theta))

    def sample(self, rng):
        u = rng.random()
        if u < 0.03:
            return self.center
        theta = 2.0 * math.pi * rng.random()
        r = self.rho if u < 0.08 else self.rho * math.sqrt(rng.random())
        return self.point_at(r, theta)

    def owns(self, x):
        return isinstance(x, tuple) and len(x) == 3

    def contains(self, x, slack: float = 1e-12) -> bool:
        return self.owns(x) and self.metric(self.center, x) <= self.rho + slack

    def sheet_defect(self, x) -> float:
        return abs(x[0] * x[0] - x[1] * x[1] - x[2] * x[2] - 1.0)

    def origin(self):
        return self.center

    def to_json(self, x):
        return list(x)

    def from_json(self, obj):
        if not isinstance(obj, (list, tuple)) or len(obj) != 3:
            raise ConfigError(f"hyperboloid point must be [x0, x1, x2], got {obj!r}")
        raw = tuple(float(v) for v in obj)
        if raw[0] <= 0 or self.sheet_defect(raw) > 1e-10 * max(1.0, raw[0] * raw[0]):
            raise ConfigError(f"{obj!r} is not on the upper sheet of the hyperboloid")
        x = _lift(raw[1], raw[2])
        if not self.contains(x):
            raise ConfigError(f"{obj!r} lies outside the disk of radius {self.rho}")
        return x

    def config(self):
        return {"model": self.name, "rho": self.rho, "tol": self.tol}


# --------------------------------------------------------------------------
# star tree


class TreePoint(NamedTuple):
    leg: int
    offset: float


HUB = TreePoint(0, 0.0)


def _tp(leg: int, offset: float) -> TreePoint:
    return HUB if offset <= 0.0 else TreePoint(leg, offset)


class StarTree(SpaceModel):
    """``k`` closed segments of length ``L`` glued at a common hub.

    A point is ``(leg, offset)`` with leg in ``1..k`` and offset in ``(0, L]``;
    the hub is the canonical ``(0, 0.0)``.
    """

    name = "startree"

    def __init__(self, k: int = 3, L: float = 1.0, tol: float = 1e-9):
        if int(k) != k or k < 3:
            raise ConfigError(f"startree: k must be an integer >= 3, got {k!r}")
        if not L > 0:
            raise ConfigError(f"startree: L must be positive, got {L!r}")
        self.k = int(k)
        self.L = float(L)
        self.b = 2.0 * self.L
        self.tol = float(tol)
        self.modulus = cat0_modulus()

    def metric(self, x, y):
        if x.leg == y.leg:
            return abs(x.offset - y.offset)
        return x.offset + y.offset

    def combine(self, x, y, lam):
        a, b = x.offset, y.offset
        if x.leg == y.leg or x.leg == 0 or y.leg == 0:
            return _tp(x.leg or y.leg, (1.0 - lam) * a + lam * b)
        total = a + b
        s = lam * total  # arclength from x
        if s < a:
            return _tp(x.leg, a - s)
        return _tp(y.leg, b - (1.0 - lam) * total)

    def point(self, leg: int, offset: float) -> TreePoint:
        if offset == 0.0:
            return HUB
        if not (1 <= leg <= self.k and 0.0 < offset <= self.L):
            raise ConfigError(f"no point ({leg}, {offset}) on a {self.k}-leg tree of leg length {self.L}")
        return TreePoint(int(leg), float(offset))

    def sample(self, rng):
        u = rng.random()
        if u < 0.03:
            return HUB
        leg = int(rng.integers(1, self.k + 1))
        off = self.L if u < 0.08 else self.L * (1.0 - rng.random())
        return TreePoint(leg, off)

    def owns(self, x):
        return isinstance(x, TreePoint)

    def contains(self, x, slack: float = 0.0) -> bool:
        return self.owns(x) and (x == HUB or (1 <= x.leg <= self.k and 0.0 < x.offset <= self.L * (1 + slack)))

    def origin(self):
        return HUB

    def to_json(self, x):
        return {"leg": x.leg, "offset": x.offset}

    def from_json(self, obj):
        if isinstance(obj, (list, tuple)) and len(obj) == 2:
            obj = {"leg": obj[0], "offset": obj[1]}
        if not isinstance(obj, dict) or set(obj) != {"leg", "offset"}:
            raise ConfigError(f"tree point must be {{leg, offset}}, got {obj!r}")
        return self.point(int(obj["leg"]), float(obj["offset"]))

    def config(self):
        return {"model": self.name, "k": self.k, "L": self.L, "tol": self.tol}


# --------------------------------------------------------------------------

_MODELS = {
    "euclidean": (EuclideanBall, {"n": "n", "R": "R", "tol": "tol"}),
    "sparse_l2": (SparseL2Ball, {"R": "R", "tol": "tol"}),
    "hyperboloid": (HyperboloidDisk, {"rho": "rho", "ρ": "rho", "tol": "tol"}),
    "startree": (StarTree, {"k": "k", "L": "L", "tol": "tol"}),
}
_ALIASES = {"sparse": "sparse_l2", "l2": "sparse_l2", "tree": "startree"}


def make_space(config: dict[str, Any]) -> SpaceModel:
    """Build a space model from a ``SpaceConfig`` mapping."""
    if not isinstance(config, dict) or "model" not in config:
        raise ConfigError(f"space config needs a 'model' key, got {config!r}")
    model = _ALIASES.get(config["model"], config["model"])
    if model not in _MODELS:
        raise ConfigError(f"unknown space model {config['model']!r}; expected one of {sorted(_MODELS)}")
    cls, keys = _MODELS[model]
    kwargs = {}
    for k, v in config.items():
        if k == "model":
            continue
        if k not in keys:
            raise ConfigError(f"{model}: unknown parameter {k!r}")
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{model}: parameter {k!r} must be a number, got {v!r}")
        kwargs[keys[k]] = v
    return cls(**kwargs)
