"""Asymptotically nonexpansive self-maps and their Lipschitz sequences.

A map ``T`` is asymptotically nonexpansive with respect to ``k_n -> 0`` when
``d(T^n x, T^n y) <= (1 + k_n) d(x, y)`` for all ``n >= 1``. Besides ``k``
every map supplies an explicit witness ``N(eps)`` with ``k_n <= eps`` for all
``n >= N(eps)``; the threshold search of the derived operator relies on it.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ucwfp import kernels
from ucwfp.geometry import ConfigError, SpaceModel, UCWError
from ucwfp.spaces import HUB, EuclideanBall, SparseL2Ball, SparseVector, StarTree, TreePoint


class MapContractError(UCWError):
    """A map's ``k`` sequence or witness broke its declared contract."""


class AsymptoticMap(ABC):
    name = "abstract"

    def __init__(self, space: SpaceModel):
        self.space = space

    @abstractmethod
    def apply(self, x): ...

    def __call__(self, x):
        return self.apply(x)

    @abstractmethod
    def k(self, n: int) -> float:
        """Lipschitz excess of the ``n``-th iterate, ``n >= 1``."""

    @abstractmethod
    def k_witness(self, eps: float) -> int:
        """An index ``N >= 1`` with ``k(n) <= eps`` for every ``n >= N``."""

    @property
    def fixed_points(self) -> tuple:
        return ()

    def power(self, m: int, x):
        if m < 0:
            raise ValueError(f"power needs m >= 0, got {m}")
        for _ in range(m):
            x = self.apply(x)
        return x

    def is_nonexpansive(self, horizon: int = 64) -> bool:
        return all(self.k(n) == 0.0 for n in range(1, horizon + 1))

    @abstractmethod
    def config(self) -> dict: ...

    def __repr__(self):
        return f"{type(self).__name__}({self.config()})"


def _zero_witness(eps: float) -> int:
    return 1


class Rotation(AsymptoticMap):
    """Planar rotation by ``theta`` about the origin; an isometry."""

    name = "rotation"

    def __init__(self, space: EuclideanBall, theta: float):
        super().__init__(space)
        self.theta = float(theta)
        c, s = math.cos(self.theta), math.sin(self.theta)
        # exact quarter turns
        snap = {0.0: 0.0, 1.0: 1.0, -1.0: -1.0}
        self.c = next((v for t, v in snap.items() if abs(c - t) < 1e-15), c)
        self.s = next((v for t, v in snap.items() if abs(s - t) < 1e-15), s)

    def apply(self, x):
        c, s = self.c, self.s
        return (c * x[0] - s * x[1], s * x[0] + c * x[1])

    def k(self, n):
        return 0.0

    k_witness = staticmethod(_zero_witness)

    @property
    def fixed_points(self):
        return (self.space.origin(),)

    def config(self):
        return {"map": self.name, "theta": self.theta}


class GeodesicContraction(AsymptoticMap):
    """``T x = W(x, q, c)``: moves every point a fraction ``c`` toward ``q``.

    By (W4), ``d(Tx, Ty) <= (1 - c) d(x, y)``, so ``k_n = 0``.
    """

    name = "contraction"

    def __init__(self, space: SpaceModel, q, c: float):
        super().__init__(space)
        if not 0.0 < c < 1.0:
            raise ConfigError(f"contraction: c must lie in (0, 1), got {c!r}")
        self.q = q
        self.c = float(c)

    def apply(self, x):
        return self.space.combine(x, self.q, self.c)

    def k(self, n):
        return 0.0

    k_witness = staticmethod(_zero_witness)

    @property
    def fixed_points(self):
        return (self.q,)

    def config(self):
        return {"map": self.name, "q": self.space.to_json(self.q), "c": self.c}


class GoebelKirk(AsymptoticMap):
    """``T(x1, x2, x3, ...) = (0, x1^2, a2 x2, a3 x3, ...)`` on the unit ball.

    The weights are ``a_i = 2**(-w_i)`` with ``w_i = (1 - r) r**(i-2)`` for
    ``i >= 2``, so ``prod_{i>=2} a_i = 1/2``; ``r = 1/2`` gives the canonical
    ``a_i = (1/2)**(1/2**(i-1))``.

    Lipschitz constant of ``T^n``: the head is sent to ``A_n * x1**2`` with
    ``A_n = prod_{i=2}^n a_i`` and ``|x1^2 - y1^2| <= 2|x1 - y1|`` on the unit
    ball, every other coordinate is scaled by a product of weights ``<= 1``.
    Hence ``Lip(T^n) <= max(1, 2 A_n)`` and
    ``k_n = 2 A_n - 1 = 2**(r**(n-1)) - 1``; ``k_1 = 1`` and ``k_n -> 0``.
    The only fixed point is 0.
    """

    name = "goebelkirk"

    def __init__(self, space: SparseL2Ball, ratio: float = 0.5):
        super().__init__(space)
        if not 0.0 < ratio < 1.0:
            raise ConfigError(f"goebelkirk: ratio must lie in (0, 1), got {ratio!r}")
        if space.R > 1.0:
            raise ConfigError("goebelkirk needs a sparse ball of radius <= 1")
        self.ratio = float(ratio)
        self._weights = self._table(64)

    def _table(self, n: int) -> np.ndarray:
        i = np.arange(n, dtype=np.float64)
        w = np.exp2(-(1.0 - self.ratio) * self.ratio ** (i - 2.0))
        w[:2] = 0.0  # unused slots
        w.flags.writeable = False
        return w

    def weight(self, i: int) -> float:
        return float(self._table(i + 1)[i])

    def apply(self, x: SparseVector) -> SparseVector:
        if x.idx.size and x.idx[-1] >= self._weights.size - 1:
            self._weights = self._table(2 * int(x.idx[-1]) + 64)
        return SparseVector(*kernels.gk_step(x.idx, x.val, self._weights))

    def k(self, n):
        if n < 1:
            raise ValueError("k is indexed from 1")
        return math.expm1(math.log(2.0) * self.ratio ** (n - 1))

    def k_witness(self, eps):
        if eps <= 0:
            raise ValueError("witness needs eps > 0")
        target = math.log1p(eps) / math.log(2.0)
        n = 1 + max(0, math.ceil(math.log(target) / math.log(self.ratio)))
        # rounding guard; k is decreasing so checking n suffices
        while self.k(n) > eps:
            n += 1
        while n > 1 and self.k(n - 1) <= eps:
            n -= 1
        return n

    @property
    def fixed_points(self):
        return (SparseVector.zero(),)

    def config(self):
        return {"map": self.name, "ratio": self.ratio}


class TreeFold(AsymptoticMap):
    """Pull every point a fraction ``c`` toward the hub, then move it to the
    next leg (``leg -> leg mod k + 1``). A ``(1 - c)``-contraction; Fix = {hub}."""

    name = "treefold"

    def __init__(self, space: StarTree, c: float):
        super().__init__(space)
        if not 0.0 < c < 1.0:
            raise ConfigError(f"treefold: c must lie in (0, 1), got {c!r}")
        self.c = float(c)

    def apply(self, x: TreePoint) -> TreePoint:
        if x == HUB:
            return HUB
        off = (1.0 - self.c) * x.offset
        if off <= 0.0:
            return HUB
        return TreePoint(x.leg % self.space.k + 1, off)

    def k(self, n):
        return 0.0

    k_witness = staticmethod(_zero_witness)

    @property
    def fixed_points(self):
        return (HUB,)

    def config(self):
        return {"map": self.name, "c": self.c}


def make_map(space: SpaceModel, config: dict[str, Any]) -> AsymptoticMap:
    """Build a library map from a ``MapConfig`` mapping."""
    if not isinstance(config, dict) or "map" not in config:
        raise ConfigError(f"map config needs a 'map' key, got {config!r}")
    kind = config["map"]
    params = {k: v for k, v in config.items() if k != "map"}

    def take(allowed: set[str]):
        extra = set(params) - allowed
        if extra:
            raise ConfigError(f"{kind}: unknown parameter(s) {sorted(extra)}")

    if kind == "rotation":
        take({"theta"})
        if not isinstance(space, EuclideanBall) or space.n != 2:
            raise ConfigError("rotation needs a 2-dimensional euclidean ball")
        return Rotation(space, float(params.get("theta", math.pi / 2)))
    if kind == "contraction":
        take({"q", "c"})
        q = space.from_json(params["q"]) if "q" in params else space.origin()
        return GeodesicContraction(space, q, float(params.get("c", 0.5)))
    if kind == "goebelkirk":
        take({"ratio"})
        if not isinstance(space, SparseL2Ball):
            raise ConfigError("goebelkirk needs the sparse_l2 ball")
        return GoebelKirk(space, float(params.get("ratio", 0.5)))
    if kind == "treefold":
        take({"c"})
        if not isinstance(space, StarTree):
            raise ConfigError("treefold needs a startree space")
        return TreeFold(space, float(params.get("c", 0.5)))
    raise ConfigError(f"unknown map {kind!r}; expected rotation, contraction, goebelkirk or treefold")


# --------------------------------------------------------------------------


@dataclass
class MapReport:
    map: dict
    space: dict
    horizon: int
    trials: int
    seed: int
    tol: float
    max_violation: float = 0.0
    worst: dict | None = None
    fixed_point_residual: float = 0.0
    witness_violation: float = 0.0
    witness_checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (self.max_violation <= self.tol and self.fixed_point_residual <= self.tol
                and self.witness_violation <= 0.0)

    def to_json(self) -> dict:
        return {
            "map": self.map,
            "space": self.space,
            "horizon": self.horizon,
            "trials": self.trials,
            "seed": self.seed,
            "tol": self.tol,
            "passed": self.passed,
            "maxViolation": self.max_violation,
            "worstSeedInputs": self.worst,
            "fixedPointResidual": self.fixed_point_residual,
            "witnessViolation": self.witness_violation,
        }


def verify_asymptotic_bound(tmap: AsymptoticMap, space: SpaceModel | None = None, horizon: int = 20,
                            trials: int = 1000, seed: int = 0, tol: float = 1e-9) -> MapReport:
    """Sampled check of ``d(T^n x, T^n y) <= (1 + k_n) d(x, y)`` for ``n <= horizon``,
    of the declared fixed points and of the witness against ``k`` on the horizon."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    space = space or tmap.space
    rep = MapReport(tmap.config(), space.config(), horizon, trials, seed, tol)
    d = space.metric
    worst = 0.0
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        x, y = space.sample(rng), space.sample(rng)
        dxy = d(x, y)
        for n in range(1, horizon + 1):
            x, y = tmap.apply(x), tmap.apply(y)
            v = d(x, y) - (1.0 + tmap.k(n)) * dxy
            if v > worst or rep.worst is None:
                worst = max(worst, v)
                rep.worst = {"seed": seed, "trial": t, "n": n, "excess": v}
    rep.max_violation = max(worst, 0.0)
    rep.fixed_point_residual = max((d(tmap.apply(p), p) for p in tmap.fixed_points), default=0.0)
    ks = [tmap.k(n) for n in range(1, horizon + 2)]
    for eps in [ks[0] * 2.0 ** -e for e in range(0, 12)] + [0.5, 1e-3, 1e-6]:
        if eps <= 0:
            continue
        N = tmap.k_witness(eps)
        tail = [tmap.k(n) for n in range(N, N + horizon)]
        rep.witness_violation = max(rep.witness_violation, max(tail) - eps)
    return rep
