"""The derived midpoint operator ``S`` built from an asymptotically
nonexpansive map ``T``.

``Sx = x`` when ``x`` is (numerically) fixed by ``T``. Otherwise an exponent
``m`` is chosen so that ``k_m`` is below a displacement-dependent threshold
and ``T^m x`` is not too close to ``x``, and ``Sx`` is the midpoint of
``T^m x`` and ``x``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ucwfp.geometry import ConfigError, UCWError
from ucwfp.mappings import AsymptoticMap, MapContractError


class NumericalContradictionError(UCWError):
    """Neither candidate exponent reaches the displacement bound; the map's
    Lipschitz data cannot be right."""


class PreconditionError(UCWError, ValueError):
    pass


GENERAL = "general"
SHORTCUT = "shortcut"


@dataclass(frozen=True)
class Decision:
    n: int
    m: int
    threshold: float
    dxTx: float

    def to_json(self):
        return {"n": self.n, "m": self.m, "threshold": self.threshold, "dxTx": self.dxTx}


class SOperator:
    def __init__(self, tmap: AsymptoticMap, fix_tol: float | None = None, mode: str = GENERAL,
                 horizon: int = 64, tol: float | None = None):
        self.map = tmap
        self.space = tmap.space
        self.b = self.space.b
        self.fix_tol = 1e-12 * self.b if fix_tol is None else float(fix_tol)
        # slack on the exponent search before declaring a contradiction
        self.tol = self.space.tol if tol is None else float(tol)
        if mode not in (GENERAL, SHORTCUT):
            raise ConfigError(f"unknown S mode {mode!r}")
        if mode == SHORTCUT and not tmap.is_nonexpansive(horizon):
            raise ConfigError("shortcut mode requires k_n = 0 on the horizon")
        self.mode = mode
        self.last_decision: Decision | None = None

    def threshold(self, x=None, dxTx: float | None = None) -> float:
        if dxTx is None:
            dxTx = self.space.metric(x, self.map.apply(x))
        if dxTx <= self.fix_tol:
            raise PreconditionError(f"threshold needs d(x,Tx) > fixTol, got {dxTx!r}")
        e = dxTx / (2.0 * self.b)
        return min(e, 2.0 * self.space.modulus(self.b, e))

    def find_n(self, tau: float) -> int:
        if not tau > 0:
            raise PreconditionError("find_n needs tau > 0")
        k = self.map.k
        limit = self.map.k_witness(tau) + 1
        prev = k(1) <= tau
        for n in range(1, limit + 1):
            cur = k(n + 1) <= tau
            if prev and cur:
                return n
            prev = cur
        raise MapContractError(f"no n <= {limit} with k_n, k_n+1 <= {tau!r}; witness is wrong")

    def find_m(self, x, n: int, tx=None, dxTx: float | None = None):
        """Return ``(m, T^m x)`` with ``m`` the smaller of ``n, n+1`` reaching
        ``d(T^m x, x) >= d(Tx, x) / (2 + k_1)``."""
        T, d = self.map.apply, self.space.metric
        if tx is None:
            tx = T(x)
        if dxTx is None:
            dxTx = d(x, tx)
        bound = dxTx / (2.0 + self.map.k(1))
        tn = tx
        for _ in range(n - 1):
            tn = T(tn)
        dn = d(tn, x)
        if dn >= bound:
            return n, tn
        tn1 = T(tn)
        dn1 = d(tn1, x)
        if dn1 >= bound:
            return n + 1, tn1
        if max(dn, dn1) >= bound - self.tol:
            return (n, tn) if dn >= dn1 else (n + 1, tn1)
        raise NumericalContradictionError(
            f"d(T^{n}x,x)={dn!r} and d(T^{n + 1}x,x)={dn1!r} both below {bound!r}")

    def apply_with_decision(self, x):
        T, d = self.map.apply, self.space.metric
        tx = T(x)
        dxTx = d(x, tx)
        if dxTx <= self.fix_tol:
            return x, None
        if self.mode == SHORTCUT:
            return tx, Decision(1, 1, 0.0, dxTx)
        tau = self.threshold(dxTx=dxTx)
        n = self.find_n(tau)
        m, tm = self.find_m(x, n, tx, dxTx)
        return self.space.midpoint(tm, x), Decision(n, m, tau, dxTx)

    def __call__(self, x):
        sx, self.last_decision = self.apply_with_decision(x)
        return sx

    apply = __call__

    def config(self):
        return {"mode": self.mode, "fixTol": self.fix_tol}


@dataclass
class SReport:
    trials: int
    seed: int
    tol: float
    displacement: float = np.inf  # min of d(Sx,x) - d(Tx,x)/(2(2+k1))
    quasi: float = np.inf  # min of d(x,p) - d(Sx,p)
    fixed_exact: bool = True
    band: float = 0.0
    fix_equiv: float = np.inf  # surrogate for Fix(T) = Fix(S)
    midpoint_identity: float = 0.0
    worst: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (self.displacement >= -self.tol and self.quasi >= -self.tol and self.fixed_exact
                and self.fix_equiv >= 0.0)

    def to_json(self):
        f = lambda v: None if not np.isfinite(v) else float(v)
        return {"trials": self.trials, "seed": self.seed, "tol": self.tol, "passed": self.passed,
                "displacementMargin": f(self.displacement), "quasiMargin": f(self.quasi),
                "fixedPointsExact": self.fixed_exact, "fixEquivBand": self.band,
                "fixEquivMargin": f(self.fix_equiv), "midpointIdentity": self.midpoint_identity,
                "worst": self.worst}


def check_s_properties(op: SOperator, trials: int = 1000, seed: int = 0, tol: float = 1e-10) -> SReport:
    """Sample points and check the displacement bound, quasi-nonexpansiveness
    toward the map's known fixed points and the fixed-point equivalence band.

    The equivalence is tested as ``d(x,Tx) <= fixTol => Sx = x`` and
    ``d(x,Sx) <= fixTol => d(x,Tx) <= 2(2+k1) fixTol``; the second factor comes
    from the displacement bound. Samples include points near each known
    fixed point so both sides of the band are exercised.
    """
    space, T, d = op.space, op.map.apply, op.space.metric
    k1 = op.map.k(1)
    rep = SReport(trials, seed, tol, band=2.0 * (2.0 + k1))
    fps = list(op.map.fixed_points)
    for p in fps:
        if d(op(p), p) != 0.0:
            rep.fixed_exact = False

    def note(key, value, t):
        if value < getattr(rep, key):
            setattr(rep, key, value)
            rep.worst[key] = {"trial": t, "margin": value}

    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        x = space.sample(rng)
        if fps and t % 10 == 9:
            # approach a fixed point geometrically to probe the band
            x = space.combine(fps[t % len(fps)], x, 10.0 ** -rng.integers(1, 16))
        sx, dec = op.apply_with_decision(x)
        dxTx = d(x, T(x))
        dxSx = d(x, sx)
        note("displacement", dxSx - dxTx / rep.band, t)
        for p in fps:
            note("quasi", d(x, p) - d(sx, p), t)
        if dxTx <= op.fix_tol:
            note("fix_equiv", 0.0 if sx is x else -dxSx, t)
        if dxSx <= op.fix_tol:
            note("fix_equiv", rep.band * op.fix_tol - dxTx, t)
        if dec is not None and op.mode == GENERAL:
            tm = op.map.power(dec.m, x)
            rep.midpoint_identity = max(rep.midpoint_identity, abs(dxSx - 0.5 * d(x, tm)))
    return rep
