"""Trajectory monitors, verdicts and an independent replay of the row
construction.

Every monitor turns one guaranteed property of the construction into a
finite check over the recorded rows. A verdict's ``margin`` is the smallest
slack found (negative means violated); it passes when ``margin >= -tol``.
Hard monitors encode statements that hold at every finite horizon; soft ones
are finite stand-ins for limit statements and are reported only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

from ucwfp.geometry import u_transform
from ucwfp.iteration import CASE_I, CASE_II, INIT, Extraction, MonitorFailure, Trajectory, extract_pk
from ucwfp.soperator import SOperator
from ucwfp.spaces import HyperboloidDisk

HARD = ("fejer", "drop", "envelope", "gap_count", "stabilization", "spread", "residual_link",
        "residual_decay")
SOFT = ("cauchy", "limit_envelope")
MONITORS = HARD + SOFT

ANCHORS = {
    "fejer": "d(z[i+1], p) <= d(z[i], p) along every row, p in Fix",
    "drop": "d(z[i], z[i+1]) >= eps  =>  d(z[i], p) - d(z[i+1], p) >= u(b, eps/b) b, rows and x_k",
    "envelope": "d(y_n, p) <= d(x_k, p) for all n >= p_k",
    "gap_count": "#{k : d(x_k, x_k+1) >= eps} <= ceil((b + 1) / (u(b, eps/b) b))",
    "stabilization": "x_n = x_n+1 = x_n+2  =>  y_j = x_q = x_n for j >= p_n+2, q >= n",
    "spread": "d(x_n, x_n+1) < d(x_n, x_n-1)  =>  x_q, y_u, S y_u, S x_q within 2 d(x_n, x_n-1) of x_n",
    "residual_link": "2 d(x_k, x_k+1) >= d(x_k, S x_k)",
    "residual_decay": "d(y_J, S y_J) <= residualTol when stopping on the residual",
    "cauchy": "x_q and y_u past the last spread pivot M stay within 4 d(x_M, x_M-1) of each other",
    "limit_envelope": "d(y_n, y_J) <= d(x_k, y_J) for n >= p_k",
}

SURROGATES = {
    "gap_count": "counting bound on every grid level in place of d(x_n, x_n+1) -> 0",
    "residual_decay": "residual at the stopping row in place of d(y_n, S y_n) -> 0",
    "cauchy": "tail diameters over the recorded horizon",
    "limit_envelope": "final iterate used as a stand-in for the limit",
}


@dataclass
class Verdict:
    name: str
    passed: bool
    margin: float | None
    witness: dict | None
    anchor: str
    hard: bool = True
    checks: int = 0
    surrogate: str | None = None
    note: str | None = None

    def to_json(self):
        return {"monitor": self.name, "passed": self.passed, "hard": self.hard,
                "margin": self.margin, "checks": self.checks, "witness": self.witness,
                "anchor": self.anchor, "surrogate": self.surrogate, "note": self.note}


class _Worst:
    """Running minimum of slacks with the witness that produced it."""

    def __init__(self, name, tol):
        self.name, self.tol = name, tol
        self.margin: float | None = None
        self.witness: dict | None = None
        self.checks = 0

    def add(self, slack: float, **where):
        self.checks += 1
        if self.margin is None or slack < self.margin:
            self.margin = float(slack)
            self.witness = where

    def verdict(self, hard=True, note=None) -> Verdict:
        ok = self.margin is None or self.margin >= -self.tol
        if note is None and self.checks == 0:
            note = "vacuous: no instance of the premise in the recorded horizon"
        return Verdict(self.name, ok, self.margin, dict(self.witness or {}, slack=self.margin) if self.witness else None,
                       ANCHORS[self.name], hard, self.checks, SURROGATES.get(self.name), note)


@dataclass
class MonitorSet:
    fixed_points: tuple = ()
    enabled: tuple = MONITORS
    tol: dict = field(default_factory=dict)
    default_tol: float = 1e-10
    residual_tol: float | None = None
    grid: tuple | None = None  # absolute eps levels; default b * 2**-t, t = 1..12

    def __post_init__(self):
        unknown = set(self.enabled) - set(MONITORS)
        if unknown:
            raise ValueError(f"unknown monitors {sorted(unknown)}")
        if self.default_tol <= 0 or any(v <= 0 for v in self.tol.values()):
            raise ValueError("monitor tolerances must be positive")

    def tol_for(self, name):
        return self.tol.get(name, self.default_tol)

    def levels(self, b):
        return tuple(self.grid) if self.grid is not None else tuple(b * 2.0 ** -t for t in range(1, 13))


class _Ctx:
    def __init__(self, traj: Trajectory, ms: MonitorSet, op: SOperator | None):
        self.traj, self.ms, self.op = traj, ms, op
        self.space = traj.space
        self.d = traj.space.metric
        self.b = traj.space.b
        self.u = u_transform(traj.space.modulus)
        self.ext: Extraction = extract_pk(traj)
        self.K = len(self.ext.xk)
        self.J = len(traj.rows)
        x, d = self.ext.xk, self.d
        # 1-based helpers: gap[k] = d(x_k, x_k+1), back[k] = d(x_k, x_k-1)
        self.gap = [None] + [d(x[k - 1], x[k]) for k in range(1, self.K)] + [None]
        self.back = [None, None] + [d(x[k - 1], x[k - 2]) for k in range(2, self.K + 1)]
        self.grid = sorted(ms.levels(self.b))
        self._dy = {}

    def x(self, k):
        return self.ext.xk[k - 1]

    def p(self, k):
        return self.ext.pk[k - 1]

    def y(self, j):
        return self.traj.rows[j - 1].y

    def s(self, j):
        return self.traj.s_at(j, self.op)

    def dist_to(self, pi, p):
        """``[d(y_j, p) for j = 1..J]`` cached per fixed point."""
        if pi not in self._dy:
            self._dy[pi] = [self.d(r.y, p) for r in self.traj.rows]
        return self._dy[pi]

    def level(self, g):
        """Largest grid level not above ``g``."""
        best = None
        for e in self.grid:
            if e <= g:
                best = e
        return best

    def required(self, eps):
        return self.u(self.b, eps / self.b) * self.b


def _fejer(c: _Ctx):
    w = _Worst("fejer", c.ms.tol_for("fejer"))
    for pi, p in enumerate(c.ms.fixed_points):
        dy = c.dist_to(pi, p)
        for r in c.traj.rows[1:]:
            w.add(c.d(r.prev, p) - dy[r.j - 1], row=r.j, entry=r.m, fixed_point=pi)
    return w.verdict(note=None if c.ms.fixed_points else "vacuous: no known fixed point")


def _drop(c: _Ctx):
    w = _Worst("drop", c.ms.tol_for("drop"))
    levels = {}
    for pi, p in enumerate(c.ms.fixed_points):
        dy = c.dist_to(pi, p)
        for r in c.traj.rows[1:]:
            e = c.level(c.d(r.prev, r.y))
            if e is not None:
                levels[e] = levels.get(e, 0) + 1
                w.add(c.d(r.prev, p) - dy[r.j - 1] - c.required(e), row=r.j, entry=r.m, eps=e, fixed_point=pi)
        for k in range(1, c.K):
            e = c.level(c.gap[k])
            if e is not None:
                levels[e] = levels.get(e, 0) + 1
                w.add(dy[c.p(k) - 1] - dy[c.p(k + 1) - 1] - c.required(e), k=k, eps=e, fixed_point=pi)
    v = w.verdict(note=None if c.ms.fixed_points else "vacuous: no known fixed point")
    v.note = v.note or f"checks per level: {dict(sorted((float(k), n) for k, n in levels.items()))}"
    return v


def _envelope_against(c: _Ctx, w: _Worst, dy, tag):
    suf = [0.0] * (c.J + 1)
    suf[c.J] = -math.inf
    best = -math.inf
    for j in range(c.J, 0, -1):
        best = max(best, dy[j - 1])
        suf[j - 1] = best
    for k in range(1, c.K + 1):
        pk = c.p(k)
        w.add(dy[pk - 1] - suf[pk - 1], k=k, p_k=pk, target=tag)


def _envelope(c: _Ctx):
    w = _Worst("envelope", c.ms.tol_for("envelope"))
    for pi, p in enumerate(c.ms.fixed_points):
        _envelope_against(c, w, c.dist_to(pi, p), pi)
    return w.verdict(note=None if c.ms.fixed_points else "vacuous: no known fixed point")


def _limit_envelope(c: _Ctx):
    yJ = c.traj.last.y
    w = _Worst("limit_envelope", c.ms.tol_for("limit_envelope"))
    _envelope_against(c, w, [c.d(r.y, yJ) for r in c.traj.rows], "final y")
    return w.verdict(hard=False)


def _gap_count(c: _Ctx):
    w = _Worst("gap_count", c.ms.tol_for("gap_count"))
    gaps = c.gap[1:c.K]
    for e in c.grid:
        count = sum(1 for g in gaps if g >= e)
        bound = math.ceil((c.b + 1.0) / c.required(e))
        w.add(float(bound - count), eps=e, count=count, bound=bound)
    return w.verdict()


def _stabilization(c: _Ctx):
    w = _Worst("stabilization", c.ms.tol_for("stabilization"))
    ft = c.op.fix_tol if c.op is not None else 1e-12 * c.b
    for n in range(1, c.K - 1):
        if c.gap[n] <= ft and c.gap[n + 1] <= ft:
            xn = c.x(n)
            for q in range(n, c.K + 1):
                w.add(-c.d(c.x(q), xn), n=n, q=q)
            for j in range(c.p(n + 2), c.J + 1):
                w.add(-c.d(c.y(j), xn), n=n, row=j)
            break  # later triples are covered by the first one
    return w.verdict()


def _spread(c: _Ctx):
    w = _Worst("spread", c.ms.tol_for("spread"))
    piv = [n for n in range(2, c.K) if c.gap[n] < c.back[n]]
    if not piv:
        return w.verdict()
    bound = {n: 2.0 * c.back[n] for n in piv}
    for n in piv:
        for q in range(n, c.K + 1):
            w.add(bound[n] - c.d(c.x(n), c.x(q)), form="x_q", n=n, q=q)
    start = min(c.p(n + 1) for n in piv)
    p_of = {c.p(q): q for q in range(1, c.K + 1)}
    for u in range(start, c.J + 1):
        yu = c.y(u)
        live = [n for n in piv if c.p(n + 1) <= u]
        for n in live:
            w.add(bound[n] - c.d(c.x(n), yu), form="y_u", n=n, u=u)
        if u < c.J and live:
            su = c.s(u)
            for n in live:
                w.add(bound[n] - c.d(c.x(n), su), form="S y_u", n=n, u=u)
                q = p_of.get(u)
                if q is not None and q >= n + 1:
                    w.add(bound[n] - c.d(c.x(n), su), form="S x_q", n=n, q=q)
    return w.verdict()


def _residual_link(c: _Ctx):
    w = _Worst("residual_link", c.ms.tol_for("residual_link"))
    for k in range(1, c.K):
        w.add(2.0 * c.gap[k] - c.d(c.x(k), c.s(c.p(k))), k=k, p_k=c.p(k))
    return w.verdict()


def _residual_decay(c: _Ctx):
    w = _Worst("residual_decay", c.ms.tol_for("residual_decay"))
    if c.traj.stop_reason != "residual":
        return w.verdict(note=f"not applicable: stop reason {c.traj.stop_reason!r}")
    rtol = c.ms.residual_tol if c.ms.residual_tol is not None else 1e-8 * c.b
    last = c.traj.last
    res = last.residual
    if res is None or last.s is None:
        res = c.d(last.y, c.s(last.j))
    w.add(rtol - res, row=last.j, residual=res, residualTol=rtol)
    return w.verdict()


def _cauchy(c: _Ctx):
    w = _Worst("cauchy", c.ms.tol_for("cauchy"))
    piv = [n for n in range(2, c.K) if c.gap[n] < c.back[n]]
    if not piv:
        return w.verdict(hard=False)
    M = piv[-1]
    lim = 4.0 * c.back[M]
    tail = [c.x(q) for q in range(M, c.K + 1)]
    diam = max((c.d(a, b) for i, a in enumerate(tail) for b in tail[i + 1:]), default=0.0)
    w.add(lim - diam, form="x tail", M=M, diameter=diam)
    xm = c.x(M)
    rad = max((c.d(xm, c.y(u)) for u in range(c.p(M + 1), c.J + 1)), default=0.0)
    w.add(lim - 2.0 * rad, form="y tail", M=M, radius=rad)
    windows = {}
    W = c.K
    while W >= 2:
        xs = [c.x(q) for q in range(c.K - W + 1, c.K + 1)]
        windows[W] = max(c.d(a, b) for i, a in enumerate(xs) for b in xs[i + 1:])
        W //= 2
    v = w.verdict(hard=False)
    v.note = f"x window diameters {windows}"
    return v


_IMPL = {"fejer": _fejer, "drop": _drop, "envelope": _envelope, "gap_count": _gap_count,
         "stabilization": _stabilization, "spread": _spread, "residual_link": _residual_link,
         "residual_decay": _residual_decay, "cauchy": _cauchy, "limit_envelope": _limit_envelope}


def check_trajectory(traj: Trajectory, monitors: MonitorSet | None = None, op: SOperator | None = None) -> list[Verdict]:
    """Evaluate every enabled monitor over a completed trajectory.

    ``op`` is only needed when the trajectory did not keep ``S y_j``.
    """
    monitors = monitors or MonitorSet()
    ctx = _Ctx(traj, monitors, op)
    return [_IMPL[name](ctx) for name in MONITORS if name in monitors.enabled]


def hard_failures(verdicts: Iterable[Verdict]) -> list[Verdict]:
    return [v for v in verdicts if v.hard and not v.passed]


def verdict_table(verdicts: Iterable[Verdict]) -> str:
    lines = [f"{'monitor':<16}{'kind':<6}{'result':<8}{'margin':>24}  anchor"]
    for v in verdicts:
        m = "-" if v.margin is None else f"{v.margin:.6e}"
        lines.append(f"{v.name:<16}{'hard' if v.hard else 'soft':<6}{'pass' if v.passed else 'FAIL':<8}{m:>24}  {v.anchor}")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# online hooks for run()


class OnlineFejer:
    def __init__(self, fixed_points, tol=1e-10):
        self.fps, self.tol = tuple(fixed_points), tol

    def on_row(self, traj, row):
        if row.prev is None:
            return
        d = traj.space.metric
        for pi, p in enumerate(self.fps):
            slack = d(row.prev, p) - d(row.y, p)
            if slack < -self.tol:
                raise MonitorFailure(Verdict("fejer", False, slack, {"row": row.j, "fixed_point": pi},
                                             ANCHORS["fejer"]))


class OnlineDrop:
    def __init__(self, space, fixed_points, tol=1e-10, grid=None):
        self.fps, self.tol = tuple(fixed_points), tol
        self.b = space.b
        self.u = u_transform(space.modulus)
        self.grid = sorted(grid if grid is not None else (self.b * 2.0 ** -t for t in range(1, 13)))

    def on_row(self, traj, row):
        if row.prev is None:
            return
        d = traj.space.metric
        g = d(row.prev, row.y)
        levels = [e for e in self.grid if e <= g]
        if not levels:
            return
        e = levels[-1]
        need = self.u(self.b, e / self.b) * self.b
        for pi, p in enumerate(self.fps):
            slack = d(row.prev, p) - d(row.y, p) - need
            if slack < -self.tol:
                raise MonitorFailure(Verdict("drop", False, slack, {"row": row.j, "eps": e, "fixed_point": pi},
                                             ANCHORS["drop"]))


def online_hooks(space, monitors: MonitorSet) -> list:
    hooks = []
    if "fejer" in monitors.enabled and monitors.fixed_points:
        hooks.append(OnlineFejer(monitors.fixed_points, monitors.tol_for("fejer")))
    if "drop" in monitors.enabled and monitors.fixed_points:
        hooks.append(OnlineDrop(space, monitors.fixed_points, monitors.tol_for("drop"), monitors.grid))
    return hooks


# --------------------------------------------------------------------------
# independent replay


class OracleDivergence(AssertionError):
    def __init__(self, report: dict):
        super().__init__(f"engine and oracle diverge at row {report['row']}: {report['field']}")
        self.report = report


@dataclass
class OracleTrace:
    ms: list = field(default_factory=list)
    cases: list = field(default_factory=list)
    ys: list | None = None


def _same_point(space, a, b, tol):
    if isinstance(space, HyperboloidDisk):
        return space.metric(a, b) <= tol
    return space.to_json(a) == space.to_json(b)


def replay_oracle(op: SOperator, x, rows: int, engine: Trajectory | None = None, keep_points: bool = False,
                  curved_tol: float = 1e-12) -> OracleTrace:
    """Rebuild ``rows`` rows straight from the case definitions.

    Each step copies the whole current row, recomputes every distance it
    needs and evaluates both case conditions literally. With ``engine``
    given, each new row is compared against it as soon as it exists and the
    first disagreement raises :class:`OracleDivergence`.
    """
    if rows < 1:
        raise ValueError("rows must be >= 1")
    if rows > 1000:
        raise ValueError("the oracle is meant for at most 1000 rows")
    space = op.space
    d, mid = space.metric, space.midpoint
    if engine is not None:
        rows = min(rows, len(engine.rows))
    out = OracleTrace(ys=[] if keep_points else None)
    Z = [x]

    def record(j, Z, tag):
        out.ms.append(len(Z))
        out.cases.append(tag)
        if keep_points:
            out.ys.append(Z[-1])
        if engine is None:
            return
        er = engine.rows[j - 1]
        for fld, ev, ov in (("m", er.m, len(Z)), ("case", er.tag, tag)):
            if ev != ov:
                raise OracleDivergence({"row": j, "field": fld, "engine": ev, "oracle": ov})
        if not _same_point(space, er.y, Z[-1], curved_tol):
            raise OracleDivergence({"row": j, "field": "y", "engine": space.to_json(er.y),
                                    "oracle": space.to_json(Z[-1])})

    record(1, Z, INIT)
    for j in range(2, rows + 1):
        w = op(Z[-1])
        m = len(Z)
        chosen = None
        for i in range(2, m):  # 1-based, as in the definition
            if (d(Z[i - 1], Z[i]) < d(Z[i - 1], Z[i - 2])
                    and d(Z[i - 1], mid(Z[i - 1], w)) >= d(Z[i - 1], Z[i - 2])):
                chosen = i
                break
        if chosen is None:
            Z = list(Z) + [mid(Z[m - 1], w)]
            tag = CASE_II
        else:
            Z = list(Z[:chosen]) + [mid(Z[chosen - 1], w)]
            tag = f"{CASE_I}:{chosen}"
        record(j, Z, tag)
    return out


def compare_with_engine(engine: Trajectory, oracle: OracleTrace) -> None:
    n = min(len(engine.rows), len(oracle.ms))
    for j in range(1, n + 1):
        er = engine.rows[j - 1]
        if er.m != oracle.ms[j - 1] or er.tag != oracle.cases[j - 1]:
            raise OracleDivergence({"row": j, "field": "m/case", "engine": [er.m, er.tag],
                                    "oracle": [oracle.ms[j - 1], oracle.cases[j - 1]]})
