"""Row-based iteration: finite rows ``z_1 .. z_m`` grown by one midpoint per
step, either at the end of the row or after an earlier pivot that gets
overtaken.

Rows share prefixes, so a trajectory only records, per row, its length, its
last entry ``y_j`` and the entry before it. Entry ``i`` of row ``j`` is
``y_l`` for the last ``l <= j`` with ``m_l = i``; :meth:`Trajectory.row`
rebuilds full rows from that rule.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Iterable

from ucwfp.geometry import ConfigError, UCWError
from ucwfp.soperator import SOperator

log = logging.getLogger(__name__)

INIT, CASE_I, CASE_II = "init", "I", "II"


class MonitorFailure(UCWError):
    """An online monitor found a guaranteed invariant violated."""

    def __init__(self, verdict, trajectory=None):
        super().__init__(f"monitor {verdict.name} failed: {verdict.witness}")
        self.verdict = verdict
        self.trajectory = trajectory


@dataclass
class Row:
    j: int
    m: int
    y: Any
    prev: Any = None  # z_{m-1}; None for the first row
    case: str = INIT
    pivot: int | None = None
    s: Any = None  # S y_j, filled when the next step (or the stop test) computes it
    residual: float | None = None
    near_ties: int = 0

    @property
    def tag(self) -> str:
        if self.case == CASE_I:
            return f"I:{self.pivot}"
        return self.case


@dataclass(frozen=True)
class ComparePolicy:
    """Raw IEEE comparisons for the pivot scan. ``band`` only logs near-ties."""

    band: float | None = None

    def lt(self, a: float, b: float) -> bool:
        return a < b

    def geq(self, a: float, b: float) -> bool:
        return a >= b

    def near(self, a: float, b: float) -> bool:
        return self.band is not None and abs(a - b) <= self.band


@dataclass
class StopRule:
    max_rows: int | None = 100_000
    residual_tol: float | None = None  # None: 1e-8 * b
    gap_tol: float | None = None
    gap_window: int = 3
    deadline: float | None = None  # wall-clock seconds, opt-in

    def __post_init__(self):
        if self.max_rows is None and self.residual_tol is None and self.gap_tol is None:
            raise ConfigError("stop rule needs maxRows, residualTol or gapTol")
        if self.max_rows is not None and self.max_rows < 0:
            raise ConfigError("maxRows must be >= 0")
        if self.gap_window < 1:
            raise ConfigError("gapWindow must be >= 1")

    def resolved_residual_tol(self, b: float) -> float:
        return 1e-8 * b if self.residual_tol is None else self.residual_tol

    @classmethod
    def from_json(cls, obj: dict | None) -> "StopRule":
        obj = dict(obj or {})
        keys = {"maxRows": "max_rows", "residualTol": "residual_tol", "gapTol": "gap_tol",
                "gapWindow": "gap_window", "deadline": "deadline"}
        extra = set(obj) - set(keys)
        if extra:
            raise ConfigError(f"unknown stop keys {sorted(extra)}")
        return cls(**{keys[k]: v for k, v in obj.items()})

    def to_json(self, b: float | None = None):
        return {"maxRows": self.max_rows,
                "residualTol": self.resolved_residual_tol(b) if b is not None else self.residual_tol,
                "gapTol": self.gap_tol, "gapWindow": self.gap_window, "deadline": self.deadline}


@dataclass
class Trajectory:
    space: Any
    rows: list[Row] = field(default_factory=list)
    stop_reason: str | None = None
    keep_s: bool = True
    # working state of the current row; distances use d(z_i, .) with z_i first
    _z: list = field(default_factory=list, repr=False)
    _fwd: list = field(default_factory=list, repr=False)  # d(z_i, z_{i+1})
    _back: list = field(default_factory=list, repr=False)  # d(z_i, z_{i-1}); _back[0] unused

    def __len__(self):
        return len(self.rows)

    @property
    def ys(self) -> list:
        return [r.y for r in self.rows]

    @property
    def ms(self) -> list[int]:
        return [r.m for r in self.rows]

    @property
    def cases(self) -> list[str]:
        return [r.tag for r in self.rows]

    @property
    def last(self) -> Row:
        return self.rows[-1]

    def row(self, j: int) -> tuple:
        """Entries ``z_{1j} .. z_{m_j j}`` of row ``j`` (1-based)."""
        if not 1 <= j <= len(self.rows):
            raise IndexError(j)
        m = self.rows[j - 1].m
        out: list = [None] * m
        need = m
        for r in reversed(self.rows[:j]):
            if r.m <= m and out[r.m - 1] is None:
                out[r.m - 1] = r.y
                need -= 1
                if need == 0:
                    break
        return tuple(out)

    def s_at(self, j: int, op: SOperator | None = None):
        """``S y_j``, recomputed through ``op`` when it was not kept."""
        r = self.rows[j - 1]
        if r.s is None:
            if op is None:
                raise ValueError(f"S y_{j} not recorded; pass the operator")
            return op(r.y)
        return r.s

    @property
    def current(self) -> list:
        return list(self._z)

    @classmethod
    def from_sequence(cls, space, ms: Iterable[int], ys: Iterable, s_points=None, residuals=None,
                      stop_reason=None) -> "Trajectory":
        """Assemble a trajectory from raw row data, for fixtures and replays.

        Case tags are inferred from the lengths; nothing is checked.
        """
        traj = cls(space, stop_reason=stop_reason)
        ms, ys = list(ms), list(ys)
        s_points = list(s_points) if s_points is not None else [None] * len(ys)
        residuals = list(residuals) if residuals is not None else [None] * len(ys)
        latest: dict[int, Any] = {}
        for j, (m, y) in enumerate(zip(ms, ys), start=1):
            if j == 1:
                case, pivot = INIT, None
            elif m == traj.rows[-1].m + 1:
                case, pivot = CASE_II, None
            else:
                case, pivot = CASE_I, m - 1
            latest = {i: v for i, v in latest.items() if i < m}
            latest[m] = y
            traj.rows.append(Row(j, m, y, latest.get(m - 1), case, pivot, s_points[j - 1], residuals[j - 1]))
        if traj.rows:
            traj._z = list(traj.row(len(traj.rows)))
            d = space.metric
            z = traj._z
            traj._fwd = [d(z[i], z[i + 1]) for i in range(len(z) - 1)]
            traj._back = [0.0] + [d(z[i], z[i - 1]) for i in range(1, len(z))]
        return traj

    def replace_y(self, j: int, y) -> None:
        """Overwrite ``y_j`` everywhere it appears (used to inject faults)."""
        old = self.rows[j - 1].y
        for r in self.rows:
            if r.y is old:
                r.y = y
            if r.prev is old:
                r.prev = y
        self._z = [y if z is old else z for z in self._z]
        if self.rows[j - 1].s is not None:
            self.rows[j - 1].residual = self.space.metric(y, self.rows[j - 1].s)


def init_trajectory(space, x, keep_s: bool = True) -> Trajectory:
    traj = Trajectory(space, keep_s=keep_s)
    traj.rows.append(Row(1, 1, x))
    traj._z = [x]
    traj._fwd = []
    traj._back = [0.0]
    return traj


def step(traj: Trajectory, op: SOperator, cmp: ComparePolicy | None = None, w=None) -> Row:
    """Append the next row. ``w`` may carry a precomputed ``S y_j``."""
    cmp = cmp or ComparePolicy()
    space = traj.space
    d, mid = space.metric, space.midpoint
    z, fwd, back = traj._z, traj._fwd, traj._back
    cur = traj.rows[-1]
    if w is None:
        w = op(cur.y)
    if traj.keep_s:
        cur.s = w
    m = len(z)
    ties = 0
    pivot, new = None, None
    for i in range(1, m - 1):  # 0-based; the 1-based index is i + 1
        a, b = fwd[i], back[i]
        if cmp.near(a, b):
            ties += 1
        if not cmp.lt(a, b):
            continue
        cand = mid(z[i], w)
        h = d(z[i], cand)
        if cmp.near(h, b):
            ties += 1
        if cmp.geq(h, b):
            pivot, new = i, cand
            break
    if pivot is None:
        base = m - 1
        new = mid(z[base], w)
    else:
        base = pivot
        del z[base + 1:]
        del fwd[base:]
        del back[base + 1:]
    z.append(new)
    fwd.append(d(z[base], new))
    back.append(d(new, z[base]))
    if ties:
        log.debug("row %d: %d near-tie comparison(s)", cur.j + 1, ties)
    row = Row(cur.j + 1, len(z), new, z[base], CASE_II if pivot is None else CASE_I,
              None if pivot is None else pivot + 1, near_ties=ties)
    traj.rows.append(row)
    return row


def run(op: SOperator, x, stop: StopRule | None = None, hooks: Iterable = (),
        cmp: ComparePolicy | None = None, keep_s: bool = True) -> Trajectory:
    """Iterate until a stop rule fires; returns the trajectory.

    Order per iteration: residual test, gap test, row budget, deadline, then
    the step (reusing the ``S y_j`` computed for the residual). ``hooks`` get
    ``on_row(traj, row)`` after every appended row and may raise
    :class:`MonitorFailure`, which carries the partial trajectory.
    """
    stop = stop or StopRule()
    space = op.space
    rtol = stop.resolved_residual_tol(space.b)
    traj = init_trajectory(space, x, keep_s)
    hooks = list(hooks)
    t0 = time.monotonic()
    try:
        for h in hooks:
            h.on_row(traj, traj.rows[0])
        while True:
            cur = traj.rows[-1]
            w = op(cur.y)
            cur.residual = space.metric(cur.y, w)
            cur.s = w
            if cur.residual <= rtol:
                traj.stop_reason = "residual"
                break
            if stop.gap_tol is not None and traj._fwd:
                if max(traj._fwd[-stop.gap_window:]) <= stop.gap_tol:
                    traj.stop_reason = "gap"
                    break
            if stop.max_rows is not None and len(traj.rows) - 1 >= stop.max_rows:
                traj.stop_reason = "maxRows"
                break
            if stop.deadline is not None and time.monotonic() - t0 >= stop.deadline:
                traj.stop_reason = "deadline"
                break
            row = step(traj, op, cmp, w)
            if not traj.keep_s:
                cur.s = None
            for h in hooks:
                h.on_row(traj, row)
    except MonitorFailure as e:
        traj.stop_reason = "monitor"
        e.trajectory = traj
        raise
    return traj


@dataclass
class Extraction:
    pk: list[int]
    xk: list
    certified: int  # x_1 .. x_certified can no longer change
    provisional: int

    def is_provisional(self, k: int) -> bool:
        return k > self.certified


def extract_pk(traj: Trajectory) -> Extraction:
    """``p_k`` is the last row of length ``k``; ``x_k = y_{p_k}`` for ``k <= m_J``.

    Entry ``k+1`` of the final row is frozen for good once no pivot ``i <= k``
    of that row satisfies ``d(z_i, z_{i+1}) < d(z_i, z_{i-1})``, since only
    such a pivot can rewrite it.
    """
    last: dict[int, int] = {}
    for r in traj.rows:
        last[r.m] = r.j
    mJ = traj.rows[-1].m
    pk = [last[k] for k in range(1, mJ + 1)]
    xk = [traj.rows[p - 1].y for p in pk]
    cert = mJ
    d = traj.space.metric
    for i in range(1, mJ - 1):  # 0-based pivot positions 2..m_J-1
        if d(xk[i], xk[i + 1]) < d(xk[i], xk[i - 1]):
            cert = i + 1
            break
    return Extraction(pk, xk, cert, mJ - cert)
