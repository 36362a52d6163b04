"""Hand-made trajectories that each break one monitor's premise-conclusion pair.

Each builder returns ``(trajectory, MonitorSet, op)``; the monitor set enables
only the targeted monitor so the failure is attributable.
"""
from ucwfp.diagnostics import MonitorSet
from ucwfp.iteration import StopRule, Trajectory, run
from ucwfp.mappings import make_map
from ucwfp.soperator import SOperator
from ucwfp.spaces import make_space

PLANE = {"model": "euclidean", "n": 2, "R": 1}
ORIGIN = (0.0, 0.0)


def _plane():
    return make_space(PLANE)


def fejer():
    # a genuine contraction run with one recorded point pushed 0.1 away from q
    space = _plane()
    T = make_map(space, {"map": "contraction", "q": [0.3, -0.2], "c": 0.5})
    op = SOperator(T)
    start = (-0.9, 0.3)
    traj = run(op, start, StopRule(max_rows=120, residual_tol=0.0))
    y = traj.rows[39].y
    traj.replace_y(40, space.combine(y, start, 0.1 / space.metric(y, start)))
    return traj, MonitorSet(fixed_points=(T.q,), enabled=("fejer",)), op


def drop():
    # a unit-scale step that gets no closer to the origin
    traj = Trajectory.from_sequence(_plane(), [1, 2], [(1.0, 0.0), (0.0, 1.0)])
    return traj, MonitorSet(fixed_points=(ORIGIN,), enabled=("drop",)), None


def envelope():
    # x_1 is near the origin, a later row end is far from it
    traj = Trajectory.from_sequence(_plane(), [1, 2, 3], [(0.1, 0.0), (0.1, 0.05), (0.6, 0.0)])
    return traj, MonitorSet(fixed_points=(ORIGIN,), enabled=("envelope",)), None


def gap_count():
    # 60 unit jumps between two points; the counting bound allows 48 at eps = 1
    ys = [(0.5, 0.0) if j % 2 else (-0.5, 0.0) for j in range(60)]
    traj = Trajectory.from_sequence(_plane(), range(1, 61), ys)
    return traj, MonitorSet(enabled=("gap_count",)), None


def stabilization():
    a, b = (0.2, 0.2), (0.3, 0.2)
    traj = Trajectory.from_sequence(_plane(), [1, 2, 3, 4], [a, a, a, b])
    return traj, MonitorSet(enabled=("stabilization",)), None


def spread():
    # pivot at x_2 (gap 0.1 < back 0.4) bounds later points to radius 0.8; x_4 is 1.3 away
    ys = [(0.0, 0.0), (0.4, 0.0), (0.5, 0.0), (-0.9, 0.0)]
    traj = Trajectory.from_sequence(_plane(), [1, 2, 3, 4], ys, s_points=ys)
    return traj, MonitorSet(enabled=("spread",)), None


def residual_link():
    ys = [(0.0, 0.0), (0.1, 0.0)]
    traj = Trajectory.from_sequence(_plane(), [1, 2], ys, s_points=[(0.9, 0.0), (0.1, 0.0)])
    return traj, MonitorSet(enabled=("residual_link",)), None


def residual_decay():
    # claims a residual stop while the last residual is 0.5
    ys = [(0.0, 0.5), (0.0, 0.25)]
    traj = Trajectory.from_sequence(_plane(), [1, 2], ys, s_points=[(0.0, 0.0), (0.0, -0.25)],
                                    residuals=[0.5, 0.5], stop_reason="residual")
    return traj, MonitorSet(enabled=("residual_decay",)), None


def cauchy():
    ys = [(0.0, 0.0), (0.4, 0.0), (0.5, 0.0), (0.45, 0.0), (-0.9, 0.0)]
    traj = Trajectory.from_sequence(_plane(), [1, 2, 3, 4, 5], ys)
    return traj, MonitorSet(enabled=("cauchy",)), None


def limit_envelope():
    ys = [(0.5, 0.0), (0.1, 0.0), (0.9, 0.0), (0.5, 0.0)]
    traj = Trajectory.from_sequence(_plane(), [1, 2, 3, 4], ys)
    return traj, MonitorSet(enabled=("limit_envelope",)), None


HARD_FIXTURES = {f.__name__: f for f in (fejer, drop, envelope, gap_count, stabilization, spread,
                                         residual_link, residual_decay)}
SOFT_FIXTURES = {f.__name__: f for f in (cauchy, limit_envelope)}
