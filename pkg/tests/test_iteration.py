import pytest
from hypothesis import given, settings, strategies as st

from conftest import SPACE_CONFIGS, build
from ucwfp.geometry import ConfigError
from ucwfp.iteration import (CASE_I, CASE_II, INIT, ComparePolicy, StopRule, Trajectory, extract_pk,
                             init_trajectory, run, step)
from ucwfp.spaces import SparseVector


def _contraction():
    return build(SPACE_CONFIGS["euclidean"], {"map": "contraction", "q": [0.3, -0.2], "c": 0.5})


def test_init_row(rotation_op):
    space, _, _ = rotation_op
    x = (1.0, 0.0)
    traj = init_trajectory(space, x)
    assert traj.row(1) == (x,)
    assert traj.ys == [x] and traj.ms == [1] and traj.cases == [INIT]


def test_first_two_steps_grow_the_row(rotation_op):
    space, _, op = rotation_op
    traj = init_trajectory(space, (1.0, 0.0))
    step(traj, op)
    step(traj, op)
    assert traj.ms == [1, 2, 3]
    assert traj.cases == [INIT, CASE_II, CASE_II]


def test_rotation_second_point(rotation_op):
    space, _, op = rotation_op
    traj = init_trajectory(space, (1.0, 0.0))
    step(traj, op)
    # S(1,0) = (1/2, 1/2); y_2 = midpoint((1,0), (1/2,1/2))
    assert traj.last.y == (0.75, 0.25)
    assert traj.rows[0].s == (0.5, 0.5)


def test_max_rows_one_gives_two_rows():
    space, _, op = _contraction()
    traj = run(op, (-0.9, 0.3), StopRule(max_rows=1))
    assert len(traj) == 2 and traj.stop_reason == "maxRows"


def test_contraction_converges():
    space, T, op = _contraction()
    traj = run(op, (-0.9, 0.3))
    assert traj.stop_reason == "residual"
    assert traj.last.residual <= 1e-8 * space.b
    assert space.metric(traj.last.y, T.q) <= 1e-6


def test_fixed_start_stops_at_once(any_space):
    from ucwfp.mappings import make_map
    from ucwfp.soperator import SOperator

    T = make_map(any_space, {"map": "contraction", "c": 0.5})
    p = T.fixed_points[0]
    traj = run(SOperator(T), p)
    assert len(traj) == 1 and traj.stop_reason == "residual"
    assert traj.last.y == p and traj.last.residual == 0.0


def test_fixed_start_with_forced_rows(rotation_op):
    space, _, op = rotation_op
    p = (0.0, 0.0)
    traj = run(op, p, StopRule(max_rows=5, residual_tol=-1.0))
    assert all(y == p for y in traj.ys)
    assert traj.row(len(traj)) == (p,) * traj.last.m


def test_rows_of_length_two_or_less_take_case_two(rotation_op):
    space, _, op = rotation_op
    traj = run(op, (0.0, 0.9), StopRule(max_rows=30))
    for prev, r in zip(traj.rows, traj.rows[1:]):
        if prev.m <= 2:
            assert r.case == CASE_II


def test_stream_history_drops_s(gk_op):
    _, _, op = gk_op
    traj = run(op, SparseVector.unit(1), StopRule(max_rows=40, residual_tol=0.0), keep_s=False)
    assert all(r.s is None for r in traj.rows[:-1])
    assert traj.last.s is not None
    full = run(op, SparseVector.unit(1), StopRule(max_rows=40, residual_tol=0.0))
    assert full.ms == traj.ms and full.ys == traj.ys
    assert traj.s_at(10, op) == full.rows[9].s
    with pytest.raises(ValueError):
        traj.s_at(10)


def test_gap_and_deadline_stops():
    _, _, op = _contraction()
    traj = run(op, (-0.9, 0.3), StopRule(max_rows=None, residual_tol=0.0, gap_tol=1e-3))
    assert traj.stop_reason == "gap"
    assert max(traj._fwd[-3:]) <= 1e-3
    traj = run(op, (-0.9, 0.3), StopRule(max_rows=None, residual_tol=0.0, deadline=0.0))
    assert traj.stop_reason == "deadline" and len(traj) == 1


def test_stop_rule_validation():
    with pytest.raises(ConfigError):
        StopRule(max_rows=None, residual_tol=None, gap_tol=None)
    with pytest.raises(ConfigError):
        StopRule.from_json({"maxRow": 3})
    with pytest.raises(ConfigError):
        StopRule(max_rows=-1)
    rule = StopRule.from_json({"maxRows": 7, "gapTol": 0.1, "gapWindow": 2})
    assert rule.to_json(2.0) == {"maxRows": 7, "residualTol": 2e-8, "gapTol": 0.1, "gapWindow": 2,
                                 "deadline": None}


def test_extraction_basics(rotation_op):
    space, _, op = rotation_op
    x = (1.0, 0.0)
    traj = run(op, x, StopRule(max_rows=49, residual_tol=0.0))
    ext = extract_pk(traj)
    assert ext.pk[0] == 1 and ext.xk[0] == x
    assert all(a < b for a, b in zip(ext.pk, ext.pk[1:]))
    for k, p in enumerate(ext.pk, start=1):
        if not ext.is_provisional(k):
            assert traj.rows[p - 1].m == k
    assert ext.certified + ext.provisional == traj.last.m


def test_extraction_without_case_one(euclid):
    traj = Trajectory.from_sequence(euclid, [1, 2, 3, 4], [(0.0, 0.0), (0.1, 0.0), (0.2, 0.0), (0.3, 0.0)])
    assert extract_pk(traj).pk == [1, 2, 3, 4]
    assert traj.cases == [INIT, CASE_II, CASE_II, CASE_II]


def test_from_sequence_matches_engine():
    space, _, op = _contraction()
    eng = run(op, (-0.9, 0.3), StopRule(max_rows=80, residual_tol=0.0))
    rebuilt = Trajectory.from_sequence(space, eng.ms, eng.ys)
    assert rebuilt.cases == eng.cases
    assert rebuilt.current == eng.current
    assert [r.prev for r in rebuilt.rows] == [r.prev for r in eng.rows]


def test_compare_band_counts_near_ties(rotation_op):
    space, _, op = rotation_op
    plain = run(op, (1.0, 0.0), StopRule(max_rows=60))
    banded = run(op, (1.0, 0.0), StopRule(max_rows=60), cmp=ComparePolicy(band=1.0))
    assert banded.ms == plain.ms
    assert sum(r.near_ties for r in banded.rows) > 0 == sum(r.near_ties for r in plain.rows)


def _check_structure(traj, op):
    d = traj.space.metric
    for j in range(1, len(traj)):
        a, b = traj.row(j), traj.row(j + 1)
        r = traj.rows[j]
        assert r.m <= len(a) + 1
        assert b[:-1] == a[:r.m - 1]
        if j >= 3:
            assert r.m >= 3
        if r.case == CASE_I:
            i = r.pivot
            assert 2 <= i <= len(a) - 1
            assert d(a[i - 1], a[i]) < d(a[i - 1], a[i - 2])
            assert d(a[i - 1], b[-1]) >= d(a[i - 1], a[i - 2])
        assert b[-1] == traj.space.midpoint(b[-2], traj.rows[j - 1].s)
    assert traj.current == list(traj.row(len(traj)))


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.7, 0.7), st.floats(-0.7, 0.7), st.floats(0.05, 6.2))
def test_row_structure_rotation(x0, x1, theta):
    space, _, op = build(SPACE_CONFIGS["euclidean"], {"map": "rotation", "theta": theta})
    traj = run(op, (x0, x1), StopRule(max_rows=60))
    _check_structure(traj, op)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 0.95))
def test_row_structure_tree(seed, c):
    space, _, op = build(SPACE_CONFIGS["startree"], {"map": "treefold", "c": c})
    traj = run(op, space.sample_point(seed), StopRule(max_rows=60))
    _check_structure(traj, op)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_row_fejer_toward_fixed_point(seed):
    space, T, op = build(SPACE_CONFIGS["hyperboloid"], {"map": "contraction", "c": 0.3})
    traj = run(op, space.sample_point(seed), StopRule(max_rows=60))
    q = T.q
    for r in traj.rows[1:]:
        assert space.metric(r.y, q) <= space.metric(r.prev, q) + 1e-12
