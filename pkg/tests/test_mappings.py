import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ucwfp.geometry import ConfigError
from ucwfp.mappings import GoebelKirk, make_map, verify_asymptotic_bound
from ucwfp.spaces import HUB, SparseVector, TreePoint, make_space


def test_quarter_turn_is_exact(euclid):
    rot = make_map(euclid, {"map": "rotation", "theta": math.pi / 2})
    assert rot((1.0, 0.0)) == (0.0, 1.0)
    x = (0.3, -0.7)
    assert rot.power(4, x) == x


def test_power_zero_is_identity(euclid, sparse):
    x = (0.1, 0.2)
    assert make_map(euclid, {"map": "contraction", "c": 0.3}).power(0, x) is x
    e = SparseVector.unit(2)
    assert make_map(sparse, {"map": "goebelkirk"}).power(0, e) is e


def test_power_rejects_negative(euclid):
    with pytest.raises(ValueError):
        make_map(euclid, {"map": "rotation"}).power(-1, (0.0, 0.0))


def test_contraction_fixes_its_center(any_space):
    q = any_space.sample_point(3)
    T = make_map(any_space, {"map": "contraction", "q": any_space.to_json(q), "c": 0.5})
    assert any_space.metric(T(q), q) == 0.0


def test_goebelkirk_weights_multiply_to_half(sparse):
    gk = GoebelKirk(sparse)
    assert gk.weight(2) == pytest.approx(2 ** -0.5, rel=1e-15)
    prod = math.prod(gk.weight(i) for i in range(2, 60))
    assert prod == pytest.approx(0.5, rel=1e-14)


def test_goebelkirk_first_step_from_e1(sparse):
    gk = GoebelKirk(sparse)
    y = gk(SparseVector.unit(1))
    assert y.to_dict() == {2: 1.0}
    assert sparse.norm(y) == 1.0


def test_goebelkirk_three_steps_from_e1(sparse):
    # e1 -> e2 -> a2 e3 -> a3 a2 e4
    gk = GoebelKirk(sparse)
    y = gk.power(3, SparseVector.unit(1))
    assert y.to_dict() == {4: gk.weight(3) * gk.weight(2)}


def test_goebelkirk_direct_sequential_oracle(sparse):
    gk = GoebelKirk(sparse)
    rng = np.random.default_rng(5)
    for _ in range(30):
        x = sparse.sample(rng)
        vec = np.zeros(80)
        for i, v in x.to_dict().items():
            vec[i] = v
        got = x
        for _ in range(6):
            nxt = np.zeros_like(vec)
            nxt[2] = vec[1] ** 2
            for i in range(2, 79):
                nxt[i + 1] = gk.weight(i) * vec[i]
            vec = nxt
            got = gk(got)
            dense = np.zeros_like(vec)
            for i, v in got.to_dict().items():
                dense[i] = v
            np.testing.assert_array_equal(dense, vec)


def test_goebelkirk_k_sequence(sparse):
    gk = GoebelKirk(sparse)
    ks = [gk.k(n) for n in range(1, 80)]
    assert ks[0] == 1.0
    assert all(a >= b for a, b in zip(ks, ks[1:]))
    assert ks[-1] < 1e-20
    # closed form against the weight product: k_n = 2 prod_{i=2}^{n} a_i - 1
    for n in range(1, 12):
        assert gk.k(n) == pytest.approx(2 * math.prod(gk.weight(i) for i in range(2, n + 1)) - 1, rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-15, 2.0))
def test_goebelkirk_witness_is_tight(eps):
    gk = GoebelKirk(make_space({"model": "sparse_l2"}))
    N = gk.k_witness(eps)
    assert gk.k(N) <= eps
    assert N == 1 or gk.k(N - 1) > eps


def test_verify_rotation(euclid):
    rep = verify_asymptotic_bound(make_map(euclid, {"map": "rotation", "theta": 0.7}), horizon=20, trials=300)
    assert rep.passed and rep.max_violation <= 1e-12


def test_verify_goebelkirk(sparse):
    rep = verify_asymptotic_bound(make_map(sparse, {"map": "goebelkirk"}), horizon=20, trials=1000)
    assert rep.passed and rep.max_violation <= 1e-9
    assert set(rep.to_json()) >= {"maxViolation", "worstSeedInputs", "passed"}


def test_contraction_rate(any_space):
    c = 0.3
    T = make_map(any_space, {"map": "contraction", "c": c})
    assert verify_asymptotic_bound(T, horizon=10, trials=100).passed
    rng = np.random.default_rng(8)
    for _ in range(100):
        x, y = any_space.sample(rng), any_space.sample(rng)
        d0 = any_space.metric(x, y)
        for n in range(1, 21):
            x, y = T(x), T(y)
            assert any_space.metric(x, y) <= (1 - c) ** n * d0 + 1e-12


def test_treefold_rotates_legs(tree):
    T = make_map(tree, {"map": "treefold", "c": 0.5})
    assert T(TreePoint(3, 0.8)) == TreePoint(1, 0.4)
    assert T(HUB) == HUB
    assert verify_asymptotic_bound(T, horizon=10, trials=200).passed


def test_nonexpansive_flag(euclid, sparse):
    assert make_map(euclid, {"map": "rotation"}).is_nonexpansive()
    assert not make_map(sparse, {"map": "goebelkirk"}).is_nonexpansive()


@pytest.mark.parametrize("space_cfg,map_cfg", [
    ({"model": "euclidean", "n": 3}, {"map": "rotation"}),
    ({"model": "euclidean"}, {"map": "goebelkirk"}),
    ({"model": "sparse_l2", "R": 2}, {"map": "goebelkirk"}),
    ({"model": "euclidean"}, {"map": "treefold"}),
    ({"model": "euclidean"}, {"map": "contraction", "c": 1.0}),
    ({"model": "euclidean"}, {"map": "rotation", "speed": 2}),
    ({"model": "euclidean"}, {"map": "shear"}),
    ({"model": "euclidean"}, {"kind": "rotation"}),
])
def test_bad_map_configs(space_cfg, map_cfg):
    with pytest.raises(ConfigError):
        make_map(make_space(space_cfg), map_cfg)


class _Liar(GoebelKirk):
    """Claims nonexpansiveness while squaring the head."""

    def k(self, n):
        return 0.0


def test_verify_catches_understated_constants(sparse):
    rep = verify_asymptotic_bound(_Liar(sparse), horizon=5, trials=300)
    assert not rep.passed
    assert rep.worst["excess"] > 1e-3
