import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invgame.game import (
    FeatureMap,
    Game2x2,
    GameClass,
    action_pair,
    build_game,
    ce_constraint_values,
    classify_game,
    game_from_spec,
    game_to_spec,
    joint_index,
    load_features,
    load_game,
    payoff,
)
from invgame.scenarios import TRAFFIC_TRUTH, traffic_features_from_tau

from conftest import GC_U1, GC_U2

finite = st.floats(-50, 50, allow_nan=False)


def test_joint_enumeration_is_bijective():
    assert [joint_index(a1, a2) for a1 in (1, 2) for a2 in (1, 2)] == [1, 2, 3, 4]
    for l in range(1, 5):
        assert joint_index(*action_pair(l)) == l
    with pytest.raises(ValueError):
        joint_index(3, 1)
    with pytest.raises(ValueError):
        action_pair(0)


def test_one_hot_feature_selects_weight():
    phi = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    g = build_game(FeatureMap(phi, phi), [0.3, 0.7], [0.3, 0.7])
    assert payoff(g, 1, 1) == pytest.approx(0.3)


def test_zero_features_give_zero_payoffs():
    z = np.zeros((4, 3))
    g = build_game(FeatureMap(z, z), [0.2, 0.3, 0.5], [1.0, 0.0, 0.0])
    assert np.all(g.payoffs == 0.0)
    assert payoff(g, 2, 4) == 0.0


def test_traffic_collision_payoff():
    g = build_game(traffic_features_from_tau(2.0, 3.0), *TRAFFIC_TRUTH)
    assert payoff(g, 1, 4) == pytest.approx(-0.90 / (1 + 1e-6), abs=1e-15)


def test_payoff_lookup_on_gc(gc):
    assert payoff(gc, 1, 1) == pytest.approx(4.0)
    assert payoff(gc, 2, 4) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        payoff(gc, 3, 1)


def test_dimension_mismatch_rejected():
    f = FeatureMap(np.eye(4)[:, :2], np.eye(4)[:, :3])
    with pytest.raises(ValueError, match="dimension"):
        build_game(f, [0.5, 0.5], [0.5, 0.5])


def test_weights_must_be_on_simplex():
    f = FeatureMap(np.eye(4)[:, :2], np.eye(4)[:, :2])
    with pytest.raises(ValueError):
        build_game(f, [0.6, 0.6], [0.5, 0.5])
    with pytest.raises(ValueError):
        build_game(f, [-0.1, 1.1], [0.5, 0.5])


def test_feature_map_rejects_nonfinite():
    bad = np.eye(4)
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        FeatureMap(bad, np.eye(4))


def test_classification_examples(gc):
    assert classify_game(gc) is GameClass.COORDINATION
    # swap a(1)<->a(3) and a(2)<->a(4) in both payoff tables
    anti = Game2x2.from_payoffs(GC_U1[[2, 3, 0, 1]], GC_U2[[2, 3, 0, 1]])
    assert classify_game(anti) is GameClass.ANTI_COORDINATION
    flat = Game2x2.from_payoffs([1, 1, 1, 1], GC_U2)
    assert classify_game(flat) is GameClass.DEGENERATE
    dom = Game2x2.from_payoffs([4, 3, 2, 1], GC_U2)  # row 1 strictly dominates
    assert classify_game(dom) is GameClass.DOMINANCE


def test_classification_tolerance():
    g = Game2x2.from_payoffs([4, 1, 4 - 1e-10, 3], GC_U2)
    assert classify_game(g) is GameClass.DEGENERATE
    assert classify_game(g, tol=0.0) is GameClass.COORDINATION
    with pytest.raises(ValueError):
        classify_game(g, tol=-1.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=4, max_size=4), st.lists(finite, min_size=4, max_size=4),
       st.floats(0.01, 100), st.floats(0.01, 100))
def test_classification_invariant_to_positive_scaling(u1, u2, c1, c2):
    g = Game2x2.from_payoffs(u1, u2)
    h = Game2x2.from_payoffs(c1 * np.array(u1), c2 * np.array(u2))
    if classify_game(g) is not GameClass.DEGENERATE and classify_game(h) is not GameClass.DEGENERATE:
        assert classify_game(g) is classify_game(h)


def test_constraint_values_examples(gc):
    assert np.allclose(ce_constraint_values(gc, np.full(4, 0.25)), 0.0, atol=1e-15)
    v = ce_constraint_values(gc, [1, 0, 0, 0])
    assert np.all(v >= 0)
    # the two constraints whose recommendation is a(1): player-1 and player-2 "stay at action 1"
    assert v[0] == pytest.approx(2.0) and v[2] == pytest.approx(2.0)
    assert ce_constraint_values(gc, [0, 1, 0, 0])[0] == pytest.approx(1.0 - 3.0)


def test_constraint_values_hand_formula(rng):
    for _ in range(50):
        u1, u2 = rng.normal(size=4), rng.normal(size=4)
        s = rng.dirichlet(np.ones(4))
        g = Game2x2.from_payoffs(u1, u2)
        expected = [
            s[0] * (u1[0] - u1[2]) + s[1] * (u1[1] - u1[3]),
            s[2] * (u1[2] - u1[0]) + s[3] * (u1[3] - u1[1]),
            s[0] * (u2[0] - u2[1]) + s[2] * (u2[2] - u2[3]),
            s[1] * (u2[1] - u2[0]) + s[3] * (u2[3] - u2[2]),
        ]
        assert np.allclose(ce_constraint_values(g, s), expected, atol=1e-13)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1))
def test_constraint_values_linear_in_sigma(lam):
    rng = np.random.default_rng(7)
    g = Game2x2.from_payoffs(rng.normal(size=4), rng.normal(size=4))
    p, q = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
    mix = ce_constraint_values(g, lam * p + (1 - lam) * q)
    assert np.allclose(mix, lam * ce_constraint_values(g, p) + (1 - lam) * ce_constraint_values(g, q), atol=1e-12)


def test_point_mass_constraint_is_single_difference(rng):
    u1, u2 = rng.normal(size=4), rng.normal(size=4)
    g = Game2x2.from_payoffs(u1, u2)
    for l in range(4):
        e = np.eye(4)[l]
        v = ce_constraint_values(g, e)
        assert np.count_nonzero(v) == 2  # one constraint per player is active


def test_payoffs_equal_dot_products(rng):
    for _ in range(100):
        d1, d2 = rng.integers(1, 9, 2)
        f = FeatureMap(rng.normal(size=(4, d1)), rng.normal(size=(4, d2)))
        w1, w2 = rng.dirichlet(np.ones(d1)), rng.dirichlet(np.ones(d2))
        g = build_game(f, w1, w2)
        for l in range(4):
            assert abs(payoff(g, 1, l + 1) - sum(f.phi1[l, k] * w1[k] for k in range(d1))) <= 1e-12
            assert abs(payoff(g, 2, l + 1) - sum(f.phi2[l, k] * w2[k] for k in range(d2))) <= 1e-12


def test_spec_roundtrip(tmp_path, gc):
    path = tmp_path / "g.json"
    path.write_text(json.dumps(game_to_spec(gc)))
    g = load_game(path)
    assert np.array_equal(g.payoffs, gc.payoffs)
    assert load_features(path).dims == (4, 4)


def test_spec_errors_name_location(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"features": {"player1": {"1": [1]}}, "weights": [[1], [1]]}')
    with pytest.raises(ValueError, match="bad.json.*player2"):
        load_game(path)
    path.write_text("{not json")
    with pytest.raises(ValueError, match="line 1"):
        load_game(path)
    with pytest.raises(ValueError, match="missing joint action 2"):
        game_from_spec({"features": {"player1": {"1": [1]}, "player2": {"1": [1]}}, "weights": [[1], [1]]})


def test_payoff_table_text(gc):
    text = gc.format_table()
    assert "(4, 3)" in text and "(3, 4)" in text
    assert len(text.splitlines()) >= 3


def test_feature_swap_is_involution(rng):
    f = FeatureMap(rng.normal(size=(4, 3)), rng.normal(size=(4, 2)))
    g = f.swapped().swapped()
    assert np.array_equal(g.phi1, f.phi1) and np.array_equal(g.phi2, f.phi2)
