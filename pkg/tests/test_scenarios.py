import numpy as np
import pytest

from invgame.data import KinematicState, counts
from invgame.equilibrium import alpha_beta, ce_vertices
from invgame.game import GameClass, build_game, classify_game, payoff
from invgame.scenarios import (
    CHICKEN_TRUTH,
    TRAFFIC_TRUTH,
    SweepGrid,
    chicken_dare_game,
    sample_iid,
    signaled_sample,
    sweep_traffic_scenarios,
    traffic_features,
    traffic_features_from_tau,
    traffic_game,
    uncoordinated_sample,
)

EPS = 1e-6


def direct_traffic_payoffs(tau1, tau2, w1, w2):
    """Payoff table written out entry by entry; rows a(1)..a(4) = ww, wg, gw, gg."""
    ad = abs(tau2 - tau1)
    u1 = [
        -w1[6] * ad + w1[7],
        -w1[2] * tau1 + w1[3],
        w1[0] / tau1 + w1[1],
        -w1[4] / (ad + EPS) + w1[5],
    ]
    u2 = [
        -w2[6] * ad + w2[7],
        w2[0] / tau2 + w2[1],
        -w2[2] * tau2 + w2[3],
        -w2[4] / (ad + EPS) + w2[5],
    ]
    return np.array(u1), np.array(u2)


def test_traffic_examples():
    g = traffic_game(2.0, 3.0)
    assert payoff(g, 2, 2) == pytest.approx(0.01 / 3, abs=1e-15)
    f = traffic_features_from_tau(2.0, 2.0)
    assert f.phi1[3, 4] == pytest.approx(-1e6)
    # the truth has zero weight on every intercept
    w1, w2 = TRAFFIC_TRUTH
    assert np.all(w1[1::2] == 0) and np.all(w2[1::2] == 0)
    assert np.array_equal(f.phi1 @ w1, f.phi1[:, ::2] @ w1[::2])


def test_documented_feature_rows():
    f = traffic_features(KinematicState(10, 10, 20, 30))
    assert f.phi1[0].tolist() == [0, 0, 0, 0, 0, 0, -1, 1]
    assert np.allclose(f.phi1[2], [0.5, 1, 0, 0, 0, 0, 0, 0])
    assert f.phi1[1].tolist() == [0, 0, -2, 1, 0, 0, 0, 0]
    assert np.allclose(f.phi1[3], [0, 0, 0, 0, -1 / (1 + EPS), 1, 0, 0])


def test_feature_payoff_consistency(rng):
    for _ in range(1000):
        k = KinematicState(*rng.uniform(1, 30, 2), *rng.uniform(1, 100, 2))
        w1, w2 = rng.dirichlet(np.ones(8)), rng.dirichlet(np.ones(8))
        g = build_game(traffic_features(k), w1, w2)
        u1, u2 = direct_traffic_payoffs(k.tau1, k.tau2, w1, w2)
        assert np.allclose(g.u1, u1, atol=1e-12, rtol=0) and np.allclose(g.u2, u2, atol=1e-12, rtol=0)


def test_swapping_agents(rng):
    for _ in range(100):
        k = KinematicState(*rng.uniform(1, 30, 2), *rng.uniform(1, 100, 2))
        s = k.swapped()
        assert s.delta == pytest.approx(-k.delta)
        a, b = traffic_features(s), traffic_features(k).swapped()
        assert np.allclose(a.phi1, b.phi1) and np.allclose(a.phi2, b.phi2)


def test_nonpositive_kinematics_rejected():
    with pytest.raises(ValueError):
        traffic_features_from_tau(0.0, 1.0)
    with pytest.raises(ValueError):
        KinematicState(1, 1, -1, 1)


def test_chicken_game_structure():
    assert classify_game(chicken_dare_game(*CHICKEN_TRUTH)) is GameClass.ANTI_COORDINATION
    assert classify_game(chicken_dare_game([0.5, 0.5], [0.5, 0.5])) is GameClass.ANTI_COORDINATION
    ab = alpha_beta(chicken_dare_game(*CHICKEN_TRUTH))
    assert ab.alpha == pytest.approx(0.3 / 0.7) and ab.beta == pytest.approx(0.4 / 0.6)
    with pytest.raises(ValueError, match="degenerate"):
        chicken_dare_game([1.0, 0.0], [0.5, 0.5])
    with pytest.raises(ValueError, match="degenerate"):
        chicken_dare_game([0.5, 0.5], [0.0, 1.0])


def test_chicken_interior_always_anti(rng):
    for _ in range(500):
        w1, w2 = rng.dirichlet([1, 1]), rng.dirichlet([1, 1])
        assert classify_game(chicken_dare_game(w1, w2)) is GameClass.ANTI_COORDINATION


def test_sweep_lattice():
    states = sweep_traffic_scenarios(SweepGrid((10.0,), (20.0, 30.0)))
    assert len(states) == 4
    assert {s.tau1 for s in states} == {2.0, 3.0} == {s.tau2 for s in states}
    grid = SweepGrid((10.0,), (20.0, 30.0))
    assert sweep_traffic_scenarios(grid) == sweep_traffic_scenarios(grid)
    with pytest.raises(ValueError):
        sweep_traffic_scenarios(SweepGrid((), (1.0,)))
    with pytest.raises(ValueError):
        sweep_traffic_scenarios(SweepGrid((-1.0,), (1.0,)))


def test_large_sweep_nondegenerate():
    states = sweep_traffic_scenarios(SweepGrid.from_ranges((5, 20), (10, 80), 10, jitter=0.1), seed=3)
    delta = np.array([s.delta for s in states])
    assert len(states) == 10_000 and np.all(np.isfinite(delta)) and np.abs(delta).std() > 0
    again = sweep_traffic_scenarios(SweepGrid.from_ranges((5, 20), (10, 80), 10, jitter=0.1), seed=3)
    assert again == states


def test_sample_iid():
    assert set(sample_iid([0, 0, 1, 0], 50, 1).actions) == {3}
    n = counts(sample_iid(np.full(4, 0.25), 2000, 5))
    assert np.all((400 <= n) & (n <= 600))
    assert abs(n - 500).max() <= 4 * np.sqrt(2000 * 0.25 * 0.75)
    assert sample_iid([0.1, 0.2, 0.3, 0.4], 300, 8) == sample_iid([0.1, 0.2, 0.3, 0.4], 300, 8)
    with pytest.raises(ValueError):
        sample_iid([1, 0, 0, 0], 0, 1)


def test_signaled_sample():
    device = ce_vertices(traffic_game(2.0, 3.0))[3]
    d = signaled_sample(device, 500, 2, context=(2.0, 3.0))
    zero = int(np.argmin(device)) + 1
    assert device[zero - 1] == 0 and zero not in set(d.actions)
    assert np.array_equal(d.actions, d.recommendations)
    assert np.all(d.tau == [2.0, 3.0])


def test_signaled_and_iid_share_law():
    p = [0.1, 0.2, 0.3, 0.4]
    a = sample_iid(p, 10_000, 1).frequencies()
    b = signaled_sample(p, 10_000, 2).frequencies()
    assert 0.5 * np.abs(a - b).sum() < 0.05
    # same seed, same sampler
    assert np.array_equal(sample_iid(p, 100, 3).actions, signaled_sample(p, 100, 3).actions)


def test_uncoordinated_limits():
    early = [KinematicState(10, 10, 5, 100)] * 200  # player 1 arrives far sooner
    d = uncoordinated_sample(early, 1e-3, 0)
    assert set(d.actions) == {3}  # (go, wait)
    tied = [KinematicState(10, 10, 30, 30)] * 20_000
    f = uncoordinated_sample(tied, 1.0, 1).frequencies()
    assert f[3] == pytest.approx(0.25, abs=0.015)
    with pytest.raises(ValueError):
        uncoordinated_sample(tied, 0.0, 1)


def test_uncoordinated_mixed_sweep_covers_all_actions():
    pool = sweep_traffic_scenarios(SweepGrid.from_ranges((8, 16), (10, 60), 6, jitter=0.05))
    pick = np.random.default_rng(0).choice(len(pool), 500)
    d = uncoordinated_sample([pool[i] for i in pick], 1.0, 0)
    assert set(d.actions) == {1, 2, 3, 4}
    assert np.allclose(d.delta, [pool[i].delta for i in pick])
