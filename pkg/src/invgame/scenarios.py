"""Data-generating protocols: chicken-dare and traffic-intersection games.

Action 1 is *wait* and action 2 is *go* for both players, so a(1) is
(wait, wait) and a(4) is (go, go), the potential collision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import Dataset, KinematicState
from .game import FeatureMap, Game2x2, GameClass, build_game, classify_game

EPSILON = 1e-6

# ground-truth weights of the synthetic chicken game and the traffic game
CHICKEN_TRUTH = (np.array([0.3, 0.7]), np.array([0.4, 0.6]))
TRAFFIC_TRUTH = (
    np.array([0.05, 0.00, 0.02, 0.00, 0.90, 0.00, 0.03, 0.00]),
    np.array([0.01, 0.00, 0.04, 0.00, 0.94, 0.00, 0.01, 0.00]),
)


def _own_traffic_rows(tau: float, abs_delta: float, eps: float) -> dict[str, np.ndarray]:
    rows = {k: np.zeros(8) for k in ("both_wait", "yield", "advance", "both_go")}
    rows["advance"][[0, 1]] = 1.0 / tau, 1.0
    rows["yield"][[2, 3]] = -tau, 1.0
    rows["both_go"][[4, 5]] = -1.0 / (abs_delta + eps), 1.0
    rows["both_wait"][[6, 7]] = -abs_delta, 1.0
    return rows


def traffic_features_from_tau(tau1: float, tau2: float, eps: float = EPSILON) -> FeatureMap:
    """Eight kinematic features per player: urgency, time pressure, collision risk, intercepts."""
    if tau1 <= 0 or tau2 <= 0:
        raise ValueError("times to intersection must be positive")
    ad = abs(tau2 - tau1)
    r1 = _own_traffic_rows(tau1, ad, eps)
    r2 = _own_traffic_rows(tau2, ad, eps)
    phi1 = np.stack([r1["both_wait"], r1["yield"], r1["advance"], r1["both_go"]])
    phi2 = np.stack([r2["both_wait"], r2["advance"], r2["yield"], r2["both_go"]])
    return FeatureMap(phi1, phi2)


def traffic_features(k: KinematicState, eps: float = EPSILON) -> FeatureMap:
    return traffic_features_from_tau(k.tau1, k.tau2, eps)


def traffic_game(tau1: float, tau2: float, w1=TRAFFIC_TRUTH[0], w2=TRAFFIC_TRUTH[1]) -> Game2x2:
    return build_game(traffic_features_from_tau(tau1, tau2), w1, w2)


# Feature 1 rewards advancing while the other yields; feature 2 scores safety
# (full when yielding to a mover, reduced by delay or by passing first, zero
# on collision). Interior weights give strict anti-coordination with
# alpha = w1[0] / w1[1] and beta = w2[0] / w2[1].
_CHICKEN_OWN = {
    "both_wait": (0.0, 0.75),
    "yield": (0.0, 1.0),
    "advance": (1.0, 0.75),
    "both_go": (0.0, 0.0),
}


def chicken_features() -> FeatureMap:
    c = _CHICKEN_OWN
    phi1 = np.array([c["both_wait"], c["yield"], c["advance"], c["both_go"]])
    phi2 = np.array([c["both_wait"], c["advance"], c["yield"], c["both_go"]])
    return FeatureMap(phi1, phi2)


def chicken_dare_game(w1=CHICKEN_TRUTH[0], w2=CHICKEN_TRUTH[1]) -> Game2x2:
    g = build_game(chicken_features(), w1, w2)
    if classify_game(g) is GameClass.DEGENERATE:
        raise ValueError(f"weights {np.asarray(w1).tolist()}, {np.asarray(w2).tolist()} give a degenerate chicken game")
    return g


# -- scenario sweep --------------------------------------------------------------


@dataclass(frozen=True)
class SweepGrid:
    """Lattice of speeds (m/s) and distances (m), shared by both vehicles.

    ``jitter`` perturbs every coordinate multiplicatively by U(1 - jitter, 1 + jitter).
    """

    v: tuple[float, ...]
    d: tuple[float, ...]
    jitter: float = 0.0

    @classmethod
    def from_ranges(cls, v_range, d_range, steps: int, jitter: float = 0.0) -> SweepGrid:
        if steps < 1:
            raise ValueError("steps must be positive")
        return cls(
            tuple(np.linspace(*v_range, steps).tolist()),
            tuple(np.linspace(*d_range, steps).tolist()),
            jitter,
        )

    @classmethod
    def from_dict(cls, d: dict) -> SweepGrid:
        if "steps" in d:
            return cls.from_ranges(d["v_range"], d["d_range"], d["steps"], d.get("jitter", 0.0))
        return cls(tuple(d["v"]), tuple(d["d"]), d.get("jitter", 0.0))


def sweep_traffic_scenarios(grid: SweepGrid, seed: int = 0) -> list[KinematicState]:
    if not grid.v or not grid.d:
        raise ValueError("sweep grid is empty")
    if min(grid.v) <= 0 or min(grid.d) <= 0:
        raise ValueError("sweep ranges must be positive")
    if not 0 <= grid.jitter < 1:
        raise ValueError("jitter must lie in [0, 1)")
    lattice = np.array(np.meshgrid(grid.v, grid.v, grid.d, grid.d, indexing="ij")).reshape(4, -1).T
    if grid.jitter > 0:
        rng = np.random.default_rng(seed)
        lattice = lattice * rng.uniform(1 - grid.jitter, 1 + grid.jitter, lattice.shape)
    return [KinematicState(*row) for row in lattice.tolist()]


# -- sampling protocols ---------------------------------------------------------


def _context_column(context, T):
    return None if context is None else np.tile(np.asarray(context, dtype=float), (T, 1))


def sample_iid(p, T: int, seed: int, context=None) -> Dataset:
    """T independent joint actions drawn from p; ``context`` is an optional (tau1, tau2)."""
    if T < 1:
        raise ValueError("T must be positive")
    p = np.asarray(p, dtype=float)
    rng = np.random.default_rng(seed)
    actions = rng.choice(4, size=T, p=p / p.sum()) + 1
    return Dataset(actions, _context_column(context, T))


def signaled_sample(device, T: int, seed: int, context=None) -> Dataset:
    """A correlation device draws joint recommendations, which both drivers obey."""
    rec = sample_iid(device, T, seed).actions
    played = rec.copy()  # obedient followers
    return Dataset(played, _context_column(context, T), rec)


def uncoordinated_sample(states, noise: float, seed: int) -> Dataset:
    """Each driver independently goes with probability logistic((tau_other - tau_self) / noise)."""
    if noise <= 0:
        raise ValueError("noise must be positive")
    if not states:
        raise ValueError("no states given")
    tau = np.array([(s.tau1, s.tau2) for s in states])
    rng = np.random.default_rng(seed)
    p_go1 = expit((tau[:, 1] - tau[:, 0]) / noise)
    p_go2 = expit((tau[:, 0] - tau[:, 1]) / noise)
    u = rng.random((len(states), 2))
    go1 = u[:, 0] < p_go1
    go2 = u[:, 1] < p_go2
    actions = 2 * go1 + go2 + 1
    return Dataset(actions, tau)
