"""Two-player, two-action games with payoffs linear in known features.

Joint actions are enumerated a(1)=(a1^1, a2^1), a(2)=(a1^1, a2^2),
a(3)=(a1^2, a2^1), a(4)=(a1^2, a2^2). Public functions take 1-based joint
action indices; arrays are always stored in a(1)..a(4) order.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

N_ACTIONS = 4
DEGENERACY_TOL = 1e-9
SIMPLEX_TOL = 1e-9

# (player-1 action, player-2 action) for a(1)..a(4), actions numbered 1, 2
_PAIRS = ((1, 1), (1, 2), (2, 1), (2, 2))


class GameClass(enum.Enum):
    COORDINATION = "coordination"
    ANTI_COORDINATION = "anti-coordination"
    DOMINANCE = "dominance"
    DEGENERATE = "degenerate"


class DegenerateGameError(ValueError):
    """Raised when an operation needs strict payoff differences."""


def joint_index(a1: int, a2: int) -> int:
    """Return l such that a(l) = (a1, a2); actions are numbered 1 and 2."""
    if a1 not in (1, 2) or a2 not in (1, 2):
        raise ValueError(f"actions must be 1 or 2, got ({a1}, {a2})")
    return 2 * (a1 - 1) + a2


def action_pair(l: int) -> tuple[int, int]:
    if l not in (1, 2, 3, 4):
        raise ValueError(f"joint action index must be in 1..4, got {l}")
    return _PAIRS[l - 1]


def check_simplex(w, name: str = "w") -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError(f"{name} must be a nonempty vector")
    if not np.all(np.isfinite(w)) or np.any(w < 0) or abs(w.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"{name} must lie on the probability simplex, got {w.tolist()}")
    return w


@dataclass(frozen=True)
class FeatureMap:
    """Per-player feature vectors phi_i(a(l)), stored as (4, d_i) arrays."""

    phi1: np.ndarray
    phi2: np.ndarray

    def __post_init__(self):
        for name in ("phi1", "phi2"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 2 or arr.shape[0] != N_ACTIONS or arr.shape[1] == 0:
                raise ValueError(f"{name} must have shape (4, d), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dims(self) -> tuple[int, int]:
        return self.phi1.shape[1], self.phi2.shape[1]

    def player(self, i: int) -> np.ndarray:
        return self.phi1 if i == 1 else self.phi2

    def swapped(self) -> FeatureMap:
        """Relabel players: the new player 1 is the old player 2."""
        perm = [0, 2, 1, 3]  # (a1, a2) -> (a2, a1)
        return FeatureMap(self.phi2[perm], self.phi1[perm])


@dataclass(frozen=True)
class Game2x2:
    features: FeatureMap
    w1: np.ndarray
    w2: np.ndarray
    payoffs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d1, d2 = self.features.dims
        w1 = np.array(self.w1, dtype=float)
        w2 = np.array(self.w2, dtype=float)
        if w1.shape != (d1,) or w2.shape != (d2,):
            raise ValueError(
                f"weight dimensions {w1.shape}, {w2.shape} do not match feature dimensions ({d1},), ({d2},)"
            )
        u = np.vstack([self.features.phi1 @ w1, self.features.phi2 @ w2])
        if not np.all(np.isfinite(u)):
            raise ValueError("payoffs must be finite")
        for arr in (w1, w2, u):
            arr.setflags(write=False)
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "payoffs", u)

    @property
    def u1(self) -> np.ndarray:
        return self.payoffs[0]

    @property
    def u2(self) -> np.ndarray:
        return self.payoffs[1]

    @classmethod
    def from_payoffs(cls, u1, u2) -> Game2x2:
        """Game whose payoffs are given directly (one feature per player, weight 1)."""
        u1 = np.asarray(u1, dtype=float).reshape(N_ACTIONS, 1)
        u2 = np.asarray(u2, dtype=float).reshape(N_ACTIONS, 1)
        return cls(FeatureMap(u1, u2), np.ones(1), np.ones(1))

    def format_table(self, precision: int = 4) -> str:
        """Payoff matrix in row/column layout, cells are (u1, u2)."""
        cells = [f"({self.u1[l]:.{precision}g}, {self.u2[l]:.{precision}g})" for l in range(4)]
        width = max(len(c) for c in cells) + 2
        lines = [" " * 6 + "a2^1".center(width) + "a2^2".center(width)]
        lines.append("a1^1  " + cells[0].center(width) + cells[1].center(width))
        lines.append("a1^2  " + cells[2].center(width) + cells[3].center(width))
        return "\n".join(lines)


def build_game(features: FeatureMap, w1, w2) -> Game2x2:
    """Build a game with u_i(a) = phi_i(a) . w_i, weights on the simplex."""
    return Game2x2(features, check_simplex(w1, "w1"), check_simplex(w2, "w2"))


def payoff(g: Game2x2, player: int, a: int) -> float:
    if player not in (1, 2):
        raise ValueError(f"player must be 1 or 2, got {player}")
    action_pair(a)
    return float(g.payoffs[player - 1, a - 1])


_DIFF1 = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, -1.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
_DIFF2 = np.array([[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, -1.0, 0.0], [0.0, 0.0, 0.0, -1.0], [0.0, 0.0, 0.0, 1.0]])


def payoff_differences(u1, u2) -> np.ndarray:
    """The four strict-coordination margins, batched over leading axes.

    Order: u1(a1)-u1(a3), u1(a4)-u1(a2), u2(a1)-u2(a2), u2(a4)-u2(a3).
    """
    return np.asarray(u1, dtype=float) @ _DIFF1 + np.asarray(u2, dtype=float) @ _DIFF2


def classify_differences(diffs: np.ndarray, tol: float = DEGENERACY_TOL) -> np.ndarray:
    """Vectorised classification; returns codes 0=coord, 1=anti, 2=dominance, 3=degenerate."""
    diffs = np.asarray(diffs)
    pos = diffs > tol
    neg = diffs < -tol
    codes = np.where(pos.all(axis=-1), 0, np.where(neg.all(axis=-1), 1, 2))
    codes = np.where((pos | neg).all(axis=-1), codes, 3)
    return codes.astype(np.int8)


_CLASS_BY_CODE = (
    GameClass.COORDINATION,
    GameClass.ANTI_COORDINATION,
    GameClass.DOMINANCE,
    GameClass.DEGENERATE,
)


def classify_game(g: Game2x2, tol: float = DEGENERACY_TOL) -> GameClass:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    code = classify_differences(payoff_differences(g.u1, g.u2), tol)
    return _CLASS_BY_CODE[int(code)]


def constraint_matrix(u1, u2) -> np.ndarray:
    """Rows c_j with c_j . sigma the CE constraint value, batched over leading axes.

    Row order: player 1 deviating a1^1 -> a1^2, a1^2 -> a1^1; player 2 deviating
    a2^1 -> a2^2, a2^2 -> a2^1.
    """
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    C = np.zeros(u1.shape[:-1] + (4, 4))
    C[..., 0, 0] = u1[..., 0] - u1[..., 2]
    C[..., 0, 1] = u1[..., 1] - u1[..., 3]
    C[..., 1, 2] = u1[..., 2] - u1[..., 0]
    C[..., 1, 3] = u1[..., 3] - u1[..., 1]
    C[..., 2, 0] = u2[..., 0] - u2[..., 1]
    C[..., 2, 2] = u2[..., 2] - u2[..., 3]
    C[..., 3, 1] = u2[..., 1] - u2[..., 0]
    C[..., 3, 3] = u2[..., 3] - u2[..., 2]
    return C


def ce_constraint_values(g: Game2x2, sigma) -> np.ndarray:
    """Left-hand sides of the four CE inequalities; sigma is a CE iff all are >= 0."""
    sigma = np.asarray(sigma, dtype=float)
    return constraint_matrix(g.u1, g.u2) @ sigma


# -- game specification files ------------------------------------------------


def _matrix_from_spec(obj, where: str) -> np.ndarray:
    if isinstance(obj, dict):
        try:
            rows = [obj[str(l)] for l in range(1, 5)]
        except KeyError as exc:
            raise ValueError(f"{where}: missing joint action {exc.args[0]}") from None
    elif isinstance(obj, list):
        rows = obj
    else:
        raise ValueError(f"{where}: expected a list of 4 rows or a mapping keyed 1..4")
    try:
        arr = np.array(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{where}: {exc}") from None
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[0] != 4:
        raise ValueError(f"{where}: expected 4 rows, got {arr.shape[0]}")
    return arr


def features_from_spec(spec: dict) -> FeatureMap:
    """Parse the "features" part of a game spec; weights are not needed."""
    if not isinstance(spec, dict) or "features" not in spec:
        raise ValueError("game spec: requires 'features'")
    feats = spec["features"]
    if isinstance(feats, dict):
        try:
            raw = (feats["player1"], feats["player2"])
        except KeyError as exc:
            raise ValueError(f"game spec: features missing {exc.args[0]}") from None
    elif isinstance(feats, list) and len(feats) == 2:
        raw = tuple(feats)
    else:
        raise ValueError("game spec: 'features' must hold two per-player matrices")
    phi1 = _matrix_from_spec(raw[0], "features.player1")
    phi2 = _matrix_from_spec(raw[1], "features.player2")
    try:
        return FeatureMap(phi1, phi2)
    except ValueError as exc:
        raise ValueError(f"game spec: {exc}") from None


def game_from_spec(spec: dict) -> Game2x2:
    """Parse {"features": {"player1": ..., "player2": ...}, "weights": [w1, w2]}."""
    if not isinstance(spec, dict):
        raise ValueError("game spec: top level must be an object")
    if "weights" not in spec:
        raise ValueError("game spec: requires 'features' and 'weights'")
    features = features_from_spec(spec)
    weights = spec["weights"]
    if not isinstance(weights, list) or len(weights) != 2:
        raise ValueError("game spec: 'weights' must be a list of two arrays")
    return build_game(features, weights[0], weights[1])


def game_to_spec(g: Game2x2) -> dict:
    return {
        "features": {
            "player1": {str(l + 1): g.features.phi1[l].tolist() for l in range(4)},
            "player2": {str(l + 1): g.features.phi2[l].tolist() for l in range(4)},
        },
        "weights": [g.w1.tolist(), g.w2.tolist()],
    }


def _read_spec(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def load_game(path) -> Game2x2:
    spec = _read_spec(path)
    try:
        return game_from_spec(spec)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def load_features(path) -> FeatureMap:
    spec = _read_spec(path)
    try:
        return features_from_spec(spec)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
