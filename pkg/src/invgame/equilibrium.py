"""Correlated-equilibrium geometry of 2x2 games."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.special import entr, logsumexp

from .game import (
    DEGENERACY_TOL,
    DegenerateGameError,
    Game2x2,
    GameClass,
    classify_differences,
    classify_game,
    constraint_matrix,
    payoff_differences,
)

DIST_TOL = 1e-9


class AlphaBeta(NamedTuple):
    alpha: float
    beta: float


class MaxEntropyError(RuntimeError):
    def __init__(self, message, best, violations):
        super().__init__(message)
        self.best = best
        self.violations = violations


def check_distribution(p, name: str = "sigma") -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (4,):
        raise ValueError(f"{name} must have 4 entries, got shape {p.shape}")
    if np.any(~np.isfinite(p)) or np.any(p < -DIST_TOL) or abs(p.sum() - 1.0) > DIST_TOL:
        raise ValueError(f"{name} is not a probability vector: {p.tolist()}")
    return p


def entropy(p) -> float:
    """Shannon entropy in nats."""
    return float(entr(np.asarray(p, dtype=float)).sum())


def alpha_beta_from_differences(diffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    diffs = np.abs(diffs)
    return diffs[..., 0] / diffs[..., 1], diffs[..., 2] / diffs[..., 3]


def alpha_beta(g: Game2x2) -> AlphaBeta:
    if classify_game(g) is GameClass.DEGENERATE:
        raise DegenerateGameError("dominated/degenerate payoffs: a payoff difference is zero")
    a, b = alpha_beta_from_differences(payoff_differences(g.u1, g.u2))
    return AlphaBeta(float(a), float(b))


def _table_rows(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """The five vertex rows, columns ordered a(1), a(4), a(3), a(2)."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    rows = np.zeros(alpha.shape + (5, 4))
    rows[..., 0, 0] = 1.0
    rows[..., 1, 1] = 1.0
    rows[..., 2:, 0] = 1.0
    rows[..., 2:, 1] = (alpha * beta)[..., None]
    rows[..., 2:4, 2] = beta[..., None]
    rows[..., 2, 3] = alpha
    rows[..., 4, 3] = alpha
    return rows / rows.sum(axis=-1, keepdims=True)


def table_to_internal(rows: np.ndarray) -> np.ndarray:
    """Reorder a(1), a(4), a(3), a(2) columns into a(1)..a(4)."""
    return rows[..., [0, 3, 2, 1]]


def _swap_diagonal(v: np.ndarray) -> np.ndarray:
    # a(1) <-> a(3), a(2) <-> a(4)
    return v[..., [2, 3, 0, 1]]


def vertices_from_payoffs(u1, u2, tol: float = DEGENERACY_TOL):
    """Batched CE vertices.

    Returns (V, codes): V has shape (..., 5, 4) and is NaN wherever the game is
    neither a coordination nor an anti-coordination game.
    """
    diffs = payoff_differences(u1, u2)
    codes = classify_differences(diffs, tol)
    anti = codes == 1
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha, beta = alpha_beta_from_differences(diffs)
        beta = np.where(anti, 1.0 / beta, beta)
        V = table_to_internal(_table_rows(alpha, beta))
    if anti.any():
        V = np.where(anti[..., None, None], _swap_diagonal(V), V)
    if np.any(codes > 1):
        V = np.where((codes <= 1)[..., None, None], V, np.nan)
    return V, codes


def ce_vertices(g: Game2x2) -> np.ndarray:
    """The five CE polytope vertices as a (5, 4) array, rows in table order 1..5."""
    V, code = vertices_from_payoffs(g.u1, g.u2)
    if code > 1:
        raise DegenerateGameError(
            "CE polytope characterization requires (anti-)coordination structure"
        )
    return V


def mixture_distribution(vertices, y) -> np.ndarray:
    vertices = np.asarray(vertices, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.shape != (5,) or np.any(y < -DIST_TOL) or abs(y.sum() - 1.0) > DIST_TOL:
        raise ValueError(f"mixture weights must lie on the 5-simplex, got {y.tolist()}")
    return y @ vertices


def is_ce(g: Game2x2, sigma, tol: float = 1e-10) -> bool:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return bool(np.min(constraint_matrix(g.u1, g.u2) @ np.asarray(sigma, float)) >= -tol)


# -- maximum-entropy CE --------------------------------------------------------

_ZERO_LP = 1e-9
_FEAS_TOL = 1e-7


def _lp_max(objective: np.ndarray, C: np.ndarray) -> float:
    res = linprog(
        -objective,
        A_ub=-C,
        b_ub=np.zeros(len(C)),
        A_eq=np.ones((1, 4)),
        b_eq=[1.0],
        bounds=[(0, 1)] * 4,
        method="highs",
    )
    if res.status != 0:
        raise MaxEntropyError(f"CE linear program failed: {res.message}", None, None)
    return -res.fun


def max_entropy_ce_from_constraints(C: np.ndarray, tol: float = 1e-9, max_iter: int = 5000) -> np.ndarray:
    """Maximum-entropy distribution satisfying C @ p >= 0.

    Actions that no feasible point can use, and constraints that every feasible
    point satisfies with equality, are found by linear programs first; the
    reduced dual then has an attained optimum.
    """
    scale = np.abs(C).max()
    if scale == 0:
        return np.full(4, 0.25)
    C = C / scale
    support = np.array([_lp_max(np.eye(4)[k], C) > _ZERO_LP for k in range(4)])
    p = np.zeros(4)
    if support.sum() == 1:
        p[support] = 1.0
        return p
    Cs = C[:, support]
    active = np.any(np.abs(Cs) > 0, axis=1)
    Cs = Cs[active]
    equality = np.array([_lp_max(row, C) <= _ZERO_LP for row in C[active]])

    def dual(mu):
        z = mu @ Cs
        lz = logsumexp(z)
        return lz, Cs @ np.exp(z - lz)

    bounds = [(None, None) if eq else (0.0, None) for eq in equality]
    res = minimize(
        dual,
        np.zeros(len(Cs)),
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"ftol": 1e-16, "gtol": min(tol, 1e-10), "maxiter": max_iter},
    )
    z = res.x @ Cs
    p[support] = np.exp(z - logsumexp(z))
    values = C @ p
    if values.min() < -_FEAS_TOL:
        raise MaxEntropyError(
            f"max-entropy CE did not converge ({res.message})", p, values * scale
        )
    return p


def max_entropy_ce(g: Game2x2, tol: float = 1e-9) -> np.ndarray:
    return max_entropy_ce_from_constraints(constraint_matrix(g.u1, g.u2), tol)
