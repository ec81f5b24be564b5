"""Simultaneous logit best-response dynamics on a 2x2 game."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .data import Dataset
from .game import Game2x2

DENOMINATOR_GUARD = 1e-15


class LogitResponses(NamedTuple):
    """s1 = P(a1^1 | a2^1), s2 = P(a1^1 | a2^2), t1 = P(a2^1 | a1^1), t2 = P(a2^1 | a1^2)."""

    s1: float
    s2: float
    t1: float
    t2: float


class ConvergenceError(RuntimeError):
    def __init__(self, message, last, residual):
        super().__init__(message)
        self.last = last
        self.residual = residual


def check_rationality(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (2,) or not np.all(np.isfinite(lam)) or np.any(lam < 0):
        raise ValueError(f"rationality must be two finite nonnegative numbers, got {lam}")
    return lam


def _first_choice_prob(x, y):
    """exp(x) / (exp(x) + exp(y)) with the larger exponent subtracted first."""
    m = np.maximum(x, y)
    ex = np.exp(x - m)
    return ex / (ex + np.exp(y - m))


def responses_from_payoffs(u1, u2, lam1, lam2):
    """Batched one-step responses; payoff arrays have trailing axis of length 4."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    s1 = _first_choice_prob(lam1 * u1[..., 0], lam1 * u1[..., 2])
    s2 = _first_choice_prob(lam1 * u1[..., 1], lam1 * u1[..., 3])
    t1 = _first_choice_prob(lam2 * u2[..., 0], lam2 * u2[..., 1])
    t2 = _first_choice_prob(lam2 * u2[..., 2], lam2 * u2[..., 3])
    return s1, s2, t1, t2


def stationary_from_responses(s1, s2, t1, t2) -> np.ndarray:
    """Product of the stationary marginals; trailing axis is a(1)..a(4)."""
    den = 1.0 - (s1 - s2) * (t1 - t2)
    if np.any(np.abs(den) <= DENOMINATOR_GUARD):
        raise FloatingPointError("stationary marginal system is singular")
    x = (s2 + (s1 - s2) * t2) / den
    q = (t2 + (t1 - t2) * s2) / den
    return np.stack([x * q, x * (1 - q), (1 - x) * q, (1 - x) * (1 - q)], axis=-1)


def logit_responses(g: Game2x2, lam) -> LogitResponses:
    lam = check_rationality(lam)
    return LogitResponses(*(float(v) for v in responses_from_payoffs(g.u1, g.u2, lam[0], lam[1])))


def transition_matrix(g: Game2x2, lam) -> np.ndarray:
    """Row-stochastic P with P[k, l] the probability of moving from a(k+1) to a(l+1)."""
    s1, s2, t1, t2 = logit_responses(g, lam)
    # the row player reacts to the column player's last action and vice versa
    s_by_state = (s1, s2, s1, s2)
    t_by_state = (t1, t1, t2, t2)
    P = np.empty((4, 4))
    for k in range(4):
        s, t = s_by_state[k], t_by_state[k]
        P[k] = (s * t, s * (1 - t), (1 - s) * t, (1 - s) * (1 - t))
    return P


def stationary_closed_form(g: Game2x2, lam) -> np.ndarray:
    return stationary_from_responses(*logit_responses(g, lam))


def stationary_power_iteration(g: Game2x2, lam, tol: float = 1e-14, max_iter: int = 200) -> np.ndarray:
    """Iterate sigma <- sigma P from uniform until the one-step TV change is <= tol.

    Each round applies P^(2^k) (built by repeated squaring) so slowly mixing
    chains need only O(log t) rounds; max_iter bounds the number of rounds.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    P = transition_matrix(g, lam)
    sigma = np.full(4, 0.25)
    stride = P.copy()
    residual = np.inf
    for _ in range(max_iter):
        step = sigma @ P
        residual = 0.5 * np.abs(step - sigma).sum()
        if residual <= tol:
            return step
        sigma = sigma @ stride
        sigma /= sigma.sum()
        stride = stride @ stride
        stride /= stride.sum(axis=1, keepdims=True)
    raise ConvergenceError(
        f"power iteration did not reach tol={tol} in {max_iter} rounds", sigma, residual
    )


def simulate_chain(g: Game2x2, lam, T: int, seed: int, burn_in: int = 1000) -> Dataset:
    """Run the joint-action chain from a uniform initial state; record T steps after burn-in."""
    if T < 1 or burn_in < 0:
        raise ValueError("need T >= 1 and burn_in >= 0")
    s1, s2, t1, t2 = logit_responses(g, lam)
    s = (s1, s2)  # indexed by player 2's current action
    t = (t1, t2)  # indexed by player 1's current action
    rng = np.random.default_rng(seed)
    l = int(rng.integers(4))
    a1, a2 = l // 2, l % 2
    draws = rng.random((burn_in + T, 2))
    out = np.empty(T, dtype=np.int64)
    for step in range(burn_in + T):
        a1, a2 = (0 if draws[step, 0] < s[a2] else 1), (0 if draws[step, 1] < t[a1] else 1)
        if step >= burn_in:
            out[step - burn_in] = 2 * a1 + a2 + 1
    return Dataset(out)
