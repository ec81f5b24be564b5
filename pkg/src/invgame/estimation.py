"""Inverse learning of utility weights from observed joint actions.

Three estimators share one design: records are grouped by context (the
kinematic state they were observed in, or a single shared game), so every
objective is a sum over contexts of count-weighted log-probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .data import Dataset, counts
from .equilibrium import max_entropy_ce_from_constraints, vertices_from_payoffs
from .game import FeatureMap, constraint_matrix, payoff_differences
from .lbr import responses_from_payoffs, stationary_from_responses
from .optimize import Box, FitConfig, OptimizationError, Simplex, optimize

# a fixed game, or a map from (tau1, tau2) to the game's features
Features = Union[FeatureMap, Callable[[float, float], FeatureMap]]

_CLASS_MARGIN = 1e-6


class FitError(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


def nll(p, n, floor: float = 1e-12) -> float:
    """-sum_l n_l log(max(p_l, floor)); broadcasts over leading context axes."""
    p = np.asarray(p, dtype=float)
    n = np.asarray(n, dtype=float)
    return float(-(n * np.log(np.maximum(p, floor))).sum())


def empirical_nll(n) -> float:
    """NLL of the per-context empirical frequencies, the unconstrained optimum."""
    n = np.asarray(n, dtype=float).reshape(-1, 4)
    tot = n.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(n > 0, n * np.log(n / tot), 0.0)
    return float(-terms.sum())


@dataclass(frozen=True, eq=False)
class Design:
    """Counts grouped by context: phi1 (K, 4, d1), phi2 (K, 4, d2), counts (K, 4)."""

    phi1: np.ndarray
    phi2: np.ndarray
    counts: np.ndarray
    contexts: np.ndarray | None = None  # (K, 2) tau pairs
    record_context: np.ndarray | None = None  # (T,) context row of each record

    @property
    def T(self) -> int:
        return int(self.counts.sum())

    @property
    def dims(self) -> tuple[int, int]:
        return self.phi1.shape[2], self.phi2.shape[2]

    def frequencies(self) -> np.ndarray:
        return self.counts / self.counts.sum(axis=1, keepdims=True)


def make_design(d: Dataset, features: Features) -> Design:
    if len(d) == 0:
        raise ValueError("dataset is empty")
    if isinstance(features, FeatureMap):
        n = counts(d)[None, :]
        return Design(features.phi1[None], features.phi2[None], n, None, np.zeros(len(d), dtype=np.int64))
    if d.tau is None:
        raise ValueError("context-dependent features need records with tau1/tau2")
    contexts, inverse = np.unique(d.tau, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    maps = [features(t1, t2) for t1, t2 in contexts]
    n = np.zeros((len(contexts), 4), dtype=np.int64)
    np.add.at(n, (inverse, d.actions - 1), 1)
    return Design(
        np.stack([m.phi1 for m in maps]),
        np.stack([m.phi2 for m in maps]),
        n,
        contexts,
        inverse,
    )


def _payoffs(design: Design, w1, w2):
    return design.phi1 @ w1, design.phi2 @ w2


def _structure_penalty(U1, U2) -> float:
    """Distance of each context from the nearer of the two strict sign patterns."""
    diffs = payoff_differences(U1, U2)
    diffs = diffs / (np.abs(diffs).max(axis=-1, keepdims=True) + 1e-300)
    coord = (np.maximum(0.0, _CLASS_MARGIN - diffs) ** 2).sum(axis=-1)
    anti = (np.maximum(0.0, _CLASS_MARGIN + diffs) ** 2).sum(axis=-1)
    return float(np.minimum(coord, anti).sum())


def _infeasible_value(design: Design, floor: float, U1, U2) -> float:
    # worse than any feasible point, yet still sloping toward feasibility
    worst = design.T * -np.log(floor)
    return worst + 1.0 + 1e3 * (1.0 + _structure_penalty(U1, U2))


def pooled(design: Design, dists: np.ndarray) -> np.ndarray:
    """Record-weighted average of per-context distributions."""
    weights = design.counts.sum(axis=1)
    return weights @ dists / weights.sum()


@dataclass
class _Estimate:
    w1: np.ndarray
    w2: np.ndarray
    nll: float
    fitted_distribution: np.ndarray
    context_distributions: np.ndarray
    contexts: np.ndarray | None
    empirical_nll: float
    diagnostics: dict = field(default_factory=dict)

    method = ""

    def record_distributions(self, design: Design) -> np.ndarray:
        return self.context_distributions[design.record_context]

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "w1": self.w1.tolist(),
            "w2": self.w2.tolist(),
            "nll": self.nll,
            "empirical_nll": self.empirical_nll,
            "fitted_distribution": self.fitted_distribution.tolist(),
            "diagnostics": self.diagnostics,
        }
        out.update(self._extra())
        return out

    def _extra(self) -> dict:
        return {}


@dataclass
class CeMlEstimate(_Estimate):
    y: np.ndarray = None
    method = "ce-ml"

    def predict(self, features: FeatureMap) -> np.ndarray:
        V, code = vertices_from_payoffs(features.phi1 @ self.w1, features.phi2 @ self.w2)
        if code > 1:
            raise ValueError("fitted weights do not give an (anti-)coordination game here")
        return self.y @ V

    def _extra(self):
        return {"y": self.y.tolist()}


@dataclass
class LbrMlEstimate(_Estimate):
    lam: np.ndarray = None
    method = "lbr-ml"

    def predict(self, features: FeatureMap) -> np.ndarray:
        r = responses_from_payoffs(features.phi1 @ self.w1, features.phi2 @ self.w2, *self.lam)
        return stationary_from_responses(*r)

    def _extra(self):
        return {"lambda": self.lam.tolist()}


@dataclass
class IceEstimate(_Estimate):
    violation: float = 0.0
    method = "ice"

    def predict(self, features: FeatureMap) -> np.ndarray:
        C = constraint_matrix(features.phi1 @ self.w1, features.phi2 @ self.w2)
        return max_entropy_ce_from_constraints(C)

    def _extra(self):
        return {"violation": self.violation}


def _weight_start(cfg: FitConfig):
    if cfg.w_init is None:
        return None
    return [np.asarray(cfg.w_init[0], float), np.asarray(cfg.w_init[1], float)]


# -- CE-ML ---------------------------------------------------------------------


def ce_ml_objective(design: Design, floor: float = 1e-12):
    def objective(w1, w2, y):
        U1, U2 = _payoffs(design, w1, w2)
        V, codes = vertices_from_payoffs(U1, U2)
        if np.any(codes > 1):
            return _infeasible_value(design, floor, U1, U2)
        p = np.einsum("v,kvl->kl", y, V)
        return nll(p, design.counts, floor)

    return objective


# a single-vertex refit counts as a tie when its NLL is this close to the mixture's
SINGLE_VERTEX_TOL = 1e-6


def _single_vertex_tie(objective, design, cfg, w1, w2, y, target):
    """First vertex, by fitted weight, that alone matches the mixture's likelihood.

    The mixture weights are often not identified: several (w, y) reach the same
    likelihood. Each vertex is refitted over w alone, warm-started at the mixture
    fit, and the most concentrated explanation is preferred when it ties.
    """
    if y.max() >= 1 - 1e-9:
        return None
    d1, d2 = design.dims
    lb = empirical_nll(design.counts)
    for k in np.argsort(-y, kind="stable"):
        e = np.eye(5)[k]
        try:
            res = optimize(
                lambda a, b: objective(a, b, e),
                [Simplex(d1), Simplex(d2)],
                cfg,
                starts=[[w1, w2]],
                n_restarts=1,
                lower_bound=lb,
            )
        except OptimizationError:
            continue
        if res.fun <= target + SINGLE_VERTEX_TOL:
            return k, res.x[0], res.x[1], res.fun
    return None


def fit_ce_ml(d: Dataset, features: Features, cfg: FitConfig = FitConfig()) -> CeMlEstimate:
    """Maximum likelihood over weights and mixtures of the five CE vertices."""
    design = make_design(d, features)
    d1, d2 = design.dims
    objective = ce_ml_objective(design, cfg.floor)
    w0 = _weight_start(cfg)
    starts = [w0 + [np.full(5, 0.2)]] if w0 else []
    try:
        res = optimize(
            objective,
            [Simplex(d1), Simplex(d2), Simplex(5)],
            cfg,
            starts=starts,
            lower_bound=empirical_nll(design.counts),
        )
    except OptimizationError as exc:
        raise FitError(str(exc), exc.diagnostics) from None
    w1, w2, y = res.x
    diagnostics = res.diagnostics()
    single = _single_vertex_tie(objective, design, cfg, w1, w2, y, res.fun)
    if single is not None:
        k, w1, w2, fun = single
        y = np.eye(5)[k]
        res.fun = fun
        diagnostics["single_vertex"] = int(k) + 1
    V, codes = vertices_from_payoffs(*_payoffs(design, w1, w2))
    if np.any(codes > 1):
        raise FitError(
            "no (anti-)coordination weights found across restarts", diagnostics
        )
    dists = np.einsum("v,kvl->kl", y, V)
    return CeMlEstimate(
        w1=w1,
        w2=w2,
        nll=res.fun,
        fitted_distribution=pooled(design, dists),
        context_distributions=dists,
        contexts=design.contexts,
        empirical_nll=empirical_nll(design.counts),
        diagnostics=diagnostics,
        y=y,
    )


# -- LBR-ML --------------------------------------------------------------------


def lbr_ml_objective(design: Design, floor: float = 1e-12):
    def objective(w1, w2, lam):
        U1, U2 = _payoffs(design, w1, w2)
        try:
            p = stationary_from_responses(*responses_from_payoffs(U1, U2, lam[0], lam[1]))
        except FloatingPointError:
            return np.inf
        return nll(p, design.counts, floor)

    return objective


def fit_lbr_ml(d: Dataset, features: Features, cfg: FitConfig = FitConfig()) -> LbrMlEstimate:
    """Maximum likelihood of the logit-response stationary distribution.

    Rationality is screened on a coarse grid crossed with the weight restarts;
    the best ``cfg.refine`` candidates are then refined jointly with lambda
    free in [0, lambda_max]. With ``cfg.fixed_lambda`` only weights are fitted.
    """
    design = make_design(d, features)
    d1, d2 = design.dims
    objective = lbr_ml_objective(design, cfg.floor)
    wblocks = [Simplex(d1), Simplex(d2)]
    bound = empirical_nll(design.counts)

    # same weight starts as optimize() would draw for the weight blocks alone
    rng = np.random.default_rng(cfg.seed)
    wstarts = [_weight_start(cfg) or [b.center() for b in wblocks]]
    while len(wstarts) < cfg.restarts:
        wstarts.append([b.sample(rng) for b in wblocks])

    if cfg.fixed_lambda is not None:
        lam = np.asarray(cfg.fixed_lambda)
        res = optimize(lambda w1, w2: objective(w1, w2, lam), wblocks, cfg, starts=wstarts, lower_bound=bound)
        w1, w2 = res.x
        diagnostics = res.diagnostics() | {"lambda_fixed": True}
    else:
        box = Box([0.0, 0.0], [cfg.lambda_max, cfg.lambda_max])
        grid = [np.array([a, b]) for a in cfg.lambda_grid for b in cfg.lambda_grid]
        scored = []
        for i, ws in enumerate(wstarts):
            for j, lam in enumerate(grid):
                scored.append((objective(ws[0], ws[1], lam), i, j))
        scored.sort()
        chosen = [wstarts[i] + [grid[j]] for _, i, j in scored[: cfg.refine]]
        res = optimize(
            objective, wblocks + [box], cfg, starts=chosen, n_restarts=len(chosen), lower_bound=bound
        )
        w1, w2, lam = res.x
        diagnostics = res.diagnostics() | {
            "lambda_fixed": False,
            "screened": len(scored),
            "best_screened": float(scored[0][0]),
        }
    U1, U2 = _payoffs(design, w1, w2)
    dists = stationary_from_responses(*responses_from_payoffs(U1, U2, lam[0], lam[1]))
    return LbrMlEstimate(
        w1=w1,
        w2=w2,
        nll=res.fun,
        fitted_distribution=pooled(design, dists),
        context_distributions=dists,
        contexts=design.contexts,
        empirical_nll=empirical_nll(design.counts),
        diagnostics=diagnostics,
        lam=np.asarray(lam, dtype=float),
    )


# -- ICE -----------------------------------------------------------------------


def ice_objective(design: Design, floor: float = 1e-12):
    freq = design.frequencies()
    share = design.counts.sum(axis=1) / design.T

    def objective(w1, w2):
        U1, U2 = _payoffs(design, w1, w2)
        _, codes = vertices_from_payoffs(U1, U2)
        if np.any(codes > 1):
            return _infeasible_value(design, floor, U1, U2)
        values = np.einsum("kjl,kl->kj", constraint_matrix(U1, U2), freq)
        scale = np.abs(payoff_differences(U1, U2)).max(axis=-1)
        hinge = np.maximum(0.0, -values).sum(axis=-1) / scale
        return float(share @ hinge)

    return objective


def fit_ice(d: Dataset, features: Features, cfg: FitConfig = FitConfig()) -> IceEstimate:
    """Weights under which the empirical distribution is closest to a CE.

    Minimises the scale-free total hinge violation of the CE inequalities
    evaluated at the empirical frequencies; predictions are the
    maximum-entropy CE of the fitted game.
    """
    design = make_design(d, features)
    d1, d2 = design.dims
    objective = ice_objective(design, cfg.floor)
    w0 = _weight_start(cfg)
    try:
        res = optimize(objective, [Simplex(d1), Simplex(d2)], cfg, starts=[w0] if w0 else [], lower_bound=0.0)
    except OptimizationError as exc:
        raise FitError(str(exc), exc.diagnostics) from None
    w1, w2 = res.x
    U1, U2 = _payoffs(design, w1, w2)
    _, codes = vertices_from_payoffs(U1, U2)
    if np.any(codes > 1):
        raise FitError("no (anti-)coordination weights found across restarts", res.diagnostics())
    C = constraint_matrix(U1, U2)
    dists = np.array([max_entropy_ce_from_constraints(c) for c in C])
    return IceEstimate(
        w1=w1,
        w2=w2,
        nll=nll(dists, design.counts, cfg.floor),
        fitted_distribution=pooled(design, dists),
        context_distributions=dists,
        contexts=design.contexts,
        empirical_nll=empirical_nll(design.counts),
        diagnostics=res.diagnostics(),
        violation=res.fun,
    )


FITTERS = {"ce-ml": fit_ce_ml, "lbr-ml": fit_lbr_ml, "ice": fit_ice}
