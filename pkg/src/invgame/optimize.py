"""Multi-start Nelder-Mead over products of simplices and boxes."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


@dataclass(frozen=True)
class FitConfig:
    restarts: int = 32
    max_iter: int = 2000
    seed: int = 42
    lambda_grid: tuple[float, ...] = (0.5, 1.0, 2.0, 3.0)
    lambda_max: float = 10.0
    floor: float = 1e-12
    # LBR-ML: number of screened (lambda, w) candidates that get refined
    refine: int = 8
    # LBR-ML: hold lambda fixed instead of estimating it
    fixed_lambda: tuple[float, float] | None = None
    # starting point for the first restart, as [w1, w2]
    w_init: tuple[tuple[float, ...], tuple[float, ...]] | None = None

    def __post_init__(self):
        if self.restarts < 1 or self.max_iter < 1:
            raise ValueError("restarts and max_iter must be positive")
        if not 0 < self.floor < 1:
            raise ValueError("floor must lie in (0, 1)")
        if self.lambda_max <= 0 or any(not 0 <= g <= self.lambda_max for g in self.lambda_grid):
            raise ValueError("lambda grid must lie in [0, lambda_max]")
        object.__setattr__(self, "lambda_grid", tuple(float(g) for g in self.lambda_grid))
        if self.fixed_lambda is not None:
            object.__setattr__(self, "fixed_lambda", tuple(float(v) for v in self.fixed_lambda))
        if self.w_init is not None:
            object.__setattr__(self, "w_init", tuple(tuple(float(v) for v in w) for w in self.w_init))

    @classmethod
    def from_dict(cls, d: dict) -> FitConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown fit config keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("lambda_grid", "fixed_lambda"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def load(cls, path) -> FitConfig:
        path = Path(path)
        text = path.read_text()
        data = tomllib.loads(text) if path.suffix == ".toml" else json.loads(text)
        return cls.from_dict(data.get("fit", data))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Simplex:
    dim: int

    @property
    def n_free(self) -> int:
        return self.dim - 1

    def to_free(self, x) -> np.ndarray:
        x = np.clip(np.asarray(x, dtype=float), 1e-12, None)
        z = np.log(x)
        return z[:-1] - z[-1]

    def from_free(self, z) -> np.ndarray:
        full = np.zeros(self.dim)
        full[:-1] = z
        e = np.exp(full - full.max())
        return e / e.sum()

    def center(self) -> np.ndarray:
        return np.full(self.dim, 1.0 / self.dim)

    def sample(self, rng) -> np.ndarray:
        return rng.dirichlet(np.ones(self.dim))


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __init__(self, lo, hi):
        object.__setattr__(self, "lo", np.atleast_1d(np.asarray(lo, dtype=float)))
        object.__setattr__(self, "hi", np.atleast_1d(np.asarray(hi, dtype=float)))
        if self.lo.shape != self.hi.shape or np.any(self.hi <= self.lo):
            raise ValueError("box needs lo < hi of equal shape")

    @property
    def n_free(self) -> int:
        return len(self.lo)

    def to_free(self, x) -> np.ndarray:
        frac = (np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo)
        return logit(np.clip(frac, 1e-9, 1 - 1e-9))

    def from_free(self, z) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * expit(z)

    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def sample(self, rng) -> np.ndarray:
        return rng.uniform(self.lo, self.hi)


Block = Simplex | Box


class _BoundReached(Exception):
    def __init__(self, z, value):
        self.z = z
        self.value = value


class OptimizationError(RuntimeError):
    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass
class OptimizeResult:
    x: list[np.ndarray]
    fun: float
    converged: bool
    n_restarts: int
    best_restart: int
    trace: list[float] = field(default_factory=list)
    start_values: list[float] = field(default_factory=list)

    def diagnostics(self) -> dict:
        return {
            "restarts": self.n_restarts,
            "best_restart": self.best_restart,
            "converged": self.converged,
            "best_objective_trace": self.trace,
        }


def _split(z, blocks):
    out, i = [], 0
    for b in blocks:
        out.append(b.from_free(z[i : i + b.n_free]))
        i += b.n_free
    return out


def _join(x, blocks):
    return np.concatenate([b.to_free(v) for b, v in zip(blocks, x)]) if blocks else np.zeros(0)


def optimize(
    objective: Callable[..., float],
    blocks: Sequence[Block],
    cfg: FitConfig,
    starts: Sequence[Sequence[np.ndarray]] = (),
    n_restarts: int | None = None,
    step: float = 1.0,
    lower_bound: float | None = None,
) -> OptimizeResult:
    """Minimise objective(*block_values) from several starting points.

    Explicit ``starts`` are used first; the remaining restarts begin at the
    block centres (if no start was given) and then at random points drawn from
    ``cfg.seed``. The winner is the lowest objective, ties going to the
    earliest restart.

    ``lower_bound`` is a value the objective provably cannot go below. Once a
    restart comes within a relative 1e-10 of it, that point is kept and the
    remaining restarts are skipped, since they could at best tie.
    """
    blocks = list(blocks)
    n = sum(b.n_free for b in blocks)
    total = n_restarts if n_restarts is not None else max(cfg.restarts, len(starts))
    rng = np.random.default_rng(cfg.seed)
    points = [list(s) for s in starts][:total]
    if not points:
        points.append([b.center() for b in blocks])
    while len(points) < total:
        points.append([b.sample(rng) for b in blocks])

    reach = None if lower_bound is None else lower_bound + 1e-10 * max(1.0, abs(lower_bound))

    def f(z):
        val = objective(*_split(z, blocks))
        if not np.isfinite(val):
            return np.inf
        if reach is not None and val <= reach:
            raise _BoundReached(np.array(z), val)
        return val

    best = None
    trace, start_values = [], []
    for k, x0 in enumerate(points):
        z0 = _join(x0, blocks)
        try:
            f0 = f(z0)
        except _BoundReached as hit:
            f0 = hit.value
        start_values.append(float(f0))
        if n == 0 or (reach is not None and f0 <= reach):
            zk, fk, ok = z0, f0, True
        else:
            simplex0 = np.vstack([z0, z0 + step * np.eye(n)])
            try:
                res = minimize(
                    f,
                    z0,
                    method="Nelder-Mead",
                    options={
                        "maxiter": cfg.max_iter,
                        "maxfev": 2 * cfg.max_iter,
                        "xatol": 1e-8,
                        "fatol": 1e-10,
                        "adaptive": n > 5,
                        "initial_simplex": simplex0,
                    },
                )
                zk, fk, ok = res.x, res.fun, bool(res.success)
            except _BoundReached as hit:
                zk, fk, ok = hit.z, hit.value, True
            if f0 <= fk:  # never hand back something worse than the start
                zk, fk = z0, f0
        if best is None or fk < best[1]:
            best = (zk, fk, ok, k)
        trace.append(float(best[1]))
        if reach is not None and best[1] <= reach:
            break
    if not np.isfinite(best[1]):
        raise OptimizationError(
            "objective was non-finite at every restart",
            {"restarts": len(points), "start_values": start_values},
        )
    zb, fb, ok, kb = best
    return OptimizeResult(
        x=_split(zb, blocks),
        fun=float(fb),
        converged=ok,
        n_restarts=len(trace),
        best_restart=kb,
        trace=trace,
        start_values=start_values,
    )
