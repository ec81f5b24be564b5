"""Observed joint-action datasets and their JSONL/CSV persistence."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DatasetParseError(ValueError):
    pass


@dataclass(frozen=True)
class KinematicState:
    """Speeds (m/s) and distances to the conflict point (m) of both vehicles."""

    v1: float
    v2: float
    d1: float
    d2: float

    def __post_init__(self):
        if min(self.v1, self.v2, self.d1, self.d2) <= 0:
            raise ValueError(f"speeds and distances must be positive: {self}")

    @property
    def tau1(self) -> float:
        return self.d1 / self.v1

    @property
    def tau2(self) -> float:
        return self.d2 / self.v2

    @property
    def delta(self) -> float:
        return self.tau2 - self.tau1

    def swapped(self) -> KinematicState:
        return KinematicState(self.v2, self.v1, self.d2, self.d1)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Joint actions a^(t) in 1..4, t = 1..T, with optional per-record context.

    ``tau`` holds (tau1, tau2) per record; ``recommendations`` holds the joint
    action a correlation device recommended, when one was used.
    """

    actions: np.ndarray
    tau: np.ndarray | None = None
    recommendations: np.ndarray | None = None

    def __post_init__(self):
        actions = np.array(self.actions, dtype=np.int64).reshape(-1)
        if actions.size and (actions.min() < 1 or actions.max() > 4):
            raise ValueError("joint actions must be in 1..4")
        actions.setflags(write=False)
        object.__setattr__(self, "actions", actions)
        if self.tau is not None:
            tau = np.array(self.tau, dtype=float).reshape(-1, 2)
            if len(tau) != len(actions):
                raise ValueError("tau must have one row per record")
            tau.setflags(write=False)
            object.__setattr__(self, "tau", tau)
        if self.recommendations is not None:
            rec = np.array(self.recommendations, dtype=np.int64).reshape(-1)
            if len(rec) != len(actions):
                raise ValueError("recommendations must have one entry per record")
            rec.setflags(write=False)
            object.__setattr__(self, "recommendations", rec)

    def __len__(self) -> int:
        return len(self.actions)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return all(
            (a is None and b is None) or (a is not None and b is not None and np.array_equal(a, b))
            for a, b in (
                (self.actions, other.actions),
                (self.tau, other.tau),
                (self.recommendations, other.recommendations),
            )
        )

    @property
    def delta(self) -> np.ndarray | None:
        return None if self.tau is None else self.tau[:, 1] - self.tau[:, 0]

    def frequencies(self) -> np.ndarray:
        return counts(self) / len(self)

    def subset(self, idx) -> Dataset:
        idx = np.asarray(idx)
        return Dataset(
            self.actions[idx],
            None if self.tau is None else self.tau[idx],
            None if self.recommendations is None else self.recommendations[idx],
        )

    # -- persistence ---------------------------------------------------------

    def records(self):
        delta = self.delta
        for i, a in enumerate(self.actions):
            rec = {"t": i + 1, "a1": 1 + (a - 1) // 2, "a2": 1 + (a - 1) % 2}
            if self.tau is not None:
                rec["tau1"] = float(self.tau[i, 0])
                rec["tau2"] = float(self.tau[i, 1])
                rec["delta"] = float(delta[i])
            if self.recommendations is not None:
                r = int(self.recommendations[i])
                rec["rec1"] = 1 + (r - 1) // 2
                rec["rec2"] = 1 + (r - 1) % 2
            yield {k: (int(v) if isinstance(v, np.integer) else v) for k, v in rec.items()}

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.records():
                fh.write(json.dumps(rec) + "\n")

    def to_csv(self, path) -> None:
        fields = ["t", "a1", "a2"]
        if self.tau is not None:
            fields += ["tau1", "tau2", "delta"]
        if self.recommendations is not None:
            fields += ["rec1", "rec2"]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            writer.writerows(self.records())

    @classmethod
    def from_jsonl(cls, path) -> Dataset:
        path = Path(path)
        actions, taus, recs = [], [], []
        with open(path) as fh:
            lines = [ln for ln in enumerate(fh, start=1) if ln[1].strip()]
        for lineno, line in lines:
            where = f"{path}:{lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetParseError(f"{where}: invalid JSON ({exc.msg})") from None
            a1, a2 = rec.get("a1"), rec.get("a2")
            if a1 not in (1, 2) or a2 not in (1, 2) or isinstance(a1, bool) or isinstance(a2, bool):
                raise DatasetParseError(f"{where}: bad action index (a1={a1!r}, a2={a2!r})")
            if rec.get("t") != len(actions) + 1:
                raise DatasetParseError(f"{where}: expected t={len(actions) + 1}, got {rec.get('t')!r}")
            actions.append(2 * (a1 - 1) + a2)
            if "tau1" in rec or "tau2" in rec:
                try:
                    taus.append((float(rec["tau1"]), float(rec["tau2"])))
                except (KeyError, TypeError, ValueError):
                    raise DatasetParseError(f"{where}: tau1 and tau2 must both be numbers") from None
            if "rec1" in rec:
                recs.append(2 * (rec["rec1"] - 1) + rec["rec2"])
        if not actions:
            raise DatasetParseError(f"{path}: dataset is empty")
        for name, extra in (("tau", taus), ("recommendation", recs)):
            if extra and len(extra) != len(actions):
                raise DatasetParseError(f"{path}: {name} fields present on only some records")
        return cls(actions, taus or None, recs or None)


def counts(d: Dataset) -> np.ndarray:
    """Per-action counts (n1, n2, n3, n4)."""
    if len(d) == 0:
        raise ValueError("dataset is empty")
    return np.bincount(d.actions - 1, minlength=4).astype(np.int64)
