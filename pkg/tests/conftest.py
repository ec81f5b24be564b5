import sys

import numpy as np
import pytest

from invgame.game import FeatureMap, Game2x2, build_game

GC_U1 = np.array([4.0, 1.0, 2.0, 3.0])
GC_U2 = np.array([3.0, 1.0, 2.0, 4.0])


def random_strict_game(rng, kind: str) -> Game2x2:
    """Random payoffs with all four margins strictly positive (coord) or negative (anti)."""
    sign = 1.0 if kind == "coord" else -1.0
    m = sign * rng.uniform(0.05, 5.0, 4)
    base = rng.normal(size=4)
    u1 = np.array([base[2] + m[0], base[0], base[2], base[0] + m[1]])
    u2 = np.array([base[1] + m[2], base[1], base[3], base[3] + m[3]])
    return Game2x2.from_payoffs(u1, u2)


@pytest.fixture
def gc() -> Game2x2:
    """Coordination game built from one-hot features scaled by 10."""
    f = FeatureMap(10.0 * np.eye(4), 10.0 * np.eye(4))
    return build_game(f, GC_U1 / 10.0, GC_U2 / 10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
