"""Inverse learning of utility weights in two-player, two-action games."""

from .data import Dataset, KinematicState, counts
from .equilibrium import alpha_beta, ce_vertices, is_ce, max_entropy_ce, mixture_distribution
from .estimation import fit_ce_ml, fit_ice, fit_lbr_ml, nll
from .game import FeatureMap, Game2x2, GameClass, build_game, classify_game, payoff
from .lbr import stationary_closed_form, stationary_power_iteration, transition_matrix
from .optimize import FitConfig

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "FeatureMap",
    "FitConfig",
    "Game2x2",
    "GameClass",
    "KinematicState",
    "alpha_beta",
    "build_game",
    "ce_vertices",
    "classify_game",
    "counts",
    "fit_ce_ml",
    "fit_ice",
    "fit_lbr_ml",
    "is_ce",
    "max_entropy_ce",
    "mixture_distribution",
    "nll",
    "payoff",
    "stationary_closed_form",
    "stationary_power_iteration",
    "transition_matrix",
]
