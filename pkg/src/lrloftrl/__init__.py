"""Lifted log-regularized optimistic FTRL for convex games."""
from .dynamics import RunTrace, external_regret, lifted_regret, make_learners, path_length, run_self_play
from .games import (GameInstance, build_cournot, build_from_spec, build_kuhn, build_normal_form,
                    matching_pennies, recommended_learning_rate)
from .learner import LrlOftrl, ProtocolError, lift_utility
from .solver import ConvergenceError, LiftedPoint, cold_start, fw_newton, prox_newton

__all__ = [
    "ConvergenceError", "GameInstance", "LiftedPoint", "LrlOftrl", "ProtocolError", "RunTrace",
    "build_cournot", "build_from_spec", "build_kuhn", "build_normal_form", "cold_start",
    "external_regret", "fw_newton", "lift_utility", "lifted_regret", "make_learners",
    "matching_pennies", "path_length", "prox_newton", "recommended_learning_rate", "run_self_play",
]
