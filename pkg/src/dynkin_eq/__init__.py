"""Equilibrium solvers for two-player stopping games on finite Markov chains
with non-exponential discounting."""

from .model import (
    ConditionReport,
    DiscountFunction,
    HorizonError,
    NumericsConfig,
    OrderingError,
    PlayerSpec,
    Scenario,
    ScenarioError,
    SizeGuardError,
    StateSpace,
    TransitionKernel,
    ValidationReport,
    check_supermartingale,
    load_scenario,
    scenario_to_document,
    tail_bound,
    validate,
)
from .valuation import (
    StoppingPolicy,
    ValueTable,
    constrained_value,
    constrained_values,
    enumerate_value,
    equilibrium_value,
    equilibrium_values,
    immediate_value,
    immediate_values,
    joint_value,
    joint_values,
    mc_estimate,
)
from .equilibrium import (
    AlternatingOutcome,
    Classification,
    GammaTrace,
    alternate,
    enumerate_intra,
    gamma,
    is_intra_equilibrium,
    is_soft,
    phi,
    theta,
    verify,
)
from .negotiation import (
    NegotiationParams,
    NegotiationReport,
    alpha1,
    build_negotiation,
    first_passage_mc,
    solve_negotiation,
    y_star,
)
from .gallery import Fixture, build_fixture, run_fixture

__version__ = "0.1.0"

__all__ = [
    "AlternatingOutcome",
    "Classification",
    "ConditionReport",
    "DiscountFunction",
    "Fixture",
    "GammaTrace",
    "HorizonError",
    "NegotiationParams",
    "NegotiationReport",
    "NumericsConfig",
    "OrderingError",
    "PlayerSpec",
    "Scenario",
    "ScenarioError",
    "SizeGuardError",
    "StateSpace",
    "StoppingPolicy",
    "TransitionKernel",
    "ValidationReport",
    "ValueTable",
    "alpha1",
    "alternate",
    "build_fixture",
    "build_negotiation",
    "check_supermartingale",
    "constrained_value",
    "constrained_values",
    "enumerate_intra",
    "enumerate_value",
    "equilibrium_value",
    "equilibrium_values",
    "first_passage_mc",
    "gamma",
    "immediate_value",
    "immediate_values",
    "is_intra_equilibrium",
    "is_soft",
    "joint_value",
    "joint_values",
    "load_scenario",
    "mc_estimate",
    "phi",
    "run_fixture",
    "scenario_to_document",
    "solve_negotiation",
    "tail_bound",
    "theta",
    "validate",
    "verify",
    "y_star",
]
