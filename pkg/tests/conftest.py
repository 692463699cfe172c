import math

import numpy as np
import pytest

from dynkin_eq.model import (
    DiscountFunction,
    NumericsConfig,
    PlayerSpec,
    Scenario,
    StateSpace,
    TransitionKernel,
)


def _horizon_for(discounts, max_payoff, eta):
    """Smallest horizon keeping every player's tail bound under eta/2."""
    target = eta / 2.0
    H = 1
    for d in discounts:
        if d.family == "exponential":
            h = math.ceil(math.log(2.2 * max_payoff / eta) / d.beta)
        elif d.family == "generalized-hyperbolic":
            h = math.ceil(((2.2 * max_payoff / eta) ** (d.beta / d.k) - 1) / d.beta)
        else:
            h = math.ceil((2.2 * max_payoff / eta - 1) / d.beta)
        H = max(H, int(h) + 1)
    for d in discounts:
        assert d.value(H) * max_payoff < target
    return H


def random_scenario(
    rng,
    max_states=6,
    min_states=2,
    eta=1e-7,
    ordering="h<=g",
    constant_g=False,
    horizon=None,
):
    """Random finite game with fast-decaying discounts.

    ordering: "free", "h<=g", or "f<=h<=g". constant_g makes the discounted-g
    drift condition hold trivially.
    """
    n = int(rng.integers(min_states, max_states + 1))
    P = rng.dirichlet(np.ones(n) * float(rng.uniform(0.4, 2.5)), size=n)
    players = []
    for _ in range(2):
        if constant_g:
            g = np.full(n, float(rng.uniform(2.0, 6.0)))
        else:
            g = rng.uniform(0.0, 5.0, n)
        if ordering == "f<=h<=g":
            h = g * rng.uniform(0.0, 1.0, n)
            f = h * rng.uniform(0.0, 1.0, n)
        elif ordering == "h<=g":
            h = g * rng.uniform(0.0, 1.0, n)
            f = rng.uniform(0.0, 4.0, n)
        else:
            h = rng.uniform(0.0, 5.0, n)
            f = rng.uniform(0.0, 4.0, n)
        if rng.random() < 0.5:
            d = DiscountFunction(family="exponential", beta=float(rng.uniform(0.5, 2.0)))
        else:
            beta = float(rng.uniform(0.5, 1.5))
            d = DiscountFunction(family="generalized-hyperbolic", beta=beta, k=10.0 * beta)
        players.append(PlayerSpec(f=f, g=g, h=h, discount=d))
    max_payoff = max(p.max_payoff() for p in players) or 1.0
    H = horizon if horizon is not None else _horizon_for([p.discount for p in players], max_payoff, eta)
    return Scenario(
        states=StateSpace(labels=tuple(f"s{k}" for k in range(n))),
        kernel=TransitionKernel(rows=P),
        players=(players[0], players[1]),
        numerics=NumericsConfig(horizon=H, comparison_margin=eta, tail_tolerance=1e9),
    )


def random_policy(rng, n):
    from dynkin_eq.valuation import StoppingPolicy

    return StoppingPolicy(n, int(rng.integers(0, 1 << n)))


@pytest.fixture(scope="session")
def countable_fixture():
    from dynkin_eq.gallery import example_countable

    return example_countable()


@pytest.fixture(scope="session")
def extended_fixture():
    from dynkin_eq.gallery import example_extended

    return example_extended()


@pytest.fixture(scope="session")
def three_state_fixture():
    from dynkin_eq.gallery import example_three_state

    return example_three_state()
