"""Built-in worked fixtures with machine-checkable expected outcomes.

Three small games exercise the solver end to end:

  countable    an escalation chain where the alternating procedure climbs
               one state per round and ends at (everything, nothing), which
               the exhaustive check certifies as mutually optimal;
  extended     the same chain plus two satellite states; the procedure ends
               at a mutually stable pair that the exhaustive check rejects
               as optimal (one player's region is strictly dominated at a
               witness state);
  three-state  a game violating the discounted-g drift condition, with no
               mutually stable pair at all: every start cycles.

Builders validate their parameter constraints numerically and fail loudly
rather than adjust anything. Fixtures are deterministic: the same parameters
produce byte-identical scenario documents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from . import equilibrium, model
from .model import (
    DiscountFunction,
    NumericsConfig,
    PlayerSpec,
    Scenario,
    StateSpace,
    TransitionKernel,
)
from .valuation import StoppingPolicy


class FixtureConstraintError(ValueError):
    """A fixture parameter violates the constraints its outcomes rely on."""


@dataclass(frozen=True)
class Expectation:
    """One checkable claim about a fixture: an operation, its arguments, and
    the value it must produce."""

    op: str
    args: dict[str, Any]
    expect: Any
    note: str = ""


@dataclass(frozen=True)
class Fixture:
    name: str
    scenario: Scenario
    expected: tuple[Expectation, ...]
    provenance: str


@dataclass
class AssertionResult:
    expectation: Expectation
    passed: bool
    got: Any

    def describe(self) -> str:
        status = "pass" if self.passed else "FAIL"
        head = f"[{status}] {self.expectation.op}"
        if self.expectation.note:
            head += f" ({self.expectation.note})"
        if not self.passed:
            head += f": expected {self.expectation.expect!r}, got {self.got!r}"
        return head


# ---------------------------------------------------------------------------
# expectation evaluation
# ---------------------------------------------------------------------------


def _policy(s: Scenario, labels: Sequence[str]) -> StoppingPolicy:
    return StoppingPolicy.from_labels(s, labels)


def _labels(s: Scenario, policy: StoppingPolicy) -> list[str]:
    return policy.labels(s)


def evaluate_expectation(s: Scenario, e: Expectation) -> AssertionResult:
    """Run one expectation against the fixture's scenario."""
    a = e.args
    if e.op == "gamma":
        got = _labels(s, equilibrium.gamma(s, a["player"], _policy(s, a["other"])).fixed_point)
        return AssertionResult(e, got == sorted(e.expect, key=s.states.resolve), got)
    if e.op == "phi":
        got = _labels(
            s, equilibrium.phi(s, a["player"], _policy(s, a["current"]), _policy(s, a["other"]))
        )
        return AssertionResult(e, got == sorted(e.expect, key=s.states.resolve), got)
    if e.op == "enumerate_intra":
        got = [
            _labels(s, p) for p in equilibrium.enumerate_intra(s, a["player"], _policy(s, a["other"]))
        ]
        want = [sorted(w, key=s.states.resolve) for w in e.expect]
        return AssertionResult(e, sorted(map(tuple, got)) == sorted(map(tuple, want)), got)
    if e.op == "enumerate_intra_contains":
        got = [
            _labels(s, p) for p in equilibrium.enumerate_intra(s, a["player"], _policy(s, a["other"]))
        ]
        want = [sorted(w, key=s.states.resolve) for w in e.expect]
        return AssertionResult(e, all(w in got for w in want), got)
    if e.op == "alternate_pairs":
        out = equilibrium.alternate(
            s, start=_policy(s, a.get("start", [])), first_mover=a.get("first_mover", 2), classify=False
        )
        got = [( _labels(s, S), _labels(s, T)) for S, T in out.pairs]
        want = [
            (sorted(S, key=s.states.resolve), sorted(T, key=s.states.resolve)) for S, T in e.expect
        ]
        return AssertionResult(e, got[: len(want)] == want, got)
    if e.op == "alternate_terminal":
        out = equilibrium.alternate(
            s, start=_policy(s, a.get("start", [])), first_mover=a.get("first_mover", 2), classify=False
        )
        if out.terminal != "fixed-point":
            return AssertionResult(e, False, out.terminal)
        got = (_labels(s, out.fixed_point[0]), _labels(s, out.fixed_point[1]))
        want = (
            sorted(e.expect[0], key=s.states.resolve),
            sorted(e.expect[1], key=s.states.resolve),
        )
        return AssertionResult(e, got == want, got)
    if e.op == "alternate_cycle":
        out = equilibrium.alternate(
            s, start=_policy(s, a.get("start", [])), first_mover=a.get("first_mover", 2), classify=False
        )
        if out.terminal != "cycle":
            return AssertionResult(e, False, out.terminal)
        nodes = [tuple(_labels(s, p)) for _, p in out.policies]
        want_nodes = [tuple(sorted(w, key=s.states.resolve)) for w in e.expect["nodes"]]
        cyc = {
            (tuple(_labels(s, S)), tuple(_labels(s, T))) for S, T in out.cycle
        }
        want_cyc = {
            (
                tuple(sorted(S, key=s.states.resolve)),
                tuple(sorted(T, key=s.states.resolve)),
            )
            for S, T in e.expect["cycle"]
        }
        ok = nodes[: len(want_nodes)] == want_nodes and cyc == want_cyc
        return AssertionResult(e, ok, {"nodes": nodes, "cycle": sorted(cyc)})
    if e.op == "verify":
        got = equilibrium.verify(
            s, _policy(s, a["S"]), _policy(s, a["T"]), exhaustive=a.get("exhaustive", False)
        )
        ok = got.verdict == e.expect.get("verdict", got.verdict)
        if "witness_state" in e.expect:
            ok = ok and got.witness_state == e.expect["witness_state"]
        if "witness_player" in e.expect:
            ok = ok and got.witness_player == e.expect["witness_player"]
        return AssertionResult(e, ok, {"verdict": got.verdict, "witness": got.witness_state})
    if e.op == "soft_sweep":
        n = s.n
        total = 1 << n
        codes = np.arange(total, dtype=np.uint64)
        masks = ((codes[:, None] >> np.arange(n, dtype=np.uint64)) & 1).astype(bool)
        S_rows = np.repeat(masks, total, axis=0)
        T_rows = np.tile(masks, (total, 1))
        fixed1 = np.all(equilibrium._theta_masks(s, 1, S_rows, T_rows) == S_rows, axis=1)
        fixed2 = np.all(equilibrium._theta_masks(s, 2, T_rows, S_rows) == T_rows, axis=1)
        count = int(np.sum(fixed1 & fixed2))
        return AssertionResult(e, count == e.expect, count)
    if e.op == "check_supermartingale":
        rep = model.check_supermartingale(s, a["player"])
        ok = rep.passed == e.expect["passed"]
        if "worst_state" in e.expect:
            ok = ok and rep.worst_state == e.expect["worst_state"]
        return AssertionResult(e, ok, {"passed": rep.passed, "worst_state": rep.worst_state})
    raise ValueError(f"unknown expectation op {e.op!r}")


def run_fixture(fixture: Fixture) -> list[AssertionResult]:
    return [evaluate_expectation(fixture.scenario, e) for e in fixture.expected]


# ---------------------------------------------------------------------------
# countable escalation chain
# ---------------------------------------------------------------------------


def _chain_states(n_states: int) -> tuple[str, ...]:
    return tuple(f"x{k}" for k in range(n_states))


def _chain_kernel(n_states: int, eps: float) -> np.ndarray:
    """Descent chain x_{k+1} -> x_k, with x0 looping and leaking up to x1.

    The top state descends like every other interior state, so paths started
    anywhere behave exactly as on the unbounded chain (nothing ever climbs
    past x1); the truncation only limits which states exist.
    """
    P = np.zeros((n_states, n_states))
    P[0, 0] = 1 - eps
    P[0, 1] = eps
    for k in range(1, n_states):
        P[k, k - 1] = 1.0
    return P


def example_countable(
    eps: float = 0.05,
    L: float = 1.5,
    M: float = 2.5,
    beta1: float = 1.0,
    beta2: float = 1.0,
    n_states: int = 13,
    eta: float = 0.01,
) -> Fixture:
    """Escalation chain in which one player's region climbs one state per
    round while the other's retreats, ending at (everything, nothing)."""
    if n_states < 6:
        raise FixtureConstraintError("need at least 6 chain states")
    if not 0 <= eps < 1:
        raise FixtureConstraintError("eps must lie in [0, 1)")
    if L <= 1 or M <= 1:
        raise FixtureConstraintError("L and M must exceed 1")
    d2 = DiscountFunction(family="hyperbolic", beta=beta2)
    if not d2.value(2) < 1 / M < d2.value(1):
        raise FixtureConstraintError(
            f"need delta2(2) < 1/M < delta2(1); got {d2.value(2):.4g}, {1 / M:.4g}, {d2.value(1):.4g}"
        )
    d1 = DiscountFunction(family="hyperbolic", beta=beta1)
    # stopping at the bottom state must strictly beat waiting out the leak
    leak_value = (1 - eps) * d1.value(1) + eps * L / (1 + eps)
    if leak_value >= 1 - 4 * eta:
        raise FixtureConstraintError(
            f"eps = {eps} is too large: bottom-state stop margin {1 - leak_value:.4g} is too thin"
        )

    states = StateSpace(labels=_chain_states(n_states))
    kernel = TransitionKernel(rows=_chain_kernel(n_states, eps))
    f1 = np.ones(n_states)
    g1 = np.full(n_states, L)
    f2 = np.ones(n_states)
    f2[0] = 0.0
    g2 = np.full(n_states, M)
    maxpay = max(L, M)
    horizon = _hyperbolic_horizon(maxpay, eta, min(beta1, beta2))
    numerics = NumericsConfig(horizon=horizon, comparison_margin=eta, tail_tolerance=eta / 2)
    scenario = Scenario(
        states=states,
        kernel=kernel,
        players=(
            PlayerSpec(f=f1, g=g1, h=(f1 + g1) / 2, discount=d1),
            PlayerSpec(f=f2, g=g2, h=(f2 + g2) / 2, discount=d2),
        ),
        numerics=numerics,
    )

    labels = states.labels
    all_states = list(labels)
    table = []
    for k in range(10):
        table.append((list(labels[:k]), list(labels[k + 1 :])))
    expected = (
        Expectation("phi", {"player": 2, "current": [], "other": []}, list(labels[1:]),
                    note="first growth step claims every state that pays"),
        Expectation("alternate_pairs", {}, table, note="one-state-per-round escalation"),
        Expectation("alternate_terminal", {}, (all_states, []), note="stopper takes everything"),
        Expectation("gamma", {"player": 2, "other": all_states}, [],
                    note="no profitable reply to the full region"),
        Expectation("verify", {"S": all_states, "T": [], "exhaustive": True},
                    {"verdict": "sharp-verified"}),
    )
    return Fixture(
        name="countable",
        scenario=scenario,
        expected=expected,
        provenance="builtin escalation chain fixture",
    )


def _hyperbolic_horizon(maxpay: float, eta: float, beta: float) -> int:
    """Smallest horizon keeping the hyperbolic tail bound under eta/2."""
    return int(math.ceil((2 * maxpay / eta - 1) / beta)) + 1


# ---------------------------------------------------------------------------
# extended chain with satellite states
# ---------------------------------------------------------------------------


def example_extended(
    eps: float = 0.05,
    L: float = 1.5,
    M: float = 2.5,
    beta1: float = 1.0,
    beta2: float = 1.0,
    f2z: float = 0.7,
    pdist: Sequence[float] | None = None,
    n_states: int = 12,
    eta: float = 0.005,
) -> Fixture:
    """Chain plus satellites y -> chain (distribution pdist) and z -> y.

    Player 2's payoff at y is calibrated to the knife edge where keeping y
    is weakly stable but never strictly attractive, and the payoff at z is
    placed inside the window that makes the terminal pair stable yet
    strictly dominated at z. The satellites never pay player 1, so they stay
    out of player 1's replies.
    """
    if n_states < 6:
        raise FixtureConstraintError("need at least 6 chain states")
    if n_states + 2 > equilibrium.ENUM_MAX_STATES:
        raise FixtureConstraintError(
            f"exhaustive verification caps the fixture at {equilibrium.ENUM_MAX_STATES} states"
        )
    d2 = DiscountFunction(family="hyperbolic", beta=beta2)
    d1 = DiscountFunction(family="hyperbolic", beta=beta1)
    if not d2.value(2) < 1 / M < d2.value(1):
        raise FixtureConstraintError("need delta2(2) < 1/M < delta2(1)")
    if not d2.value(1) ** 2 < d2.value(2):
        raise FixtureConstraintError("need delta2(1)^2 < delta2(2)")
    lo = max(M * d2.value(1) ** 2, d2.value(2))
    hi = M * d2.value(2)
    if not lo < f2z < hi:
        raise FixtureConstraintError(f"f2z must lie in ({lo:.4g}, {hi:.4g}); got {f2z}")
    if pdist is None:
        pdist = np.full(n_states, 1.0 / n_states)
    pdist = np.asarray(pdist, dtype=np.float64)
    if pdist.shape != (n_states,) or np.any(pdist <= 0) or abs(pdist.sum() - 1) > 1e-9:
        raise FixtureConstraintError("pdist must be a positive distribution over the chain states")
    leak_value = (1 - eps) * d1.value(1) + eps * L / (1 + eps)
    if leak_value >= 1 - 4 * eta:
        raise FixtureConstraintError(f"eps = {eps} is too large for the bottom-state stop margin")
    # the thinnest strict decision: y must stay attractive while exactly one
    # chain state separates the two regions
    y_gap = float(pdist[-1]) * (M * d2.value(1) - M * d2.value(2))
    if y_gap <= 3 * eta:
        raise FixtureConstraintError(
            f"pdist tail weight {pdist[-1]:.4g} leaves margin {y_gap:.4g} <= 3 eta; "
            "flatten pdist or lower eta"
        )

    n = n_states + 2
    labels = _chain_states(n_states) + ("y", "z")
    P = np.zeros((n, n))
    P[:n_states, :n_states] = _chain_kernel(n_states, eps)
    y_idx, z_idx = n_states, n_states + 1
    P[y_idx, :n_states] = pdist
    P[z_idx, y_idx] = 1.0

    f1 = np.concatenate([np.ones(n_states), [0.0, 0.0]])
    g1 = np.full(n, L)
    f2 = np.concatenate([np.ones(n_states), [M * d2.value(1), f2z]])
    f2[0] = 0.0
    g2 = np.full(n, M)
    maxpay = max(L, M)
    horizon = _hyperbolic_horizon(maxpay, eta, min(beta1, beta2))
    numerics = NumericsConfig(horizon=horizon, comparison_margin=eta, tail_tolerance=eta / 2)
    scenario = Scenario(
        states=StateSpace(labels=labels),
        kernel=TransitionKernel(rows=P),
        players=(
            PlayerSpec(f=f1, g=g1, h=(f1 + g1) / 2, discount=d1),
            PlayerSpec(f=f2, g=g2, h=(f2 + g2) / 2, discount=d2),
        ),
        numerics=numerics,
    )

    chain = list(labels[:n_states])
    expected = (
        Expectation("alternate_terminal", {}, (chain, ["y", "z"]),
                    note="satellites survive as the stable rim"),
        Expectation("gamma", {"player": 2, "other": chain}, [],
                    note="the best reply to the full chain drops the satellites"),
        Expectation(
            "verify",
            {"S": chain, "T": ["y", "z"], "exhaustive": True},
            {"verdict": "soft-not-sharp", "witness_state": "z", "witness_player": 2},
        ),
        Expectation("enumerate_intra_contains", {"player": 2, "other": chain}, [[], ["y", "z"]],
                    note="both the empty reply and the rim are stable"),
    )
    return Fixture(
        name="extended",
        scenario=scenario,
        expected=expected,
        provenance="builtin escalation chain with satellite states",
    )


# ---------------------------------------------------------------------------
# three-state cycling game
# ---------------------------------------------------------------------------


def example_three_state(
    M: float = 100.0,
    q_ab: float = 0.5,
    q_b: Sequence[float] = (1 / 3, 1 / 3, 1 / 3),
    q_c: Sequence[float] = (1 / 3, 1 / 3, 1 / 3),
    beta: float = 1.0,
    eta: float = 0.05,
    verify_build: bool = True,
) -> Fixture:
    """Rock-paper-scissors-flavored stopping game with no stable pair.

    The payoff scales 1 : M : M^2 chase each other around the three states,
    the discounted-g drift check fails at c, and every alternating start
    falls into the same two-round loop.
    """
    if M <= 2:
        raise FixtureConstraintError("M must exceed 2")
    if not 0 < q_ab < 1:
        raise FixtureConstraintError("q_ab must lie in (0, 1)")
    q_b = np.asarray(q_b, dtype=np.float64)
    q_c = np.asarray(q_c, dtype=np.float64)
    for name, row in (("q_b", q_b), ("q_c", q_c)):
        if row.shape != (3,) or np.any(row <= 0) or abs(row.sum() - 1) > 1e-9:
            raise FixtureConstraintError(f"{name} must be a positive distribution over a, b, c")

    P = np.array([[1 - q_ab, q_ab, 0.0], q_b, q_c])
    f1 = np.array([1.0, M, 1.0])
    g1 = np.array([M * M, M + 1, 2.0])
    f2 = np.array([M, 1.0, M * M])
    g2 = np.array([M + 1, 2.0, M * M + 1])
    d = DiscountFunction(family="hyperbolic", beta=beta)
    maxpay = M * M + 1
    horizon = _hyperbolic_horizon(maxpay, eta, beta)
    numerics = NumericsConfig(horizon=horizon, comparison_margin=eta, tail_tolerance=eta / 2)
    scenario = Scenario(
        states=StateSpace(labels=("a", "b", "c")),
        kernel=TransitionKernel(rows=P),
        players=(
            PlayerSpec(f=f1, g=g1, h=(f1 + g1) / 2, discount=d),
            PlayerSpec(f=f2, g=g2, h=(f2 + g2) / 2, discount=d),
        ),
        numerics=numerics,
    )

    reply_table = {
        (2, ("a", "b", "c")): [],
        (2, ("a", "c")): [],
        (2, ("c",)): [],
        (2, ("a", "b")): ["c"],
        (2, ("a",)): ["c"],
        (2, ()): ["c"],
        (2, ("b", "c")): ["a"],
        (2, ("b",)): ["a", "c"],
        (1, ()): ["b"],
        (1, ("c",)): ["b"],
        (1, ("a",)): [],
        (1, ("a", "c")): [],
    }
    if verify_build:
        for (player, other), want in reply_table.items():
            got = equilibrium.gamma(scenario, player, _policy(scenario, other)).fixed_point
            if got != _policy(scenario, want):
                raise FixtureConstraintError(
                    f"M = {M} is too small: best reply of player {player} to {set(other) or '{}'} "
                    f"came out {set(got.labels(scenario)) or '{}'}, needs a larger M"
                )

    cycle = [([], ["c"]), (["b"], ["a", "c"])]
    loops = {
        (): [[], ["c"], ["b"], ["a", "c"], []],
        ("a",): [["a"], ["c"], ["b"], ["a", "c"], [], ["c"]],
        ("b",): [["b"], ["a", "c"], [], ["c"], ["b"]],
        ("c",): [["c"], [], ["b"], ["a", "c"], [], ["c"], ["b"]],
        ("a", "b"): [["a", "b"], ["c"], ["b"], ["a", "c"], [], ["c"]],
        ("a", "c"): [["a", "c"], [], ["b"], ["a", "c"], [], ["c"], ["b"]],
        ("b", "c"): [["b", "c"], ["a"], [], ["c"], ["b"], ["a", "c"], []],
        ("a", "b", "c"): [["a", "b", "c"], [], ["b"], ["a", "c"], [], ["c"], ["b"]],
    }
    expected: list[Expectation] = [
        Expectation("gamma", {"player": p, "other": list(other)}, want)
        for (p, other), want in reply_table.items()
    ]
    expected += [
        Expectation("enumerate_intra", {"player": 2, "other": ["b"]}, [["a", "c"]],
                    note="unique stable reply"),
        Expectation("enumerate_intra", {"player": 2, "other": []}, [["c"]]),
        Expectation("enumerate_intra", {"player": 2, "other": ["a", "b", "c"]}, [[]]),
        Expectation("enumerate_intra", {"player": 1, "other": []}, [["b"]]),
        Expectation("enumerate_intra", {"player": 1, "other": ["c"]}, [["b"]]),
        Expectation("check_supermartingale", {"player": 1},
                    {"passed": False, "worst_state": "c"},
                    note="drift condition fails where the huge reward looms"),
        Expectation("soft_sweep", {}, 0, note="no stable pair among all 64"),
    ]
    expected += [
        Expectation("alternate_cycle", {"start": list(start)},
                    {"nodes": nodes, "cycle": cycle})
        for start, nodes in loops.items()
    ]
    return Fixture(
        name="three-state",
        scenario=scenario,
        expected=tuple(expected),
        provenance="builtin three-state cycling fixture",
    )


FIXTURES = {
    "countable": example_countable,
    "extended": example_extended,
    "three-state": example_three_state,
}


def build_fixture(name: str, **kwargs) -> Fixture:
    if name not in FIXTURES:
        raise ValueError(f"unknown fixture {name!r}; available: {sorted(FIXTURES)}")
    return FIXTURES[name](**kwargs)
