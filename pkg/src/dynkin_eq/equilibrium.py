"""Equilibrium operators, fixed-point iterations, and classification.

The single-player layer: an improving operator (theta) whose fixed points
are the policies a player's future selves will actually follow, a monotone
operator (phi) whose least fixed point (gamma) is the best such policy, and
an exhaustive enumerator used as the oracle for both.

The two-player layer: an alternating procedure in which the players take
turns replying with their gamma best responses.  On finite chains the
procedure either reaches a mutually stable pair, which it detects by testing
the current pair for stability after every half-round, or it revisits a pair
and the visit history closes a cycle.  Stopping at the first mutually stable
pair (rather than insisting the gamma responses themselves repeat) is what
preserves limits in which one player's reply inclusion is strict.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .model import CHECK_TOL, OrderingError, Scenario, SizeGuardError
from .valuation import (
    StoppingPolicy,
    constrained_values_batch,
    equilibrium_values,
    joint_values_batch,
)

ENUM_MAX_STATES = 14
SWEEP_CHUNK = 4096

Verdict = Literal["not-equilibrium", "soft", "sharp-sufficient", "sharp-verified", "soft-not-sharp"]


@dataclass(frozen=True)
class GammaTrace:
    """History of the single-player fixed-point iteration."""

    player: int
    other: StoppingPolicy
    steps: tuple[StoppingPolicy, ...]
    fixed_point: StoppingPolicy
    iterations: int


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    witness_player: int | None = None
    witness_state: str | None = None
    sufficient: bool = False
    boundary_states: tuple[str, ...] = ()


@dataclass(frozen=True)
class AlternatingOutcome:
    """Full history of the alternating procedure and how it ended."""

    start: StoppingPolicy
    first_mover: int
    pairs: tuple[tuple[StoppingPolicy, StoppingPolicy], ...]
    policies: tuple[tuple[int, StoppingPolicy], ...]
    terminal: Literal["fixed-point", "cycle"]
    fixed_point: tuple[StoppingPolicy, StoppingPolicy] | None
    cycle: tuple[tuple[StoppingPolicy, StoppingPolicy], ...] | None
    cycle_start: int | None
    classification: Classification

    @property
    def rounds(self) -> int:
        return len(self.pairs)


class IterationCapError(RuntimeError):
    """The alternating procedure exceeded its pair budget (cannot happen on
    finite chains unless cycle detection is broken)."""


# ---------------------------------------------------------------------------
# single-player operators
# ---------------------------------------------------------------------------


def _theta_masks(s: Scenario, i: int, s_masks: np.ndarray, t_masks: np.ndarray) -> np.ndarray:
    """Batched improving operator on boolean policy rows."""
    spec = s.player(i)
    eta = s.numerics.comparison_margin
    imm = np.where(t_masks, spec.h, spec.f)
    cont = joint_values_batch(s, i, s_masks, t_masks, "hitting")
    keep = s_masks & (imm >= cont - eta)
    add = ~s_masks & (imm > cont + eta)
    return keep | add


def theta(s: Scenario, i: int, S: StoppingPolicy, T: StoppingPolicy) -> StoppingPolicy:
    """Improving operator: where stopping now beats continuing against (S, T).

    Membership is kept under a weak comparison (slack -margin) and gained
    only under a strict one (+margin), mirroring the asymmetry that a player
    deviates only for a strict gain.
    """
    out = _theta_masks(s, i, S.mask()[None, :], T.mask()[None, :])[0]
    return StoppingPolicy.from_mask(out)


def is_intra_equilibrium(s: Scenario, i: int, S: StoppingPolicy, T: StoppingPolicy) -> bool:
    """True when S is a fixed point of the improving operator against T."""
    return theta(s, i, S, T) == S


def phi(s: Scenario, i: int, S: StoppingPolicy, T: StoppingPolicy) -> StoppingPolicy:
    """Growth operator: adjoin states where stopping now strictly beats the
    best continuation that is allowed to wait no longer than the first hit
    of S. Always a superset of S."""
    spec = s.player(i)
    eta = s.numerics.comparison_margin
    s_mask = S.mask()
    t_mask = T.mask()
    imm = np.where(t_mask, spec.h, spec.f)
    v = constrained_values_batch(s, i, s_mask[None, :], t_mask[None, :])[0]
    add = ~s_mask & (imm > v + eta)
    return StoppingPolicy.from_mask(s_mask | add)


def gamma(s: Scenario, i: int, T: StoppingPolicy) -> GammaTrace:
    """Iterate phi from the empty set to its least fixed point.

    Requires h <= g for the player; the iteration is extensive, so on a
    finite chain it fixes after at most n+1 applications.
    """
    spec = s.player(i)
    if np.any(spec.h > spec.g + CHECK_TOL):
        x = int(np.argmax(spec.h > spec.g + CHECK_TOL))
        raise OrderingError(
            f"gamma requires h <= g for player {i}; violated at state "
            f"{s.states.labels[x]!r}"
        )
    steps: list[StoppingPolicy] = []
    prev = StoppingPolicy.empty(s.n)
    for _ in range(s.n + 1):
        cur = phi(s, i, prev, T)
        steps.append(cur)
        if cur == prev:
            break
        prev = cur
    else:  # pragma: no cover - phi is extensive, so unreachable
        raise IterationCapError("phi failed to fix within n+1 iterations")
    return GammaTrace(player=i, other=T, steps=tuple(steps), fixed_point=steps[-1], iterations=len(steps))


def enumerate_intra(s: Scenario, i: int, T: StoppingPolicy) -> list[StoppingPolicy]:
    """All fixed points of the improving operator against T, by bitmask order.

    Exhausts 2**n policies in batched sweeps; guarded to small state spaces.
    """
    n = s.n
    if n > ENUM_MAX_STATES:
        raise SizeGuardError(f"exhaustive enumeration limited to {ENUM_MAX_STATES} states")
    total = 1 << n
    t_mask = T.mask()[None, :]

    def chunk_fixed(lo: int, hi: int) -> np.ndarray:
        codes = np.arange(lo, hi, dtype=np.uint64)
        s_masks = (codes[:, None] >> np.arange(n, dtype=np.uint64)) & 1
        s_masks = s_masks.astype(bool)
        out = _theta_masks(s, i, s_masks, t_mask)
        return codes[np.all(out == s_masks, axis=1)]

    bounds = [(lo, min(lo + SWEEP_CHUNK, total)) for lo in range(0, total, SWEEP_CHUNK)]
    fixed_codes: list[np.ndarray] = sweep_map(lambda b: chunk_fixed(*b), bounds)
    codes = np.concatenate(fixed_codes) if fixed_codes else np.array([], dtype=np.uint64)
    return [StoppingPolicy(n, int(c)) for c in np.sort(codes)]


def sweep_map(fn, items: list):
    """Run independent sweep chunks, optionally across threads.

    DYNKIN_EQ_THREADS caps the worker count; unset or <=1 means serial.
    Results are returned in submission order, so the merge is deterministic.
    """
    workers = int(os.environ.get("DYNKIN_EQ_THREADS", "1") or "1")
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# two-player procedure
# ---------------------------------------------------------------------------


def is_soft(s: Scenario, S: StoppingPolicy, T: StoppingPolicy) -> bool:
    """Both policies are improving-operator fixed points against each other."""
    return is_intra_equilibrium(s, 1, S, T) and is_intra_equilibrium(s, 2, T, S)


def _require_war_of_attrition(s: Scenario) -> None:
    for p, spec in enumerate(s.players, start=1):
        if np.any(spec.f > spec.h + CHECK_TOL) or np.any(spec.h > spec.g + CHECK_TOL):
            raise OrderingError(f"alternating procedure requires f <= h <= g; player {p} violates it")


def alternate(
    s: Scenario,
    start: StoppingPolicy | None = None,
    first_mover: int = 2,
    classify: bool = True,
    exhaustive: bool = False,
) -> AlternatingOutcome:
    """Alternate gamma best responses from a starting policy.

    ``first_mover`` names the player who computes the first response; the
    start policy belongs to the other player. After every response the
    current pair is tested for mutual stability and the procedure stops at
    the first stable pair; a revisited response pair is reported as a cycle.
    """
    _require_war_of_attrition(s)
    if first_mover not in (1, 2):
        raise ValueError("first_mover must be 1 or 2")
    holder = 2 if first_mover == 1 else 1
    start = StoppingPolicy.empty(s.n) if start is None else start

    current = {holder: start, first_mover: None}
    policies: list[tuple[int, StoppingPolicy]] = [(holder, start)]
    pairs: list[tuple[StoppingPolicy, StoppingPolicy]] = []
    seen: dict[tuple[int, int], int] = {}
    cap = (1 << s.n) + 1

    mover = first_mover
    terminal = None
    fixed_pair = None
    cycle = None
    cycle_start = None
    while True:
        reply = gamma(s, mover, current[3 - mover]).fixed_point
        current[mover] = reply
        policies.append((mover, reply))
        S, T = current[1], current[2]
        if is_soft(s, S, T):
            fixed_pair = (S, T)
            terminal = "fixed-point"
            if not pairs or pairs[-1] != fixed_pair:
                pairs.append(fixed_pair)
            break
        if mover == first_mover:
            # the first mover's reply closes a (S_n, T_n) round
            key = (S.bits, T.bits)
            if key in seen:
                cycle_start = seen[key]
                cycle = tuple(pairs[cycle_start:])
                terminal = "cycle"
                break
            seen[key] = len(pairs)
            pairs.append((S, T))
        if len(pairs) > cap:  # pragma: no cover - cycle detection prevents this
            raise IterationCapError(f"no fixed point or cycle within {cap} rounds")
        mover = 3 - mover

    if terminal == "fixed-point":
        S, T = fixed_pair
        classification = (
            verify(s, S, T, exhaustive=exhaustive) if classify else Classification(verdict="soft")
        )
    else:
        classification = Classification(verdict="not-equilibrium")
    return AlternatingOutcome(
        start=start,
        first_mover=first_mover,
        pairs=tuple(pairs),
        policies=tuple(policies),
        terminal=terminal,
        fixed_point=fixed_pair,
        cycle=cycle,
        cycle_start=cycle_start,
        classification=classification,
    )


def _boundary_states(s: Scenario, S: StoppingPolicy, T: StoppingPolicy) -> tuple[str, ...]:
    """Absorbing states inside S or T: possible truncation artifacts."""
    diag = np.diag(s.kernel.rows)
    absorbing = np.isclose(diag, 1.0)
    members = S.mask() | T.mask()
    return tuple(s.states.labels[k] for k in np.flatnonzero(absorbing & members))


def verify(s: Scenario, S: StoppingPolicy, T: StoppingPolicy, exhaustive: bool = False) -> Classification:
    """Classify a policy pair.

    Order of tests: fixed-point check for both players (anything else is
    not-equilibrium); the best-response certificate (gamma of each policy
    reproduces the other) upgrades soft to sharp-sufficient; with
    ``exhaustive`` set, the verdict is settled by enumerating all single-
    player fixed points and checking value dominance at every state.
    """
    boundary = _boundary_states(s, S, T)
    th1 = theta(s, 1, S, T)
    if th1 != S:
        wit = next(iter(th1.difference(S).union(S.difference(th1))))
        return Classification(
            verdict="not-equilibrium",
            witness_player=1,
            witness_state=s.states.labels[wit],
            boundary_states=boundary,
        )
    th2 = theta(s, 2, T, S)
    if th2 != T:
        wit = next(iter(th2.difference(T).union(T.difference(th2))))
        return Classification(
            verdict="not-equilibrium",
            witness_player=2,
            witness_state=s.states.labels[wit],
            boundary_states=boundary,
        )

    sufficient = False
    orderings_ok = all(not np.any(p.h > p.g + CHECK_TOL) for p in s.players)
    if orderings_ok:
        sufficient = gamma(s, 1, T).fixed_point == S and gamma(s, 2, S).fixed_point == T

    if not exhaustive:
        verdict: Verdict = "sharp-sufficient" if sufficient else "soft"
        return Classification(verdict=verdict, sufficient=sufficient, boundary_states=boundary)

    if s.n > ENUM_MAX_STATES:
        raise SizeGuardError(f"exhaustive verification limited to {ENUM_MAX_STATES} states")
    eta = s.numerics.comparison_margin
    for player, own, other in ((1, S, T), (2, T, S)):
        u_own = equilibrium_values(s, player, own, other)
        for rival in enumerate_intra(s, player, other):
            u_rival = equilibrium_values(s, player, rival, other)
            short = u_own < u_rival - eta
            if np.any(short):
                x = int(np.argmax(short))
                return Classification(
                    verdict="soft-not-sharp",
                    witness_player=player,
                    witness_state=s.states.labels[x],
                    sufficient=sufficient,
                    boundary_states=boundary,
                )
    return Classification(verdict="sharp-verified", sufficient=sufficient, boundary_states=boundary)
