"""Payoff functionals for fixed stopping policies.

Everything here is a pure function of an immutable Scenario plus one or two
stopping policies: the payoff of stopping now, the payoff of a fixed policy
pair, the constrained optimum over stopping times between 1 and the first
hitting time of the player's own region, and two independent oracles (exact
path enumeration and seeded Monte Carlo) used to cross-check the recursion.

Conventions shared by all operations:
  * the opponent always stops at the first entrance time of T (time 0
    included); the player's own time uses entrance or hitting ("positive
    time") semantics per the mode argument;
  * values are truncated at the scenario horizon with a zero boundary, a
    one-sided error bounded by tail_bound and reported on each ValueTable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _engine
from .model import HorizonError, Scenario, SizeGuardError, tail_bound

ORACLE_MAX_STATES = 8
ORACLE_MAX_HORIZON = 8


@dataclass(frozen=True)
class StoppingPolicy:
    """A subset of states, bitset semantics; the strategy object of one player."""

    n: int
    bits: int

    def __post_init__(self):
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "bits", int(self.bits))
        if self.bits < 0 or self.bits >> self.n:
            raise ValueError(f"bitmask {self.bits:#x} has members outside 0..{self.n - 1}")

    # -- constructors ------------------------------------------------------

    @classmethod
    def empty(cls, n: int) -> "StoppingPolicy":
        return cls(n, 0)

    @classmethod
    def full(cls, n: int) -> "StoppingPolicy":
        return cls(n, (1 << n) - 1)

    @classmethod
    def of(cls, n: int, indices: Iterable[int]) -> "StoppingPolicy":
        bits = 0
        for k in indices:
            k = int(k)
            if not 0 <= k < n:
                raise ValueError(f"state index {k} out of range 0..{n - 1}")
            bits |= 1 << k
        return cls(n, bits)

    @classmethod
    def from_labels(cls, scenario: Scenario, labels: Iterable[str]) -> "StoppingPolicy":
        return cls.of(scenario.n, (scenario.states.resolve(lab) for lab in labels))

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "StoppingPolicy":
        mask = np.asarray(mask, dtype=bool)
        return cls.of(mask.size, np.flatnonzero(mask))

    # -- set algebra (exact, integer bit operations) -----------------------

    def __contains__(self, index: int) -> bool:
        return bool((self.bits >> index) & 1)

    def __len__(self) -> int:
        return int(self.bits).bit_count()

    def __iter__(self):
        bits = self.bits
        while bits:
            low = bits & -bits
            yield low.bit_length() - 1
            bits ^= low

    def union(self, other: "StoppingPolicy") -> "StoppingPolicy":
        return StoppingPolicy(self.n, self.bits | other.bits)

    def intersection(self, other: "StoppingPolicy") -> "StoppingPolicy":
        return StoppingPolicy(self.n, self.bits & other.bits)

    def difference(self, other: "StoppingPolicy") -> "StoppingPolicy":
        return StoppingPolicy(self.n, self.bits & ~other.bits)

    def complement(self) -> "StoppingPolicy":
        return StoppingPolicy(self.n, ~self.bits & ((1 << self.n) - 1))

    def issubset(self, other: "StoppingPolicy") -> bool:
        return self.bits & ~other.bits == 0

    def mask(self) -> np.ndarray:
        out = np.zeros(self.n, dtype=bool)
        for k in self:
            out[k] = True
        return out

    def labels(self, scenario: Scenario) -> list[str]:
        return [scenario.states.labels[k] for k in self]

    def __repr__(self) -> str:
        return f"StoppingPolicy({sorted(self)})"


@dataclass(frozen=True)
class ValueTable:
    """Per-state values at elapsed time zero, with the truncation bound."""

    values: np.ndarray
    tail_bound: float
    horizon: int

    def __getitem__(self, x: int) -> float:
        return float(self.values[x])


# ---------------------------------------------------------------------------
# internal helpers
# ---------------------------------------------------------------------------


def _as_mask(policy: StoppingPolicy | np.ndarray, n: int) -> np.ndarray:
    if isinstance(policy, StoppingPolicy):
        if policy.n != n:
            raise ValueError(f"policy over {policy.n} states used in a {n}-state scenario")
        return policy.mask()
    mask = np.asarray(policy, dtype=bool)
    if mask.shape != (n,):
        raise ValueError(f"mask shape {mask.shape} does not match {n} states")
    return mask


def _check_horizon(s: Scenario, i: int) -> tuple[int, np.ndarray, float]:
    H = s.numerics.horizon
    tb = tail_bound(s, i, H)
    if tb > s.numerics.tail_tolerance:
        raise HorizonError(
            f"tail bound {tb:g} at horizon {H} exceeds tail_tolerance "
            f"{s.numerics.tail_tolerance:g}; raise the horizon or the tolerance"
        )
    return H, s.player(i).discount.values(H), tb


def _stop_layers(spec, s_masks: np.ndarray, t_masks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stop mask and undiscounted stop payoff per (policy row, state)."""
    stop_mask = s_masks | t_masks
    stop_val = np.where(
        s_masks & t_masks, spec.h, np.where(s_masks, spec.f, np.where(t_masks, spec.g, 0.0))
    )
    return stop_mask, stop_val


def joint_values_batch(
    s: Scenario, i: int, s_masks: np.ndarray, t_masks: np.ndarray, mode: str = "hitting"
) -> np.ndarray:
    """Joint-policy values for a batch of (S, T) rows; returns (B, n)."""
    if mode not in ("hitting", "entrance"):
        raise ValueError(f"unknown mode {mode!r}")
    spec = s.player(i)
    H, delta, _ = _check_horizon(s, i)
    s_masks = np.atleast_2d(s_masks)
    t_masks = np.atleast_2d(t_masks)
    if t_masks.shape[0] == 1 and s_masks.shape[0] > 1:
        t_masks = np.broadcast_to(t_masks, s_masks.shape)
    stop_mask, stop_val = _stop_layers(spec, s_masks, t_masks)
    w1 = _engine.joint_sweep(s.kernel.rows, delta, stop_mask, stop_val, H)
    cont0 = w1 @ s.kernel.rows.T
    if mode == "hitting":
        # the player never stops at time 0; the opponent may
        return np.where(t_masks, spec.g, cont0)
    return np.where(stop_mask, stop_val, cont0)


def constrained_values_batch(s: Scenario, i: int, s_masks: np.ndarray, t_masks: np.ndarray) -> np.ndarray:
    """Constrained optima for a batch of (S, T) rows; returns (B, n)."""
    spec = s.player(i)
    H, delta, _ = _check_horizon(s, i)
    s_masks = np.atleast_2d(s_masks)
    t_masks = np.atleast_2d(t_masks)
    if t_masks.shape[0] == 1 and s_masks.shape[0] > 1:
        t_masks = np.broadcast_to(t_masks, s_masks.shape)
    forced = s_masks & ~t_masks
    maxhg = np.maximum(spec.h, spec.g)
    w1 = _engine.constrained_sweep(s.kernel.rows, delta, t_masks, forced, spec.f, maxhg, H)
    cont0 = w1 @ s.kernel.rows.T
    # at time 0 the constraint tau >= 1 binds: in the opponent's region the
    # game is already over at the opponent's entrance, worth exactly g
    return np.where(t_masks, spec.g, cont0)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def immediate_values(s: Scenario, i: int, T: StoppingPolicy) -> np.ndarray:
    """Payoff of stopping right now at each state: h inside T (tie), f outside."""
    spec = s.player(i)
    t_mask = _as_mask(T, s.n)
    return np.where(t_mask, spec.h, spec.f)


def immediate_value(s: Scenario, i: int, T: StoppingPolicy, x: int | str) -> float:
    return float(immediate_values(s, i, T)[s.states.resolve(x)])


def joint_values(
    s: Scenario, i: int, S: StoppingPolicy, T: StoppingPolicy, mode: str = "hitting"
) -> ValueTable:
    """Value of the fixed policy pair, the player's time taken per mode."""
    vals = joint_values_batch(s, i, _as_mask(S, s.n), _as_mask(T, s.n), mode)[0]
    H = s.numerics.horizon
    return ValueTable(values=vals, tail_bound=tail_bound(s, i, H), horizon=H)


def joint_value(
    s: Scenario, i: int, S: StoppingPolicy, T: StoppingPolicy, x: int | str, mode: str = "hitting"
) -> float:
    return joint_values(s, i, S, T, mode)[s.states.resolve(x)]


def constrained_values(s: Scenario, i: int, S: StoppingPolicy, T: StoppingPolicy) -> ValueTable:
    """Best value over stopping times between 1 and the first hit of S."""
    vals = constrained_values_batch(s, i, _as_mask(S, s.n), _as_mask(T, s.n))[0]
    H = s.numerics.horizon
    return ValueTable(values=vals, tail_bound=tail_bound(s, i, H), horizon=H)


def constrained_value(s: Scenario, i: int, S: StoppingPolicy, T: StoppingPolicy, x: int | str) -> float:
    return constrained_values(s, i, S, T)[s.states.resolve(x)]


def equilibrium_values(s: Scenario, i: int, S: StoppingPolicy, T: StoppingPolicy) -> np.ndarray:
    """Value function of an equilibrium policy: stop-now versus continue, max."""
    return np.maximum(immediate_values(s, i, T), joint_values(s, i, S, T, "hitting").values)


def equilibrium_value(s: Scenario, i: int, S: StoppingPolicy, T: StoppingPolicy, x: int | str) -> float:
    return float(equilibrium_values(s, i, S, T)[s.states.resolve(x)])


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------


def _first_true(members: np.ndarray, start: int, sentinel: int) -> np.ndarray:
    """Index of the first True at column >= start, else sentinel; rows = paths."""
    cols = members[:, start:]
    has = cols.any(axis=1)
    idx = np.argmax(cols, axis=1) + start
    return np.where(has, idx, sentinel)


def _payoffs_on_paths(
    s: Scenario,
    i: int,
    s_mask: np.ndarray,
    t_mask: np.ndarray,
    paths: np.ndarray,
    horizon: int,
    mode: str,
) -> np.ndarray:
    """Realized payoff per path, straight from the stopping-time definition.

    Deliberately shares nothing with the backward recursion: entrance and
    hitting times are located on each path and the payoff formula is applied
    at min(tau, sigma). Paths still running at the horizon contribute 0.
    """
    spec = s.player(i)
    delta = spec.discount.values(horizon)
    sentinel = horizon + 1
    in_s = s_mask[paths]
    in_t = t_mask[paths]
    sigma = _first_true(in_t, 0, sentinel)
    tau = _first_true(in_s, 0 if mode == "entrance" else 1, sentinel)
    end = np.minimum(tau, sigma)
    live = end <= horizon - 1
    end_states = paths[np.arange(paths.shape[0]), np.minimum(end, horizon)]
    pay = np.where(
        tau < sigma,
        spec.f[end_states],
        np.where(sigma < tau, spec.g[end_states], spec.h[end_states]),
    )
    return np.where(live, delta[np.minimum(end, horizon)] * pay, 0.0)


def enumerate_value(
    s: Scenario,
    i: int,
    S: StoppingPolicy,
    T: StoppingPolicy,
    x: int | str,
    horizon: int | None = None,
    mode: str = "hitting",
) -> float:
    """Exact expectation by enumerating every state path of the given length.

    Independent oracle for the recursion; guarded to small instances since
    the path count is n**horizon.
    """
    n = s.n
    H = int(horizon) if horizon is not None else min(s.numerics.horizon, ORACLE_MAX_HORIZON)
    if n > ORACLE_MAX_STATES or H > ORACLE_MAX_HORIZON:
        raise SizeGuardError(
            f"enumeration limited to {ORACLE_MAX_STATES} states and horizon {ORACLE_MAX_HORIZON}"
        )
    x = s.states.resolve(x)
    steps = np.stack(np.meshgrid(*([np.arange(n)] * H), indexing="ij"), axis=-1).reshape(-1, H)
    paths = np.concatenate([np.full((steps.shape[0], 1), x), steps], axis=1)
    probs = np.ones(paths.shape[0])
    for t in range(H):
        probs *= s.kernel.rows[paths[:, t], paths[:, t + 1]]
    pays = _payoffs_on_paths(s, i, _as_mask(S, n), _as_mask(T, n), paths, H, mode)
    return float(np.dot(probs, pays))


def mc_estimate(
    s: Scenario,
    i: int,
    S: StoppingPolicy,
    T: StoppingPolicy,
    x: int | str,
    paths: int | None = None,
    seed: int | None = None,
    mode: str = "hitting",
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of the realized payoff.

    Deterministic for a fixed seed. Paths are simulated until a stop decides
    the game or the horizon truncates it, matching the recursion's tail
    convention.
    """
    n = s.n
    x = s.states.resolve(x)
    n_paths = int(paths) if paths is not None else s.numerics.mc_paths
    if n_paths < 1:
        raise ValueError("paths must be >= 1")
    rng = np.random.default_rng(s.numerics.mc_seed if seed is None else seed)
    spec = s.player(i)
    H = s.numerics.horizon
    delta = spec.discount.values(H)
    s_mask = _as_mask(S, n)
    t_mask = _as_mask(T, n)

    payoff = np.zeros(n_paths)
    state = np.full(n_paths, x, dtype=np.int64)
    alive = np.ones(n_paths, dtype=bool)

    cum = np.cumsum(s.kernel.rows, axis=1)
    cum[:, -1] = 1.0

    def settle(t: int, allow_own_stop: bool) -> None:
        nonlocal alive
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            return
        st = state[idx]
        own = s_mask[st] if allow_own_stop else np.zeros(idx.size, dtype=bool)
        opp = t_mask[st]
        done = own | opp
        if not done.any():
            return
        sel = idx[done]
        st_done = state[sel]
        both = own[done] & opp[done]
        only_own = own[done] & ~opp[done]
        pay = np.where(both, spec.h[st_done], np.where(only_own, spec.f[st_done], spec.g[st_done]))
        payoff[sel] = delta[t] * pay
        alive[sel] = False

    settle(0, allow_own_stop=(mode == "entrance"))
    for t in range(1, H):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        u = rng.random(idx.size)
        rows = cum[state[idx]]
        state[idx] = (u[:, None] > rows).sum(axis=1)
        settle(t, allow_own_stop=True)

    mean = float(payoff.mean())
    stderr = float(payoff.std(ddof=1) / np.sqrt(n_paths)) if n_paths > 1 else 0.0
    return mean, stderr
