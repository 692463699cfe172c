"""Game instances: state space, transition kernel, payoffs, discounting.

A scenario bundles everything a solver needs: a finite Markov chain, two
players with payoff vectors (f, g, h) and a discount function each, and the
numerics block that controls horizon truncation and comparison margins.
Scenarios are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

# State-count cap for loaded scenarios. Module-level so deployments that
# really want bigger chains can raise it (dynkin_eq.model.MAX_STATES = ...).
MAX_STATES = 4096

# Tolerances used by structural checks (not user-tunable; comparison margins
# for solver decisions live in NumericsConfig instead).
ROW_SUM_TOL = 1e-12
CHECK_TOL = 1e-12

# Quadratic (s, t) grids get expensive for very long horizons; beyond this the
# discount checks fall back to a capped grid plus the analytic certificate for
# closed-form families.
DI_GRID_CAP = 2048


class ScenarioError(ValueError):
    """Malformed scenario document or inconsistent scenario data."""

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class HorizonError(ValueError):
    """The configured horizon cannot meet the requested tail tolerance."""


class SizeGuardError(ValueError):
    """An exhaustive operation was asked for on too large a state space."""


class OrderingError(ValueError):
    """A payoff ordering precondition (h <= g or f <= h <= g) is violated."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StateSpace:
    """Ordered collection of state labels with a label -> index map."""

    labels: tuple[str, ...]
    index: Mapping[str, int] = field(repr=False, default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not self.labels:
            raise ScenarioError("state space must contain at least one state", "states")
        if len(self.labels) > MAX_STATES:
            raise ScenarioError(
                f"state space has {len(self.labels)} states, cap is {MAX_STATES}",
                "states",
            )
        for k, label in enumerate(self.labels):
            if not isinstance(label, str) or not label:
                raise ScenarioError(f"state label #{k} is empty or not a string", "states")
        if len(set(self.labels)) != len(self.labels):
            raise ScenarioError("state labels are not unique", "states")
        object.__setattr__(self, "index", {lab: k for k, lab in enumerate(self.labels)})

    def __len__(self) -> int:
        return len(self.labels)

    def resolve(self, state: int | str) -> int:
        """Map a label or index to the state's position."""
        if isinstance(state, str):
            if state not in self.index:
                raise ScenarioError(f"unknown state label {state!r}", "states")
            return self.index[state]
        k = int(state)
        if not 0 <= k < len(self.labels):
            raise ScenarioError(f"state index {k} out of range", "states")
        return k


@dataclass(frozen=True)
class TransitionKernel:
    """Row-stochastic transition matrix over the state space."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] != rows.shape[1]:
            raise ScenarioError("transition matrix must be square", "transitions")
        if np.any(rows < 0):
            i, j = np.argwhere(rows < 0)[0]
            raise ScenarioError(f"negative probability at row {i}, column {j}", f"transitions[{i}][{j}]")
        sums = rows.sum(axis=1)
        bad = np.where(np.abs(sums - 1.0) > ROW_SUM_TOL)[0]
        if bad.size:
            i = int(bad[0])
            raise ScenarioError(f"non-stochastic row (sum={sums[i]!r})", f"transitions[{i}]")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True)
class DiscountFunction:
    """Discount curve delta(t) on integer times, delta(0)=1, strictly decreasing.

    Families:
      exponential:            delta(t) = exp(-beta t)
      hyperbolic:             delta(t) = 1 / (1 + beta t)
      generalized-hyperbolic: delta(t) = (1 + beta t) ** (-k / beta)
      table:                  explicit values for t = 0..len(values)-1
    """

    family: str
    beta: float | None = None
    k: float | None = None
    table: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.family in ("exponential", "hyperbolic"):
            if self.beta is None or self.beta <= 0:
                raise ScenarioError(f"{self.family} discount requires beta > 0", "discount")
        elif self.family == "generalized-hyperbolic":
            if self.beta is None or self.beta <= 0 or self.k is None or self.k <= 0:
                raise ScenarioError("generalized-hyperbolic discount requires beta > 0 and k > 0", "discount")
        elif self.family == "table":
            if not self.table or len(self.table) < 2:
                raise ScenarioError("table discount requires at least values for t=0 and t=1", "discount")
            if abs(self.table[0] - 1.0) > CHECK_TOL:
                raise ScenarioError("table discount must have delta(0) = 1", "discount")
            diffs = np.diff(np.asarray(self.table))
            if np.any(diffs >= 0):
                t = int(np.argmax(diffs >= 0))
                raise ScenarioError(f"table discount not strictly decreasing at t={t}", "discount")
            if np.any(np.asarray(self.table) < 0):
                raise ScenarioError("table discount has negative values", "discount")
        else:
            raise ScenarioError(f"unknown discount family {self.family!r}", "discount")

    @property
    def closed_form(self) -> bool:
        return self.family != "table"

    def values(self, horizon: int) -> np.ndarray:
        """delta(t) for t = 0..horizon inclusive."""
        t = np.arange(horizon + 1, dtype=np.float64)
        if self.family == "exponential":
            return np.exp(-self.beta * t)
        if self.family == "hyperbolic":
            return 1.0 / (1.0 + self.beta * t)
        if self.family == "generalized-hyperbolic":
            return (1.0 + self.beta * t) ** (-self.k / self.beta)
        if horizon >= len(self.table):
            raise HorizonError(
                f"table discount defines t <= {len(self.table) - 1}, horizon {horizon} requested"
            )
        return np.asarray(self.table[: horizon + 1], dtype=np.float64)

    def value(self, t: int) -> float:
        return float(self.values(t)[t])

    def sup_step_ratio(self, horizon: int) -> float:
        """sup over all t >= 0 of delta(t+1)/delta(t).

        Analytic for closed-form families (so the supermartingale verdict
        covers every t, not just the checked grid); for tables this is the
        maximum over the tabulated range.
        """
        if self.family == "exponential":
            return math.exp(-self.beta)
        if self.family in ("hyperbolic", "generalized-hyperbolic"):
            # ratio increases toward 1 as t grows
            return 1.0
        vals = self.values(min(horizon, len(self.table) - 1))
        return float(np.max(vals[1:] / vals[:-1]))


@dataclass(frozen=True)
class PlayerSpec:
    """One player's payoff vectors and discount function.

    f pays when this player stops first, g when the other player stops
    first, h on simultaneous stopping.
    """

    f: np.ndarray
    g: np.ndarray
    h: np.ndarray
    discount: DiscountFunction

    def __post_init__(self):
        for name in ("f", "g", "h"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def max_payoff(self) -> float:
        return float(max(self.f.max(), self.g.max(), self.h.max()))


@dataclass(frozen=True)
class NumericsConfig:
    horizon: int = 200
    comparison_margin: float = 1e-7
    tail_tolerance: float = 1e-9
    mc_paths: int = 100_000
    mc_seed: int = 42

    def __post_init__(self):
        if self.horizon < 1:
            raise ScenarioError("horizon must be a positive integer", "numerics.horizon")
        if self.comparison_margin < 0:
            raise ScenarioError("comparison_margin must be >= 0", "numerics.comparison_margin")
        if self.tail_tolerance <= 0:
            raise ScenarioError("tail_tolerance must be positive", "numerics.tail_tolerance")
        if self.mc_paths < 1:
            raise ScenarioError("mc_paths must be >= 1", "numerics.mc_paths")


@dataclass(frozen=True)
class Scenario:
    """A complete two-player stopping game on a finite Markov chain."""

    states: StateSpace
    kernel: TransitionKernel
    players: tuple[PlayerSpec, PlayerSpec]
    numerics: NumericsConfig = field(default_factory=NumericsConfig)

    def __post_init__(self):
        n = len(self.states)
        if self.kernel.n != n:
            raise ScenarioError(
                f"transition matrix is {self.kernel.n}x{self.kernel.n} for {n} states",
                "transitions",
            )
        if len(self.players) != 2:
            raise ScenarioError("exactly two players are required", "players")
        for p, spec in enumerate(self.players):
            for name in ("f", "g", "h"):
                vec = getattr(spec, name)
                if vec.shape != (n,):
                    raise ScenarioError(
                        f"payoff vector has length {vec.shape[0]}, expected {n}",
                        f"players[{p}].{name}",
                    )
                if np.any(vec < 0):
                    x = int(np.argmax(vec < 0))
                    raise ScenarioError(
                        f"negative payoff at state {self.states.labels[x]!r}",
                        f"players[{p}].{name}",
                    )

    @property
    def n(self) -> int:
        return len(self.states)

    def player(self, i: int) -> PlayerSpec:
        """Player by 1-based index."""
        if i not in (1, 2):
            raise ValueError(f"player index must be 1 or 2, got {i}")
        return self.players[i - 1]

    def with_numerics(self, **overrides) -> "Scenario":
        return replace(self, numerics=replace(self.numerics, **overrides))


# ---------------------------------------------------------------------------
# Loading / serialization
# ---------------------------------------------------------------------------


def _payoff_vector(raw: Any, states: StateSpace, path: str) -> np.ndarray:
    n = len(states)
    if isinstance(raw, Mapping):
        vec = np.zeros(n)
        seen = set()
        for label, value in raw.items():
            if label not in states.index:
                raise ScenarioError(f"unknown state label {label!r}", path)
            vec[states.index[label]] = float(value)
            seen.add(label)
        if len(seen) != n:
            missing = sorted(set(states.labels) - seen)[:3]
            raise ScenarioError(f"missing payoff for states {missing}", path)
        return vec
    if isinstance(raw, Sequence) and not isinstance(raw, (str, bytes)):
        if len(raw) != n:
            raise ScenarioError(f"payoff vector has length {len(raw)}, expected {n}", path)
        return np.asarray([float(v) for v in raw])
    raise ScenarioError("payoff must be a list or a {state: value} mapping", path)


def _discount_from_doc(raw: Any, path: str) -> DiscountFunction:
    if not isinstance(raw, Mapping) or "family" not in raw:
        raise ScenarioError("discount must be an object with a 'family' field", path)
    family = raw["family"]
    try:
        if family == "table":
            return DiscountFunction(family="table", table=tuple(float(v) for v in raw["values"]))
        if family == "generalized-hyperbolic":
            return DiscountFunction(family=family, beta=float(raw["beta"]), k=float(raw["k"]))
        if family in ("exponential", "hyperbolic"):
            return DiscountFunction(family=family, beta=float(raw["beta"]))
    except KeyError as exc:
        raise ScenarioError(f"discount family {family!r} is missing field {exc}", path) from None
    except ScenarioError as exc:
        raise ScenarioError(str(exc), path) from None
    raise ScenarioError(f"unknown discount family {family!r}", path)


def load_scenario(document: str | Mapping[str, Any] | Path) -> Scenario:
    """Materialize a Scenario from a JSON document (text, path, or dict).

    Errors carry a path into the document (e.g. ``players[1].f``).
    """
    if isinstance(document, Path):
        document = document.read_text(encoding="utf-8")
    if isinstance(document, str):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON: {exc}") from None
    else:
        doc = document
    if not isinstance(doc, Mapping):
        raise ScenarioError("document root must be an object")

    for key in ("states", "transitions", "players"):
        if key not in doc:
            raise ScenarioError(f"missing required field {key!r}", key)

    states = StateSpace(labels=tuple(str(s) for s in doc["states"]))
    kernel = TransitionKernel(rows=np.asarray(doc["transitions"], dtype=np.float64))

    raw_players = doc["players"]
    if not isinstance(raw_players, Sequence) or len(raw_players) != 2:
        raise ScenarioError("exactly two players are required", "players")
    players = []
    for p, raw in enumerate(raw_players):
        base = f"players[{p}]"
        if not isinstance(raw, Mapping):
            raise ScenarioError("player must be an object", base)
        for k in ("f", "g", "h", "discount"):
            if k not in raw:
                raise ScenarioError(f"missing required field {k!r}", f"{base}.{k}")
        players.append(
            PlayerSpec(
                f=_payoff_vector(raw["f"], states, f"{base}.f"),
                g=_payoff_vector(raw["g"], states, f"{base}.g"),
                h=_payoff_vector(raw["h"], states, f"{base}.h"),
                discount=_discount_from_doc(raw["discount"], f"{base}.discount"),
            )
        )

    raw_num = doc.get("numerics", {})
    if not isinstance(raw_num, Mapping):
        raise ScenarioError("numerics must be an object", "numerics")
    known = {"horizon", "comparison_margin", "tail_tolerance", "mc_paths", "mc_seed"}
    unknown = set(raw_num) - known
    if unknown:
        raise ScenarioError(f"unknown numerics fields {sorted(unknown)}", "numerics")
    defaults = NumericsConfig()
    numerics = NumericsConfig(
        horizon=int(raw_num.get("horizon", defaults.horizon)),
        comparison_margin=float(raw_num.get("comparison_margin", defaults.comparison_margin)),
        tail_tolerance=float(raw_num.get("tail_tolerance", defaults.tail_tolerance)),
        mc_paths=int(raw_num.get("mc_paths", defaults.mc_paths)),
        mc_seed=int(raw_num.get("mc_seed", defaults.mc_seed)),
    )

    return Scenario(states=states, kernel=kernel, players=(players[0], players[1]), numerics=numerics)


def scenario_to_document(s: Scenario) -> dict:
    """Inverse of load_scenario; round-trips bit-exact labels and integers."""

    def discount_doc(d: DiscountFunction) -> dict:
        if d.family == "table":
            return {"family": "table", "values": list(d.table)}
        if d.family == "generalized-hyperbolic":
            return {"family": d.family, "beta": d.beta, "k": d.k}
        return {"family": d.family, "beta": d.beta}

    return {
        "states": list(s.states.labels),
        "transitions": [list(map(float, row)) for row in s.kernel.rows],
        "players": [
            {
                "f": list(map(float, p.f)),
                "g": list(map(float, p.g)),
                "h": list(map(float, p.h)),
                "discount": discount_doc(p.discount),
            }
            for p in s.players
        ],
        "numerics": {
            "horizon": s.numerics.horizon,
            "comparison_margin": s.numerics.comparison_margin,
            "tail_tolerance": s.numerics.tail_tolerance,
            "mc_paths": s.numerics.mc_paths,
            "mc_seed": s.numerics.mc_seed,
        },
    }


# ---------------------------------------------------------------------------
# Standing-condition checks
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(CheckResult(name, bool(passed), detail))

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]


def tail_bound(s: Scenario, i: int, horizon: int | None = None) -> float:
    """Truncation-error bound for values computed at the given horizon.

    Any payoff collected at or after the horizon is worth at most
    delta_i(H) times the largest payoff, so this bounds the error of
    every horizon-H value for player i.
    """
    H = s.numerics.horizon if horizon is None else int(horizon)
    spec = s.player(i)
    return spec.discount.value(H) * spec.max_payoff()


def _check_decreasing_impatience(d: DiscountFunction, horizon: int) -> tuple[bool, float, str]:
    """Grid check of delta(s)delta(t) <= delta(s+t) plus family certificates.

    Returns (passed, worst residual delta(s)delta(t) - delta(s+t), note).
    """
    if d.family == "exponential":
        # delta(s)delta(t) = delta(s+t) identically; the grid would only
        # measure floating-point noise
        return True, 0.0, "analytic: exact equality for exponential discounting"
    grid_h = min(horizon, DI_GRID_CAP)
    vals = d.values(min(horizon, grid_h * 2) if d.family != "table" else min(horizon, len(d.table) - 1))
    m = min(grid_h, len(vals) - 1)
    v = vals[: m + 1]
    prod = np.outer(v, v)
    ssum = np.add.outer(np.arange(m + 1), np.arange(m + 1))
    mask = ssum <= min(horizon, len(vals) - 1)
    resid = np.where(mask, prod - vals[np.minimum(ssum, len(vals) - 1)], -np.inf)
    worst = float(resid.max())
    passed = worst <= CHECK_TOL
    if d.family in ("hyperbolic", "generalized-hyperbolic"):
        note = "analytic: (1+bs)(1+bt) >= 1+b(s+t) certifies all s,t"
    elif horizon > grid_h:
        note = f"grid capped at s,t <= {m}; table values beyond were not cross-checked"
    else:
        note = "full grid"
    return passed, worst, note


def validate(s: Scenario, mode: str = "basic") -> ValidationReport:
    """Run the standing checks; failures are reported, never raised.

    mode 'war-of-attrition' additionally checks the payoff ordering
    f <= h <= g for both players.
    """
    if mode not in ("basic", "war-of-attrition"):
        raise ValueError(f"unknown validation mode {mode!r}")
    report = ValidationReport()
    H = s.numerics.horizon

    sums = s.kernel.rows.sum(axis=1)
    worst = float(np.abs(sums - 1.0).max())
    report.add("row-stochastic", worst <= ROW_SUM_TOL, f"max |row sum - 1| = {worst:.3e}")

    for p, spec in enumerate(s.players, start=1):
        neg = min(float(spec.f.min()), float(spec.g.min()), float(spec.h.min()))
        report.add(f"player{p}-payoffs-nonnegative", neg >= 0, f"min payoff = {neg:g}")

    for p, spec in enumerate(s.players, start=1):
        try:
            ok, resid, note = _check_decreasing_impatience(spec.discount, H)
            report.add(
                f"player{p}-decreasing-impatience",
                ok,
                f"worst residual delta(s)delta(t)-delta(s+t) = {resid:.3e}; {note}",
            )
        except HorizonError as exc:
            report.add(f"player{p}-decreasing-impatience", False, str(exc))

    if mode == "war-of-attrition":
        for p, spec in enumerate(s.players, start=1):
            bad_fh = np.where(spec.f > spec.h + CHECK_TOL)[0]
            bad_hg = np.where(spec.h > spec.g + CHECK_TOL)[0]
            if bad_fh.size:
                x = s.states.labels[int(bad_fh[0])]
                report.add(f"player{p}-ordering", False, f"f > h at state {x!r}")
            elif bad_hg.size:
                x = s.states.labels[int(bad_hg[0])]
                report.add(f"player{p}-ordering", False, f"h > g at state {x!r}")
            else:
                report.add(f"player{p}-ordering", True, "f <= h <= g holds at every state")

    tails = [tail_bound(s, i, H) for i in (1, 2)]
    eta = s.numerics.comparison_margin
    report.add(
        "margin-covers-tail",
        eta >= 2 * max(tails),
        f"comparison_margin = {eta:g}, 2 x tail bound = {2 * max(tails):g} at horizon {H}",
    )
    report.add(
        "tail-within-tolerance",
        max(tails) <= s.numerics.tail_tolerance,
        f"tail bound = {max(tails):g}, tolerance = {s.numerics.tail_tolerance:g}",
    )
    return report


@dataclass
class ConditionReport:
    """Outcome of the discounted-g drift check for one player."""

    passed: bool
    grid_passed: bool
    sup_ratio: float
    worst_state: str | None
    worst_excess: float
    analytic: bool

    def __bool__(self) -> bool:
        return self.passed


def check_supermartingale(s: Scenario, i: int) -> ConditionReport:
    """Check that discounted g-payoffs drift downward in expectation.

    The grid form checks delta(t+1) * (P g)(x) <= delta(t) * g(x) for every
    state and every t < horizon; for closed-form discount families the
    verdict additionally uses the analytic sup of delta(t+1)/delta(t) so it
    covers all t (hyperbolic ratios keep increasing toward 1, so a finite
    grid alone is not conclusive).
    """
    spec = s.player(i)
    H = s.numerics.horizon
    g = spec.g
    pg = s.kernel.rows @ g
    vals = spec.discount.values(H)
    grid_ratio = float(np.max(vals[1:] / vals[:-1]))
    sup_ratio = spec.discount.sup_step_ratio(H)
    analytic = spec.discount.closed_form

    excess = sup_ratio * pg - g
    worst_idx = int(np.argmax(excess))
    worst = float(excess[worst_idx])
    passed = worst <= CHECK_TOL
    grid_passed = float(np.max(grid_ratio * pg - g)) <= CHECK_TOL
    return ConditionReport(
        passed=passed,
        grid_passed=grid_passed,
        sup_ratio=sup_ratio,
        worst_state=s.states.labels[worst_idx] if not passed else None,
        worst_excess=worst,
        analytic=analytic,
    )
