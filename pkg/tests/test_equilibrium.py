import numpy as np
import pytest

from dynkin_eq.equilibrium import (
    alternate,
    enumerate_intra,
    gamma,
    is_intra_equilibrium,
    is_soft,
    phi,
    sweep_map,
    theta,
    verify,
)
from dynkin_eq.model import OrderingError, SizeGuardError, load_scenario, check_supermartingale
from dynkin_eq.valuation import StoppingPolicy, equilibrium_values
from conftest import random_policy, random_scenario


def zero_game(n=3):
    return load_scenario(
        {
            "states": [f"s{k}" for k in range(n)],
            "transitions": (np.ones((n, n)) / n).tolist(),
            "players": [
                {
                    "f": [0.0] * n,
                    "g": [0.0] * n,
                    "h": [0.0] * n,
                    "discount": {"family": "hyperbolic", "beta": 1.0},
                }
            ]
            * 2,
            "numerics": {"horizon": 30, "comparison_margin": 1e-7, "tail_tolerance": 1.0},
        }
    )


class TestTheta:
    def test_three_state_reply_to_c(self, three_state_fixture):
        s = three_state_fixture.scenario
        b = StoppingPolicy.from_labels(s, ["b"])
        ab = StoppingPolicy.from_labels(s, ["a", "b"])
        c = StoppingPolicy.from_labels(s, ["c"])
        assert theta(s, 1, b, c) == b
        assert theta(s, 1, ab, c) != ab

    def test_fixed_points_are_intra_equilibria(self, three_state_fixture):
        s = three_state_fixture.scenario
        full = StoppingPolicy.full(s.n)
        empty = StoppingPolicy.empty(s.n)
        assert is_intra_equilibrium(s, 2, empty, full)
        assert not is_intra_equilibrium(s, 1, StoppingPolicy.from_labels(s, ["a"]), empty)


class TestPhi:
    def test_extensive(self):
        rng = np.random.default_rng(71)
        for _ in range(20):
            s = random_scenario(rng)
            S = random_policy(rng, s.n)
            T = random_policy(rng, s.n)
            assert S.issubset(phi(s, 1, S, T))

    def test_zero_payoffs_no_growth(self):
        s = zero_game()
        S = StoppingPolicy.from_labels(s, ["s1"])
        assert phi(s, 1, S, StoppingPolicy.empty(s.n)) == S

    def test_never_claims_opponent_region(self):
        rng = np.random.default_rng(73)
        for _ in range(20):
            s = random_scenario(rng)
            T = random_policy(rng, s.n)
            grown = phi(s, 1, StoppingPolicy.empty(s.n), T)
            assert len(grown.intersection(T)) == 0

    def test_countable_first_step(self, countable_fixture):
        s = countable_fixture.scenario
        empty = StoppingPolicy.empty(s.n)
        assert phi(s, 2, empty, empty) == StoppingPolicy.from_labels(s, s.states.labels[1:])


class TestGamma:
    def test_trace_shape(self):
        rng = np.random.default_rng(79)
        for _ in range(20):
            s = random_scenario(rng)
            T = random_policy(rng, s.n)
            trace = gamma(s, 1, T)
            assert trace.iterations <= s.n + 1
            assert trace.iterations == len(trace.steps)
            for a, b in zip(trace.steps, trace.steps[1:-1]):
                assert a.issubset(b) and a != b
            if len(trace.steps) >= 2:
                assert trace.steps[-1] == trace.steps[-2] or trace.steps[-2].issubset(trace.steps[-1])
            assert trace.fixed_point == trace.steps[-1]

    def test_fixed_point_is_intra_equilibrium_and_disjoint(self):
        rng = np.random.default_rng(83)
        for _ in range(30):
            s = random_scenario(rng)
            T = random_policy(rng, s.n)
            fp = gamma(s, 1, T).fixed_point
            assert is_intra_equilibrium(s, 1, fp, T)
            assert len(fp.intersection(T)) == 0

    def test_ordering_enforced(self):
        rng = np.random.default_rng(89)
        while True:
            s = random_scenario(rng, ordering="free")
            if np.any(s.player(1).h > s.player(1).g):
                break
        with pytest.raises(OrderingError):
            gamma(s, 1, StoppingPolicy.empty(s.n))

    def test_least_and_dominant(self):
        rng = np.random.default_rng(97)
        for _ in range(15):
            s = random_scenario(rng, max_states=6)
            T = random_policy(rng, s.n)
            fp = gamma(s, 1, T).fixed_point
            eta = s.numerics.comparison_margin
            u_fp = equilibrium_values(s, 1, fp, T)
            for rival in enumerate_intra(s, 1, T):
                assert fp.issubset(rival)
                u_r = equilibrium_values(s, 1, rival, T)
                assert np.all(u_fp >= u_r - eta)

    def test_antitone_under_drift_condition(self):
        rng = np.random.default_rng(101)
        done = 0
        while done < 15:
            s = random_scenario(rng, ordering="f<=h<=g", constant_g=True)
            if not (check_supermartingale(s, 1).passed and check_supermartingale(s, 2).passed):
                continue
            T = random_policy(rng, s.n)
            R = T.union(random_policy(rng, s.n))
            assert gamma(s, 1, R).fixed_point.issubset(gamma(s, 1, T).fixed_point)
            done += 1


class TestEnumerate:
    def test_zero_game_contains_empty(self):
        s = zero_game()
        found = enumerate_intra(s, 1, StoppingPolicy.empty(s.n))
        assert StoppingPolicy.empty(s.n) in found

    def test_three_state_unique_reply(self, three_state_fixture):
        s = three_state_fixture.scenario
        found = enumerate_intra(s, 2, StoppingPolicy.from_labels(s, ["b"]))
        assert found == [StoppingPolicy.from_labels(s, ["a", "c"])]

    def test_bitmask_order(self):
        s = zero_game()
        found = enumerate_intra(s, 1, StoppingPolicy.empty(s.n))
        assert [p.bits for p in found] == sorted(p.bits for p in found)

    def test_size_guard(self):
        rng = np.random.default_rng(3)
        docs = random_scenario(rng, min_states=2, max_states=2)
        big = load_scenario(
            {
                "states": [f"s{k}" for k in range(15)],
                "transitions": np.eye(15).tolist(),
                "players": [
                    {
                        "f": [0.0] * 15,
                        "g": [0.0] * 15,
                        "h": [0.0] * 15,
                        "discount": {"family": "exponential", "beta": 1.0},
                    }
                ]
                * 2,
                "numerics": {"horizon": 10, "tail_tolerance": 1.0},
            }
        )
        with pytest.raises(SizeGuardError):
            enumerate_intra(big, 1, StoppingPolicy.empty(15))

    def test_threaded_sweep_matches_serial(self, monkeypatch):
        items = [(0, 4), (4, 8), (8, 12)]
        fn = lambda b: list(range(*b))
        monkeypatch.setenv("DYNKIN_EQ_THREADS", "1")
        serial = sweep_map(fn, items)
        monkeypatch.setenv("DYNKIN_EQ_THREADS", "4")
        threaded = sweep_map(fn, items)
        assert serial == threaded


class TestAlternate:
    def test_zero_f_terminates_immediately(self):
        rng = np.random.default_rng(107)
        s = random_scenario(rng, ordering="f<=h<=g")
        for i in (1, 2):
            spec = s.player(i)
            spec.f.setflags(write=True)
            spec.f[:] = 0.0
            spec.h.setflags(write=True)
            spec.h[:] = np.minimum(spec.h, spec.g)
            spec.f.setflags(write=False)
            spec.h.setflags(write=False)
        out = alternate(s)
        assert out.terminal == "fixed-point"
        assert out.rounds == 1
        S, T = out.fixed_point
        assert len(S) == 0 and len(T) == 0

    def test_requires_ordering(self):
        rng = np.random.default_rng(109)
        while True:
            s = random_scenario(rng, ordering="free")
            p = s.player(1)
            if np.any(p.f > p.h) or np.any(p.h > p.g):
                break
        with pytest.raises(OrderingError):
            alternate(s)

    def test_monotone_chains_under_conditions(self):
        rng = np.random.default_rng(113)
        done = 0
        while done < 10:
            s = random_scenario(rng, ordering="f<=h<=g", constant_g=True)
            if not (check_supermartingale(s, 1).passed and check_supermartingale(s, 2).passed):
                continue
            out = alternate(s)
            assert out.terminal == "fixed-point"
            Ss = [S for S, _ in out.pairs]
            Ts = [T for _, T in out.pairs]
            assert all(a.issubset(b) for a, b in zip(Ss, Ss[1:]))
            assert all(b.issubset(a) for a, b in zip(Ts, Ts[1:]))
            S_inf, T_inf = out.fixed_point
            assert gamma(s, 1, T_inf).fixed_point == S_inf
            assert gamma(s, 2, S_inf).fixed_point.issubset(T_inf)
            done += 1

    def test_cycle_replays_from_inside(self, three_state_fixture):
        s = three_state_fixture.scenario
        out = alternate(s, start=StoppingPolicy.empty(s.n))
        assert out.terminal == "cycle"
        cycle_pairs = set((S.bits, T.bits) for S, T in out.cycle)
        for S, _T in out.cycle:
            rerun = alternate(s, start=S)
            assert rerun.terminal == "cycle"
            assert set((a.bits, b.bits) for a, b in rerun.cycle) == cycle_pairs

    def test_first_mover_swap(self, three_state_fixture):
        s = three_state_fixture.scenario
        out = alternate(s, start=StoppingPolicy.empty(s.n), first_mover=1)
        # player 1 replies first: the start policy belongs to player 2
        assert out.policies[0] == (2, StoppingPolicy.empty(s.n))
        assert out.policies[1][0] == 1


class TestVerify:
    def test_zero_game_empty_pair_is_soft(self):
        s = zero_game()
        e = StoppingPolicy.empty(s.n)
        assert is_soft(s, e, e)
        cl = verify(s, e, e)
        assert cl.verdict in ("soft", "sharp-sufficient")

    def test_not_equilibrium_has_witness(self, three_state_fixture):
        s = three_state_fixture.scenario
        cl = verify(s, StoppingPolicy.empty(s.n), StoppingPolicy.empty(s.n))
        assert cl.verdict == "not-equilibrium"
        assert cl.witness_player in (1, 2)
        assert cl.witness_state in s.states.labels

    def test_exhaustive_guard(self):
        big = load_scenario(
            {
                "states": [f"s{k}" for k in range(15)],
                "transitions": np.eye(15).tolist(),
                "players": [
                    {
                        "f": [0.0] * 15,
                        "g": [0.0] * 15,
                        "h": [0.0] * 15,
                        "discount": {"family": "exponential", "beta": 1.0},
                    }
                ]
                * 2,
                "numerics": {"horizon": 10, "tail_tolerance": 1.0},
            }
        )
        e = StoppingPolicy.empty(15)
        with pytest.raises(SizeGuardError):
            verify(big, e, e, exhaustive=True)

    def test_gamma_certificate_upgrades_to_sharp(self):
        rng = np.random.default_rng(127)
        s = random_scenario(rng, ordering="f<=h<=g", constant_g=True)
        out = alternate(s)
        if out.terminal == "fixed-point":
            S, T = out.fixed_point
            if gamma(s, 1, T).fixed_point == S and gamma(s, 2, S).fixed_point == T:
                assert verify(s, S, T).verdict == "sharp-sufficient"
