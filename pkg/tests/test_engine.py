import numpy as np
import pytest

from dynkin_eq import _engine
from dynkin_eq.valuation import constrained_values, joint_values
from conftest import random_policy, random_scenario


@pytest.mark.skipif(not _engine.USE_NUMBA, reason="numba unavailable; fallback is the engine")
class TestFallbackEquivalence:
    def test_joint_sweep_matches(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            n = int(rng.integers(2, 7))
            B = int(rng.integers(1, 9))
            P = rng.dirichlet(np.ones(n), size=n)
            H = int(rng.integers(2, 40))
            delta = np.exp(-0.3 * np.arange(H + 1))
            stop_mask = rng.random((B, n)) < 0.4
            stop_val = rng.uniform(0, 3, (B, n))
            a = _engine._joint_sweep_nb(P, delta, stop_mask, stop_val, H)
            b = _engine._joint_sweep_np(P, delta, stop_mask, stop_val, H)
            np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)

    def test_constrained_sweep_matches(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            n = int(rng.integers(2, 7))
            B = int(rng.integers(1, 9))
            P = rng.dirichlet(np.ones(n), size=n)
            H = int(rng.integers(2, 40))
            delta = 1.0 / (1.0 + np.arange(H + 1))
            opp = rng.random((B, n)) < 0.3
            forced = ~opp & (rng.random((B, n)) < 0.3)
            f = rng.uniform(0, 3, n)
            maxhg = rng.uniform(0, 4, n)
            a = _engine._constrained_sweep_nb(P, delta, opp, forced, f, maxhg, H)
            b = _engine._constrained_sweep_np(P, delta, opp, forced, f, maxhg, H)
            np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


def test_operations_agree_with_fallback(monkeypatch):
    rng = np.random.default_rng(3)
    s = random_scenario(rng, max_states=5)
    S = random_policy(rng, s.n)
    T = random_policy(rng, s.n)
    fast_j = joint_values(s, 1, S, T).values
    fast_c = constrained_values(s, 1, S, T).values
    monkeypatch.setattr(_engine, "USE_NUMBA", False)
    slow_j = joint_values(s, 1, S, T).values
    slow_c = constrained_values(s, 1, S, T).values
    np.testing.assert_allclose(fast_j, slow_j, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(fast_c, slow_c, rtol=1e-13, atol=1e-13)
