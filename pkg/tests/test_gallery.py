import json

import numpy as np
import pytest

from dynkin_eq.gallery import (
    FixtureConstraintError,
    build_fixture,
    evaluate_expectation,
    example_countable,
    example_extended,
    example_three_state,
    run_fixture,
)
from dynkin_eq.model import scenario_to_document, validate


class TestConstraints:
    def test_countable_discount_window(self):
        with pytest.raises(FixtureConstraintError, match="delta2"):
            example_countable(M=5.0)
        with pytest.raises(FixtureConstraintError, match="delta2"):
            example_countable(M=1.5)

    def test_countable_eps_guard(self):
        # a strong upward leak toward a juicy reward makes waiting at the
        # bottom state competitive, which the fixture must refuse
        with pytest.raises(FixtureConstraintError, match="eps"):
            example_countable(eps=0.9, L=2.9)
        with pytest.raises(FixtureConstraintError, match="eps"):
            example_countable(eps=1.0)

    def test_countable_minimum_size(self):
        with pytest.raises(FixtureConstraintError, match="6 chain states"):
            example_countable(n_states=4)

    def test_extended_f2z_window(self):
        with pytest.raises(FixtureConstraintError, match="f2z"):
            example_extended(f2z=0.5)
        with pytest.raises(FixtureConstraintError, match="f2z"):
            example_extended(f2z=0.9)

    def test_extended_pdist_validation(self):
        with pytest.raises(FixtureConstraintError, match="pdist"):
            example_extended(pdist=[1.0] + [0.0] * 11)
        with pytest.raises(FixtureConstraintError, match="margin"):
            example_extended(pdist=np.array([2.0 ** -k for k in range(12)]) / sum(2.0 ** -k for k in range(12)))

    def test_extended_enumeration_cap(self):
        with pytest.raises(FixtureConstraintError, match="states"):
            example_extended(n_states=13)

    def test_three_state_small_m_rejected(self):
        with pytest.raises(FixtureConstraintError, match="larger M"):
            example_three_state(M=2.2)

    def test_three_state_row_validation(self):
        with pytest.raises(FixtureConstraintError, match="q_b"):
            example_three_state(q_b=(0.5, 0.5, 0.0))


class TestDeterminism:
    def test_rebuild_is_byte_identical(self):
        a = json.dumps(scenario_to_document(example_countable().scenario))
        b = json.dumps(scenario_to_document(example_countable().scenario))
        assert a == b
        a = json.dumps(scenario_to_document(example_three_state(verify_build=False).scenario))
        b = json.dumps(scenario_to_document(example_three_state(verify_build=False).scenario))
        assert a == b

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown fixture"):
            build_fixture("nonesuch")


class TestFixtureScenarios:
    def test_fixtures_validate(self, countable_fixture, extended_fixture, three_state_fixture):
        for fx in (countable_fixture, extended_fixture, three_state_fixture):
            report = validate(fx.scenario, mode="war-of-attrition")
            assert report.passed, (fx.name, [c for c in report.checks if not c.passed])

    def test_countable_cheap_expectations(self, countable_fixture):
        for e in countable_fixture.expected:
            if e.op in ("phi", "gamma"):
                result = evaluate_expectation(countable_fixture.scenario, e)
                assert result.passed, result.describe()

    def test_extended_gamma_expectation(self, extended_fixture):
        for e in extended_fixture.expected:
            if e.op == "gamma":
                result = evaluate_expectation(extended_fixture.scenario, e)
                assert result.passed, result.describe()

    def test_three_state_reply_identities(self, three_state_fixture):
        for e in three_state_fixture.expected:
            if e.op in ("gamma", "enumerate_intra", "check_supermartingale"):
                result = evaluate_expectation(three_state_fixture.scenario, e)
                assert result.passed, result.describe()

    def test_countable_all_assertions(self, countable_fixture):
        results = run_fixture(countable_fixture)
        assert all(r.passed for r in results), [r.describe() for r in results if not r.passed]

    def test_extended_all_assertions(self, extended_fixture):
        results = run_fixture(extended_fixture)
        assert all(r.passed for r in results), [r.describe() for r in results if not r.passed]
