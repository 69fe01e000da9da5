from __future__ import annotations

import json
import math
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from abnflow.errors import ConfigError
from abnflow.personas import (
    AGENT_ARGS,
    TRAVELER_ARGS,
    AgentPersona,
    ArgProfile,
    BehaviorParams,
    BuyingStyle,
    PreferenceProfile,
    TravelerPersona,
    behavior_params,
    default_table,
    full_name,
    load_persona_table,
    sample_agent,
    sample_traveler,
)

seeds = st.integers(min_value=0, max_value=2**64 - 1)

A, P, B = ArgProfile, PreferenceProfile, BuyingStyle


@given(seeds)
def test_traveler_takes_traveler_profiles_only(seed):
    assert sample_traveler(seed).arg in TRAVELER_ARGS


@given(seeds)
def test_agent_takes_agent_profiles_only(seed):
    assert sample_agent(seed).arg in AGENT_ARGS


@given(seeds)
def test_sampling_is_deterministic(seed):
    assert sample_traveler(seed) == sample_traveler(seed)
    assert sample_agent(seed) == sample_agent(seed)


def test_traveler_combinations_uniform():
    n = 60_000
    counts = Counter(sample_traveler(s) for s in range(n))
    assert len(counts) == 60
    expected = n / 60
    sigma = math.sqrt(n * (1 / 60) * (59 / 60))
    assert all(abs(c - expected) <= 3 * sigma for c in counts.values())
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    assert chi2 < 98.3  # 59 degrees of freedom, p = 0.001


def test_agent_split_even():
    n = 10_000
    counts = Counter(sample_agent(s).arg for s in range(n))
    sigma = math.sqrt(n * 0.25)
    assert abs(counts[A.OPEN_MINDED] - n / 2) <= 3 * sigma


def test_persona_role_validation():
    with pytest.raises(ValueError):
        TravelerPersona(A.OPEN_MINDED, P.ESCAPIST, B.QUALITY)
    with pytest.raises(ValueError):
        AgentPersona(A.AGREEABLE)


def test_profile_codes_round_trip():
    t = TravelerPersona(A.DISAGREEABLE, P.BEACH_LOVER, B.BUDGET_AND_QUALITY)
    assert t.to_dict() == {"arg": "Di", "pref": "BL", "buy": "B&QC"}
    assert TravelerPersona.from_dict(t.to_dict()) == t
    codes = [p.value for p in PreferenceProfile]
    assert codes == ["CC", "AAg", "AAt", "TS", "TT", "E", "SSh", "B", "SSe", "BL"]


def test_behavior_table_lookup():
    ag = TravelerPersona(A.AGREEABLE, P.ESCAPIST, B.QUALITY)
    di = TravelerPersona(A.DISAGREEABLE, P.ESCAPIST, B.QUALITY)
    om, ar = AgentPersona(A.OPEN_MINDED), AgentPersona(A.ARGUMENTATIVE)
    t_ag, a_om = behavior_params(ag, om)
    t_di, a_ar = behavior_params(di, ar)
    assert (t_ag.argument_turn_budget, t_ag.amenity_accept_prob) == (1, 0.8)
    assert (t_di.argument_turn_budget, t_di.justification_demand_prob) == (3, 0.7)
    assert (a_ar.concession_scale, a_om.concession_scale) == (0.8, 1.0)
    assert t_ag == BehaviorParams(1.2, 3, 1, 0.8, 0.2)
    assert t_di == BehaviorParams(0.8, 4, 3, 0.4, 0.7)
    assert (a_om.max_price_rounds, a_om.argument_turn_budget) == (3, 2)
    assert (a_ar.max_price_rounds, a_ar.argument_turn_budget) == (4, 3)


def test_behavior_orderings():
    table = default_table().behavior
    assert table[A.OPEN_MINDED].concession_scale > table[A.ARGUMENTATIVE].concession_scale
    assert table[A.DISAGREEABLE].argument_turn_budget > table[A.AGREEABLE].argument_turn_budget
    assert table[A.AGREEABLE].amenity_accept_prob > table[A.DISAGREEABLE].amenity_accept_prob


def test_behavior_params_total_and_pure():
    for arg in TRAVELER_ARGS:
        for pref in PreferenceProfile:
            for buy in BuyingStyle:
                for agent_arg in AGENT_ARGS:
                    t, a = TravelerPersona(arg, pref, buy), AgentPersona(agent_arg)
                    assert behavior_params(t, a) == behavior_params(t, a)


def test_buying_style_price_shift():
    shift = default_table().price_shift
    assert shift[B.BUDGET] == pytest.approx(-0.10)
    assert shift[B.QUALITY] == pytest.approx(0.10)
    assert shift[B.BUDGET_AND_QUALITY] == 0


def test_descriptions_cover_every_profile():
    table = default_table()
    for profile in [*ArgProfile, *PreferenceProfile, *BuyingStyle]:
        assert table.describe(profile)
        assert full_name(profile)
    assert full_name(B.BUDGET_AND_QUALITY) == "Budget-&-Quality-concerned"


def test_table_override_file(tmp_path):
    from importlib import resources

    raw = json.loads(resources.files("abnflow.data").joinpath("personas.json").read_text(encoding="utf-8"))
    raw["argumentation"]["Ag"]["argument_turn_budget"] = 2
    path = tmp_path / "personas.json"
    path.write_text(json.dumps(raw), encoding="utf-8")
    table = load_persona_table(path)
    assert table.behavior[A.AGREEABLE].argument_turn_budget == 2


def test_missing_table_file(tmp_path):
    with pytest.raises(ConfigError):
        load_persona_table(tmp_path / "nope.json")


def test_behavior_params_bounds():
    with pytest.raises(ValueError):
        BehaviorParams(0.0, 3, 1, 0.5, 0.5)
    with pytest.raises(ValueError):
        BehaviorParams(1.0, 3, 1, 1.5, 0.5)
