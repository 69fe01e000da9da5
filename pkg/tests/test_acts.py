from __future__ import annotations

import random
from collections import Counter

import pytest

from abnflow.acts import (
    START,
    ActCategory,
    DialogAct as A,
    GraphError,
    Phase,
    Role,
    UnreachableState,
    category,
    dump_graph,
    is_terminal,
    load_graph,
    parse_graph,
    speaker_role,
)


def test_taxonomy_size_and_partition():
    assert len(A) == 23
    sizes = Counter(category(a) for a in A)
    assert sizes == {ActCategory.NEGOTIATION: 5, ActCategory.ARGUMENTATION: 7, ActCategory.GENERAL: 11}


def test_category_examples():
    assert category(A.JUSTIFY_PRICE) is ActCategory.ARGUMENTATION
    assert category(A.NEGOTIATE_ADD_X) is ActCategory.NEGOTIATION
    assert category(A.GREET_ASK) is ActCategory.GENERAL


def test_speaker_role_examples():
    assert speaker_role(A.NEGOTIATE_PRICE_DECREASE) is Role.TRAVELER
    assert speaker_role(A.NEGOTIATE_PRICE_INCREASE) is Role.AGENT
    assert speaker_role(A.JUSTIFY_PRICE) is Role.EITHER


def test_terminal_acts():
    assert is_terminal(A.ACKNOWLEDGE_ACCEPTANCE)
    assert not is_terminal(A.ACCEPT)
    assert not is_terminal(A.INFORM)


def test_opening_edges(graph):
    assert graph.legal_next(Phase.OPENING, A.GREET_ASK, Role.AGENT) == {
        (A.ELICIT_PREFERENCE, Role.TRAVELER, Phase.DISCOVERY)
    }


def test_accept_then_acknowledge(graph):
    assert graph.legal_next(Phase.CLOSING, A.ACCEPT, Role.TRAVELER) == {
        (A.ACKNOWLEDGE_ACCEPTANCE, Role.AGENT, Phase.CLOSING)
    }


def test_concern_price_answers(graph):
    nxt = graph.legal_next(Phase.PRICE_NEGOTIATION, A.CONCERN_PRICE, Role.TRAVELER)
    assert (A.JUSTIFY_PRICE, Role.AGENT, Phase.ARGUMENTATION) in nxt
    assert (A.NEGOTIATE_PRICE_DECREASE, Role.AGENT, Phase.PRICE_NEGOTIATION) in nxt


def test_unreachable_state_raises(graph):
    with pytest.raises(UnreachableState):
        graph.legal_next(Phase.CLOSING, A.GREET_ASK, Role.TRAVELER)


def test_graph_invariants(graph):
    for state in graph.states():
        nxt = graph.legal_next(*state)
        if is_terminal(state[1]):
            assert not nxt
            continue
        assert nxt
        for act, role, _ in nxt:
            assert role is not state[2]
            assert act is not A.GREET_ASK


def test_random_walks_start_with_fixed_prefix(graph):
    rng = random.Random(5)
    for _ in range(300):
        phase, act, role = START
        acts = [act]
        while not is_terminal(act) and len(acts) < 40:
            act, role, phase = rng.choice(sorted(graph.legal_next(phase, act, role), key=str))
            acts.append(act)
        assert acts[:3] == [A.GREET_ASK, A.ELICIT_PREFERENCE, A.INFORM]


def test_dump_parse_round_trip(graph):
    assert parse_graph(dump_graph(graph)).edges == graph.edges


@pytest.mark.parametrize(
    "line, message",
    [
        ("Opening Greet-Ask agent -> Inform agent Discovery", "alternate"),
        ("Discovery Elicit-preference traveler -> Greet-Ask agent Opening", "predecessor"),
        ("Opening Greet-Ask agent -> Bogus traveler Discovery", "Bogus"),
        ("Opening Greet-Ask agent -> Negotiate-price-increase traveler Discovery", "cannot be spoken"),
    ],
)
def test_parse_errors(line, message):
    with pytest.raises(GraphError, match=message):
        parse_graph(line)


def test_dead_end_detected(graph):
    text = dump_graph(graph)
    kept = [l for l in text.splitlines() if not l.startswith("Discovery Provide-clarification-X agent")]
    with pytest.raises(GraphError):
        parse_graph("\n".join(kept))


def test_missing_graph_file(tmp_path):
    with pytest.raises(GraphError):
        load_graph(tmp_path / "none.txt")
