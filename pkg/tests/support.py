"""Hand-built conversations and report fixtures shared by several test files."""

from __future__ import annotations

from dataclasses import replace

from abnflow.acts import DialogAct as A, Role
from abnflow.concession import Outcome
from abnflow.filterkit import ExpertReport, ExpertScore, Facet
from abnflow.realize import Conversation, Turn

AG, TR = Role.AGENT, Role.TRAVELER

# Act sequence of a reference 17-turn booking; the wording is written for these tests.
SAMPLE_ROWS = [
    (AG, A.GREET_ASK, "Hello! Glad you stopped by. What sort of holiday are you dreaming about?"),
    (TR, A.ELICIT_PREFERENCE, "Sun, sand and calm water. I want lazy days on the shore."),
    (AG, A.INFORM, "Then 'Beach Bum' is for you: 54225.00 covering a cottage, buffet meals and transfers."),
    (TR, A.ASK_CLARIFICATION_X, "What happens on the snorkeling trip, exactly?"),
    (AG, A.PROVIDE_CLARIFICATION_X, "A guide takes you out to the reef in the morning with all the gear."),
    (TR, A.NEGOTIATE_PRICE_DECREASE, "That total is above my limit. Could we say 40000.00?"),
    (AG, A.NEGOTIATE_PRICE_INCREASE, "I cannot go that low, but 48500.00 is possible."),
    (TR, A.NEGOTIATE_PRICE_DECREASE, "Let me stretch a little to 43500.00."),
    (AG, A.NEGOTIATE_PRICE_INCREASE, "Meet me at 47550.51 and we have a deal in sight."),
    (TR, A.DISAGREE_PRICE, "Sorry, that figure is still too steep for me."),
    (AG, A.JUSTIFY_PRICE, "The resort is beachfront and every transfer is private, which is what you pay for."),
    (TR, A.DISAGREE_PRICE, "I understand, yet I still find it expensive."),
    (AG, A.NEGOTIATE_ADD_X, "Suppose we swap the beach access for an evening sail instead?"),
    (TR, A.PROVIDE_CONSENT, "An evening sail sounds lovely, yes please."),
    (AG, A.CONSENT_RESPONSE, "Done, the sail is now part of your trip."),
    (TR, A.ACCEPT, "Good, 46975.51 it is. Please book it."),
    (AG, A.ACKNOWLEDGE_ACCEPTANCE, "Booked! Thanks for choosing us and enjoy the sunsets."),
]


def conversation(rows, conv_id: str = "sample", outcome: Outcome | None = Outcome.AGREED) -> Conversation:
    turns = tuple(Turn(speaker, act, text) for speaker, act, text in rows)
    return Conversation(conv_id, turns, outcome=outcome)


def sample_conversation() -> Conversation:
    return conversation(SAMPLE_ROWS)


def _with_turn(c: Conversation, index: int, **changes) -> Conversation:
    turns = list(c.turns)
    turns[index] = replace(turns[index], **changes)
    return replace(c, turns=tuple(turns))


def defective_conversations() -> dict[str, Conversation]:
    """One conversation per rule category, each broken in exactly one way."""
    base = sample_conversation()
    short_rows = SAMPLE_ROWS[:5] + [SAMPLE_ROWS[15]]
    return {
        "EmptyUtterance": _with_turn(base, 3, text="   "),
        "RepetitiveUtterance": _with_turn(base, 11, text="  SORRY, that figure is still   too steep for me."),
        "InsufficientRounds": conversation(short_rows, "short"),
        "InsufficientActAnnotations": _with_turn(base, 6, act=None),
        "ImproperOpenClose": replace(base, turns=base.turns[:-2], outcome=None),
    }


# ---------------------------------------------------------------- expert reports

PERFECT = {f: (0 if f in (Facet.CONSISTENCY, Facet.TE) else 3) for f in Facet}


def report(conv_id: str, strict: bool = False, **overrides: int) -> ExpertReport:
    """Report with every facet passing except the ``overrides`` (by Facet name)."""
    ratings = dict(PERFECT)
    for name, value in overrides.items():
        ratings[Facet[name]] = value
    scores = tuple(ExpertScore(f, r, "fixture") for f, r in ratings.items())
    return ExpertReport(conv_id, scores, strict)


# Staged failure plan for 100 conversations: (id range, overrides). Ranges
# never overlap, so the expected survivors follow from counting.
SURVIVAL_PLAN = [
    (range(0, 4), {"COHERENCE": 2}),
    (range(4, 7), {"CONSISTENCY": 1}),
    (range(7, 10), {"LIKEABILITY": 1, "NEE": 2}),
    (range(10, 15), {"PCE": 2}),
    (range(15, 18), {"PCE": 1, "TE": 1}),
    (range(18, 27), {"NEE": 1}),
    (range(27, 32), {"AEE": 2}),
    (range(32, 36), {"TE": 1}),
]
# cumulative survivors after GCQE, PCE, NEE, AEE, TE
SURVIVAL_EXPECTED = [90, 82, 73, 68, 64]


def survival_fixture() -> list[ExpertReport]:
    overrides = {}
    for ids, change in SURVIVAL_PLAN:
        for i in ids:
            overrides[i] = change
    return [report(f"conv-{i:05d}", **overrides.get(i, {})) for i in range(100)]
