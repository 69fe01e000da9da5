"""Dialog-act taxonomy, speaker constraints and the legal transition graph."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import ABNFlowError


class DialogAct(str, Enum):
    NEGOTIATE_PRICE_INCREASE = "Negotiate-price-increase"
    NEGOTIATE_PRICE_DECREASE = "Negotiate-price-decrease"
    NEGOTIATE_PRICE_NOCHANGE = "Negotiate-price-nochange"
    NEGOTIATE_ADD_X = "Negotiate-add-X"
    NEGOTIATE_REMOVE_X = "Negotiate-remove-X"
    CONCERN_PRICE = "Concern-price"
    DISAGREE_PRICE = "Disagree-price"
    JUSTIFY_PRICE = "Justify-price"
    ASSURANCE_PRICE = "Assurance-price"
    DISAGREE_X = "Disagree-X"
    JUSTIFY_X = "Justify-X"
    ASSURANCE_X = "Assurance-X"
    GREET_ASK = "Greet-Ask"
    INFORM = "Inform"
    ELICIT_PREFERENCE = "Elicit-preference"
    ASK_PRICE = "Ask-price"
    TELL_PRICE = "Tell-price"
    ASK_CLARIFICATION_X = "Ask-clarification-X"
    PROVIDE_CLARIFICATION_X = "Provide-clarification-X"
    PROVIDE_CONSENT = "Provide-consent"
    CONSENT_RESPONSE = "Consent-response"
    ACCEPT = "Accept"
    ACKNOWLEDGE_ACCEPTANCE = "Acknowledge-acceptance"


class ActCategory(str, Enum):
    NEGOTIATION = "Negotiation"
    ARGUMENTATION = "Argumentation"
    GENERAL = "General"


class Phase(str, Enum):
    OPENING = "Opening"
    DISCOVERY = "Discovery"
    PRICE_NEGOTIATION = "PriceNegotiation"
    ARGUMENTATION = "Argumentation"
    AMENITY_NEGOTIATION = "AmenityNegotiation"
    CLOSING = "Closing"


class Role(str, Enum):
    AGENT = "agent"
    TRAVELER = "traveler"
    EITHER = "either"


A = DialogAct

_CATEGORY = {
    **{a: ActCategory.NEGOTIATION for a in (
        A.NEGOTIATE_PRICE_INCREASE, A.NEGOTIATE_PRICE_DECREASE, A.NEGOTIATE_PRICE_NOCHANGE,
        A.NEGOTIATE_ADD_X, A.NEGOTIATE_REMOVE_X)},
    **{a: ActCategory.ARGUMENTATION for a in (
        A.CONCERN_PRICE, A.DISAGREE_PRICE, A.JUSTIFY_PRICE, A.ASSURANCE_PRICE,
        A.DISAGREE_X, A.JUSTIFY_X, A.ASSURANCE_X)},
    **{a: ActCategory.GENERAL for a in (
        A.GREET_ASK, A.INFORM, A.ELICIT_PREFERENCE, A.ASK_PRICE, A.TELL_PRICE,
        A.ASK_CLARIFICATION_X, A.PROVIDE_CLARIFICATION_X, A.PROVIDE_CONSENT,
        A.CONSENT_RESPONSE, A.ACCEPT, A.ACKNOWLEDGE_ACCEPTANCE)},
}

# Acts whose definition names the speaker; everything else may come from either side.
_SPEAKER = {
    A.NEGOTIATE_PRICE_INCREASE: Role.AGENT,
    A.NEGOTIATE_PRICE_DECREASE: Role.TRAVELER,
    A.GREET_ASK: Role.AGENT,
    A.ELICIT_PREFERENCE: Role.TRAVELER,
    A.CONSENT_RESPONSE: Role.AGENT,
}

# The agent concedes with Negotiate-price-decrease even though the act is defined
# as the traveler's; this is the one role exception the graph may contain.
ROLE_EXCEPTIONS = frozenset({(A.NEGOTIATE_PRICE_DECREASE, Role.AGENT)})

PRICE_ACTS = frozenset({
    A.TELL_PRICE, A.NEGOTIATE_PRICE_INCREASE, A.NEGOTIATE_PRICE_DECREASE,
    A.NEGOTIATE_PRICE_NOCHANGE, A.ACCEPT,
})
X_ACTS = frozenset(a for a in DialogAct if a.value.endswith("-X"))
DELTA_ACTS = frozenset({A.NEGOTIATE_ADD_X, A.NEGOTIATE_REMOVE_X})


def category(act: DialogAct) -> ActCategory:
    return _CATEGORY[act]


def speaker_role(act: DialogAct) -> Role:
    return _SPEAKER.get(act, Role.EITHER)


def is_terminal(act: DialogAct) -> bool:
    return act is A.ACKNOWLEDGE_ACCEPTANCE


def is_price_bearing(act: DialogAct) -> bool:
    return act in PRICE_ACTS


def role_allowed(act: DialogAct, role: Role) -> bool:
    declared = speaker_role(act)
    return declared is Role.EITHER or declared is role or (act, role) in ROLE_EXCEPTIONS


State = tuple[Phase, DialogAct, Role]
Move = tuple[DialogAct, Role, Phase]

START: State = (Phase.OPENING, A.GREET_ASK, Role.AGENT)


class GraphError(ABNFlowError):
    pass


class UnreachableState(GraphError):
    pass


@dataclass(frozen=True)
class TransitionGraph:
    edges: dict[State, frozenset[Move]]
    reachable: frozenset[State] = field(default=frozenset())

    def legal_next(self, phase: Phase, act: DialogAct, role: Role) -> frozenset[Move]:
        state = (Phase(phase), DialogAct(act), Role(role))
        if state not in self.reachable:
            raise UnreachableState(f"state not reachable from the opening: {state}")
        return self.edges.get(state, frozenset())

    def is_legal(self, src: State, dst: State) -> bool:
        phase, act, role = dst
        return (act, role, phase) in self.edges.get(src, frozenset())

    def states(self) -> frozenset[State]:
        return self.reachable


def parse_graph(text: str, source: str = "<graph>") -> TransitionGraph:
    edges: dict[State, set[Move]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            lhs, rhs = (part.split() for part in line.split("->"))
            if len(lhs) != 3 or len(rhs) != 3:
                raise ValueError("expected 'phase act role -> act role phase'")
            src = (Phase(lhs[0]), DialogAct(lhs[1]), Role(lhs[2]))
            dst = (DialogAct(rhs[0]), Role(rhs[1]), Phase(rhs[2]))
        except ValueError as exc:
            raise GraphError(f"{source}:{lineno}: {exc}") from None
        if Role.EITHER in (src[2], dst[1]):
            raise GraphError(f"{source}:{lineno}: speakers must be agent or traveler")
        if src[2] is dst[1]:
            raise GraphError(f"{source}:{lineno}: speaker does not alternate")
        for act, role in ((src[1], src[2]), (dst[0], dst[1])):
            if not role_allowed(act, role):
                raise GraphError(f"{source}:{lineno}: {act.value} cannot be spoken by {role.value}")
        if dst[0] is A.GREET_ASK:
            raise GraphError(f"{source}:{lineno}: Greet-Ask cannot have a predecessor")
        if is_terminal(src[1]):
            raise GraphError(f"{source}:{lineno}: {src[1].value} is terminal")
        edges.setdefault(src, set()).add(dst)

    frozen = {k: frozenset(v) for k, v in edges.items()}
    reachable = _reachable(frozen)
    for state in reachable:
        if not is_terminal(state[1]) and not frozen.get(state):
            raise GraphError(f"{source}: dead end at reachable state {_fmt(state)}")
    can_accept = _reaches_accept(frozen, reachable)
    for state in reachable:
        if state[0] is not Phase.CLOSING and state not in can_accept:
            raise GraphError(f"{source}: Accept unreachable from {_fmt(state)}")
    return TransitionGraph(frozen, frozenset(reachable))


def _fmt(state: State) -> str:
    return " ".join(x.value for x in state)


def _reachable(edges: dict[State, frozenset[Move]]) -> set[State]:
    seen = {START}
    queue = deque([START])
    while queue:
        for act, role, phase in edges.get(queue.popleft(), ()):
            nxt = (phase, act, role)
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def _reaches_accept(edges: dict[State, frozenset[Move]], states: set[State]) -> set[State]:
    good = {s for s in states if s[1] is A.ACCEPT}
    changed = True
    while changed:
        changed = False
        for s in states:
            if s in good:
                continue
            if any((ph, act, role) in good for act, role, ph in edges.get(s, ())):
                good.add(s)
                changed = True
    return good


def load_graph(path: str | Path | None = None) -> TransitionGraph:
    if path is None:
        text = resources.files("abnflow.data").joinpath("transitions.txt").read_text(encoding="utf-8")
        return parse_graph(text, "transitions.txt")
    p = Path(path)
    if not p.is_file():
        raise GraphError(f"transition graph not found: {p}")
    return parse_graph(p.read_text(encoding="utf-8"), str(p))


def dump_graph(graph: TransitionGraph) -> str:
    lines = []
    for src in sorted(graph.edges, key=_fmt):
        for act, role, phase in sorted(graph.edges[src], key=lambda m: (m[0].value, m[1].value, m[2].value)):
            lines.append(f"{_fmt(src)} -> {act.value} {role.value} {phase.value}")
    return "\n".join(lines) + "\n"
