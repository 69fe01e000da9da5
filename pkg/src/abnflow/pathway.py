"""Scenario sampling and the pathway encoder.

A pathway is the act-level skeleton of one conversation: who speaks, which
dialog act, in which phase, and the price/amenity slots. Prices come from a
``PriceTracker`` that replays the concession recursion, with amenity deltas
folded in whenever the traveler consents to an add or remove.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

import numpy as np

from .acts import (
    DELTA_ACTS,
    START,
    X_ACTS,
    DialogAct,
    Phase,
    Role,
    TransitionGraph,
    UnreachableState,
    is_price_bearing,
)
from .catalog import CATEGORIES, Catalog, base_price, tokens
from .concession import (
    ConcessionSettings,
    NegotiationLedger,
    Outcome,
    accepts,
    agent_step,
    classify_budget,
    sample_phi,
    traveler_step,
)
from .errors import ABNFlowError
from .personas import (
    AgentPersona,
    ArgProfile,
    BehaviorParams,
    PersonaTable,
    TravelerPersona,
    _rng,
    default_table,
    sample_agent,
    sample_traveler,
)

A = DialogAct

MIN_TURNS = 8
MAX_TURNS = 24
BASE_PRICE_RATIO = 0.75
PRICE_SD_RATIO = 0.10
N_INCLUDED = 3

_SCENARIO_STREAM = 21
_ENCODER_STREAM = 22


class PathwayError(ABNFlowError):
    pass


class EmptyCatalog(PathwayError):
    pass


class GraphDeadEnd(PathwayError):
    pass


def money(x: float) -> str:
    return f"{x:.2f}"


@dataclass(frozen=True)
class Scenario:
    traveler: TravelerPersona
    agent: AgentPersona
    package: str
    tier_selection: dict[str, str]
    included: tuple[str, ...]
    agent_init_price: float
    traveler_init_price: float
    phi: float
    amenity_pref: dict[str, float]
    seed: int

    def __post_init__(self):
        if not 0 < self.traveler_init_price <= self.agent_init_price:
            raise PathwayError("need 0 < traveler_init_price <= agent_init_price")
        if any(not 0.0 <= p <= 1.0 for p in self.amenity_pref.values()):
            raise PathwayError("amenity_pref values must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "traveler": self.traveler.to_dict(),
            "agent": self.agent.to_dict(),
            "package": self.package,
            "tier_selection": dict(self.tier_selection),
            "included": list(self.included),
            "agent_init_price": money(self.agent_init_price),
            "traveler_init_price": money(self.traveler_init_price),
            "phi": self.phi,
            "amenity_pref": dict(self.amenity_pref),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Scenario:
        return cls(
            traveler=TravelerPersona.from_dict(d["traveler"]),
            agent=AgentPersona.from_dict(d["agent"]),
            package=d["package"],
            tier_selection=dict(d["tier_selection"]),
            included=tuple(d["included"]),
            agent_init_price=float(d["agent_init_price"]),
            traveler_init_price=float(d["traveler_init_price"]),
            phi=float(d["phi"]),
            amenity_pref={k: float(v) for k, v in d["amenity_pref"].items()},
            seed=int(d["seed"]),
        )


@dataclass(frozen=True)
class ActEvent:
    turn: int
    speaker: Role
    act: DialogAct
    phase: Phase
    price: float | None = None
    amenity: str | None = None
    delta: float | None = None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "turn": self.turn,
            "speaker": self.speaker.value,
            "act": self.act.value,
            "phase": self.phase.value,
        }
        if self.price is not None:
            d["price"] = money(self.price)
        if self.amenity is not None:
            d["amenity"] = self.amenity
        if self.delta is not None:
            d["delta"] = money(self.delta)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ActEvent:
        return cls(
            turn=int(d["turn"]),
            speaker=Role(d["speaker"]),
            act=DialogAct(d["act"]),
            phase=Phase(d["phase"]),
            price=float(d["price"]) if d.get("price") is not None else None,
            amenity=d.get("amenity"),
            delta=float(d["delta"]) if d.get("delta") is not None else None,
        )


@dataclass(frozen=True)
class Terms:
    """Concession constants fixed for one pathway."""

    c_agent: float
    c_traveler: float
    agent_min_price: float
    verbatim: bool = False

    def to_dict(self) -> dict:
        return {
            "c_agent": self.c_agent,
            "c_traveler": self.c_traveler,
            "agent_min_price": self.agent_min_price,
            "verbatim": self.verbatim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Terms:
        return cls(float(d["c_agent"]), float(d["c_traveler"]), float(d["agent_min_price"]), bool(d["verbatim"]))


@dataclass(frozen=True)
class Pathway:
    scenario: Scenario
    events: tuple[ActEvent, ...]
    outcome: Outcome
    final_price: float | None
    terms: Terms

    def __len__(self) -> int:
        return len(self.events)

    @property
    def acts(self) -> list[DialogAct]:
        return [e.act for e in self.events]

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "events": [e.to_dict() for e in self.events],
            "outcome": self.outcome.value,
            "final_price": None if self.final_price is None else money(self.final_price),
            "terms": self.terms.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Pathway:
        fp = d.get("final_price")
        return cls(
            scenario=Scenario.from_dict(d["scenario"]),
            events=tuple(ActEvent.from_dict(e) for e in d["events"]),
            outcome=Outcome(d["outcome"]),
            final_price=None if fp is None else float(fp),
            terms=Terms.from_dict(d["terms"]),
        )


# ---------------------------------------------------------------- scenario


def amenity_preferences(pkg, traveler: TravelerPersona, table: PersonaTable) -> dict[str, float]:
    themes = table.pref_themes[traveler.pref]
    return {
        a.name: table.elevated_pref if tokens(a.name) & themes else table.baseline_pref
        for a in pkg.amenities()
    }


def sample_scenario(
    catalog: Catalog,
    seed: int,
    table: PersonaTable | None = None,
    settings: ConcessionSettings | None = None,
) -> Scenario:
    if catalog is None or not getattr(catalog, "packages", None):
        raise EmptyCatalog("cannot sample a scenario from an empty catalog")
    table = table or default_table()
    traveler = sample_traveler(seed)
    agent = sample_agent(seed)
    rng = _rng(seed, _SCENARIO_STREAM)

    pkg = catalog.packages[int(rng.integers(len(catalog.packages)))]
    selection = {}
    for cat in CATEGORIES:
        tiers = pkg.services[cat]
        selection[cat] = tiers[int(rng.integers(len(tiers)))].name
    band = pkg.bands[int(rng.integers(len(pkg.bands)))]
    picks = sorted(int(i) for i in rng.choice(len(band), size=min(N_INCLUDED, len(band)), replace=False))
    included = tuple(band[i].name for i in picks)

    agent_init = float(base_price(pkg, selection) + sum(band[i].price for i in picks))
    ratio = BASE_PRICE_RATIO + table.price_shift[traveler.buy]
    draw = rng.normal(ratio * agent_init, PRICE_SD_RATIO * agent_init)
    traveler_init = round(float(np.clip(draw, 0.01 * agent_init, agent_init)), 2)
    phi = sample_phi(rng, settings)

    return Scenario(
        traveler=traveler,
        agent=agent,
        package=pkg.id,
        tier_selection=selection,
        included=included,
        agent_init_price=agent_init,
        traveler_init_price=min(traveler_init, agent_init),
        phi=phi,
        amenity_pref=amenity_preferences(pkg, traveler, table),
        seed=int(seed),
    )


def negotiation_terms(
    scenario: Scenario,
    params: tuple[BehaviorParams, BehaviorParams],
    settings: ConcessionSettings | None = None,
) -> Terms:
    s = settings or ConcessionSettings()
    t_params, a_params = params
    c_base = s.c_for(classify_budget(scenario.traveler_init_price, scenario.agent_init_price))
    return Terms(
        c_agent=c_base * a_params.concession_scale,
        c_traveler=s.traveler_c_ratio * c_base * t_params.concession_scale,
        agent_min_price=s.min_price_ratio * scenario.agent_init_price,
        verbatim=s.verbatim,
    )


# ---------------------------------------------------------------- price tracker


class PriceTracker:
    """Concession ledger as seen through the dialog.

    The agent may step when the traveler was the last to move, the traveler
    when the agent was. A move that is not due is a restatement of the
    current offer. Round ``k`` increments on every agent step, so in a walk
    without amenity changes the stepped prices equal ``run_recursion``'s.
    """

    def __init__(self, scenario: Scenario, terms: Terms):
        floor = min(terms.agent_min_price, scenario.agent_init_price)
        self.ledger = NegotiationLedger(
            agent_min_price=floor,
            agent_price=scenario.agent_init_price,
            traveler_price=scenario.traveler_init_price,
            phi=scenario.phi,
            c_agent=terms.c_agent,
            c_traveler=terms.c_traveler,
            round_k=0,
        )
        self.verbatim = terms.verbatim
        self.agent_due = True
        self.traveler_due = False

    @property
    def crossed(self) -> bool:
        return self.ledger.traveler_price >= self.ledger.agent_price

    def closes(self) -> bool:
        return self.crossed or accepts(self.ledger, self.verbatim)

    def accept_price(self) -> float:
        if self.verbatim and not self.crossed:
            return self.ledger.traveler_price
        return self.ledger.agent_price

    def peek_agent(self) -> tuple[float, bool]:
        """(price the agent would state now, whether it is a fresh step)."""
        if self.agent_due and self.ledger.gap >= 0:
            k = self.ledger.round_k + 1
            return agent_step(replace(self.ledger, round_k=k)), True
        return self.ledger.agent_price, False

    def agent_move(self) -> float:
        price, stepped = self.peek_agent()
        if stepped:
            self.ledger = replace(self.ledger, agent_price=price, round_k=self.ledger.round_k + 1)
            self.agent_due, self.traveler_due = False, True
        return price

    def traveler_move(self) -> float:
        if self.traveler_due and self.ledger.gap >= 0:
            price = traveler_step(self.ledger, self.verbatim)
            self.ledger = replace(self.ledger, traveler_price=price)
            self.agent_due, self.traveler_due = True, False
        return self.ledger.traveler_price

    def apply_delta(self, delta: float) -> None:
        self.ledger = self.ledger.shifted(delta)


# ---------------------------------------------------------------- encoder

_PRICE_MOVES = (A.NEGOTIATE_PRICE_INCREASE, A.NEGOTIATE_PRICE_DECREASE, A.NEGOTIATE_PRICE_NOCHANGE)
_PRICE_REACTIONS = (A.NEGOTIATE_PRICE_DECREASE, A.CONCERN_PRICE, A.DISAGREE_PRICE)
_PADDING = (A.ASK_CLARIFICATION_X, A.ASK_PRICE)

# traveler reaction weights by argumentation profile
_TRAVELER_WEIGHTS = {
    ArgProfile.AGREEABLE: {
        A.NEGOTIATE_PRICE_DECREASE: 0.50, A.CONCERN_PRICE: 0.18, A.DISAGREE_PRICE: 0.07,
        A.ASK_CLARIFICATION_X: 0.15, A.ASK_PRICE: 0.10,
    },
    ArgProfile.DISAGREEABLE: {
        A.NEGOTIATE_PRICE_DECREASE: 0.25, A.CONCERN_PRICE: 0.25, A.DISAGREE_PRICE: 0.30,
        A.ASK_CLARIFICATION_X: 0.12, A.ASK_PRICE: 0.08,
    },
}

# agent answers keyed by the traveler act being answered; "move" stands for a price act
_AGENT_WEIGHTS = {
    ArgProfile.OPEN_MINDED: {
        A.NEGOTIATE_PRICE_DECREASE: {"move": 0.80, A.NEGOTIATE_ADD_X: 0.12, A.NEGOTIATE_REMOVE_X: 0.08},
        A.CONCERN_PRICE: {A.JUSTIFY_PRICE: 0.20, A.ASSURANCE_PRICE: 0.15, "move": 0.45,
                          A.NEGOTIATE_ADD_X: 0.12, A.NEGOTIATE_REMOVE_X: 0.08},
        A.DISAGREE_PRICE: {A.JUSTIFY_PRICE: 0.30, "move": 0.55, A.NEGOTIATE_ADD_X: 0.15},
    },
    ArgProfile.ARGUMENTATIVE: {
        A.NEGOTIATE_PRICE_DECREASE: {"move": 0.75, A.NEGOTIATE_ADD_X: 0.15, A.NEGOTIATE_REMOVE_X: 0.10},
        A.CONCERN_PRICE: {A.JUSTIFY_PRICE: 0.35, A.ASSURANCE_PRICE: 0.15, "move": 0.30,
                          A.NEGOTIATE_ADD_X: 0.12, A.NEGOTIATE_REMOVE_X: 0.08},
        A.DISAGREE_PRICE: {A.JUSTIFY_PRICE: 0.50, "move": 0.35, A.NEGOTIATE_ADD_X: 0.15},
    },
}

_CLARIFY_DECAY = 0.35


@dataclass
class _Proposal:
    act: DialogAct
    amenity: str
    delta: float
    defended: bool = False


@dataclass
class _Walk:
    scenario: Scenario
    graph: TransitionGraph
    traveler: BehaviorParams
    agent: BehaviorParams
    tracker: PriceTracker
    rng: np.random.Generator
    pkg_prices: dict[str, tuple[float, str]]
    included: list[str]
    services: list[str]
    events: list[ActEvent] = field(default_factory=list)
    price_run: int = 0
    arg_run: dict[Role, int] = field(default_factory=lambda: {Role.AGENT: 0, Role.TRAVELER: 0})
    proposal: _Proposal | None = None
    belief: dict[str, float] = field(default_factory=dict)
    tried: set[str] = field(default_factory=set)
    clarifications: int = 0

    @property
    def turn(self) -> int:
        return len(self.events) + 1

    @property
    def last(self) -> ActEvent:
        return self.events[-1]

    @property
    def price_cap(self) -> int:
        return min(self.traveler.max_price_rounds, self.agent.max_price_rounds)

    def budget(self, role: Role) -> int:
        return (self.agent if role is Role.AGENT else self.traveler).argument_turn_budget

    def legal(self) -> dict[DialogAct, tuple[DialogAct, Role, Phase]]:
        e = self.last
        try:
            moves = self.graph.legal_next(e.phase, e.act, e.speaker)
        except UnreachableState as exc:
            raise GraphDeadEnd(str(exc)) from exc
        return {m[0]: m for m in moves}

    def arg_ok(self, role: Role, phase: Phase) -> bool:
        return phase is not Phase.ARGUMENTATION or self.arg_run[role] < self.budget(role)

    def emit(self, move, **slots) -> ActEvent:
        act, role, phase = move
        if phase is Phase.ARGUMENTATION:
            self.arg_run[role] += 1
        else:
            self.arg_run = {Role.AGENT: 0, Role.TRAVELER: 0}
        ev = ActEvent(self.turn, role, act, phase, **slots)
        self.events.append(ev)
        return ev

    def choose(self, weights: dict) -> Any:
        keys = [k for k, w in weights.items() if w > 0]
        if not keys:
            raise GraphDeadEnd(f"no admissible continuation after turn {len(self.events)}")
        w = np.array([weights[k] for k in keys], dtype=float)
        return keys[int(self.rng.choice(len(keys), p=w / w.sum()))]

    def topic(self) -> str:
        pool = self.included + self.services
        return pool[int(self.rng.integers(len(pool)))]


def _weighted_pick(rng, names: list[str], weights: list[float]) -> str:
    w = np.array(weights, dtype=float)
    return names[int(rng.choice(len(names), p=w / w.sum()))]


def _propose(walk: _Walk, act: DialogAct) -> _Proposal | None:
    t = walk.tracker.ledger
    if act is A.NEGOTIATE_ADD_X:
        pool = [n for n in walk.pkg_prices if n not in walk.included]
        names = [n for n in pool if n not in walk.tried] or pool
        if not names:
            return None
        weights = [walk.belief[walk.pkg_prices[n][1]] for n in names]
        name = _weighted_pick(walk.rng, names, weights)
        return _Proposal(act, name, walk.pkg_prices[name][0])
    pool = [n for n in walk.included if walk.pkg_prices[n][0] < min(t.traveler_price, t.agent_min_price)]
    names = [n for n in pool if n not in walk.tried] or pool
    if not names:
        return None
    weights = [1.0 / walk.belief[walk.pkg_prices[n][1]] for n in names]
    name = _weighted_pick(walk.rng, names, weights)
    return _Proposal(act, name, -walk.pkg_prices[name][0])


def _agent_price_act(walk: _Walk, answering: DialogAct) -> DialogAct:
    price, stepped = walk.tracker.peek_agent()
    moved = stepped and price < walk.tracker.ledger.agent_price
    if not moved:
        return A.NEGOTIATE_PRICE_NOCHANGE
    if answering is A.NEGOTIATE_PRICE_DECREASE:
        return A.NEGOTIATE_PRICE_INCREASE
    return A.NEGOTIATE_PRICE_DECREASE


def _agent_turn(walk: _Walk) -> None:
    legal = walk.legal()
    last = walk.last
    prof = walk.scenario.agent.arg

    if last.act is A.ACCEPT:
        walk.emit(legal[A.ACKNOWLEDGE_ACCEPTANCE])
        return
    if last.act is A.ELICIT_PREFERENCE:
        walk.emit(legal[A.INFORM])
        return
    if last.act is A.ASK_CLARIFICATION_X:
        walk.emit(legal[A.PROVIDE_CLARIFICATION_X], amenity=last.amenity)
        return
    if last.act is A.ASK_PRICE:
        walk.emit(legal[A.TELL_PRICE], price=walk.tracker.ledger.agent_price)
        return
    if last.act is A.PROVIDE_CONSENT:
        prop = walk.proposal
        walk.tracker.apply_delta(prop.delta)
        if prop.act is A.NEGOTIATE_ADD_X:
            walk.included.append(prop.amenity)
        else:
            walk.included.remove(prop.amenity)
        walk.belief[walk.pkg_prices[prop.amenity][1]] *= 2.0
        walk.proposal = None
        walk.emit(legal[A.CONSENT_RESPONSE])
        return

    options: dict[Any, float]
    if last.act is A.DISAGREE_X:
        prop = walk.proposal
        if not prop.defended and walk.rng.random() < walk.traveler.justification_demand_prob:
            prop.defended = True
            act = A.JUSTIFY_X if walk.rng.random() < (0.6 if prof is ArgProfile.ARGUMENTATIVE else 0.4) else A.ASSURANCE_X
            walk.emit(legal[act], amenity=prop.amenity)
            return
        walk.belief[walk.pkg_prices[prop.amenity][1]] *= 0.5
        walk.proposal = None
        options = {"move": 0.7, A.NEGOTIATE_ADD_X: 0.2, A.NEGOTIATE_REMOVE_X: 0.1}
        answering = A.DISAGREE_X
    else:
        options = dict(_AGENT_WEIGHTS[prof][last.act])
        answering = last.act

    # resolve the generic price move into a concrete, legal act
    if "move" in options:
        w = options.pop("move")
        if walk.price_run < walk.price_cap:
            options[_agent_price_act(walk, answering)] = w
    admissible = {}
    for act, w in options.items():
        move = legal.get(act)
        if move is None or not walk.arg_ok(Role.AGENT, move[2]):
            continue
        admissible[act] = w
    if walk.price_run >= walk.price_cap:
        # stretch exhausted: the agent must put an amenity on the table
        forced = {a: w for a, w in admissible.items() if a in DELTA_ACTS}
        admissible = forced or admissible

    while True:
        act = walk.choose(admissible)
        if act in DELTA_ACTS:
            prop = _propose(walk, act)
            if prop is None:
                admissible.pop(act)
                continue
            walk.tried.add(prop.amenity)
            walk.proposal = prop
            walk.price_run = 0
            walk.emit(legal[act], amenity=prop.amenity, delta=prop.delta)
        elif act in _PRICE_MOVES:
            walk.price_run += 1
            walk.emit(legal[act], price=walk.tracker.agent_move())
        else:
            walk.emit(legal[act])
        return


def _traveler_turn(walk: _Walk) -> None:
    legal = walk.legal()
    last = walk.last
    tp = walk.traveler

    if last.act is A.GREET_ASK:
        walk.emit(legal[A.ELICIT_PREFERENCE])
        return
    if last.act in (A.NEGOTIATE_ADD_X, A.NEGOTIATE_REMOVE_X, A.JUSTIFY_X, A.ASSURANCE_X):
        prop = walk.proposal
        if last.act in DELTA_ACTS:
            pref = walk.scenario.amenity_pref.get(prop.amenity, 0.5)
            p_yes = pref if prop.act is A.NEGOTIATE_ADD_X else 1.0 - pref
        else:
            p_yes = tp.amenity_accept_prob
        if walk.rng.random() < p_yes:
            walk.emit(legal[A.PROVIDE_CONSENT])
        else:
            walk.emit(legal[A.DISAGREE_X], amenity=prop.amenity)
        return

    turn = walk.turn
    closes = walk.tracker.closes()
    if closes and A.ACCEPT in legal and MIN_TURNS <= turn <= MAX_TURNS - 2:
        walk.emit(legal[A.ACCEPT], price=walk.tracker.accept_price())
        return

    if closes:
        options = {a: 1.0 for a in _PADDING}
    else:
        options = dict(_TRAVELER_WEIGHTS[walk.scenario.traveler.arg])
        options[A.ASK_CLARIFICATION_X] *= _CLARIFY_DECAY ** walk.clarifications
        if turn >= MAX_TURNS:
            for a in _PADDING:
                options.pop(a)
    admissible = {
        a: w for a, w in options.items()
        if a in legal and walk.arg_ok(Role.TRAVELER, legal[a][2])
    }
    if not admissible:
        admissible = {
            a: 1.0 for a, m in legal.items()
            if a is not A.ACCEPT and walk.arg_ok(Role.TRAVELER, m[2])
        }
    act = walk.choose(admissible)
    if act is A.ASK_CLARIFICATION_X:
        walk.clarifications += 1
        walk.emit(legal[act], amenity=walk.topic())
    elif act is A.NEGOTIATE_PRICE_DECREASE:
        walk.emit(legal[act], price=walk.tracker.traveler_move())
    else:
        walk.emit(legal[act])


def encode_pathway(
    scenario: Scenario,
    graph: TransitionGraph,
    params: tuple[BehaviorParams, BehaviorParams],
    catalog: Catalog,
    settings: ConcessionSettings | None = None,
) -> Pathway:
    """Walk the transition graph for one scenario; pure in its arguments."""
    pkg = catalog.get(scenario.package)
    terms = negotiation_terms(scenario, params, settings)
    walk = _Walk(
        scenario=scenario,
        graph=graph,
        traveler=params[0],
        agent=params[1],
        tracker=PriceTracker(scenario, terms),
        rng=_rng(scenario.seed, _ENCODER_STREAM),
        pkg_prices={a.name: (float(a.price), a.theme) for a in pkg.amenities()},
        included=list(scenario.included),
        services=[scenario.tier_selection[c] for c in CATEGORIES],
        belief={t: 1.0 for t in pkg.amenity_themes} | {a.theme: 1.0 for a in pkg.amenities()},
    )
    phase, act, role = START
    walk.emit((act, role, phase))
    while walk.turn <= MAX_TURNS:
        if walk.last.act is A.ACKNOWLEDGE_ACCEPTANCE:
            break
        if walk.last.speaker is Role.AGENT:
            _traveler_turn(walk)
        else:
            _agent_turn(walk)

    events = tuple(walk.events)
    accept = next((e for e in events if e.act is A.ACCEPT), None)
    if accept is not None:
        return Pathway(scenario, events, Outcome.AGREED, accept.price, terms)
    return Pathway(scenario, events, Outcome.EXPIRED, None, terms)


# ---------------------------------------------------------------- validation


class ViolationKind(str, Enum):
    LENGTH = "Length"
    PREFIX = "Prefix"
    ALTERNATION = "Alternation"
    ILLEGAL_TRANSITION = "IllegalTransition"
    SLOT_MISMATCH = "SlotMismatch"
    OUTCOME_MISMATCH = "OutcomeMismatch"
    LEDGER_MISMATCH = "LedgerMismatch"
    PREMATURE_ACCEPT = "PrematureAccept"
    PRICE_STRETCH = "PriceStretch"
    ARGUMENT_STRETCH = "ArgumentStretch"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    turn: int | None
    detail: str

    def __str__(self) -> str:
        where = "pathway" if self.turn is None else f"turn {self.turn}"
        return f"{self.kind.value}@{where}: {self.detail}"


_PREFIX = ((A.GREET_ASK, Role.AGENT), (A.ELICIT_PREFERENCE, Role.TRAVELER), (A.INFORM, Role.AGENT))
LEDGER_TOLERANCE = 0.01


def validate_pathway(
    p: Pathway,
    graph: TransitionGraph,
    params: tuple[BehaviorParams, BehaviorParams] | None = None,
) -> list[Violation]:
    """Check structure, slots and price consistency; returns all violations found."""
    out: list[Violation] = []
    ev = p.events

    def bad(kind, turn, detail):
        out.append(Violation(kind, turn, detail))

    if not MIN_TURNS <= len(ev) <= MAX_TURNS:
        bad(ViolationKind.LENGTH, None, f"{len(ev)} turns outside [{MIN_TURNS}, {MAX_TURNS}]")
    if tuple((e.act, e.speaker) for e in ev[:3]) != _PREFIX:
        bad(ViolationKind.PREFIX, None, "pathway must open with Greet-Ask, Elicit-preference, Inform")
    for i, e in enumerate(ev):
        if e.turn != i + 1:
            bad(ViolationKind.ALTERNATION, e.turn, f"turn numbered {e.turn}, expected {i + 1}")
        if i and e.speaker is ev[i - 1].speaker:
            bad(ViolationKind.ALTERNATION, e.turn, f"{e.speaker.value} speaks twice in a row")
        elif i and not graph.is_legal(
            (ev[i - 1].phase, ev[i - 1].act, ev[i - 1].speaker), (e.phase, e.act, e.speaker)
        ):
            bad(ViolationKind.ILLEGAL_TRANSITION, e.turn, f"{ev[i - 1].act.value} -> {e.act.value}")
        if (e.price is not None) != is_price_bearing(e.act):
            bad(ViolationKind.SLOT_MISMATCH, e.turn, f"price slot on {e.act.value}")
        if (e.amenity is not None) != (e.act in X_ACTS):
            bad(ViolationKind.SLOT_MISMATCH, e.turn, f"amenity slot on {e.act.value}")
        if (e.delta is not None) != (e.act in DELTA_ACTS):
            bad(ViolationKind.SLOT_MISMATCH, e.turn, f"delta slot on {e.act.value}")

    accepts_at = [i for i, e in enumerate(ev) if e.act is A.ACCEPT]
    agreed = p.outcome is Outcome.AGREED
    if agreed != bool(accepts_at):
        bad(ViolationKind.OUTCOME_MISMATCH, None, f"outcome {p.outcome.value} with {len(accepts_at)} Accept acts")
    for i in accepts_at:
        if ev[i + 1:] and [e.act for e in ev[i + 1:]] != [A.ACKNOWLEDGE_ACCEPTANCE]:
            bad(ViolationKind.OUTCOME_MISMATCH, ev[i].turn, "Accept must be followed only by Acknowledge-acceptance")
    for i, e in enumerate(ev):
        if e.act is A.ACKNOWLEDGE_ACCEPTANCE and (i == 0 or ev[i - 1].act is not A.ACCEPT):
            bad(ViolationKind.OUTCOME_MISMATCH, e.turn, "Acknowledge-acceptance without a preceding Accept")
    if agreed and accepts_at and p.final_price is not None:
        if abs(p.final_price - ev[accepts_at[0]].price) > LEDGER_TOLERANCE:
            bad(ViolationKind.OUTCOME_MISMATCH, None, "final price differs from the accepted price")

    _replay_prices(p, bad)
    if params is not None:
        _check_stretches(p, params, bad)
    return out


def _replay_prices(p: Pathway, bad) -> None:
    try:
        tracker = PriceTracker(p.scenario, p.terms)
    except ABNFlowError as exc:
        bad(ViolationKind.LEDGER_MISMATCH, None, f"cannot start ledger: {exc}")
        return
    pending: float | None = None
    for e in p.events:
        try:
            expected = None
            if e.act in _PRICE_MOVES and e.speaker is Role.AGENT:
                expected = tracker.agent_move()
            elif e.act is A.NEGOTIATE_PRICE_DECREASE:
                expected = tracker.traveler_move()
            elif e.act is A.TELL_PRICE:
                expected = tracker.ledger.agent_price
            elif e.act is A.ACCEPT:
                if not tracker.closes():
                    bad(ViolationKind.PREMATURE_ACCEPT, e.turn, "accept condition not met")
                expected = tracker.accept_price()
            elif e.act in DELTA_ACTS:
                pending = e.delta
            elif e.act is A.PROVIDE_CONSENT and pending is not None:
                tracker.apply_delta(pending)
                pending = None
            elif e.act is A.DISAGREE_X:
                pass
        except ABNFlowError as exc:
            bad(ViolationKind.LEDGER_MISMATCH, e.turn, f"ledger replay failed: {exc}")
            return
        if expected is not None and e.price is not None and not math.isclose(
            e.price, expected, rel_tol=0.0, abs_tol=LEDGER_TOLERANCE
        ):
            bad(ViolationKind.LEDGER_MISMATCH, e.turn, f"{e.act.value} price {e.price:.2f}, ledger says {expected:.2f}")


def _check_stretches(p: Pathway, params, bad) -> None:
    t_params, a_params = params
    cap = min(t_params.max_price_rounds, a_params.max_price_rounds)
    budget = {Role.TRAVELER: t_params.argument_turn_budget, Role.AGENT: a_params.argument_turn_budget}
    run = 0
    arg = {Role.TRAVELER: 0, Role.AGENT: 0}
    for e in p.events:
        if e.act in DELTA_ACTS:
            run = 0
        elif e.act in _PRICE_MOVES and e.speaker is Role.AGENT:
            run += 1
            if run > cap:
                bad(ViolationKind.PRICE_STRETCH, e.turn, f"{run} agent price moves without an amenity proposal (cap {cap})")
        if e.phase is Phase.ARGUMENTATION:
            arg[e.speaker] += 1
            if arg[e.speaker] > budget[e.speaker]:
                bad(ViolationKind.ARGUMENT_STRETCH, e.turn,
                    f"{e.speaker.value} argues {arg[e.speaker]} turns (budget {budget[e.speaker]})")
        else:
            arg = {Role.TRAVELER: 0, Role.AGENT: 0}
