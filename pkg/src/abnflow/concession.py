"""Exponential price concession between traveler and agent.

Each party moves toward the other's latest offer by a factor ``exp(-c * k)``
of the current gap, ``k`` being the per-party proposal round (1, 2, ...).
The agent's concession factor depends on how far apart the opening prices
are (see ``BudgetClass``); the traveler gets a smaller one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import ABNFlowError

LOW_BUDGET_RATIO = Fraction(13, 20)  # 0.65
HIGH_BUDGET_RATIO = Fraction(17, 20)  # 0.85


class ConcessionError(ABNFlowError):
    pass


class NonPositivePrice(ConcessionError):
    pass


class NegativeGap(ConcessionError):
    """Traveler is above the agent before a step; the deal should have closed."""


class BudgetClass(str, Enum):
    LOW = "Low"
    MODERATE = "Moderate"
    HIGH = "High"

    @property
    def c_agent(self) -> float:
        return DEFAULT_C[self]


DEFAULT_C = {BudgetClass.LOW: 1.2, BudgetClass.MODERATE: 0.9, BudgetClass.HIGH: 0.6}


class Outcome(str, Enum):
    AGREED = "Agreed"
    EXPIRED = "Expired"


@dataclass(frozen=True)
class ConcessionSettings:
    """Tunable knobs; the defaults reproduce the budget-class c table."""

    c_table: dict[BudgetClass, float] = field(default_factory=lambda: dict(DEFAULT_C))
    traveler_c_ratio: float = 0.3
    min_price_ratio: float = 0.85
    phi_mean: float = 0.05
    phi_sd: float = 0.01
    phi_low: float = 0.01
    phi_high: float = 0.10
    verbatim: bool = False

    def c_for(self, budget: BudgetClass) -> float:
        return self.c_table[budget]


@dataclass(frozen=True)
class NegotiationLedger:
    agent_min_price: float
    agent_price: float
    traveler_price: float
    phi: float
    c_agent: float
    c_traveler: float
    round_k: int = 0

    def __post_init__(self):
        if not self.agent_min_price > 0:
            raise NonPositivePrice("agent minimum price must be positive")
        if self.agent_price < self.agent_min_price:
            raise ConcessionError("agent price below its minimum")
        if not self.traveler_price > 0:
            raise NonPositivePrice("traveler price must be positive")
        if not 0.0 < self.phi < 1.0:
            raise ConcessionError("phi must lie in (0, 1)")
        if not 0.0 < self.c_traveler < self.c_agent:
            raise ConcessionError("need 0 < c_traveler < c_agent")
        if self.round_k < 0:
            raise ConcessionError("round counter must be non-negative")

    @property
    def gap(self) -> float:
        return self.agent_price - self.traveler_price

    def shifted(self, delta: float) -> NegotiationLedger:
        """Both offers and the agent floor move by an amenity price change."""
        return replace(
            self,
            agent_min_price=self.agent_min_price + delta,
            agent_price=self.agent_price + delta,
            traveler_price=self.traveler_price + delta,
        )


def _decimal(x: float) -> Fraction:
    # floats are read as the shortest decimal that prints them, so 0.85 is 17/20
    return Fraction(repr(float(x))) if isinstance(x, float) else Fraction(x)


def classify_budget(traveler_init: float, agent_init: float) -> BudgetClass:
    """Budget class from the opening prices; both boundaries are inclusive."""
    if traveler_init <= 0 or agent_init <= 0:
        raise NonPositivePrice(f"prices must be positive: {traveler_init}, {agent_init}")
    t, a = _decimal(traveler_init), _decimal(agent_init)
    if t <= LOW_BUDGET_RATIO * a:
        return BudgetClass.LOW
    if t >= HIGH_BUDGET_RATIO * a:
        return BudgetClass.HIGH
    return BudgetClass.MODERATE


def agent_step(ledger: NegotiationLedger) -> float:
    gap = ledger.gap
    if gap < 0:
        raise NegativeGap(f"traveler {ledger.traveler_price} above agent {ledger.agent_price}")
    proposal = ledger.traveler_price + gap * math.exp(-ledger.c_agent * ledger.round_k)
    return max(proposal, ledger.agent_min_price)


def traveler_step(ledger: NegotiationLedger, verbatim: bool = False) -> float:
    """Traveler counter-offer for round ``ledger.round_k``.

    The default anchors the move at the traveler's own previous offer. With
    ``verbatim`` the anchor is the agent's previous offer, which overshoots it.
    """
    gap = ledger.gap
    if gap < 0:
        raise NegativeGap(f"traveler {ledger.traveler_price} above agent {ledger.agent_price}")
    anchor = ledger.agent_price if verbatim else ledger.traveler_price
    return anchor + gap * math.exp(-ledger.c_traveler * ledger.round_k)


def should_accept(traveler_price: float, agent_price: float, phi: float) -> bool:
    """Threshold test ``traveler_price <= agent_price - phi * agent_price``."""
    return traveler_price <= agent_price - phi * agent_price


def within_tolerance(traveler_price: float, agent_price: float, phi: float) -> bool:
    """Closing test used by the simulator: the traveler's standing offer is
    within ``phi`` of the agent's price (gap <= phi * agent_price)."""
    return traveler_price >= agent_price - phi * agent_price


def accepts(ledger: NegotiationLedger, verbatim: bool = False) -> bool:
    if verbatim:
        return should_accept(ledger.traveler_price, ledger.agent_price, ledger.phi)
    return within_tolerance(ledger.traveler_price, ledger.agent_price, ledger.phi)


def agreed_price(ledger: NegotiationLedger, verbatim: bool = False) -> float:
    # default: the traveler takes the agent's price; verbatim: the agent takes the traveler's
    return ledger.traveler_price if verbatim else ledger.agent_price


@dataclass(frozen=True)
class PriceStep:
    party: str  # "agent" | "traveler"
    k: int
    price: float


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[PriceStep, ...]
    outcome: Outcome
    final_price: float | None
    rounds: int

    def prices(self, party: str) -> list[float]:
        return [s.price for s in self.steps if s.party == party]

    def round_gaps(self) -> list[float]:
        """Opening gap, then the gap after each traveler counter-offer."""
        gaps = []
        a = t = None
        for s in self.steps:
            if s.party == "agent":
                a = s.price
                if s.k == 0 and t is not None:
                    gaps.append(a - t)
            else:
                t = s.price
                if s.k > 0:
                    gaps.append(a - t)
        return gaps


def run_recursion(
    p_t0: float,
    p_a0: float,
    c_a: float,
    c_t: float,
    phi: float,
    max_rounds: int,
    *,
    agent_min_price: float | None = None,
    min_price_ratio: float = 0.85,
    verbatim: bool = False,
) -> Trajectory:
    """Alternate agent and traveler steps until the deal closes or rounds run out.

    Round 0 checks the opening offers. Each round k then has the agent step,
    a closing check against the traveler's standing offer, and the traveler's
    counter-offer.
    """
    if p_t0 > p_a0:
        raise NegativeGap(f"opening traveler price {p_t0} above agent price {p_a0}")
    floor = min_price_ratio * p_a0 if agent_min_price is None else agent_min_price
    floor = min(floor, p_a0)
    ledger = NegotiationLedger(floor, p_a0, p_t0, phi, c_a, c_t, 0)
    steps = [PriceStep("traveler", 0, p_t0), PriceStep("agent", 0, p_a0)]
    if accepts(ledger, verbatim):
        return Trajectory(tuple(steps), Outcome.AGREED, agreed_price(ledger, verbatim), 0)
    for k in range(1, max_rounds + 1):
        ledger = replace(ledger, round_k=k)
        ledger = replace(ledger, agent_price=agent_step(ledger))
        steps.append(PriceStep("agent", k, ledger.agent_price))
        if accepts(ledger, verbatim):
            return Trajectory(tuple(steps), Outcome.AGREED, agreed_price(ledger, verbatim), k)
        t_new = traveler_step(ledger, verbatim)
        steps.append(PriceStep("traveler", k, t_new))
        if t_new >= ledger.agent_price:
            return Trajectory(tuple(steps), Outcome.AGREED, ledger.agent_price, k)
        ledger = replace(ledger, traveler_price=t_new)
    return Trajectory(tuple(steps), Outcome.EXPIRED, None, max_rounds)


def sample_phi(rng: np.random.Generator, settings: ConcessionSettings | None = None) -> float:
    s = settings or ConcessionSettings()
    return float(np.clip(rng.normal(s.phi_mean, s.phi_sd), s.phi_low, s.phi_high))


def traveler_c(c_agent_base: float, scale: float, settings: ConcessionSettings | None = None) -> float:
    s = settings or ConcessionSettings()
    return s.traveler_c_ratio * c_agent_base * scale
