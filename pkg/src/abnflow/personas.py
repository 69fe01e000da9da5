"""Negotiator profiles and their numeric behaviour mapping.

Profiles serialize as their short codes (``Ag``, ``Di``, ``Om``, ``Ar``, ``CC`` ...
``BL``, ``QC``, ``BC``, ``B&QC``). The numbers that drive the simulation live in
a JSON table (bundled ``data/personas.json``) so experiments can override them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError


class ArgProfile(str, Enum):
    AGREEABLE = "Ag"
    DISAGREEABLE = "Di"
    OPEN_MINDED = "Om"
    ARGUMENTATIVE = "Ar"


TRAVELER_ARGS = (ArgProfile.AGREEABLE, ArgProfile.DISAGREEABLE)
AGENT_ARGS = (ArgProfile.OPEN_MINDED, ArgProfile.ARGUMENTATIVE)


class PreferenceProfile(str, Enum):
    CULTURE_CREATURE = "CC"
    ACTION_AGENT = "AAg"
    AVID_ATHLETE = "AAt"
    THRILL_SEEKER = "TS"
    TRAIL_TREKKER = "TT"
    ESCAPIST = "E"
    SHOPPING_SHARK = "SSh"
    BOATER = "B"
    SIGHT_SEEKER = "SSe"
    BEACH_LOVER = "BL"


class BuyingStyle(str, Enum):
    QUALITY = "QC"
    BUDGET = "BC"
    BUDGET_AND_QUALITY = "B&QC"


@dataclass(frozen=True)
class TravelerPersona:
    arg: ArgProfile
    pref: PreferenceProfile
    buy: BuyingStyle

    def __post_init__(self):
        if self.arg not in TRAVELER_ARGS:
            raise ValueError(f"traveler cannot take argumentation profile {self.arg.value}")

    def to_dict(self) -> dict:
        return {"arg": self.arg.value, "pref": self.pref.value, "buy": self.buy.value}

    @classmethod
    def from_dict(cls, d: dict) -> TravelerPersona:
        return cls(ArgProfile(d["arg"]), PreferenceProfile(d["pref"]), BuyingStyle(d["buy"]))


@dataclass(frozen=True)
class AgentPersona:
    arg: ArgProfile

    def __post_init__(self):
        if self.arg not in AGENT_ARGS:
            raise ValueError(f"agent cannot take argumentation profile {self.arg.value}")

    def to_dict(self) -> dict:
        return {"arg": self.arg.value}

    @classmethod
    def from_dict(cls, d: dict) -> AgentPersona:
        return cls(ArgProfile(d["arg"]))


@dataclass(frozen=True)
class BehaviorParams:
    concession_scale: float
    max_price_rounds: int
    argument_turn_budget: int
    amenity_accept_prob: float
    justification_demand_prob: float

    def __post_init__(self):
        if not self.concession_scale > 0:
            raise ValueError("concession_scale must be positive")
        if self.max_price_rounds < 1:
            raise ValueError("max_price_rounds must be >= 1")
        if self.argument_turn_budget < 0:
            raise ValueError("argument_turn_budget must be >= 0")
        for name in ("amenity_accept_prob", "justification_demand_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class PersonaTable:
    """Everything persona-related that is configurable, loaded from JSON."""

    behavior: dict[ArgProfile, BehaviorParams]
    arg_descriptions: dict[ArgProfile, str]
    pref_descriptions: dict[PreferenceProfile, str]
    pref_themes: dict[PreferenceProfile, frozenset[str]]
    buy_descriptions: dict[BuyingStyle, str]
    price_shift: dict[BuyingStyle, float]
    elevated_pref: float = 0.85
    baseline_pref: float = 0.35

    def describe(self, profile: ArgProfile | PreferenceProfile | BuyingStyle) -> str:
        if isinstance(profile, ArgProfile):
            return self.arg_descriptions[profile]
        if isinstance(profile, PreferenceProfile):
            return self.pref_descriptions[profile]
        return self.buy_descriptions[profile]


FULL_NAMES = {
    ArgProfile.AGREEABLE: "Agreeable",
    ArgProfile.DISAGREEABLE: "Disagreeable",
    ArgProfile.OPEN_MINDED: "Open-minded",
    ArgProfile.ARGUMENTATIVE: "Argumentative",
    PreferenceProfile.CULTURE_CREATURE: "Culture Creature",
    PreferenceProfile.ACTION_AGENT: "Action Agent",
    PreferenceProfile.AVID_ATHLETE: "Avid Athlete",
    PreferenceProfile.THRILL_SEEKER: "Thrill Seeker",
    PreferenceProfile.TRAIL_TREKKER: "Trail Trekker",
    PreferenceProfile.ESCAPIST: "Escapist",
    PreferenceProfile.SHOPPING_SHARK: "Shopping Shark",
    PreferenceProfile.BOATER: "Boater",
    PreferenceProfile.SIGHT_SEEKER: "Sight Seeker",
    PreferenceProfile.BEACH_LOVER: "Beach Lover",
    BuyingStyle.QUALITY: "Quality-concerned",
    BuyingStyle.BUDGET: "Budget-concerned",
    BuyingStyle.BUDGET_AND_QUALITY: "Budget-&-Quality-concerned",
}


def full_name(profile: ArgProfile | PreferenceProfile | BuyingStyle) -> str:
    return FULL_NAMES[profile]


def _table_from_dict(raw: dict[str, Any]) -> PersonaTable:
    try:
        args = raw["argumentation"]
        behavior = {}
        arg_desc = {}
        for p in ArgProfile:
            row = args[p.value]
            behavior[p] = BehaviorParams(
                concession_scale=float(row["concession_scale"]),
                max_price_rounds=int(row["max_price_rounds"]),
                argument_turn_budget=int(row["argument_turn_budget"]),
                amenity_accept_prob=float(row["amenity_accept_prob"]),
                justification_demand_prob=float(row["justification_demand_prob"]),
            )
            arg_desc[p] = row["description"]
        prefs = raw["preference"]
        pref_desc = {p: prefs[p.value]["description"] for p in PreferenceProfile}
        pref_themes = {p: frozenset(t.lower() for t in prefs[p.value]["themes"]) for p in PreferenceProfile}
        buys = raw["buying"]
        buy_desc = {b: buys[b.value]["description"] for b in BuyingStyle}
        shift = {b: float(buys[b.value]["price_shift"]) for b in BuyingStyle}
        pref_levels = raw.get("amenity_pref", {})
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed persona table: {exc!r}") from exc
    return PersonaTable(
        behavior=behavior,
        arg_descriptions=arg_desc,
        pref_descriptions=pref_desc,
        pref_themes=pref_themes,
        buy_descriptions=buy_desc,
        price_shift=shift,
        elevated_pref=float(pref_levels.get("elevated", 0.85)),
        baseline_pref=float(pref_levels.get("baseline", 0.35)),
    )


def load_persona_table(path: str | Path | None = None) -> PersonaTable:
    if path is None:
        text = resources.files("abnflow.data").joinpath("personas.json").read_text(encoding="utf-8")
    else:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"persona table not found: {p}")
        text = p.read_text(encoding="utf-8")
    return _table_from_dict(json.loads(text))


_DEFAULT_TABLE: PersonaTable | None = None


def default_table() -> PersonaTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = load_persona_table()
    return _DEFAULT_TABLE


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(stream,)))


_PREFS = tuple(PreferenceProfile)
_BUYS = tuple(BuyingStyle)


def sample_traveler(seed: int) -> TravelerPersona:
    """Uniform draw over the 2 x 10 x 3 traveler profile space."""
    rng = _rng(seed, 11)
    idx = int(rng.integers(len(TRAVELER_ARGS) * len(_PREFS) * len(_BUYS)))
    a, rest = divmod(idx, len(_PREFS) * len(_BUYS))
    p, b = divmod(rest, len(_BUYS))
    return TravelerPersona(TRAVELER_ARGS[a], _PREFS[p], _BUYS[b])


def sample_agent(seed: int) -> AgentPersona:
    rng = _rng(seed, 12)
    return AgentPersona(AGENT_ARGS[int(rng.integers(len(AGENT_ARGS)))])


def behavior_params(
    traveler: TravelerPersona, agent: AgentPersona, table: PersonaTable | None = None
) -> tuple[BehaviorParams, BehaviorParams]:
    """(traveler params, agent params) for a pairing; a pure table lookup."""
    table = table or default_table()
    return table.behavior[traveler.arg], table.behavior[agent.arg]
