"""Turn pathways into text, from the bundled template bank or a remote generator.

Template mode is pure and offline. External mode sends one act-local prompt
per turn to an HTTP endpoint (``POST {task_overview, demonstration, input,
top_p, temperature}`` answered by ``{"text": ...}``).
"""

from __future__ import annotations

import json
import logging
import os
import string
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

import httpx
import numpy as np

from .acts import DialogAct, Phase, Role, is_price_bearing
from .catalog import Catalog, load_catalog
from .concession import Outcome
from .errors import ABNFlowError, ConfigError
from .pathway import ActEvent, Pathway, Scenario, Terms, money
from .personas import PersonaTable, default_table, full_name
from .text import normalize_utterance

logger = logging.getLogger(__name__)

A = DialogAct

TOP_P = 0.95
TEMPERATURE = 1.0
CREDENTIAL_ENV = "ABNFLOW_API_KEY"

_SLOTS_BY_ACT: dict[DialogAct, frozenset[str]] = {
    A.INFORM: frozenset({"package", "price", "services", "amenities"}),
    A.ELICIT_PREFERENCE: frozenset({"preference_blurb"}),
    A.TELL_PRICE: frozenset({"price", "package"}),
}
_TEMPLATE_STREAM = 31


class RealizeError(ABNFlowError):
    pass


class MissingTemplate(RealizeError):
    pass


class EndpointUnreachable(RealizeError):
    pass


class GenerationEmpty(RealizeError):
    pass


def allowed_slots(act: DialogAct) -> frozenset[str]:
    slots = set(_SLOTS_BY_ACT.get(act, ()))
    if is_price_bearing(act):
        slots.add("price")
    if act.value.endswith("-X"):
        slots.add("amenity")
    return frozenset(slots)


def _fields(text: str) -> set[str]:
    return {name for _, name, _, _ in string.Formatter().parse(text) if name}


@dataclass(frozen=True)
class UtteranceTemplate:
    act: DialogAct
    role: Role
    text: str

    def __post_init__(self):
        extra = _fields(self.text) - allowed_slots(self.act)
        if extra:
            raise ConfigError(f"template for {self.act.value}/{self.role.value} uses unfillable slots {sorted(extra)}")


@dataclass(frozen=True)
class TemplateBank:
    templates: dict[tuple[DialogAct, Role], tuple[UtteranceTemplate, ...]]
    leads: dict[Role, tuple[str, ...]]

    def variants(self, act: DialogAct, role: Role) -> tuple[UtteranceTemplate, ...]:
        found = self.templates.get((act, role))
        if not found:
            raise MissingTemplate(f"no template for {act.value} spoken by {role.value}")
        return found


def _bank_from_dict(raw: dict) -> TemplateBank:
    try:
        templates = {}
        for act_name, by_role in raw["templates"].items():
            act = DialogAct(act_name)
            for role_name, texts in by_role.items():
                role = Role(role_name)
                templates[(act, role)] = tuple(UtteranceTemplate(act, role, t) for t in texts)
        leads = {Role(r): tuple(v) for r, v in raw.get("leads", {}).items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed template bank: {exc!r}") from exc
    return TemplateBank(templates, leads)


def load_template_bank(path: str | Path | None = None) -> TemplateBank:
    if path is None:
        text = resources.files("abnflow.data").joinpath("templates.json").read_text(encoding="utf-8")
    else:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"template bank not found: {p}")
        text = p.read_text(encoding="utf-8")
    return _bank_from_dict(json.loads(text))


@lru_cache(maxsize=1)
def default_bank() -> TemplateBank:
    return load_template_bank()


@lru_cache(maxsize=1)
def _default_catalog() -> Catalog:
    return load_catalog()


@lru_cache(maxsize=1)
def _prompt_table() -> dict[str, dict[str, str]]:
    text = resources.files("abnflow.data").joinpath("prompts.json").read_text(encoding="utf-8")
    return json.loads(text)


def _join(items) -> str:
    items = list(items)
    if len(items) <= 1:
        return "".join(items)
    return ", ".join(items[:-1]) + " and " + items[-1]


def _services_phrase(scenario: Scenario) -> str:
    sel = scenario.tier_selection
    return f"{sel['accommodation']} accommodation, {sel['meals']} meals and {sel['transportation']} transportation"


def _slot_values(event: ActEvent, scenario: Scenario, catalog: Catalog, table: PersonaTable) -> dict[str, str]:
    pkg = catalog.get(scenario.package)
    price = event.price if event.price is not None else scenario.agent_init_price
    return {
        "price": money(price),
        "amenity": event.amenity or "",
        "package": pkg.name,
        "services": _services_phrase(scenario),
        "amenities": _join(scenario.included),
        "preference_blurb": table.pref_descriptions[scenario.traveler.pref],
    }


def _candidates(event: ActEvent, scenario: Scenario, seed: int, bank: TemplateBank, values: dict) -> list[str]:
    """All surface variants for an event, in a seed-determined order."""
    variants = bank.variants(event.act, event.speaker)
    leads = bank.leads.get(event.speaker, ("",)) or ("",)
    rng = np.random.default_rng([int(seed) & (2**64 - 1), _TEMPLATE_STREAM, event.turn])
    combos = [(t, l) for t in range(len(variants)) for l in range(len(leads))]
    # plain template first in each permutation block so lead-ins only appear on redraws
    order = [combos[i] for i in rng.permutation(len(combos))]
    order.sort(key=lambda c: c[1] != 0)
    out = []
    for t, l in order:
        body = variants[t].text.format_map(values)
        out.append(f"{leads[l]} {body}".strip() if leads[l] else body)
    return out


def render_template(
    event: ActEvent,
    scenario: Scenario,
    seed: int,
    *,
    catalog: Catalog | None = None,
    bank: TemplateBank | None = None,
    table: PersonaTable | None = None,
) -> str:
    bank = bank or default_bank()
    values = _slot_values(event, scenario, catalog or _default_catalog(), table or default_table())
    return _candidates(event, scenario, seed, bank, values)[0]


# ---------------------------------------------------------------- prompts


@dataclass(frozen=True)
class Prompt:
    task_overview: str
    demonstration: str
    input: str

    def __post_init__(self):
        if not (self.task_overview.strip() and self.demonstration.strip() and self.input.strip()):
            raise RealizeError("prompt parts must be non-empty")

    def to_request(self) -> dict[str, Any]:
        return {
            "task_overview": self.task_overview,
            "demonstration": self.demonstration,
            "input": self.input,
            "top_p": TOP_P,
            "temperature": TEMPERATURE,
        }


def _profile_text(profile, table: PersonaTable) -> str:
    return f"{full_name(profile)} ({table.describe(profile)})"


def build_prompt(
    event: ActEvent,
    scenario: Scenario,
    *,
    catalog: Catalog | None = None,
    table: PersonaTable | None = None,
) -> Prompt:
    catalog = catalog or _default_catalog()
    table = table or default_table()
    row = _prompt_table()[event.act.value]
    pkg = catalog.get(scenario.package)
    sel = scenario.tier_selection
    service = (
        f"{sel['accommodation']} as accommodation option, {sel['meals']} as meal option "
        f"and {sel['transportation']} as transportation option"
    )
    speaker_arg = scenario.agent.arg if event.speaker is Role.AGENT else scenario.traveler.arg
    values = {
        "description": table.describe(scenario.traveler.pref),
        "package": pkg.name if event.act is not A.INFORM else f"'{pkg.name}'",
        "cost": money(scenario.agent_init_price),
        "service": service,
        "amenity": event.amenity if event.amenity is not None else _join(scenario.included),
        "price": money(event.price) if event.price is not None else money(scenario.agent_init_price),
        "role": "travel agent" if event.speaker is Role.AGENT else "human traveler",
        "arg_profile": _profile_text(speaker_arg, table),
        "buying_style": _profile_text(scenario.traveler.buy, table),
    }
    if event.act is A.INFORM:
        values["amenity"] = _join(scenario.included)
    return Prompt(row["overview"], row["demonstration"], row["input"].format_map(values))


# ---------------------------------------------------------------- conversations


@dataclass(frozen=True)
class Turn:
    speaker: Role
    act: DialogAct | None
    text: str
    phase: Phase | None = None
    price: float | None = None
    amenity: str | None = None
    delta: float | None = None

    def event(self, turn: int) -> ActEvent:
        return ActEvent(turn, self.speaker, self.act, self.phase, self.price, self.amenity, self.delta)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "speaker": self.speaker.value,
            "act": None if self.act is None else self.act.value,
            "text": self.text,
        }
        if self.phase is not None:
            d["phase"] = self.phase.value
        if self.price is not None:
            d["price"] = money(self.price)
        if self.amenity is not None:
            d["amenity"] = self.amenity
        if self.delta is not None:
            d["delta"] = money(self.delta)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Turn:
        return cls(
            speaker=Role(d["speaker"]),
            act=DialogAct(d["act"]) if d.get("act") else None,
            text=d.get("text", ""),
            phase=Phase(d["phase"]) if d.get("phase") else None,
            price=float(d["price"]) if d.get("price") is not None else None,
            amenity=d.get("amenity"),
            delta=float(d["delta"]) if d.get("delta") is not None else None,
        )


@dataclass(frozen=True)
class Conversation:
    id: str
    turns: tuple[Turn, ...]
    scenario: Scenario | None = None
    outcome: Outcome | None = None
    final_price: float | None = None
    terms: Terms | None = None
    provenance: str = "template"
    defects: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.turns)

    @property
    def defective(self) -> bool:
        return bool(self.defects)

    def to_pathway(self) -> Pathway:
        if self.scenario is None or self.outcome is None or self.terms is None:
            raise RealizeError(f"conversation {self.id} carries no pathway data")
        events = tuple(t.event(i + 1) for i, t in enumerate(self.turns))
        return Pathway(self.scenario, events, self.outcome, self.final_price, self.terms)

    def transcript(self) -> str:
        names = {Role.AGENT: "Travel Agent", Role.TRAVELER: "Traveler"}
        return "\n".join(f"{names.get(t.speaker, t.speaker.value)}: {t.text}" for t in self.turns)


def _turns_from(p: Pathway, texts: list[str]) -> tuple[Turn, ...]:
    return tuple(
        Turn(e.speaker, e.act, text, e.phase, e.price, e.amenity, e.delta)
        for e, text in zip(p.events, texts)
    )


# ---------------------------------------------------------------- external generator


@dataclass(frozen=True)
class EndpointSettings:
    url: str
    timeout: float = 30.0
    retries: int = 2
    backoff: float = 0.5
    max_in_flight: int = 4
    endpoint_id: str | None = None

    def __post_init__(self):
        if self.retries < 0 or self.max_in_flight < 1 or self.timeout <= 0:
            raise ConfigError("endpoint settings need retries >= 0, max_in_flight >= 1, timeout > 0")

    @property
    def label(self) -> str:
        return self.endpoint_id or self.url


class ExternalGenerator:
    """Thread-safe client for the generation endpoint.

    One instance may serve many conversations at once; ``max_in_flight``
    bounds the number of concurrent requests across all of them.
    """

    def __init__(self, settings: EndpointSettings, client: httpx.Client | None = None):
        self.settings = settings
        headers = {}
        token = os.environ.get(CREDENTIAL_ENV)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = client or httpx.Client(timeout=settings.timeout, headers=headers)
        self._owns_client = client is None
        self._slots = threading.BoundedSemaphore(settings.max_in_flight)

    def __enter__(self) -> ExternalGenerator:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        if self._owns_client:
            self._client.close()

    def post(self, body: dict) -> dict:
        last: Exception | None = None
        for attempt in range(self.settings.retries + 1):
            if attempt:
                time.sleep(self.settings.backoff * attempt)
            try:
                with self._slots:
                    resp = self._client.post(self.settings.url, json=body)
                if resp.status_code >= 500:
                    last = RealizeError(f"HTTP {resp.status_code}")
                    continue
                resp.raise_for_status()
                return resp.json()
            except (httpx.TransportError, httpx.HTTPStatusError, ValueError) as exc:
                last = exc
        raise EndpointUnreachable(f"{self.settings.label}: {last}")

    def generate(self, prompt: Prompt) -> str:
        data = self.post(prompt.to_request())
        text = data.get("text") if isinstance(data, dict) else None
        if not isinstance(text, str) or not text.strip():
            raise GenerationEmpty(f"{self.settings.label} returned no text")
        return text


def realize_conversation(
    p: Pathway,
    mode: str | ExternalGenerator = "template",
    seed: int = 0,
    *,
    conv_id: str = "conv",
    catalog: Catalog | None = None,
    bank: TemplateBank | None = None,
    table: PersonaTable | None = None,
) -> Conversation:
    """Realize every event of ``p`` as one text turn.

    ``mode`` is ``"template"`` or an ``ExternalGenerator``. In template mode a
    speaker never repeats an utterance within the conversation as long as the
    bank has an unused variant left.
    """
    catalog = catalog or _default_catalog()
    table = table or default_table()
    scenario = p.scenario
    if isinstance(mode, ExternalGenerator):
        return _realize_external(p, mode, conv_id, catalog, table)
    if mode != "template":
        raise ConfigError(f"unknown realization mode {mode!r}")

    bank = bank or default_bank()
    used: dict[Role, set[str]] = {Role.AGENT: set(), Role.TRAVELER: set()}
    texts = []
    for e in p.events:
        values = _slot_values(e, scenario, catalog, table)
        options = _candidates(e, scenario, seed, bank, values)
        seen = used[e.speaker]
        text = next((o for o in options if normalize_utterance(o) not in seen), options[0])
        seen.add(normalize_utterance(text))
        texts.append(text)
    return Conversation(conv_id, _turns_from(p, texts), scenario, p.outcome, p.final_price, p.terms, "template")


def _realize_external(p: Pathway, gen: ExternalGenerator, conv_id, catalog, table) -> Conversation:
    prompts = [build_prompt(e, p.scenario, catalog=catalog, table=table) for e in p.events]

    def call(prompt: Prompt) -> str | None:
        try:
            return gen.generate(prompt)
        except GenerationEmpty:
            return None

    with ThreadPoolExecutor(max_workers=gen.settings.max_in_flight) as pool:
        results = list(pool.map(call, prompts))
    defects = tuple(f"GenerationEmpty@{i + 1}" for i, r in enumerate(results) if r is None)
    if defects:
        logger.warning("conversation %s: %d empty generations", conv_id, len(defects))
    texts = [r or "" for r in results]
    return Conversation(
        conv_id, _turns_from(p, texts), p.scenario, p.outcome, p.final_price, p.terms,
        f"external:{gen.settings.label}", defects,
    )
