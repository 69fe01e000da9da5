"""Two-stage conversation filtering: rule checks, then expert judges.

Each conversation gets eleven facet ratings. Nine use a 1-3 scale and pass
only at 3; consistency and toxicity use 0-1 and pass at 0 (consistent,
non-toxic). ``strict_verbatim=True`` flips the binary pass value to 1.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable

from .acts import DialogAct
from .concession import Outcome
from .errors import ABNFlowError
from .personas import PersonaTable, default_table, full_name
from .realize import Conversation, EndpointSettings, ExternalGenerator
from .text import normalize_utterance

DEFAULT_MIN_TURNS = 8


class FilterError(ABNFlowError):
    pass


class MissingFacet(FilterError):
    pass


class ReportFileError(FilterError):
    def __init__(self, path: str, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


# ---------------------------------------------------------------- rule stage


class RuleKind(str, Enum):
    EMPTY_UTTERANCE = "EmptyUtterance"
    REPETITIVE_UTTERANCE = "RepetitiveUtterance"
    INSUFFICIENT_ROUNDS = "InsufficientRounds"
    INSUFFICIENT_ACT_ANNOTATIONS = "InsufficientActAnnotations"
    IMPROPER_OPEN_CLOSE = "ImproperOpenClose"


@dataclass(frozen=True)
class RuleViolation:
    kind: RuleKind
    location: int | str  # 1-based turn or "conversation"

    def __str__(self) -> str:
        return f"{self.kind.value}@{self.location}"


_CLOSING_ACTS = (DialogAct.ACCEPT, DialogAct.ACKNOWLEDGE_ACCEPTANCE)


def rule_filter(c: Conversation, min_turns: int = DEFAULT_MIN_TURNS) -> list[RuleViolation]:
    out: list[RuleViolation] = []
    seen: dict[object, set[str]] = {}
    for i, t in enumerate(c.turns, start=1):
        norm = normalize_utterance(t.text or "")
        if not norm:
            out.append(RuleViolation(RuleKind.EMPTY_UTTERANCE, i))
        else:
            mine = seen.setdefault(t.speaker, set())
            if norm in mine:
                out.append(RuleViolation(RuleKind.REPETITIVE_UTTERANCE, i))
            mine.add(norm)
        if t.act is None:
            out.append(RuleViolation(RuleKind.INSUFFICIENT_ACT_ANNOTATIONS, i))
    if len(c.turns) < min_turns:
        out.append(RuleViolation(RuleKind.INSUFFICIENT_ROUNDS, "conversation"))
    opens = bool(c.turns) and c.turns[0].act is DialogAct.GREET_ASK
    closes = bool(c.turns) and (c.turns[-1].act in _CLOSING_ACTS or c.outcome is Outcome.EXPIRED)
    if not (opens and closes):
        out.append(RuleViolation(RuleKind.IMPROPER_OPEN_CLOSE, "conversation"))
    return out


# ---------------------------------------------------------------- expert stage


class Facet(str, Enum):
    COHERENCE = "GCQE-Coherence"
    CONSISTENCY = "GCQE-Consistency"
    DIVERSITY = "GCQE-Diversity"
    TOPIC_DEPTH = "GCQE-TopicDepth"
    UNDERSTANDING = "GCQE-Understanding"
    FLEXIBILITY = "GCQE-Flexibility"
    LIKEABILITY = "GCQE-Likeability"
    PCE = "PCE"
    NEE = "NEE"
    AEE = "AEE"
    TE = "TE"


class Stage(str, Enum):
    GCQE = "GCQE"
    PCE = "PCE"
    NEE = "NEE"
    AEE = "AEE"
    TE = "TE"


STAGE_ORDER = tuple(Stage)
BINARY_FACETS = frozenset({Facet.CONSISTENCY, Facet.TE})


def stage_of(facet: Facet) -> Stage:
    return Stage.GCQE if facet.value.startswith("GCQE") else Stage(facet.value)


def rating_range(facet: Facet) -> tuple[int, ...]:
    return (0, 1) if facet in BINARY_FACETS else (1, 2, 3)


def passes(facet: Facet, rating: int, strict_verbatim: bool = False) -> bool:
    if facet in BINARY_FACETS:
        return rating == (1 if strict_verbatim else 0)
    return rating == 3


@dataclass(frozen=True)
class ExpertScore:
    expert: Facet
    rating: int
    rationale: str = ""

    def __post_init__(self):
        if isinstance(self.rating, bool) or self.rating not in rating_range(self.expert):
            raise FilterError(f"{self.expert.value} rating {self.rating!r} outside {rating_range(self.expert)}")


@dataclass(frozen=True)
class Decision:
    retained: bool
    failed: Facet | None = None

    def __str__(self) -> str:
        return "retain" if self.retained else f"discard:{self.failed.value}"


@dataclass(frozen=True)
class ExpertReport:
    conversation_id: str
    scores: tuple[ExpertScore, ...]
    strict_verbatim: bool = False

    def score(self, facet: Facet) -> ExpertScore:
        for s in self.scores:
            if s.expert is facet:
                return s
        raise MissingFacet(f"{self.conversation_id}: no {facet.value} score")

    def check_complete(self) -> None:
        have = {s.expert for s in self.scores}
        missing = [f.value for f in Facet if f not in have]
        if missing:
            raise MissingFacet(f"{self.conversation_id}: missing facets {missing}")

    def first_failure(self) -> Facet | None:
        """First failing facet in stage order (GCQE facets in declaration order)."""
        self.check_complete()
        for facet in Facet:
            if not passes(facet, self.score(facet).rating, self.strict_verbatim):
                return facet
        return None

    @property
    def decision(self) -> Decision:
        failed = self.first_failure()
        return Decision(failed is None, failed)

    def to_dict(self) -> dict:
        return {
            "id": self.conversation_id,
            "scores": {s.expert.value: {"rating": s.rating, "rationale": s.rationale} for s in self.scores},
            "decision": str(self.decision),
        }

    @classmethod
    def from_dict(cls, d: dict, strict_verbatim: bool = False) -> ExpertReport:
        scores = tuple(
            ExpertScore(Facet(name), int(v["rating"]), str(v.get("rationale", "")))
            for name, v in d["scores"].items()
        )
        return cls(str(d["id"]), scores, strict_verbatim)


def retain(report: ExpertReport) -> bool:
    return report.decision.retained


@dataclass(frozen=True)
class SurvivalRow:
    stage: Stage
    survivors: int
    percent: float


def survival_table(reports: Iterable[ExpertReport], order: tuple[Stage, ...] = STAGE_ORDER) -> list[SurvivalRow]:
    """Cumulative survivors after each stage; a conversation survives a stage
    when it passes every facet of that stage and of all earlier ones."""
    reports = list(reports)
    total = len(reports)
    alive = list(reports)
    rows = []
    for stage in order:
        alive = [
            r for r in alive
            if all(passes(s.expert, s.rating, r.strict_verbatim) for s in r.scores if stage_of(s.expert) is stage)
        ]
        pct = 100.0 * len(alive) / total if total else 0.0
        rows.append(SurvivalRow(stage, len(alive), pct))
    return rows


# ---------------------------------------------------------------- judge prompts and transport


@lru_cache(maxsize=1)
def _judge_table() -> dict[str, str]:
    text = resources.files("abnflow.data").joinpath("judge_prompts.json").read_text(encoding="utf-8")
    return json.loads(text)


@dataclass(frozen=True)
class JudgePrompt:
    instruction: str
    conversation: str

    def to_request(self) -> dict:
        return {"instruction": self.instruction, "conversation": self.conversation}

    def render(self) -> str:
        return f"[Instruction] {self.instruction}\nInput\n{self.conversation}\nOutput\nRating:\nRationale:"


def _with_description(profile, table: PersonaTable) -> str:
    return f"{full_name(profile)} ({table.describe(profile)})"


def build_expert_prompt(
    expert: Facet,
    c: Conversation,
    *,
    table: PersonaTable | None = None,
    strict_verbatim: bool = False,
) -> JudgePrompt:
    prompts = _judge_table()
    key = expert.value
    if expert is Facet.CONSISTENCY and strict_verbatim:
        key += "/strict"
    instruction = prompts[key]
    if expert is Facet.PCE:
        if c.scenario is None:
            raise FilterError(f"{c.id}: personality prompt needs the scenario personas")
        table = table or default_table()
        sc = c.scenario
        instruction = instruction.format(
            agent_arg=_with_description(sc.agent.arg, table),
            traveler_arg=_with_description(sc.traveler.arg, table),
            traveler_pref=_with_description(sc.traveler.pref, table),
            traveler_buy=_with_description(sc.traveler.buy, table),
        )
    return JudgePrompt(instruction, c.transcript())


class JudgeClient:
    """Sends judge prompts over the endpoint contract shared with generation."""

    def __init__(self, settings: EndpointSettings, client=None):
        self._gen = ExternalGenerator(settings, client)
        self.settings = settings

    def __enter__(self) -> JudgeClient:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        self._gen.close()

    def score(self, facet: Facet, prompt: JudgePrompt) -> ExpertScore:
        data = self._gen.post(prompt.to_request())
        try:
            return ExpertScore(facet, int(data["rating"]), str(data.get("rationale", "")))
        except (KeyError, TypeError, ValueError) as exc:
            raise FilterError(f"malformed judge response for {facet.value}: {data!r}") from exc

    def judge(self, c: Conversation, *, strict_verbatim: bool = False, table: PersonaTable | None = None) -> ExpertReport:
        prompts = [(f, build_expert_prompt(f, c, table=table, strict_verbatim=strict_verbatim)) for f in Facet]
        with ThreadPoolExecutor(max_workers=self.settings.max_in_flight) as pool:
            scores = list(pool.map(lambda fp: self.score(*fp), prompts))
        return ExpertReport(c.id, tuple(scores), strict_verbatim)


# ---------------------------------------------------------------- report files


def write_reports(path: str | Path, reports: Iterable[ExpertReport]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in reports:
            f.write(json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")


def load_reports(path: str | Path, strict_verbatim: bool = False) -> dict[str, ExpertReport]:
    """Read a JSONL report file keyed by conversation id."""
    p = Path(path)
    if not p.is_file():
        raise FilterError(f"report file not found: {p}")
    out: dict[str, ExpertReport] = {}
    with open(p, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                report = ExpertReport.from_dict(json.loads(line), strict_verbatim)
                report.check_complete()
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, FilterError) as exc:
                raise ReportFileError(str(p), lineno, str(exc)) from exc
            if report.conversation_id in out:
                raise ReportFileError(str(p), lineno, f"duplicate id {report.conversation_id}")
            out[report.conversation_id] = report
    return out
