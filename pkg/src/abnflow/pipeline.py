"""End-to-end orchestration: config, seeded generation, filtering, persistence.

Config files are UTF-8 JSON. Relative paths inside a config resolve against
the config file's directory. A minimal config::

    {"seed": 7, "count": 100, "mode": "template"}

Optional keys: ``catalog``, ``personas``, ``transitions``, ``templates``
(paths; bundled defaults when absent), ``workers``, ``figures``,
``endpoint`` (url, timeout, retries, backoff, max_in_flight, endpoint_id),
``concession`` (c_low, c_moderate, c_high, traveler_c_ratio,
min_price_ratio, phi_mean, phi_sd, phi_low, phi_high, verbatim) and
``filter`` (min_turns, judge = none|file|endpoint, reports, judge_endpoint,
strict_verbatim).
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Iterator

import numpy as np

from .acts import TransitionGraph, load_graph
from .catalog import Catalog, CatalogError, load_catalog
from .concession import BudgetClass, ConcessionSettings, Outcome
from .errors import ABNFlowError, ConfigError
from .filterkit import (
    DEFAULT_MIN_TURNS,
    ExpertReport,
    FilterError,
    JudgeClient,
    load_reports,
    rule_filter,
    survival_table,
    write_reports,
)
from .metrics import metrics_report, report_text
from .pathway import (
    Pathway,
    PathwayError,
    Scenario,
    Terms,
    encode_pathway,
    money,
    sample_scenario,
    validate_pathway,
)
from .personas import PersonaTable, behavior_params, load_persona_table
from .realize import (
    Conversation,
    EndpointSettings,
    EndpointUnreachable,
    ExternalGenerator,
    TemplateBank,
    Turn,
    default_bank,
    load_template_bank,
    realize_conversation,
)

logger = logging.getLogger(__name__)

RETAINED_FILE = "retained.jsonl"
REJECTED_FILE = "rejected.jsonl"
REPORTS_FILE = "expert_reports.jsonl"
STATS_JSON = "stats.json"
STATS_TEXT = "stats.txt"
MANIFEST_FILE = "manifest.json"
JUDGE_MODES = ("none", "file", "endpoint")


class CorpusFormatError(ABNFlowError):
    def __init__(self, path: str, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class FilterSettings:
    min_turns: int = DEFAULT_MIN_TURNS
    judge: str = "none"
    reports: Path | None = None
    judge_endpoint: EndpointSettings | None = None
    strict_verbatim: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    count: int = 100
    mode: str = "template"
    catalog: Path | None = None
    personas: Path | None = None
    transitions: Path | None = None
    templates: Path | None = None
    endpoint: EndpointSettings | None = None
    concession: ConcessionSettings = field(default_factory=ConcessionSettings)
    filter: FilterSettings = field(default_factory=FilterSettings)
    workers: int = 4
    figures: bool = True

    def check(self) -> None:
        if isinstance(self.count, bool) or not isinstance(self.count, int) or self.count < 1:
            raise ConfigError(f"count must be an integer >= 1, got {self.count!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.mode not in ("template", "external"):
            raise ConfigError(f"mode must be 'template' or 'external', got {self.mode!r}")
        if self.mode == "external" and self.endpoint is None:
            raise ConfigError("external mode needs an endpoint url")
        for name in ("catalog", "personas", "transitions", "templates"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"{name} path does not exist: {p}")
        f = self.filter
        if f.judge not in JUDGE_MODES:
            raise ConfigError(f"filter.judge must be one of {JUDGE_MODES}, got {f.judge!r}")
        if f.judge == "file" and (f.reports is None or not Path(f.reports).is_file()):
            raise ConfigError(f"filter.reports file does not exist: {f.reports}")
        if f.judge == "endpoint" and f.judge_endpoint is None:
            raise ConfigError("filter.judge = endpoint needs filter.judge_endpoint")
        if f.min_turns < 1:
            raise ConfigError("filter.min_turns must be >= 1")


_C_KEYS = {"c_low": BudgetClass.LOW, "c_moderate": BudgetClass.MODERATE, "c_high": BudgetClass.HIGH}
_CONCESSION_KEYS = set(_C_KEYS) | {
    "traveler_c_ratio", "min_price_ratio", "phi_mean", "phi_sd", "phi_low", "phi_high", "verbatim",
}


def _endpoint(raw: Any, where: str) -> EndpointSettings:
    if isinstance(raw, str):
        raw = {"url": raw}
    if not isinstance(raw, dict) or "url" not in raw:
        raise ConfigError(f"{where} needs a url")
    try:
        return EndpointSettings(**raw)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _concession(raw: dict) -> ConcessionSettings:
    unknown = set(raw) - _CONCESSION_KEYS
    if unknown:
        raise ConfigError(f"unknown concession keys: {sorted(unknown)}")
    base = ConcessionSettings()
    table = dict(base.c_table)
    for key, budget in _C_KEYS.items():
        if key in raw:
            table[budget] = float(raw[key])
    rest = {k: v for k, v in raw.items() if k not in _C_KEYS}
    s = replace(base, c_table=table, **rest)
    if not 0 < s.phi_low <= s.phi_high < 1 or s.phi_sd < 0:
        raise ConfigError("phi bounds must satisfy 0 < phi_low <= phi_high < 1 and phi_sd >= 0")
    if any(c <= 0 for c in s.c_table.values()) or not 0 < s.min_price_ratio <= 1:
        raise ConfigError("c values must be positive and min_price_ratio in (0, 1]")
    return s


def config_from_dict(raw: dict, base_dir: str | Path = ".") -> PipelineConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    base = Path(base_dir)

    def path(v):
        return None if v is None else (base / v)

    known = {"seed", "count", "mode", "catalog", "personas", "transitions", "templates",
             "endpoint", "concession", "filter", "workers", "figures"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    fraw = raw.get("filter", {}) or {}
    ffields = {"min_turns", "judge", "reports", "judge_endpoint", "strict_verbatim"}
    if set(fraw) - ffields:
        raise ConfigError(f"unknown filter keys: {sorted(set(fraw) - ffields)}")
    filt = FilterSettings(
        min_turns=int(fraw.get("min_turns", DEFAULT_MIN_TURNS)),
        judge=fraw.get("judge", "none"),
        reports=path(fraw.get("reports")),
        judge_endpoint=_endpoint(fraw["judge_endpoint"], "filter.judge_endpoint") if fraw.get("judge_endpoint") else None,
        strict_verbatim=bool(fraw.get("strict_verbatim", False)),
    )
    try:
        cfg = PipelineConfig(
            seed=int(raw.get("seed", 0)),
            count=raw.get("count", 100),
            mode=raw.get("mode", "template"),
            catalog=path(raw.get("catalog")),
            personas=path(raw.get("personas")),
            transitions=path(raw.get("transitions")),
            templates=path(raw.get("templates")),
            endpoint=_endpoint(raw["endpoint"], "endpoint") if raw.get("endpoint") else None,
            concession=_concession(raw.get("concession", {}) or {}),
            filter=filt,
            workers=int(raw.get("workers", 4)),
            figures=bool(raw.get("figures", True)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    cfg.check()
    return cfg


def load_config(path: str | Path) -> PipelineConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from exc
    return config_from_dict(raw, p.parent)


# ---------------------------------------------------------------- seeds and resources


def conversation_seed(master: int, index: int) -> int:
    """Counter-based split: the seed of conversation ``index`` depends only on
    (master, index), never on scheduling."""
    ss = np.random.SeedSequence(int(master) & (2**64 - 1), spawn_key=(int(index),))
    hi, lo = ss.generate_state(2, dtype=np.uint32)
    return ((int(hi) << 32) | int(lo)) & (2**63 - 1)


def conversation_id(index: int) -> str:
    return f"conv-{index:05d}"


@dataclass(frozen=True)
class Resources:
    catalog: Catalog
    table: PersonaTable
    graph: TransitionGraph
    bank: TemplateBank


def load_resources(cfg: PipelineConfig) -> Resources:
    try:
        return Resources(
            catalog=load_catalog(cfg.catalog),
            table=load_persona_table(cfg.personas),
            graph=load_graph(cfg.transitions),
            bank=load_template_bank(cfg.templates) if cfg.templates else default_bank(),
        )
    except (CatalogError, PathwayError, ABNFlowError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot load resources: {exc}") from exc


# ---------------------------------------------------------------- records


def conversation_to_record(c: Conversation, status: dict | None = None) -> dict:
    rec = {
        "id": c.id,
        "scenario": c.scenario.to_dict() if c.scenario else None,
        "turns": [t.to_dict() for t in c.turns],
        "outcome": c.outcome.value if c.outcome else None,
        "final_price": money(c.final_price) if c.final_price is not None else None,
        "terms": c.terms.to_dict() if c.terms else None,
        "provenance": c.provenance,
        "defects": list(c.defects),
    }
    if status is not None:
        rec["filter"] = status
    return rec


def record_to_conversation(rec: dict) -> Conversation:
    return Conversation(
        id=str(rec["id"]),
        turns=tuple(Turn.from_dict(t) for t in rec["turns"]),
        scenario=Scenario.from_dict(rec["scenario"]) if rec.get("scenario") else None,
        outcome=Outcome(rec["outcome"]) if rec.get("outcome") else None,
        final_price=float(rec["final_price"]) if rec.get("final_price") is not None else None,
        terms=Terms.from_dict(rec["terms"]) if rec.get("terms") else None,
        provenance=str(rec.get("provenance", "template")),
        defects=tuple(rec.get("defects", ())),
    )


def dumps_record(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def iter_records(path: str | Path) -> Iterator[tuple[int, dict | CorpusFormatError]]:
    """Yield (line number, record) per non-blank line; malformed lines yield
    a ``CorpusFormatError`` in place of the record."""
    p = Path(path)
    with open(p, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict):
                    raise ValueError("record is not a JSON object")
                record_to_conversation(rec)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, ABNFlowError) as exc:
                yield lineno, CorpusFormatError(str(p), lineno, f"malformed record: {exc}")
                continue
            yield lineno, rec


def read_corpus(paths: Iterable[str | Path]) -> list[Conversation]:
    """Load conversations, failing on the first malformed line."""
    out: list[Conversation] = []
    for path in paths:
        if not Path(path).is_file():
            raise ConfigError(f"corpus file not found: {path}")
        for _, rec in iter_records(path):
            if isinstance(rec, CorpusFormatError):
                raise rec
            out.append(record_to_conversation(rec))
    ids = [c.id for c in out]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate conversation ids across input corpora")
    return out


def _write_jsonl(path: Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for rec in records:
            f.write(dumps_record(rec) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------- generation


def generate_one(
    index: int, cfg: PipelineConfig, res: Resources, generator: ExternalGenerator | None = None
) -> Conversation:
    seed = conversation_seed(cfg.seed, index)
    scenario = sample_scenario(res.catalog, seed, res.table, cfg.concession)
    params = behavior_params(scenario.traveler, scenario.agent, res.table)
    pathway = encode_pathway(scenario, res.graph, params, res.catalog, cfg.concession)
    mode = generator if generator is not None else "template"
    return realize_conversation(
        pathway, mode, seed, conv_id=conversation_id(index),
        catalog=res.catalog, bank=res.bank, table=res.table,
    )


def generate_corpus(
    cfg: PipelineConfig, res: Resources, generator: ExternalGenerator | None = None
) -> tuple[list[Conversation], Exception | None]:
    """Generate in index order. On an endpoint failure the completed prefix is
    returned together with the error."""
    done: list[Conversation] = []
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        futures = [pool.submit(generate_one, i, cfg, res, generator) for i in range(cfg.count)]
        failure: Exception | None = None
        for fut in futures:
            if failure is not None:
                fut.cancel()
                continue
            try:
                done.append(fut.result())
            except EndpointUnreachable as exc:
                failure = exc
    return done, failure


# ---------------------------------------------------------------- filtering


@dataclass(frozen=True)
class FilterOutcome:
    retained: list[tuple[Conversation, dict]]
    rejected: list[tuple[Conversation, dict]]
    reports: list[ExpertReport]
    survival: list[dict] | None


def filter_corpus(
    convs: list[Conversation],
    settings: FilterSettings,
    *,
    table: PersonaTable | None = None,
    reports: dict[str, ExpertReport] | None = None,
) -> FilterOutcome:
    """Rule stage on everything, expert stage on the rule survivors."""
    judged: list[ExpertReport] = []
    retained, rejected = [], []
    stage_two = []
    for c in convs:
        violations = [str(v) for v in rule_filter(c, settings.min_turns)]
        if violations:
            rejected.append((c, {"status": "rejected", "rule_violations": violations, "decision": None}))
        else:
            stage_two.append(c)

    if settings.judge == "none":
        for c in stage_two:
            retained.append((c, {"status": "retained", "rule_violations": [], "decision": None}))
        return FilterOutcome(retained, rejected, [], None)

    if settings.judge == "file":
        reports = reports if reports is not None else load_reports(settings.reports, settings.strict_verbatim)
        lookup = reports
    else:
        with JudgeClient(settings.judge_endpoint) as client:
            lookup = {
                c.id: client.judge(c, strict_verbatim=settings.strict_verbatim, table=table)
                for c in stage_two
            }
    for c in stage_two:
        if c.id not in lookup:
            raise FilterError(f"no expert report for {c.id}")
        report = lookup[c.id]
        judged.append(report)
        decision = report.decision
        status = {
            "status": "retained" if decision.retained else "rejected",
            "rule_violations": [],
            "decision": str(decision),
            "expert_report": f"{REPORTS_FILE}#{c.id}",
        }
        (retained if decision.retained else rejected).append((c, status))
    survival = [
        {"stage": r.stage.value, "survivors": r.survivors, "percent": r.percent}
        for r in survival_table(judged)
    ]
    return FilterOutcome(retained, rejected, judged, survival)


# ---------------------------------------------------------------- outputs


@dataclass
class PipelineResult:
    out_dir: Path
    generated: int
    retained: int
    rejected: int
    complete: bool
    error: str | None = None
    files: dict[str, str] = field(default_factory=dict)


def _index_key(item: tuple[Conversation, dict]) -> str:
    return item[0].id


def build_report(convs: list[Conversation], retained: list[Conversation], survival) -> dict:
    report: dict = {"generated": metrics_report(convs) if convs else None}
    report["retained"] = metrics_report(retained) if retained else None
    report["survival"] = survival
    return report


def render_report(report: dict) -> str:
    parts = []
    for scope in ("generated", "retained"):
        if report.get(scope):
            parts.append(f"== {scope} corpus ==\n\n" + report_text(report[scope]))
    if report.get("survival"):
        sub = {"stats": {}, "acts": {}, "survival": report["survival"]}
        text = report_text(sub)
        parts.append("== expert stage ==\n" + text[text.index("\nCumulative survival"):])
    return "\n".join(parts)


def write_outputs(
    out_dir: Path,
    convs: list[Conversation],
    outcome: FilterOutcome,
    *,
    figures: bool = True,
    manifest_extra: dict | None = None,
    complete: bool = True,
    error: str | None = None,
) -> PipelineResult:
    out_dir.mkdir(parents=True, exist_ok=True)
    retained = sorted(outcome.retained, key=_index_key)
    rejected = sorted(outcome.rejected, key=_index_key)
    _write_jsonl(out_dir / RETAINED_FILE, (conversation_to_record(c, s) for c, s in retained))
    _write_jsonl(out_dir / REJECTED_FILE, (conversation_to_record(c, s) for c, s in rejected))
    written = [RETAINED_FILE, REJECTED_FILE]
    if outcome.reports:
        write_reports(out_dir / REPORTS_FILE, sorted(outcome.reports, key=lambda r: r.conversation_id))
        written.append(REPORTS_FILE)

    report = build_report(convs, [c for c, _ in retained], outcome.survival)
    with open(out_dir / STATS_JSON, "w", encoding="utf-8", newline="\n") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    (out_dir / STATS_TEXT).write_text(render_report(report), encoding="utf-8", newline="\n")
    written += [STATS_JSON, STATS_TEXT]

    if figures and convs:
        from .plots import render_figures

        written += [str(p.relative_to(out_dir)) for p in render_figures(report, convs, out_dir / "figures")]

    hashes = {name: _sha256(out_dir / name) for name in written}
    manifest = {
        "complete": complete,
        "error": error,
        "generated": len(convs),
        "retained": len(retained),
        "rejected": len(rejected),
        "files": hashes,
    }
    manifest.update(manifest_extra or {})
    with open(out_dir / MANIFEST_FILE, "w", encoding="utf-8", newline="\n") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return PipelineResult(out_dir, len(convs), len(retained), len(rejected), complete, error, hashes)


def run_pipeline(cfg: PipelineConfig, out_dir: str | Path) -> PipelineResult:
    """Generate, filter and persist one corpus.

    Config problems raise ``ConfigError`` before anything is written. An
    endpoint failure still flushes the completed prefix, marked incomplete in
    the manifest, and then re-raises.
    """
    cfg.check()
    res = load_resources(cfg)
    reports = None
    if cfg.filter.judge == "file":
        reports = load_reports(cfg.filter.reports, cfg.filter.strict_verbatim)
    out = Path(out_dir)
    extra = {"seed": cfg.seed, "count": cfg.count, "mode": cfg.mode, "verbatim": cfg.concession.verbatim}

    generator = ExternalGenerator(cfg.endpoint) if cfg.mode == "external" else None
    try:
        convs, failure = generate_corpus(cfg, res, generator)
    finally:
        if generator is not None:
            generator.close()

    logger.info("generated %d of %d conversations", len(convs), cfg.count)
    if failure is not None:
        logger.warning("generation stopped early: %s", failure)
        partial = filter_corpus(convs, replace(cfg.filter, judge="none"), table=res.table)
        write_outputs(out, convs, partial, figures=False, manifest_extra=extra,
                      complete=False, error=str(failure))
        raise failure

    try:
        outcome = filter_corpus(convs, cfg.filter, table=res.table, reports=reports)
    except EndpointUnreachable as exc:
        partial = filter_corpus(convs, replace(cfg.filter, judge="none"), table=res.table)
        write_outputs(out, convs, partial, figures=False, manifest_extra=extra,
                      complete=False, error=f"judge stage: {exc}")
        raise
    logger.info("retained %d, rejected %d", len(outcome.retained), len(outcome.rejected))
    return write_outputs(out, convs, outcome, figures=cfg.figures, manifest_extra=extra)


# ---------------------------------------------------------------- validation


@dataclass(frozen=True)
class RecordProblem:
    line: int
    conversation_id: str | None
    kind: str
    detail: str

    def __str__(self) -> str:
        who = self.conversation_id or "?"
        return f"line {self.line} [{who}] {self.kind}: {self.detail}"


@dataclass(frozen=True)
class CorpusValidation:
    path: str
    records: int
    problems: tuple[RecordProblem, ...]

    @property
    def clean(self) -> bool:
        return not self.problems

    def render(self) -> str:
        head = f"{self.path}: {self.records} records, {len(self.problems)} problems"
        return "\n".join([head] + [str(p) for p in self.problems]) + "\n"


def validate_corpus(
    path: str | Path,
    *,
    graph: TransitionGraph | None = None,
    table: PersonaTable | None = None,
    min_turns: int = DEFAULT_MIN_TURNS,
) -> CorpusValidation:
    """Re-run the pathway and rule validators over every record of a JSONL file."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"corpus file not found: {p}")
    graph = graph or load_graph()
    problems: list[RecordProblem] = []
    seen: set[str] = set()
    count = 0
    for lineno, rec in iter_records(p):
        if isinstance(rec, CorpusFormatError):
            problems.append(RecordProblem(lineno, None, "MalformedRecord", str(rec)))
            continue
        count += 1
        c = record_to_conversation(rec)
        if c.id in seen:
            problems.append(RecordProblem(lineno, c.id, "DuplicateId", "id already used earlier in the file"))
        seen.add(c.id)
        try:
            pathway: Pathway = c.to_pathway()
        except ABNFlowError as exc:
            problems.append(RecordProblem(lineno, c.id, "MalformedRecord", str(exc)))
            continue
        params = behavior_params(c.scenario.traveler, c.scenario.agent, table)
        for v in validate_pathway(pathway, graph, params):
            where = "pathway" if v.turn is None else f"turn {v.turn}"
            problems.append(RecordProblem(lineno, c.id, v.kind.value, f"{where}: {v.detail}"))
        for v in rule_filter(c, min_turns):
            problems.append(RecordProblem(lineno, c.id, v.kind.value, f"at {v.location}"))
    return CorpusValidation(str(p), count, tuple(problems))

