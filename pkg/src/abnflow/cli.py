"""Command-line entry point: ``abnflow generate|filter|stats|validate``.

Exit codes: 0 success, 1 validation problems, 2 configuration or input
errors (nothing written), 3 endpoint failure after retries (partial output
flushed, manifest marked incomplete).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ABNFlowError, ConfigError
from .filterkit import FilterError, load_reports
from .pipeline import (
    STATS_JSON,
    STATS_TEXT,
    CorpusFormatError,
    FilterSettings,
    PipelineConfig,
    build_report,
    filter_corpus,
    load_config,
    load_resources,
    read_corpus,
    render_report,
    run_pipeline,
    validate_corpus,
    write_outputs,
)
from .realize import EndpointSettings, EndpointUnreachable

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_CONFIG = 2
EXIT_ENDPOINT = 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="abnflow", description="Negotiation dialogue simulator and corpus toolkit.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate, filter and write a corpus")
    gen.add_argument("--config", type=Path, help="JSON config file")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--count", type=int)
    gen.add_argument("--mode", choices=("template", "external"))
    gen.add_argument("--endpoint", help="generation endpoint url (external mode)")
    gen.add_argument("--verbatim-concession", action="store_true",
                     help="use the literal accept rule and traveler step")
    gen.add_argument("--reports", type=Path, help="expert report JSONL to filter with")
    gen.add_argument("--no-figures", action="store_true")
    gen.add_argument("--out", type=Path, required=True)

    flt = sub.add_parser("filter", help="re-filter existing corpus files")
    flt.add_argument("inputs", nargs="+", type=Path)
    flt.add_argument("--reports", type=Path, help="expert report JSONL; rule stage only when omitted")
    flt.add_argument("--judge-endpoint", help="judge endpoint url")
    flt.add_argument("--min-turns", type=int, default=8)
    flt.add_argument("--strict-verbatim", action="store_true")
    flt.add_argument("--config", type=Path, help="config supplying persona/catalog paths")
    flt.add_argument("--no-figures", action="store_true")
    flt.add_argument("--out", type=Path, required=True)

    st = sub.add_parser("stats", help="corpus statistics, diversity and act distribution")
    st.add_argument("inputs", nargs="+", type=Path)
    st.add_argument("--out", type=Path, help="write stats.json, stats.txt and figures here")
    st.add_argument("--no-figures", action="store_true")

    val = sub.add_parser("validate", help="re-run pathway and rule validators")
    val.add_argument("inputs", nargs="+", type=Path)
    val.add_argument("--config", type=Path)
    val.add_argument("--min-turns", type=int, default=8)
    return ap


def _generate_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.count is not None:
        cfg = replace(cfg, count=args.count)
    if args.mode is not None:
        cfg = replace(cfg, mode=args.mode)
    if args.endpoint:
        cfg = replace(cfg, endpoint=EndpointSettings(args.endpoint))
    if args.verbatim_concession:
        cfg = replace(cfg, concession=replace(cfg.concession, verbatim=True))
    if args.reports is not None:
        cfg = replace(cfg, filter=replace(cfg.filter, judge="file", reports=args.reports))
    if args.no_figures:
        cfg = replace(cfg, figures=False)
    cfg.check()
    return cfg


def cmd_generate(args) -> int:
    cfg = _generate_config(args)
    result = run_pipeline(cfg, args.out)
    print(f"generated {result.generated}: retained {result.retained}, rejected {result.rejected} -> {result.out_dir}")
    return EXIT_OK


def cmd_filter(args) -> int:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    res = load_resources(cfg)
    if args.reports is not None:
        settings = FilterSettings(args.min_turns, "file", args.reports, None, args.strict_verbatim)
    elif args.judge_endpoint:
        settings = FilterSettings(args.min_turns, "endpoint", None, EndpointSettings(args.judge_endpoint),
                                  args.strict_verbatim)
    else:
        settings = FilterSettings(args.min_turns, "none")
    reports = load_reports(args.reports, args.strict_verbatim) if args.reports else None
    convs = read_corpus(args.inputs)
    outcome = filter_corpus(convs, settings, table=res.table, reports=reports)
    result = write_outputs(args.out, convs, outcome, figures=not args.no_figures)
    print(f"filtered {result.generated}: retained {result.retained}, rejected {result.rejected} -> {result.out_dir}")
    return EXIT_OK


def cmd_stats(args) -> int:
    convs = read_corpus(args.inputs)
    if not convs:
        raise ConfigError("no conversations in the input files")
    report = build_report(convs, [], None)
    text = render_report(report)
    if args.out is None:
        sys.stdout.write(text)
        return EXIT_OK
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / STATS_JSON, "w", encoding="utf-8", newline="\n") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    (args.out / STATS_TEXT).write_text(text, encoding="utf-8", newline="\n")
    if not args.no_figures:
        from .plots import render_figures

        render_figures(report, convs, args.out / "figures")
    print(f"stats for {len(convs)} conversations -> {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    res = load_resources(cfg)
    dirty = False
    for path in args.inputs:
        report = validate_corpus(path, graph=res.graph, table=res.table, min_turns=args.min_turns)
        sys.stdout.write(report.render())
        dirty |= not report.clean
    return EXIT_VIOLATIONS if dirty else EXIT_OK


_COMMANDS = {"generate": cmd_generate, "filter": cmd_filter, "stats": cmd_stats, "validate": cmd_validate}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except EndpointUnreachable as exc:
        print(f"error: endpoint failure: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT
    except (ConfigError, FilterError, CorpusFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ABNFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
