"""Corpus statistics, act distribution and lexical diversity.

Documents are turn utterances. Tokens come from ``text.tokenize`` (lowercase,
punctuation split off as separate tokens); n-grams never cross turns.
"""

from __future__ import annotations

import bisect
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

from .acts import DialogAct
from .errors import ABNFlowError
from .realize import Conversation
from .text import ngrams, tokenize


class MetricsError(ABNFlowError):
    pass


class EmptyCorpus(MetricsError):
    pass


class MissingAct(MetricsError):
    pass


class NoNgrams(MetricsError):
    pass


class TooFewDocuments(MetricsError):
    pass


Corpus = Sequence[Union[Conversation, str]]


def documents(corpus: Corpus) -> list[list[str]]:
    """Token lists, one per turn (a plain string counts as one turn)."""
    docs = []
    for item in corpus:
        if isinstance(item, str):
            docs.append(tokenize(item))
        else:
            docs.extend(tokenize(t.text) for t in item.turns)
    return docs


@dataclass(frozen=True)
class CorpusStats:
    conversations: int
    turns: int
    avg_turns: float
    min_turns: int
    max_turns: int
    tokens: int
    avg_tokens_per_turn: float
    avg_tokens_per_conversation: float
    unique_words: int
    unique_bigrams: int


def corpus_stats(corpus: Sequence[Conversation]) -> CorpusStats:
    if not corpus:
        raise EmptyCorpus("corpus_stats needs at least one conversation")
    lengths = [len(c.turns) for c in corpus]
    docs = documents(corpus)
    n_tokens = sum(len(d) for d in docs)
    n_turns = sum(lengths)
    return CorpusStats(
        conversations=len(corpus),
        turns=n_turns,
        avg_turns=n_turns / len(corpus),
        min_turns=min(lengths),
        max_turns=max(lengths),
        tokens=n_tokens,
        avg_tokens_per_turn=n_tokens / n_turns if n_turns else 0.0,
        avg_tokens_per_conversation=n_tokens / len(corpus),
        unique_words=len({t for d in docs for t in d}),
        unique_bigrams=len({g for d in docs for g in ngrams(d, 2)}),
    )


def act_distribution(corpus: Sequence[Conversation]) -> dict[DialogAct, tuple[int, float]]:
    counts: Counter[DialogAct] = Counter()
    for c in corpus:
        for i, t in enumerate(c.turns, start=1):
            if t.act is None:
                raise MissingAct(f"{c.id}: turn {i} has no dialog act")
            counts[t.act] += 1
    total = sum(counts.values())
    return {a: (counts[a], counts[a] / total if total else 0.0) for a in DialogAct}


def distinct_n(corpus: Corpus, n: int) -> float:
    grams = [g for d in documents(corpus) for g in ngrams(d, n)]
    if not grams:
        raise NoNgrams(f"corpus has no {n}-grams")
    return len(set(grams)) / len(grams)


def _top_two(counters: list[Counter]) -> dict[tuple, tuple[int, int, int]]:
    """gram -> (best count, document holding it, second-best count)."""
    best: dict[tuple, tuple[int, int, int]] = {}
    for i, cnt in enumerate(counters):
        for g, c in cnt.items():
            b, bi, s = best.get(g, (0, -1, 0))
            if c > b:
                best[g] = (c, i, b)
            elif c > s:
                best[g] = (b, bi, c)
    return best


def _max_other(table, g, i: int) -> int:
    b, bi, s = table.get(g, (0, -1, 0))
    return s if bi == i else b


def _closest_ref_len(length: int, sorted_lengths: list[int], counts: Counter) -> int:
    """Closest length among the other documents; ties go to the shorter one."""
    if counts[length] > 1:
        return length
    pos = bisect.bisect_left(sorted_lengths, length)
    below = sorted_lengths[pos - 1] if pos > 0 else None
    above = sorted_lengths[pos + 1] if pos + 1 < len(sorted_lengths) else None
    if below is None:
        return above
    if above is None or length - below <= above - length:
        return below
    return above


def self_bleu(corpus: Corpus, n: int) -> float:
    """Mean BLEU-n of every document against all the others as references.

    Cumulative uniform weights over orders 1..n, clipped counts, brevity
    penalty against the closest reference length. For orders >= 2 a zero
    match count is smoothed to 1 / (candidates + 1); unigram precision is
    never smoothed, so fully disjoint vocabularies score 0.
    """
    docs = documents(corpus)
    if len(docs) < 2:
        raise TooFewDocuments("self-BLEU needs at least two documents")
    per_order = [[Counter(ngrams(d, m)) for d in docs] for m in range(1, n + 1)]
    tables = [_top_two(cs) for cs in per_order]
    lengths = [len(d) for d in docs]
    sorted_lengths = sorted(lengths)
    length_counts = Counter(lengths)

    scores = []
    for i, d in enumerate(docs):
        if not d:
            scores.append(0.0)
            continue
        log_sum = 0.0
        zero = False
        for m in range(n):
            cand = per_order[m][i]
            total = sum(cand.values())
            match = sum(min(c, _max_other(tables[m], g, i)) for g, c in cand.items())
            if m == 0:
                if match == 0:
                    zero = True
                    break
                p = match / total
            else:
                p = match / total if match else 1.0 / (total + 1)
            log_sum += math.log(p)
        if zero:
            scores.append(0.0)
            continue
        r = _closest_ref_len(lengths[i], sorted_lengths, length_counts)
        c = lengths[i]
        bp = 1.0 if c > r else math.exp(1.0 - r / c)
        scores.append(bp * math.exp(log_sum / n))
    return sum(scores) / len(scores)


@dataclass(frozen=True)
class DiversityReport:
    distinct_1: float
    distinct_2: float
    self_bleu_1: float
    self_bleu_2: float


def diversity_report(corpus: Corpus) -> DiversityReport:
    return DiversityReport(
        distinct_1=distinct_n(corpus, 1),
        distinct_2=distinct_n(corpus, 2),
        self_bleu_1=self_bleu(corpus, 1),
        self_bleu_2=self_bleu(corpus, 2),
    )


# ---------------------------------------------------------------- report output


def metrics_report(corpus: Sequence[Conversation]) -> dict:
    stats = corpus_stats(corpus)
    dist = act_distribution(corpus)
    out = {
        "stats": asdict(stats),
        "acts": {a.value: {"count": c, "proportion": p} for a, (c, p) in dist.items()},
    }
    try:
        out["diversity"] = asdict(diversity_report(corpus))
    except MetricsError:
        out["diversity"] = None
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def render_table(rows: Iterable[Sequence], header: Sequence[str]) -> str:
    """Aligned plain-text table; numbers right-aligned, text left-aligned."""
    body = [[_fmt(v) for v in row] for row in rows]
    cells = [list(header)] + body
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    numeric = [all(_is_number(r[i]) for r in body) and bool(body) for i in range(len(header))]

    def line(r):
        return "  ".join(v.rjust(w) if num else v.ljust(w) for v, w, num in zip(r, widths, numeric)).rstrip()

    rule = "  ".join("-" * w for w in widths)
    return "\n".join([line(cells[0]), rule] + [line(r) for r in body]) + "\n"


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def report_text(report: dict) -> str:
    parts = ["Corpus statistics\n", render_table(report["stats"].items(), ("metric", "value"))]
    if report.get("diversity"):
        parts += ["\nLexical diversity\n", render_table(report["diversity"].items(), ("metric", "value"))]
    acts = [(a, v["count"], v["proportion"]) for a, v in report["acts"].items()]
    parts += ["\nDialog act distribution\n", render_table(acts, ("act", "count", "proportion"))]
    if report.get("survival"):
        rows = [(r["stage"], r["survivors"], r["percent"]) for r in report["survival"]]
        parts += ["\nCumulative survival\n", render_table(rows, ("stage", "survivors", "percent"))]
    return "".join(parts)


def write_report(report: dict, json_path: str | Path, text_path: str | Path) -> None:
    with open(json_path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    with open(text_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(report_text(report))
