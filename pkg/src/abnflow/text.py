"""Text normalisation shared by the filters and the metrics."""

from __future__ import annotations

import re

_PUNCT = re.compile(r"([^\w\s'])")
_SPACE = re.compile(r"\s+")


def normalize_utterance(text: str) -> str:
    """Lowercase and collapse whitespace; used for repetition checks."""
    return _SPACE.sub(" ", text.strip().lower())


def tokenize(text: str) -> list[str]:
    """Lowercase, detach punctuation, split on whitespace.

    >>> tokenize("Hello, world!")
    ['hello', ',', 'world', '!']
    """
    return _PUNCT.sub(r" \1 ", text.lower()).split()


def ngrams(tokens: list[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]
