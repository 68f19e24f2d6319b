"""Text normalization shared by lexical similarity and anchor matching."""

import re

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and strip punctuation, returning word tokens."""
    return _TOKEN_RE.findall(text.lower())


def token_set_jaccard(a: str, b: str) -> float:
    """Jaccard overlap of the token sets of two strings (0 when both empty)."""
    sa, sb = set(tokenize(a)), set(tokenize(b))
    union = sa | sb
    if not union:
        return 0.0
    return len(sa & sb) / len(union)
