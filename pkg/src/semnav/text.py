"""Text normalization, tokenization and set similarity.

Everything downstream (resolver steps, preference keys, memory grouping)
funnels through these three functions, so they are deliberately small and
total: no input raises.
"""
from __future__ import annotations

import unicodedata
from functools import lru_cache
from importlib import resources

# s-comma and t-comma do not decompose under NFD in every normal form the
# input may arrive in, so they get an explicit mapping before decomposition.
_ROMANIAN_OVERRIDES = str.maketrans(
    {
        "ș": "s",  # ș
        "ț": "t",  # ț
        "Ș": "s",  # Ș
        "Ț": "t",  # Ț
        "ş": "s",  # ş (cedilla variant)
        "ţ": "t",  # ţ
        "Ş": "s",
        "Ţ": "t",
    }
)


def normalize_text(raw: str) -> str:
    """Lowercase, underscores to spaces, diacritics stripped, whitespace collapsed."""
    text = raw.translate(_ROMANIAN_OVERRIDES).lower()
    text = text.replace("_", " ")
    text = unicodedata.normalize("NFD", text)
    text = "".join(ch for ch in text if unicodedata.category(ch) != "Mn")
    # punctuation separates words but never survives into tokens
    text = "".join(ch if ch.isalnum() or ch.isspace() else " " for ch in text)
    return " ".join(text.split())


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    """Combined English + Romanian stopword set (stored pre-normalized)."""
    words: set[str] = set()
    for name in ("stopwords_en.txt", "stopwords_ro.txt"):
        data = resources.files("semnav.data").joinpath(name).read_text(encoding="utf-8")
        for line in data.splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                words.add(line)
    return frozenset(words)


def tokenize(normalized: str) -> set[str]:
    """Whitespace-split a normalized string and drop stopwords."""
    return {tok for tok in normalized.split() if tok not in stopwords()}


def jaccard_similarity(a: set[str], b: set[str]) -> float:
    """|a ∩ b| / |a ∪ b|; two empty sets are defined as 0, not 1.

    An empty instruction must never match a stored preference.
    """
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


def token_signature(raw: str) -> str:
    """Canonical grouping key: normalized, stopword-free, sorted, space-joined."""
    return " ".join(sorted(tokenize(normalize_text(raw))))
