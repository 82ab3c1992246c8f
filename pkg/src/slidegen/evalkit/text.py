"""Text metrics: tokenization, sentence splitting, ROUGE-L and embedding coverage."""

from __future__ import annotations

import re

import numpy as np

from ..errors import SlidegenError


class EmptyInput(SlidegenError):
    pass


class EmptyReference(SlidegenError):
    pass


_TOKEN = re.compile(r"\w+", re.UNICODE)

# Tokens ending in a period that do not end a sentence.
ABBREVIATIONS = frozenset({
    "e.g", "i.e", "etc", "et al", "al", "fig", "figs", "eq", "eqs", "sec", "no", "vs", "cf",
    "dr", "mr", "mrs", "ms", "prof", "approx", "resp", "incl", "vol", "pp", "ch", "tab",
})

_BOUNDARY = re.compile(r"([.!?]+)[\"')\]]*\s+")


def tokenize(text: str) -> list[str]:
    return [t.lower() for t in _TOKEN.findall(text)]


def _ends_with_abbreviation(chunk: str) -> bool:
    words = chunk.rstrip(".").split()
    if not words:
        return False
    last = words[-1].lower()
    two = " ".join(w.lower() for w in words[-2:])
    # Single capital letters are initials ("J. Smith").
    return last in ABBREVIATIONS or two in ABBREVIATIONS or (len(last) == 1 and last.isalpha())


def split_sentences(text: str) -> list[str]:
    """Split on ``.``, ``!`` and ``?`` followed by whitespace, skipping known abbreviations.

    Line breaks that separate Markdown items (bullets, headings) also end a sentence.
    """
    out: list[str] = []
    for para in re.split(r"\n\s*\n|\n(?=\s*(?:[-*+]\s|#))", text):
        para = " ".join(para.split())
        start = 0
        for m in _BOUNDARY.finditer(para):
            if m.group(1) == "." and _ends_with_abbreviation(para[start : m.end(1)]):
                continue
            piece = para[start : m.end()].strip()
            if piece:
                out.append(piece)
            start = m.end()
        tail = para[start:].strip()
        if tail:
            out.append(tail)
    return [s for s in out if tokenize(s)]


def lcs_length(a: list, b: list) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: list, reference: list) -> float:
    """ROUGE-L F-measure over token lists."""
    if not candidate or not reference:
        raise EmptyInput("rouge_l needs two nonempty token lists")
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    p = lcs / len(candidate)
    r = lcs / len(reference)
    return 2 * p * r / (p + r)


def coverage(candidate_sentences, reference_sentences, provider, direction: str = "reference_to_candidate") -> float:
    """Mean over reference sentences of the best cosine similarity to any candidate sentence.

    ``direction="candidate_to_reference"`` swaps the roles. Embeddings are unit
    vectors, so cosine is a dot product. The mean is clamped to [0, 1].
    """
    cands, refs = list(candidate_sentences), list(reference_sentences)
    if direction == "candidate_to_reference":
        cands, refs = refs, cands
    elif direction != "reference_to_candidate":
        raise ValueError(f"unknown coverage direction '{direction}'")
    if not refs:
        raise EmptyReference("coverage needs at least one reference sentence")
    if not cands:
        return 0.0
    r = np.asarray(provider.embed_texts(refs), dtype=float)
    c = np.asarray(provider.embed_texts(cands), dtype=float)
    # Row by row so each pair's similarity does not depend on how many candidates there are.
    best = np.array([(c * ri).sum(axis=1).max() for ri in r])
    return float(min(1.0, max(0.0, best.mean())))
