"""LLM-judge scoring with the four fixed rubrics and reference abbreviation."""

from __future__ import annotations

import hashlib
import re
from pathlib import Path

from ..errors import SlidegenError
from ..modelio import Message, ModelRequest

RUBRICS = ("page_design", "text_coherence", "text_image_relevance", "page_consistency")

_SCORE = re.compile(r"score\s*[:=]\s*(-?\d+(?:\.\d+)?)", re.I)


class UnparseableScore(SlidegenError):
    pass


class ScoreOutOfRange(SlidegenError):
    def __init__(self, value):
        super().__init__(f"score {value} is outside 1..10")
        self.value = value


def parse_score(text: str) -> int:
    m = _SCORE.search(text)
    if m is None:
        bare = text.strip()
        if not re.fullmatch(r"-?\d+(?:\.\d+)?", bare):
            raise UnparseableScore(f"no 'Score: <n>' in reply {text[:80]!r}")
        raw = bare
    else:
        raw = m.group(1)
    value = float(raw)
    if value != int(value):
        raise UnparseableScore(f"score {raw} is not an integer")
    if not 1 <= value <= 10:
        raise ScoreOutOfRange(int(value))
    return int(value)


def judge_request(models, rubric: str, pages, reference_text: str) -> ModelRequest:
    """Rubric as the system message; the pages and reference text as the user message."""
    if rubric not in RUBRICS:
        raise ValueError(f"unknown rubric '{rubric}'")
    key = f"judge_{rubric}"
    system = models.prompts.render(key)
    user = models.prompts.render("judge_user", {"page_count": str(len(pages)), "reference_text": reference_text})
    last = user[-1]
    images = tuple(p if isinstance(p, bytes) else p.image_bytes for p in pages)
    messages = (*system, *user[:-1], Message(last.speaker, last.text, images))
    return ModelRequest("judge", messages, models.max_output_chars, key)


def judge_scores(pages, reference_text: str, models) -> dict[str, int]:
    """One vision call per rubric; returns the four integer scores."""
    pages = list(pages)
    if not pages:
        raise ValueError("judge_scores needs at least one page")
    return {r: parse_score(models.call(judge_request(models, r, pages, reference_text)).text) for r in RUBRICS}


def abbreviate_reference(body_text: str, models, cache_dir: str | Path | None = None) -> str:
    """Model-shortened reference text, cached per document under ``cache_dir``."""
    if not body_text.strip():
        raise ValueError("body text is empty")
    cache = None
    if cache_dir is not None:
        digest = hashlib.sha256(body_text.encode("utf-8")).hexdigest()[:16]
        cache = Path(cache_dir) / f"reference.{digest}.md"
        if cache.is_file():
            return cache.read_text(encoding="utf-8")
    text = models.ask("abbreviator", "abbreviator", {"body_text": body_text}).text
    if cache is not None:
        cache.parent.mkdir(parents=True, exist_ok=True)
        tmp = cache.with_name(cache.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        tmp.replace(cache)
    return text
