"""Stage 1 agents: text summarizer, image captioner and Slidev code generator."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import PurePosixPath
from typing import TYPE_CHECKING

from .descriptions import (
    ImageCatalog,
    MalformedCatalog,
    MalformedSummary,
    TextSummary,
    format_catalog,
    format_summary,
    parse_catalog,
    parse_summary,
)
from .errors import SlidegenError
from .ingest import SourceDocument
from .slidev import LayoutConstraints, SlidevDeck, image_refs

if TYPE_CHECKING:
    from .review import ReviewFeedback


class UnparseableSummary(SlidegenError):
    pass


class CatalogIncomplete(SlidegenError):
    pass


class EmptyGeneration(SlidegenError):
    pass


@lru_cache(maxsize=1)
def syntax_guide() -> str:
    return (resources.files("slidegen") / "data" / "slidev_syntax.md").read_text(encoding="utf-8")


@dataclass(frozen=True)
class GenerationContext:
    summary: TextSummary
    catalog: ImageCatalog
    syntax_guide: str
    constraints: LayoutConstraints
    feedback: "ReviewFeedback | None" = None
    # image_id -> path the deck must use for that image
    image_paths: dict[str, str] = field(default_factory=dict)

    def with_feedback(self, feedback: "ReviewFeedback") -> "GenerationContext":
        return replace(self, feedback=feedback)

    def for_slide(self, image_ids, feedback: "ReviewFeedback") -> "GenerationContext":
        """Narrowed context for regenerating one slide: only the catalog entries it uses."""
        ids = list(image_ids)
        return replace(
            self,
            catalog=self.catalog.subset(ids),
            image_paths={k: v for k, v in self.image_paths.items() if k in ids},
            feedback=feedback,
        )


def image_id_of(src: str, image_ids) -> str | None:
    """Catalog id an image path refers to, matched on the file stem (``images/img-002.png`` -> ``img-002``)."""
    stem = PurePosixPath(src.split("?")[0].split("#")[0]).stem
    return stem if stem in set(image_ids) else None


def referenced_image_ids(deck: SlidevDeck, index: int, image_ids) -> list[str]:
    found = []
    for src in image_refs(deck, index):
        i = image_id_of(src, image_ids)
        if i is not None and i not in found:
            found.append(i)
    return found


def summarize(doc: SourceDocument, models) -> TextSummary:
    if not doc.body_text.strip():
        raise ValueError("document body is empty")
    try:
        return models.ask_parsed("summarizer", "summarizer", {"body_text": doc.body_text}, parse_summary, MalformedSummary)
    except MalformedSummary as exc:
        raise UnparseableSummary(str(exc)) from exc


def _image_list(doc: SourceDocument) -> str:
    lines = []
    for k, im in enumerate(doc.images, start=1):
        snippet = " ".join(doc.context(im, 80).split())
        lines.append(f'{k}. {im.image_id} (appears near: "{snippet}")')
    return "\n".join(lines)


def caption_images(doc: SourceDocument, models) -> ImageCatalog:
    """Describe every image in one batched vision call; no call when there are no images."""
    if not doc.images:
        return ImageCatalog()
    wanted = [im.image_id for im in doc.images]

    def parse(text: str) -> ImageCatalog:
        catalog = parse_catalog(text)
        missing = [i for i in wanted if catalog.get(i) is None]
        if missing:
            raise CatalogIncomplete(f"no description for: {', '.join(missing)}")
        return ImageCatalog(tuple(catalog.get(i) for i in wanted))

    try:
        return models.ask_parsed(
            "captioner", "captioner",
            {"body_text": doc.body_text, "image_list": _image_list(doc)},
            parse, (MalformedCatalog, CatalogIncomplete),
            images=tuple(im.read_bytes() for im in doc.images),
        )
    except MalformedCatalog as exc:
        raise CatalogIncomplete(str(exc)) from exc


_OPEN_FENCE = re.compile(r"^(`{3,})\s*(markdown|md|slidev)?\s*$", re.I)


def strip_code_fences(text: str) -> str:
    """Unwrap a reply that is a single fenced Markdown block, or that embeds one among prose."""
    lines = text.strip().split("\n")
    if len(lines) >= 2:
        m = _OPEN_FENCE.match(lines[0].strip())
        if m and lines[-1].strip() == m.group(1):
            return "\n".join(lines[1:-1]).strip("\n") + "\n"
    starts = [k for k, ln in enumerate(lines) if _OPEN_FENCE.match(ln.strip()) and _OPEN_FENCE.match(ln.strip()).group(2)]
    if starts:
        fence = _OPEN_FENCE.match(lines[starts[0]].strip()).group(1)
        ends = [k for k, ln in enumerate(lines) if ln.strip() == fence and k > starts[0]]
        if ends:
            return "\n".join(lines[starts[0] + 1 : ends[-1]]).strip("\n") + "\n"
    return text


def generation_bindings(ctx: GenerationContext) -> dict[str, str]:
    paths = "\n".join(f"- {k}: {v}" for k, v in ctx.image_paths.items()) or "(no images)"
    return {
        "syntax_guide": ctx.syntax_guide,
        "summary": format_summary(ctx.summary).strip(),
        "catalog": format_catalog(ctx.catalog).strip() or "(no images)",
        "image_paths": paths,
        "constraints": ctx.constraints.describe(),
    }


def generate_code(ctx: GenerationContext, models, current_source: str | None = None, scope: str = "the entire deck") -> str:
    """One generator call. Uses the with-review prompt exactly when ``ctx.feedback`` is set.

    The returned source is not guaranteed to parse.
    """
    bindings = generation_bindings(ctx)
    if ctx.feedback is None:
        key = "generator"
    else:
        if current_source is None:
            raise ValueError("regeneration needs the current source")
        key = "generator_review"
        bindings.update(feedback=ctx.feedback.as_text(), current_code=current_source.strip(), scope=scope)
    reply = models.ask("generator", key, bindings)
    text = strip_code_fences(reply.text)
    if not text.strip():
        raise EmptyGeneration("generator returned no code")
    return text
