"""Deck-level metrics: text-image relevance, success rate and figure proportion."""

from __future__ import annotations

from typing import Callable, Iterable, Mapping

import numpy as np

from ..agents import image_id_of
from ..descriptions import ImageCatalog
from ..errors import SlidegenError
from ..slidev import SlidevDeck, image_refs, slide_text
from .embeddings import EvalImage


class EmptyRecords(SlidegenError):
    pass


def relevance_score(deck: SlidevDeck, resolve: Callable[[str], EvalImage | None], provider) -> float | None:
    """Average over slides with images of the mean image/text cosine on that slide.

    ``resolve`` maps an image src to an :class:`EvalImage`; images it cannot
    resolve are ignored. Returns None when no slide has a resolvable image.
    """
    per_slide = []
    for i, slide in enumerate(deck.slides):
        images = [im for im in (resolve(src) for src in image_refs(deck, i)) if im is not None]
        if not images:
            continue
        text = provider.embed_texts([slide_text(slide)])[0]
        vecs = provider.embed_images(images)
        per_slide.append(float(np.mean(vecs @ text)))
    if not per_slide:
        return None
    return float(min(1.0, max(0.0, np.mean(per_slide))))


def text_image_relevance(deck: SlidevDeck, resolve, provider_clip, provider_longclip) -> tuple[float | None, float | None]:
    """(clip, long_clip) relevance; both None for a deck without images."""
    return relevance_score(deck, resolve, provider_clip), relevance_score(deck, resolve, provider_longclip)


def success_rate(records: Iterable) -> float:
    """100 x successful runs / all runs. Records are mappings or objects with ``succeeded``."""
    flags = [bool(r["succeeded"] if isinstance(r, Mapping) else r.succeeded) for r in records]
    if not flags:
        raise EmptyRecords("success_rate needs at least one run record")
    return 100.0 * sum(flags) / len(flags)


def referenced_ids(deck: SlidevDeck, ids) -> set[str]:
    found = set()
    for i in range(len(deck.slides)):
        for src in image_refs(deck, i):
            image_id = image_id_of(src, ids)
            if image_id is not None:
                found.add(image_id)
    return found


def figure_proportion(deck: SlidevDeck, catalog: ImageCatalog) -> float | None:
    """Percentage of catalog images the deck shows at least once; None for an empty catalog."""
    ids = catalog.ids
    if not ids:
        return None
    return 100.0 * len(referenced_ids(deck, ids)) / len(ids)
