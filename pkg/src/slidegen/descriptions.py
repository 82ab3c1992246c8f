"""The two Markdown description artifacts produced before code generation.

``summary.md`` carries five level-1 sections::

    # Title
    # Authors
    # Affiliations
    # Summary
    # Key Points

``images.md`` carries one ``## <image_id>`` section per image, each with
``Title:``, ``Description:`` and ``Location:`` lines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import SlidegenError

SUMMARY_HEADINGS = ("Title", "Authors", "Affiliations", "Summary", "Key Points")
CATALOG_FIELDS = ("Title", "Description", "Location")


class MalformedSummary(SlidegenError):
    pass


class MalformedCatalog(SlidegenError):
    pass


@dataclass(frozen=True)
class TextSummary:
    title: str
    authors: tuple[str, ...]
    affiliations: tuple[str, ...]
    summary_markdown: str
    key_points: tuple[str, ...]
    external: bool = False

    def __post_init__(self):
        if not self.title.strip():
            raise ValueError("title must be nonempty")
        if not self.summary_markdown.strip():
            raise ValueError("summary_markdown must be nonempty")


@dataclass(frozen=True)
class ImageCaption:
    image_id: str
    title: str
    description: str
    location_ref: str


@dataclass(frozen=True)
class ImageCatalog:
    entries: tuple[ImageCaption, ...] = ()
    external: bool = False

    def __post_init__(self):
        ids = [e.image_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate image_id in catalog")

    @property
    def ids(self) -> list[str]:
        return [e.image_id for e in self.entries]

    def get(self, image_id: str) -> ImageCaption | None:
        for e in self.entries:
            if e.image_id == image_id:
                return e
        return None

    def subset(self, ids) -> "ImageCatalog":
        wanted = set(ids)
        return ImageCatalog(tuple(e for e in self.entries if e.image_id in wanted), self.external)


def _list_items(text: str) -> tuple[str, ...]:
    items = []
    for line in text.splitlines():
        line = re.sub(r"^\s*(?:[-*+]|\d+[.)])\s+", "", line).strip()
        if line:
            items.append(line)
    return tuple(items)


def parse_summary(text: str, external: bool = False) -> TextSummary:
    sections: dict[str, list[str]] = {}
    current = None
    for line in text.splitlines():
        m = re.match(r"^#\s+(.+?)\s*#*\s*$", line)
        if m and m.group(1).strip().lower() in {h.lower() for h in SUMMARY_HEADINGS}:
            current = next(h for h in SUMMARY_HEADINGS if h.lower() == m.group(1).strip().lower())
            if current in sections:
                raise MalformedSummary(f"heading '# {current}' appears twice")
            sections[current] = []
        elif current is not None:
            sections[current].append(line)
    missing = [h for h in SUMMARY_HEADINGS if h not in sections]
    if missing:
        raise MalformedSummary("missing headings: " + ", ".join(f"'# {h}'" for h in missing))
    body = {k: "\n".join(v).strip() for k, v in sections.items()}
    title = " ".join(body["Title"].split())
    if not title:
        raise MalformedSummary("'# Title' section is empty")
    if not body["Summary"]:
        raise MalformedSummary("'# Summary' section is empty")
    return TextSummary(
        title=title,
        authors=_list_items(body["Authors"]),
        affiliations=_list_items(body["Affiliations"]),
        summary_markdown=body["Summary"],
        key_points=_list_items(body["Key Points"]),
        external=external,
    )


def format_summary(s: TextSummary) -> str:
    def bullets(items):
        return "\n".join(f"- {x}" for x in items)

    return (
        f"# Title\n\n{s.title}\n\n"
        f"# Authors\n\n{bullets(s.authors)}\n\n"
        f"# Affiliations\n\n{bullets(s.affiliations)}\n\n"
        f"# Summary\n\n{s.summary_markdown}\n\n"
        f"# Key Points\n\n{bullets(s.key_points)}\n"
    )


def parse_catalog(text: str, external: bool = False) -> ImageCatalog:
    entries = []
    seen = set()
    blocks = re.split(r"^##[ \t]+", text, flags=re.M)
    if blocks[0].strip():
        raise MalformedCatalog("text before the first '## <image_id>' section")
    for block in blocks[1:]:
        head, _, rest = block.partition("\n")
        image_id = head.strip()
        if not image_id or " " in image_id:
            raise MalformedCatalog(f"bad image id heading '## {head.strip()}'")
        if image_id in seen:
            raise MalformedCatalog(f"image '{image_id}' described twice")
        seen.add(image_id)
        values: dict[str, str] = {}
        last = None
        for line in rest.splitlines():
            m = re.match(r"^\s*(?:[-*]\s+)?\**(Title|Description|Location)\**\s*:\s*(.*)$", line)
            if m:
                last = m.group(1)
                values[last] = m.group(2).strip()
            elif line.strip() and last == "Description":
                values[last] += " " + line.strip()
        missing = [f for f in CATALOG_FIELDS if not values.get(f)]
        if missing:
            raise MalformedCatalog(f"image '{image_id}' lacks: {', '.join(missing)}")
        entries.append(ImageCaption(image_id, values["Title"], values["Description"], values["Location"]))
    return ImageCatalog(tuple(entries), external)


def format_catalog(c: ImageCatalog) -> str:
    parts = [
        f"## {e.image_id}\n\nTitle: {e.title}\nDescription: {e.description}\nLocation: {e.location_ref}\n"
        for e in c.entries
    ]
    return "\n".join(parts)
