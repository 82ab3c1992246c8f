"""Slidev Markdown: parser, AST, serializer, static validator and slide patcher.

Sectioning mirrors the public Slidev parser: a line that is exactly ``---``
separates slides, and when the line right after a separator is non-blank the
lines up to the next ``---`` are that slide's YAML frontmatter.  Lines inside
backtick code fences never split slides.  Within a slide, only headings,
paragraphs, bullet lists, images and code fences are modelled; anything else
is kept verbatim as a :class:`Raw` block.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Union

import yaml

from .errors import SlidegenError

PAGE_WIDTH = 1280
PAGE_HEIGHT = 720
WRAP_CHARS = 80
# Assumed height/width ratio when an image's pixels are unavailable.
DEFAULT_IMAGE_ASPECT = 0.75
REM_PX = 16

DEFAULT_LAYOUTS = frozenset({"default", "two-cols", "image-right", "image-left", "cover", "center"})


class SlidevSyntaxError(SlidegenError):
    """Source text is not a well-formed Slidev deck."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class UnterminatedFrontmatter(SlidevSyntaxError):
    def __init__(self, line: int):
        super().__init__("frontmatter block is never closed with '---'", line)


class UnterminatedCodeFence(SlidevSyntaxError):
    def __init__(self, line: int):
        super().__init__("code fence is never closed", line)


class MalformedFrontmatter(SlidevSyntaxError):
    pass


class EmptyDocument(SlidevSyntaxError):
    def __init__(self):
        super().__init__("document is empty")


class NotOneSlide(SlidegenError):
    def __init__(self, count: int):
        self.count = count
        super().__init__(f"replacement must contain exactly one slide, got {count}")


class IndexOutOfRange(SlidegenError):
    def __init__(self, index: int, size: int):
        super().__init__(f"slide index {index} out of range for deck of {size} slides")


# -- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class Heading:
    level: int
    text: str

    def __post_init__(self):
        if not 1 <= self.level <= 6:
            raise ValueError(f"heading level must be in [1, 6], got {self.level}")


@dataclass(frozen=True)
class Paragraph:
    text: str


@dataclass(frozen=True)
class BulletList:
    items: tuple[str, ...]


@dataclass(frozen=True)
class Image:
    src: str
    alt: str = ""
    width_hint: str | None = None
    # Extra HTML attributes kept in source order, e.g. (("class", "rounded"),).
    attrs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if not self.src:
            raise ValueError("image src must be nonempty")


@dataclass(frozen=True)
class CodeFence:
    lang: str
    text: str


@dataclass(frozen=True)
class Raw:
    text: str


Block = Union[Heading, Paragraph, BulletList, Image, CodeFence, Raw]


@dataclass(frozen=True)
class Slide:
    frontmatter: dict[str, Any] = field(default_factory=dict)
    blocks: tuple[Block, ...] = ()


@dataclass(frozen=True)
class SlidevDeck:
    headmatter: dict[str, Any]
    slides: tuple[Slide, ...]

    def __post_init__(self):
        slides = tuple(self.slides)
        if not slides:
            raise ValueError("a deck has at least one slide")
        if slides[0].frontmatter:
            # The first slide's settings live in the headmatter.
            object.__setattr__(self, "headmatter", {**self.headmatter, **slides[0].frontmatter})
            slides = (Slide({}, slides[0].blocks),) + slides[1:]
        object.__setattr__(self, "slides", slides)

    def __len__(self):
        return len(self.slides)

    def effective_frontmatter(self, index: int) -> dict[str, Any]:
        """Per-slide settings; the first slide's live in the headmatter."""
        if index == 0:
            return {**self.headmatter, **self.slides[0].frontmatter}
        return self.slides[index].frontmatter

    def layout(self, index: int) -> str:
        return str(self.effective_frontmatter(index).get("layout", "default"))


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    slide_index: int | None = None
    source: str = "static"  # "static" | "code_review" | "page_review"
    box_index: int | None = None

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        if d["box_index"] is None:
            del d["box_index"]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Diagnostic":
        return cls(**d)

    def __str__(self):
        where = f"slide {self.slide_index}" if self.slide_index is not None else "deck"
        return f"{where}: {self.severity} {self.code} {self.message}"


@dataclass(frozen=True)
class LayoutConstraints:
    max_lines_per_slide: int = 12
    max_image_area_fraction: float = 0.6
    allowed_layouts: frozenset[str] = DEFAULT_LAYOUTS

    def __post_init__(self):
        if self.max_lines_per_slide < 1:
            raise ValueError("max_lines_per_slide must be positive")
        if not 0 < self.max_image_area_fraction <= 1:
            raise ValueError("max_image_area_fraction must be in (0, 1]")
        if not self.allowed_layouts:
            raise ValueError("allowed_layouts must be nonempty")
        object.__setattr__(self, "allowed_layouts", frozenset(self.allowed_layouts))

    def describe(self) -> str:
        layouts = ", ".join(sorted(self.allowed_layouts))
        return (
            f"- At most {self.max_lines_per_slide} lines of text per slide "
            f"(each heading and bullet counts as one line, paragraphs count one line per {WRAP_CHARS} characters).\n"
            f"- Images may cover at most {self.max_image_area_fraction:.0%} of the slide area.\n"
            f"- Allowed layouts: {layouts}."
        )


# -- sectioning --------------------------------------------------------------

_FENCE_OPEN = re.compile(r"^\s*`{3,}")


@dataclass
class _Section:
    frontmatter: dict[str, Any] | None
    body: list[str]
    body_line: int  # 1-based line number of the first body line


def _load_frontmatter(lines: list[str], first_line: int) -> dict[str, Any]:
    try:
        data = yaml.safe_load("\n".join(lines))
    except yaml.YAMLError as exc:
        raise MalformedFrontmatter(f"invalid YAML frontmatter: {exc}", first_line) from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise MalformedFrontmatter("frontmatter must be a key/value mapping", first_line)
    return data


def _split_sections(lines: list[str]) -> list[_Section]:
    sections: list[_Section] = []
    fm: dict[str, Any] | None = None
    body_start = 0
    n = len(lines)
    i = 0

    def flush(end: int):
        sections.append(_Section(fm, lines[body_start:end], body_start + 1))

    while i < n:
        line = lines[i].rstrip()
        if line == "---":
            if i > 0:
                flush(i)
            if i + 1 < n and lines[i + 1].strip():
                j = i + 1
                while j < n and lines[j].rstrip() != "---":
                    j += 1
                if j == n:
                    raise UnterminatedFrontmatter(i + 1)
                fm = _load_frontmatter(lines[i + 1 : j], i + 2)
                body_start = i = j + 1
            else:
                fm = None
                body_start = i = i + 1
            continue
        m = _FENCE_OPEN.match(line)
        if m:
            prefix = m.group(0)
            j = i + 1
            while j < n and not lines[j].startswith(prefix):
                j += 1
            if j == n:
                raise UnterminatedCodeFence(i + 1)
            i = j + 1
            continue
        i += 1
    flush(n)
    return sections


# -- block parsing -----------------------------------------------------------

_HEADING = re.compile(r"^(#{1,6})[ \t]+(.*?)\s*$")
_BULLET = re.compile(r"^([-*+])[ \t]+(\S.*?)\s*$")
_MD_IMAGE = re.compile(r"^!\[([^\]]*)\]\(\s*([^()\s\"]+)\s*\)\s*$")
_HTML_IMAGE = re.compile(r"^<img((?:\s+[a-zA-Z_:][-\w:.]*\s*=\s*\"[^\"]*\")*)\s*/?>\s*$")
_HTML_ATTR = re.compile(r"([a-zA-Z_:][-\w:.]*)\s*=\s*\"([^\"]*)\"")
_STYLE_WIDTH = re.compile(r"^\s*width\s*:\s*([^;]+?)\s*;?\s*$")
_SLOT = re.compile(r"^::[\w-]+::\s*$")


def _parse_image(line: str) -> Image | None:
    m = _MD_IMAGE.match(line)
    if m:
        return Image(src=m.group(2), alt=m.group(1))
    m = _HTML_IMAGE.match(line)
    if not m:
        return None
    pairs = _HTML_ATTR.findall(m.group(1))
    names = [k.lower() for k, _ in pairs]
    if len(set(names)) != len(names):
        return None
    src, alt, width, extra = None, "", None, []
    for key, value in pairs:
        lk = key.lower()
        if lk == "src":
            src = value
        elif lk == "alt":
            alt = value
        elif lk == "width":
            width = value.strip()
            if ";" in width:
                return None
        elif lk == "style" and _STYLE_WIDTH.match(value) and "width" not in names:
            width = _STYLE_WIDTH.match(value).group(1)
        else:
            extra.append((key, value))
    if not src:
        return None
    if width is not None and "style" in names and "width" in names:
        return None
    return Image(src=src, alt=alt, width_hint=width, attrs=tuple(extra))


def _is_block_start(line: str) -> bool:
    return bool(
        _FENCE_OPEN.match(line)
        or _HEADING.match(line)
        or _parse_image(line)
        or _SLOT.match(line)
        or line.lstrip().startswith("<!--")
    )


def _parse_blocks(lines: list[str], first_line: int) -> tuple[Block, ...]:
    blocks: list[Block] = []
    n = len(lines)
    i = 0
    while i < n:
        line = lines[i]
        if not line.strip():
            i += 1
            continue
        fence = _FENCE_OPEN.match(line)
        if fence:
            prefix = fence.group(0)
            j = i + 1
            while j < n and not lines[j].startswith(prefix):
                j += 1
            if j == n:
                raise UnterminatedCodeFence(first_line + i)
            clean = prefix == prefix.lstrip() and lines[j].rstrip() == prefix
            if clean:
                blocks.append(CodeFence(lang=line[len(prefix):].strip(), text="\n".join(lines[i + 1 : j])))
            else:
                blocks.append(Raw("\n".join(lines[i : j + 1])))
            i = j + 1
            continue
        if line.lstrip().startswith("<!--"):
            j = i
            while j < n and "-->" not in lines[j]:
                j += 1
            j = min(j, n - 1)
            chunk = lines[i : j + 1]
            while chunk and not chunk[-1].strip():
                chunk.pop()
            blocks.append(Raw("\n".join(chunk)))
            i = j + 1
            continue
        if _SLOT.match(line):
            blocks.append(Raw(line.rstrip()))
            i += 1
            continue
        m = _HEADING.match(line)
        if m:
            blocks.append(Heading(len(m.group(1)), m.group(2)))
            i += 1
            continue
        img = _parse_image(line)
        if img:
            blocks.append(img)
            i += 1
            continue
        if _BULLET.match(line):
            j = i
            while j < n and lines[j].strip() and not _is_block_start(lines[j]):
                j += 1
            group = lines[i:j]
            matches = [_BULLET.match(ln) for ln in group]
            if all(matches):
                blocks.append(BulletList(tuple(mm.group(2) for mm in matches)))
            else:
                blocks.append(Raw("\n".join(ln.rstrip() for ln in group)))
            i = j
            continue
        j = i
        while j < n and lines[j].strip() and not _is_block_start(lines[j]) and not _BULLET.match(lines[j]):
            j += 1
        blocks.append(Paragraph("\n".join(ln.rstrip() for ln in lines[i:j])))
        i = j
    return tuple(blocks)


def parse(source: str) -> SlidevDeck:
    """Parse Slidev Markdown into a :class:`SlidevDeck`."""
    source = source.replace("\r\n", "\n").replace("\r", "\n")
    if not source.strip():
        raise EmptyDocument()
    lines = source.split("\n")
    sections = _split_sections(lines)
    headmatter: dict[str, Any] = {}
    slides = []
    for k, sec in enumerate(sections):
        blocks = _parse_blocks(sec.body, sec.body_line)
        fm = sec.frontmatter or {}
        if k == 0:
            headmatter, fm = fm, {}
        slides.append(Slide(frontmatter=fm, blocks=blocks))
    return SlidevDeck(headmatter=headmatter, slides=tuple(slides))


# -- serialization -----------------------------------------------------------


def _dump_yaml(data: dict[str, Any]) -> str:
    return yaml.safe_dump(data, sort_keys=False, allow_unicode=True, default_flow_style=False)


def render_block(block: Block) -> str:
    if isinstance(block, Heading):
        return f"{'#' * block.level} {block.text}"
    if isinstance(block, Paragraph):
        return block.text
    if isinstance(block, BulletList):
        return "\n".join(f"- {item}" for item in block.items)
    if isinstance(block, Image):
        if block.width_hint is None and not block.attrs:
            return f"![{block.alt}]({block.src})"
        parts = [f'src="{block.src}"', f'alt="{block.alt}"']
        parts += [f'{k}="{v}"' for k, v in block.attrs]
        if block.width_hint is not None:
            parts.append(f'style="width: {block.width_hint}"')
        return f"<img {' '.join(parts)} />"
    if isinstance(block, CodeFence):
        runs = [len(r) for r in re.findall(r"`{3,}", block.text)]
        fence = "`" * max([3] + [r + 1 for r in runs])
        lang = block.lang
        inner = f"{block.text}\n" if block.text else ""
        return f"{fence}{lang}\n{inner}{fence}"
    if isinstance(block, Raw):
        return block.text
    raise TypeError(f"unknown block {block!r}")


def slide_source(deck: SlidevDeck, index: int) -> str:
    """Canonical text of one slide, exactly as it appears inside :func:`serialize`."""
    if not 0 <= index < len(deck.slides):
        raise IndexOutOfRange(index, len(deck.slides))
    slide = deck.slides[index]
    body = "\n\n".join(render_block(b) for b in slide.blocks)
    if body:
        body += "\n"
    if index == 0:
        fm = deck.effective_frontmatter(0)
        header = f"---\n{_dump_yaml(fm)}---\n" if fm else ""
    elif slide.frontmatter:
        header = f"---\n{_dump_yaml(slide.frontmatter)}---\n"
    else:
        header = "---\n\n"
    if header and body and not header.endswith("\n\n"):
        header += "\n"
    return header + body


def serialize(deck: SlidevDeck) -> str:
    """Canonical Slidev text; ``parse(serialize(d)) == d`` for every deck the parser can produce."""
    text = "\n".join(slide_source(deck, i) for i in range(len(deck.slides)))
    if not text.strip():
        # A lone empty slide without headmatter needs a visible separator to survive reparsing.
        return "---\n\n"
    return text


# -- patching ----------------------------------------------------------------


def patch_slide(deck: SlidevDeck, index: int, replacement: str) -> SlidevDeck:
    """Return a copy of ``deck`` with slide ``index`` replaced by ``replacement``.

    ``replacement`` is the source of exactly one slide, optionally with its own
    frontmatter. For slide 0 that frontmatter is merged into the headmatter.
    """
    if not 0 <= index < len(deck.slides):
        raise IndexOutOfRange(index, len(deck.slides))
    new = parse(replacement)
    if len(new.slides) != 1:
        raise NotOneSlide(len(new.slides))
    fm = new.headmatter
    slides = list(deck.slides)
    headmatter = deck.headmatter
    if index == 0:
        headmatter = {**deck.headmatter, **fm}
        slides[0] = Slide(frontmatter={}, blocks=new.slides[0].blocks)
    else:
        slides[index] = Slide(frontmatter=fm, blocks=new.slides[0].blocks)
    return SlidevDeck(headmatter=headmatter, slides=tuple(slides))


# -- text extraction and line model -------------------------------------------


def slide_text(slide: Slide) -> str:
    """Visible prose of a slide: headings, paragraphs and bullet items."""
    parts: list[str] = []
    for b in slide.blocks:
        if isinstance(b, (Heading, Paragraph)):
            parts.append(b.text)
        elif isinstance(b, BulletList):
            parts.extend(b.items)
    return "\n".join(p for p in parts if p.strip())


def _is_invisible_raw(block: Raw) -> bool:
    t = block.text.strip()
    return t.startswith("<!--") or bool(_SLOT.match(t))


def block_lines(block: Block, wrap: float = WRAP_CHARS) -> int:
    """Rendered line units of one block under the deterministic line model."""
    if isinstance(block, Heading):
        return 1
    if isinstance(block, BulletList):
        return len(block.items)
    if isinstance(block, Paragraph):
        flow = " ".join(ln.strip() for ln in block.text.split("\n"))
        return max(1, math.ceil(len(flow) / wrap))
    if isinstance(block, CodeFence):
        return max(1, len(block.text.split("\n")))
    if isinstance(block, Raw):
        if _is_invisible_raw(block):
            return 0
        return sum(1 for ln in block.text.split("\n") if ln.strip())
    return 0


def count_lines(slide: Slide, wrap: float = WRAP_CHARS) -> int:
    return sum(block_lines(b, wrap) for b in slide.blocks)


def is_remote(src: str) -> bool:
    return bool(re.match(r"^(https?:|data:|//)", src))


def resolve_asset(src: str, asset_root: Path | str | None) -> Path | None:
    """Local file an image ``src`` refers to, or None when remote/absent/outside the root."""
    if asset_root is None or is_remote(src):
        return None
    root = Path(asset_root).resolve()
    rel = src.split("?")[0].split("#")[0].lstrip("/")
    if rel.startswith("./"):
        rel = rel[2:]
    candidates = [root / rel, root / "public" / rel]
    for cand in candidates:
        cand = cand.resolve()
        if cand.is_file() and (cand == root or root in cand.parents):
            return cand
    return None


def image_aspect(src: str, asset_root: Path | str | None) -> float:
    """Height/width ratio of a local image, falling back to a fixed default."""
    path = resolve_asset(src, asset_root)
    if path is None:
        return DEFAULT_IMAGE_ASPECT
    from PIL import Image as PILImage

    try:
        with PILImage.open(path) as im:
            w, h = im.size
    except OSError:
        return DEFAULT_IMAGE_ASPECT
    return h / w if w else DEFAULT_IMAGE_ASPECT


def width_hint_px(hint: str, base_width: float = PAGE_WIDTH) -> float | None:
    """Pixel width implied by a width hint such as ``60%``, ``400px`` or ``20rem``."""
    m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*(%|px|rem|em)?\s*", hint)
    if not m:
        return None
    value, unit = float(m.group(1)), m.group(2) or "px"
    if unit == "%":
        return base_width * value / 100
    if unit in ("rem", "em"):
        return value * REM_PX
    return value


def image_refs(deck: SlidevDeck, index: int) -> list[str]:
    """Image sources on a slide: image blocks plus a layout ``image:`` frontmatter key."""
    refs = [b.src for b in deck.slides[index].blocks if isinstance(b, Image)]
    fm_image = deck.effective_frontmatter(index).get("image")
    if isinstance(fm_image, str) and fm_image:
        refs.append(fm_image)
    return refs


# -- static validation --------------------------------------------------------


def validate_static(
    deck: SlidevDeck,
    constraints: LayoutConstraints | None = None,
    asset_root: Path | str | None = None,
) -> list[Diagnostic]:
    """Check a deck against layout constraints; an empty list means it passes.

    Asset existence is only checked when ``asset_root`` is given.
    """
    constraints = constraints or LayoutConstraints()
    out: list[Diagnostic] = []
    area = PAGE_WIDTH * PAGE_HEIGHT
    for i, slide in enumerate(deck.slides):
        n_lines = count_lines(slide)
        if n_lines > constraints.max_lines_per_slide:
            out.append(Diagnostic(
                "error", "LINE_LIMIT",
                f"{n_lines} text lines exceed the limit of {constraints.max_lines_per_slide}", i,
            ))
        layout = deck.layout(i)
        if layout not in constraints.allowed_layouts:
            out.append(Diagnostic("error", "BAD_LAYOUT", f"layout '{layout}' is not allowed", i))
        if asset_root is not None:
            for src in image_refs(deck, i):
                if not is_remote(src) and resolve_asset(src, asset_root) is None:
                    out.append(Diagnostic("error", "MISSING_ASSET", f"image '{src}' not found", i))
        for b in slide.blocks:
            if not isinstance(b, Image) or b.width_hint is None:
                continue
            w = width_hint_px(b.width_hint)
            if w is None:
                out.append(Diagnostic("warning", "IMG_HINT", f"cannot interpret width '{b.width_hint}' of '{b.src}'", i))
                continue
            frac = w * w * image_aspect(b.src, asset_root) / area
            if frac > constraints.max_image_area_fraction:
                out.append(Diagnostic(
                    "error", "IMG_PROPORTION",
                    f"image '{b.src}' covers {frac:.0%} of the slide (limit {constraints.max_image_area_fraction:.0%})", i,
                ))
    return out


def parse_diagnostic(exc: SlidevSyntaxError) -> Diagnostic:
    return Diagnostic("error", "PARSE_ERROR", str(exc), None)


def iter_images(deck: SlidevDeck) -> Iterable[tuple[int, Image]]:
    for i, slide in enumerate(deck.slides):
        for b in slide.blocks:
            if isinstance(b, Image):
                yield i, b
