"""Render Slidev source to per-page PNGs.

:class:`MockRenderer` lays slides out with the same line model the static
validator uses, on a fixed 1280x720 page, and returns the element boxes as a
sidecar so that layout problems can be checked without a browser.
:class:`SlidevExporter` shells out to the real ``slidev export``.
"""

from __future__ import annotations

import io
import json
import math
import shlex
import shutil
import subprocess
import tempfile
import threading
import uuid
from dataclasses import asdict, dataclass
from pathlib import Path

from PIL import Image as PILImage
from PIL import ImageDraw

from .errors import SlidegenError
from .slidev import (
    PAGE_HEIGHT,
    PAGE_WIDTH,
    WRAP_CHARS,
    BulletList,
    CodeFence,
    Diagnostic,
    Heading,
    Image,
    Paragraph,
    Raw,
    SlidevDeck,
    block_lines,
    image_aspect,
    parse,
    width_hint_px,
)

MARGIN_X = 64
MARGIN_TOP = 48
COLUMN_GAP = 32
BLOCK_GAP = 16
LINE_HEIGHT = 40
HEADING_HEIGHT = {1: 64, 2: 52}
DEFAULT_IMAGE_WIDTH = 512
CROWDING_FRACTION = 0.9

_TEXT_FILL = (96, 96, 96)
_HEADING_FILL = (32, 32, 32)
_IMAGE_FILL = (150, 180, 210)
_CODE_FILL = (60, 90, 60)


class RenderError(SlidegenError):
    pass


class ExporterMissing(RenderError):
    pass


class ExporterFailed(RenderError):
    def __init__(self, exit_code: int, stderr: str):
        self.exit_code = exit_code
        self.stderr = stderr
        super().__init__(f"exporter exited with {exit_code}: {stderr[-500:]}")


@dataclass(frozen=True)
class ElementBox:
    kind: str  # "text" | "image"
    x: int
    y: int
    w: int
    h: int
    ref: str | None = None

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError("element boxes need positive width and height")

    def exceeds(self, width: int, height: int) -> bool:
        return self.x < 0 or self.y < 0 or self.x + self.w > width or self.y + self.h > height

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass(frozen=True)
class RenderedPage:
    slide_index: int
    image_bytes: bytes
    width_px: int
    height_px: int
    sidecar: tuple[ElementBox, ...] | None = None

    def sidecar_json(self) -> str:
        boxes = [b.to_dict() for b in self.sidecar or ()]
        return json.dumps({"slide_index": self.slide_index, "width": self.width_px,
                           "height": self.height_px, "boxes": boxes}, indent=2) + "\n"


# -- mock layout ---------------------------------------------------------------


def _columns(deck: SlidevDeck, index: int, asset_root) -> tuple[list[tuple[int, int, list]], list[ElementBox]]:
    """(x, width, blocks) per column plus boxes fixed by the layout itself."""
    layout = deck.layout(index)
    blocks = list(deck.slides[index].blocks)
    fixed: list[ElementBox] = []
    full = PAGE_WIDTH - 2 * MARGIN_X
    half = PAGE_WIDTH // 2
    if layout == "two-cols":
        col_w = (full - COLUMN_GAP) // 2
        split = next((k for k, b in enumerate(blocks) if isinstance(b, Raw) and b.text.strip() == "::right::"), len(blocks))
        return [(MARGIN_X, col_w, blocks[:split]), (MARGIN_X + col_w + COLUMN_GAP, col_w, blocks[split + 1:])], fixed
    if layout in ("image-right", "image-left"):
        image = deck.effective_frontmatter(index).get("image")
        image_x = half if layout == "image-right" else 0
        if isinstance(image, str) and image:
            fixed.append(ElementBox("image", image_x, 0, half, PAGE_HEIGHT, image))
        text_x = MARGIN_X if layout == "image-right" else half + COLUMN_GAP
        return [(text_x, half - MARGIN_X - COLUMN_GAP, blocks)], fixed
    return [(MARGIN_X, full, blocks)], fixed


def _text_width(lines: list[str], units: int, col_w: int, wrap: float) -> int:
    if units > 1 and len(lines) < units:
        return col_w
    longest = max((len(ln.strip()) for ln in lines), default=1)
    return max(8, min(col_w, math.ceil(col_w * longest / wrap)))


def _stack(x: int, col_w: int, blocks, asset_root) -> list[ElementBox]:
    wrap = WRAP_CHARS * col_w / (PAGE_WIDTH - 2 * MARGIN_X)
    boxes = []
    y = MARGIN_TOP
    for b in blocks:
        if isinstance(b, Image):
            w = width_hint_px(b.width_hint) if b.width_hint else None
            if w is None:
                w = min(DEFAULT_IMAGE_WIDTH, col_w)
            h = w * image_aspect(b.src, asset_root)
            box = ElementBox("image", x, y, max(1, round(w)), max(1, round(h)), b.src)
        else:
            units = block_lines(b, wrap)
            if units == 0:
                continue
            if isinstance(b, Heading):
                h = HEADING_HEIGHT.get(b.level, LINE_HEIGHT)
                lines = [b.text]
            else:
                h = units * LINE_HEIGHT
                if isinstance(b, BulletList):
                    lines = list(b.items)
                elif isinstance(b, Paragraph):
                    lines = [" ".join(b.text.split("\n"))]
                else:
                    lines = [ln for ln in b.text.split("\n") if ln.strip()] or [""]
            box = ElementBox("text", x, y, _text_width(lines, units, col_w, wrap), h,
                             "heading" if isinstance(b, Heading) else "code" if isinstance(b, CodeFence) else None)
        boxes.append(box)
        y = box.y + box.h + BLOCK_GAP
    return boxes


def layout_boxes(deck: SlidevDeck, index: int, asset_root=None) -> list[ElementBox]:
    """Element boxes of one slide under the mock layout model."""
    columns, boxes = _columns(deck, index, asset_root)
    flowed = []
    for x, col_w, blocks in columns:
        flowed.extend(_stack(x, col_w, blocks, asset_root))
    if deck.layout(index) in ("cover", "center") and flowed:
        top = min(b.y for b in flowed)
        bottom = max(b.y + b.h for b in flowed)
        shift = max(0, (PAGE_HEIGHT - (bottom - top)) // 2) - top
        flowed = [ElementBox(b.kind, b.x, b.y + shift, b.w, b.h, b.ref) for b in flowed]
    return boxes + flowed


def rasterize(boxes, width: int = PAGE_WIDTH, height: int = PAGE_HEIGHT) -> bytes:
    """Solid-block drawing of a page: one bar per text line, one filled rectangle per image."""
    im = PILImage.new("RGB", (width, height), (255, 255, 255))
    draw = ImageDraw.Draw(im)
    for b in boxes:
        if b.kind == "image":
            draw.rectangle([b.x, b.y, b.x + b.w - 1, b.y + b.h - 1], fill=_IMAGE_FILL, outline=(70, 100, 140))
            continue
        fill = _HEADING_FILL if b.ref == "heading" else _CODE_FILL if b.ref == "code" else _TEXT_FILL
        line_h = b.h if b.ref == "heading" else LINE_HEIGHT
        for top in range(b.y, b.y + b.h, line_h):
            draw.rectangle([b.x, top + 6, b.x + b.w - 1, top + line_h - 7], fill=fill)
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return buf.getvalue()


class MockRenderer:
    backend = "mock"

    def __init__(self, asset_root=None):
        self.asset_root = asset_root

    def render_slide(self, deck: SlidevDeck, index: int) -> RenderedPage:
        boxes = tuple(layout_boxes(deck, index, self.asset_root))
        return RenderedPage(index, rasterize(boxes), PAGE_WIDTH, PAGE_HEIGHT, boxes)

    def render(self, source: str) -> list[RenderedPage]:
        deck = parse(source)
        return [self.render_slide(deck, i) for i in range(len(deck.slides))]

    def render_page(self, source: str, index: int) -> RenderedPage:
        return self.render_slide(parse(source), index)


# -- live exporter -------------------------------------------------------------


class SlidevExporter:
    """Runs ``<command> export <deck.md> --format png --output <dir>``.

    ``command`` may hold several words (e.g. ``"npx slidev"``). Pages come back
    as ``<dir>/<n>.png`` with 1-based ``n`` (zero padding tolerated).
    """

    backend = "live"

    def __init__(self, command: str = "slidev", extra_args=(), asset_root=None, max_parallel: int = 2, timeout: float = 600):
        self.argv = shlex.split(command)
        self.extra_args = list(extra_args)
        self.asset_root = Path(asset_root) if asset_root else None
        self.timeout = timeout
        self._slots = threading.BoundedSemaphore(max(1, max_parallel))

    def available(self) -> bool:
        return bool(self.argv) and shutil.which(self.argv[0]) is not None

    def _export(self, source: str, page_range: str | None, workdir: Path) -> list[Path]:
        if not self.available():
            raise ExporterMissing(f"exporter '{' '.join(self.argv)}' not found on PATH")
        deck_dir = self.asset_root if self.asset_root else workdir
        deck_path = deck_dir / f".slidegen-{uuid.uuid4().hex[:12]}.md"
        out_dir = workdir / "out"
        deck_path.write_text(source, encoding="utf-8")
        argv = [*self.argv, "export", str(deck_path), "--format", "png", "--output", str(out_dir), *self.extra_args]
        if page_range:
            argv += ["--range", page_range]
        try:
            with self._slots:
                proc = subprocess.run(argv, capture_output=True, text=True, timeout=self.timeout, cwd=deck_dir)
        except subprocess.TimeoutExpired:
            raise ExporterFailed(-1, f"timed out after {self.timeout}s") from None
        finally:
            deck_path.unlink(missing_ok=True)
        if proc.returncode != 0:
            raise ExporterFailed(proc.returncode, proc.stderr or proc.stdout)
        pngs = [p for p in out_dir.glob("*.png") if p.stem.isdigit()] if out_dir.is_dir() else []
        return sorted(pngs, key=lambda p: int(p.stem))

    @staticmethod
    def _page(index: int, path: Path) -> RenderedPage:
        data = path.read_bytes()
        with PILImage.open(io.BytesIO(data)) as im:
            w, h = im.size
        return RenderedPage(index, data, w, h, None)

    def render(self, source: str) -> list[RenderedPage]:
        expected = len(parse(source).slides)
        with tempfile.TemporaryDirectory(prefix="slidegen-export-") as tmp:
            files = self._export(source, None, Path(tmp))
            if len(files) != expected:
                raise ExporterFailed(0, f"expected {expected} pages, exporter produced {len(files)}")
            return [self._page(i, p) for i, p in enumerate(files)]

    def render_page(self, source: str, index: int) -> RenderedPage:
        with tempfile.TemporaryDirectory(prefix="slidegen-export-") as tmp:
            files = self._export(source, str(index + 1), Path(tmp))
            if len(files) != 1:
                raise ExporterFailed(0, f"expected one page for slide {index}, exporter produced {len(files)}")
            return self._page(index, files[0])


def make_renderer(backend: str = "mock", asset_root=None, **exporter_opts):
    if backend == "mock":
        return MockRenderer(asset_root)
    if backend == "live":
        return SlidevExporter(asset_root=asset_root, **exporter_opts)
    raise ValueError(f"unknown render backend '{backend}'")


def render_deck(source: str, backend: str = "mock", asset_root=None, **exporter_opts) -> list[RenderedPage]:
    return make_renderer(backend, asset_root, **exporter_opts).render(source)


def overflow_check(page: RenderedPage) -> list[Diagnostic]:
    """OVERFLOW per box past the page edges, CROWDING when boxes cover over 90% of the page.

    Pages without a sidecar (live renders) yield nothing.
    """
    if page.sidecar is None:
        return []
    out = []
    W, H = page.width_px, page.height_px
    for k, b in enumerate(page.sidecar):
        if b.exceeds(W, H):
            edges = [name for name, hit in (
                ("left", b.x < 0), ("top", b.y < 0), ("right", b.x + b.w > W), ("bottom", b.y + b.h > H),
            ) if hit]
            what = f"{b.kind} '{b.ref}'" if b.kind == "image" and b.ref else b.kind
            out.append(Diagnostic("error", "OVERFLOW", f"{what} extends beyond the {'/'.join(edges)} edge of the page",
                                  page.slide_index, "page_review", k))
    covered = sum(b.w * b.h for b in page.sidecar) / (W * H)
    if covered > CROWDING_FRACTION:
        out.append(Diagnostic("error", "CROWDING", f"elements cover {covered:.0%} of the page",
                              page.slide_index, "page_review"))
    return out
