"""Load source documents from disk.

A bundle is a directory with a ``manifest.json``::

    {"body": "body.md",
     "images": [{"path": "figs/arch.png", "anchor_offset": 120},
                {"id": "teaser", "path": "figs/teaser.jpg", "anchor_offset": 5}]}

Paths are bundle-relative. Image ids default to ``img-001``, ``img-002``, ...
in anchor order.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from PIL import Image as PILImage

from .descriptions import ImageCatalog, TextSummary, parse_catalog, parse_summary
from .errors import SlidegenError

MEDIA_TYPES = {".png": "png", ".jpg": "jpeg", ".jpeg": "jpeg"}


class IngestError(SlidegenError):
    pass


class MissingManifest(IngestError):
    pass


class InvalidManifest(IngestError):
    pass


class UnreadableAsset(IngestError):
    def __init__(self, path, reason: str = "cannot be read"):
        self.path = str(path)
        super().__init__(f"{path}: {reason}")


class UnsupportedMedia(IngestError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"{path}: only PNG and JPEG images are supported")


class AnchorOutOfRange(IngestError):
    def __init__(self, image_id: str, offset, length: int):
        self.image_id = image_id
        super().__init__(f"image {image_id}: anchor_offset {offset} outside [0, {length}]")


class AssetMismatch(IngestError):
    pass


@dataclass(frozen=True)
class ImageAsset:
    image_id: str
    path: Path
    media_type: str
    width_px: int
    height_px: int
    anchor_offset: int

    @property
    def suffix(self) -> str:
        return ".png" if self.media_type == "png" else ".jpg"

    def read_bytes(self) -> bytes:
        return self.path.read_bytes()


@dataclass(frozen=True)
class SourceDocument:
    doc_id: str
    body_text: str
    images: tuple[ImageAsset, ...]
    origin: str = "file_bundle"  # or "bypass"

    def __post_init__(self):
        ids = [im.image_id for im in self.images]
        if len(set(ids)) != len(ids):
            raise IngestError("image ids must be unique within a document")
        for im in self.images:
            if not 0 <= im.anchor_offset <= len(self.body_text):
                raise AnchorOutOfRange(im.image_id, im.anchor_offset, len(self.body_text))

    def image(self, image_id: str) -> ImageAsset:
        for im in self.images:
            if im.image_id == image_id:
                return im
        raise KeyError(image_id)

    def context(self, image: ImageAsset, radius: int = 200) -> str:
        """Body text around an image's anchor."""
        lo = max(0, image.anchor_offset - radius)
        return self.body_text[lo : image.anchor_offset + radius]


def load_image_asset(path: Path, image_id: str, anchor_offset: int) -> ImageAsset:
    media = MEDIA_TYPES.get(path.suffix.lower())
    if media is None:
        raise UnsupportedMedia(path)
    if not path.is_file():
        raise UnreadableAsset(path, "no such file")
    try:
        with PILImage.open(path) as im:
            fmt = (im.format or "").lower()
            width, height = im.size
    except OSError as exc:
        raise UnreadableAsset(path, str(exc)) from None
    if fmt not in ("png", "jpeg"):
        raise UnsupportedMedia(path)
    if width <= 0 or height <= 0:
        raise UnreadableAsset(path, "image has no pixels")
    return ImageAsset(image_id, path, fmt, width, height, anchor_offset)


def _bundle_path(root: Path, rel, what: str) -> Path:
    if not isinstance(rel, str) or not rel:
        raise InvalidManifest(f"{what} must be a nonempty relative path")
    if Path(rel).is_absolute():
        raise InvalidManifest(f"{what} '{rel}' is absolute; bundle paths must be relative")
    path = (root / rel).resolve()
    if root.resolve() not in path.parents:
        raise InvalidManifest(f"{what} '{rel}' escapes the bundle")
    return path


def ingest_bundle(root: str | Path) -> SourceDocument:
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise MissingManifest(f"no manifest.json in {root}")
    manifest_bytes = manifest_path.read_bytes()
    try:
        manifest = json.loads(manifest_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InvalidManifest(f"manifest.json is not valid UTF-8 JSON: {exc}") from None
    if not isinstance(manifest, dict) or "body" not in manifest:
        raise InvalidManifest("manifest.json must be an object with a 'body' field")

    body_path = _bundle_path(root, manifest["body"], "body")
    try:
        body_bytes = body_path.read_bytes()
        body = body_bytes.decode("utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableAsset(body_path, str(exc)) from None

    raw_images = manifest.get("images", [])
    if not isinstance(raw_images, list):
        raise InvalidManifest("'images' must be a list")
    entries = []
    for pos, entry in enumerate(raw_images):
        if not isinstance(entry, dict) or "path" not in entry or "anchor_offset" not in entry:
            raise InvalidManifest(f"image entry {pos} needs 'path' and 'anchor_offset'")
        offset = entry["anchor_offset"]
        if not isinstance(offset, int) or isinstance(offset, bool):
            raise InvalidManifest(f"image entry {pos}: anchor_offset must be an integer")
        entries.append((offset, pos, entry))
    entries.sort(key=lambda t: (t[0], t[1]))

    images = []
    for rank, (offset, _, entry) in enumerate(entries, start=1):
        image_id = entry.get("id") or f"img-{rank:03d}"
        if not 0 <= offset <= len(body):
            raise AnchorOutOfRange(image_id, offset, len(body))
        path = _bundle_path(root, entry["path"], f"image {image_id}")
        images.append(load_image_asset(path, image_id, offset))
    if len({im.image_id for im in images}) != len(images):
        raise InvalidManifest("duplicate image ids in manifest")

    doc_id = manifest.get("doc_id") or hashlib.sha256(manifest_bytes + body_bytes).hexdigest()[:12]
    return SourceDocument(str(doc_id), body, tuple(images), "file_bundle")


def _asset_files(assets: Path) -> dict[str, Path]:
    found = {}
    if assets.is_dir():
        for p in sorted(assets.iterdir()):
            if p.suffix.lower() in MEDIA_TYPES and p.is_file():
                found.setdefault(p.stem, p)
    return found


def ingest_bypass(summary_file, catalog_file, assets) -> tuple[TextSummary, ImageCatalog]:
    """Read externally prepared stage-1 artifacts (e.g. extracted from existing slides).

    Each catalog entry must have a matching ``<image_id>.png|.jpg|.jpeg`` in ``assets``.
    """
    summary = parse_summary(Path(summary_file).read_text(encoding="utf-8"), external=True)
    catalog = parse_catalog(Path(catalog_file).read_text(encoding="utf-8"), external=True)
    files = _asset_files(Path(assets))
    for image_id in catalog.ids:
        if image_id not in files:
            raise AssetMismatch(f"catalog references '{image_id}' but {assets} has no such image")
    return summary, catalog


def bypass_document(summary: TextSummary, catalog: ImageCatalog, assets) -> SourceDocument:
    """SourceDocument standing in for the original input in bypass mode."""
    files = _asset_files(Path(assets))
    images = []
    for image_id in catalog.ids:
        if image_id not in files:
            raise AssetMismatch(f"catalog references '{image_id}' but {assets} has no such image")
        images.append(load_image_asset(files[image_id], image_id, 0))
    body = summary.summary_markdown
    doc_id = hashlib.sha256(body.encode("utf-8")).hexdigest()[:12]
    return SourceDocument(doc_id, body, tuple(images), "bypass")
