"""Builders shared by the test modules: bundles, PNGs, stage-1 replies and transcripts."""

from __future__ import annotations

import json
from pathlib import Path

from PIL import Image

from slidegen.modelio import Models, ScriptedClient

APPROVE = "VERDICT: APPROVE"
REJECT = "VERDICT: REJECT\nISSUE: CONTENT the key points are missing\nGUIDANCE: add the key points as bullets"
PAGE_REJECT = (
    "VERDICT: REJECT\nISSUE: OVERFLOW image extends beyond the right edge\n"
    "GUIDANCE: resize the image to 40% width"
)

SUMMARY = """# Title
Sparse Attention for Long Documents

# Authors
- Ana Ruiz
- Wei Chen

# Affiliations
- Example University

# Summary
We study sparse attention patterns for long documents. The method keeps a
local window and a few global tokens. It matches dense attention quality
at a fraction of the memory cost.

# Key Points
- local window plus global tokens
- linear memory in sequence length
- matches dense attention on long benchmarks
"""

BODY = (
    "Long documents are hard for transformers because attention cost grows quadratically. "
    "We propose a sparse pattern that keeps a local window and a few global tokens. "
    "Figure one shows the pattern. Experiments on long benchmarks show that quality matches dense attention. "
    "Memory grows linearly with sequence length. Figure two compares memory use. "
    "An ablation removes the global tokens and quality drops. Figure three shows the ablation. "
    "Figure four lists the datasets. We conclude that sparse attention is a practical default."
)


def make_png(path: Path, width: int = 400, height: int = 300, color=(200, 60, 60)) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.new("RGB", (width, height), color).save(path)
    return path


def make_bundle(root: Path, n_images: int = 1, body: str = BODY, offsets=None) -> Path:
    """A bundle directory with ``n_images`` PNGs anchored through the body."""
    root.mkdir(parents=True, exist_ok=True)
    (root / "body.md").write_text(body, encoding="utf-8")
    offsets = offsets or [int(len(body) * (k + 1) / (n_images + 1)) for k in range(n_images)]
    images = []
    for k, off in enumerate(offsets):
        make_png(root / "figs" / f"fig{k}.png", 400 + 40 * k, 300, (40 * k % 255, 120, 200))
        images.append({"path": f"figs/fig{k}.png", "anchor_offset": off})
    (root / "manifest.json").write_text(json.dumps({"body": "body.md", "images": images}), encoding="utf-8")
    return root


def image_ids(n: int) -> list[str]:
    return [f"img-{k:03d}" for k in range(1, n + 1)]


def catalog_text(ids) -> str:
    parts = []
    for k, i in enumerate(ids):
        parts.append(
            f"## {i}\nTitle: Figure {k + 1}\n"
            f"Description: Diagram of the sparse attention pattern, panel {k + 1}.\n"
            f"Location: paragraph {k + 1}\n"
        )
    return "\n".join(parts)


def deck_text(n_slides: int = 3, images=(), image_slide: int = 1) -> str:
    """A clean deck with ``n_slides`` slides; all ``images`` go on ``image_slide``."""
    slides = ["---\ntheme: default\nlayout: cover\n---\n\n# Sparse Attention for Long Documents\n\nAna Ruiz, Wei Chen\n"]
    for i in range(1, n_slides):
        body = f"---\n\n# Part {i}\n\n- point {i}a\n- point {i}b\n"
        if i == image_slide:
            for img in images:
                body += f'\n<img src="images/{img}.png" alt="{img}" style="width: 30%" />\n'
        slides.append(body)
    return "\n".join(slides)


def slide_text_src(title: str, width: str = "30%", image: str | None = None) -> str:
    src = f"---\nlayout: default\n---\n\n# {title}\n\n- fixed point\n"
    if image:
        src += f'\n<img src="images/{image}.png" alt="{image}" style="width: {width}" />\n'
    return src


def records(summary=SUMMARY, catalog=None, generator=(), code_reviewer=(), page_reviewer=(), **extra) -> list[dict]:
    """Transcript records. Sequences map to indexes 0..n-1; a bare string is the "*" fallback."""
    out = [{"role": "summarizer", "index": 0, "text": summary}]
    if catalog is not None:
        out.append({"role": "captioner", "index": 0, "text": catalog})
    for role, replies in (("generator", generator), ("code_reviewer", code_reviewer), ("page_reviewer", page_reviewer), *extra.items()):
        if isinstance(replies, str):
            out.append({"role": role, "index": "*", "text": replies})
        else:
            out.extend({"role": role, "index": k, "text": t} for k, t in enumerate(replies))
    return out


def write_transcript(path: Path, recs) -> Path:
    path.write_text("\n".join(json.dumps(r) for r in recs) + "\n", encoding="utf-8")
    return path


def scripted(recs, **kw) -> Models:
    return Models(ScriptedClient(recs), sleep=lambda s: None, **kw)
