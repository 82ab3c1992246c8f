"""End-to-end run: stage 1, code-review loop, page-review loop, and run-directory persistence.

Run directory layout::

    run.json                  manifest (status, config hash, ledger, artifacts)
    summary.md, images.md     stage-1 artifacts
    images/<id>.<ext>         copies of the input images, referenced by the deck
    deck.v<k>.md              one per code-loop iteration
    deck.final.md
    renders/page-<i>.v<j>.png, renders/page-<i>.boxes.json
    diagnostics.jsonl, trace.jsonl
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .agents import GenerationContext, caption_images, generate_code, summarize, syntax_guide
from .descriptions import ImageCatalog, TextSummary, format_catalog, format_summary
from .ingest import SourceDocument
from .modelio import Models
from .render import make_renderer
from .review import LoopOutcome, Recorder, TraceEntry, code_review_loop, page_review_loop
from .slidev import serialize

STAGES = ("stage1", "code_review", "page_review")


def write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def dump_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


class RunDirRecorder(Recorder):
    """Writes loop artifacts into a run directory as they are produced."""

    def __init__(self, run_dir: Path):
        self.run_dir = Path(run_dir)
        (self.run_dir / "renders").mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        for name in ("diagnostics.jsonl", "trace.jsonl"):
            (self.run_dir / name).write_text("", encoding="utf-8")

    def _append(self, name: str, record: dict) -> None:
        line = json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n"
        with self._lock, open(self.run_dir / name, "a", encoding="utf-8") as fh:
            fh.write(line)

    def deck_version(self, k: int, source: str) -> None:
        (self.run_dir / f"deck.v{k}.md").write_text(source, encoding="utf-8")

    def page_render(self, page, version: int) -> None:
        renders = self.run_dir / "renders"
        (renders / f"page-{page.slide_index}.v{version}.png").write_bytes(page.image_bytes)
        if page.sidecar is not None:
            (renders / f"page-{page.slide_index}.boxes.json").write_text(page.sidecar_json(), encoding="utf-8")

    def diagnostics(self, loop: str, iteration: int, diags) -> None:
        for d in diags:
            self._append("diagnostics.jsonl", {"loop": loop, "iteration": iteration, **d.to_dict()})

    def trace(self, entry: TraceEntry) -> None:
        self._append("trace.jsonl", entry.to_dict())


@dataclass
class PipelineRun:
    run_id: str
    run_dir: Path
    config_hash: str
    status: str = "failed"  # "approved" | "budget_exhausted" | "failed"
    stages: dict[str, str] = field(default_factory=lambda: {s: "pending" for s in STAGES})
    ledger: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    unresolved: list[dict] = field(default_factory=list)
    error: str | None = None
    doc_id: str = ""
    origin: str = ""
    prompt_version: str = ""
    outcomes: dict[str, LoopOutcome] = field(default_factory=dict, repr=False)

    @property
    def exit_code(self) -> int:
        return {"approved": 0, "budget_exhausted": 2}.get(self.status, 1)

    def artifacts(self) -> list[str]:
        if not self.run_dir.is_dir():
            return []
        found = [p.relative_to(self.run_dir).as_posix() for p in self.run_dir.rglob("*") if p.is_file()]
        return sorted(f for f in found if f != "run.json" and not f.endswith(".tmp"))

    def manifest(self) -> dict:
        """Contents of run.json. Everything except ``timing`` is reproducible."""
        return {
            "run_id": self.run_id,
            "status": self.status,
            "config_hash": self.config_hash,
            "prompt_version": self.prompt_version,
            "doc_id": self.doc_id,
            "origin": self.origin,
            "stages": self.stages,
            "ledger": self.ledger,
            "unresolved": self.unresolved,
            "error": self.error,
            "artifacts": self.artifacts(),
            "timing": self.timing,
        }

    def write(self) -> Path:
        path = self.run_dir / "run.json"
        write_atomic(path, dump_json(self.manifest()))
        return path


def make_run_id(config_hash: str, doc: SourceDocument, prompt_version: str) -> str:
    blob = f"{config_hash}\n{doc.doc_id}\n{doc.origin}\n{prompt_version}"
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def stage_images(doc: SourceDocument, run_dir: Path) -> dict[str, str]:
    """Copy input images next to the deck; returns image_id -> deck-relative path."""
    out = run_dir / "images"
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for im in doc.images:
        rel = f"images/{im.image_id}{im.suffix}"
        shutil.copyfile(im.path, run_dir / rel)
        paths[im.image_id] = rel
    return paths


def run_pipeline(
    doc: SourceDocument,
    config,
    models: Models,
    run_dir: str | Path,
    renderer=None,
    summary: TextSummary | None = None,
    catalog: ImageCatalog | None = None,
) -> PipelineRun:
    """Run both stages on ``doc`` and persist everything under ``run_dir``.

    Passing ``summary`` and ``catalog`` (bypass mode) skips the summarizer and
    captioner. The initial generation still runs and is charged to the
    code_review stage, so stage 1 records no calls. Errors never escape: they
    produce a run with status ``failed``.
    """
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    config_hash = config.config_hash()
    run = PipelineRun(
        make_run_id(config_hash, doc, models.prompts.version), run_dir, config_hash,
        doc_id=doc.doc_id, origin=doc.origin, prompt_version=models.prompts.version,
    )
    # Marked failed until the final manifest replaces this one.
    run.error = "run did not complete"
    run.write()
    run.error = None
    rec = RunDirRecorder(run_dir)
    ledger = models.ledger
    current = "stage1"
    t0 = time.perf_counter()
    try:
        image_paths = stage_images(doc, run_dir)
        if renderer is None:
            r = config.renderer
            opts = {} if r.backend == "mock" else dict(
                command=r.command, extra_args=r.extra_args, max_parallel=r.max_parallel, timeout=r.timeout
            )
            renderer = make_renderer(r.backend, asset_root=run_dir, **opts)

        bypass = summary is not None and catalog is not None
        with ledger.stage("stage1"):
            if summary is None:
                summary = summarize(doc, models)
            if catalog is None:
                catalog = caption_images(doc, models)
            write_atomic(run_dir / "summary.md", format_summary(summary))
            write_atomic(run_dir / "images.md", format_catalog(catalog))
            ctx = GenerationContext(summary, catalog, syntax_guide(), config.constraints, image_paths=image_paths)
            if not bypass:
                initial = generate_code(ctx, models)
        run.stages["stage1"] = "ok"
        if bypass:
            # Stage 1 makes no calls in bypass mode; the first draft is charged to the code loop.
            current = "code_review"
            with ledger.stage("code_review"):
                initial = generate_code(ctx, models)

        current = "code_review"
        with ledger.stage("code_review"):
            code = code_review_loop(initial, ctx, config.budget, models, asset_root=run_dir, recorder=rec)
        run.outcomes["code_review"] = code
        run.stages["code_review"] = code.status

        current = "page_review"
        with ledger.stage("page_review"):
            page = page_review_loop(
                code.final_deck, renderer, ctx, config.budget, models,
                prefilter=config.prefilter, workers=config.page_workers, recorder=rec,
            )
        run.outcomes["page_review"] = page
        run.stages["page_review"] = page.status

        write_atomic(run_dir / "deck.final.md", serialize(page.final_deck))
        run.unresolved = [d.to_dict() for d in (*code.unresolved, *page.unresolved)]
        run.status = "approved" if code.status == page.status == "approved" else "budget_exhausted"
    except Exception as exc:  # any stage error fails the run
        run.status = "failed"
        run.stages[current] = "failed"
        for s in STAGES[STAGES.index(current) + 1 :]:
            run.stages[s] = "skipped"
        run.error = f"{type(exc).__name__}: {exc}"
    run.ledger = ledger.snapshot()
    run.timing = {"stage_seconds": ledger.seconds(), "total_seconds": round(time.perf_counter() - t0, 3)}
    run.write()
    return run
