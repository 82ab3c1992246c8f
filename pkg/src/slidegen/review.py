"""Stage 2: the code-review loop and the page-review loop.

The code loop alternates static checks, a Code Reviewer call and whole-deck
regeneration. The page loop renders the approved deck, has the Page Reviewer
inspect every page and regenerates flagged slides one at a time. The Code
Reviewer takes no part in the page loop.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .agents import GenerationContext, generate_code, referenced_image_ids
from .descriptions import format_catalog, format_summary
from .errors import SlidegenError
from .pagereviewer import PageVerdict, UnparseableVerdict, parse_verdict, review_page_heuristic, review_page_visual
from .slidev import (
    Diagnostic,
    NotOneSlide,
    SlidevDeck,
    SlidevSyntaxError,
    parse,
    parse_diagnostic,
    patch_slide,
    serialize,
    slide_source,
    validate_static,
)

STATIC_GUIDANCE = "Fix every problem listed above. The code must parse as Slidev Markdown and respect the layout requirements."
PATCH_GUIDANCE = "Output exactly one slide of valid Slidev Markdown, with optional frontmatter, and no other slides."


class NoParseableDeck(SlidegenError):
    """The code loop never produced a deck that parses."""


@dataclass(frozen=True)
class ReviewFeedback:
    target: int | None  # None targets the whole deck, otherwise a slide index
    verdict: str
    issues: tuple[Diagnostic, ...] = ()
    guidance: str = ""

    def __post_init__(self):
        if self.verdict not in ("approve", "reject"):
            raise ValueError(f"bad verdict {self.verdict!r}")
        if self.verdict == "reject" and not (self.issues or self.guidance.strip()):
            raise ValueError("a rejection needs issues or guidance")

    @classmethod
    def from_verdict(cls, v: PageVerdict, target: int | None) -> "ReviewFeedback":
        return cls(target, v.verdict, v.issues, v.guidance)

    def as_text(self) -> str:
        where = "the whole deck" if self.target is None else f"slide {self.target}"
        lines = [f"Target: {where}", f"Verdict: {self.verdict.upper()}"]
        if self.issues:
            lines.append("Issues:")
            for d in self.issues:
                at = f" (slide {d.slide_index})" if d.slide_index is not None and self.target is None else ""
                lines.append(f"- [{d.code}]{at} {d.message}".rstrip())
        if self.guidance:
            lines.append(f"Guidance: {self.guidance}")
        return "\n".join(lines)


@dataclass(frozen=True)
class LoopBudget:
    max_code_iterations: int = 5
    max_page_iterations_per_slide: int = 3

    def __post_init__(self):
        if self.max_code_iterations < 1 or self.max_page_iterations_per_slide < 1:
            raise ValueError("loop budgets must be at least 1")


@dataclass(frozen=True)
class TraceEntry:
    loop: str  # "code" | "page"
    iteration: int  # page loop: 0 is the initial review, k the k-th fix cycle
    target: int | None
    verdict: str  # "approve" | "reject" | "unparseable"
    calls_used: int
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "loop": self.loop, "iteration": self.iteration, "target": self.target,
            "verdict": self.verdict, "calls_used": self.calls_used, "note": self.note,
        }


@dataclass(frozen=True)
class LoopOutcome:
    status: str  # "approved" | "budget_exhausted"
    final_deck: SlidevDeck
    iteration_trace: tuple[TraceEntry, ...]
    unresolved: tuple[Diagnostic, ...] = ()
    versions: tuple[str, ...] = ()

    def __post_init__(self):
        if self.status not in ("approved", "budget_exhausted"):
            raise ValueError(f"bad status {self.status!r}")
        if self.status == "approved" and self.unresolved:
            raise ValueError("an approved outcome has no unresolved diagnostics")

    @property
    def calls(self) -> int:
        return sum(t.calls_used for t in self.iteration_trace)


class Recorder:
    """Receives intermediate artifacts. The base class discards them."""

    def deck_version(self, k: int, source: str) -> None:
        pass

    def page_render(self, page, version: int) -> None:
        pass

    def diagnostics(self, loop: str, iteration: int, diags) -> None:
        pass

    def trace(self, entry: TraceEntry) -> None:
        pass


def _as_rejection(diags: list[Diagnostic], guidance: str, target: int | None = None) -> ReviewFeedback:
    return ReviewFeedback(target, "reject", tuple(diags), guidance)


def review_code(source: str, ctx: GenerationContext, models, findings: list[Diagnostic] = ()) -> PageVerdict:
    """One Code Reviewer call; static findings are prepended to the prompt."""
    bindings = {
        "constraints": ctx.constraints.describe(),
        "static_findings": "\n".join(f"- {d}" for d in findings) or "none",
        "summary": format_summary(ctx.summary).strip(),
        "catalog": format_catalog(ctx.catalog).strip() or "(no images)",
        "code": source.strip(),
    }
    return models.ask_parsed(
        "code_reviewer", "code_reviewer", bindings,
        lambda text: parse_verdict(text, "code_review", None), UnparseableVerdict,
    )


def _check(source: str, ctx: GenerationContext, asset_root) -> tuple[SlidevDeck | None, list[Diagnostic]]:
    try:
        deck = parse(source)
    except SlidevSyntaxError as exc:
        return None, [parse_diagnostic(exc)]
    return deck, validate_static(deck, ctx.constraints, asset_root)


def code_review_loop(
    initial_source: str,
    ctx: GenerationContext,
    budget: LoopBudget,
    models,
    asset_root: Path | str | None = None,
    recorder: Recorder | None = None,
) -> LoopOutcome:
    """Review and regenerate the whole deck until approval or ``budget.max_code_iterations``.

    Each iteration parses and statically checks the current source. Static
    errors skip the reviewer and go straight to regeneration. A clean deck
    gets one reviewer call; a rejection costs one more call to regenerate.
    On exhaustion the last parseable version is returned.
    """
    rec = recorder or Recorder()
    source = initial_source
    versions: list[str] = []
    trace: list[TraceEntry] = []
    last_good: SlidevDeck | None = None
    feedback: ReviewFeedback | None = None

    for it in range(1, budget.max_code_iterations + 1):
        versions.append(source)
        rec.deck_version(it, source)
        before = models.thread_calls()
        deck, diags = _check(source, ctx, asset_root)
        rec.diagnostics("code", it, diags)
        if deck is not None:
            last_good = deck
        errors = [d for d in diags if d.severity == "error"]
        if errors:
            feedback = _as_rejection(errors, STATIC_GUIDANCE)
            note = "static: " + ", ".join(sorted({d.code for d in errors}))
        else:
            verdict = review_code(source, ctx, models, diags)
            rec.diagnostics("code", it, verdict.issues)
            if verdict.approved:
                entry = TraceEntry("code", it, None, "approve", models.thread_calls() - before)
                trace.append(entry)
                rec.trace(entry)
                return LoopOutcome("approved", deck, tuple(trace), (), tuple(versions))
            feedback = ReviewFeedback.from_verdict(verdict, None)
            note = "reviewer"
        source = generate_code(ctx.with_feedback(feedback), models, current_source=source)
        entry = TraceEntry("code", it, None, "reject", models.thread_calls() - before, note)
        trace.append(entry)
        rec.trace(entry)

    # The last regeneration was never reviewed; keep it if it at least parses.
    versions.append(source)
    rec.deck_version(len(versions), source)
    deck, diags = _check(source, ctx, asset_root)
    rec.diagnostics("code", len(versions), diags)
    final = deck if deck is not None else last_good
    if final is None:
        raise NoParseableDeck(f"none of {len(versions)} generated versions parses")
    unresolved = list(feedback.issues) if feedback and feedback.issues else []
    if not unresolved:
        unresolved.append(Diagnostic("error", "REVIEW_REJECTED", feedback.guidance if feedback else "", None, "code_review"))
    return LoopOutcome("budget_exhausted", final, tuple(trace), tuple(unresolved), tuple(versions))


class _DeckCell:
    """Single-writer commit point for the deck shared by concurrent fix cycles."""

    def __init__(self, deck: SlidevDeck):
        self._deck = deck
        self._lock = threading.Lock()

    def get(self) -> SlidevDeck:
        with self._lock:
            return self._deck

    def commit(self, index: int, replacement: str) -> SlidevDeck:
        """Patch one slide of the latest deck; raises when the replacement does not parse."""
        with self._lock:
            self._deck = patch_slide(self._deck, index, replacement)
            return self._deck


def page_review_loop(
    deck: SlidevDeck,
    renderer,
    ctx: GenerationContext,
    budget: LoopBudget,
    models,
    prefilter: bool = False,
    workers: int = 1,
    recorder: Recorder | None = None,
) -> LoopOutcome:
    """Render, review every page, and regenerate flagged slides one by one.

    Only regenerated pages are reviewed again. A replacement that does not
    parse leaves the slide at its last good version. With ``workers > 1`` the
    initial reviews and the per-slide fix cycles run concurrently; the result
    does not depend on scheduling except for the order of trace entries.
    """
    rec = recorder or Recorder()
    cell = _DeckCell(deck)
    ids = ctx.catalog.ids

    def review(page, current: SlidevDeck) -> PageVerdict:
        if prefilter and page.sidecar is not None:
            verdict = review_page_heuristic(page)
            if not verdict.approved:
                return verdict
        return review_page_visual(page, slide_source(current, page.slide_index), models, ctx.constraints)

    def initial(page) -> tuple[PageVerdict, TraceEntry]:
        before = models.thread_calls()
        v = review(page, deck)
        return v, TraceEntry("page", 0, page.slide_index, v.verdict, models.thread_calls() - before)

    def fix(index: int, verdict: PageVerdict) -> tuple[list[TraceEntry], list[Diagnostic]]:
        entries: list[TraceEntry] = []
        for attempt in range(1, budget.max_page_iterations_per_slide + 1):
            before = models.thread_calls()
            current = cell.get()
            fb = ReviewFeedback.from_verdict(verdict, index)
            slide_ctx = ctx.for_slide(referenced_image_ids(current, index, ids), fb)
            new_src = generate_code(
                slide_ctx, models, current_source=slide_source(current, index),
                scope=f"only slide {index}, as exactly one slide",
            )
            try:
                patched = cell.commit(index, new_src)
            except (SlidevSyntaxError, NotOneSlide) as exc:
                issue = Diagnostic("error", "PATCH_UNPARSEABLE", str(exc), index, "page_review")
                rec.diagnostics("page", attempt, [issue])
                verdict = PageVerdict(index, "reject", (issue,), PATCH_GUIDANCE)
                entries.append(TraceEntry("page", attempt, index, "unparseable", models.thread_calls() - before))
                continue
            page = renderer.render_page(serialize(patched), index)
            rec.page_render(page, attempt)
            verdict = review(page, patched)
            rec.diagnostics("page", attempt, verdict.issues)
            entries.append(TraceEntry("page", attempt, index, verdict.verdict, models.thread_calls() - before))
            if verdict.approved:
                return entries, []
        unresolved = list(verdict.issues) or [
            Diagnostic("error", "PAGE_REJECTED", verdict.guidance, index, "page_review")
        ]
        return entries, unresolved

    pages = renderer.render(serialize(deck))
    for p in pages:
        rec.page_render(p, 0)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        first = list(pool.map(initial, pages))
        trace: list[TraceEntry] = []
        for v, entry in first:
            rec.diagnostics("page", 0, v.issues)
            trace.append(entry)
            rec.trace(entry)
        flagged = [(p.slide_index, v) for p, (v, _) in zip(pages, first) if not v.approved]
        results = list(pool.map(lambda fv: fix(*fv), flagged))

    unresolved: list[Diagnostic] = []
    for entries, left in results:
        for entry in entries:
            trace.append(entry)
            rec.trace(entry)
        unresolved.extend(left)
    status = "approved" if not unresolved else "budget_exhausted"
    return LoopOutcome(status, cell.get(), tuple(trace), tuple(unresolved))
