"""Per-page visual review: a vision-model reviewer and a sidecar-based heuristic one.

Reviewer replies follow a line protocol::

    VERDICT: APPROVE | VERDICT: REJECT
    ISSUE: <CODE> <message>        (zero or more)
    GUIDANCE: <text>               (required when rejecting)
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import SlidegenError
from .render import RenderedPage, overflow_check
from .slidev import Diagnostic, LayoutConstraints

_VERDICT = re.compile(r"^VERDICT:\s*(APPROVE|REJECT)\s*$")
_ISSUE = re.compile(r"^ISSUE:\s*(\S+)\s*(.*)$")
_GUIDANCE = re.compile(r"^GUIDANCE:\s*(.*)$")

# The only adjustments the heuristic reviewer ever asks for.
LAYOUT_ACTIONS = {
    "shrink_image": "shrink image: resize the image to a smaller width so it fits entirely inside the page",
    "two_columns": "split into two columns: use the two-cols layout to place the image beside the text",
    "bullets": "convert to bullet list: restate the overflowing text as a few short bullet points",
}


class UnparseableVerdict(SlidegenError):
    pass


class NoSidecar(SlidegenError):
    pass


@dataclass(frozen=True)
class PageVerdict:
    slide_index: int | None
    verdict: str  # "approve" | "reject"
    issues: tuple[Diagnostic, ...] = ()
    guidance: str = ""

    def __post_init__(self):
        if self.verdict not in ("approve", "reject"):
            raise ValueError(f"bad verdict {self.verdict!r}")
        if self.verdict == "reject" and not self.guidance.strip():
            raise ValueError("a rejection needs guidance")

    @property
    def approved(self) -> bool:
        return self.verdict == "approve"


def parse_verdict(text: str, source: str = "page_review", slide_index: int | None = None) -> PageVerdict:
    lines = text.strip().splitlines()
    if not lines:
        raise UnparseableVerdict("empty reply")
    m = _VERDICT.match(lines[0].strip())
    if not m:
        raise UnparseableVerdict(f"first line must be 'VERDICT: APPROVE' or 'VERDICT: REJECT', got {lines[0][:80]!r}")
    if m.group(1) == "APPROVE":
        return PageVerdict(slide_index, "approve")
    issues = []
    guidance: list[str] = []
    in_guidance = False
    for line in lines[1:]:
        stripped = line.strip()
        if in_guidance:
            guidance.append(stripped)
            continue
        if im := _ISSUE.match(stripped):
            issues.append(Diagnostic("error", im.group(1).upper().rstrip(":"), im.group(2).strip(), slide_index, source))
        elif gm := _GUIDANCE.match(stripped):
            in_guidance = True
            guidance.append(gm.group(1))
    text_guidance = "\n".join(guidance).strip()
    if not text_guidance:
        raise UnparseableVerdict("a REJECT verdict must end with a 'GUIDANCE:' line")
    return PageVerdict(slide_index, "reject", tuple(issues), text_guidance)


def review_page_visual(page: RenderedPage, slide_source: str, models, constraints: LayoutConstraints | None = None) -> PageVerdict:
    """Ask the vision model to judge one rendered page (one call; one re-prompt if the reply is malformed)."""
    constraints = constraints or LayoutConstraints()
    bindings = {
        "slide_index": str(page.slide_index),
        "slide_source": slide_source.strip(),
        "constraints": constraints.describe(),
    }
    return models.ask_parsed(
        "page_reviewer", "page_reviewer", bindings,
        lambda text: parse_verdict(text, "page_review", page.slide_index),
        UnparseableVerdict, images=(page.image_bytes,),
    )


def _action_for(d: Diagnostic, page: RenderedPage) -> str:
    if d.code == "CROWDING":
        return "two_columns"
    box = page.sidecar[d.box_index] if d.box_index is not None else None
    if box is not None and box.kind == "image":
        return "shrink_image"
    return "bullets"


def review_page_heuristic(page: RenderedPage) -> PageVerdict:
    """Reject exactly when :func:`overflow_check` finds something; no model call."""
    if page.sidecar is None:
        raise NoSidecar(f"page {page.slide_index} has no layout sidecar")
    issues = overflow_check(page)
    if not issues:
        return PageVerdict(page.slide_index, "approve")
    actions = []
    for d in issues:
        a = _action_for(d, page)
        if a not in actions:
            actions.append(a)
    return PageVerdict(page.slide_index, "reject", tuple(issues), "; ".join(LAYOUT_ACTIONS[a] for a in actions))
