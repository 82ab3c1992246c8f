"""MetricReport assembly for a finished run directory, and aggregation across runs."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image

from ..agents import image_id_of
from ..descriptions import parse_catalog
from ..errors import SlidegenError
from ..render import RenderedPage
from ..slidev import parse, slide_text
from .deck import figure_proportion, success_rate, text_image_relevance
from .embeddings import EvalImage, make_provider
from .judge import RUBRICS, abbreviate_reference, judge_scores
from .text import EmptyInput, coverage, rouge_l, split_sentences, tokenize

FRACTIONS = ("rouge_l", "coverage", "clip", "long_clip")
PERCENTAGES = ("success_rate", "figure_proportion")
METRICS = FRACTIONS + PERCENTAGES


class MissingArtifacts(SlidegenError):
    pass


@dataclass
class MetricReport:
    """Fractions in [0, 1] for the text and relevance metrics, percentages for the rest.

    A metric that cannot be computed is None and has an entry in ``reasons``.
    """

    rouge_l: float | None = None
    coverage: float | None = None
    clip: float | None = None
    long_clip: float | None = None
    success_rate: float | None = None
    figure_proportion: float | None = None
    judge: dict[str, int] | None = None
    reasons: dict[str, str] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def validate(self) -> "MetricReport":
        for name in METRICS:
            v = getattr(self, name)
            if v is None:
                if name not in self.reasons:
                    raise ValueError(f"{name} is null without a reason")
                continue
            hi = 1.0 if name in FRACTIONS else 100.0
            if not (0.0 <= v <= hi) or math.isnan(v):
                raise ValueError(f"{name}={v} outside [0, {hi}]")
        if self.judge is not None:
            if set(self.judge) != set(RUBRICS) or not all(1 <= s <= 10 for s in self.judge.values()):
                raise ValueError(f"bad judge scores {self.judge}")
        return self

    def to_dict(self) -> dict:
        d = {name: (None if getattr(self, name) is None else round(getattr(self, name), 10)) for name in METRICS}
        d["judge"] = self.judge
        d["reasons"] = dict(sorted(self.reasons.items()))
        d["meta"] = self.meta
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(**{k: d.get(k) for k in METRICS}, judge=d.get("judge"), reasons=d.get("reasons", {}), meta=d.get("meta", {}))

    def percent(self, name: str) -> float | None:
        v = getattr(self, name)
        if v is None:
            return None
        return v * 100 if name in FRACTIONS else v

    def table_line(self) -> str:
        cells = []
        for name in METRICS:
            v = self.percent(name)
            cells.append(f"{name}={'null' if v is None else f'{v:.2f}'}")
        return " ".join(cells)


def latest_pages(run_dir: Path) -> list[RenderedPage]:
    """Newest render of every page, in slide order."""
    best: dict[int, tuple[int, Path]] = {}
    for p in (run_dir / "renders").glob("page-*.v*.png"):
        m = re.fullmatch(r"page-(\d+)\.v(\d+)\.png", p.name)
        if m:
            i, v = int(m.group(1)), int(m.group(2))
            if i not in best or v > best[i][0]:
                best[i] = (v, p)
    pages = []
    for i in sorted(best):
        data = best[i][1].read_bytes()
        with Image.open(best[i][1]) as im:
            w, h = im.size
        pages.append(RenderedPage(i, data, w, h, None))
    return pages


def evaluate_run(run_dir, reference_text: str, eval_config, models=None, providers=None) -> MetricReport:
    """Compute the six metrics (and optionally judge scores) for one run and write metrics.json.

    ``providers`` may supply ``{"text": ..., "clip": ..., "long_clip": ...}``
    embedding providers; otherwise they are built from ``eval_config``.
    """
    run_dir = Path(run_dir)
    deck_path = run_dir / "deck.final.md"
    manifest_path = run_dir / "run.json"
    manifest = json.loads(manifest_path.read_text(encoding="utf-8")) if manifest_path.is_file() else {}
    report = MetricReport()
    report.success_rate = 0.0 if manifest.get("status", "failed") == "failed" else 100.0
    report.meta = {
        "coverage_direction": eval_config.coverage_direction,
        "providers": {
            "text": eval_config.text_provider,
            "clip": eval_config.clip_provider,
            "long_clip": eval_config.longclip_provider,
        },
        "relevance_scale": "raw cosine",
        "reference": "abbreviated" if eval_config.abbreviate else "full text",
    }
    if not deck_path.is_file():
        if report.success_rate:
            raise MissingArtifacts(f"{deck_path} is missing")
        for name in METRICS:
            if name != "success_rate":
                report.reasons[name] = "run failed; no final deck"
        return _write(report, run_dir)

    deck = parse(deck_path.read_text(encoding="utf-8"))
    catalog_path = run_dir / "images.md"
    catalog = parse_catalog(catalog_path.read_text(encoding="utf-8")) if catalog_path.is_file() else None

    if eval_config.abbreviate:
        if models is None:
            raise ValueError("abbreviating the reference needs a model client")
        reference = abbreviate_reference(reference_text, models, run_dir)
    else:
        reference = reference_text
    candidate = "\n\n".join(slide_text(s) for s in deck.slides)

    try:
        report.rouge_l = rouge_l(tokenize(candidate), tokenize(reference))
    except EmptyInput as exc:
        report.reasons["rouge_l"] = str(exc)

    providers = providers or {}
    text_p = providers.get("text") or make_provider(eval_config.text_provider, eval_config.toy_dimension, "live_text")
    ref_sents = split_sentences(reference)
    if ref_sents:
        report.coverage = coverage(split_sentences(candidate), ref_sents, text_p, eval_config.coverage_direction)
    else:
        report.reasons["coverage"] = "reference text has no sentences"

    def resolve(src: str) -> EvalImage | None:
        if catalog is None:
            return None
        image_id = image_id_of(src, catalog.ids)
        if image_id is None:
            return None
        entry = catalog.get(image_id)
        path = run_dir / src
        return EvalImage(image_id, path if path.is_file() else None, f"{entry.title}. {entry.description}")

    clip_p = providers.get("clip") or make_provider(eval_config.clip_provider, eval_config.toy_dimension)
    long_p = providers.get("long_clip") or make_provider(eval_config.longclip_provider, eval_config.toy_dimension)
    report.clip, report.long_clip = text_image_relevance(deck, resolve, clip_p, long_p)
    for name in ("clip", "long_clip"):
        if getattr(report, name) is None:
            report.reasons[name] = "no slide shows a catalog image"

    if catalog is None:
        report.reasons["figure_proportion"] = "run has no image catalog"
    else:
        report.figure_proportion = figure_proportion(deck, catalog)
        if report.figure_proportion is None:
            report.reasons["figure_proportion"] = "source document has no images"

    if eval_config.judge:
        if models is None:
            raise ValueError("judge scoring needs a model client")
        pages = latest_pages(run_dir)
        if not pages:
            raise MissingArtifacts(f"{run_dir / 'renders'} has no rendered pages")
        report.judge = judge_scores(pages, reference, models)
    return _write(report, run_dir)


def _write(report: MetricReport, run_dir: Path) -> MetricReport:
    report.validate()
    path = run_dir / "metrics.json"
    tmp = path.with_name("metrics.json.tmp")
    tmp.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(path)
    return report


def aggregate(runs: list[tuple[str, MetricReport]]) -> dict:
    """Combine per-run reports; ``runs`` holds (sample_id, report) pairs.

    Success rate counts every run. Other metrics are averaged over the runs
    that have them, both per run and as a mean of per-sample means.
    """
    if not runs:
        raise ValueError("nothing to aggregate")
    out: dict = {"runs": len(runs), "samples": len({s for s, _ in runs})}
    out["success_rate"] = success_rate([{"succeeded": r.success_rate == 100.0} for _, r in runs])
    for name in METRICS:
        if name == "success_rate":
            continue
        vals = [(s, r.percent(name)) for s, r in runs if getattr(r, name) is not None]
        if not vals:
            out[name] = {"per_run": None, "per_sample": None}
            continue
        by_sample: dict[str, list[float]] = {}
        for s, v in vals:
            by_sample.setdefault(s, []).append(v)
        out[name] = {
            "per_run": sum(v for _, v in vals) / len(vals),
            "per_sample": sum(sum(v) / len(v) for v in by_sample.values()) / len(by_sample),
        }
    return out
