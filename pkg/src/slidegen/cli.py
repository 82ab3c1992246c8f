"""Command line: ``slidegen generate | eval | lint | render``.

Paths are printed one per line on standard output; diagnostics go to
standard error. Exit codes: 0 success, 2 review budget exhausted (generate)
or error diagnostics found (lint uses 1), 1 failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .config import ClientConfig, build_models, load_config
from .errors import SlidegenError
from .evalkit import MetricReport, aggregate, evaluate_run
from .ingest import bypass_document, ingest_bundle, ingest_bypass
from .pipeline import make_run_id, run_pipeline
from .render import make_renderer
from .slidev import LayoutConstraints, SlidevSyntaxError, parse, parse_diagnostic, validate_static


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "transcript", None):
        scripted = ClientConfig(provider="scripted", transcript=str(Path(args.transcript).resolve()))
        cfg = dataclasses.replace(cfg, models=scripted, role_models={}).validate()
    return cfg


def _fresh_dir(root: Path, name: str) -> Path:
    path, n = root / name, 2
    while path.exists():
        path, n = root / f"{name}-{n}", n + 1
    return path


def cmd_generate(args) -> int:
    cfg = _load(args)
    summary = catalog = None
    if args.bypass_summary or args.bypass_catalog:
        if not (args.bypass_summary and args.bypass_catalog and args.bypass_assets):
            _err("error: bypass mode needs --bypass-summary, --bypass-catalog and --bypass-assets")
            return 1
        summary, catalog = ingest_bypass(args.bypass_summary, args.bypass_catalog, args.bypass_assets)
        doc = bypass_document(summary, catalog, args.bypass_assets)
    elif args.bundle:
        doc = ingest_bundle(args.bundle)
    else:
        _err("error: give a bundle directory or the --bypass-* files")
        return 1
    models = build_models(cfg)
    if args.run_dir:
        run_dir = Path(args.run_dir)
    else:
        run_dir = _fresh_dir(Path(cfg.run_root), make_run_id(cfg.config_hash(), doc, models.prompts.version))
    run = run_pipeline(doc, cfg, models, run_dir, summary=summary, catalog=catalog)
    print(run.run_dir)
    print(run.run_dir / "run.json")
    if (run.run_dir / "deck.final.md").is_file():
        print(run.run_dir / "deck.final.md")
    if run.error:
        _err(f"error: {run.error}")
    for d in run.unresolved:
        where = "deck" if d.get("slide_index") is None else f"slide {d['slide_index']}"
        _err(f"unresolved: {where}: {d['code']} {d['message']}")
    _err(f"status: {run.status}")
    return run.exit_code


def _reference_text(args) -> str:
    if args.reference_text:
        return Path(args.reference_text).read_text(encoding="utf-8")
    return ingest_bundle(args.reference).body_text


def cmd_eval(args) -> int:
    if not (args.reference or args.reference_text):
        _err("error: give --reference BUNDLE or --reference-text FILE")
        return 1
    cfg = _load(args)
    reference = _reference_text(args)
    needs_models = cfg.eval.abbreviate or cfg.eval.judge
    models = build_models(cfg) if needs_models else None
    results: list[tuple[str, MetricReport]] = []
    for run_dir in args.run_dirs:
        run_dir = Path(run_dir)
        if not run_dir.is_dir():
            _err(f"error: {run_dir} is not a run directory")
            return 1
        report = evaluate_run(run_dir, reference, cfg.eval, models)
        manifest = run_dir / "run.json"
        sample = json.loads(manifest.read_text(encoding="utf-8")).get("doc_id", str(run_dir)) if manifest.is_file() else str(run_dir)
        results.append((sample, report))
        print(run_dir / "metrics.json")
        _err(f"{run_dir}: {report.table_line()}")
        for name, why in sorted(report.reasons.items()):
            _err(f"{run_dir}: {name} is null: {why}")
    if len(results) > 1:
        _err("aggregate: " + json.dumps(aggregate(results), sort_keys=True))
    return 0


def _constraints(cfg, args) -> LayoutConstraints:
    if args.max_lines is None:
        return cfg.constraints
    return dataclasses.replace(cfg.constraints, max_lines_per_slide=args.max_lines)


def cmd_lint(args) -> int:
    cfg = load_config(args.config)
    path = Path(args.deck)
    text = path.read_text(encoding="utf-8")
    try:
        deck = parse(text)
    except SlidevSyntaxError as exc:
        print(f"{path}: {parse_diagnostic(exc)}")
        return 1
    asset_root = args.asset_root if args.asset_root is not None else path.parent
    diags = validate_static(deck, _constraints(cfg, args), asset_root)
    for d in diags:
        print(f"{path}: {d}")
    return 1 if any(d.severity == "error" for d in diags) else 0


def cmd_render(args) -> int:
    cfg = load_config(args.config)
    path = Path(args.deck)
    backend = args.backend or cfg.renderer.backend
    asset_root = args.asset_root if args.asset_root is not None else path.parent
    r = cfg.renderer
    opts = {} if backend == "mock" else dict(
        command=r.command, extra_args=r.extra_args, max_parallel=r.max_parallel, timeout=r.timeout
    )
    pages = make_renderer(backend, asset_root=asset_root, **opts).render(path.read_text(encoding="utf-8"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for page in pages:
        png = out / f"page-{page.slide_index}.png"
        png.write_bytes(page.image_bytes)
        print(png)
        if page.sidecar is not None:
            boxes = out / f"page-{page.slide_index}.boxes.json"
            boxes.write_text(page.sidecar_json(), encoding="utf-8")
            print(boxes)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slidegen", description="Turn a text+image document into a Slidev deck.")
    sub = p.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("generate", help="run the full generation pipeline")
    g.add_argument("bundle", nargs="?", help="bundle directory containing manifest.json")
    g.add_argument("--config", help="TOML run configuration")
    g.add_argument("--transcript", help="replay model replies from a JSONL transcript instead of the configured clients")
    g.add_argument("--run-dir", help="output directory (default: <run root>/<run id>)")
    g.add_argument("--bypass-summary", help="prepared summary.md; skips the summarizer")
    g.add_argument("--bypass-catalog", help="prepared images.md; skips the captioner")
    g.add_argument("--bypass-assets", help="directory holding <image_id>.png|jpg files for the bypass catalog")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("eval", help="compute metrics for finished runs")
    e.add_argument("run_dirs", nargs="+", help="run directories")
    e.add_argument("--reference", help="source bundle whose body text is the reference")
    e.add_argument("--reference-text", help="plain text file to use as the reference instead")
    e.add_argument("--config", help="TOML run configuration")
    e.add_argument("--transcript", help="replay model replies (abbreviator, judge) from a JSONL transcript")
    e.set_defaults(func=cmd_eval)

    li = sub.add_parser("lint", help="statically check a Slidev deck")
    li.add_argument("deck")
    li.add_argument("--config", help="TOML run configuration (for layout constraints)")
    li.add_argument("--asset-root", help="directory images are resolved against (default: the deck's directory)")
    li.add_argument("--max-lines", type=int, help="override the per-slide line limit")
    li.set_defaults(func=cmd_lint)

    r = sub.add_parser("render", help="render a deck to page images")
    r.add_argument("deck")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--backend", choices=("mock", "live"))
    r.add_argument("--config", help="TOML run configuration")
    r.add_argument("--asset-root", help="directory images are resolved against (default: the deck's directory)")
    r.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SlidegenError, OSError, ValueError) as exc:
        _err(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
