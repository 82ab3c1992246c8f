import json

from slidegen.config import RunConfig
from slidegen.descriptions import parse_catalog, parse_summary
from slidegen.ingest import bypass_document, ingest_bundle
from slidegen.modelio import CallLedger
from slidegen.pipeline import make_run_id, run_pipeline
from support import APPROVE, PAGE_REJECT, REJECT, SUMMARY, catalog_text, deck_text, image_ids, make_bundle, make_png, records, scripted, slide_text_src

IDS = image_ids(2)


def happy_records(**kw):
    base = dict(catalog=catalog_text(IDS), generator=[deck_text(3, IDS)], code_reviewer=[APPROVE], page_reviewer=APPROVE)
    base.update(kw)
    return records(**base)


def run(tmp_path, recs, n_images=2, config=None, name="run"):
    doc = ingest_bundle(make_bundle(tmp_path / "bundle", n_images=n_images))
    models = scripted(recs)
    return run_pipeline(doc, config or RunConfig(), models, tmp_path / name), models


def test_happy_path(tmp_path):
    r, models = run(tmp_path, happy_records())
    assert r.status == "approved" and r.exit_code == 0
    snap = models.ledger.snapshot()
    assert snap["by_stage"] == {"code_review": 1, "page_review": 3, "stage1": 3}
    assert snap["by_role"]["summarizer"] == snap["by_role"]["captioner"] == 1
    d = r.run_dir
    for name in ("summary.md", "images.md", "deck.v1.md", "deck.final.md", "diagnostics.jsonl", "trace.jsonl",
                 "images/img-001.png", "renders/page-0.v0.png", "renders/page-2.boxes.json"):
        assert (d / name).is_file(), name
    assert parse_summary((d / "summary.md").read_text()).title == "Sparse Attention for Long Documents"
    assert parse_catalog((d / "images.md").read_text()).ids == IDS


def test_run_json(tmp_path):
    r, models = run(tmp_path, happy_records())
    manifest = json.loads((r.run_dir / "run.json").read_text())
    assert manifest["status"] == "approved"
    assert manifest["stages"] == {"stage1": "ok", "code_review": "approved", "page_review": "approved"}
    assert manifest["ledger"]["total"] == 7
    assert manifest["run_id"] == r.run_id == make_run_id(RunConfig().config_hash(), ingest_bundle(tmp_path / "bundle"), models.prompts.version)
    assert "deck.final.md" in manifest["artifacts"] and "run.json" not in manifest["artifacts"]
    assert manifest["error"] is None and set(manifest["timing"]) == {"stage_seconds", "total_seconds"}


def test_trace_and_diagnostics_files(tmp_path):
    recs = happy_records(code_reviewer=[REJECT, APPROVE], generator=[deck_text(3, IDS)] * 2)
    r, _ = run(tmp_path, recs)
    trace = [json.loads(line) for line in (r.run_dir / "trace.jsonl").read_text().splitlines()]
    assert [(t["loop"], t["verdict"]) for t in trace[:2]] == [("code", "reject"), ("code", "approve")]
    assert len(trace) == 2 + 3
    diags = [json.loads(line) for line in (r.run_dir / "diagnostics.jsonl").read_text().splitlines()]
    assert {"loop": "code", "iteration": 1, "severity": "error", "code": "CONTENT",
            "message": "the key points are missing", "slide_index": None, "source": "code_review"} in diags


def test_budget_exhausted_exit_code(tmp_path):
    recs = happy_records(page_reviewer=PAGE_REJECT, generator=[deck_text(3, IDS)] + [slide_text_src(f"v{k}") for k in range(9)])
    r, _ = run(tmp_path, recs)
    assert r.status == "budget_exhausted" and r.exit_code == 2
    assert {d["code"] for d in r.unresolved} == {"OVERFLOW"}
    assert (r.run_dir / "deck.final.md").is_file()


def test_failing_generator_writes_failed_manifest(tmp_path):
    recs = records(catalog=catalog_text(IDS))  # no generator replies at all
    r, _ = run(tmp_path, recs)
    assert r.status == "failed" and r.exit_code == 1
    manifest = json.loads((r.run_dir / "run.json").read_text())
    assert manifest["stages"] == {"stage1": "failed", "code_review": "skipped", "page_review": "skipped"}
    assert "TranscriptExhausted" in manifest["error"]
    assert not (r.run_dir / "deck.final.md").exists()


def test_call_cap_fails_the_run(tmp_path):
    doc = ingest_bundle(make_bundle(tmp_path / "bundle", n_images=2))
    models = scripted(happy_records(), ledger=CallLedger(max_calls=4))
    r = run_pipeline(doc, RunConfig(), models, tmp_path / "run")
    assert r.status == "failed" and "BudgetExhausted" in r.error
    assert r.stages["page_review"] == "failed"
    assert models.ledger.total == 4


def test_bypass_skips_summarizer_and_captioner(tmp_path):
    for i in IDS:
        make_png(tmp_path / "assets" / f"{i}.png")
    summary, catalog = parse_summary(SUMMARY), parse_catalog(catalog_text(IDS))
    doc = bypass_document(summary, catalog, tmp_path / "assets")
    models = scripted(records(generator=[deck_text(3, IDS)], code_reviewer=[APPROVE], page_reviewer=APPROVE))
    r = run_pipeline(doc, RunConfig(), models, tmp_path / "run", summary=summary, catalog=catalog)
    assert r.status == "approved"
    snap = models.ledger.snapshot()
    assert "summarizer" not in snap["by_role"] and "captioner" not in snap["by_role"]
    assert "stage1" not in snap["by_stage"]
    assert snap["by_stage"]["code_review"] == 2


def test_rerun_is_reproducible(tmp_path):
    a, _ = run(tmp_path, happy_records(), name="a")
    b, _ = run(tmp_path, happy_records(), name="b")
    for name in ("deck.final.md", "diagnostics.jsonl", "trace.jsonl", "renders/page-1.v0.png"):
        assert (a.run_dir / name).read_bytes() == (b.run_dir / name).read_bytes()
    assert a.run_id == b.run_id
