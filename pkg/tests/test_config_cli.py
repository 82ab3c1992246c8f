import json
from pathlib import Path

import pytest

from slidegen.cli import main
from slidegen.config import ConfigError, RunConfig, build_models, load_config
from slidegen.modelio import EchoClient, OpenAICompatClient, ScriptedClient
from support import APPROVE, PAGE_REJECT, catalog_text, deck_text, image_ids, make_bundle, records, slide_text_src, write_transcript

FIXTURES = Path(__file__).parent / "fixtures" / "decks"
IDS = image_ids(2)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


# -- config --------------------------------------------------------------------


def test_defaults():
    cfg = load_config(None)
    assert cfg.models.provider == "echo" and cfg.renderer.backend == "mock"
    assert cfg.budget.max_code_iterations == 5 and cfg.budget.max_page_iterations_per_slide == 3
    assert isinstance(build_models(cfg).client_for("generator"), EchoClient)


def test_load_toml(tmp_path):
    write(tmp_path / "t.jsonl", "")
    path = write(tmp_path / "c.toml", """
[models]
provider = "openai"
base_url = "https://llm.example/v1"
model = "vl-small"

[models.roles.page_reviewer]
model = "vl-large"

[models.roles.judge]
provider = "scripted"
transcript = "t.jsonl"

[budget]
max_code_iterations = 2

[constraints]
max_lines_per_slide = 9

[run]
max_calls = 50
page_workers = 2
""")
    cfg = load_config(path)
    assert cfg.client_config("page_reviewer").model == "vl-large"
    assert cfg.client_config("page_reviewer").base_url == "https://llm.example/v1"
    assert cfg.client_config("judge").transcript == str(tmp_path / "t.jsonl")
    assert cfg.budget.max_code_iterations == 2 and cfg.constraints.max_lines_per_slide == 9
    models = build_models(cfg)
    assert isinstance(models.client_for("summarizer"), OpenAICompatClient)
    assert isinstance(models.client_for("judge"), ScriptedClient)
    assert models.ledger.max_calls == 50


@pytest.mark.parametrize("body, match", [
    ('[models]\napi_key = "sk-123"\n', "environment"),
    ("[models]\nprovider = \"carrier-pigeon\"\n", "provider"),
    ("[budget]\nmax_code_iterations = 0\n", "budget"),
    ("[nonsense]\n", "unknown sections"),
    ("[run]\nspeed = 3\n", "unknown keys"),
    ("[models\n", "c.toml"),
])
def test_config_errors(tmp_path, body, match):
    with pytest.raises(ConfigError, match=match):
        load_config(write(tmp_path / "c.toml", body))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")


def test_config_hash_tracks_settings():
    assert RunConfig().config_hash() == RunConfig().config_hash()
    assert RunConfig().config_hash() != RunConfig(prefilter=True).config_hash()


# -- generate ------------------------------------------------------------------


def generate(tmp_path, recs, name="run"):
    bundle = make_bundle(tmp_path / "bundle", n_images=2)
    transcript = write_transcript(tmp_path / f"{name}.jsonl", recs)
    run_dir = tmp_path / name
    code = main(["generate", str(bundle), "--transcript", str(transcript), "--run-dir", str(run_dir)])
    return code, run_dir


def happy():
    return records(catalog=catalog_text(IDS), generator=[deck_text(3, IDS)], code_reviewer=[APPROVE], page_reviewer=APPROVE)


def test_generate_approved(tmp_path, capsys):
    code, run_dir = generate(tmp_path, happy())
    assert code == 0
    out = capsys.readouterr().out.split()
    assert out == [str(run_dir), str(run_dir / "run.json"), str(run_dir / "deck.final.md")]


def test_generate_budget_exhausted(tmp_path, capsys):
    recs = records(catalog=catalog_text(IDS), generator=[deck_text(3, IDS)] + [slide_text_src("x")] * 9,
                   code_reviewer=[APPROVE], page_reviewer=PAGE_REJECT)
    code, _ = generate(tmp_path, recs)
    assert code == 2
    err = capsys.readouterr().err
    assert "unresolved: slide 0: OVERFLOW" in err and "status: budget_exhausted" in err


def test_generate_failed(tmp_path, capsys):
    code, run_dir = generate(tmp_path, records(catalog=catalog_text(IDS)))
    assert code == 1
    assert json.loads((run_dir / "run.json").read_text())["status"] == "failed"


def test_generate_missing_bundle(tmp_path, capsys):
    assert main(["generate", str(tmp_path / "nope")]) == 1
    assert "error:" in capsys.readouterr().err


def test_generate_default_run_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    bundle = make_bundle(tmp_path / "bundle", n_images=2)
    transcript = write_transcript(tmp_path / "t.jsonl", happy())
    assert main(["generate", str(bundle), "--transcript", str(transcript)]) == 0
    first = Path(capsys.readouterr().out.split()[0])
    assert first.parent == Path("runs")
    assert main(["generate", str(bundle), "--transcript", str(transcript)]) == 0
    second = Path(capsys.readouterr().out.split()[0])
    assert second.name == first.name + "-2"


def test_generate_bypass(tmp_path, capsys):
    assets = tmp_path / "assets"
    from support import SUMMARY, make_png
    for i in IDS:
        make_png(assets / f"{i}.png")
    summary = write(tmp_path / "summary.md", SUMMARY)
    catalog = write(tmp_path / "images.md", catalog_text(IDS))
    transcript = write_transcript(tmp_path / "t.jsonl", records(summary="unused", generator=[deck_text(3, IDS)], code_reviewer=[APPROVE], page_reviewer=APPROVE))
    code = main(["generate", "--bypass-summary", str(summary), "--bypass-catalog", str(catalog), "--bypass-assets", str(assets),
                 "--transcript", str(transcript), "--run-dir", str(tmp_path / "run")])
    assert code == 0
    ledger = json.loads((tmp_path / "run" / "run.json").read_text())["ledger"]
    assert "stage1" not in ledger["by_stage"] and "summarizer" not in ledger["by_role"]


def test_generate_partial_bypass(tmp_path, capsys):
    assert main(["generate", "--bypass-summary", "s.md"]) == 1


# -- eval ----------------------------------------------------------------------


def test_eval_writes_metrics_deterministically(tmp_path, capsys):
    code, run_dir = generate(tmp_path, happy())
    capsys.readouterr()
    transcript = write_transcript(tmp_path / "eval.jsonl", [{"role": "abbreviator", "index": "*", "text": "Sparse attention keeps a local window."}])
    args = ["eval", str(run_dir), "--reference", str(tmp_path / "bundle"), "--transcript", str(transcript)]
    assert main(args) == 0
    out, err = capsys.readouterr()
    assert out.strip() == str(run_dir / "metrics.json")
    assert "success_rate=100.00" in err and "figure_proportion=100.00" in err
    first = (run_dir / "metrics.json").read_bytes()
    assert main(args) == 0
    assert (run_dir / "metrics.json").read_bytes() == first
    assert len(list(run_dir.glob("reference.*.md"))) == 1


def test_eval_reference_text_without_abbreviation(tmp_path, capsys):
    _, run_dir = generate(tmp_path, happy())
    cfg = write(tmp_path / "c.toml", "[eval]\nabbreviate = false\n")
    ref = write(tmp_path / "ref.txt", "Sparse attention keeps a local window. Memory grows linearly.")
    assert main(["eval", str(run_dir), str(run_dir), "--reference-text", str(ref), "--config", str(cfg)]) == 0
    err = capsys.readouterr().err
    assert "aggregate:" in err
    assert json.loads((run_dir / "metrics.json").read_text())["meta"]["reference"] == "full text"


def test_eval_needs_reference(tmp_path, capsys):
    assert main(["eval", str(tmp_path)]) == 1


# -- lint and render -----------------------------------------------------------


def test_lint_clean(capsys):
    for name in ("01_minimal.md", "05_two_cols.md"):
        assert main(["lint", str(FIXTURES / name)]) == 0
    assert capsys.readouterr().out == ""


def test_lint_line_limit(tmp_path, capsys):
    deck = write(tmp_path / "d.md", "# T\n\n- a\n- b\n- c\n")
    assert main(["lint", str(deck), "--max-lines", "2"]) == 1
    assert "LINE_LIMIT" in capsys.readouterr().out


def test_lint_unparseable(tmp_path, capsys):
    deck = write(tmp_path / "d.md", "# T\n\n```\nopen\n")
    assert main(["lint", str(deck)]) == 1
    assert "PARSE_ERROR line 3" in capsys.readouterr().out


def test_render_mock(tmp_path, capsys):
    deck = write(tmp_path / "d.md", deck_text(3))
    assert main(["render", str(deck), "--out", str(tmp_path / "out")]) == 0
    lines = capsys.readouterr().out.split()
    assert lines[:2] == [str(tmp_path / "out" / "page-0.png"), str(tmp_path / "out" / "page-0.boxes.json")]
    assert len(lines) == 6
