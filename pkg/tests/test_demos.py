import importlib.util
import json
from pathlib import Path

DEMO = Path(__file__).parent.parent / "demos" / "walkthrough.py"


def test_walkthrough_runs(tmp_path, capsys):
    spec = importlib.util.spec_from_file_location("walkthrough", DEMO)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    mod.walk(tmp_path)
    manifest = json.loads((tmp_path / "run" / "run.json").read_text())
    assert manifest["status"] == "approved"
    assert manifest["ledger"]["by_stage"] == {"code_review": 3, "page_review": 5, "stage1": 3}
    assert json.loads((tmp_path / "run" / "metrics.json").read_text())["figure_proportion"] == 100.0
