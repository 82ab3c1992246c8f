"""End-to-end run with scripted model replies: generate, lint, render, eval.

Builds a two-figure bundle and a transcript in a scratch directory, then
drives the command line exactly as a user would. No network access needed.

    python demos/walkthrough.py [--keep DIR]
"""

from __future__ import annotations

import argparse
import json
import tempfile
from pathlib import Path

from PIL import Image, ImageDraw

from slidegen.cli import main

BODY = """Long documents are expensive for transformers because attention cost grows with the square of the length.
We keep a local window around every token and add a handful of global tokens that see everything.
The first figure shows the resulting attention pattern.

On three long-document benchmarks the sparse model matches dense attention while using a fraction of the memory.
The second figure plots memory against sequence length for both models.
Removing the global tokens costs several points, so both parts of the pattern matter.
"""

SUMMARY = """# Title
Sparse Attention for Long Documents

# Authors
- A. Author

# Affiliations
- Example Lab

# Summary
A sparse attention pattern with a local window and a few global tokens matches dense attention on long inputs at linear memory cost.

# Key Points
- local window plus global tokens
- memory grows linearly with length
- global tokens are needed for quality
"""

CATALOG = """## img-001
Title: Attention pattern
Description: Band-diagonal local window with a few full rows and columns for global tokens.
Location: first paragraph

## img-002
Title: Memory use
Description: Line chart of memory against sequence length; dense grows quadratically, sparse linearly.
Location: second paragraph
"""

DECK = """---
theme: default
layout: cover
---

# Sparse Attention for Long Documents

A. Author, Example Lab

---

# The pattern

- local window around every token
- a few global tokens see everything

<img src="images/img-001.png" alt="attention pattern" style="width: 40%" />

---

# Results

- matches dense attention on long benchmarks
- memory grows linearly

<img src="images/img-002.png" alt="memory use" style="width: 35%" />
"""

FIXED_SLIDE = """---
layout: image-right
image: images/img-001.png
---

# The pattern

- local window around every token
- a few global tokens see everything
"""

REJECT = "VERDICT: REJECT\nISSUE: CONTENT the ablation is missing\nGUIDANCE: add a bullet on removing the global tokens"
APPROVE = "VERDICT: APPROVE"
PAGE_REJECT = "VERDICT: REJECT\nISSUE: OVERFLOW the figure runs off the bottom\nGUIDANCE: move the figure to the right half"


def make_bundle(root: Path) -> Path:
    (root / "figs").mkdir(parents=True, exist_ok=True)
    (root / "body.md").write_text(BODY, encoding="utf-8")
    for name, color in (("pattern.png", (60, 90, 200)), ("memory.png", (200, 90, 60))):
        im = Image.new("RGB", (480, 320), "white")
        ImageDraw.Draw(im).rectangle((40, 40, 440, 280), outline=color, width=6)
        im.save(root / "figs" / name)
    offsets = [BODY.index("The first figure"), BODY.index("The second figure")]
    manifest = {
        "body": "body.md",
        "images": [{"path": "figs/pattern.png", "anchor_offset": offsets[0]},
                   {"path": "figs/memory.png", "anchor_offset": offsets[1]}],
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return root


def make_transcript(path: Path) -> Path:
    with_ablation = DECK.replace("- memory grows linearly\n", "- memory grows linearly\n- global tokens are needed\n")
    recs = [
        {"role": "summarizer", "index": 0, "text": SUMMARY},
        {"role": "captioner", "index": 0, "text": CATALOG},
        # Stage 1 draft, then the regeneration after the code reviewer's rejection.
        {"role": "generator", "index": 0, "text": DECK},
        {"role": "code_reviewer", "index": 0, "text": REJECT},
        {"role": "generator", "index": 1, "text": with_ablation},
        {"role": "code_reviewer", "index": 1, "text": APPROVE},
        # Page loop: slide 1 is flagged once and fixed.
        {"role": "page_reviewer", "index": 0, "text": APPROVE},
        {"role": "page_reviewer", "index": 1, "text": PAGE_REJECT},
        {"role": "page_reviewer", "index": 2, "text": APPROVE},
        {"role": "generator", "index": 2, "text": FIXED_SLIDE},
        {"role": "page_reviewer", "index": 3, "text": APPROVE},
        {"role": "abbreviator", "index": "*", "text": SUMMARY.split("# Summary\n")[1]},
    ]
    path.write_text("\n".join(json.dumps(r) for r in recs) + "\n", encoding="utf-8")
    return path


def walk(work: Path) -> None:
    bundle = make_bundle(work / "bundle")
    transcript = make_transcript(work / "transcript.jsonl")
    run_dir = work / "run"

    print("== generate")
    code = main(["generate", str(bundle), "--transcript", str(transcript), "--run-dir", str(run_dir)])
    manifest = json.loads((run_dir / "run.json").read_text())
    print(f"exit {code}, status {manifest['status']}, calls by stage {manifest['ledger']['by_stage']}")
    for line in (run_dir / "trace.jsonl").read_text().splitlines():
        t = json.loads(line)
        print(f"  {t['loop']:4} it={t['iteration']} target={t['target']} {t['verdict']:7} calls={t['calls_used']}")

    print("== lint the final deck")
    main(["lint", str(run_dir / "deck.final.md")])

    print("== render with the mock backend")
    main(["render", str(run_dir / "deck.final.md"), "--out", str(work / "pages")])

    print("== eval")
    main(["eval", str(run_dir), "--reference", str(bundle), "--transcript", str(transcript)])
    metrics = json.loads((run_dir / "metrics.json").read_text())
    print({k: metrics[k] for k in ("rouge_l", "coverage", "clip", "success_rate", "figure_proportion")})


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--keep", help="work in this directory instead of a temporary one")
    args = ap.parse_args()
    if args.keep:
        Path(args.keep).mkdir(parents=True, exist_ok=True)
        walk(Path(args.keep))
    else:
        with tempfile.TemporaryDirectory() as tmp:
            walk(Path(tmp))
