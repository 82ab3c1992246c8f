import io
import json
import sys
import textwrap

import pytest
from PIL import Image

from slidegen.render import (
    ElementBox,
    ExporterFailed,
    ExporterMissing,
    MockRenderer,
    RenderedPage,
    SlidevExporter,
    layout_boxes,
    overflow_check,
    render_deck,
)
from slidegen.slidev import parse
from support import make_png

THREE = "---\ntheme: default\n---\n\n# A\n\n---\n\n# B\n\n- x\n\n---\n\n# C\n"


def page_with(boxes, w=1280, h=720):
    return RenderedPage(0, b"", w, h, tuple(boxes))


def test_mock_three_pages_fixed_geometry():
    pages = render_deck(THREE, "mock")
    assert [p.slide_index for p in pages] == [0, 1, 2]
    for p in pages:
        assert (p.width_px, p.height_px) == (1280, 720)
        with Image.open(io.BytesIO(p.image_bytes)) as im:
            assert im.format == "PNG" and im.size == (1280, 720)


def test_mock_is_deterministic():
    a, b = render_deck(THREE), render_deck(THREE)
    assert [p.image_bytes for p in a] == [p.image_bytes for p in b]
    assert [p.sidecar for p in a] == [p.sidecar for p in b]


def test_image_box_ends_at_760():
    # heading 48..112, paragraph 128..168, image from 184; 768px wide at aspect 0.75 is 576 high.
    deck = parse('# T\n\nshort text\n\n<img src="remote/x.png" style="width: 768px" />\n')
    boxes = layout_boxes(deck, 0)
    image = [b for b in boxes if b.kind == "image"][0]
    assert (image.y, image.h, image.y + image.h) == (184, 576, 760)
    page = MockRenderer().render_slide(deck, 0)
    assert [d.code for d in overflow_check(page)] == ["OVERFLOW"]


def test_image_aspect_from_file(tmp_path):
    make_png(tmp_path / "images" / "tall.png", 300, 600)
    deck = parse('# T\n\n<img src="images/tall.png" style="width: 200px" />\n')
    image = [b for b in layout_boxes(deck, 0, tmp_path) if b.kind == "image"][0]
    assert (image.w, image.h) == (200, 400)


def test_two_cols_split():
    deck = parse("---\nlayout: two-cols\n---\n\n# L\n\n::right::\n\n# R\n")
    xs = sorted(b.x for b in layout_boxes(deck, 0))
    assert xs == [64, 656]


def test_image_right_layout_box():
    deck = parse("---\nlayout: image-right\nimage: remote/x.png\n---\n\n# T\n")
    boxes = layout_boxes(deck, 0)
    assert boxes[0] == ElementBox("image", 640, 0, 640, 720, "remote/x.png")
    assert all(b.x + b.w <= 640 for b in boxes[1:])


def test_cover_is_vertically_centred():
    deck = parse("---\nlayout: cover\n---\n\n# Title\n")
    (box,) = layout_boxes(deck, 0)
    assert box.y == (720 - 64) // 2


def test_overflow_clean():
    boxes = [ElementBox("text", 0, 0, 1280, 360)]  # half the page
    assert overflow_check(page_with(boxes)) == []


def test_overflow_right_edge():
    boxes = [ElementBox("image", 100, 100, 1280 - 100 + 40, 200, "x.png"), ElementBox("text", 0, 0, 10, 10)]
    diags = overflow_check(page_with(boxes))
    assert [(d.code, d.box_index) for d in diags] == [("OVERFLOW", 0)]
    assert "right" in diags[0].message


def test_crowding():
    boxes = [ElementBox("text", 0, 0, 1280, 684)]  # 0.95 of the page
    assert [d.code for d in overflow_check(page_with(boxes))] == ["CROWDING"]


def test_live_pages_skip_overflow():
    assert overflow_check(RenderedPage(0, b"", 1280, 720, None)) == []


def test_box_needs_positive_size():
    with pytest.raises(ValueError):
        ElementBox("text", 0, 0, 0, 10)


def test_sidecar_json():
    page = page_with([ElementBox("image", 1, 2, 3, 4, "a.png")])
    data = json.loads(page.sidecar_json())
    assert data["boxes"] == [{"kind": "image", "x": 1, "y": 2, "w": 3, "h": 4, "ref": "a.png"}]


def test_live_exporter_missing():
    with pytest.raises(ExporterMissing):
        render_deck(THREE, "live", command="definitely-not-a-slidev-binary")


FAKE_EXPORTER = textwrap.dedent('''
    import sys
    from pathlib import Path
    from PIL import Image
    from slidegen.slidev import parse

    args = sys.argv[1:]
    assert args[0] == "export"
    deck = Path(args[1])
    out = Path(args[args.index("--output") + 1])
    assert args[args.index("--format") + 1] == "png"
    if "--fail" in args:
        sys.stderr.write("boom")
        sys.exit(3)
    n = len(parse(deck.read_text()).slides)
    pages = range(1, n + 1)
    if "--range" in args:
        pages = [int(args[args.index("--range") + 1])]
    out.mkdir(parents=True, exist_ok=True)
    for k in pages:
        Image.new("RGB", (1280, 720), (k * 20, 0, 0)).save(out / f"{k:03d}.png")
''')


@pytest.fixture
def fake_exporter(tmp_path):
    script = tmp_path / "fake_slidev.py"
    script.write_text(FAKE_EXPORTER)
    return f"{sys.executable} {script}"


def test_fake_exporter_full_deck(fake_exporter, tmp_path):
    pages = SlidevExporter(fake_exporter, asset_root=tmp_path).render(THREE)
    assert [p.slide_index for p in pages] == [0, 1, 2]
    assert all(p.sidecar is None and p.width_px == 1280 for p in pages)
    assert not list(tmp_path.glob(".slidegen-*.md"))


def test_fake_exporter_single_page(fake_exporter):
    page = SlidevExporter(fake_exporter).render_page(THREE, 2)
    assert page.slide_index == 2
    with Image.open(io.BytesIO(page.image_bytes)) as im:
        assert im.getpixel((0, 0)) == (60, 0, 0)


def test_fake_exporter_failure(fake_exporter):
    with pytest.raises(ExporterFailed) as info:
        SlidevExporter(fake_exporter, extra_args=["--fail"]).render(THREE)
    assert info.value.exit_code == 3 and "boom" in str(info.value)
