from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slidegen.slidev import (
    BulletList,
    CodeFence,
    Diagnostic,
    EmptyDocument,
    Heading,
    Image,
    IndexOutOfRange,
    LayoutConstraints,
    NotOneSlide,
    Paragraph,
    Raw,
    Slide,
    SlidevDeck,
    UnterminatedCodeFence,
    UnterminatedFrontmatter,
    count_lines,
    parse,
    patch_slide,
    serialize,
    slide_source,
    slide_text,
    validate_static,
    width_hint_px,
)

FIXTURES = Path(__file__).parent / "fixtures" / "decks"
DECKS = sorted(FIXTURES.glob("*.md"))


def test_minimal_deck():
    deck = parse("---\ntheme: default\n---\n# Hello")
    assert deck.headmatter == {"theme": "default"}
    assert len(deck.slides) == 1
    assert deck.slides[0].blocks == (Heading(1, "Hello"),)


def test_three_separators_three_slides():
    src = "---\ntheme: default\n---\n\n# A\n\n---\n\n# B\n\n---\n\n# C\n"
    assert len(parse(src).slides) == 3


def test_deck_without_headmatter():
    deck = parse("# A\n\n---\n\n# B\n")
    assert deck.headmatter == {}
    assert [s.blocks[0].text for s in deck.slides] == ["A", "B"]


def test_unterminated_frontmatter():
    with pytest.raises(UnterminatedFrontmatter):
        parse("---\ntheme: default")


def test_unterminated_code_fence_reports_line():
    with pytest.raises(UnterminatedCodeFence) as info:
        parse("# A\n\n```python\nx = 1\n")
    assert info.value.line == 3


@pytest.mark.parametrize("src", ["", "   \n\n"])
def test_empty_document(src):
    with pytest.raises(EmptyDocument):
        parse(src)


def test_separator_inside_fence_is_not_a_break():
    src = "# A\n\n```yaml\n---\nx: 1\n---\n```\n\n---\n\n# B\n"
    deck = parse(src)
    assert len(deck.slides) == 2
    assert deck.slides[0].blocks[1] == CodeFence("yaml", "---\nx: 1\n---")


def test_per_slide_frontmatter():
    deck = parse("# A\n\n---\nlayout: two-cols\n---\n\n# L\n\n::right::\n\n# R\n")
    assert deck.slides[1].frontmatter == {"layout": "two-cols"}
    assert deck.layout(1) == "two-cols"
    assert Raw("::right::") in deck.slides[1].blocks


def test_block_kinds():
    src = (
        "# T\n\nsome text\nmore text\n\n- a\n- b\n\n![alt](x.png)\n\n"
        '<img src="y.png" style="width: 50%" />\n\n```\ncode\n```\n\n<!-- note -->\n'
    )
    blocks = parse(src).slides[0].blocks
    assert blocks[0] == Heading(1, "T")
    assert blocks[1] == Paragraph("some text\nmore text")
    assert blocks[2] == BulletList(("a", "b"))
    assert blocks[3].src == "x.png" and blocks[3].alt == "alt"
    assert blocks[4].src == "y.png" and blocks[4].width_hint == "50%"
    assert blocks[5] == CodeFence("", "code")
    assert blocks[6] == Raw("<!-- note -->")


def test_headmatter_merges_first_slide_frontmatter():
    deck = SlidevDeck({"theme": "x"}, (Slide({"layout": "cover"}, (Heading(1, "A"),)),))
    assert deck.headmatter == {"theme": "x", "layout": "cover"}
    assert deck.slides[0].frontmatter == {}


def test_deck_needs_a_slide():
    with pytest.raises(ValueError):
        SlidevDeck({}, ())


def test_heading_level_bounds():
    with pytest.raises(ValueError):
        Heading(7, "x")


def test_image_src_nonempty():
    with pytest.raises(ValueError):
        Image("")


@pytest.mark.parametrize("path", DECKS, ids=lambda p: p.name)
def test_fixture_roundtrip(path):
    deck = parse(path.read_text(encoding="utf-8"))
    text = serialize(deck)
    again = parse(text)
    assert again == deck
    assert serialize(again) == text


def test_fixture_corpus_covers_layouts_fences_and_images():
    decks = [parse(p.read_text(encoding="utf-8")) for p in DECKS]
    assert len(decks) >= 20
    layouts = {d.layout(i) for d in decks for i in range(len(d.slides))}
    assert LayoutConstraints().allowed_layouts <= layouts
    fences = [b for d in decks for s in d.slides for b in s.blocks if isinstance(b, CodeFence)]
    assert any("---" in f.text for f in fences)
    assert any(isinstance(b, Image) for d in decks for s in d.slides for b in s.blocks)


def test_fixture_corpus_lints_clean():
    for p in DECKS:
        assert validate_static(parse(p.read_text(encoding="utf-8")), asset_root=FIXTURES) == [], p.name


def test_serialize_is_canonical():
    deck = parse("---\ntheme: default\n---\n# Hello\nworld\n---\n\n# Two")
    assert serialize(deck) == "---\ntheme: default\n---\n\n# Hello\n\nworld\n\n---\n\n# Two\n"


def test_lone_empty_slide_survives():
    deck = SlidevDeck({}, (Slide(),))
    assert parse(serialize(deck)) == deck


# -- property-based roundtrip --------------------------------------------------

_word = st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=8)
_line = st.lists(_word, min_size=1, max_size=6).map(" ".join)
_block = st.one_of(
    st.builds(Heading, st.integers(1, 6), _line),
    st.builds(Paragraph, st.lists(_line, min_size=1, max_size=3).map("\n".join)),
    st.builds(BulletList, st.lists(_line, min_size=1, max_size=4).map(tuple)),
    st.builds(lambda w, pct: Image(f"images/{w}.png", w, f"{pct}%"), _word, st.integers(5, 60)),
    st.builds(lambda w: Image(f"images/{w}.png", w), _word),
    st.builds(CodeFence, st.sampled_from(["", "python", "yaml"]), st.lists(st.sampled_from(["---", "x = 1", "# c", "  y"]), min_size=1, max_size=4).map("\n".join)),
    st.builds(lambda t: Raw(f"<!-- {t} -->"), _line),
)
_layout = st.sampled_from(sorted(LayoutConstraints().allowed_layouts))
_slide = st.builds(
    lambda fm, blocks: Slide({"layout": fm} if fm else {}, tuple(blocks)),
    st.one_of(st.none(), _layout),
    st.lists(_block, min_size=0, max_size=5),
)
_deck = st.builds(
    lambda head, slides: SlidevDeck(head, tuple(slides)),
    st.one_of(st.just({}), st.builds(lambda t: {"theme": "default", "title": t}, _line)),
    st.lists(_slide, min_size=1, max_size=6),
)


@settings(max_examples=200, deadline=None)
@given(_deck)
def test_roundtrip_property(deck):
    text = serialize(deck)
    assert parse(text) == deck
    assert serialize(parse(text)) == text


# -- static validation ---------------------------------------------------------


def _deck_with_lines(n):
    items = "\n".join(f"- item {k}" for k in range(n - 1))
    return parse(f"# Title\n\n{items}\n")


def test_line_limit():
    diags = validate_static(_deck_with_lines(15), LayoutConstraints(max_lines_per_slide=12))
    assert [(d.code, d.slide_index, d.severity) for d in diags] == [("LINE_LIMIT", 0, "error")]
    assert validate_static(_deck_with_lines(12), LayoutConstraints(max_lines_per_slide=12)) == []


def test_missing_asset(tmp_path):
    deck = parse("# A\n\n![x](figs/x.png)\n")
    diags = validate_static(deck, LayoutConstraints(), tmp_path)
    assert [d.code for d in diags] == ["MISSING_ASSET"]
    # Without an asset root existence is not checked.
    assert validate_static(deck, LayoutConstraints(), None) == []


def test_bad_layout():
    deck = parse("# A\n\n---\nlayout: fancy\n---\n\n# B\n")
    diags = validate_static(deck)
    assert [(d.code, d.slide_index) for d in diags] == [("BAD_LAYOUT", 1)]


def test_image_proportion():
    deck = parse('# A\n\n<img src="remote.png" style="width: 95%" />\n')
    diags = validate_static(deck, LayoutConstraints(max_image_area_fraction=0.6))
    assert [d.code for d in diags] == ["IMG_PROPORTION"]
    small = parse('# A\n\n<img src="remote.png" style="width: 40%" />\n')
    assert validate_static(small) == []


def test_unreadable_width_hint_is_a_warning():
    deck = parse('# A\n\n<img src="x.png" style="width: calc(100% - 2rem)" />\n')
    diags = validate_static(deck)
    assert [(d.code, d.severity) for d in diags] == [("IMG_HINT", "warning")]


def test_validate_static_diagnostic_indices_in_range():
    deck = parse("# A\n\n---\nlayout: nope\n---\n\n# B\n\n---\n\n# C\n")
    for d in validate_static(deck):
        assert d.slide_index is None or d.slide_index < len(deck.slides)


def test_layout_constraints_validation():
    with pytest.raises(ValueError):
        LayoutConstraints(max_lines_per_slide=0)
    with pytest.raises(ValueError):
        LayoutConstraints(max_image_area_fraction=1.5)
    with pytest.raises(ValueError):
        LayoutConstraints(allowed_layouts=frozenset())


@pytest.mark.parametrize(
    "hint, px", [("50%", 640.0), ("320px", 320.0), ("320", 320.0), ("20rem", 320.0), ("wide", None)]
)
def test_width_hint_px(hint, px):
    assert width_hint_px(hint) == px


def test_line_model():
    slide = parse(
        "# T\n\n" + "x" * 161 + "\n\n- a\n- b\n\n```\n1\n2\n3\n```\n\n<!-- hidden -->\n\n::right::\n"
    ).slides[0]
    assert count_lines(slide) == 1 + 3 + 2 + 3


def test_slide_text():
    slide = parse("# T\n\nbody\n\n- a\n\n```\ncode\n```\n").slides[0]
    assert slide_text(slide) == "T\nbody\na"


# -- patching ------------------------------------------------------------------


def test_patch_slide_changes_only_target():
    deck = parse((FIXTURES / "15_many_slides.md").read_text(encoding="utf-8"))
    before = [slide_source(deck, i) for i in range(len(deck.slides))]
    patched = patch_slide(deck, 2, "---\nlayout: center\n---\n\n# Three, centred\n")
    after = [slide_source(patched, i) for i in range(len(patched.slides))]
    assert after[2] != before[2]
    assert [a for k, a in enumerate(after) if k != 2] == [b for k, b in enumerate(before) if k != 2]
    assert patched.layout(2) == "center"


def test_patch_first_slide_merges_headmatter():
    deck = parse("---\ntheme: default\n---\n\n# A\n\n---\n\n# B\n")
    patched = patch_slide(deck, 0, "---\nlayout: cover\n---\n\n# A2\n")
    assert patched.headmatter == {"theme": "default", "layout": "cover"}
    assert patched.slides[1] == deck.slides[1]


def test_patch_rejects_multiple_slides():
    deck = parse("# A\n\n---\n\n# B\n")
    with pytest.raises(NotOneSlide):
        patch_slide(deck, 1, "# X\n\n---\n\n# Y\n")


def test_patch_index_out_of_range():
    with pytest.raises(IndexOutOfRange):
        patch_slide(parse("# A\n"), 3, "# B\n")


def test_diagnostic_dict_roundtrip():
    d = Diagnostic("error", "OVERFLOW", "box 1 leaves the page", 2, "page_review", 1)
    assert Diagnostic.from_dict(d.to_dict()) == d
    assert "box_index" not in Diagnostic("warning", "X", "m").to_dict()
