import pytest

from src.extraction import (
    CorpusRecord,
    decode_entities_and_collapse,
    decode_html_bytes,
    extract_article,
    read_corpus,
    read_docs_jsonl,
    read_manifest,
    read_record_stream,
    validate_path_expression,
    write_docs_jsonl,
    write_record_stream,
)
from src.utils.errors import (
    BodyNotFound,
    HeadlineNotFound,
    MalformedDate,
    MalformedDocument,
    MalformedPathExpression,
    SchemaMismatch,
)
from src.utils.schemas import OutletSpec

URL = "https://news.example/a"
DATE = "2019-05-02"


def spec(headline_path: str = "//h1", body_path: str = "//article/p") -> OutletSpec:
    return OutletSpec(
        outlet_id="news", display_name="News", country="US", region="EnglishWest", language="en",
        headline_path=headline_path, body_path=body_path,
    )


def test_extract_simple_article():
    doc = extract_article("<h1>Title</h1><article><p>A</p><p>B</p></article>", spec(), URL, DATE)
    assert doc.headline == "Title"
    assert doc.body == "A B"
    assert doc.year == 2019
    assert doc.outlet_id == "news"


def test_headline_not_found():
    with pytest.raises(HeadlineNotFound):
        extract_article("<h1>Title</h1><article><p>A</p></article>", spec(headline_path="//h2"), URL, DATE)


def test_body_not_found():
    with pytest.raises(BodyNotFound):
        extract_article("<h1>Title</h1><div><p>A</p></div>", spec(), URL, DATE)


def test_first_headline_node_wins():
    doc = extract_article("<h1>One</h1><h1>Two</h1><article><p>x</p></article>", spec(), URL, DATE)
    assert doc.headline == "One"


def test_entities_decoded_and_whitespace_collapsed():
    html = "<h1>  Fish &amp;\n  Chips </h1><article><p>caf&eacute;&nbsp;&nbsp;&#233;t&#xE9;</p></article>"
    doc = extract_article(html, spec(), URL, DATE)
    assert doc.headline == "Fish & Chips"
    assert doc.body == "café été"


def test_escaped_markup_is_not_text_markup():
    doc = extract_article("<h1>T</h1><article><p>&lt;b&gt;bold&lt;/b&gt; a &lt; b</p></article>", spec(), URL, DATE)
    assert "<b>" not in doc.body
    assert "bold" in doc.body


def test_scripts_and_captions_excluded():
    html = (
        "<html><head><script>var racism = 1;</script></head><body><h1>T</h1>"
        "<article><p>text</p><figure><figcaption>caption</figcaption></figure>"
        "<p>more<script>hidden()</script></p></article></body></html>"
    )
    doc = extract_article(html, spec(), URL, DATE)
    assert doc.body == "text more"


def test_attribute_and_position_predicates():
    html = (
        "<h1 class='kicker'>Kicker</h1><h1 class='title'>Real</h1>"
        "<div class='story'><p>one</p><p>two</p></div><div class='other'><p>three</p></div>"
    )
    doc = extract_article(html, spec("//h1[@class='title']", "//div[@class='story']/p[2]"), URL, DATE)
    assert doc.headline == "Real"
    assert doc.body == "two"


def test_tag_soup_is_tolerated():
    doc = extract_article("<h1>Title<article><p>unclosed <b>bold<p>second", spec(), URL, DATE)
    assert doc.headline.startswith("Title")
    assert "second" in doc.body


def test_empty_document_is_malformed():
    with pytest.raises(MalformedDocument):
        extract_article("", spec(), URL, DATE)


def test_bad_date_is_malformed():
    with pytest.raises(MalformedDate):
        extract_article("<h1>T</h1><article><p>x</p></article>", spec(), URL, "May 2nd")


@pytest.mark.parametrize("text, expected", [
    ("a&amp;b", "a&b"),
    ("caf&eacute; &#233;t&#xE9;", "café été"),
    ("a &bogus; b", "a &bogus; b"),
    ("&notanentity; x", "&notanentity; x"),
    ("&amp x &lt", "&amp x &lt"),
    ("  a \n\t b  ", "a b"),
])
def test_decode_entities_and_collapse(text, expected):
    assert decode_entities_and_collapse(text) == expected


def test_escaped_entity_is_decoded_once():
    doc = extract_article("<h1>T</h1><article><p>&amp;lt;b&amp;gt; x</p></article>", spec(), URL, DATE)
    assert doc.body == "&lt;b&gt; x"


@pytest.mark.parametrize("path", ["//h1", "/html/body//p", "//*[@id='x']/p[1]", "//div[@class=\"a b\"]//p"])
def test_valid_path_expressions(path):
    assert validate_path_expression(path) == path


@pytest.mark.parametrize("path", ["", "p", "//p[last()]", "//p/@href", "//p[0]", "../p"])
def test_invalid_path_expressions(path):
    with pytest.raises(MalformedPathExpression):
        validate_path_expression(path)


# ===== Корпус =====
def test_manifest_reads_html_relative_to_manifest(corpus_dir):
    records = list(read_manifest(corpus_dir / "manifest.csv"))
    assert [r.outlet_id for r in records] == ["daily-planet", "gazette", "el-diario"]
    assert "<h1>Racism row over anti-Semitism remarks</h1>" in records[0].html


def test_manifest_fixture_extracts(corpus_dir, registry):
    specs = {s.outlet_id: s for s in registry}
    docs = [extract_article(r.html, specs[r.outlet_id], r.url, r.date) for r in read_manifest(corpus_dir / "manifest.csv")]
    assert docs[0].body == (
        "The racist remarks sparked a debate on racism & sexism. "
        "Campaigners called for social justice and more diversity."
    )
    assert docs[1].headline == "Fighting for Social"
    assert "sidebar" not in docs[1].body and docs[1].body.count("racism") == 1
    assert docs[2].body == "El MACHISMO persiste. La diversidad l’avenir crece. Racismo: racismo estructural."


def test_record_stream_roundtrip(tmp_path):
    records = [
        CorpusRecord("a", "https://a.example/1", "2020-01-01", "<h1>é</h1>\n<p>x</p>"),
        CorpusRecord("b", "https://b.example/2", "2021-06-30", ""),
    ]
    path = tmp_path / "corpus.stream"
    assert write_record_stream(records, path) == 2
    assert list(read_record_stream(path)) == records
    assert list(read_corpus(path)) == records


def test_record_stream_truncated(tmp_path):
    path = tmp_path / "corpus.stream"
    path.write_bytes(b"a\thttps://a.example/1\t2020-01-01\t100\n<h1>short</h1>")
    with pytest.raises(MalformedDocument, match="truncated"):
        list(read_record_stream(path))


def test_record_stream_bad_header(tmp_path):
    path = tmp_path / "corpus.stream"
    path.write_bytes(b"not a header\n")
    with pytest.raises(MalformedDocument):
        list(read_record_stream(path))


def test_docs_jsonl_roundtrip(tmp_path):
    docs = [extract_article("<h1>T</h1><article><p>x ’ y</p></article>", spec(), URL, DATE)]
    path = tmp_path / "docs.jsonl"
    assert write_docs_jsonl(docs, path) == 1
    assert list(read_docs_jsonl(path)) == docs


# ===== Кодировки =====
@pytest.mark.parametrize("data, expected", [
    ("<p>machísta</p>".encode("utf-8"), "<p>machísta</p>"),
    (b"\xef\xbb\xbf<p>\xc3\xa9</p>", "<p>é</p>"),
    (b'<meta charset="iso-8859-1"><p>mach\xedsta \x93x\x94</p>', '<meta charset="iso-8859-1"><p>machísta “x”</p>'),
    (b"<meta http-equiv='Content-Type' content='text/html; charset=windows-1252'><p>\xe9</p>",
     "<meta http-equiv='Content-Type' content='text/html; charset=windows-1252'><p>é</p>"),
    (b'<meta charset="no-such-codec"><p>\xc3\xa9</p>', '<meta charset="no-such-codec"><p>é</p>'),
    (b"<p>\xff</p>", "<p>\ufffd</p>"),
])
def test_decode_html_bytes(data, expected):
    assert decode_html_bytes(data) == expected


def test_manifest_honours_declared_charset(tmp_path):
    page = '<html><head><meta charset="iso-8859-1"></head><body><h1>T</h1><article><p>El machísta</p></article></body></html>'
    (tmp_path / "latin.html").write_bytes(page.encode("latin-1"))
    (tmp_path / "manifest.csv").write_text(
        "outlet_id,url,date,html_path\nnews,https://news.example/l,2020-01-01,latin.html\n", encoding="utf-8")
    [record] = read_manifest(tmp_path / "manifest.csv")
    doc = extract_article(record.html, spec(), record.url, record.date)
    assert doc.body == "El machísta"


def test_manifest_not_utf8(tmp_path):
    path = tmp_path / "manifest.csv"
    path.write_bytes(b"outlet_id,url,date,html_path\nnews,https://news.example/\xff,2020-01-01,a.html\n")
    with pytest.raises(SchemaMismatch, match="UTF-8"):
        list(read_manifest(path))


def test_record_stream_header_not_utf8(tmp_path):
    path = tmp_path / "corpus.stream"
    path.write_bytes(b"a\thttps://a.example/\xff\t2020-01-01\t2\n<p\n")
    with pytest.raises(MalformedDocument, match="UTF-8"):
        list(read_record_stream(path))


def test_docs_jsonl_not_utf8(tmp_path):
    docs = [extract_article("<h1>T</h1><article><p>x</p></article>", spec(), URL, DATE)]
    path = tmp_path / "docs.jsonl"
    write_docs_jsonl(docs, path)
    path.write_bytes(path.read_bytes() + b'{"outlet_id": "\xff"}\n')
    with pytest.raises(SchemaMismatch, match="line 2"):
        list(read_docs_jsonl(path))
