import random
import time
from pathlib import Path

import pytest

from app import main
from src.counting import iter_counts_csv, read_counts_csv, read_counts_header, write_counts_csv
from src.extraction import read_docs_jsonl, write_docs_jsonl
from src.pipeline import LexTrendPipeline, ordered_map
from src.report import parse_series_csv, parse_summary_csv, read_analysis
from src.utils.schemas import ArticleCounts, ArticleDoc

FIXTURES = Path(__file__).parent / "fixtures"
CHARTS = Path(__file__).parent.parent / "configs" / "charts.yaml"
REGISTRY = ["--registry", str(FIXTURES / "registry.csv")]
LEXICON = ["--lexicon", str(FIXTURES / "lexicon.csv")]
CONFIG = ["--config", str(FIXTURES / "analysis.conf")]


def run_stages(corpus_dir: Path, out: Path, threads: int = 1) -> Path:
    """extract -> count -> analyze -> chart; возвращает каталог результатов."""
    out.mkdir(parents=True, exist_ok=True)
    thread_flag = ["--threads", str(threads)]
    assert main(["extract", *REGISTRY, *thread_flag,
                 "--input", str(corpus_dir / "manifest.csv"), "--output", str(out / "docs.jsonl")]) == 0
    assert main(["count", *REGISTRY, *LEXICON, *CONFIG, *thread_flag,
                 "--input", str(out / "docs.jsonl"), "--output", str(out / "counts.csv")]) == 0
    assert main(["analyze", *REGISTRY, *LEXICON, *CONFIG,
                 "--input", str(out / "counts.csv"), "--output", str(out / "analysis")]) == 0
    assert main(["chart", "--charts", str(CHARTS),
                 "--input", str(out / "analysis"), "--output", str(out / "charts")]) == 0
    return out


def test_ordered_map_keeps_input_order():
    items = list(range(5000))
    assert list(ordered_map(lambda x: x * x, items, threads=8)) == [x * x for x in items]
    assert list(ordered_map(str, [], threads=4)) == []


def test_golden_counts(corpus_dir, tmp_path):
    out = run_stages(corpus_dir, tmp_path / "run")
    assert (out / "counts.csv").read_bytes() == (FIXTURES / "golden_counts.csv").read_bytes()
    assert [doc.outlet_id for doc in read_docs_jsonl(out / "docs.jsonl")] == ["daily-planet", "gazette", "el-diario"]


def test_threads_do_not_change_outputs(corpus_dir, tmp_path):
    single = run_stages(corpus_dir, tmp_path / "single", threads=1)
    many = run_stages(corpus_dir, tmp_path / "many", threads=8)
    for name in ("docs.jsonl", "counts.csv", "analysis/series.csv", "analysis/ci.csv", "analysis/summary.csv"):
        assert (single / name).read_bytes() == (many / name).read_bytes(), name
    svgs = sorted(p.name for p in (single / "charts").glob("*.svg"))
    assert svgs
    for name in svgs:
        assert (single / "charts" / name).read_bytes() == (many / "charts" / name).read_bytes(), name


def test_analyze_outputs(corpus_dir, tmp_path):
    out = run_stages(corpus_dir, tmp_path / "run")
    series = {(s.key.scope, s.key.scope_id, s.key.subject, s.key.subject_id): s for s in parse_series_csv(out / "analysis/series.csv")}
    assert series[("outlet", "gazette", "pattern", "social-justice:en:diversity")].points == {2021: pytest.approx(2 / 16)}
    assert series[("country", "ES", "group", "racism")].points == {2020: pytest.approx(3 / 17)}
    # racism + racist в daily-planet, racism в gazette; испанские паттерны у них нулевые
    assert series[("country", "US", "group", "racism")].points == {2019: pytest.approx(3 / 23), 2021: pytest.approx(1 / 16)}
    metrics = {row.metric for row in parse_summary_csv(out / "analysis/summary.csv")}
    assert "peak_growth_year" in metrics


def test_aggregate_then_analyze(tmp_path):
    aggregates = tmp_path / "aggregates.csv"
    assert main(["aggregate", *CONFIG, "--input", str(FIXTURES / "golden_counts.csv"), "--output", str(aggregates)]) == 0
    lines = aggregates.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("outlet_id,year,article_count,total_unigrams,eligible,")
    assert lines[1].startswith("daily-planet,2019,1,23,true,")
    assert main(["analyze", *REGISTRY, *LEXICON, *CONFIG, "--scope", "world", "--construct", "prejudice-all",
                 "--input", str(aggregates), "--output", str(tmp_path / "analysis")]) == 0
    keys = {(s.key.scope, s.key.subject_id) for s in parse_series_csv(tmp_path / "analysis/series.csv")}
    assert {scope for scope, _ in keys} == {"world"}
    assert ("world", "prejudice-all") in keys
    assert ("world", "social-justice") not in keys


def test_verify_reports_tampered_row(tmp_path, capsys):
    counts = tmp_path / "counts.csv"
    text = (FIXTURES / "golden_counts.csv").read_text(encoding="utf-8")
    counts.write_text(text.replace("gazette,2021,fighting for social,16,", "gazette,2021,fighting for social,1,"),
                      encoding="utf-8")
    assert main(["verify", "--input", str(counts)]) == 4
    out = capsys.readouterr().out
    assert out == "row 3: social-justice:en:diversity=2 exceeds 1 possible positions (total_unigrams=1)\n"
    assert main(["verify", "--input", str(FIXTURES / "golden_counts.csv")]) == 0


def test_tampered_counts_fail_aggregate(tmp_path):
    counts = tmp_path / "counts.csv"
    text = (FIXTURES / "golden_counts.csv").read_text(encoding="utf-8")
    counts.write_text(text.replace(",16,", ",1,"), encoding="utf-8")
    assert main(["aggregate", *CONFIG, "--input", str(counts), "--output", str(tmp_path / "agg.csv")]) == 4


@pytest.mark.parametrize("content", ["", None])
def test_analyze_without_eligible_data(tmp_path, content):
    counts = tmp_path / "counts.csv"
    if content is None:
        counts.write_text((FIXTURES / "golden_counts.csv").read_text(encoding="utf-8").splitlines()[0] + "\n",
                          encoding="utf-8")
    else:
        counts.write_text(content, encoding="utf-8")
    code = main(["analyze", *REGISTRY, *LEXICON, *CONFIG, "--input", str(counts), "--output", str(tmp_path / "a")])
    assert code == 5


def test_lenient_extraction_skips_broken_documents(corpus_dir, tmp_path):
    (corpus_dir / "broken.html").write_text("<html><body><p>no headline</p></body></html>", encoding="utf-8")
    with open(corpus_dir / "manifest.csv", "a", encoding="utf-8") as f:
        f.write("daily-planet,https://dailyplanet.example/broken,2019-06-01,broken.html\n")
    docs = tmp_path / "docs.jsonl"
    args = ["extract", *REGISTRY, "--input", str(corpus_dir / "manifest.csv"), "--output", str(docs)]
    assert main(args) == 3
    assert main([*args, "--lenient"]) == 0
    assert len(list(read_docs_jsonl(docs))) == 3


@pytest.mark.parametrize("extra", [
    ["--smooth", "2"],
    ["--construct", "no-such-construct"],
])
def test_analyze_rejects_bad_overrides(tmp_path, extra):
    code = main(["analyze", *REGISTRY, *LEXICON, *CONFIG, *extra,
                 "--input", str(FIXTURES / "golden_counts.csv"), "--output", str(tmp_path / "a")])
    assert code == 2


def test_missing_input_and_config(tmp_path):
    assert main(["verify", "--input", str(tmp_path / "missing.csv")]) == 2
    bad = tmp_path / "analysis.conf"
    bad.write_text("smoothing_window=4\n", encoding="utf-8")
    assert main(["aggregate", "--config", str(bad),
                 "--input", str(FIXTURES / "golden_counts.csv"), "--output", str(tmp_path / "agg.csv")]) == 2


def test_counts_csv_reads_back(corpus_dir, tmp_path):
    out = run_stages(corpus_dir, tmp_path / "run")
    rows = read_counts_csv(out / "counts.csv")
    assert [row.total_unigrams for row in rows] == [23, 16, 17]


def test_threshold_outlet_year_absent_downstream(tmp_path):
    columns = read_counts_header(FIXTURES / "golden_counts.csv")
    rows = [
        ArticleCounts(outlet_id="daily-planet", year=year, headline_prefix="h", total_unigrams=total,
                      term_counts={"prejudice-all:en:racism": hits, "social-justice:en:diversity": hits})
        for year, total, hits in ((2019, 250_000, 5), (2020, 249_999, 50), (2021, 300_000, 9))
    ]
    counts = tmp_path / "counts.csv"
    write_counts_csv(rows, counts, pattern_ids=columns)
    config = tmp_path / "analysis.conf"
    config.write_text("eligibility_threshold=250000\nsmoothing_window=1\n", encoding="utf-8")
    assert main(["analyze", *REGISTRY, *LEXICON, "--config", str(config),
                 "--input", str(counts), "--output", str(tmp_path / "analysis")]) == 0
    analysis = read_analysis(tmp_path / "analysis")
    assert analysis.series
    for s in analysis.series:
        assert 2020 not in s.points, s.key
        assert 2019 in s.points or s.key.subject == "difference"
    assert all(2020 not in band.points for band in analysis.bands)
    # разность 2021 считается от 2019 и помечена как пропуск
    differences = [s for s in analysis.series if s.key.subject == "difference"]
    assert differences
    assert all(s.gap_years == (2021,) for s in differences)


def test_lexicon_pattern_missing_from_counts_is_skipped(tmp_path):
    lexicon = tmp_path / "lexicon.csv"
    shipped = (FIXTURES / "lexicon.csv").read_text(encoding="utf-8").rstrip("\n")
    lexicon.write_text(shipped + "\nprejudice-all,racism,en,bigot\n", encoding="utf-8")
    assert main(["analyze", *REGISTRY, "--lexicon", str(lexicon), *CONFIG,
                 "--input", str(FIXTURES / "golden_counts.csv"), "--output", str(tmp_path / "a")]) == 0
    subjects = {s.key.subject_id for s in parse_series_csv(tmp_path / "a/series.csv")}
    assert "prejudice-all:en:racism" in subjects
    assert "prejudice-all:en:bigot" not in subjects


def test_invalid_utf8_inputs_are_parse_errors(tmp_path):
    docs = tmp_path / "docs.jsonl"
    docs.write_bytes(b'{"outlet_id": "\xff"}\n')
    assert main(["count", *REGISTRY, *LEXICON, *CONFIG, "--input", str(docs), "--output", str(tmp_path / "c.csv")]) == 3
    counts = tmp_path / "counts.csv"
    counts.write_bytes((FIXTURES / "golden_counts.csv").read_bytes() + b"gazette,2021,\xff,16\n")
    assert main(["verify", "--input", str(counts)]) == 3
    stream = tmp_path / "corpus.stream"
    stream.write_bytes(b"gazette\thttps://g.example/\xff\t2021-01-01\t1\nx\n")
    assert main(["extract", *REGISTRY, "--input", str(stream), "--output", str(tmp_path / "d.jsonl")]) == 3


@pytest.mark.slow
def test_count_stage_throughput(tmp_path):
    articles, tokens_per_article = 100_000, 500
    rng = random.Random(1)
    words = ["racism", "racist", "social", "justice", "diversity", "sexism", "the", "news", "of", "day", "and", "a"]

    def documents():
        for i in range(articles):
            yield ArticleDoc(outlet_id="daily-planet", url=f"https://dailyplanet.example/{i}",
                             publication_date=f"{2010 + i % 12}-01-01", headline="Daily headline",
                             body=" ".join(rng.choices(words, k=tokens_per_article - 2)))

    docs = tmp_path / "docs.jsonl"
    write_docs_jsonl(documents(), docs)
    pipeline = LexTrendPipeline(FIXTURES / "registry.csv", FIXTURES / "lexicon.csv", FIXTURES / "analysis.conf")
    started = time.perf_counter()
    result = pipeline.count(docs, tmp_path / "counts.csv")
    elapsed = time.perf_counter() - started

    assert result["rows"] == articles
    assert sum(row.total_unigrams for _line, row in iter_counts_csv(tmp_path / "counts.csv")) == articles * tokens_per_article
    assert elapsed < 60, f"{articles * tokens_per_article / elapsed:,.0f} tokens/s"
