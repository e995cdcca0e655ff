from pathlib import Path

import pytest

from src.model import (
    countries_below_minimum,
    load_analysis_config,
    load_lexicon,
    parse_outlet_registry,
    pattern_index,
    serialize_registry,
)
from src.utils.env_utils import read_key_value_text
from src.utils.errors import (
    ConfigError,
    DuplicateOutletId,
    DuplicatePattern,
    EmptyConstruct,
    MalformedPathExpression,
    PatternTooLong,
    UnknownRegion,
)

HEADER = "outlet_id,display_name,country,region,language,headline_path,body_path\n"


# ===== Реестр =====
def test_registry_parses_fixture(registry):
    assert [spec.outlet_id for spec in registry] == ["daily-planet", "gazette", "el-diario"]
    gazette = registry[1]
    assert gazette.country == "US"
    assert gazette.region == "EnglishWest"
    assert gazette.headline_path == "//header/h1[@class='title']"


def test_registry_single_outlet():
    specs = parse_outlet_registry(HEADER + "nyt,New York Times,US,EnglishWest,en,//h1,//article/p\n")
    assert len(specs) == 1
    assert specs[0].display_name == "New York Times"


def test_registry_skips_comments_and_blank_lines():
    text = "# outlets\n\n" + HEADER + "\n# us\nnyt,NYT,US,EnglishWest,en,//h1,//p\n"
    assert [s.outlet_id for s in parse_outlet_registry(text)] == ["nyt"]


def test_registry_duplicate_id():
    text = HEADER + "nyt,NYT,US,EnglishWest,en,//h1,//p\nnyt,Other,US,EnglishWest,en,//h1,//p\n"
    with pytest.raises(DuplicateOutletId, match="line 3"):
        parse_outlet_registry(text)


def test_registry_unknown_region():
    with pytest.raises(UnknownRegion):
        parse_outlet_registry(HEADER + "x,X,US,Antarctica,en,//h1,//p\n")


@pytest.mark.parametrize("path", ["h1", "//h1[", "//div[contains(@class,'a')]", "//p/text()", "//a | //b"])
def test_registry_malformed_path(path):
    with pytest.raises(MalformedPathExpression):
        parse_outlet_registry(HEADER + f'x,X,US,EnglishWest,en,"{path}",//p\n')


@pytest.mark.parametrize("row", [
    "Bad_Id,X,US,EnglishWest,en,//h1,//p",
    "x,,US,EnglishWest,en,//h1,//p",
    "x,X,usa,EnglishWest,en,//h1,//p",
    "x,X,US,EnglishWest,English,//h1,//p",
    "x,X,US,EnglishWest,en,//h1",
])
def test_registry_invalid_rows(row):
    with pytest.raises(ConfigError):
        parse_outlet_registry(HEADER + row + "\n")


def test_registry_wrong_header():
    with pytest.raises(ConfigError, match="header"):
        parse_outlet_registry("id,name\nx,X\n")


def test_registry_roundtrip(registry):
    assert parse_outlet_registry(serialize_registry(registry)) == registry


def test_countries_below_minimum(registry):
    assert countries_below_minimum(registry) == ["ES"]
    assert countries_below_minimum(registry, minimum=1) == []


# ===== Лексикон =====
LEX_HEADER = "construct_id,group_id,language,pattern\n"


def test_lexicon_normalizes_patterns(constructs):
    prejudice = constructs[0]
    assert prejudice.construct_id == "prejudice-all"
    tokens = {entry.tokens for entry in prejudice.entries}
    assert ("anti", "semitism") in tokens
    assert prejudice.languages == ["en", "es"]
    assert prejudice.group_ids == ["antisemitism", "racism", "sexism"]


def test_lexicon_keeps_first_appearance_order(constructs):
    assert [c.construct_id for c in constructs] == ["prejudice-all", "social-justice"]


def test_lexicon_pattern_ids(constructs):
    index = pattern_index(constructs)
    assert "social-justice:en:social_justice" in index
    assert index["prejudice-all:es:machismo"].group_id == "sexism"
    assert len(index) == 9


def test_lexicon_empty_construct():
    text = LEX_HEADER + "prejudice-all,racism,en,racism\nprejudice-all,racism,fr,\n"
    with pytest.raises(EmptyConstruct, match="fr"):
        load_lexicon(text)


def test_lexicon_declared_language_with_patterns_is_fine():
    text = LEX_HEADER + "p,racism,fr,\np,racism,fr,racisme\n"
    assert load_lexicon(text)[0].pattern_ids == ["p:fr:racisme"]


def test_lexicon_duplicate_after_normalization():
    text = LEX_HEADER + "p,antisemitism,en,Anti-Semitism\np,antisemitism,en,anti semitism\n"
    with pytest.raises(DuplicatePattern):
        load_lexicon(text)


def test_lexicon_same_pattern_in_two_languages():
    text = LEX_HEADER + "p,sexism,en,machismo\np,sexism,es,machismo\n"
    assert load_lexicon(text)[0].pattern_ids == ["p:en:machismo", "p:es:machismo"]


def test_lexicon_pattern_too_long():
    with pytest.raises(PatternTooLong):
        load_lexicon(LEX_HEADER + "p,g,en,one two three four five\n")


@pytest.mark.parametrize("row", [
    "prejudice:all,racism,en,racism",
    "prejudice-all,racism,en:us,racism",
])
def test_lexicon_rejects_colon_in_ids(row):
    with pytest.raises(ConfigError, match="line 2"):
        load_lexicon(LEX_HEADER + row + "\n")


def test_shipped_lexicon_loads():
    text = (Path(__file__).parent.parent / "configs" / "lexicon.csv").read_text(encoding="utf-8")
    constructs = load_lexicon(text)
    assert {c.construct_id for c in constructs} == {"prejudice-all", "social-justice"}


# ===== Параметры анализа =====
def test_analysis_config_defaults():
    config = load_analysis_config("")
    assert config.eligibility_threshold == 250_000
    assert config.smoothing_window == 3
    assert (config.base_year, config.end_year) == (2010, 2021)
    assert config.ci_level == 0.95
    assert config.pooling_mode == "pooled"


def test_analysis_config_values():
    config = load_analysis_config("# comment\neligibility_threshold=1000\npooling_mode=unweighted\n")
    assert config.eligibility_threshold == 1000
    assert config.pooling_mode == "unweighted"


@pytest.mark.parametrize("text", [
    "smoothing_window=4",
    "base_year=2021\nend_year=2010",
    "ci_level=1.5",
    "eligibility_threshold=0",
    "unknown_key=1",
    "smoothing_window=",
    "pooling_mode=median",
])
def test_analysis_config_rejects(text):
    with pytest.raises(ConfigError):
        load_analysis_config(text)


def test_analysis_config_does_not_expand_variables(monkeypatch):
    monkeypatch.setenv("LEXTREND_WINDOW", "5")
    assert read_key_value_text("smoothing_window=${LEXTREND_WINDOW}\n") == {"smoothing_window": "${LEXTREND_WINDOW}"}
    with pytest.raises(ConfigError):
        load_analysis_config("smoothing_window=${LEXTREND_WINDOW}\n")
