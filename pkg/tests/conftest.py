import shutil
from pathlib import Path
from typing import Dict, Optional

import pytest

from src.model import load_lexicon, parse_outlet_registry
from src.utils.schemas import LexiconEntry, OutletYearAggregate

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def registry_text() -> str:
    return (FIXTURES / "registry.csv").read_text(encoding="utf-8")


@pytest.fixture
def registry(registry_text):
    return parse_outlet_registry(registry_text)


@pytest.fixture
def constructs():
    return load_lexicon((FIXTURES / "lexicon.csv").read_text(encoding="utf-8"))


@pytest.fixture
def corpus_dir(tmp_path) -> Path:
    """Копия фикстурного корпуса (манифест + HTML) во временном каталоге."""
    target = tmp_path / "corpus"
    shutil.copytree(FIXTURES / "corpus", target)
    return target


def entry(construct_id: str, group_id: str, language: str, *tokens: str) -> LexiconEntry:
    return LexiconEntry(construct_id=construct_id, group_id=group_id, language=language, tokens=tokens)


def make_agg(
    outlet_id: str,
    year: int,
    total_unigrams: int,
    term_counts: Optional[Dict[str, int]] = None,
    eligible: bool = True,
    article_count: int = 1,
) -> OutletYearAggregate:
    return OutletYearAggregate(
        outlet_id=outlet_id,
        year=year,
        total_unigrams=total_unigrams,
        term_counts=term_counts or {},
        article_count=article_count,
        eligible=eligible,
    )
