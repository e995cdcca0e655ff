"""
Разбор и валидация конфигурации: реестр изданий, лексикон конструктов, параметры анализа.
"""

import csv
import io
from collections import Counter
from pathlib import Path
from typing import Dict, Iterator, List, Sequence, Tuple

from loguru import logger
from pydantic import ValidationError

from src.counting import normalize, tokenize
from src.extraction import validate_path_expression
from src.utils.env_utils import read_key_value_text
from src.utils.errors import (
    ConfigError,
    DuplicateOutletId,
    DuplicatePattern,
    EmptyConstruct,
    PatternTooLong,
    UnknownRegion,
)
from src.utils.schemas import (
    MAX_PATTERN_TOKENS,
    REGIONS,
    AnalysisConfig,
    Construct,
    LexiconEntry,
    OutletSpec,
)


REGISTRY_COLUMNS = ("outlet_id", "display_name", "country", "region", "language", "headline_path", "body_path")
LEXICON_COLUMNS = ("construct_id", "group_id", "language", "pattern")


def _csv_records(text: str, columns: Tuple[str, ...], what: str) -> Iterator[Tuple[int, List[str]]]:
    """
    Строки line-oriented CSV с номерами строк; '#'-комментарии и пустые строки пропускаются.
    Первая значимая строка должна быть заголовком.
    """
    header_seen = False
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        record = next(csv.reader([line]))
        if not header_seen:
            if tuple(field.strip() for field in record) != columns:
                raise ConfigError(f"{what} line {line_no}: expected header {','.join(columns)}")
            header_seen = True
            continue
        if len(record) != len(columns):
            raise ConfigError(f"{what} line {line_no}: expected {len(columns)} fields, got {len(record)}")
        yield line_no, [field.strip() for field in record]


################################################################################
#============================ РЕЕСТР ============================================

def parse_outlet_registry(text: str) -> List[OutletSpec]:
    """
    Разбирает реестр изданий.

    Args:
        text: Содержимое CSV (outlet_id,display_name,country,region,language,headline_path,body_path)

    Returns:
        list[OutletSpec]: Издания в порядке файла

    Raises:
        DuplicateOutletId: Повтор outlet_id
        UnknownRegion: Регион вне шести допустимых
        MalformedPathExpression: Путь вне поддерживаемого подмножества
        ConfigError: Прочие ошибки строки
    """
    specs: List[OutletSpec] = []
    seen: Dict[str, int] = {}
    for line_no, record in _csv_records(text, REGISTRY_COLUMNS, "registry"):
        fields = dict(zip(REGISTRY_COLUMNS, record))
        outlet_id = fields["outlet_id"]
        if outlet_id in seen:
            raise DuplicateOutletId(f"registry line {line_no}: outlet_id {outlet_id!r} already defined on line {seen[outlet_id]}")
        if fields["region"] not in REGIONS:
            raise UnknownRegion(f"registry line {line_no}: unknown region {fields['region']!r}; expected one of {', '.join(REGIONS)}")
        for column in ("headline_path", "body_path"):
            validate_path_expression(fields[column], where=f"registry line {line_no}")
        try:
            specs.append(OutletSpec(**fields))
        except ValidationError as exc:
            raise ConfigError(f"registry line {line_no}: {exc.errors()[0]['msg']}") from exc
        seen[outlet_id] = line_no

    for country in countries_below_minimum(specs):
        logger.warning(f"[REGISTRY] ⚠️ Страна {country}: меньше двух изданий (минимум методики - 2)")
    logger.info(f"[REGISTRY] Загружено изданий: {len(specs)}")
    return specs


def serialize_registry(specs: Sequence[OutletSpec]) -> str:
    """Обратная операция к parse_outlet_registry."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(REGISTRY_COLUMNS)
    for spec in specs:
        writer.writerow([getattr(spec, column) for column in REGISTRY_COLUMNS])
    return buffer.getvalue()


def countries_below_minimum(specs: Sequence[OutletSpec], minimum: int = 2) -> List[str]:
    """Страны, у которых меньше minimum изданий (флаг, а не исключение)."""
    per_country = Counter(spec.country for spec in specs)
    return sorted(country for country, count in per_country.items() if count < minimum)


################################################################################
#============================ ЛЕКСИКОН ==========================================

def load_lexicon(text: str) -> List[Construct]:
    """
    Загружает лексикон и нормализует паттерны.

    Пустой (после нормализации) паттерн объявляет пару (construct, language) без
    паттерна; если у пары нет ни одного непустого паттерна - EmptyConstruct.

    Args:
        text: Содержимое CSV (construct_id,group_id,language,pattern)

    Returns:
        list[Construct]: Конструкты в порядке первого появления

    Raises:
        EmptyConstruct: У (construct, language) нет паттернов
        DuplicatePattern: Повтор паттерна в (construct, language) после нормализации
        PatternTooLong: Больше 4 токенов
    """
    entries: Dict[str, List[LexiconEntry]] = {}
    declared: Dict[Tuple[str, str], int] = {}
    seen: Dict[Tuple[str, str, Tuple[str, ...]], int] = {}

    for line_no, record in _csv_records(text, LEXICON_COLUMNS, "lexicon"):
        construct_id, group_id, language, pattern = record
        if not construct_id or not group_id or not language:
            raise ConfigError(f"lexicon line {line_no}: construct_id, group_id and language are required")
        if ":" in construct_id or ":" in language:
            raise ConfigError(f"lexicon line {line_no}: construct_id and language must not contain ':' (pattern_id separator)")
        entries.setdefault(construct_id, [])
        declared.setdefault((construct_id, language), line_no)

        tokens = tuple(tokenize(normalize(pattern)))
        if not tokens:
            continue
        if len(tokens) > MAX_PATTERN_TOKENS:
            raise PatternTooLong(f"lexicon line {line_no}: {pattern!r} has {len(tokens)} tokens (max {MAX_PATTERN_TOKENS})")
        key = (construct_id, language, tokens)
        if key in seen:
            raise DuplicatePattern(
                f"lexicon line {line_no}: {pattern!r} duplicates line {seen[key]} in {construct_id}/{language}")
        seen[key] = line_no
        try:
            entries[construct_id].append(
                LexiconEntry(construct_id=construct_id, group_id=group_id, language=language, tokens=tokens))
        except ValidationError as exc:
            raise ConfigError(f"lexicon line {line_no}: {exc.errors()[0]['msg']}") from exc

    for (construct_id, language), line_no in declared.items():
        if not any(entry.language == language for entry in entries[construct_id]):
            raise EmptyConstruct(f"lexicon line {line_no}: construct {construct_id!r} has no patterns for {language!r}")

    constructs = [Construct(construct_id=cid, entries=tuple(items)) for cid, items in entries.items()]
    logger.info(f"[LEXICON] Загружено конструктов: {len(constructs)}, паттернов: {sum(len(c.entries) for c in constructs)}")
    return constructs


def pattern_index(constructs: Sequence[Construct]) -> Dict[str, LexiconEntry]:
    """pattern_id -> запись лексикона (для разбора колонок counts CSV)."""
    return {entry.pattern_id: entry for construct in constructs for entry in construct.entries}


################################################################################
#============================ ПАРАМЕТРЫ АНАЛИЗА =================================

def load_analysis_config(text: str) -> AnalysisConfig:
    """
    Разбирает key=value файл параметров анализа.

    Raises:
        ConfigError: Неизвестный ключ, пустое значение или нарушение инварианта
    """
    values = read_key_value_text(text)
    unknown = sorted(set(values) - set(AnalysisConfig.model_fields))
    if unknown:
        raise ConfigError(f"analysis config: unknown key(s) {', '.join(unknown)}")
    missing_values = sorted(key for key, value in values.items() if value is None or value == "")
    if missing_values:
        raise ConfigError(f"analysis config: no value for {', '.join(missing_values)}")
    try:
        return AnalysisConfig(**values)
    except ValidationError as exc:
        raise ConfigError(f"analysis config: {exc.errors()[0]['msg']}") from exc


def _read_text(path: str | Path, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read {what} {path}: {exc}") from exc


def read_registry(path: str | Path) -> List[OutletSpec]:
    return parse_outlet_registry(_read_text(path, "registry"))


def read_lexicon(path: str | Path) -> List[Construct]:
    return load_lexicon(_read_text(path, "lexicon"))


def read_analysis_config(path: str | Path | None) -> AnalysisConfig:
    """Параметры из файла; None - значения по умолчанию."""
    if path is None:
        return AnalysisConfig()
    return load_analysis_config(_read_text(path, "analysis config"))
