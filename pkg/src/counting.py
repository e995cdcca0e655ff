"""
Counting core: нормализация и токенизация текста, подсчет паттернов по статье,
агрегация в outlet-year и чтение/запись reproducibility-датасета (counts CSV).

Паттерны компилируются один раз в автомат Ахо-Корасик над токенами:
каждый токен словаря лексикона кодируется одним символом, неизвестный токен -
символом UNK, граница заголовок/тело - символом BOUNDARY. Тогда проход автомата
по закодированной строке - это один проход по токенам статьи.
"""

import csv
import re
import unicodedata
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import ahocorasick
from loguru import logger

from src.utils.errors import InvariantViolation, NegativeCount, SchemaMismatch
from src.utils.schemas import AnalysisConfig, ArticleCounts, ArticleDoc, Construct, OutletYearAggregate


COUNTS_FIXED_COLUMNS = ("outlet_id", "year", "headline_prefix", "total_unigrams")
AGGREGATES_FIXED_COLUMNS = ("outlet_id", "year", "article_count", "total_unigrams", "eligible")

_UNK = "\x00"
_BOUNDARY = "\x01"

# U+002D и U+2010..U+2015
_HYPHENS = str.maketrans({ch: " " for ch in "-‐‑‒–—―"})
# Буквенно-цифровые серии; апостроф внутри серии остается в токене
_TOKEN_RE = re.compile(r"[^\W_]+(?:['’][^\W_]+)*")
# Единственные символы, где str.lower расходится с простым (посимвольным) lowercase:
# U+0130 (полное отображение дает i + U+0307) и контекстная финальная сигма
_SIMPLE_LOWER = {"İ": "i", "Σ": "σ"}


################################################################################
#============================ ТЕКСТ =============================================

def normalize(text: str) -> str:
    """
    Нормализует текст перед подсчетом: NFC, простой Unicode lowercase, дефисы/тире -> пробел.
    Диакритика сохраняется ("machísta" остается "machísta"), "İstanbul" -> "istanbul".
    """
    return _simple_lower(unicodedata.normalize("NFC", text)).translate(_HYPHENS)


def _simple_lower(text: str) -> str:
    if not any(ch in text for ch in _SIMPLE_LOWER):
        return text.lower()
    return "".join(_SIMPLE_LOWER.get(ch) or ch.lower() for ch in text)


def tokenize(text: str) -> List[str]:
    """
    Разбивает нормализованный текст на токены.

    Токен - максимальная серия букв и цифр Unicode; апостроф (U+0027, U+2019)
    между буквами остается внутри токена. Остальные символы - разделители.
    """
    return _TOKEN_RE.findall(text)


def pattern_length(pattern_id: str) -> int:
    """Длина паттерна в токенах по имени колонки construct:language:tok1_tok2."""
    return len(_split_pattern_id(pattern_id)[2].split("_"))


def _split_pattern_id(pattern_id: str) -> Tuple[str, str, str]:
    parts = pattern_id.split(":", 2)
    if len(parts) != 3 or not all(parts) or any(not tok for tok in parts[2].split("_")):
        raise ValueError(f"Malformed pattern column {pattern_id!r}")
    return parts[0], parts[1], parts[2]


################################################################################
#============================ АВТОМАТ ===========================================

def _symbol(index: int) -> str:
    # BMP private use area, затем supplementary PUA-A
    if index < 0x1900:
        return chr(0xE000 + index)
    return chr(0xF0000 + index - 0x1900)


class PatternMatcher:
    """
    Token-level multi-pattern automaton.

    Считает для каждого активного паттерна число стартовых позиций совпадения;
    совпадения разных паттернов и одного паттерна в разных позициях могут перекрываться.
    """

    def __init__(self, constructs: Sequence[Construct], language: str):
        """
        Компилирует паттерны одного языка.

        Args:
            constructs: Загруженные конструкты
            language: Язык издания; паттерны других языков неактивны (их счетчик всегда 0)
        """
        self.language = language
        self.pattern_ids: List[str] = sorted({e.pattern_id for c in constructs for e in c.entries})
        self._vocab: Dict[str, str] = {}
        self._automaton = ahocorasick.Automaton()

        keyed: Dict[str, List[str]] = {}
        for construct in constructs:
            for entry in construct.entries:
                if entry.language != language:
                    continue
                key = "".join(self._encode_token(token) for token in entry.tokens)
                keyed.setdefault(key, []).append(entry.pattern_id)

        for key, ids in keyed.items():
            self._automaton.add_word(key, tuple(sorted(set(ids))))
        self.active_count = sum(len(set(ids)) for ids in keyed.values())
        if keyed:
            self._automaton.make_automaton()
        self._compiled = bool(keyed)
        logger.debug(f"[COUNT] Автомат для '{language}': {self.active_count} паттернов, словарь {len(self._vocab)} токенов")

    @classmethod
    def for_language(cls, constructs: Sequence[Construct], language: str) -> "PatternMatcher":
        return cls(constructs, language)

    def _encode_token(self, token: str) -> str:
        symbol = self._vocab.get(token)
        if symbol is None:
            symbol = _symbol(len(self._vocab))
            self._vocab[token] = symbol
        return symbol

    def _encode(self, tokens: Sequence[str]) -> str:
        get = self._vocab.get
        return "".join([get(token, _UNK) for token in tokens])

    def count_segments(self, segments: Sequence[Sequence[str]]) -> Dict[str, int]:
        """
        Считает паттерны по нескольким сегментам токенов; совпадение не пересекает границу сегментов.

        Returns:
            dict: pattern_id -> число вхождений для всех паттернов лексикона (неактивные = 0)
        """
        counts = dict.fromkeys(self.pattern_ids, 0)
        if not self._compiled:
            return counts
        haystack = _BOUNDARY.join(self._encode(segment) for segment in segments)
        for _end, ids in self._automaton.iter(haystack):
            for pattern_id in ids:
                counts[pattern_id] += 1
        return counts

    def count(self, tokens: Sequence[str]) -> Dict[str, int]:
        return self.count_segments([tokens])


def count_patterns(tokens: Sequence[str], constructs: Sequence[Construct], language: str) -> Dict[str, int]:
    """
    Число вхождений каждого паттерна в последовательности токенов.

    Args:
        tokens: Токены (уже нормализованные)
        constructs: Конструкты лексикона
        language: Язык текста; активны только паттерны этого языка

    Returns:
        dict: pattern_id -> count
    """
    return PatternMatcher(constructs, language).count(tokens)


################################################################################
#============================ СТАТЬЯ ============================================

def count_article(
    doc: ArticleDoc,
    constructs: Sequence[Construct],
    language: str,
    prefix_tokens: int = 8,
    matcher: Optional[PatternMatcher] = None,
) -> ArticleCounts:
    """
    Строка reproducibility-датасета для одной статьи.

    Заголовок и тело нормализуются и токенизируются раздельно; заголовок входит
    в total_unigrams и в подсчет, но n-грамма не может начаться в заголовке и
    закончиться в теле.

    Args:
        doc: Извлеченная статья
        constructs: Конструкты лексикона
        language: Язык издания
        prefix_tokens: Сколько токенов заголовка попадет в headline_prefix
        matcher: Уже скомпилированный автомат для language (иначе компилируется здесь)

    Returns:
        ArticleCounts: Счетчики статьи
    """
    if matcher is None:
        matcher = PatternMatcher(constructs, language)
    headline_tokens = tokenize(normalize(doc.headline))
    body_tokens = tokenize(normalize(doc.body))
    return ArticleCounts(
        outlet_id=doc.outlet_id,
        year=doc.year,
        headline_prefix=" ".join(headline_tokens[:prefix_tokens]),
        total_unigrams=len(headline_tokens) + len(body_tokens),
        term_counts=matcher.count_segments([headline_tokens, body_tokens]),
    )


class ArticleCounter:
    """Считает статьи разных изданий, кэшируя автомат на каждый язык."""

    def __init__(self, constructs: Sequence[Construct], outlet_languages: Dict[str, str], prefix_tokens: int = 8):
        self.constructs = list(constructs)
        self.outlet_languages = outlet_languages
        self.prefix_tokens = prefix_tokens
        self._matchers: Dict[str, PatternMatcher] = {
            language: PatternMatcher(self.constructs, language)
            for language in sorted(set(outlet_languages.values()))
        }

    @property
    def pattern_ids(self) -> List[str]:
        return sorted({e.pattern_id for c in self.constructs for e in c.entries})

    def __call__(self, doc: ArticleDoc) -> ArticleCounts:
        try:
            language = self.outlet_languages[doc.outlet_id]
        except KeyError:
            raise SchemaMismatch(f"Outlet {doc.outlet_id!r} of {doc.url} is not in the registry") from None
        return count_article(doc, self.constructs, language, self.prefix_tokens, self._matchers[language])


################################################################################
#============================ АГРЕГАЦИЯ =========================================

class AggregateAccumulator:
    """
    Частичный агрегат по (outlet_id, year).

    Коммутативный моноид: add и merge дают один и тот же результат при любом
    порядке строк и любом разбиении потока на части.
    """

    def __init__(self) -> None:
        self._unigrams: Dict[Tuple[str, int], int] = {}
        self._articles: Dict[Tuple[str, int], int] = {}
        self._terms: Dict[Tuple[str, int], Dict[str, int]] = {}

    def add(self, row: ArticleCounts) -> "AggregateAccumulator":
        if row.total_unigrams < 0:
            raise NegativeCount(f"Negative total_unigrams={row.total_unigrams} for {row.outlet_id}/{row.year}")
        key = (row.outlet_id, row.year)
        terms = self._terms.setdefault(key, {})
        for pattern_id, value in row.term_counts.items():
            if value < 0:
                raise NegativeCount(f"Negative count {pattern_id}={value} for {row.outlet_id}/{row.year}")
            terms[pattern_id] = terms.get(pattern_id, 0) + value
        self._unigrams[key] = self._unigrams.get(key, 0) + row.total_unigrams
        self._articles[key] = self._articles.get(key, 0) + 1
        return self

    def merge(self, other: "AggregateAccumulator") -> "AggregateAccumulator":
        for key, value in other._unigrams.items():
            self._unigrams[key] = self._unigrams.get(key, 0) + value
            self._articles[key] = self._articles.get(key, 0) + other._articles[key]
            terms = self._terms.setdefault(key, {})
            for pattern_id, count in other._terms[key].items():
                terms[pattern_id] = terms.get(pattern_id, 0) + count
        return self

    def finalize(self, config: AnalysisConfig) -> List[OutletYearAggregate]:
        """Агрегаты, отсортированные по (outlet_id, year), с флагом eligible."""
        result = []
        for key in sorted(self._unigrams):
            total = self._unigrams[key]
            eligible = total >= config.eligibility_threshold
            logger.debug(f"[AGGREGATE] {key[0]}/{key[1]}: {total} униграмм, eligible={eligible}")
            result.append(OutletYearAggregate(
                outlet_id=key[0],
                year=key[1],
                total_unigrams=total,
                term_counts={p: self._terms[key][p] for p in sorted(self._terms[key])},
                article_count=self._articles[key],
                eligible=eligible,
            ))
        return result


def aggregate_outlet_year(rows: Iterable[ArticleCounts], config: AnalysisConfig) -> List[OutletYearAggregate]:
    """
    Точные суммы по (outlet_id, year) с флагом eligibility.

    Args:
        rows: Строки ArticleCounts в любом порядке
        config: Параметры анализа (порог eligibility)

    Returns:
        list[OutletYearAggregate]: Отсортировано по (outlet_id, year)

    Raises:
        NegativeCount: Если во входной строке отрицательный счетчик
    """
    accumulator = AggregateAccumulator()
    for row in rows:
        accumulator.add(row)
    return accumulator.finalize(config)


################################################################################
#============================ COUNTS CSV ========================================

def _row_violations(row: ArticleCounts) -> List[str]:
    problems = []
    if row.total_unigrams < 0:
        problems.append(f"total_unigrams={row.total_unigrams} is negative")
    for pattern_id, value in row.term_counts.items():
        limit = max(0, row.total_unigrams - pattern_length(pattern_id) + 1)
        if value < 0:
            problems.append(f"{pattern_id}={value} is negative")
        elif value > limit:
            problems.append(f"{pattern_id}={value} exceeds {limit} possible positions (total_unigrams={row.total_unigrams})")
    return problems


def _check_pattern_columns(columns: Sequence[str], path: Path) -> None:
    for column in columns:
        try:
            _split_pattern_id(column)
        except ValueError as exc:
            raise SchemaMismatch(f"{path}: {exc}") from None
    if list(columns) != sorted(columns) or len(set(columns)) != len(columns):
        raise SchemaMismatch(f"{path}: pattern columns must be unique and sorted")


def _parse_int(value: str, column: str, line: int, path: Path) -> int:
    try:
        return int(value)
    except ValueError:
        raise SchemaMismatch(f"{path}: row {line}: column {column!r} is not an integer: {value!r}") from None


def write_counts_csv(rows: Iterable[ArticleCounts], path: str | Path, pattern_ids: Optional[Sequence[str]] = None) -> int:
    """
    Пишет counts CSV: фиксированные колонки + по колонке на паттерн в лексикографическом порядке.

    Args:
        rows: Строки датасета
        path: Файл назначения
        pattern_ids: Колонки паттернов; если None - объединение ключей всех строк

    Returns:
        int: Число записанных строк
    """
    if pattern_ids is None:
        rows = list(rows)
        pattern_ids = sorted({p for row in rows for p in row.term_counts})
    columns = sorted(pattern_ids)
    written = 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([*COUNTS_FIXED_COLUMNS, *columns])
        for row in rows:
            writer.writerow([
                row.outlet_id, row.year, row.headline_prefix, row.total_unigrams,
                *(row.term_counts.get(p, 0) for p in columns),
            ])
            written += 1
    return written


def iter_counts_csv(path: str | Path, validate: bool = True) -> Iterator[Tuple[int, ArticleCounts]]:
    """
    Потоково читает counts CSV.

    Yields:
        (номер строки файла, ArticleCounts); заголовок - строка 1

    Raises:
        SchemaMismatch: Неверный заголовок, длина строки или нечисловое значение
        InvariantViolation: Если validate и строка нарушает term_counts[p] <= total_unigrams - L + 1
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header[:len(COUNTS_FIXED_COLUMNS)]) != COUNTS_FIXED_COLUMNS:
            raise SchemaMismatch(f"{path}: expected header starting with {','.join(COUNTS_FIXED_COLUMNS)}")
        columns = header[len(COUNTS_FIXED_COLUMNS):]
        _check_pattern_columns(columns, path)
        for line, record in enumerate(reader, start=2):
            if len(record) != len(header):
                raise SchemaMismatch(f"{path}: row {line}: expected {len(header)} fields, got {len(record)}")
            row = ArticleCounts(
                outlet_id=record[0],
                year=_parse_int(record[1], "year", line, path),
                headline_prefix=record[2],
                total_unigrams=_parse_int(record[3], "total_unigrams", line, path),
                term_counts={p: _parse_int(v, p, line, path) for p, v in zip(columns, record[4:])},
            )
            if validate:
                problems = _row_violations(row)
                if problems:
                    raise InvariantViolation("; ".join(problems), row_number=line)
            yield line, row


def read_counts_csv(path: str | Path) -> List[ArticleCounts]:
    """Читает и валидирует весь counts CSV; read(write(rows)) == rows."""
    return [row for _line, row in iter_counts_csv(path)]


def read_counts_header(path: str | Path) -> List[str]:
    """Колонки паттернов counts CSV (без чтения строк)."""
    with open(path, encoding="utf-8", newline="") as f:
        header = next(csv.reader(f), None) or []
    return header[len(COUNTS_FIXED_COLUMNS):]


def validate_counts_rows(path: str | Path) -> List[Tuple[int, str]]:
    """
    Проверяет все строки counts CSV и возвращает все нарушения, а не первое.

    Returns:
        list[tuple[int, str]]: (номер строки, сообщение)
    """
    violations = []
    for line, row in iter_counts_csv(path, validate=False):
        for problem in _row_violations(row):
            violations.append((line, problem))
    return violations


################################################################################
#============================ AGGREGATES CSV ====================================

def write_aggregates_csv(aggregates: Sequence[OutletYearAggregate], path: str | Path,
                         pattern_ids: Optional[Sequence[str]] = None) -> int:
    """Пишет outlet-year агрегаты; колонки паттернов как в counts CSV."""
    if pattern_ids is None:
        pattern_ids = {p for agg in aggregates for p in agg.term_counts}
    columns = sorted(pattern_ids)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([*AGGREGATES_FIXED_COLUMNS, *columns])
        for agg in aggregates:
            writer.writerow([
                agg.outlet_id, agg.year, agg.article_count, agg.total_unigrams,
                "true" if agg.eligible else "false",
                *(agg.term_counts.get(p, 0) for p in columns),
            ])
    return len(aggregates)


def read_aggregates_csv(path: str | Path) -> List[OutletYearAggregate]:
    """
    Читает outlet-year агрегаты.

    Raises:
        SchemaMismatch: Неверный заголовок или значения
    """
    path = Path(path)
    result = []
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header[:len(AGGREGATES_FIXED_COLUMNS)]) != AGGREGATES_FIXED_COLUMNS:
            raise SchemaMismatch(f"{path}: expected header starting with {','.join(AGGREGATES_FIXED_COLUMNS)}")
        columns = header[len(AGGREGATES_FIXED_COLUMNS):]
        _check_pattern_columns(columns, path)
        for line, record in enumerate(reader, start=2):
            if len(record) != len(header):
                raise SchemaMismatch(f"{path}: row {line}: expected {len(header)} fields, got {len(record)}")
            if record[4] not in ("true", "false"):
                raise SchemaMismatch(f"{path}: row {line}: eligible must be true/false, got {record[4]!r}")
            result.append(OutletYearAggregate(
                outlet_id=record[0],
                year=_parse_int(record[1], "year", line, path),
                article_count=_parse_int(record[2], "article_count", line, path),
                total_unigrams=_parse_int(record[3], "total_unigrams", line, path),
                eligible=record[4] == "true",
                term_counts={p: _parse_int(v, p, line, path) for p, v in zip(columns, record[5:])},
            ))
    return result


def read_aggregates_header(path: str | Path) -> List[str]:
    """Колонки паттернов aggregates CSV (без чтения строк)."""
    with open(path, encoding="utf-8", newline="") as f:
        header = next(csv.reader(f), None) or []
    return header[len(AGGREGATES_FIXED_COLUMNS):]


def is_counts_csv(path: str | Path) -> bool:
    """True если файл - counts CSV (а не aggregates CSV)."""
    with open(path, encoding="utf-8", newline="") as f:
        header = next(csv.reader(f), None) or []
    return tuple(header[:len(COUNTS_FIXED_COLUMNS)]) == COUNTS_FIXED_COLUMNS
