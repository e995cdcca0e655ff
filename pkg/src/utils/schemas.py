"""
Доменные модели LexTrend.

Glossary:
    unigram - один токен; единица объема текста (знаменатель относительной частоты)
    pattern - упорядоченная последовательность из 1..4 нормализованных токенов
    construct - именованный набор паттернов одной темы (prejudice-all, social-justice)
    group - подконструкт одного типа предубеждения (racism, sexism, ...) для разбивок
    outlet-year - пара (издание, год); участвует в статистике только если eligible
    pooling - объединение изданий в страну/регион/мир суммированием счетчиков и униграмм

Pydantic notes:
    Все модели frozen: после разбора реестры, лексиконы и ряды неизменяемы
    и их можно безопасно разделять между потоками.
"""

import math
import re
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.utils.time_utils import parse_publication_year


REGIONS: Tuple[str, ...] = (
    "EnglishWest",
    "ContinentalEurope",
    "GulfRegion",
    "SubSaharanAfrica",
    "Asia",
    "LatinAmerica",
)
Region = Literal["EnglishWest", "ContinentalEurope", "GulfRegion", "SubSaharanAfrica", "Asia", "LatinAmerica"]

Scope = Literal["outlet", "country", "region", "world"]
SCOPES: Tuple[str, ...] = ("outlet", "country", "region", "world")

Subject = Literal["pattern", "group", "construct-average", "construct-average-smoothed", "difference"]
SCALED_SUBJECTS = frozenset({"construct-average", "construct-average-smoothed"})

MAX_PATTERN_TOKENS = 4
WORLD_SCOPE_ID = "world"

_SLUG_RE = re.compile(r"^[a-z0-9][a-z0-9-]*$")
_COUNTRY_RE = re.compile(r"^[A-Z]{2}$")
_LANGUAGE_RE = re.compile(r"^[a-z]{2,3}(-[A-Za-z0-9]{2,8})*$")


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True)


# ===== Реестр изданий =====
class OutletSpec(_Frozen):
    """Запись реестра: издание, его страна/регион/язык и пути извлечения текста."""

    outlet_id: str = Field(..., description="Уникальный slug издания, например 'nyt'")
    display_name: str = Field(..., description="Отображаемое имя, например 'New York Times'")
    country: str = Field(..., description="ISO 3166-1 alpha-2, например 'US'")
    region: Region = Field(..., description="Один из шести мировых регионов")
    language: str = Field(..., description="BCP-47 тег языка контента, например 'en', 'es'")
    headline_path: str = Field(..., description="Путь к заголовку, например '//h1'")
    body_path: str = Field(..., description="Путь к абзацам тела статьи, например '//article/p'")

    @field_validator("outlet_id")
    @classmethod
    def _check_outlet_id(cls, value: str) -> str:
        if not _SLUG_RE.match(value):
            raise ValueError(f"outlet_id must be a non-empty lowercase slug, got {value!r}")
        return value

    @field_validator("display_name")
    @classmethod
    def _check_display_name(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("display_name must not be empty")
        return value

    @field_validator("country")
    @classmethod
    def _check_country(cls, value: str) -> str:
        if not _COUNTRY_RE.match(value):
            raise ValueError(f"country must be an ISO 3166-1 alpha-2 code, got {value!r}")
        return value

    @field_validator("language")
    @classmethod
    def _check_language(cls, value: str) -> str:
        if not _LANGUAGE_RE.match(value):
            raise ValueError(f"language must be a BCP-47 tag, got {value!r}")
        return value


# ===== Лексикон =====
class LexiconEntry(_Frozen):
    """Один паттерн конструкта на одном языке."""

    construct_id: str = Field(..., description="Конструкт, например 'prejudice-all'")
    group_id: str = Field(..., description="Группа предубеждения, например 'racism' или 'social-justice'")
    language: str = Field(..., description="BCP-47 тег языка паттерна")
    tokens: Tuple[str, ...] = Field(..., description="Нормализованные токены паттерна, 1..4 штуки")

    @field_validator("tokens")
    @classmethod
    def _check_tokens(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        if not 1 <= len(value) <= MAX_PATTERN_TOKENS:
            raise ValueError(f"pattern must have 1..{MAX_PATTERN_TOKENS} tokens, got {len(value)}")
        for token in value:
            if not token or token != token.lower() or any(ch.isspace() for ch in token):
                raise ValueError(f"pattern token is not normalized: {token!r}")
        return value

    @property
    def pattern_id(self) -> str:
        """Имя колонки counts CSV: construct_id:language:tok1_tok2"""
        return f"{self.construct_id}:{self.language}:{'_'.join(self.tokens)}"


class Construct(_Frozen):
    """Набор паттернов одной темы, сгруппированный по языкам и группам."""

    construct_id: str = Field(..., description="Идентификатор конструкта")
    entries: Tuple[LexiconEntry, ...] = Field(..., description="Паттерны конструкта в порядке файла")

    @property
    def languages(self) -> List[str]:
        return sorted({entry.language for entry in self.entries})

    @property
    def group_ids(self) -> List[str]:
        return sorted({entry.group_id for entry in self.entries})

    @property
    def pattern_ids(self) -> List[str]:
        return sorted(entry.pattern_id for entry in self.entries)


# ===== Параметры анализа =====
class AnalysisConfig(_Frozen):
    """Параметры статистики; по умолчанию - значения из методики (250k униграмм, окно 3 года, 2010-2021, 95%)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    eligibility_threshold: int = Field(default=250_000, description="Минимум униграмм на outlet-year")
    smoothing_window: int = Field(default=3, description="Окно скользящего среднего (лет), нечетное")
    base_year: int = Field(default=2010, description="Начальный год процентного изменения")
    end_year: int = Field(default=2021, description="Конечный год процентного изменения")
    ci_level: float = Field(default=0.95, description="Уровень доверительного интервала")
    pooling_mode: Literal["pooled", "unweighted"] = Field(
        default="pooled", description="pooled - суммы счетчиков; unweighted - среднее частот изданий")
    period_start: int = Field(default=2015, description="Начало окна периодического среднего по группам")
    period_end: int = Field(default=2021, description="Конец окна периодического среднего по группам")
    headline_prefix_tokens: int = Field(default=8, description="Длина префикса заголовка в counts CSV")

    @model_validator(mode="after")
    def _check_ranges(self) -> "AnalysisConfig":
        if self.eligibility_threshold <= 0:
            raise ValueError("eligibility_threshold must be > 0")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ValueError("smoothing_window must be odd and >= 1")
        if self.base_year >= self.end_year:
            raise ValueError("base_year must be < end_year")
        if not 0.0 < self.ci_level < 1.0:
            raise ValueError("ci_level must be in (0, 1)")
        if self.period_start > self.period_end:
            raise ValueError("period_start must be <= period_end")
        if self.headline_prefix_tokens < 1:
            raise ValueError("headline_prefix_tokens must be >= 1")
        return self


# ===== Статьи и счетчики =====
class ArticleDoc(_Frozen):
    """Извлеченная статья: только заголовок и тело, без разметки."""

    outlet_id: str = Field(..., description="Slug издания")
    url: str = Field(..., description="URL статьи")
    publication_date: str = Field(..., description="ISO-8601 дата из манифеста корпуса")
    headline: str = Field(..., description="Текст заголовка")
    body: str = Field(..., description="Текст тела статьи")

    @field_validator("publication_date")
    @classmethod
    def _check_date(cls, value: str) -> str:
        parse_publication_year(value)
        return value

    @property
    def year(self) -> int:
        return parse_publication_year(self.publication_date)


class ArticleCounts(_Frozen):
    """
    Строка reproducibility-датасета.
    Инварианты (term_counts[p] <= total_unigrams - L + 1, неотрицательность)
    проверяются при чтении CSV и при агрегации, чтобы битые строки можно было
    представить и диагностировать.
    """

    outlet_id: str = Field(..., description="Slug издания")
    year: int = Field(..., description="Календарный год публикации")
    headline_prefix: str = Field(..., description="Первые N токенов заголовка через пробел")
    total_unigrams: int = Field(..., description="Токены заголовка + токены тела")
    term_counts: Dict[str, int] = Field(default_factory=dict, description="pattern_id -> число вхождений")


class OutletYearAggregate(_Frozen):
    """Сумма ArticleCounts по (outlet_id, year)."""

    outlet_id: str = Field(..., description="Slug издания")
    year: int = Field(..., description="Год")
    total_unigrams: int = Field(..., description="Сумма униграмм по статьям")
    term_counts: Dict[str, int] = Field(default_factory=dict, description="Суммы по паттернам")
    article_count: int = Field(..., description="Число статей")
    eligible: bool = Field(..., description="total_unigrams >= eligibility_threshold")


# ===== Ряды =====
class SeriesKey(_Frozen):
    scope: Scope = Field(..., description="outlet | country | region | world")
    scope_id: str = Field(..., description="outlet_id, ISO-код страны, регион или 'world'")
    subject: Subject = Field(..., description="Тип ряда")
    subject_id: str = Field(..., description="pattern_id, group_id или construct_id")

    def sort_key(self) -> Tuple[str, str, str, str]:
        return (self.scope, self.scope_id, self.subject, self.subject_id)


class FrequencySeries(_Frozen):
    """Разреженный ряд год -> значение."""

    key: SeriesKey
    points: Dict[int, float] = Field(default_factory=dict, description="Год -> значение")
    gap_years: Tuple[int, ...] = Field(
        default=(), description="Для difference: годы, разность которых перекрывает пропуск")

    @model_validator(mode="after")
    def _check_values(self) -> "FrequencySeries":
        for year, value in self.points.items():
            if not math.isfinite(value):
                raise ValueError(f"non-finite value {value} in {year}")
            if self.key.subject != "difference" and value < 0:
                raise ValueError(f"negative value {value} in {year} for {self.key.subject}")
            if self.key.subject in SCALED_SUBJECTS and value > 1.0:
                raise ValueError(f"scaled value {value} in {year} is above 1")
        if self.gap_years and self.key.subject != "difference":
            raise ValueError(f"gap years are only defined for difference series, got {self.key.subject}")
        missing = sorted(set(self.gap_years) - set(self.points))
        if missing:
            raise ValueError(f"gap years {missing} have no points")
        return self

    def years(self) -> List[int]:
        return sorted(self.points)

    def with_points(self, points: Dict[int, float], **key_update) -> "FrequencySeries":
        """Новый ряд с теми же (или обновленными) полями ключа."""
        key = self.key.model_copy(update=key_update) if key_update else self.key
        return FrequencySeries(key=key, points=points)


ScaledSeries = FrequencySeries


class CiPoint(_Frozen):
    mean: float
    lower: float
    upper: float
    n: int = Field(..., description="Число изданий, давших значение за год")

    @model_validator(mode="after")
    def _check_order(self) -> "CiPoint":
        if not self.lower <= self.mean <= self.upper:
            raise ValueError(f"expected lower <= mean <= upper, got {self.lower}, {self.mean}, {self.upper}")
        if self.n < 2:
            raise ValueError("confidence band needs n >= 2")
        return self


class CiBand(_Frozen):
    key: SeriesKey
    points: Dict[int, CiPoint] = Field(default_factory=dict)


class SummaryRow(_Frozen):
    """Скаляр для аннотаций графиков: percent_change, peak_growth_year, pearson, period_average."""

    scope: Scope
    scope_id: str
    metric: Literal["percent_change", "peak_growth_year", "pearson", "period_average"]
    subject_id: str
    value: float


class AnalysisResult(_Frozen):
    series: Tuple[FrequencySeries, ...] = ()
    bands: Tuple[CiBand, ...] = ()
    summary: Tuple[SummaryRow, ...] = ()


# ===== Графики =====
class ChartPanel(_Frozen):
    scope_id: str = Field(..., description="Подпись панели (страна, регион, 'world' или subject_id)")
    series: Tuple[SeriesKey, ...] = Field(default=(), description="Линии панели")
    band: Optional[SeriesKey] = Field(default=None, description="Ключ CI-полосы (линия среднего рисуется поверх)")
    annotation: Optional[str] = Field(default=None, description="Текст в левом верхнем углу, например 'r = 0.93'")


class ChartSpec(_Frozen):
    name: str = Field(..., description="Имя файла без расширения")
    title: str
    panels: Tuple[ChartPanel, ...]
    x_range: Tuple[int, int] = Field(..., description="Годы оси X (включительно)")
    y_label: str = ""
    columns: int = Field(default=4, description="Панелей в строке сетки")

    @model_validator(mode="after")
    def _check_panels(self) -> "ChartSpec":
        if not self.panels:
            raise ValueError("chart needs at least one panel")
        if self.x_range[0] >= self.x_range[1]:
            raise ValueError("x_range must be increasing")
        if self.columns < 1:
            raise ValueError("columns must be >= 1")
        return self


class SeriesRef(_Frozen):
    """Ссылка на ряд внутри панели: область задается панелью."""

    subject: Subject
    subject_id: str


class ChartDefinition(_Frozen):
    """Одна запись configs/charts.yaml."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = Field(..., description="Имя SVG файла без расширения")
    title: str = Field(..., description="Заголовок графика")
    scope: Scope = Field(..., description="Область рядов графика")
    panel_by: Literal["scope_id", "subject_id"] = Field(
        default="scope_id", description="scope_id - панель на страну/регион; subject_id - панель на субъект")
    series: Tuple[SeriesRef, ...] = Field(default=(), description="Ряды каждой панели (panel_by=scope_id)")
    scope_id: Optional[str] = Field(default=None, description="Фиксированная область (panel_by=subject_id)")
    subject: Subject = Field(default="group", description="Тип рядов (panel_by=subject_id)")
    subject_ids: Tuple[str, ...] = Field(default=(), description="Субъекты-панели; пусто - все найденные")
    band: bool = Field(default=False, description="Рисовать CI-полосу")
    annotation: Literal["pearson", "percent_change", "none"] = Field(default="none")
    years: Optional[Tuple[int, int]] = Field(default=None, description="Ось X; по умолчанию - годы данных")
    y_label: str = ""
    columns: int = Field(default=4, description="Панелей в строке")

    @model_validator(mode="after")
    def _check_layout(self) -> "ChartDefinition":
        if self.panel_by == "scope_id" and not self.series:
            raise ValueError(f"chart {self.name!r}: panel_by=scope_id needs a series list")
        if self.panel_by == "subject_id" and not self.scope_id:
            raise ValueError(f"chart {self.name!r}: panel_by=subject_id needs scope_id")
        if self.annotation == "pearson" and (self.panel_by != "scope_id" or len(self.series) != 2):
            raise ValueError(f"chart {self.name!r}: pearson annotation needs panel_by=scope_id with exactly two series")
        return self
