"""
Статистика рядов: относительные частоты, объединение изданий по области (scope),
min-max масштабирование, средние конструктов, сглаживание, разности, корреляция,
доверительные интервалы и процентное изменение.

Все функции чистые и детерминированные; арифметика - float64.
"""

import math
from collections import defaultdict
from itertools import combinations
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy import stats

from src.model import pattern_index
from src.utils.errors import (
    EmptyInput,
    EmptySeries,
    IneligibleAggregate,
    InsufficientDataError,
    InsufficientOverlap,
    MissingYear,
    NoEligibleOutlets,
    SchemaMismatch,
    TooFewOutlets,
    TooFewPoints,
    ZeroBaseline,
    ZeroUnigrams,
    ZeroVariance,
)
from src.utils.schemas import (
    SCOPES,
    WORLD_SCOPE_ID,
    AnalysisConfig,
    AnalysisResult,
    CiBand,
    CiPoint,
    Construct,
    FrequencySeries,
    LexiconEntry,
    OutletSpec,
    OutletYearAggregate,
    ScaledSeries,
    SeriesKey,
    SummaryRow,
)


################################################################################
#============================ ЧАСТОТЫ ===========================================

def relative_frequency(agg: OutletYearAggregate, pattern_ids: Sequence[str]) -> float:
    """
    Относительная частота паттерна или группы паттернов в outlet-year.

    Args:
        agg: Агрегат издания за год (должен быть eligible)
        pattern_ids: Один pattern_id или все паттерны группы

    Returns:
        float: (сумма вхождений) / total_unigrams

    Raises:
        IneligibleAggregate: agg.eligible = False
        ZeroUnigrams: total_unigrams = 0
    """
    if not agg.eligible:
        raise IneligibleAggregate(f"{agg.outlet_id}/{agg.year} is below the eligibility threshold")
    if agg.total_unigrams <= 0:
        raise ZeroUnigrams(f"{agg.outlet_id}/{agg.year} has no unigrams")
    return sum(agg.term_counts.get(p, 0) for p in pattern_ids) / agg.total_unigrams


def pool_scope(aggs: Sequence[OutletYearAggregate], pattern_ids: Sequence[str]) -> float:
    """
    Объединенная частота по изданиям области за один год: сумма вхождений / сумма униграмм.
    Равна среднему частот изданий, взвешенному по униграммам.

    Raises:
        NoEligibleOutlets: Нет ни одного eligible агрегата
    """
    eligible = [agg for agg in aggs if agg.eligible]
    if not eligible:
        raise NoEligibleOutlets("no eligible outlet-years in scope")
    unigrams = sum(agg.total_unigrams for agg in eligible)
    if unigrams <= 0:
        raise ZeroUnigrams("eligible outlets in scope have no unigrams")
    hits = sum(agg.term_counts.get(p, 0) for agg in eligible for p in pattern_ids)
    return hits / unigrams


def unweighted_scope(aggs: Sequence[OutletYearAggregate], pattern_ids: Sequence[str]) -> float:
    """Невзвешенное среднее частот eligible изданий области (режим pooling_mode=unweighted)."""
    eligible = [agg for agg in aggs if agg.eligible]
    if not eligible:
        raise NoEligibleOutlets("no eligible outlet-years in scope")
    return float(np.mean([relative_frequency(agg, pattern_ids) for agg in eligible]))


################################################################################
#============================ ПРЕОБРАЗОВАНИЯ РЯДОВ ==============================

def min_max_scale(series: FrequencySeries) -> ScaledSeries:
    """
    Приводит ряд к [0, 1]: (v - min) / (max - min).
    Постоянный ряд переходит во все нули.

    Raises:
        EmptySeries: В ряду нет точек
    """
    if not series.points:
        raise EmptySeries(f"cannot scale empty series {series.key.subject_id}")
    low = min(series.points.values())
    high = max(series.points.values())
    span = high - low
    if span == 0:
        return series.with_points({year: 0.0 for year in series.points})
    return series.with_points({year: (value - low) / span for year, value in series.points.items()})


def construct_average(scaled: Sequence[ScaledSeries], construct_id: Optional[str] = None) -> ScaledSeries:
    """
    Среднее масштабированных рядов терминов конструкта, снова масштабированное в [0, 1].

    За каждый год усредняются только термины, у которых есть значение в этом году.

    Args:
        scaled: По одному масштабированному ряду на термин; все из одной области
        construct_id: subject_id результата (по умолчанию - subject_id первого ряда)

    Raises:
        EmptyInput: Пустой список рядов
    """
    if not scaled:
        raise EmptyInput("construct_average needs at least one series")
    scope = (scaled[0].key.scope, scaled[0].key.scope_id)
    if any((s.key.scope, s.key.scope_id) != scope for s in scaled):
        raise ValueError("construct_average inputs must share a scope")

    per_year: Dict[int, List[float]] = defaultdict(list)
    for series in scaled:
        for year, value in series.points.items():
            per_year[year].append(value)
    average = FrequencySeries(
        key=SeriesKey(
            scope=scope[0],
            scope_id=scope[1],
            subject="construct-average",
            subject_id=construct_id or scaled[0].key.subject_id,
        ),
        points={year: sum(values) / len(values) for year, values in sorted(per_year.items())},
    )
    return min_max_scale(average)


def moving_average(series: FrequencySeries, window: int) -> FrequencySeries:
    """
    Центрированное скользящее среднее по присутствующим годам окна.
    На краях окно усекается; пропущенные годы просто не участвуют.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    half = window // 2
    smoothed = {}
    for year in series.years():
        values = [series.points[y] for y in range(year - half, year + half + 1) if y in series.points]
        smoothed[year] = sum(values) / len(values)
    return series.with_points(smoothed)


def first_difference(series: FrequencySeries) -> FrequencySeries:
    """
    Разность с предыдущим присутствующим годом, ключ - более поздний год.
    Разности через пропуск помечаются в gap_years.

    Raises:
        TooFewPoints: Меньше двух точек
    """
    years = series.years()
    if len(years) < 2:
        raise TooFewPoints(f"first_difference needs >= 2 points, got {len(years)}")
    points = {}
    gaps = []
    for previous, year in zip(years, years[1:]):
        points[year] = series.points[year] - series.points[previous]
        if year - previous > 1:
            gaps.append(year)
    return FrequencySeries(
        key=series.key.model_copy(update={"subject": "difference"}),
        points=points,
        gap_years=tuple(gaps),
    )


def cumulative_sum(series: FrequencySeries) -> FrequencySeries:
    """Накопленная сумма по присутствующим годам (обратная к first_difference на выровненных годах)."""
    running = 0.0
    points = {}
    for year in series.years():
        running += series.points[year]
        points[year] = running
    return FrequencySeries(key=series.key, points=points)


def peak_growth_year(series: FrequencySeries) -> int:
    """
    Год максимального прироста (argmax первой разности); при равенстве - самый ранний.

    Raises:
        TooFewPoints: Меньше двух точек
    """
    diff = first_difference(series)
    best_year, best_value = None, -math.inf
    for year in diff.years():
        if diff.points[year] > best_value:
            best_year, best_value = year, diff.points[year]
    return best_year


################################################################################
#============================ СТАТИСТИКА ========================================

def pearson(a: FrequencySeries, b: FrequencySeries) -> float:
    """
    Выборочный коэффициент Пирсона по общим годам двух рядов.

    Raises:
        InsufficientOverlap: Меньше двух общих лет
        ZeroVariance: Один из рядов постоянен на общих годах
    """
    common = sorted(set(a.points) & set(b.points))
    if len(common) < 2:
        raise InsufficientOverlap(f"need >= 2 common years, got {len(common)}")
    x = np.array([a.points[y] for y in common], dtype=np.float64)
    y = np.array([b.points[y] for y in common], dtype=np.float64)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ZeroVariance("pearson is undefined for a constant series")
    r, _ = stats.pearsonr(x, y)
    return float(np.clip(r, -1.0, 1.0))


def mean_ci(values: Sequence[float], level: float = 0.95) -> Tuple[float, float, float]:
    """
    Среднее и двусторонний доверительный интервал Стьюдента: mean ± t(level, n-1) * s / sqrt(n).

    Args:
        values: Частоты изданий за один год
        level: Уровень доверия

    Returns:
        tuple: (mean, lower, upper)

    Raises:
        TooFewOutlets: n < 2
    """
    if len(values) < 2:
        raise TooFewOutlets(f"confidence interval needs >= 2 outlets, got {len(values)}")
    data = np.asarray(values, dtype=np.float64)
    mean = float(np.mean(data))
    if np.ptp(data) == 0:
        return mean, mean, mean
    half = float(stats.t.ppf((1.0 + level) / 2.0, len(data) - 1) * np.std(data, ddof=1) / math.sqrt(len(data)))
    return mean, mean - half, mean + half


def percent_change(series: FrequencySeries, y0: int, y1: int) -> float:
    """
    Процентное изменение 100 * (v(y1) - v(y0)) / v(y0) по несглаженному ряду.

    Raises:
        MissingYear: Одного из годов нет в ряду
        ZeroBaseline: v(y0) = 0
    """
    for year in (y0, y1):
        if year not in series.points:
            raise MissingYear(f"{series.key.subject_id}: no value for {year}")
    base = series.points[y0]
    if base <= 0:
        raise ZeroBaseline(f"{series.key.subject_id}: zero baseline in {y0}")
    return 100.0 * (series.points[y1] - base) / base


def period_average(series: FrequencySeries, start: int, end: int) -> float:
    """
    Среднее значений ряда за годы [start, end] (разбивка по группам за период).

    Raises:
        MissingYear: В окне нет ни одного года
    """
    values = [value for year, value in series.points.items() if start <= year <= end]
    if not values:
        raise MissingYear(f"{series.key.subject_id}: no values in {start}..{end}")
    return sum(values) / len(values)


################################################################################
#============================ СБОРКА АНАЛИЗА ====================================

def resolve_pattern_columns(
    constructs: Sequence[Construct],
    columns: Optional[Sequence[str]] = None,
) -> Dict[str, LexiconEntry]:
    """
    Сопоставляет паттерны лексикона колонкам входа (counts или aggregates CSV).

    Паттерн лексикона без колонки во входе пропускается с WARNING: его счетчик
    неизвестен, а не равен нулю. Колонки, которых нет в лексиконе, игнорируются.

    Args:
        constructs: Конструкты анализа
        columns: Колонки паттернов входа; None - проверка не нужна (агрегаты собраны в памяти)

    Returns:
        dict: pattern_id -> запись лексикона для паттернов, которые есть во входе

    Raises:
        SchemaMismatch: Во входе нет ни одного паттерна лексикона
    """
    index = pattern_index(constructs)
    if columns is None:
        return index
    available = set(columns)
    missing = sorted(set(index) - available)
    if missing:
        logger.warning(f"[ANALYZE] ⚠️ Во входе нет колонок паттернов лексикона, пропущены: {', '.join(missing)}")
    resolved = {pattern_id: entry for pattern_id, entry in index.items() if pattern_id in available}
    if index and not resolved:
        raise SchemaMismatch("input has none of the lexicon pattern columns")
    return resolved


class _Subject:
    """Паттерн или группа: набор записей лексикона, возможно на нескольких языках."""

    def __init__(self, entries: Iterable[LexiconEntry]):
        entries = list(entries)
        self.languages = frozenset(entry.language for entry in entries)
        # Счетчики паттернов чужого языка у издания всегда 0, поэтому числитель - сумма по всем id
        self.pattern_ids = sorted({entry.pattern_id for entry in entries})


class ScopeAnalyzer:
    """
    Строит все ряды, CI-полосы и сводные метрики по eligible агрегатам.

    Издание участвует в ряду паттерна/группы, только если хотя бы один паттерн
    субъекта на его языке; числитель - только эти паттерны, знаменатель - униграммы
    участвующих изданий.
    """

    def __init__(
        self,
        aggregates: Sequence[OutletYearAggregate],
        registry: Sequence[OutletSpec],
        constructs: Sequence[Construct],
        config: AnalysisConfig,
        columns: Optional[Sequence[str]] = None,
    ):
        self.config = config
        self.constructs = sorted(constructs, key=lambda c: c.construct_id)
        self.outlets = {spec.outlet_id: spec for spec in registry}

        self._by_outlet: Dict[str, Dict[int, OutletYearAggregate]] = defaultdict(dict)
        unknown = set()
        for agg in aggregates:
            if agg.outlet_id not in self.outlets:
                unknown.add(agg.outlet_id)
                continue
            if agg.eligible:
                self._by_outlet[agg.outlet_id][agg.year] = agg
        if unknown:
            logger.warning(f"[ANALYZE] ⚠️ Издания нет в реестре, агрегаты пропущены: {', '.join(sorted(unknown))}")
        if not self._by_outlet:
            raise NoEligibleOutlets("no eligible outlet-years")

        self.index = resolve_pattern_columns(self.constructs, columns)
        self._patterns = {pattern_id: _Subject([entry]) for pattern_id, entry in sorted(self.index.items())}
        group_entries: Dict[str, List[LexiconEntry]] = defaultdict(list)
        for pattern_id, entry in sorted(self.index.items()):
            group_entries[entry.group_id].append(entry)
        self._groups = {group_id: _Subject(entries) for group_id, entries in group_entries.items()}
        self._combine = pool_scope if config.pooling_mode == "pooled" else unweighted_scope
        self._skipped: Dict[str, int] = defaultdict(int)

    # ----- области -----
    def scope_members(self, scope: str) -> Dict[str, List[str]]:
        """scope_id -> eligible издания области (только издания с данными)."""
        members: Dict[str, List[str]] = defaultdict(list)
        for outlet_id in sorted(self._by_outlet):
            spec = self.outlets[outlet_id]
            scope_id = {
                "outlet": outlet_id,
                "country": spec.country,
                "region": spec.region,
                "world": WORLD_SCOPE_ID,
            }[scope]
            members[scope_id].append(outlet_id)
        return dict(sorted(members.items()))

    def _participants(self, outlet_ids: Sequence[str], subject: _Subject) -> Dict[int, List[OutletYearAggregate]]:
        """Год -> агрегаты изданий, язык которых есть у субъекта."""
        per_year: Dict[int, List[OutletYearAggregate]] = defaultdict(list)
        for outlet_id in outlet_ids:
            if self.outlets[outlet_id].language not in subject.languages:
                continue
            for year, agg in self._by_outlet[outlet_id].items():
                per_year[year].append(agg)
        return per_year

    def subject_series(self, key: SeriesKey, outlet_ids: Sequence[str], subject: _Subject) -> FrequencySeries:
        points = {
            year: self._combine(items, subject.pattern_ids)
            for year, items in sorted(self._participants(outlet_ids, subject).items())
        }
        return FrequencySeries(key=key, points=points)

    def subject_band(self, key: SeriesKey, outlet_ids: Sequence[str], subject: _Subject) -> CiBand:
        points = {}
        for year, items in sorted(self._participants(outlet_ids, subject).items()):
            if len(items) < 2:
                continue
            values = [relative_frequency(agg, subject.pattern_ids) for agg in items]
            mean, lower, upper = mean_ci(values, self.config.ci_level)
            points[year] = CiPoint(mean=mean, lower=lower, upper=upper, n=len(items))
        return CiBand(key=key, points=points)

    # ----- метрики -----
    def _metric(self, rows: List[SummaryRow], name: str, key: SeriesKey, subject_id: str, compute) -> None:
        try:
            value = float(compute())
        except InsufficientDataError as exc:
            self._skipped[name] += 1
            logger.debug(f"[ANALYZE] {name} для {key.scope}/{key.scope_id}/{subject_id} пропущен: {exc}")
            return
        rows.append(SummaryRow(scope=key.scope, scope_id=key.scope_id, metric=name, subject_id=subject_id, value=value))

    def run(self, scopes: Sequence[str] = SCOPES) -> AnalysisResult:
        cfg = self.config
        series: List[FrequencySeries] = []
        bands: List[CiBand] = []
        summary: List[SummaryRow] = []

        for scope in [s for s in SCOPES if s in scopes]:
            for scope_id, outlet_ids in self.scope_members(scope).items():
                pattern_series: Dict[str, FrequencySeries] = {}
                for pattern_id, subject in self._patterns.items():
                    key = SeriesKey(scope=scope, scope_id=scope_id, subject="pattern", subject_id=pattern_id)
                    s = self.subject_series(key, outlet_ids, subject)
                    if s.points:
                        pattern_series[pattern_id] = s
                        series.append(s)

                for group_id, subject in sorted(self._groups.items()):
                    key = SeriesKey(scope=scope, scope_id=scope_id, subject="group", subject_id=group_id)
                    s = self.subject_series(key, outlet_ids, subject)
                    if not s.points:
                        continue
                    series.append(s)
                    self._metric(summary, "percent_change", key, group_id,
                                 lambda: percent_change(s, cfg.base_year, cfg.end_year))
                    self._metric(summary, "period_average", key, group_id,
                                 lambda: period_average(s, cfg.period_start, cfg.period_end))
                    if scope != "outlet":
                        band = self.subject_band(key, outlet_ids, subject)
                        if band.points:
                            bands.append(band)

                averages: Dict[str, FrequencySeries] = {}
                for construct in self.constructs:
                    terms = [pattern_series[e.pattern_id] for e in construct.entries if e.pattern_id in pattern_series]
                    if not terms:
                        continue
                    average = construct_average([min_max_scale(t) for t in terms], construct.construct_id)
                    averages[construct.construct_id] = average
                    series.append(average)
                    smoothed = moving_average(average, cfg.smoothing_window)
                    series.append(smoothed.with_points(smoothed.points, subject="construct-average-smoothed"))
                    if len(average.points) >= 2:
                        series.append(first_difference(average))
                    self._metric(summary, "peak_growth_year", average.key, construct.construct_id,
                                 lambda: peak_growth_year(average))

                for a_id, b_id in combinations(sorted(averages), 2):
                    self._metric(summary, "pearson", averages[a_id].key, f"{a_id}~{b_id}",
                                 lambda: pearson(averages[a_id], averages[b_id]))

        for name, count in sorted(self._skipped.items()):
            logger.warning(f"[ANALYZE] ⚠️ {name}: пропущено {count} значений из-за недостатка данных")
        return AnalysisResult(
            series=tuple(sorted(series, key=lambda s: s.key.sort_key())),
            bands=tuple(sorted(bands, key=lambda b: b.key.sort_key())),
            summary=tuple(sorted(summary, key=lambda r: (r.scope, r.scope_id, r.metric, r.subject_id))),
        )


def analyze_aggregates(
    aggregates: Sequence[OutletYearAggregate],
    registry: Sequence[OutletSpec],
    constructs: Sequence[Construct],
    config: AnalysisConfig,
    scopes: Sequence[str] = SCOPES,
    columns: Optional[Sequence[str]] = None,
) -> AnalysisResult:
    """
    Полный анализ: ряды паттернов, групп и средних конструктов, CI-полосы и сводные метрики.

    Args:
        aggregates: Outlet-year агрегаты (ineligible отбрасываются)
        registry: Реестр изданий (страна, регион, язык)
        constructs: Конструкты (можно отфильтровать заранее)
        config: Параметры анализа
        scopes: Какие области считать
        columns: Колонки паттернов входного CSV (см. resolve_pattern_columns)

    Raises:
        NoEligibleOutlets: Нет ни одного eligible outlet-year
        SchemaMismatch: Во входе нет ни одного паттерна лексикона
    """
    result = ScopeAnalyzer(aggregates, registry, constructs, config, columns).run(scopes)
    logger.info(f"[ANALYZE] Рядов: {len(result.series)}, CI-полос: {len(result.bands)}, метрик: {len(result.summary)}")
    return result
