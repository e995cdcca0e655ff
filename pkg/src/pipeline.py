"""
Стадии LexTrend: extract -> count -> aggregate -> analyze -> chart (+ verify).

Стадии общаются только файлами, поэтому корпус можно посчитать один раз и
анализировать повторно. extract и count параллелятся по статьям в пуле потоков
с сохранением порядка входа; остальные стадии однопоточные.
"""

from concurrent.futures import ThreadPoolExecutor
from functools import cached_property
from itertools import islice
from pathlib import Path
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple, TypeVar

from loguru import logger
from pydantic import ValidationError

from src.analytics import analyze_aggregates
from src.counting import (
    AggregateAccumulator,
    ArticleCounter,
    is_counts_csv,
    iter_counts_csv,
    read_aggregates_csv,
    read_aggregates_header,
    read_counts_header,
    validate_counts_rows,
    write_aggregates_csv,
    write_counts_csv,
)
from src.extraction import CorpusRecord, extract_article, read_corpus, read_docs_jsonl, write_docs_jsonl
from src.model import read_analysis_config, read_lexicon, read_registry
from src.report import build_chart_specs, load_chart_definitions, read_analysis, write_analysis, write_charts
from src.utils.errors import ConfigError, ParseError, SchemaMismatch
from src.utils.schemas import SCOPES, AnalysisConfig, ArticleDoc, Construct, OutletSpec, OutletYearAggregate

T = TypeVar("T")
R = TypeVar("R")

_BATCH_PER_THREAD = 256


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> Iterator[R]:
    """
    map() по пулу потоков пачками; порядок результатов = порядок входа.

    Args:
        fn: Чистая функция от одного элемента
        items: Входной поток (читается пачками, целиком в память не грузится)
        threads: Число потоков; 1 - без пула
    """
    if threads <= 1:
        yield from map(fn, items)
        return
    iterator = iter(items)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        while True:
            batch = list(islice(iterator, threads * _BATCH_PER_THREAD))
            if not batch:
                return
            yield from pool.map(fn, batch)


class LexTrendPipeline:

    def __init__(
        self,
        registry_path: Optional[str | Path] = None,
        lexicon_path: Optional[str | Path] = None,
        config_path: Optional[str | Path] = None,
        threads: int = 1,
        lenient: bool = False,
    ):
        """
        Инициализация пайплайна.

        Реестр, лексикон и параметры анализа читаются лениво: каждой стадии
        нужны только свои входы.

        Args:
            registry_path: CSV реестра изданий
            lexicon_path: CSV лексикона
            config_path: key=value файл параметров анализа (None - значения по умолчанию)
            threads: Потоков для extract/count
            lenient: Пропускать статьи, которые не удалось извлечь, вместо остановки
        """
        self.registry_path = registry_path
        self.lexicon_path = lexicon_path
        self.config_path = config_path
        self.threads = max(1, threads)
        self.lenient = lenient

    @cached_property
    def registry(self) -> List[OutletSpec]:
        if self.registry_path is None:
            raise ConfigError("registry path is required for this command")
        return read_registry(self.registry_path)

    @cached_property
    def constructs(self) -> List[Construct]:
        if self.lexicon_path is None:
            raise ConfigError("lexicon path is required for this command")
        return read_lexicon(self.lexicon_path)

    @cached_property
    def config(self) -> AnalysisConfig:
        return read_analysis_config(self.config_path)

    ################################################################################
    #============================ EXTRACT ===========================================

    def _extract_one(self, record: CorpusRecord) -> Tuple[Optional[ArticleDoc], Optional[ParseError]]:
        spec = self._specs.get(record.outlet_id)
        try:
            if spec is None:
                raise SchemaMismatch(f"{record.url}: outlet {record.outlet_id!r} is not in the registry")
            return extract_article(record.html, spec, record.url, record.date), None
        except ParseError as exc:
            if not self.lenient:
                raise
            return None, exc

    @cached_property
    def _specs(self):
        return {spec.outlet_id: spec for spec in self.registry}

    def extract(self, input_path: str | Path, output_path: str | Path) -> dict:
        """
        Извлекает статьи корпуса (манифест или length-prefixed поток) в JSON-lines.

        Returns:
            dict: status, documents, skipped
        """
        logger.info(f"[EXTRACT] 🚀 {input_path} -> {output_path} (потоков: {self.threads}, lenient={self.lenient})")
        logger.debug(f"[EXTRACT] Изданий в реестре: {len(self._specs)}")  # до старта пула
        skipped = 0

        def documents() -> Iterator[ArticleDoc]:
            nonlocal skipped
            for doc, error in ordered_map(self._extract_one, read_corpus(input_path), self.threads):
                if error is not None:
                    skipped += 1
                    logger.warning(f"[EXTRACT] ⚠️ Пропуск документа: {error}")
                    continue
                yield doc

        written = write_docs_jsonl(documents(), output_path)
        logger.info(f"[EXTRACT] ✅ Статей: {written}, пропущено: {skipped}")
        return {"status": "ok", "documents": written, "skipped": skipped}

    ################################################################################
    #============================ COUNT =============================================

    def count(self, input_path: str | Path, output_path: str | Path) -> dict:
        """
        Считает паттерны по статьям JSON-lines и пишет reproducibility CSV.

        Returns:
            dict: status, rows
        """
        counter = ArticleCounter(
            self.constructs,
            {spec.outlet_id: spec.language for spec in self.registry},
            prefix_tokens=self.config.headline_prefix_tokens,
        )
        logger.info(f"[COUNT] 🚀 {input_path} -> {output_path} (паттернов: {len(counter.pattern_ids)}, потоков: {self.threads})")
        rows = ordered_map(counter, read_docs_jsonl(input_path), self.threads)
        written = write_counts_csv(rows, output_path, pattern_ids=counter.pattern_ids)
        logger.info(f"[COUNT] ✅ Строк: {written}")
        return {"status": "ok", "rows": written}

    ################################################################################
    #============================ AGGREGATE =========================================

    def _aggregate_counts(self, input_path: str | Path) -> List[OutletYearAggregate]:
        accumulator = AggregateAccumulator()
        for _line, row in iter_counts_csv(input_path):
            accumulator.add(row)
        return accumulator.finalize(self.config)

    def aggregate(self, input_path: str | Path, output_path: str | Path) -> dict:
        """
        Суммирует counts CSV в outlet-year агрегаты с флагом eligibility.

        Returns:
            dict: status, outlet_years, eligible
        """
        logger.info(f"[AGGREGATE] 🚀 {input_path} -> {output_path} (порог: {self.config.eligibility_threshold})")
        aggregates = self._aggregate_counts(input_path)
        write_aggregates_csv(aggregates, output_path, pattern_ids=read_counts_header(input_path))
        eligible = sum(1 for agg in aggregates if agg.eligible)
        logger.info(f"[AGGREGATE] ✅ Outlet-years: {len(aggregates)}, eligible: {eligible}")
        return {"status": "ok", "outlet_years": len(aggregates), "eligible": eligible}

    ################################################################################
    #============================ ANALYZE ===========================================

    def _load_aggregates(self, input_path: str | Path) -> Tuple[List[OutletYearAggregate], Optional[List[str]]]:
        """Агрегаты и колонки паттернов входа; пустой файл - ([], None)."""
        path = Path(input_path)
        if path.is_file() and path.stat().st_size == 0:
            return [], None
        if is_counts_csv(path):
            return self._aggregate_counts(path), read_counts_header(path)
        return read_aggregates_csv(path), read_aggregates_header(path)

    def analysis_config(self, mode: Optional[str] = None, smooth: Optional[int] = None) -> AnalysisConfig:
        """Параметры анализа с приоритетом флагов CLI над файлом."""
        overrides = {
            key: value for key, value in (("pooling_mode", mode), ("smoothing_window", smooth)) if value is not None
        }
        if not overrides:
            return self.config
        try:
            return AnalysisConfig(**{**self.config.model_dump(), **overrides})
        except ValidationError as exc:
            raise ConfigError(f"invalid command-line override: {exc.errors()[0]['msg']}") from exc

    def select_constructs(self, construct_ids: Optional[Sequence[str]]) -> List[Construct]:
        if not construct_ids:
            return list(self.constructs)
        known = {c.construct_id for c in self.constructs}
        unknown = sorted(set(construct_ids) - known)
        if unknown:
            raise ConfigError(f"unknown construct(s) {', '.join(unknown)}; lexicon has {', '.join(sorted(known))}")
        return [c for c in self.constructs if c.construct_id in construct_ids]

    def analyze(
        self,
        input_path: str | Path,
        output_dir: str | Path,
        scopes: Optional[Sequence[str]] = None,
        construct_ids: Optional[Sequence[str]] = None,
        mode: Optional[str] = None,
        smooth: Optional[int] = None,
    ) -> dict:
        """
        Строит ряды, CI-полосы и сводные метрики; пишет series.csv, ci.csv, summary.csv.

        Args:
            input_path: aggregates CSV или counts CSV (тогда агрегация в памяти)
            output_dir: Каталог результатов
            scopes: Области (по умолчанию все)
            construct_ids: Конструкты (по умолчанию все)
            mode: pooled | unweighted (перекрывает файл параметров)
            smooth: Окно сглаживания (перекрывает файл параметров)

        Raises:
            NoEligibleOutlets: Во входе нет eligible outlet-years
        """
        config = self.analysis_config(mode, smooth)
        constructs = self.select_constructs(construct_ids)
        aggregates, columns = self._load_aggregates(input_path)
        logger.info(f"[ANALYZE] 🚀 {input_path}: outlet-years {len(aggregates)}, режим {config.pooling_mode}, окно {config.smoothing_window}")
        result = analyze_aggregates(aggregates, self.registry, constructs, config, scopes or SCOPES, columns)
        write_analysis(result, output_dir)
        return {"status": "ok", "series": len(result.series), "bands": len(result.bands), "summary": len(result.summary)}

    ################################################################################
    #============================ CHART / VERIFY ====================================

    def chart(
        self,
        input_dir: str | Path,
        output_dir: str | Path,
        charts_path: str | Path,
        scopes: Optional[Sequence[str]] = None,
        construct_ids: Optional[Sequence[str]] = None,
    ) -> dict:
        """Рендерит SVG по configs/charts.yaml из CSV, записанных analyze."""
        definitions = load_chart_definitions(charts_path)
        tables = read_analysis(input_dir)
        specs = build_chart_specs(definitions, tables, scopes=scopes, constructs=construct_ids)
        paths = write_charts(specs, tables, output_dir)
        logger.info(f"[CHART] ✅ Графиков: {len(paths)} из {len(definitions)} определений")
        return {"status": "ok", "charts": [path.name for path in paths]}

    def verify(self, input_path: str | Path) -> List[Tuple[int, str]]:
        """Все нарушения инвариантов counts CSV: (номер строки, сообщение)."""
        violations = validate_counts_rows(input_path)
        if violations:
            logger.error(f"[VERIFY] ❌ {input_path}: нарушений {len(violations)}")
        else:
            logger.info(f"[VERIFY] ✅ {input_path}: инварианты выполнены")
        return violations
