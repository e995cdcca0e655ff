"""
Отчеты: long-format CSV рядов, CI-полос и сводных метрик, сборка ChartSpec
из configs/charts.yaml и детерминированный SVG рендер small multiples.

Графики строятся только из CSV, записанных командой analyze; статистика здесь
не пересчитывается.
"""

import csv
import html
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import yaml
from loguru import logger
from pydantic import ValidationError

from src.utils.errors import ConfigError, SchemaMismatch, UnknownSeries
from src.utils.schemas import (
    SCALED_SUBJECTS,
    AnalysisResult,
    ChartDefinition,
    ChartPanel,
    ChartSpec,
    CiBand,
    CiPoint,
    FrequencySeries,
    SeriesKey,
    SummaryRow,
)


SERIES_COLUMNS = ("scope", "scope_id", "subject", "subject_id", "year", "value", "gap")
CI_COLUMNS = ("scope", "scope_id", "subject", "subject_id", "year", "value", "lower", "upper", "n")
SUMMARY_COLUMNS = ("scope", "scope_id", "metric", "subject_id", "value")

SERIES_FILE = "series.csv"
CI_FILE = "ci.csv"
SUMMARY_FILE = "summary.csv"

PANEL_WIDTH = 320
PANEL_HEIGHT = 220
HEADER_HEIGHT = 36
_MARGIN_LEFT, _MARGIN_RIGHT, _MARGIN_TOP, _MARGIN_BOTTOM = 48, 12, 30, 28
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")


def _fmt(value: float) -> str:
    # 17 значащих цифр: float -> текст -> float без потерь
    return format(value, ".17g")


def _key_fields(key: SeriesKey) -> List[str]:
    return [key.scope, key.scope_id, key.subject, key.subject_id]


################################################################################
#============================ CSV АНАЛИЗА =======================================

def _read_rows(path: Path, columns: Tuple[str, ...]) -> Iterable[Tuple[int, Dict[str, str]]]:
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != columns:
            raise SchemaMismatch(f"{path}: expected header {','.join(columns)}")
        for line, record in enumerate(reader, start=2):
            if len(record) != len(columns):
                raise SchemaMismatch(f"{path}: row {line}: expected {len(columns)} fields, got {len(record)}")
            yield line, dict(zip(columns, record))


def _row_key(row: Dict[str, str]) -> SeriesKey:
    return SeriesKey(scope=row["scope"], scope_id=row["scope_id"], subject=row["subject"], subject_id=row["subject_id"])


def render_series_csv(series: Sequence[FrequencySeries], path: str | Path) -> int:
    """
    Пишет ряды в long format; строки упорядочены по (scope, scope_id, subject, subject_id, year).
    Колонка gap = true у разностей, перекрывающих пропущенный год.

    Returns:
        int: Число строк данных
    """
    written = 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SERIES_COLUMNS)
        for s in sorted(series, key=lambda item: item.key.sort_key()):
            for year in s.years():
                gap = "true" if year in s.gap_years else "false"
                writer.writerow([*_key_fields(s.key), year, _fmt(s.points[year]), gap])
                written += 1
    return written


def parse_series_csv(path: str | Path) -> List[FrequencySeries]:
    """
    Читает series CSV (обратная операция к render_series_csv).

    Raises:
        SchemaMismatch: Неверный заголовок, ключ или значение
    """
    path = Path(path)
    points: Dict[SeriesKey, Dict[int, float]] = {}
    gaps: Dict[SeriesKey, List[int]] = {}
    try:
        for line, row in _read_rows(path, SERIES_COLUMNS):
            if row["gap"] not in ("true", "false"):
                raise SchemaMismatch(f"{path}: row {line}: gap must be true/false, got {row['gap']!r}")
            try:
                key, year = _row_key(row), int(row["year"])
                points.setdefault(key, {})[year] = float(row["value"])
            except (ValidationError, ValueError) as exc:
                raise SchemaMismatch(f"{path}: row {line}: {exc}") from exc
            if row["gap"] == "true":
                gaps.setdefault(key, []).append(year)
        return [
            FrequencySeries(key=key, points=values, gap_years=tuple(sorted(gaps.get(key, ()))))
            for key, values in points.items()
        ]
    except ValidationError as exc:
        raise SchemaMismatch(f"{path}: {exc.errors()[0]['msg']}") from exc


def render_ci_csv(bands: Sequence[CiBand], path: str | Path) -> int:
    """Пишет CI-полосы: колонки series CSV (value = среднее) + lower, upper, n."""
    written = 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CI_COLUMNS)
        for band in sorted(bands, key=lambda item: item.key.sort_key()):
            for year in sorted(band.points):
                point = band.points[year]
                writer.writerow([
                    *_key_fields(band.key), year,
                    _fmt(point.mean), _fmt(point.lower), _fmt(point.upper), point.n,
                ])
                written += 1
    return written


def parse_ci_csv(path: str | Path) -> List[CiBand]:
    path = Path(path)
    points: Dict[SeriesKey, Dict[int, CiPoint]] = {}
    for line, row in _read_rows(path, CI_COLUMNS):
        try:
            points.setdefault(_row_key(row), {})[int(row["year"])] = CiPoint(
                mean=float(row["value"]), lower=float(row["lower"]), upper=float(row["upper"]), n=int(row["n"]))
        except (ValidationError, ValueError) as exc:
            raise SchemaMismatch(f"{path}: row {line}: {exc}") from exc
    return [CiBand(key=key, points=values) for key, values in points.items()]


def render_summary_csv(rows: Sequence[SummaryRow], path: str | Path) -> int:
    ordered = sorted(rows, key=lambda r: (r.scope, r.scope_id, r.metric, r.subject_id))
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for row in ordered:
            writer.writerow([row.scope, row.scope_id, row.metric, row.subject_id, _fmt(row.value)])
    return len(ordered)


def parse_summary_csv(path: str | Path) -> List[SummaryRow]:
    path = Path(path)
    result = []
    for line, row in _read_rows(path, SUMMARY_COLUMNS):
        try:
            result.append(SummaryRow(**{**row, "value": float(row["value"])}))
        except (ValidationError, ValueError) as exc:
            raise SchemaMismatch(f"{path}: row {line}: {exc}") from exc
    return result


def write_analysis(result: AnalysisResult, output_dir: str | Path) -> Dict[str, Path]:
    """Пишет series.csv, ci.csv и summary.csv в каталог."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    paths = {name: output_dir / name for name in (SERIES_FILE, CI_FILE, SUMMARY_FILE)}
    rows = render_series_csv(result.series, paths[SERIES_FILE])
    render_ci_csv(result.bands, paths[CI_FILE])
    render_summary_csv(result.summary, paths[SUMMARY_FILE])
    logger.info(f"[ANALYZE] 💾 Записано {rows} точек рядов в {output_dir}")
    return paths


def read_analysis(input_dir: str | Path) -> AnalysisResult:
    """
    Читает результаты analyze из каталога.

    Raises:
        SchemaMismatch: Нет series.csv или файл битый
    """
    input_dir = Path(input_dir)
    if not (input_dir / SERIES_FILE).is_file():
        raise SchemaMismatch(f"{input_dir}: no {SERIES_FILE}; run 'analyze' first")
    ci_path, summary_path = input_dir / CI_FILE, input_dir / SUMMARY_FILE
    return AnalysisResult(
        series=tuple(parse_series_csv(input_dir / SERIES_FILE)),
        bands=tuple(parse_ci_csv(ci_path)) if ci_path.is_file() else (),
        summary=tuple(parse_summary_csv(summary_path)) if summary_path.is_file() else (),
    )


################################################################################
#============================ ОПРЕДЕЛЕНИЯ ГРАФИКОВ ==============================

def load_chart_definitions(path: str | Path) -> List[ChartDefinition]:
    """
    Загружает configs/charts.yaml (ключ верхнего уровня 'charts').

    Raises:
        ConfigError: Файл не читается, не YAML или запись невалидна
    """
    try:
        with open(path, encoding="utf-8") as f:
            config = yaml.safe_load(f) or {}
    except OSError as exc:
        raise ConfigError(f"Cannot read chart definitions {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc

    charts = config.get("charts") if isinstance(config, dict) else None
    if not isinstance(charts, list):
        raise ConfigError(f"{path}: expected a top-level 'charts' list")
    definitions = []
    for index, item in enumerate(charts, start=1):
        try:
            definitions.append(ChartDefinition.model_validate(item))
        except ValidationError as exc:
            raise ConfigError(f"{path}: chart #{index}: {exc.errors()[0]['msg']}") from exc
    names = [d.name for d in definitions]
    duplicates = sorted({name for name in names if names.count(name) > 1})
    if duplicates:
        raise ConfigError(f"{path}: duplicate chart name(s) {', '.join(duplicates)}")
    logger.debug(f"[CHART] Загружено определений графиков: {len(definitions)}")
    return definitions


def format_annotation(metric: str, value: float) -> str:
    """'r = 0.93' для pearson, '+180%' для percent_change."""
    if metric == "pearson":
        return f"r = {value:.2f}"
    return f"{value:+.0f}%"


class _Tables:
    """Индексы результатов analyze для сборки и рендера графиков."""

    def __init__(self, tables: AnalysisResult):
        self.series = {s.key: s for s in tables.series}
        self.bands = {b.key: b for b in tables.bands}
        self.summary = {(r.scope, r.scope_id, r.metric, r.subject_id): r.value for r in tables.summary}

    def annotation(self, metric: str, scope: str, scope_id: str, subject_id: str) -> Optional[str]:
        value = self.summary.get((scope, scope_id, metric, subject_id))
        return None if value is None else format_annotation(metric, value)


def _x_range(definition: ChartDefinition, panels: Sequence[ChartPanel], tables: _Tables) -> Tuple[int, int]:
    if definition.years:
        return definition.years
    years = [year for panel in panels for key in panel.series for year in tables.series[key].points]
    years += [year for panel in panels if panel.band for year in tables.bands[panel.band].points]
    low, high = min(years), max(years)
    return (low, high) if low < high else (low, low + 1)


def _panels_by_scope_id(definition: ChartDefinition, refs, tables: _Tables) -> List[ChartPanel]:
    scope_ids = sorted({key.scope_id for key in tables.series if key.scope == definition.scope})
    panels = []
    for scope_id in scope_ids:
        keys = [
            key for key in (
                SeriesKey(scope=definition.scope, scope_id=scope_id, subject=ref.subject, subject_id=ref.subject_id)
                for ref in refs
            )
            if key in tables.series
        ]
        if not keys:
            continue
        band = next((key for key in keys if key in tables.bands), None) if definition.band else None
        annotation = None
        if definition.annotation == "pearson":
            pair = "~".join(sorted(ref.subject_id for ref in refs))
            annotation = tables.annotation("pearson", definition.scope, scope_id, pair)
        elif definition.annotation == "percent_change":
            group = next((key for key in keys if key.subject == "group"), None)
            if group is not None:
                annotation = tables.annotation("percent_change", definition.scope, scope_id, group.subject_id)
        panels.append(ChartPanel(scope_id=scope_id, series=tuple(keys), band=band, annotation=annotation))
    return panels


def _panels_by_subject_id(definition: ChartDefinition, subject_ids: Sequence[str], tables: _Tables) -> List[ChartPanel]:
    found = sorted(
        key.subject_id for key in tables.series
        if key.scope == definition.scope and key.scope_id == definition.scope_id and key.subject == definition.subject
    )
    panels = []
    for subject_id in (subject_ids or found):
        if subject_id not in found:
            logger.debug(f"[CHART] {definition.name}: нет ряда {definition.subject}/{subject_id} для {definition.scope_id}")
            continue
        key = SeriesKey(scope=definition.scope, scope_id=definition.scope_id,
                        subject=definition.subject, subject_id=subject_id)
        band = key if definition.band and key in tables.bands else None
        annotation = None
        if definition.annotation == "percent_change":
            annotation = tables.annotation("percent_change", definition.scope, definition.scope_id, subject_id)
        panels.append(ChartPanel(scope_id=subject_id, series=(key,), band=band, annotation=annotation))
    return panels


def build_chart_specs(
    definitions: Sequence[ChartDefinition],
    tables: AnalysisResult,
    scopes: Optional[Sequence[str]] = None,
    constructs: Optional[Sequence[str]] = None,
) -> List[ChartSpec]:
    """
    Собирает ChartSpec по определениям и таблицам analyze.

    Панели без данных пропускаются; график без панелей пропускается с WARNING.

    Args:
        definitions: Записи charts.yaml
        tables: Результаты analyze (прочитанные из CSV)
        scopes: Оставить только графики этих областей
        constructs: Оставить только ряды средних этих конструктов

    Returns:
        list[ChartSpec]: В порядке определений
    """
    index = _Tables(tables)
    specs = []
    for definition in definitions:
        if scopes and definition.scope not in scopes:
            continue
        if definition.panel_by == "scope_id":
            refs = [
                ref for ref in definition.series
                if not constructs or ref.subject not in SCALED_SUBJECTS or ref.subject_id in constructs
            ]
            panels = _panels_by_scope_id(definition, refs, index) if refs else []
        else:
            subject_ids = list(definition.subject_ids)
            if constructs and definition.subject in SCALED_SUBJECTS:
                subject_ids = [s for s in (subject_ids or list(constructs)) if s in constructs]
            panels = _panels_by_subject_id(definition, subject_ids, index)

        if not panels:
            logger.warning(f"[CHART] ⚠️ {definition.name}: нет данных ни для одной панели, график пропущен")
            continue
        specs.append(ChartSpec(
            name=definition.name,
            title=definition.title,
            panels=tuple(panels),
            x_range=_x_range(definition, panels, index),
            y_label=definition.y_label,
            columns=definition.columns,
        ))
    return specs


################################################################################
#============================ SVG ===============================================

class SvgCanvas:
    """Построчный SVG-документ; координаты печатаются с 2 знаками."""

    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self._parts: List[str] = []

    def rect(self, x: float, y: float, width: float, height: float, extra: str = "") -> None:
        self._parts.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{width:.2f}" height="{height:.2f}" fill="none" stroke="#444"{extra}/>')

    def text(self, x: float, y: float, content: str, extra: str = "") -> None:
        self._parts.append(f'<text x="{x:.2f}" y="{y:.2f}"{extra}>{html.escape(content)}</text>')

    def polyline(self, points: Sequence[Tuple[float, float]], color: str) -> None:
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
        self._parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')

    def area(self, upper: Sequence[Tuple[float, float]], lower: Sequence[Tuple[float, float]], color: str) -> None:
        outline = list(upper) + list(reversed(lower))
        commands = " ".join(f"{'M' if i == 0 else 'L'}{x:.2f},{y:.2f}" for i, (x, y) in enumerate(outline))
        self._parts.append(f'<path d="{commands} Z" fill="{color}" fill-opacity="0.25" stroke="none"/>')

    def document(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}" font-family="sans-serif" font-size="11">\n'
        )
        return head + "\n".join(self._parts) + "\n</svg>\n"


def _y_range(panel: ChartPanel, tables: _Tables, x_range: Tuple[int, int]) -> Tuple[float, float]:
    if all(key.subject in SCALED_SUBJECTS for key in panel.series) and panel.band is None:
        return 0.0, 1.0
    values = [v for key in panel.series for y, v in tables.series[key].points.items() if x_range[0] <= y <= x_range[1]]
    if panel.band is not None:
        for year, point in tables.bands[panel.band].points.items():
            if x_range[0] <= year <= x_range[1]:
                values += [point.lower, point.upper]
    if not values:
        return 0.0, 1.0
    low, high = min(0.0, min(values)), max(values)
    return (low, high) if high > low else (low, low + 1.0)


def _draw_panel(canvas: SvgCanvas, spec: ChartSpec, panel: ChartPanel, tables: _Tables, ox: float, oy: float) -> None:
    x0, x1 = ox + _MARGIN_LEFT, ox + PANEL_WIDTH - _MARGIN_RIGHT
    y0, y1 = oy + _MARGIN_TOP, oy + PANEL_HEIGHT - _MARGIN_BOTTOM
    first_year, last_year = spec.x_range
    low, high = _y_range(panel, tables, spec.x_range)

    def project(year: int, value: float) -> Tuple[float, float]:
        x = x0 + (year - first_year) / (last_year - first_year) * (x1 - x0)
        y = y1 - (value - low) / (high - low) * (y1 - y0)
        return x, y

    def visible(points: Dict[int, float]) -> List[Tuple[float, float]]:
        return [project(year, points[year]) for year in sorted(points) if first_year <= year <= last_year]

    canvas.rect(x0, y0, x1 - x0, y1 - y0)
    canvas.text((x0 + x1) / 2, oy + 18, panel.scope_id, ' text-anchor="middle" font-weight="bold"')
    canvas.text(x0, y1 + 16, str(first_year), ' text-anchor="start"')
    canvas.text(x1, y1 + 16, str(last_year), ' text-anchor="end"')
    canvas.text(x0 - 4, y1, f"{low:.3g}", ' text-anchor="end"')
    canvas.text(x0 - 4, y0 + 8, f"{high:.3g}", ' text-anchor="end"')
    if spec.y_label:
        cx, cy = ox + 12, (y0 + y1) / 2
        canvas.text(cx, cy, spec.y_label, f' text-anchor="middle" transform="rotate(-90 {cx:.2f} {cy:.2f})"')

    if panel.band is not None:
        band = tables.bands[panel.band]
        years = [year for year in sorted(band.points) if first_year <= year <= last_year]
        if years:
            canvas.area(
                [project(year, band.points[year].upper) for year in years],
                [project(year, band.points[year].lower) for year in years],
                _PALETTE[0],
            )
        if panel.band not in panel.series:
            canvas.polyline(visible({year: band.points[year].mean for year in years}), _PALETTE[0])

    for index, key in enumerate(panel.series):
        color = _PALETTE[index % len(_PALETTE)]
        canvas.polyline(visible(tables.series[key].points), color)
        if len(panel.series) > 1:
            canvas.text(x1 - 4, y0 + 14 + 12 * index, key.subject_id, f' text-anchor="end" fill="{color}"')

    if panel.annotation:
        canvas.text(x0 + 6, y0 + 14, panel.annotation, ' font-weight="bold"')


def render_chart_svg(spec: ChartSpec, tables: AnalysisResult) -> str:
    """
    Рендерит график small multiples в SVG.

    Панели 320x220 в сетке по spec.columns; линия на ряд, CI-полоса (fill-opacity < 1)
    под линией среднего, аннотация в левом верхнем углу панели. Без времени и
    случайности: одинаковый вход - байт-в-байт одинаковый SVG.

    Raises:
        UnknownSeries: Панель ссылается на ряд или полосу, которых нет в таблицах
    """
    index = _Tables(tables)
    for panel in spec.panels:
        for key in panel.series:
            if key not in index.series:
                raise UnknownSeries(f"chart {spec.name!r}: no series {'/'.join(_key_fields(key))}")
        if panel.band is not None and panel.band not in index.bands:
            raise UnknownSeries(f"chart {spec.name!r}: no CI band {'/'.join(_key_fields(panel.band))}")

    columns = min(spec.columns, len(spec.panels))
    rows = math.ceil(len(spec.panels) / columns)
    canvas = SvgCanvas(columns * PANEL_WIDTH, HEADER_HEIGHT + rows * PANEL_HEIGHT)
    canvas.text(canvas.width / 2, 22, spec.title, ' text-anchor="middle" font-size="14"')
    for i, panel in enumerate(spec.panels):
        row, column = divmod(i, columns)
        _draw_panel(canvas, spec, panel, index, column * PANEL_WIDTH, HEADER_HEIGHT + row * PANEL_HEIGHT)
    return canvas.document()


def write_charts(specs: Sequence[ChartSpec], tables: AnalysisResult, output_dir: str | Path) -> List[Path]:
    """Пишет по SVG на ChartSpec: <output_dir>/<name>.svg."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for spec in specs:
        path = output_dir / f"{spec.name}.svg"
        path.write_text(render_chart_svg(spec, tables), encoding="utf-8", newline="\n")
        logger.info(f"[CHART] 📈 {path.name}: панелей {len(spec.panels)}")
        paths.append(path)
    return paths
