"""
Извлечение заголовка и тела статьи из HTML по путям издания (подмножество XPath).

Поддерживаемое подмножество путей: оси '/' и '//', имя элемента или '*',
предикаты [@attr='value'] и позиционный индекс [n].
"""

import codecs
import csv
import functools
import html
import re
from html.entities import html5
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import lxml.html
from lxml import etree
from pydantic import ValidationError

from src.utils.errors import (
    BodyNotFound,
    HeadlineNotFound,
    MalformedDocument,
    MalformedPathExpression,
    SchemaMismatch,
)
from src.utils.schemas import ArticleDoc, OutletSpec


MANIFEST_COLUMNS = ("outlet_id", "url", "date", "html_path")

_NAME = r"[A-Za-z_][A-Za-z0-9_.-]*"
_PREDICATE = rf"\[(?:@{_NAME}=(?:'[^']*'|\"[^\"]*\")|[1-9][0-9]*)\]"
_STEP = rf"//?(?:\*|{_NAME})(?:{_PREDICATE})*"
_PATH_RE = re.compile(rf"^(?:{_STEP})+$")

_WHITESPACE_RE = re.compile(r"\s+")
_ENTITY_RE = re.compile(r"&(?:#[0-9]+|#[xX][0-9A-Fa-f]+|[A-Za-z][A-Za-z0-9]*);")
_TAG_RE = re.compile(r"</?[A-Za-z][^<>]*>")
_LT_LETTER_RE = re.compile(r"<(?=[A-Za-z])")

_SKIPPED_ELEMENTS = ("script", "style", "noscript", "template")

_XML_DECLARATION_RE = re.compile(r"^\s*<\?xml[^>]*\?>")
_META_CHARSET_RE = re.compile(rb"""<meta[^>]*?charset\s*=\s*["']?\s*([A-Za-z0-9_.:-]+)""", re.IGNORECASE)
_BOMS = ((codecs.BOM_UTF8, "utf-8-sig"), (codecs.BOM_UTF16_LE, "utf-16"), (codecs.BOM_UTF16_BE, "utf-16"))
# Метки, которые браузеры читают иначе, чем одноименный кодек Python
_CHARSET_ALIASES = {"iso8859-1": "cp1252", "ascii": "cp1252", "utf-16-le": "utf-8", "utf-16-be": "utf-8", "utf-16": "utf-8"}


class CorpusRecord(NamedTuple):
    outlet_id: str
    url: str
    date: str
    html: str


################################################################################
#============================ ПУТИ ==============================================

def validate_path_expression(path: str, where: str = "") -> str:
    """
    Проверяет, что путь входит в поддерживаемое подмножество и компилируется.

    Args:
        path: Выражение, например "//div[@class='story']/p"
        where: Контекст для сообщения об ошибке (например, номер строки реестра)

    Raises:
        MalformedPathExpression: Путь вне подмножества или синтаксически неверен
    """
    prefix = f"{where}: " if where else ""
    if not _PATH_RE.match(path):
        raise MalformedPathExpression(f"{prefix}unsupported path expression {path!r}")
    try:
        _compile_path(path)
    except etree.XPathSyntaxError as exc:
        raise MalformedPathExpression(f"{prefix}invalid path expression {path!r}: {exc}") from exc
    return path


@functools.lru_cache(maxsize=1024)
def _compile_path(path: str) -> etree.XPath:
    return etree.XPath(path)


################################################################################
#============================ ТЕКСТ =============================================

def decode_entities_and_collapse(text: str) -> str:
    """
    Декодирует HTML-сущности и схлопывает пробельные серии.

    Декодируются только полные ссылки "&name;", "&#n;", "&#xh;"; неизвестные
    ("&bogus;", "&notanentity;") и незакрытые ("&amp") остаются как есть.
    """
    return collapse_whitespace(_ENTITY_RE.sub(_decode_entity, text))


def collapse_whitespace(text: str) -> str:
    return _WHITESPACE_RE.sub(" ", text).strip()


def _decode_entity(match: re.Match) -> str:
    reference = match.group(0)
    if reference.startswith("&#"):
        return html.unescape(reference)
    return html5.get(reference[1:], reference)


def _node_text(node) -> str:
    # text_content() уже раскодирован lxml
    text = collapse_whitespace(node.text_content())
    if "<" in text:
        # Экранированная разметка ("&lt;b&gt;") после декодирования не должна остаться тегом
        text = collapse_whitespace(_LT_LETTER_RE.sub("< ", _TAG_RE.sub(" ", text)))
    return text


def _parse_document(document: str):
    try:
        try:
            tree = lxml.html.document_fromstring(document)
        except ValueError:
            # Unicode-строка с XML-декларацией кодировки; текст уже раскодирован
            tree = lxml.html.document_fromstring(_XML_DECLARATION_RE.sub("", document, count=1))
    except (etree.ParserError, etree.XMLSyntaxError, ValueError) as exc:
        raise MalformedDocument(f"Cannot parse document: {exc}") from exc
    etree.strip_elements(tree, *_SKIPPED_ELEMENTS, with_tail=False)
    return tree


def extract_article(html_text: str, spec: OutletSpec, url: str, date: str) -> ArticleDoc:
    """
    Извлекает заголовок и тело статьи.

    Заголовок - текст первого узла headline_path; тело - тексты всех узлов body_path
    в порядке документа через пробел. Подписи к рисункам и подзаголовки исключаются
    ровно настолько, насколько их исключает body_path.

    Args:
        html_text: HTML документа (допускается tag soup)
        spec: Запись реестра издания
        url: URL статьи
        date: ISO-8601 дата публикации из манифеста

    Returns:
        ArticleDoc: Статья без разметки

    Raises:
        HeadlineNotFound: headline_path ничего не нашел
        BodyNotFound: body_path ничего не нашел
        MalformedDocument: Документ не разбирается
    """
    tree = _parse_document(html_text)

    headline_nodes = _compile_path(spec.headline_path)(tree)
    if not headline_nodes:
        raise HeadlineNotFound(f"{url}: {spec.headline_path!r} matched nothing ({spec.outlet_id})")
    body_nodes = _compile_path(spec.body_path)(tree)
    if not body_nodes:
        raise BodyNotFound(f"{url}: {spec.body_path!r} matched nothing ({spec.outlet_id})")

    segments = [text for text in (_node_text(node) for node in body_nodes) if text]
    try:
        return ArticleDoc(
            outlet_id=spec.outlet_id,
            url=url,
            publication_date=date,
            headline=_node_text(headline_nodes[0]),
            body=" ".join(segments),
        )
    except ValidationError as exc:
        raise MalformedDocument(f"{url}: {exc.errors()[0]['msg']}") from exc


################################################################################
#============================ КОРПУС ============================================

def decode_html_bytes(data: bytes) -> str:
    """
    Раскодирует байты HTML страницы: BOM, затем <meta charset> в первых 4 КБ, иначе UTF-8.

    Нераскодируемые байты заменяются на U+FFFD.
    """
    for bom, codec in _BOMS:
        if data.startswith(bom):
            return data.decode(codec, errors="replace")
    codec = "utf-8"
    match = _META_CHARSET_RE.search(data[:4096])
    if match:
        try:
            declared = codecs.lookup(match.group(1).decode("ascii")).name
            codec = _CHARSET_ALIASES.get(declared, declared)
        except LookupError:
            pass
    return data.decode(codec, errors="replace")


def read_manifest(path: str | Path) -> Iterator[CorpusRecord]:
    """
    Читает манифест корпуса (outlet_id,url,date,html_path); html_path относительно каталога манифеста.

    Кодировка каждого HTML файла определяется по BOM и <meta charset> (см. decode_html_bytes).

    Raises:
        SchemaMismatch: Неверный заголовок манифеста или манифест не в UTF-8
        MalformedDocument: HTML файл не читается
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or tuple(header) != MANIFEST_COLUMNS:
                raise SchemaMismatch(f"{path}: expected header {','.join(MANIFEST_COLUMNS)}")
            for line, record in enumerate(reader, start=2):
                if len(record) != len(MANIFEST_COLUMNS):
                    raise SchemaMismatch(f"{path}: row {line}: expected {len(MANIFEST_COLUMNS)} fields")
                outlet_id, url, date, html_path = record
                try:
                    document = decode_html_bytes((path.parent / html_path).read_bytes())
                except OSError as exc:
                    raise MalformedDocument(f"{path}: row {line}: cannot read {html_path}: {exc}") from exc
                yield CorpusRecord(outlet_id, url, date, document)
    except UnicodeDecodeError as exc:
        raise SchemaMismatch(f"{path}: manifest is not valid UTF-8: {exc}") from exc


def read_record_stream(path: str | Path) -> Iterator[CorpusRecord]:
    """
    Читает корпус одним потоком length-prefixed записей.

    Формат записи: строка "outlet_id\\turl\\tdate\\tbyte_length\\n", затем ровно
    byte_length байт UTF-8 HTML, затем "\\n".

    Raises:
        MalformedDocument: Усеченная или битая запись
    """
    path = Path(path)
    with open(path, "rb") as f:
        index = 0
        while True:
            header = f.readline()
            if not header:
                return
            if not header.strip():
                continue
            index += 1
            try:
                fields = header.rstrip(b"\r\n").decode("utf-8").split("\t")
            except UnicodeDecodeError as exc:
                raise MalformedDocument(f"{path}: record {index}: header is not valid UTF-8 {header[:200]!r}") from exc
            if len(fields) != 4 or not fields[3].isdigit():
                raise MalformedDocument(f"{path}: record {index}: bad header {header[:200]!r}")
            size = int(fields[3])
            payload = f.read(size)
            if len(payload) != size:
                raise MalformedDocument(f"{path}: record {index}: truncated, expected {size} bytes, got {len(payload)}")
            terminator = f.read(1)
            if terminator not in (b"\n", b""):
                raise MalformedDocument(f"{path}: record {index}: missing record terminator")
            yield CorpusRecord(fields[0], fields[1], fields[2], payload.decode("utf-8", errors="replace"))


def write_record_stream(records: Iterable[CorpusRecord], path: str | Path) -> int:
    """Пишет записи в length-prefixed поток (обратная операция к read_record_stream)."""
    written = 0
    with open(path, "wb") as f:
        for record in records:
            payload = record.html.encode("utf-8")
            f.write(f"{record.outlet_id}\t{record.url}\t{record.date}\t{len(payload)}\n".encode("utf-8"))
            f.write(payload)
            f.write(b"\n")
            written += 1
    return written


def read_corpus(path: str | Path) -> Iterator[CorpusRecord]:
    """Манифест (.csv) или length-prefixed поток (любое другое расширение)."""
    if Path(path).suffix.lower() == ".csv":
        return read_manifest(path)
    return read_record_stream(path)


def write_docs_jsonl(docs: Iterable[ArticleDoc], path: str | Path) -> int:
    """Пишет ArticleDoc в JSON-lines (UTF-8, одна статья на строку)."""
    written = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for doc in docs:
            f.write(doc.model_dump_json())
            f.write("\n")
            written += 1
    return written


def read_docs_jsonl(path: str | Path) -> Iterator[ArticleDoc]:
    """
    Читает ArticleDoc из JSON-lines.

    Raises:
        SchemaMismatch: Строка не UTF-8 или не является ArticleDoc
    """
    with open(path, "rb") as f:
        for line_no, raw in enumerate(f, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise SchemaMismatch(f"{path}: line {line_no}: not valid UTF-8") from exc
            if not line.strip():
                continue
            try:
                yield ArticleDoc.model_validate_json(line)
            except ValidationError as exc:
                raise SchemaMismatch(f"{path}: line {line_no}: {exc.errors()[0]['msg']}") from exc
