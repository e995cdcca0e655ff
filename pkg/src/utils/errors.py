"""
Иерархия ошибок LexTrend.

Каждый класс несет exit_code, который CLI возвращает процессу:
    2 - ошибка конфигурации (реестр, лексикон, analysis config, charts.yaml)
    3 - ошибка разбора (HTML, CSV, даты)
    4 - нарушение инварианта данных (counts CSV)
    5 - недостаточно данных для статистики
"""


class LexTrendError(Exception):
    """Базовая ошибка пакета."""

    exit_code: int = 1


# ===== exit 2 =====
class ConfigError(LexTrendError):
    exit_code = 2


class DuplicateOutletId(ConfigError):
    pass


class UnknownRegion(ConfigError):
    pass


class MalformedPathExpression(ConfigError):
    pass


class EmptyConstruct(ConfigError):
    pass


class DuplicatePattern(ConfigError):
    pass


class PatternTooLong(ConfigError):
    pass


# ===== exit 3 =====
class ParseError(LexTrendError):
    exit_code = 3


class HeadlineNotFound(ParseError):
    pass


class BodyNotFound(ParseError):
    pass


class MalformedDocument(ParseError):
    pass


class MalformedDate(ParseError):
    pass


class SchemaMismatch(ParseError):
    pass


# ===== exit 4 =====
class InvariantError(LexTrendError):
    exit_code = 4


class InvariantViolation(InvariantError):
    """Нарушение инварианта строки counts CSV; row_number - номер строки файла (заголовок = 1)."""

    def __init__(self, message: str, row_number: int | None = None):
        self.row_number = row_number
        if row_number is not None:
            message = f"row {row_number}: {message}"
        super().__init__(message)


class NegativeCount(InvariantError):
    pass


# ===== exit 5 =====
class InsufficientDataError(LexTrendError):
    exit_code = 5


class IneligibleAggregate(InsufficientDataError):
    pass


class ZeroUnigrams(InsufficientDataError):
    pass


class NoEligibleOutlets(InsufficientDataError):
    pass


class EmptySeries(InsufficientDataError):
    pass


class EmptyInput(InsufficientDataError):
    pass


class TooFewPoints(InsufficientDataError):
    pass


class InsufficientOverlap(InsufficientDataError):
    pass


class ZeroVariance(InsufficientDataError):
    pass


class TooFewOutlets(InsufficientDataError):
    pass


class MissingYear(InsufficientDataError):
    pass


class ZeroBaseline(InsufficientDataError):
    pass


class UnknownSeries(InsufficientDataError):
    pass
