from datetime import date, datetime

from src.utils.errors import MalformedDate


def parse_publication_year(publication_date: str) -> int:
    """
    Возвращает календарный год публикации (ключ агрегации).

    Принимает ISO-8601 дату ("2021-03-04") или метку времени
    ("2021-03-04 11:25:39.365821", "2021-03-04T11:25:39Z").

    Args:
        publication_date: Дата публикации из манифеста корпуса

    Returns:
        int: Год публикации

    Raises:
        MalformedDate: Если строка не является ISO-8601 датой
    """
    value = publication_date.strip()
    try:
        if len(value) == 10:
            return date.fromisoformat(value).year
        # fromisoformat до 3.11 не понимает суффикс Z
        return datetime.fromisoformat(value.replace(' ', 'T').replace('Z', '+00:00')).year
    except ValueError as exc:
        raise MalformedDate(f"Not an ISO-8601 date: {publication_date!r}") from exc
