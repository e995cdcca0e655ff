from loguru import logger
from pydantic import Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.utils.loguru_utils import setup_loguru_formatting
from src.utils.env_utils import load_dotenv_with_details

# Set cool format for loguru
setup_loguru_formatting(logger)

# Load .env file (optional for the CLI)
load_dotenv_with_details(logger=logger)

_LOG_LEVELS = ("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL")


class Settings(BaseSettings):
    """
    Настройки LexTrend.

    Читаются из окружения и .env с префиксом LEXTREND_. Флаги CLI
    (--registry, --lexicon, --config, --charts, --threads) имеют приоритет.
    """

    model_config = SettingsConfigDict(env_prefix="LEXTREND_", extra="ignore")

    LOG_LEVEL: str = Field(default="INFO", description="Уровень логов в stderr")
    LOG_PATH: str | None = Field(default=None, description="Шаблон файлов логов, например 'logs/lextrend_{level}.log'")

    REGISTRY_PATH: str = Field(default="configs/outlets.csv", description="Реестр изданий")
    LEXICON_PATH: str = Field(default="configs/lexicon.csv", description="Лексикон конструктов")
    ANALYSIS_CONFIG_PATH: str = Field(default="configs/analysis.conf", description="Параметры анализа (key=value)")
    CHARTS_CONFIG_PATH: str = Field(default="configs/charts.yaml", description="Определения графиков")

    THREADS: int = Field(default=1, description="Потоков для extract/count")

    @field_validator("LOG_LEVEL")
    @classmethod
    def _check_level(cls, value: str) -> str:
        if value.upper() not in _LOG_LEVELS:
            raise ValueError(f"LOG_LEVEL must be one of {', '.join(_LOG_LEVELS)}")
        return value.upper()

    @field_validator("THREADS")
    @classmethod
    def _check_threads(cls, value: int) -> int:
        if value < 1:
            raise ValueError("THREADS must be >= 1")
        return value


try:
    logger.debug("Initializing config ..")
    settings = Settings()
    setup_loguru_formatting(logger, log_path=settings.LOG_PATH, level=settings.LOG_LEVEL)
    logger.debug(".. success!")
except ValidationError as e:
    logger.error(f"Settings not valid: {e}")
    raise
