import structlog
import logging
import sys
from typing import Optional, TextIO

from app.config import settings

def configure_logging(level: Optional[str] = None, stream: TextIO = sys.stdout):
    """Route stdlib logging and structlog through one JSON renderer.

    The CLI passes ``sys.stderr`` so that reports written to stdout stay clean.
    """
    logging.basicConfig(
        format="%(message)s",
        stream=stream,
        level=getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.INFO),
        force=True,
    )

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.JSONRenderer(),
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=settings.LOG_CACHE_LOGGERS,
    )
