import logging
import sys

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: int = logging.INFO) -> logging.Logger:
    """Single stream handler on the package logger; safe to call twice."""
    root = logging.getLogger("src")
    root.setLevel(level)
    if not any(getattr(h, "_asymcouple", False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._asymcouple = True
        root.addHandler(handler)
    for handler in root.handlers:
        handler.setLevel(level)
    return root
