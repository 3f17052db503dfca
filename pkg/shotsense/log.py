# shotsense/log.py
from __future__ import annotations
import logging, os, sys

# librosa pulls in numba, which is very chatty at DEBUG
_NOISY = ("numba", "audioread")


def setup_logging(level_name: str | None = None) -> None:
    level_name = (level_name or os.getenv("SHOTSENSE_LOG", "INFO")).upper()
    level = getattr(logging, level_name, logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        datefmt="%H:%M:%S",
        stream=sys.stderr,
    )
    for name in _NOISY:
        logging.getLogger(name).setLevel(max(level, logging.WARNING))
    logger.setLevel(level)


logger = logging.getLogger("shotsense")
