# src/utils/logger.py
import os
import sys

from loguru import logger as _logger

_FORMAT = "{time:HH:mm:ss} - {extra[component]} - {level} - {message}"
_state = {"sink": None, "level": None}


def _install_sink(level):
    if _state["sink"] is None:
        # Drop loguru's default stderr handler once
        _logger.remove()
    else:
        _logger.remove(_state["sink"])
    _state["sink"] = _logger.add(sys.stderr, level=level, format=_FORMAT)
    _state["level"] = level


def setup_logger(name, level=None):
    """Set up a logger for the application"""

    # Avoid adding sinks multiple times; an explicit level reconfigures the sink
    if level is not None:
        level = str(level).upper()
        if level != _state["level"]:
            _install_sink(level)
    elif _state["sink"] is None:
        _install_sink(os.environ.get("TORIC_LOG_LEVEL", "INFO").upper())

    return _logger.bind(component=name)


def set_level(level):
    """Change the level of the shared sink (used by --log-level)"""
    _install_sink(str(level).upper())


# Test function
def test_logger():
    """Test the logger setup"""
    log = setup_logger("TEST")
    log.info("Logger test - this is working!")
    log.debug("Debug message")
    log.warning("Warning message")
    log.error("Error message")


if __name__ == "__main__":
    test_logger()
