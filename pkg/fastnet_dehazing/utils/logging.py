import logging
from datetime import datetime
from typing import List

_ROOT_LOGGER = "fastnet_dehazing"
_configured = False


def get_logger(name: str) -> logging.Logger:
    """Return a logger under the package hierarchy, installing one handler on first use."""
    global _configured
    root = logging.getLogger(_ROOT_LOGGER)
    if not _configured:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(message)s"))
        root.addHandler(handler)
        root.setLevel(logging.INFO)
        root.propagate = False
        _configured = True
    if name == _ROOT_LOGGER or name.startswith(_ROOT_LOGGER + "."):
        return logging.getLogger(name)
    return logging.getLogger(f"{_ROOT_LOGGER}.{name}")


class StepLogger:
    """Mixin that records timestamped, step-typed log entries.

    Entries go to the package logger and are also kept in ``self.logs`` so
    results (histories, reports) can carry the log of the run that made them.
    """

    logger_name = "fastnet_dehazing"

    @property
    def logs(self) -> List[str]:
        if not hasattr(self, "_logs"):
            self._logs = []
        return self._logs

    def _log_step(self, step_type: str, message: str, level: int = logging.INFO):
        """Log a step with timestamp."""
        timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
        log_entry = f"[{timestamp}] {step_type}: {message}"
        get_logger(self.logger_name).log(level, log_entry)
        self.logs.append(log_entry)
