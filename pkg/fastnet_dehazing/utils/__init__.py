"""
Utilities

Environment loading and the step logger shared by long-running components.
"""

from .env_loader import CONFIG_ENV_VAR, default_config_path, load_environment
from .logging import StepLogger, get_logger

__all__ = ['CONFIG_ENV_VAR', 'default_config_path', 'load_environment', 'StepLogger', 'get_logger']
