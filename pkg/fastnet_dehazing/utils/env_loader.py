import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

CONFIG_ENV_VAR = "FASTNET_DEHAZE_CONFIG"


def load_environment(env_path: Optional[Path] = None) -> Optional[Path]:
    """Load environment variables from a .env file if one exists.

    Returns the path that was loaded, or None when there was nothing to load.
    Values already present in the process environment win.
    """
    if env_path is None:
        # Project root sits three levels above this file
        current_dir = Path(__file__).resolve()
        project_root = current_dir.parent.parent.parent
        env_path = project_root / ".env"

    if not env_path.exists():
        return None

    load_dotenv(env_path, override=False)
    return env_path


def default_config_path() -> Optional[Path]:
    """Config path named by FASTNET_DEHAZE_CONFIG, if set."""
    value = os.getenv(CONFIG_ENV_VAR)
    if not value:
        return None
    return Path(value)
