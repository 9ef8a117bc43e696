"""Remote/virtual robotics teaching lab orchestration."""

from .config import LabConfig, load_config
from .service import Lab

__all__ = ["Lab", "LabConfig", "load_config"]
__version__ = "0.1.0"
